"""Stochastic zeroth-order oracle and the two-point smoothed-gradient estimator.

A gradient estimate at x draws, per sample, a Gaussian direction phi and one
noise realization xi shared by the two oracle queries of that sample:

    g_j = (H(x + mu phi_j, xi_j) - H(x, xi_j)) / mu * phi_j

and averages the batch. Draw order is fixed (per sample: phi, any in-box
retries, then xi), so a batch of J samples consumes the rng stream exactly as
J consecutive single-sample calls do; the batch mean is bitwise the mean of
those single-sample estimates away from the domain boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import LocalObjective

__all__ = [
    "NoiseModel",
    "SmoothingParams",
    "SZOracle",
    "estimate_gradient",
    "measure_gradient_and_value",
    "smoothed_value",
    "smoothed_gradient_mc",
    "smoothed_gradient_reference",
    "estimator_norm_diagnostic",
]


@dataclass(frozen=True)
class NoiseModel:
    """Additive query noise; kind 'none' consumes no rng draws."""

    kind: str = "none"
    std_dev: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "additive_gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.std_dev < 0:
            raise ValueError("std_dev must be nonnegative")
        if self.kind == "none" and self.std_dev != 0.0:
            raise ValueError("noise kind 'none' cannot carry a std_dev")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "none":
            return 0.0
        return self.std_dev * rng.standard_normal()


@dataclass(frozen=True)
class SmoothingParams:
    """Gaussian smoothing radius mu and per-estimate sample count."""

    mu: float
    samples: int

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


class SZOracle:
    """Noisy value access to one local objective, restricted to its box."""

    def __init__(self, objective: LocalObjective, noise: NoiseModel = NoiseModel()):
        self.objective = objective
        self.noise = noise
        self.query_count = 0

    def query(self, x: np.ndarray, rng: np.random.Generator) -> float:
        x = np.asarray(x, dtype=float)
        if not self.objective.box.contains(x):
            raise ValueError("query point outside the domain box")
        self.query_count += 1
        return self.objective.value(x) + self.noise.draw(rng)


def _draw_samples(
    oracle: SZOracle,
    x: np.ndarray,
    smoothing: SmoothingParams,
    rng: np.random.Generator,
    retry_cap: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Canonical sampling core: returns (phis, xis, perturbed values, base value)."""
    obj = oracle.objective
    box = obj.box
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dim,):
        raise ValueError(f"point must have shape ({obj.dim},)")
    if not box.contains(x):
        raise ValueError("query point outside the domain box")
    mu, j = smoothing.mu, smoothing.samples

    # Without noise draws interleaved, one block draw consumes the stream
    # exactly like j per-sample draws, so the all-in-box case can skip the
    # python walk and a partial block still seeds its candidate queue.
    prefetched: list[np.ndarray] = []
    if oracle.noise.kind == "none":
        block = rng.standard_normal((j, obj.dim))
        if bool(np.all(box.contains_rows(x + mu * block))):
            pert_vals = obj.value_many(x + mu * block)
            base_val = float(obj.value_many(x.reshape(1, obj.dim))[0])
            oracle.query_count += 2 * j  # two queries per sample, shared xi
            return block, np.zeros(j), pert_vals, base_val
        prefetched = list(block[::-1])

    phis = np.empty((j, obj.dim))
    xis = np.zeros(j)
    for s in range(j):
        phi = prefetched.pop() if prefetched else rng.standard_normal(obj.dim)
        tries = 0
        while not box.contains(x + mu * phi):
            tries += 1
            if tries > retry_cap:
                raise RuntimeError(
                    f"smoothing perturbation left the domain box {retry_cap} times; "
                    "move the point away from the boundary or shrink mu"
                )
            phi = prefetched.pop() if prefetched else rng.standard_normal(obj.dim)
        phis[s] = phi
        xis[s] = oracle.noise.draw(rng)
    pert_vals = obj.value_many(x + mu * phis)
    base_val = float(obj.value_many(x.reshape(1, obj.dim))[0])
    oracle.query_count += 2 * j  # two queries per sample, shared xi
    return phis, xis, pert_vals, base_val


def estimate_gradient(
    oracle: SZOracle,
    x: np.ndarray,
    smoothing: SmoothingParams,
    rng: np.random.Generator,
    retry_cap: int = 100,
) -> np.ndarray:
    """Batch-averaged two-point estimate of the smoothed gradient at x."""
    phis, xis, pert_vals, base_val = _draw_samples(oracle, x, smoothing, rng, retry_cap)
    diffs = (pert_vals + xis) - (base_val + xis)
    grads = (diffs / smoothing.mu)[:, None] * phis
    return np.mean(grads, axis=0)


def measure_gradient_and_value(
    oracle: SZOracle,
    x: np.ndarray,
    smoothing: SmoothingParams,
    rng: np.random.Generator,
    retry_cap: int = 100,
) -> tuple[np.ndarray, float]:
    """Gradient estimate plus an unbiased smoothed-value estimate from the
    same samples (mean of the perturbed noisy values)."""
    phis, xis, pert_vals, base_val = _draw_samples(oracle, x, smoothing, rng, retry_cap)
    diffs = (pert_vals + xis) - (base_val + xis)
    grads = (diffs / smoothing.mu)[:, None] * phis
    return np.mean(grads, axis=0), float(np.mean(pert_vals + xis))


def smoothed_value(
    oracle: SZOracle,
    x: np.ndarray,
    mu: float,
    mc_samples: int,
    rng: np.random.Generator,
    retry_cap: int = 100,
    chunk: int = 1 << 16,
) -> float:
    """Monte-Carlo estimate of E_phi[f(x + mu phi)] from noisy queries.

    Draws arrive in fixed-size blocks (direction rows, then the noise column
    when present); rows that escape the box are redrawn in ascending order.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    obj = oracle.objective
    box = obj.box
    x = np.asarray(x, dtype=float)
    if not box.contains(x):
        raise ValueError("query point outside the domain box")
    noisy = oracle.noise.kind != "none"
    total = 0.0
    done = 0
    while done < mc_samples:
        c = min(chunk, mc_samples - done)
        block = rng.standard_normal((c, obj.dim + 1) if noisy else (c, obj.dim))
        phis = block[:, : obj.dim]
        xis = oracle.noise.std_dev * block[:, obj.dim] if noisy else np.zeros(c)
        pts = x + mu * phis
        ok = box.contains_rows(pts)
        for row in np.flatnonzero(~ok):
            tries = 0
            while True:
                phi = rng.standard_normal(obj.dim)
                if box.contains(x + mu * phi):
                    break
                tries += 1
                if tries > retry_cap:
                    raise RuntimeError(
                        "smoothing perturbation left the domain box repeatedly"
                    )
            phis[row] = phi
            pts[row] = x + mu * phi
        total += float(np.sum(obj.value_many(pts) + xis))
        oracle.query_count += c
        done += c
    return total / mc_samples


def smoothed_gradient_mc(
    objective: LocalObjective,
    x: np.ndarray,
    mu: float,
    mc_samples: int,
    rng: np.random.Generator,
    retry_cap: int = 100,
    chunk: int = 1 << 16,
) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free Monte-Carlo reference of the smoothed gradient.

    Averages ((f(x + mu phi) - f(x)) / mu) phi; returns (estimate,
    per-coordinate standard error).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    box = objective.box
    x = np.asarray(x, dtype=float)
    if not box.contains(x):
        raise ValueError("query point outside the domain box")
    base = float(objective.value_many(x.reshape(1, objective.dim))[0])
    dim = objective.dim
    acc = np.zeros(dim)
    acc_sq = np.zeros(dim)
    done = 0
    while done < mc_samples:
        c = min(chunk, mc_samples - done)
        phis = rng.standard_normal((c, dim))
        pts = x + mu * phis
        ok = box.contains_rows(pts)
        for row in np.flatnonzero(~ok):
            tries = 0
            while True:
                phi = rng.standard_normal(dim)
                if box.contains(x + mu * phi):
                    break
                tries += 1
                if tries > retry_cap:
                    raise RuntimeError(
                        "smoothing perturbation left the domain box repeatedly"
                    )
            phis[row] = phi
            pts[row] = x + mu * phi
        g = ((objective.value_many(pts) - base) / mu)[:, None] * phis
        acc += np.sum(g, axis=0)
        acc_sq += np.sum(g * g, axis=0)
        done += c
    mean = acc / mc_samples
    var = np.maximum(acc_sq / mc_samples - mean**2, 0.0)
    stderr = np.sqrt(var / mc_samples)
    return mean, stderr


def smoothed_gradient_reference(
    objective: LocalObjective,
    x: np.ndarray,
    mu: float,
    mc_samples: int = 10**4,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Exact closed form when the objective carries one, else Monte-Carlo."""
    if objective.smoothed_gradient is not None:
        return np.asarray(objective.smoothed_gradient(np.asarray(x, dtype=float), mu))
    if rng is None:
        raise ValueError("objective has no closed form; an rng is required for MC")
    return smoothed_gradient_mc(objective, x, mu, mc_samples, rng)[0]


def estimator_norm_diagnostic(
    oracle: SZOracle,
    x: np.ndarray,
    smoothing: SmoothingParams,
    replicates: int,
    rng: np.random.Generator,
    reference_grad: np.ndarray | None = None,
) -> dict:
    """Empirical second moments of the estimator across replicates.

    Reports the mean squared norm E||g||^2 and mean squared deviation
    E||g - grad_mu||^2 with standard errors, alongside the claimed bound
    L0^2 (dim+4)^2 / J^2 for side-by-side inspection.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    obj = oracle.objective
    if reference_grad is None:
        reference_grad = smoothed_gradient_reference(
            obj, x, smoothing.mu, mc_samples=10**4, rng=rng
        )
    reference_grad = np.asarray(reference_grad, dtype=float)
    sq_norms = np.empty(replicates)
    sq_devs = np.empty(replicates)
    for r in range(replicates):
        g = estimate_gradient(oracle, x, smoothing, rng)
        sq_norms[r] = float(g @ g)
        d = g - reference_grad
        sq_devs[r] = float(d @ d)
    bound = obj.lipschitz_l0**2 * (obj.dim + 4) ** 2 / smoothing.samples**2
    return {
        "mean_sq_norm": float(np.mean(sq_norms)),
        "mean_sq_norm_se": float(np.std(sq_norms, ddof=1) / np.sqrt(replicates)),
        "mean_sq_deviation": float(np.mean(sq_devs)),
        "mean_sq_deviation_se": float(np.std(sq_devs, ddof=1) / np.sqrt(replicates)),
        "theoretical_bound": float(bound),
        "replicates": replicates,
        "samples": smoothing.samples,
    }
