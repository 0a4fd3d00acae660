"""Gradient-free consensus baseline: mixing plus a diminishing estimator step.

Each round every agent averages with its neighbors through a
Metropolis-Hastings mixing matrix and subtracts a single-sample two-point
gradient estimate scaled by step_scale / sqrt(round):

    x_i+ = sum_j W_ij x_j - (step_scale / sqrt(r)) g_i

This is a qualitative comparison method; its trace reuses the primal-dual
gap and potential functionals evaluated at a zero dual, so the two methods'
CSV traces overlay directly.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .engine import (
    ROLE_BASELINE_METER,
    ROLE_BASELINE_STEP,
    AlgoParams,
    RunResult,
    _prepare,
    _record_row,
    substream,
)
from .graph import NetworkMatrices, Topology
from .objectives import LocalObjective
from .szo import SmoothingParams, estimate_gradient

__all__ = ["RGFParams", "build_mixing", "apply_mixing", "rgf_step", "run_rgf"]


@dataclass(frozen=True)
class RGFParams:
    """Baseline knobs: step-size scale, smoothing radius, horizon."""

    step_scale: float = 1.0
    mu: float = 1e-2
    total_iters: int = 1000
    mixing: str = "metropolis"

    def __post_init__(self):
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.total_iters < 1:
            raise ValueError("total_iters must be >= 1")
        if self.mixing != "metropolis":
            raise ValueError(f"unknown mixing rule {self.mixing!r}")


def build_mixing(topo: Topology) -> np.ndarray:
    """Metropolis-Hastings weights: W_ij = 1 / (1 + max(d_i, d_j)) on edges,
    diagonal filled to make rows sum to one. Symmetric, doubly stochastic."""
    n = topo.num_nodes
    deg = topo.degrees()
    w = np.zeros((n, n))
    for i, j in topo.edges:
        a, b = i - 1, j - 1
        val = 1.0 / (1.0 + max(deg[a], deg[b]))
        w[a, b] = val
        w[b, a] = val
    for a in range(n):
        w[a, a] = 1.0 - float(np.sum(w[a])) + w[a, a]
    return w


def apply_mixing(weights: np.ndarray, topo: Topology, blocks: np.ndarray) -> np.ndarray:
    """Difference-form mixing: x_i + sum_j W_ij (x_j - x_i).

    Equal to W x row by row, but consensual inputs are fixed points exactly
    (every difference vanishes), which the dense product cannot guarantee in
    floating point.
    """
    out = blocks.copy()
    for i, j in topo.edges:
        a, b = i - 1, j - 1
        coupling = weights[a, b]
        diff_ab = blocks[b] - blocks[a]
        out[a] = out[a] + coupling * diff_ab
        out[b] = out[b] - coupling * diff_ab
    return out


def rgf_step(
    blocks: np.ndarray,
    grads: np.ndarray,
    weights: np.ndarray,
    topo: Topology,
    step_scale: float,
    round_index: int,
) -> np.ndarray:
    """One baseline round; round_index counts from 1 for the 1/sqrt decay."""
    if round_index < 1:
        raise ValueError("round_index counts from 1")
    step = step_scale / np.sqrt(float(round_index))
    return apply_mixing(weights, topo, blocks) - step * grads


def run_rgf(
    topo: Topology,
    objectives: list[LocalObjective],
    params: AlgoParams,
    rgf: RGFParams,
    trial: int = 0,
    mats: NetworkMatrices | None = None,
) -> RunResult:
    """Baseline trial sharing the algorithm's init stream (same x^0) but its
    own estimator substreams. The dual is identically zero in every record."""
    ctx = _prepare(topo, objectives, params, trial, mats, ROLE_BASELINE_METER)
    t0 = time.perf_counter()
    n, m = topo.num_nodes, topo.block_dim
    weights = build_mixing(topo)
    single = SmoothingParams(mu=rgf.mu, samples=1)
    zero_lam = np.zeros(ctx.mats.edge_dim)

    blocks = ctx.stacked.blocks(ctx.x0).copy()
    xs = [blocks.reshape(-1).copy()]
    lams = [zero_lam.copy()]
    gs = []
    records = []
    prev_stacked = None

    for r in range(rgf.total_iters):
        x_stk = blocks.reshape(-1).copy()
        if r > 0:
            records.append(
                _record_row(ctx, params, r, x_stk, prev_stacked, zero_lam, zero_lam, t0)
            )
        grads = np.empty_like(blocks)
        for i in range(n):
            grads[i] = estimate_gradient(
                ctx.step_oracles[i],
                blocks[i],
                single,
                substream(params.seed, trial, ROLE_BASELINE_STEP, i, r),
                params.retry_cap,
            )
        blocks = rgf_step(blocks, grads, weights, topo, rgf.step_scale, r + 1)
        prev_stacked = x_stk
        xs.append(blocks.reshape(-1).copy())
        lams.append(zero_lam.copy())
        gs.append(grads.reshape(-1).copy())

    records.append(
        _record_row(
            ctx, params, rgf.total_iters, blocks.reshape(-1), prev_stacked, zero_lam, zero_lam, t0
        )
    )

    return RunResult(
        method="rgf",
        trial=trial,
        records=records,
        states_x=np.asarray(xs),
        states_lam=np.asarray(lams),
        states_grad=np.asarray(gs),
        output_iteration=None,
        output_x=None,
        output_lam=None,
        constants=ctx.consts,
    )
