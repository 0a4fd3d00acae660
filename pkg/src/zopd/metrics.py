"""Analysis diagnostics: stationarity gap, potential function, parameter
conditions, and the 1/T rate fit.

The gap of a primal-dual pair is the squared norm of the augmented-Lagrangian
primal gradient plus the squared consensus residual:

    gap(x, lam) = || grad_mu(x) + A' lam + rho A'A x ||^2 + || A x ||^2

The potential adds a weighted history term to the smoothed augmented
Lagrangian and is the quantity whose descent the step-size conditions certify.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import NetworkMatrices

__all__ = [
    "MetricRecord",
    "AnalysisConstants",
    "ParamConditionReport",
    "RateFitResult",
    "derive_constants",
    "stationarity_gap",
    "constraint_violation",
    "potential",
    "potential_lower_bound",
    "validate_params",
    "rate_fit",
]


@dataclass
class MetricRecord:
    """One trace row; wall_time stays out of the CSV schema."""

    iteration: int
    stationarity_gap: float
    constraint_violation: float
    potential: float
    objective: float
    wall_time: float = 0.0


@dataclass(frozen=True)
class AnalysisConstants:
    """Derived constants the potential and validator share.

    l1 is the smoothed-gradient Lipschitz constant 2 l0 sqrt(Q) / mu; k
    weights the iterate-difference term inside the potential's history block.
    """

    l0: float
    l1: float
    mu: float
    total_dim: int
    rho: float
    c: float
    k: float
    sigma_min: float
    lplus_norm: float


def derive_constants(
    l0: float, mu: float, total_dim: int, mats: NetworkMatrices, c: float, rho: float
) -> AnalysisConstants:
    if l0 <= 0 or mu <= 0 or rho <= 0 or c <= 0:
        raise ValueError("l0, mu, rho, c must be positive")
    l1 = 2.0 * l0 * math.sqrt(total_dim) / mu
    k = 2.0 * (6.0 * l1**2 / (rho * mats.sigma_min) + 1.5 * c * l1)
    return AnalysisConstants(
        l0=l0,
        l1=l1,
        mu=mu,
        total_dim=total_dim,
        rho=rho,
        c=c,
        k=k,
        sigma_min=mats.sigma_min,
        lplus_norm=mats.lplus_norm,
    )


def stationarity_gap(
    x: np.ndarray,
    lam_prev: np.ndarray,
    grad_smoothed: np.ndarray,
    mats: NetworkMatrices,
    rho: float,
) -> float:
    ax = mats.incidence @ x
    primal_grad = grad_smoothed + mats.incidence.T @ lam_prev + rho * (mats.lminus @ x)
    return float(primal_grad @ primal_grad + ax @ ax)


def constraint_violation(x: np.ndarray, mats: NetworkMatrices) -> float:
    return float(np.linalg.norm(mats.incidence @ x))


def potential(
    x: np.ndarray,
    x_prev: np.ndarray,
    lam: np.ndarray,
    mats: NetworkMatrices,
    consts: AnalysisConstants,
    f_mu_value: float,
) -> float:
    ax = mats.incidence @ x
    lagrangian = f_mu_value + float(lam @ ax) + 0.5 * consts.rho * float(ax @ ax)
    d = x - x_prev
    b_quad = float(d @ (mats.lplus @ d)) + (consts.k / (consts.c * consts.rho)) * float(d @ d)
    history = 0.5 * consts.rho * (float(ax @ ax) + b_quad)
    return lagrangian + consts.c * history


def potential_lower_bound(consts: AnalysisConstants, f_lower: float, samples: int) -> float:
    """Certified floor for the potential along a run with J-sample estimates."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return f_lower - consts.l0 * (consts.total_dim + 4) ** 2 / (consts.sigma_min * samples**2)


@dataclass(frozen=True)
class ParamConditionReport:
    """Sufficient step-size conditions and the descent coefficients.

    alpha2 is reported in both sign conventions; validity rests only on the
    explicit inequalities (required_c, required_rho).
    """

    c: float
    rho: float
    l1: float
    sigma_min: float
    lplus_norm: float
    required_c: float
    required_rho: float
    valid_c: bool
    valid_rho: bool
    valid: bool
    alpha1: float
    alpha2_as_written: float
    alpha2_flipped: float
    alpha3: float


def validate_params(
    l0: float, mu: float, total_dim: int, mats: NetworkMatrices, c: float, rho: float
) -> ParamConditionReport:
    if l0 <= 0 or mu <= 0:
        raise ValueError("l0 and mu must be positive")
    if c <= 0 or rho <= 0:
        raise ValueError("c and rho must be positive")
    l1 = 2.0 * l0 * math.sqrt(total_dim) / mu
    sg, ln = mats.sigma_min, mats.lplus_norm
    required_c = 6.0 * ln / sg
    b = c * l1 + 0.25 * l1 + 0.25 * l1**2 + 0.25
    required_rho = b + math.sqrt(b**2 + 6.0 * l1**2 / sg)
    alpha1 = rho**2 - (2.0 * c * l1 + 0.5 * l1 + 0.5 * l1**2 + 0.5) * rho - 6.0 * l1**2 / sg
    alpha2_written = 3.0 * rho * ln / sg - 0.5 * c * rho
    alpha3 = 9.0 / (rho * sg) + (6.0 * c + 1.0) / l1
    valid_c = c > required_c
    valid_rho = rho > required_rho
    return ParamConditionReport(
        c=c,
        rho=rho,
        l1=l1,
        sigma_min=sg,
        lplus_norm=ln,
        required_c=required_c,
        required_rho=required_rho,
        valid_c=valid_c,
        valid_rho=valid_rho,
        valid=valid_c and valid_rho,
        alpha1=alpha1,
        alpha2_as_written=alpha2_written,
        alpha2_flipped=-alpha2_written,
        alpha3=alpha3,
    )


@dataclass(frozen=True)
class RateFitResult:
    gamma1: float
    constant: float
    rel_residual: float


def rate_fit(horizons: np.ndarray, mean_gaps: np.ndarray) -> RateFitResult:
    """Least-squares fit of mean gap against gamma1 / T + constant."""
    t = np.asarray(horizons, dtype=float)
    y = np.asarray(mean_gaps, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("horizons and mean_gaps must be matching 1-D arrays")
    if t.size < 3:
        raise ValueError("need at least 3 horizon values for the rate fit")
    if np.unique(t).size != t.size:
        raise ValueError("horizon values must be distinct")
    if np.any(t <= 0):
        raise ValueError("horizon values must be positive")
    design = np.column_stack([1.0 / t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    denom = float(np.linalg.norm(y))
    rel = float(np.linalg.norm(y - fitted)) / denom if denom > 0 else 0.0
    return RateFitResult(gamma1=float(coef[0]), constant=float(coef[1]), rel_residual=rel)
