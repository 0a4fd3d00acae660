"""Primal-dual consensus iteration driven by zeroth-order gradient estimates.

Each iteration linearizes the local objectives through their smoothed-gradient
estimates and takes a degree-weighted proximal primal step followed by a dual
ascent step on the edge constraints:

    x+ = (1/(2 rho)) D^-1 (rho Lplus x - g - A' lam)
    lam+ = lam + rho A x+

The primal closed form comes from the first-order condition of the proximal
subproblem g + A' lam + rho A'A x + 2 rho D (x+ - x) = 0.

Randomness is hierarchical: every draw comes from a substream keyed by
(seed, trial, role, agent, iteration), so the centralized matrix-form run and
the distributed message-passing run consume identical streams, and a resumed
run reproduces the remaining iterations bit for bit.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import NetworkMatrices, Topology, build_matrices
from .metrics import (
    AnalysisConstants,
    MetricRecord,
    constraint_violation,
    derive_constants,
    potential,
    stationarity_gap,
)
from .objectives import LocalObjective, StackedObjective
from .szo import (
    NoiseModel,
    SmoothingParams,
    SZOracle,
    estimate_gradient,
    measure_gradient_and_value,
    smoothed_gradient_mc,
    smoothed_value,
)

__all__ = [
    "AlgoParams",
    "Checkpoint",
    "RunResult",
    "substream",
    "primal_step",
    "dual_step",
    "run_centralized",
    "run_distributed",
]

# Substream roles. Baseline methods use their own role ids so the two methods
# never share estimator draws; the init role is shared so both methods start a
# trial from the same point.
ROLE_INIT = 0
ROLE_OUTPUT = 1
ROLE_STEP = 2
ROLE_METER = 3
ROLE_BASELINE_STEP = 4
ROLE_BASELINE_METER = 5


def substream(*path: int) -> np.random.Generator:
    """Deterministic generator for a (seed, trial, role, ...) path."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(p) for p in path)))


@dataclass(frozen=True)
class AlgoParams:
    """Step-size, smoothing, horizon, and randomness configuration."""

    rho: float
    smoothing: SmoothingParams
    total_iters: int
    seed: int
    init_lo: float
    init_hi: float
    noise: NoiseModel = NoiseModel()
    gradient_mode: str = "estimator"
    gap_gradient: str = "auto"
    potential_weight: float | None = None
    mc_gap_samples: int = 10**4
    retry_cap: int = 100

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.total_iters < 1:
            raise ValueError("total_iters must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.init_lo > self.init_hi:
            raise ValueError("init box has lo > hi")
        if self.gradient_mode not in ("estimator", "reference"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.gap_gradient not in ("auto", "closed_form", "estimator", "mc"):
            raise ValueError(f"unknown gap_gradient {self.gap_gradient!r}")
        if self.potential_weight is not None and self.potential_weight <= 0:
            raise ValueError("potential_weight must be positive")


@dataclass
class Checkpoint:
    """Resumable snapshot: iteration counter plus the primal-dual pair."""

    iteration: int
    x: np.ndarray
    lam: np.ndarray

    def to_dict(self) -> dict:
        return {
            "iteration": int(self.iteration),
            "x": [float(v) for v in np.asarray(self.x).ravel()],
            "lam": [float(v) for v in np.asarray(self.lam).ravel()],
        }

    @staticmethod
    def from_dict(d: dict) -> "Checkpoint":
        return Checkpoint(
            iteration=int(d["iteration"]),
            x=np.asarray(d["x"], dtype=float),
            lam=np.asarray(d["lam"], dtype=float),
        )


@dataclass
class RunResult:
    method: str
    trial: int
    records: list[MetricRecord]
    states_x: np.ndarray
    states_lam: np.ndarray
    states_grad: np.ndarray
    output_iteration: int | None
    output_x: np.ndarray | None
    output_lam: np.ndarray | None
    constants: AnalysisConstants
    start_iteration: int = 0
    messages_per_agent: dict[int, int] | None = None

    @property
    def final_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            iteration=self.start_iteration + self.states_x.shape[0] - 1,
            x=self.states_x[-1].copy(),
            lam=self.states_lam[-1].copy(),
        )


def primal_step(
    x: np.ndarray,
    lam: np.ndarray,
    grad: np.ndarray,
    mats: NetworkMatrices,
    rho: float,
) -> np.ndarray:
    """Minimizer of the linearized degree-weighted proximal subproblem."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    numer = rho * (mats.lplus @ x) - grad - mats.incidence.T @ lam
    return numer / (2.0 * rho * mats.degrees_vector)


def dual_step(
    x_new: np.ndarray, lam: np.ndarray, mats: NetworkMatrices, rho: float
) -> np.ndarray:
    """Ascent on the edge constraints: lam + rho A x+."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return lam + rho * (mats.incidence @ x_new)


class _TraceMeter:
    """Resolves the smoothed gradient/value used by the per-iteration trace.

    Modes: closed_form (exact), estimator (independent J-sample measurement
    per agent), mc (high-sample Monte-Carlo). The measurement never feeds the
    algorithm; it only grades iterates.
    """

    def __init__(
        self,
        stacked: StackedObjective,
        oracles: Sequence[SZOracle],
        smoothing: SmoothingParams,
        mode: str,
        mc_samples: int,
        seed: int,
        trial: int,
        role: int,
        retry_cap: int,
    ):
        if mode == "auto":
            mode = "closed_form" if stacked.has_smoothed_closed_form else "estimator"
        if mode == "closed_form" and not stacked.has_smoothed_closed_form:
            raise ValueError("gap_gradient=closed_form but the objective has no closed form")
        self.stacked = stacked
        self.oracles = oracles
        self.smoothing = smoothing
        self.mode = mode
        self.mc_samples = mc_samples
        self.seed = seed
        self.trial = trial
        self.role = role
        self.retry_cap = retry_cap

    def measure(self, x: np.ndarray, iteration: int) -> tuple[np.ndarray, float]:
        st = self.stacked
        if self.mode == "closed_form":
            return (
                st.smoothed_gradient_stacked(x, self.smoothing.mu),
                st.smoothed_value_stacked(x, self.smoothing.mu),
            )
        xb = st.blocks(x)
        grads = []
        total = 0.0
        if self.mode == "estimator":
            for i, oracle in enumerate(self.oracles):
                rng = substream(self.seed, self.trial, self.role, i, iteration)
                g, v = measure_gradient_and_value(
                    oracle, xb[i], self.smoothing, rng, self.retry_cap
                )
                grads.append(g)
                total += v
        else:  # mc
            for i, oracle in enumerate(self.oracles):
                rng = substream(self.seed, self.trial, self.role, i, iteration)
                g, _ = smoothed_gradient_mc(
                    oracle.objective, xb[i], self.smoothing.mu, self.mc_samples, rng
                )
                grads.append(g)
                total += smoothed_value(
                    oracle, xb[i], self.smoothing.mu, self.mc_samples, rng
                )
        return np.concatenate(grads), total


@dataclass
class _RunContext:
    topo: Topology
    mats: NetworkMatrices
    stacked: StackedObjective
    step_oracles: list[SZOracle]
    meter: _TraceMeter
    consts: AnalysisConstants
    x0: np.ndarray
    output_pick: int


def _prepare(
    topo: Topology,
    objectives: Sequence[LocalObjective],
    params: AlgoParams,
    trial: int,
    mats: NetworkMatrices | None,
    meter_role: int,
) -> _RunContext:
    if len(objectives) != topo.num_nodes:
        raise ValueError(
            f"need one objective per node: got {len(objectives)} for {topo.num_nodes} nodes"
        )
    for o in objectives:
        if o.dim != topo.block_dim:
            raise ValueError("objective dim does not match topology block_dim")
    if mats is None:
        mats = build_matrices(topo)
    stacked = StackedObjective(list(objectives))
    for o in objectives:
        if np.any(o.box.lo > params.init_lo) or np.any(o.box.hi < params.init_hi):
            raise ValueError("initialization box must lie inside every domain box")
    if params.gradient_mode == "reference" and not stacked.has_smoothed_closed_form:
        raise ValueError("gradient_mode=reference needs closed-form smoothed gradients")

    step_oracles = [SZOracle(o, params.noise) for o in objectives]
    meter_oracles = [SZOracle(o, params.noise) for o in objectives]
    meter = _TraceMeter(
        stacked,
        meter_oracles,
        params.smoothing,
        params.gap_gradient,
        params.mc_gap_samples,
        params.seed,
        trial,
        meter_role,
        params.retry_cap,
    )

    c = params.potential_weight
    if c is None:
        c = 1.1 * 6.0 * mats.lplus_norm / mats.sigma_min
    consts = derive_constants(
        stacked.lipschitz_l0, params.smoothing.mu, stacked.total_dim, mats, c, params.rho
    )

    m = topo.block_dim
    blocks = [
        substream(params.seed, trial, ROLE_INIT, i).uniform(params.init_lo, params.init_hi, m)
        for i in range(topo.num_nodes)
    ]
    x0 = np.concatenate(blocks)
    output_pick = int(substream(params.seed, trial, ROLE_OUTPUT).integers(params.total_iters))
    return _RunContext(topo, mats, stacked, step_oracles, meter, consts, x0, output_pick)


def _step_gradient(
    ctx: _RunContext, params: AlgoParams, trial: int, x: np.ndarray, iteration: int, role: int
) -> np.ndarray:
    if params.gradient_mode == "reference":
        return ctx.stacked.smoothed_gradient_stacked(x, params.smoothing.mu)
    xb = ctx.stacked.blocks(x)
    parts = [
        estimate_gradient(
            ctx.step_oracles[i],
            xb[i],
            params.smoothing,
            substream(params.seed, trial, role, i, iteration),
            params.retry_cap,
        )
        for i in range(ctx.topo.num_nodes)
    ]
    return np.concatenate(parts)


def _record_row(
    ctx: _RunContext,
    params: AlgoParams,
    iteration: int,
    x: np.ndarray,
    x_prev: np.ndarray,
    lam: np.ndarray,
    lam_prev: np.ndarray,
    t0: float,
) -> MetricRecord:
    grad_gap, f_mu = ctx.meter.measure(x, iteration)
    return MetricRecord(
        iteration=iteration,
        stationarity_gap=stationarity_gap(x, lam_prev, grad_gap, ctx.mats, params.rho),
        constraint_violation=constraint_violation(x, ctx.mats),
        potential=potential(x, x_prev, lam, ctx.mats, ctx.consts, f_mu),
        objective=ctx.stacked.value(x),
        wall_time=time.perf_counter() - t0,
    )


def run_centralized(
    topo: Topology,
    objectives: Sequence[LocalObjective],
    params: AlgoParams,
    trial: int = 0,
    mats: NetworkMatrices | None = None,
    resume: Checkpoint | None = None,
    on_record: Callable[[MetricRecord], None] | None = None,
) -> RunResult:
    """Matrix-form execution. Emits one metric row per iteration 1..T; row r
    grades the pair (x^r, lam^{r-1}) and the potential at (x^r, lam^r)."""
    ctx = _prepare(topo, objectives, params, trial, mats, ROLE_METER)
    t0 = time.perf_counter()
    tt = params.total_iters

    if resume is None:
        start = 0
        x = ctx.x0.copy()
        lam = np.zeros(ctx.mats.edge_dim)
    else:
        start = int(resume.iteration)
        if not 0 <= start < tt:
            raise ValueError("checkpoint iteration outside 0..T-1")
        x = np.asarray(resume.x, dtype=float).copy()
        lam = np.asarray(resume.lam, dtype=float).copy()

    xs = [x.copy()]
    lams = [lam.copy()]
    gs = []
    records: list[MetricRecord] = []
    x_prev = None
    lam_prev = None
    out_x = out_lam = None
    out_iter = None

    for r in range(start, tt):
        if r == ctx.output_pick:
            out_x, out_lam, out_iter = x.copy(), lam.copy(), r
        if r > start:
            rec = _record_row(ctx, params, r, x, x_prev, lam, lam_prev, t0)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
        g = _step_gradient(ctx, params, trial, x, r, ROLE_STEP)
        x_new = primal_step(x, lam, g, ctx.mats, params.rho)
        lam_new = dual_step(x_new, lam, ctx.mats, params.rho)
        x_prev, lam_prev = x, lam
        x, lam = x_new, lam_new
        xs.append(x.copy())
        lams.append(lam.copy())
        gs.append(g)

    rec = _record_row(ctx, params, tt, x, x_prev, lam, lam_prev, t0)
    records.append(rec)
    if on_record is not None:
        on_record(rec)

    return RunResult(
        method="primal_dual",
        trial=trial,
        records=records,
        states_x=np.asarray(xs),
        states_lam=np.asarray(lams),
        states_grad=np.asarray(gs),
        output_iteration=out_iter,
        output_x=out_x,
        output_lam=out_lam,
        constants=ctx.consts,
        start_iteration=start,
    )


class _Agent:
    """One node of the message-passing simulation.

    Holds its primal block, a cache of neighbor primals, and a copy of the
    dual for every incident edge. Both endpoints update their copies from the
    exchanged primals, so the copies never diverge; the listed-first endpoint
    is the owner whose copy assembles the stacked dual.
    """

    def __init__(self, index: int, topo: Topology, oracle: SZOracle, x0: np.ndarray):
        self.index = index
        self.oracle = oracle
        self.x = x0.copy()
        self.neighbors = topo.neighbors(index)
        self.degree = len(self.neighbors)
        self.incident = [
            (k, e) for k, e in enumerate(topo.edges) if index in e
        ]
        m = topo.block_dim
        self.duals = {k: np.zeros(m) for k, _ in self.incident}
        self.neighbor_x: dict[int, np.ndarray] = {}
        self.messages_sent = 0

    def dual_pressure(self) -> np.ndarray:
        """This block of A' lam, from local dual copies (edge order)."""
        out = np.zeros_like(self.x)
        for k, (a, b) in self.incident:
            out += self.duals[k] if a == self.index else -self.duals[k]
        return out

    def primal_update(self, grad: np.ndarray, rho: float) -> np.ndarray:
        acc = self.degree * self.x
        for j in self.neighbors:
            acc = acc + self.neighbor_x[j]
        numer = rho * acc - grad - self.dual_pressure()
        return numer / (2.0 * rho * self.degree)

    def dual_update(self, new_x: dict[int, np.ndarray], rho: float) -> None:
        for k, (a, b) in self.incident:
            self.duals[k] = self.duals[k] + rho * (new_x[a] - new_x[b])


def run_distributed(
    topo: Topology,
    objectives: Sequence[LocalObjective],
    params: AlgoParams,
    trial: int = 0,
    mats: NetworkMatrices | None = None,
    on_record: Callable[[MetricRecord], None] | None = None,
) -> RunResult:
    """Message-passing execution of the same iteration.

    Per round each agent sends every neighbor two messages: its updated
    primal block and its copy of the shared edge dual. The trace is computed
    by an observer from the gathered stacked state, with the same meter
    streams as the centralized mode.
    """
    ctx = _prepare(topo, objectives, params, trial, mats, ROLE_METER)
    t0 = time.perf_counter()
    tt = params.total_iters
    n, m = topo.num_nodes, topo.block_dim

    agents = [
        _Agent(i + 1, topo, ctx.step_oracles[i], ctx.x0[i * m : (i + 1) * m])
        for i in range(n)
    ]
    index_of = {a.index: a for a in agents}
    # setup: distribute initial primals (not counted against per-round traffic)
    for a in agents:
        for j in a.neighbors:
            index_of[j].neighbor_x[a.index] = a.x.copy()

    def gather_x() -> np.ndarray:
        return np.concatenate([a.x for a in agents])

    def gather_lam() -> np.ndarray:
        parts = []
        for k, (a, b) in enumerate(topo.edges):
            parts.append(index_of[a].duals[k])
        return np.concatenate(parts)

    xs = [gather_x()]
    lams = [gather_lam()]
    gs = []
    records: list[MetricRecord] = []
    x_prev = None
    lam_prev = None
    out_x = out_lam = None
    out_iter = None

    for r in range(tt):
        x_stk = gather_x()
        lam_stk = gather_lam()
        if r == ctx.output_pick:
            out_x, out_lam, out_iter = x_stk.copy(), lam_stk.copy(), r
        if r > 0:
            rec = _record_row(ctx, params, r, x_stk, x_prev, lam_stk, lam_prev, t0)
            records.append(rec)
            if on_record is not None:
                on_record(rec)

        new_blocks: dict[int, np.ndarray] = {}
        round_grads = []
        for i, agent in enumerate(agents):
            if params.gradient_mode == "reference":
                g_i = objectives[i].smoothed_gradient(agent.x, params.smoothing.mu)
            else:
                g_i = estimate_gradient(
                    agent.oracle,
                    agent.x,
                    params.smoothing,
                    substream(params.seed, trial, ROLE_STEP, i, r),
                    params.retry_cap,
                )
            round_grads.append(np.asarray(g_i, dtype=float))
            new_blocks[agent.index] = agent.primal_update(g_i, params.rho)
        gs.append(np.concatenate(round_grads))

        # exchange round: primal block + dual copy to every neighbor
        for agent in agents:
            for j in agent.neighbors:
                peer = index_of[j]
                peer.neighbor_x[agent.index] = new_blocks[agent.index]
                agent.messages_sent += 2

        for agent in agents:
            known = {agent.index: new_blocks[agent.index]}
            for j in agent.neighbors:
                known[j] = agent.neighbor_x[j]
            agent.dual_update(known, params.rho)
            agent.x = new_blocks[agent.index]

        x_prev, lam_prev = x_stk, lam_stk
        xs.append(gather_x())
        lams.append(gather_lam())

    x_stk = gather_x()
    rec = _record_row(ctx, params, tt, x_stk, x_prev, gather_lam(), lam_prev, t0)
    records.append(rec)
    if on_record is not None:
        on_record(rec)

    return RunResult(
        method="primal_dual",
        trial=trial,
        records=records,
        states_x=np.asarray(xs),
        states_lam=np.asarray(lams),
        states_grad=np.asarray(gs),
        output_iteration=out_iter,
        output_x=out_x,
        output_lam=out_lam,
        constants=ctx.consts,
        messages_per_agent={a.index: 2 * a.degree for a in agents},
    )
