"""Sequential-measurement correlators, the three-time parameter K3, and
optimization/sweeps over the (gamma, q) plane.

Protocol: prepare the +1 eigenstate of sigma_y, measure sigma_y projectively
at times 0, t, 2t.  With the (normalized) evolved states

    rho~(t)   : evolved initial state,
    rho~+-(t) : evolved post-measurement projectors P_+-,

the three two-time correlators are

    C01(t) = Tr[sigma_y rho~(t)],
    C12(t) = Tr[sigma_y rho~+(t)] p+(t) - Tr[sigma_y rho~-(t)] p-(t),
    C02(t) = Tr[sigma_y rho~(2t)],

with branch weights p+-(t) = Tr[P_+- rho~(t)], and K3 = C01 + C12 - C02.

Because the conditioned evolution shrinks the trace, readout ratios stay
numerically well-posed far below any physically meaningful trace (all decay
envelopes are shared), so the optimizer and sweeps treat a time point as
extinguished only when the trace drops under ``SWEEP_TRACE_FLOOR`` near the
double-precision underflow limit.  Point evaluations via
:func:`correlators` keep the stricter observation-point default.
"""

import math
import multiprocessing
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import model
from .dynamics import EvolveConfig, Propagator, evolve_rk4
from .errors import HybridLGError, TrajectoryExtinguishedError

#: trace floor used by optimize/sweep; guards float underflow only, so that
#: strongly conditioned ensembles (q -> 0 at long times) remain scannable.
SWEEP_TRACE_FLOOR = 1e-250

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CorrelatorRecord:
    """Correlators and K3 for one measurement interval t."""

    t: float
    c01: float
    c12: float
    c02: float
    k3: float
    p_plus: float
    p_minus: float


def _sy_of(rho) -> float:
    return float(np.trace(rho @ model.SIGMA_Y).real)


def _normalized(rho, eps_trace, context):
    trace = float(np.trace(rho).real)
    if trace < eps_trace:
        raise TrajectoryExtinguishedError(trace, context=context)
    return rho / trace


def correlators(params: model.ModelParams, t, engine="exact",
                eps_trace=1e-12, dt=1e-3, propagator=None) -> CorrelatorRecord:
    """Evaluate C01, C12, C02 and K3 at interval t.

    ``engine`` selects the propagation route: "exact" (matrix exponential /
    spectral, the default) or "rk4".  A trajectory whose trace falls below
    ``eps_trace`` raises with the offending branch named.
    """
    if not t > 0:
        raise ValueError(f"expected t > 0, got {t}")
    if propagator is not None and propagator.params != params:
        raise ValueError(
            f"propagator was built for {propagator.params}, not {params}")
    if engine == "exact":
        prop = propagator if propagator is not None else Propagator(params)
        rho_plus_t, rho_plus_2t = prop.states(model.PROJECTOR_PLUS, [t, 2.0 * t])
        rho_minus_t = prop.state(model.PROJECTOR_MINUS, t)
    elif engine == "rk4":
        cfg = EvolveConfig(dt=dt, method="rk4")
        rho_plus_t = evolve_rk4(model.PROJECTOR_PLUS, params, t, cfg)
        rho_plus_2t = evolve_rk4(model.PROJECTOR_PLUS, params, 2.0 * t, cfg)
        rho_minus_t = evolve_rk4(model.PROJECTOR_MINUS, params, t, cfg)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    # rho(0) = P_+, so the evolved initial state and the + branch coincide.
    state_t = _normalized(rho_plus_t, eps_trace, "branch + at t")
    state_2t = _normalized(rho_plus_2t, eps_trace, "branch + at 2t")
    branch_minus = _normalized(rho_minus_t, eps_trace, "branch - at t")

    c01 = _sy_of(state_t)
    p_plus = float(np.trace(model.PROJECTOR_PLUS @ state_t).real)
    p_minus = float(np.trace(model.PROJECTOR_MINUS @ state_t).real)
    c12 = _sy_of(state_t) * p_plus - _sy_of(branch_minus) * p_minus
    c02 = _sy_of(state_2t)
    return CorrelatorRecord(
        t=float(t), c01=c01, c12=c12, c02=c02, k3=c01 + c12 - c02,
        p_plus=p_plus, p_minus=p_minus,
    )


def k3(params: model.ModelParams, t, engine="exact", eps_trace=1e-12) -> float:
    """K3(t) = C01(t) + C12(t) - C02(t)."""
    return correlators(params, t, engine=engine, eps_trace=eps_trace).k3


def _k3_curve(prop: Propagator, times, eps_trace) -> np.ndarray:
    """Vectorized K3 over a batch of times; extinguished points become NaN.

    Mirrors :func:`correlators` (asserted equal in the test suite); exists so
    grid scans cost one propagator application per batch instead of three
    matrix exponentials per point.
    """
    times = np.asarray(times, dtype=float)

    def normalized_sy(rho0, ts):
        states = prop.states(rho0, ts)
        traces = np.trace(states, axis1=1, axis2=2).real
        sy = np.einsum("nij,ji->n", states, model.SIGMA_Y).real
        bad = ~(traces >= eps_trace)
        return np.where(bad, np.nan, sy / np.where(bad, 1.0, traces))

    sy_plus = normalized_sy(model.PROJECTOR_PLUS, times)
    sy_minus = normalized_sy(model.PROJECTOR_MINUS, times)
    sy_plus_2t = normalized_sy(model.PROJECTOR_PLUS, 2.0 * times)
    p_plus = 0.5 * (1.0 + sy_plus)
    p_minus = 0.5 * (1.0 - sy_plus)
    return sy_plus + (sy_plus * p_plus - sy_minus * p_minus) - sy_plus_2t


class K3Optimum(NamedTuple):
    """Result of maximizing K3 over the measurement interval."""

    k3_max: float
    t_star: float
    masked: bool = False


@dataclass(frozen=True)
class OptimizeConfig:
    """Grid scan plus local refinement controls for the K3 maximization."""

    t_max: float | None = None     # default 20 / J
    resolution: int = 2000
    refine_tol: float = 1e-6
    eps_trace: float = SWEEP_TRACE_FLOOR

    def horizon(self, params: model.ModelParams) -> float:
        if self.t_max is not None:
            return self.t_max
        if params.J <= 0:
            raise ValueError("t_max must be given explicitly when J = 0")
        return 20.0 / params.J


#: grid peaks within this window of the global grid maximum are all refined,
#: so equal-height peaks of a (near-)periodic landscape resolve toward the
#: earliest maximizer instead of whichever one the grid happened to sample
#: closest to its crest.
_PEAK_WINDOW = 1e-3

#: refined values closer than this count as a tie (broken toward smaller t)
_TIE_TOL = 1e-9


def _refine_peak(prop, lo, hi, config):
    """4x re-scan of the bracket (aliasing guard), then golden-section."""
    rescan_ts = np.linspace(lo, hi, 9)
    rescan = _k3_curve(prop, rescan_ts, config.eps_trace)
    rescan = np.where(np.isfinite(rescan), rescan, -np.inf)
    j = int(np.argmax(rescan))
    a = rescan_ts[max(j - 1, 0)]
    b = rescan_ts[min(j + 1, len(rescan_ts) - 1)]

    def value(t):
        out = _k3_curve(prop, [t], config.eps_trace)[0]
        return out if np.isfinite(out) else -np.inf

    while b - a > config.refine_tol:
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        if value(c) > value(d):
            b = d
        else:
            a = c
    refined = 0.5 * (a + b)
    candidates = [
        (float(rescan_ts[j]), float(rescan[j])),
        (float(refined), float(value(refined))),
    ]
    return max(candidates, key=lambda item: (item[1], -item[0]))


def optimize_k3(params: model.ModelParams, config: OptimizeConfig = OptimizeConfig()
                ) -> K3Optimum:
    """Deterministic maximization of K3(t) over t in (0, t_max].

    A uniform scan locates candidate peaks (every local maximum within a
    small window of the global grid maximum); each is re-scanned at 4x the
    grid density to guard against aliasing of the oscillatory landscape and
    then refined by golden section to ``refine_tol``.  Refined values within
    1e-9 are ties and resolve toward the smallest t.  Time points whose trace
    fell below the floor are skipped; if every point is extinguished the
    result is masked (NaN).
    """
    prop = Propagator(params)
    horizon = config.horizon(params)
    n = config.resolution
    grid = np.linspace(horizon / n, horizon, n)
    curve = _k3_curve(prop, grid, config.eps_trace)
    finite = np.isfinite(curve)
    if not finite.any():
        return K3Optimum(k3_max=math.nan, t_star=math.nan, masked=True)
    masked_curve = np.where(finite, curve, -np.inf)
    vmax = float(np.max(masked_curve))

    padded = np.concatenate(([-np.inf], masked_curve, [-np.inf]))
    is_peak = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:])
    peak_indices = [
        i for i in np.flatnonzero(is_peak)
        if masked_curve[i] >= vmax - _PEAK_WINDOW
    ]
    if not peak_indices:
        peak_indices = [int(np.argmax(masked_curve))]

    best_t, best_value = math.inf, -math.inf
    for i in peak_indices:
        # a maximum on the first grid point may really live on the open
        # t -> 0+ boundary; let the bracket reach down to the refinement
        # scale so the result does not depend on the coarse grid density
        lo = grid[i - 1] if i >= 1 else min(config.refine_tol, grid[0] / 2)
        hi = grid[min(i + 1, n - 1)]
        t_at, value = _refine_peak(prop, lo, hi, config)
        if value > best_value + _TIE_TOL or (
            abs(value - best_value) <= _TIE_TOL and t_at < best_t
        ):
            best_t, best_value = t_at, value
    return K3Optimum(k3_max=best_value, t_star=best_t, masked=False)


@dataclass(frozen=True)
class SweepResult:
    """K3 landscape over a (gamma, q) grid.

    ``k3_max``/``t_star`` have shape (len(gamma_grid), len(q_grid)); masked
    cells carry NaN with the failure message recorded under their index pair.
    """

    gamma_grid: np.ndarray
    q_grid: np.ndarray
    k3_max: np.ndarray
    t_star: np.ndarray
    masked: np.ndarray
    messages: dict = field(default_factory=dict)
    t_max: float | None = None
    resolution: int = 2000

    def rows(self):
        """(gamma, q, k3_max, t_star, message) in fixed order: gamma outer."""
        for i, g in enumerate(self.gamma_grid):
            for j, q in enumerate(self.q_grid):
                yield (
                    float(g), float(q),
                    float(self.k3_max[i, j]), float(self.t_star[i, j]),
                    self.messages.get((i, j), ""),
                )


def _sweep_cell(task):
    """One (gamma, q) cell; module-level so worker pools can pickle it."""
    gamma, q, J, theta, config = task
    try:
        params = model.ModelParams(gamma=gamma, q=q, J=J, theta=theta)
        result = optimize_k3(params, config)
        if result.masked:
            return (math.nan, math.nan, "all time points extinguished")
        return (result.k3_max, result.t_star, "")
    except HybridLGError as exc:
        return (math.nan, math.nan, str(exc))


def sweep(gamma_grid, q_grid, base_params: model.ModelParams | None = None,
          config: OptimizeConfig = OptimizeConfig(), workers=1) -> SweepResult:
    """Maximize K3 on every cell of a (gamma, q) grid.

    Cells are independent pure computations; output is assembled by cell
    index, so results are identical for any worker count.  Per-cell domain
    errors mask the cell instead of aborting the sweep.
    """
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if gamma_grid.size == 0 or q_grid.size == 0:
        raise ValueError("gamma and q grids must be nonempty")
    J = base_params.J if base_params is not None else 1.0
    theta = base_params.theta if base_params is not None else math.pi / 2

    tasks = [
        (float(g), float(q), J, theta, config)
        for g in gamma_grid
        for q in q_grid
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            cells = pool.map(_sweep_cell, tasks)
    else:
        cells = [_sweep_cell(task) for task in tasks]

    shape = (len(gamma_grid), len(q_grid))
    k3_max = np.empty(shape)
    t_star = np.empty(shape)
    masked = np.zeros(shape, dtype=bool)
    messages = {}
    for flat, (value, t_at, message) in enumerate(cells):
        i, j = divmod(flat, len(q_grid))
        k3_max[i, j] = value
        t_star[i, j] = t_at
        if message:
            masked[i, j] = True
            messages[(i, j)] = message
    return SweepResult(
        gamma_grid=gamma_grid, q_grid=q_grid, k3_max=k3_max, t_star=t_star,
        masked=masked, messages=messages,
        t_max=config.t_max, resolution=config.resolution,
    )
