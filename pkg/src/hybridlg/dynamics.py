"""Time evolution engines for the hybrid master equation.

Three interchangeable routes propagate the unnormalized state:

* :func:`evolve_exact` applies the matrix exponential of the vectorized
  generator and serves as the brute-force oracle for everything else;
* :func:`evolve_rk4` integrates the same linear equation with classical
  fixed-step RK4 (cross-validation path);
* :func:`kraus_step` applies the discrete two-operator measurement map
  rho <- M0 rho M0^dag + q M1 rho M1^dag whose delta_t -> 0 limit is the
  master equation.

Normalization is never applied inside an integrator: the equation governs the
unnormalized rho and all nonlinearity lives in the rho/Tr[rho] readout.
:class:`Propagator` is the fast path for sweeps; it diagonalizes the
generator once and evaluates arbitrary times by scaling mode amplitudes,
falling back to expm when the eigenbasis is too ill-conditioned near a
spectral degeneracy.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from . import model
from .errors import IntegrationDivergedError
from .numerics import expm
from .spectrum import build_liouvillian, devectorize, vectorize

#: eigenbasis condition number beyond which Propagator falls back to expm
_EIG_COND_LIMIT = 1e8


@dataclass(frozen=True)
class EvolveConfig:
    """Integration controls: step, horizon, normalization floor, engine."""

    dt: float = 1e-3
    t_max: float = 20.0
    eps_trace: float = 1e-12
    method: str = "exact"  # exact | rk4 | kraus

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_max >= 0:
            raise ValueError(f"t_max must be >= 0, got {self.t_max}")
        if self.method not in ("exact", "rk4", "kraus"):
            raise ValueError(f"unknown method {self.method!r}")


def rhs(rho, params: model.ModelParams) -> np.ndarray:
    """Time derivative of the unnormalized state.

    drho/dt = -i[H, rho] + 2 gamma (q L rho L^dag - {L^dag L, rho}/2).
    Taking the trace gives d(Tr rho)/dt = 2 gamma (q - 1) rho_11, so the trace
    is conserved only at q = 1 and decays monotonically below it.
    """
    rho = np.asarray(rho, dtype=complex)
    H = model.hamiltonian(params)
    L = model.SIGMA_PLUS
    LdL = L.conj().T @ L
    return -1j * (H @ rho - rho @ H) + 2.0 * params.gamma * (
        params.q * (L @ rho @ L.conj().T) - 0.5 * (LdL @ rho + rho @ LdL)
    )


def _split_steps(t, dt):
    """Number of full dt steps plus the final partial step landing on t."""
    n_full = int(np.floor(t / dt + 1e-9))
    remainder = t - n_full * dt
    if remainder < 1e-9 * dt:
        remainder = 0.0
    return n_full, remainder


def evolve_rk4(rho0, params: model.ModelParams, t, cfg: EvolveConfig = EvolveConfig(),
               diagnostics=None):
    """Classical fixed-step RK4 on the vectorized linear equation.

    The state is re-symmetrized after every step (the defect before
    projection is tracked); a NaN/Inf appearing mid-run raises
    :class:`IntegrationDivergedError` with the offending step index.  The
    final step is shortened to land exactly on t.  Global error is O(dt^4).
    """
    if t < 0:
        raise ValueError(f"expected t >= 0, got {t}")
    gen = build_liouvillian(params)
    v = vectorize(rho0).copy()
    n_full, remainder = _split_steps(t, cfg.dt)
    steps = [cfg.dt] * n_full + ([remainder] if remainder else [])
    worst_defect = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for index, h in enumerate(steps):
            k1 = gen @ v
            k2 = gen @ (v + 0.5 * h * k1)
            k3 = gen @ (v + 0.5 * h * k2)
            k4 = gen @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            # Hermitian projection in vector form: average the coherences,
            # drop imaginary drift on the populations.
            coh = 0.5 * (v[1] + v[2].conjugate())
            defect = max(abs(v[1] - coh), abs(v[0].imag), abs(v[3].imag))
            if defect > worst_defect:
                worst_defect = defect
            v[1] = coh
            v[2] = coh.conjugate()
            v[0] = v[0].real
            v[3] = v[3].real
            if not np.all(np.isfinite(v.view(float))):
                raise IntegrationDivergedError(index, f"state={v!r}")
    if diagnostics is not None:
        diagnostics["hermiticity_defect"] = worst_defect
        diagnostics["steps"] = len(steps)
    return devectorize(v)


def evolve_exact(rho0, params: model.ModelParams, t) -> np.ndarray:
    """Exact propagation: devectorize(expm(G t) @ vectorize(rho0))."""
    if t < 0:
        raise ValueError(f"expected t >= 0, got {t}")
    gen = build_liouvillian(params)
    return devectorize(expm(gen, t) @ vectorize(rho0))


class Propagator:
    """Reusable propagator for many times at fixed parameters.

    Diagonalizes the generator once; ``states`` then costs one small matmul
    per batch of times.  A normal generator (the dissipation-free limit,
    where plain ``eig`` can hand back a badly conditioned basis at the
    degenerate eigenvalue) is diagonalized unitarily via Schur instead.  If
    the eigenvector matrix is ill-conditioned (parameters near an
    eigenvalue-coalescence point) every call transparently falls back to the
    expm route.
    """

    def __init__(self, params: model.ModelParams):
        self.params = params
        self.generator = build_liouvillian(params)
        gen = self.generator
        normality_defect = np.linalg.norm(
            gen @ gen.conj().T - gen.conj().T @ gen)
        scale = max(1.0, np.linalg.norm(gen)) ** 2
        if normality_defect <= 1e-12 * scale:
            T, Z = schur(gen, output="complex")
            self._diagonalizable = True
            self._eigs = np.diag(T)
            self._modes = Z
            self._inv_modes = Z.conj().T
            return
        w, V = np.linalg.eig(gen)
        cond = np.linalg.cond(V)
        self._diagonalizable = bool(cond < _EIG_COND_LIMIT)
        if self._diagonalizable:
            self._eigs = w
            self._modes = V
            self._inv_modes = np.linalg.inv(V)

    def states(self, rho0, times) -> np.ndarray:
        """Unnormalized rho(t) for each t in ``times``; shape (len(times), 2, 2)."""
        times = np.asarray(times, dtype=float)
        if self._diagonalizable:
            amplitudes = self._inv_modes @ vectorize(rho0)
            phases = np.exp(np.multiply.outer(times, self._eigs))
            vecs = (phases * amplitudes) @ self._modes.T
            return vecs.reshape(len(times), 2, 2)
        return np.stack([
            devectorize(expm(self.generator, float(t)) @ vectorize(rho0))
            for t in times
        ])

    def state(self, rho0, t) -> np.ndarray:
        return self.states(rho0, [t])[0]


def evolve(rho0, params: model.ModelParams, t, cfg: EvolveConfig = EvolveConfig()):
    """Dispatch on cfg.method: exact | rk4 | kraus."""
    if cfg.method == "exact":
        return evolve_exact(rho0, params, t)
    if cfg.method == "rk4":
        return evolve_rk4(rho0, params, t, cfg)
    return evolve_kraus(rho0, params, t, cfg.dt)


@dataclass(frozen=True)
class KrausPair:
    """Discrete-step measurement operators M0 (no jump) and M1 (jump).

    M0 = I - i H_eff dt with H_eff = H - i gamma L^dag L, M1 = sqrt(2 gamma dt) L.
    Completeness holds to first order: M0^dag M0 + M1^dag M1 = I + O(dt^2).
    """

    m0: np.ndarray
    m1: np.ndarray
    dt: float

    @property
    def completeness_defect(self) -> float:
        """Max-abs deviation of M0^dag M0 + M1^dag M1 from the identity."""
        total = self.m0.conj().T @ self.m0 + self.m1.conj().T @ self.m1
        return float(np.max(np.abs(total - model.IDENTITY)))


def kraus_pair(params: model.ModelParams, dt) -> KrausPair:
    if not dt > 0:
        raise ValueError(f"expected dt > 0, got {dt}")
    L = model.SIGMA_PLUS
    LdL = L.conj().T @ L
    h_eff = model.hamiltonian(params) - 1j * params.gamma * LdL
    m0 = model.IDENTITY - 1j * h_eff * dt
    m1 = np.sqrt(2.0 * params.gamma * dt) * L
    return KrausPair(m0=m0, m1=m1, dt=dt)


def kraus_step(rho, params: model.ModelParams, dt) -> np.ndarray:
    """One discrete update rho <- M0 rho M0^dag + q M1 rho M1^dag."""
    pair = kraus_pair(params, dt)
    rho = np.asarray(rho, dtype=complex)
    return (
        pair.m0 @ rho @ pair.m0.conj().T
        + params.q * (pair.m1 @ rho @ pair.m1.conj().T)
    )


def evolve_kraus(rho0, params: model.ModelParams, t, dt) -> np.ndarray:
    """Iterate kraus_step t/dt times (first-order accurate in dt)."""
    if t < 0:
        raise ValueError(f"expected t >= 0, got {t}")
    pair = kraus_pair(params, dt)
    rho = np.asarray(rho0, dtype=complex).copy()
    n_full, remainder = _split_steps(t, dt)
    for _ in range(n_full):
        rho = (
            pair.m0 @ rho @ pair.m0.conj().T
            + params.q * (pair.m1 @ rho @ pair.m1.conj().T)
        )
    if remainder:
        rho = kraus_step(rho, params, remainder)
    return rho
