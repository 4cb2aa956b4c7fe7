"""Vectorized generator of the hybrid master equation and its spectrum.

The master equation

    drho/dt = -i[H, rho] + 2 gamma (q L rho L^dag - {L^dag L, rho}/2)

is linear in rho, so with the row-major vectorization
|rho>> = (rho_00, rho_01, rho_10, rho_11)^T it reads d|rho>>/dt = G |rho>>
for a 4x4 matrix G built here from the superoperator identities
vec(A rho B) = (A (x) B^T) vec(rho).  One eigenvalue is exactly -gamma for
every (gamma, q); the remaining three are J times the roots of the
dimensionless cubic

    x^3 + 3 r x^2 + (2 r^2 + 1) x + r (1 - q) = 0,      r = gamma / J,

whose discriminant 4 (r^2 - 1)^3 - 27 q^2 r^2 vanishes exactly on the locus
where eigenvalues (and eigenvectors) coalesce.
"""

from dataclasses import dataclass

import numpy as np

from . import model
from .numerics import (
    CubicCoefficients,
    eigenvalues_4x4,
    solve_cubic_cardano,
    sort_complex,
)


def build_liouvillian(params: model.ModelParams) -> np.ndarray:
    """4x4 generator in the ordering (rho_00, rho_01, rho_10, rho_11).

    Valid for any theta; at theta = pi/2 the entries reduce to the familiar
    closed form with (0,3) entry 2 q gamma and diagonal (0, -gamma, -gamma,
    -2 gamma).
    """
    H = model.hamiltonian(params)
    L = model.SIGMA_PLUS
    LdL = L.conj().T @ L
    eye = model.IDENTITY
    commutator = np.kron(H, eye) - np.kron(eye, H.T)
    recycling = np.kron(L, L.conj())
    decay = np.kron(LdL, eye) + np.kron(eye, LdL.T)
    return -1j * commutator + 2.0 * params.gamma * (
        params.q * recycling - 0.5 * decay
    )


def vectorize(rho) -> np.ndarray:
    """Row-major flattening to the (rho_00, rho_01, rho_10, rho_11) ordering."""
    return np.asarray(rho, dtype=complex).reshape(4)


def devectorize(vec) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape(2, 2)


def characteristic_cubic(r: float, q: float) -> CubicCoefficients:
    """Monic cubic whose roots are the non-(-gamma) eigenvalues over J."""
    if not r > 0:
        raise ValueError(f"expected r > 0, got {r}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"expected q in [0, 1], got {q}")
    return CubicCoefficients(3.0 * r, 2.0 * r * r + 1.0, r * (1.0 - q))


def discriminant(r: float, q: float) -> float:
    """Discriminant 4 (r^2 - 1)^3 - 27 q^2 r^2 of the characteristic cubic."""
    return 4.0 * (r * r - 1.0) ** 3 - 27.0 * q * q * r * r


@dataclass(frozen=True)
class EpLocusPoint:
    """One point of the eigenvalue-coalescence locus: r solving 4(r^2-1)^3 = 27 q^2 r^2."""

    q: float
    r_ep: float
    residual: float


def ep_radius(q: float) -> EpLocusPoint:
    """The unique r >= 1 where the discriminant vanishes for a given q.

    The discriminant is strictly increasing in r on r >= 1, so a sign-change
    bracket plus bisection pins the root; the bracket upper end starts at
    1 + (4 * 27 q^2)^(1/3) and is widened until the sign flips.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"expected q in [0, 1], got {q}")
    if q == 0.0:
        return EpLocusPoint(q=0.0, r_ep=1.0, residual=discriminant(1.0, 0.0))
    lo = 1.0
    hi = 1.0 + (27.0 * q * q * 4.0) ** (1.0 / 3.0)
    while discriminant(hi, q) < 0.0:
        hi = 1.0 + 1.5 * (hi - 1.0)
    while hi - lo > 1e-14 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if discriminant(mid, q) < 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    return EpLocusPoint(q=q, r_ep=r, residual=discriminant(r, q))


def ep_locus(q_values) -> list:
    """Locus points for each q; cells are independent pure computations."""
    return [ep_radius(float(q)) for q in q_values]


#: root-gap clustering threshold for declaring coalescence (Jordan blocks
#: are reported through gap clustering, not exact rank computation)
COALESCENCE_GAP = 1e-6


@dataclass(frozen=True)
class SpectrumReport:
    """Spectral summary of the 4x4 generator at one parameter point."""

    eigenvalues: tuple          # 4 values, sorted by (real, imag)
    has_exact_root: bool        # -gamma found among the eigenvalues
    cubic_roots: tuple          # 3 dimensionless roots x = lambda / J
    degenerate: bool            # any cubic root pair inside COALESCENCE_GAP
    discriminant: float

    @property
    def degeneracy_flags(self):
        """Pairwise coalescence flags for the cubic roots, keyed (i, j)."""
        xs = self.cubic_roots
        scale = max(1.0, *(abs(x) for x in xs))
        return {
            (i, j): abs(xs[i] - xs[j]) < COALESCENCE_GAP * scale
            for i in range(3)
            for j in range(i + 1, 3)
        }


def spectrum_report(params: model.ModelParams) -> SpectrumReport:
    """Eigenvalues of the generator plus the dimensionless cubic cross-check."""
    eigs = eigenvalues_4x4(build_liouvillian(params))
    gap = min(abs(e + params.gamma) for e in eigs)
    scale = max(1.0, params.gamma, params.J)
    cubic = characteristic_cubic(params.ratio, params.q)
    xs = sort_complex(np.asarray(solve_cubic_cardano(*cubic).roots))
    root_scale = max(1.0, float(np.max(np.abs(xs))))
    coalesced = any(
        abs(xs[i] - xs[j]) < COALESCENCE_GAP * root_scale
        for i in range(3)
        for j in range(i + 1, 3)
    )
    return SpectrumReport(
        eigenvalues=tuple(eigs),
        has_exact_root=bool(gap <= 1e-10 * scale),
        cubic_roots=tuple(xs),
        degenerate=coalesced,
        discriminant=discriminant(params.ratio, params.q),
    )
