"""Small dense complex linear algebra: cubic roots, 4x4 eigenvalues, expm.

Everything here is a pure function of its inputs and safe to call from any
number of workers.  The cubic solver is a hand-rolled Cardano implementation
(it doubles as an independent cross-check of the dense eigensolver); the
matrix exponential and the eigensolver delegate to scipy/numpy.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .errors import EigensolverError

# primitive cube root of unity, e^{i 2 pi / 3}
OMEGA = complex(-0.5, 0.5 * np.sqrt(3.0))

#: pairwise root gap (relative to root scale) below which roots are flagged
#: as degenerate; downstream mode expansions divide by these gaps.
DEGENERACY_GAP = 1e-7


class CubicCoefficients(NamedTuple):
    """Coefficients (a, b, c) of the monic cubic x^3 + a x^2 + b x + c."""

    a: complex
    b: complex
    c: complex


@dataclass(frozen=True)
class CubicRoots:
    """Roots of a monic cubic, sorted by (real, imag), plus degeneracy flag."""

    roots: tuple
    degenerate: bool

    def __iter__(self):
        return iter(self.roots)


def _cube_roots(z):
    """All three complex cube roots of z (principal first)."""
    principal = z ** (1.0 / 3.0) if z != 0 else 0.0j
    return (principal, principal * OMEGA, principal * OMEGA**2)


def solve_cubic_cardano(a, b, c):
    """Solve x^3 + a x^2 + b x + c = 0 by Cardano's method.

    Depressed-cubic intermediates: P = (3b - a^2)/3, Q = (2a^3 - 9ab + 27c)/27,
    u, v the cube roots of -Q/2 +/- sqrt(Q^2/4 + P^3/27).  The branch of v is
    chosen to satisfy the pairing constraint u*v = -P/3 (the cube root
    minimizing |u*v + P/3|), which avoids the classic wrong-branch failure near
    a vanishing discriminant.  Roots come back sorted by (real, imag); a
    degeneracy marker is set when any pair is closer than
    ``DEGENERACY_GAP`` times the root scale.
    """
    a, b, c = complex(a), complex(b), complex(c)
    for name, z in (("a", a), ("b", b), ("c", c)):
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            raise ValueError(f"non-finite cubic coefficient {name}={z!r}")

    P = (3.0 * b - a * a) / 3.0
    Q = (2.0 * a**3 - 9.0 * a * b + 27.0 * c) / 27.0
    disc = np.sqrt(complex(Q * Q / 4.0 + P**3 / 27.0))
    t_plus = -Q / 2.0 + disc
    t_minus = -Q / 2.0 - disc

    # Work from the larger-magnitude branch; recover the partner through the
    # product identity t_plus * t_minus = -P^3/27 to dodge cancellation.
    if abs(t_plus) >= abs(t_minus):
        big, big_is_u = t_plus, True
    else:
        big, big_is_u = t_minus, False

    if big == 0:
        u = v = 0.0j  # triple root at -a/3
    else:
        w = big ** (1.0 / 3.0)
        partner3 = -(P**3) / (27.0 * big)
        partner = min(_cube_roots(partner3), key=lambda z: abs(w * z + P / 3.0))
        u, v = (w, partner) if big_is_u else (partner, w)

    shift = a / 3.0
    roots = sorted(
        (
            u + v - shift,
            OMEGA * u + OMEGA**2 * v - shift,
            OMEGA**2 * u + OMEGA * v - shift,
        ),
        key=lambda z: (z.real, z.imag),
    )

    scale = max(1.0, *(abs(r) for r in roots))
    degenerate = any(
        abs(roots[i] - roots[j]) < DEGENERACY_GAP * scale
        for i in range(3)
        for j in range(i + 1, 3)
    )
    return CubicRoots(roots=tuple(roots), degenerate=degenerate)


def sort_complex(values):
    """Deterministic total order: by real part, then imaginary part."""
    values = np.asarray(values)
    return values[np.lexsort((values.imag, values.real))]


def eigenvalues_4x4(matrix):
    """Eigenvalues of a 4x4 complex matrix, sorted by (real, imag).

    Delegates to the dense QR eigensolver; every returned eigenvalue is
    verified via |det(M - lambda I)| against the matrix scale.
    """
    M = np.asarray(matrix, dtype=complex)
    if M.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise ValueError("matrix contains non-finite entries")
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(
            f"eigenvalue iteration failed to converge for matrix:\n{M!r}"
        ) from exc

    scale = max(1.0, float(np.linalg.norm(M))) ** 4
    for lam in eigs:
        residual = abs(np.linalg.det(M - lam * np.eye(4)))
        if residual > 1e-8 * scale:
            raise EigensolverError(
                f"eigenvalue {lam!r} has det residual {residual:.3e} "
                f"(tolerance {1e-8 * scale:.3e}) for matrix:\n{M!r}"
            )
    return sort_complex(eigs)


def expm(matrix, t=1.0):
    """Matrix exponential e^{M t} (scaling-and-squaring Pade).

    ``expm(M, 0)`` returns the identity exactly.
    """
    M = np.asarray(matrix, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if t < 0:
        raise ValueError(f"expected t >= 0, got {t}")
    if t == 0:
        return np.eye(M.shape[0], dtype=complex)
    return _scipy_expm(M * t)
