"""Small dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` complex arrays and kets are 1-D complex arrays.
Everything here targets dimensions of at most 8, so clarity wins over speed
except in the eigensolver, which sits on the hot path of every gap sweep.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

TOL_COEFF = 1e-9
TOL_HERM = 1e-10
TOL_ROOT = 1e-8
PHASE_CUTOFF = 1e-9


class NonHermitianError(ValueError):
    """Raised when a matrix handed to the Hermitian eigensolver is not Hermitian."""


class LinearDependenceError(ValueError):
    pass


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators or kets, left to right."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b>, antilinear in the first argument."""
    return complex(np.vdot(a, b))


def proj(ket: np.ndarray) -> np.ndarray:
    """|ket><ket| (no normalization is applied)."""
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def ket(amps: Sequence[complex]) -> np.ndarray:
    """Build a normalized ket from raw amplitudes."""
    v = np.asarray(amps, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("ket amplitudes must be finite")
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        raise ValueError("cannot normalize the zero vector")
    return v / norm


def basis_ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first non-negligible amplitude is real positive."""
    v = np.asarray(v, dtype=complex)
    for amp in v:
        if abs(amp) > PHASE_CUTOFF:
            return v * (abs(amp) / amp)
    return v.copy()


def same_ray(a: np.ndarray, b: np.ndarray, tol: float = 1e-7) -> bool:
    """True when two normalized kets agree up to a global phase."""
    return float(np.linalg.norm(canonical_phase(a) - canonical_phase(b))) < tol


def hermiticity_residual(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


# ---------------------------------------------------------------------------
# Hermitian eigensolver (cyclic complex Jacobi)
# ---------------------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _jacobi_hermitian(a, max_sweeps=100, tol=1e-15):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=np.complex128)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += abs(a[i, j]) ** 2
    scale = math.sqrt(scale)
    if scale == 0.0:
        return np.zeros(n), v

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += abs(a[p, q]) ** 2
        if math.sqrt(2.0 * off) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                u = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                uc = u.conjugate()
                # A <- A J with J = diag(1, .., conj(u) at q) . Givens(c, s)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * uc * akq
                    a[k, q] = s * akp + c * uc * akq
                # A <- J^dagger A
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * u * aqk
                    a[q, k] = s * apk + c * u * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * uc * vkq
                    v[k, q] = s * vkp + c * uc * vkq

    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    order = np.argsort(w)
    return w[order], v[:, order]


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition of a Hermitian matrix.

    ``values`` are ascending; ``vectors[:, k]`` is the eigenvector for
    ``values[k]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    @property
    def top_vector(self) -> np.ndarray:
        return self.vectors[:, -1]

    def reconstruct(self) -> np.ndarray:
        q = self.vectors
        return (q * self.values) @ q.conj().T


def eig_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> HermEig:
    """Eigendecomposition of a small Hermitian matrix by cyclic complex Jacobi.

    Raises
    ------
    NonHermitianError
        If ``max|a - a^dagger|`` exceeds ``tol``.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    resid = hermiticity_residual(a)
    if resid > tol:
        raise NonHermitianError(f"matrix is not Hermitian: max|A - A^dagger| = {resid:.3e}")
    herm = 0.5 * (a + a.conj().T)
    values, vectors = _jacobi_hermitian(np.ascontiguousarray(herm))
    return HermEig(values, vectors)


# ---------------------------------------------------------------------------
# Quadratic roots with degeneracy bookkeeping
# ---------------------------------------------------------------------------


class RootKind(enum.Enum):
    TWO_DISTINCT = "two-distinct"
    ONE_DOUBLE = "one-double"
    ONE_FINITE_PLUS_INFINITY = "one-finite-plus-infinity"
    ONLY_INFINITY = "only-infinity"
    IDENTICALLY_ZERO = "identically-zero"


@dataclass(frozen=True)
class RootSet:
    kind: RootKind
    roots: tuple[complex, ...]
    has_root_at_infinity: bool

    @property
    def double(self) -> bool:
        return self.kind is RootKind.ONE_DOUBLE


def quad_roots(c2: complex, c1: complex, c0: complex, tol: float = TOL_COEFF) -> RootSet:
    """Solve ``c2 x**2 + c1 x + c0 = 0`` over the complex projective line.

    A vanishing leading coefficient is read as a root at infinity. Small
    coefficients are judged relative to the largest one, so the result does
    not depend on an overall rescaling of the polynomial.
    """
    c2, c1, c0 = complex(c2), complex(c1), complex(c0)
    scale = max(abs(c2), abs(c1), abs(c0))
    if scale < tol:
        return RootSet(RootKind.IDENTICALLY_ZERO, (), False)
    if abs(c2) < tol * scale:
        if abs(c1) < tol * scale:
            return RootSet(RootKind.ONLY_INFINITY, (), True)
        return RootSet(RootKind.ONE_FINITE_PLUS_INFINITY, (-c0 / c1,), True)

    disc = c1 * c1 - 4.0 * c2 * c0
    if abs(disc) < tol * scale * scale:
        return RootSet(RootKind.ONE_DOUBLE, (-c1 / (2.0 * c2),), False)
    sq = np.sqrt(disc)
    # pick the branch that avoids cancellation in c1 + sq
    if (c1.conjugate() * sq).real < 0.0:
        sq = -sq
    q = -0.5 * (c1 + sq)
    r1 = q / c2
    r2 = c0 / q
    return RootSet(RootKind.TWO_DISTINCT, (complex(r1), complex(r2)), False)


def det2(a: np.ndarray) -> complex:
    a = np.asarray(a)
    if a.shape != (2, 2):
        raise ValueError(f"det2 expects a 2x2 matrix, got shape {a.shape}")
    return complex(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])


# ---------------------------------------------------------------------------
# Subspace helpers
# ---------------------------------------------------------------------------


def check_orthonormal(vectors: Sequence[np.ndarray], tol: float = TOL_HERM) -> float:
    """Return ``max|G - 1|`` for the Gram matrix ``G``; raise if it exceeds ``tol``."""
    if len(vectors) == 0:
        return 0.0
    b = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
    resid = float(np.max(np.abs(b.conj().T @ b - np.eye(b.shape[1]))))
    if resid > tol:
        raise LinearDependenceError(f"basis is not orthonormal (Gram residual {resid:.3e})")
    return resid


def gram_schmidt(vectors: Sequence[np.ndarray], tol: float = 1e-9) -> list[np.ndarray]:
    """Orthonormalize with two passes of modified Gram-Schmidt.

    Raises :class:`LinearDependenceError` if any vector lies in the span of
    the previous ones (relative residual below ``tol``).
    """
    out: list[np.ndarray] = []
    for v in vectors:
        w = np.asarray(v, dtype=complex).copy()
        norm0 = np.linalg.norm(w)
        if norm0 < 1e-14:
            raise LinearDependenceError("basis not linearly independent")
        for _ in range(2):
            for u in out:
                w = w - np.vdot(u, w) * u
        norm = np.linalg.norm(w)
        if norm < tol * norm0:
            raise LinearDependenceError("basis not linearly independent")
        out.append(w / norm)
    return out


def orthonormal_complement(basis: Sequence[np.ndarray], dim: int) -> list[np.ndarray]:
    """Orthonormal basis of the orthogonal complement of ``span(basis)`` in C^dim."""
    basis = [np.asarray(b, dtype=complex) for b in basis]
    for b in basis:
        if b.shape != (dim,):
            raise ValueError(f"basis vector of shape {b.shape} does not live in dimension {dim}")
    check_orthonormal(basis)
    span = list(basis)
    out: list[np.ndarray] = []
    # try standard basis vectors in order of how much of them survives projection
    candidates = [basis_ket(k, dim) for k in range(dim)]
    while len(span) < dim:
        best, best_norm = None, -1.0
        for c in candidates:
            w = c.copy()
            for _ in range(2):
                for u in span:
                    w = w - np.vdot(u, w) * u
            n = np.linalg.norm(w)
            if n > best_norm:
                best, best_norm = w, n
        w = best / best_norm
        span.append(w)
        out.append(w)
    return out


def projector(basis: Sequence[np.ndarray]) -> np.ndarray:
    dim = len(basis[0])
    p = np.zeros((dim, dim), dtype=complex)
    for b in basis:
        p += proj(b)
    return p


def compressed_top(omega: np.ndarray, perp_basis: Sequence[np.ndarray]) -> tuple[float, np.ndarray]:
    """Largest eigenpair of ``omega`` compressed to the span of ``perp_basis``.

    With ``perp_basis`` spanning the complement of a target subspace this is
    the top of the projected operator ``(1 - P) omega (1 - P)`` restricted to
    where it can be nonzero, and the returned vector is guaranteed to lie in
    the complement.
    """
    b = np.column_stack(perp_basis)
    small = b.conj().T @ omega @ b
    small = 0.5 * (small + small.conj().T)
    eig = eig_hermitian(small)
    return eig.max_value, b @ eig.top_vector
