"""Two-dimensional two-qubit subspaces: product-state inventory, classification
and the matching local verification operators.

A two-qubit ket with amplitudes ``(c00, c01, c10, c11)`` is a product state
exactly when its 2x2 amplitude matrix is singular. For a subspace spanned by
``alpha`` and ``beta`` every ket is ``alpha + lam * beta`` (or ``beta``
itself), so its product states are the roots of a quadratic in ``lam``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .linalg import (
    LinearDependenceError,
    RootKind,
    canonical_phase,
    check_orthonormal,
    compressed_top,
    det2,
    eig_hermitian,
    gram_schmidt,
    orthonormal_complement,
    proj,
    projector,
    quad_roots,
    same_ray,
)

PRODUCT_TOL = 1e-7
BETA_PRODUCT_TOL = 1e-8
ORTHOGONAL_TOL = 1e-7


class Verdict(enum.Enum):
    UNVERIFIABLE = "Unverifiable"
    VERIFIABLE = "Verifiable"
    PERFECTLY_VERIFIABLE = "PerfectlyVerifiable"


class ProductCountMismatch(RuntimeError):
    """Product-state counts in a subspace and its complement disagree."""


@dataclass(frozen=True)
class Subspace2:
    """A 2-D subspace of C^2 (x) C^2 given by an orthonormal basis.

    ``orthonormalized`` is set when the basis was produced from a
    non-orthonormal input via :meth:`from_vectors`.
    """

    basis: tuple[np.ndarray, np.ndarray]
    orthonormalized: bool = False

    def __post_init__(self):
        if len(self.basis) != 2:
            raise ValueError("a Subspace2 needs exactly two basis vectors")
        for b in self.basis:
            if np.shape(b) != (4,):
                raise ValueError(f"basis vectors must have 4 amplitudes, got shape {np.shape(b)}")
        check_orthonormal(self.basis)

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[complex]]) -> "Subspace2":
        vecs = [np.asarray(v, dtype=complex) for v in vectors]
        if len(vecs) != 2:
            raise ValueError(f"expected 2 basis vectors, got {len(vecs)}")
        for v in vecs:
            if v.shape != (4,):
                raise ValueError(f"basis vectors must have 4 amplitudes, got shape {v.shape}")
        try:
            check_orthonormal(vecs)
            return cls((vecs[0], vecs[1]), orthonormalized=False)
        except LinearDependenceError:
            on = gram_schmidt(vecs)
            return cls((on[0], on[1]), orthonormalized=True)

    @classmethod
    def from_json(cls, data: Any) -> "Subspace2":
        """Parse ``{"basis": [[[re, im] x4], [[re, im] x4]]}``."""
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        if not isinstance(data, dict) or "basis" not in data:
            raise ValueError('subspace JSON must be an object with a "basis" field')
        vecs = []
        for row in data["basis"]:
            vecs.append([_parse_complex(x) for x in row])
        return cls.from_vectors(vecs)

    @property
    def projector(self) -> np.ndarray:
        return projector(self.basis)

    def complement(self) -> "Subspace2":
        c = orthonormal_complement(self.basis, 4)
        return Subspace2((c[0], c[1]))


def _parse_complex(x: Any) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        re, im = float(x[0]), float(x[1])
        if not (np.isfinite(re) and np.isfinite(im)):
            raise ValueError("amplitudes must be finite")
        return complex(re, im)
    raise ValueError(f"cannot read {x!r} as a complex amplitude [re, im]")


def amplitude_matrix(psi: np.ndarray) -> np.ndarray:
    """2x2 matrix whose ``[j, k]`` entry is the amplitude of ``|jk>``."""
    return np.asarray(psi, dtype=complex).reshape(2, 2)


def concurrence(psi: np.ndarray) -> float:
    """Concurrence of a normalized two-qubit pure state, 1 for a Bell state."""
    return 2.0 * abs(det2(amplitude_matrix(psi)))


@dataclass(frozen=True)
class ProductStateSet:
    infinite: bool
    states: tuple[np.ndarray, ...]
    multiplicities: tuple[int, ...]

    @property
    def count(self) -> float:
        return float("inf") if self.infinite else len(self.states)


def _pencil_coefficients(alpha: np.ndarray, beta: np.ndarray) -> tuple[complex, complex, complex]:
    a = amplitude_matrix(alpha)
    b = amplitude_matrix(beta)
    c2 = det2(b)
    c1 = a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]
    c0 = det2(a)
    return c2, complex(c1), c0


def find_product_states(v: Subspace2) -> ProductStateSet:
    """All product states in ``v``, up to global phase."""
    alpha, beta = v.basis
    c2, c1, c0 = _pencil_coefficients(alpha, beta)
    roots = quad_roots(c2, c1, c0)

    if roots.kind is RootKind.IDENTICALLY_ZERO:
        # every ket alpha + lam*beta is product, so the orthonormal basis
        # already gives two orthogonal representatives
        return ProductStateSet(True, (canonical_phase(alpha), canonical_phase(beta)), (1, 1))

    found: list[np.ndarray] = []
    mult: list[int] = []

    def add(state: np.ndarray, m: int) -> None:
        state = canonical_phase(state / np.linalg.norm(state))
        for k, s in enumerate(found):
            if same_ray(s, state, PRODUCT_TOL):
                mult[k] += m
                return
        found.append(state)
        mult.append(m)

    for lam in roots.roots:
        add(alpha + lam * beta, 2 if roots.double else 1)
    if roots.has_root_at_infinity or abs(det2(amplitude_matrix(beta))) < BETA_PRODUCT_TOL:
        add(beta, 2 if roots.kind is RootKind.ONLY_INFINITY else 1)
    return ProductStateSet(False, tuple(found), tuple(mult))


@dataclass(frozen=True)
class SubspaceClass:
    verdict: Verdict
    products_in_V: ProductStateSet
    products_in_Vperp: ProductStateSet
    overlap: float = 0.0


def classify(v: Subspace2) -> SubspaceClass:
    """Sort ``v`` into unverifiable / verifiable / perfectly verifiable.

    The decision is made on the product states of the orthogonal complement,
    since those are what local rejection tests can target. Products inside
    ``v`` are computed too and must come out equally many.
    """
    in_v = find_product_states(v)
    in_perp = find_product_states(v.complement())
    if in_v.count != in_perp.count or in_v.count not in (1, 2, float("inf")):
        raise ProductCountMismatch(
            f"product-state counts disagree: {in_v.count} in V, {in_perp.count} in V-perp"
        )

    overlap = 0.0
    if in_perp.infinite:
        verdict = Verdict.PERFECTLY_VERIFIABLE
    elif len(in_perp.states) == 1:
        verdict = Verdict.UNVERIFIABLE
    else:
        t2, t3 = in_perp.states
        ov = abs(np.vdot(t3, t2))
        if ov < ORTHOGONAL_TOL:
            verdict = Verdict.PERFECTLY_VERIFIABLE
        else:
            verdict = Verdict.VERIFIABLE
            overlap = float(min(ov, 1.0))
    return SubspaceClass(verdict, in_v, in_perp, overlap)


@dataclass(frozen=True)
class VerificationOperator2:
    omega: np.ndarray
    gap: float
    kind: Verdict
    fooling_state: Optional[np.ndarray] = None
    tests: tuple[np.ndarray, ...] = field(default=())


def spectral_gap2(omega: np.ndarray, v: Subspace2, tol: float = 1e-9) -> float:
    """``1 - lambda_max((1 - P) omega (1 - P))`` for the projector ``P`` onto ``v``."""
    omega = np.asarray(omega, dtype=complex)
    if omega.shape != (4, 4):
        raise ValueError(f"expected a 4x4 operator, got shape {omega.shape}")
    eig_hermitian(omega)  # Hermiticity check only
    for b in v.basis:
        if np.max(np.abs(omega @ b - b)) > tol:
            raise ValueError("operator is not a test operator: it does not fix the target subspace")
    lam, _ = compressed_top(omega, orthonormal_complement(v.basis, 4))
    return 1.0 - max(lam, 0.0)


def _check_class_matches(c: SubspaceClass, v: Subspace2) -> None:
    for t in c.products_in_Vperp.states:
        if max(abs(np.vdot(b, t)) for b in v.basis) > 1e-7:
            raise ValueError("classification does not belong to this subspace")
    for t in c.products_in_V.states:
        if abs(np.linalg.norm(v.projector @ t) - 1.0) > 1e-7:
            raise ValueError("classification does not belong to this subspace")


def build_strategy(c: SubspaceClass, v: Subspace2) -> VerificationOperator2:
    """Local verification operator for a classified subspace.

    Unverifiable subspaces get the single rejection test of their lone
    complement product state (gap 0). Verifiable ones mix the two
    non-orthogonal rejection tests with equal weight, giving gap
    ``(1 - |<t3|t2>|) / 2``. Perfectly verifiable ones reject both orthogonal
    complement products at once, which is the projector onto ``v``.
    """
    _check_class_matches(c, v)
    eye = np.eye(4, dtype=complex)
    perp = c.products_in_Vperp.states

    if c.verdict is Verdict.UNVERIFIABLE:
        tau = perp[0]
        omega = eye - proj(tau)
        comp = orthonormal_complement(v.basis, 4)
        # the direction of V-perp orthogonal to tau
        w = comp[0] - np.vdot(tau, comp[0]) * tau
        if np.linalg.norm(w) < 1e-6:
            w = comp[1] - np.vdot(tau, comp[1]) * tau
        fooling = canonical_phase(w / np.linalg.norm(w))
        return VerificationOperator2(omega, 0.0, c.verdict, fooling, (omega,))

    if c.verdict is Verdict.PERFECTLY_VERIFIABLE:
        omega = eye - proj(perp[0]) - proj(perp[1])
        resid = np.max(np.abs(omega - v.projector))
        if resid > 1e-7:
            raise ValueError(f"complement products do not span the complement (residual {resid:.2e})")
        return VerificationOperator2(omega, 1.0, c.verdict, None, (omega,))

    t2, t3 = perp
    tests = (eye - proj(t2), eye - proj(t3))
    omega = 0.5 * (tests[0] + tests[1])
    gap = 0.5 * (1.0 - abs(np.vdot(t3, t2)))
    return VerificationOperator2(omega, gap, c.verdict, None, tests)


def sample_complexity_verifiable(overlap: float, eps: float, delta: float) -> int:
    """Copies needed with the two-test strategy, in the 1/nu approximation."""
    return int(np.ceil(2.0 / (1.0 - overlap) / eps * np.log(1.0 / delta)))


def to_pairs(v: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).ravel()]


def matrix_to_pairs(m: np.ndarray) -> list[list[list[float]]]:
    return [to_pairs(row) for row in np.asarray(m, dtype=complex)]


def classification_report(v: Subspace2) -> dict:
    """Everything the ``classify`` command prints, as plain JSON types."""
    c = classify(v)
    op = build_strategy(c, v)
    return {
        "verdict": c.verdict.value,
        "orthonormalized": v.orthonormalized,
        "products_in_V": {
            "infinite": c.products_in_V.infinite,
            "states": [to_pairs(s) for s in c.products_in_V.states],
            "multiplicities": list(c.products_in_V.multiplicities),
        },
        "products_in_Vperp": {
            "infinite": c.products_in_Vperp.infinite,
            "states": [to_pairs(s) for s in c.products_in_Vperp.states],
            "multiplicities": list(c.products_in_Vperp.multiplicities),
        },
        "overlap": c.overlap,
        "omega": matrix_to_pairs(op.omega),
        "gap": op.gap,
        "fooling_state": None if op.fooling_state is None else to_pairs(op.fooling_state),
    }


__all__ = [
    "Verdict",
    "Subspace2",
    "ProductStateSet",
    "SubspaceClass",
    "VerificationOperator2",
    "ProductCountMismatch",
    "amplitude_matrix",
    "concurrence",
    "find_product_states",
    "classify",
    "build_strategy",
    "spectral_gap2",
    "classification_report",
]
