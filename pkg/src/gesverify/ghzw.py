"""Verification of the three-qubit GHZ-W subspace with one-way adaptive tests.

Qubit 1 is the most significant bit of the computational-basis index, so
``|q1 q2 q3>`` sits at position ``4*q1 + 2*q2 + q3``.

Two families of test operators are built: ``M_Z`` (measure Z on every qubit,
reject outcomes with exactly two ones) and ``M_{X,i}`` (measure X on qubit
``i``, then run a two-qubit test on the other pair chosen by the outcome).
Conjugating the X tests by the diagonal phase symmetries ``U_1``, ``U_2``
gives the ten operators used by the rotation strategy.
"""

from __future__ import annotations

import csv
import functools
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .linalg import (
    compressed_top,
    eig_hermitian,
    hermiticity_residual,
    kron,
    orthonormal_complement,
    proj,
)
from .subspace2 import Subspace2, Verdict, classify, matrix_to_pairs

ZERO = np.array([1, 0], dtype=complex)
ONE = np.array([0, 1], dtype=complex)
PLUS = (ZERO + ONE) / math.sqrt(2)
MINUS = (ZERO - ONE) / math.sqrt(2)
I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)

ALPHA = math.atan((math.sqrt(5) - 1) / 2)

ZERO_GAP_TOL = 1e-12

OPT_MU_X = Fraction(240, 317)
OPT_GAP_ROTATION = Fraction(141, 317)

MinusTest = Literal["symmetric", "printed"]


class InvalidTestOperator(ValueError):
    pass


class ZeroGapError(ValueError):
    """The strategy cannot reject any bad state (spectral gap 0)."""


def make_states() -> tuple[np.ndarray, np.ndarray]:
    ghz = (kron(ZERO, ZERO, ZERO) + kron(ONE, ONE, ONE)) / math.sqrt(2)
    w = (kron(ZERO, ZERO, ONE) + kron(ZERO, ONE, ZERO) + kron(ONE, ZERO, ZERO)) / math.sqrt(3)
    return ghz, w


@functools.lru_cache(maxsize=None)
def _projector3() -> np.ndarray:
    ghz, w = make_states()
    p = proj(ghz) + proj(w)
    p.setflags(write=False)
    return p


def projector3() -> np.ndarray:
    """Projector onto span{GHZ, W} (8x8)."""
    return _projector3().copy()


@functools.lru_cache(maxsize=None)
def _perp_basis() -> tuple[np.ndarray, ...]:
    return tuple(orthonormal_complement(list(make_states()), 8))


@dataclass(frozen=True, eq=False)
class TestOperator3:
    """A pass effect ``0 <= M <= 1`` that every state of the GHZ-W subspace passes."""

    __test__ = False  # keep pytest from collecting this class

    m: np.ndarray
    provenance: str

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        if m.shape != (8, 8):
            raise InvalidTestOperator(f"expected an 8x8 operator, got shape {m.shape}")
        validate_test_operator(m, self.provenance)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


def validate_test_operator(m: np.ndarray, label: str = "operator", tol: float = 1e-10) -> None:
    resid = hermiticity_residual(m)
    if resid > tol:
        raise InvalidTestOperator(f"{label}: not Hermitian (residual {resid:.2e})")
    vals = eig_hermitian(m).values
    if vals[0] < -tol or vals[-1] > 1 + tol:
        raise InvalidTestOperator(f"{label}: spectrum [{vals[0]:.3e}, {vals[-1]:.3e}] leaves [0, 1]")
    for name, psi in zip(("GHZ", "W"), make_states()):
        err = float(np.max(np.abs(m @ psi - psi)))
        if err > tol:
            raise InvalidTestOperator(f"{label}: does not fix |{name}> (error {err:.2e})")


# ---------------------------------------------------------------------------
# Symmetries
# ---------------------------------------------------------------------------


def permutation_unitary(sigma: Sequence[int]) -> np.ndarray:
    """Unitary moving the state of qubit ``k`` to position ``sigma[k]`` (0-based)."""
    sigma = tuple(sigma)
    if sorted(sigma) != [0, 1, 2]:
        raise ValueError(f"not a permutation of three qubits: {sigma}")
    v = np.zeros((8, 8), dtype=complex)
    for bits in itertools.product((0, 1), repeat=3):
        out = [0, 0, 0]
        for k in range(3):
            out[sigma[k]] = bits[k]
        v[4 * out[0] + 2 * out[1] + out[2], 4 * bits[0] + 2 * bits[1] + bits[2]] = 1.0
    return v


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


def symmetry_ops() -> tuple[list[np.ndarray], list[np.ndarray]]:
    """The six qubit permutations and the two phase rotations ``U_1``, ``U_2 = U_1^2``."""
    perms = [permutation_unitary(s) for s in itertools.permutations(range(3))]
    r1 = phase_gate(2 * math.pi / 3)
    r2 = phase_gate(4 * math.pi / 3)
    return perms, [kron(r1, r1, r1), kron(r2, r2, r2)]


# ---------------------------------------------------------------------------
# Test operators
# ---------------------------------------------------------------------------


def make_MZ() -> TestOperator3:
    m = kron(proj(ZERO), I4 - proj(kron(ONE, ONE))) + kron(proj(ONE), proj(kron(ZERO, ZERO)) + proj(kron(ONE, ONE)))
    return TestOperator3(m, "Z")


def _x_branch_states() -> dict[str, np.ndarray]:
    xp = math.cos(ALPHA) * ZERO + math.sin(ALPHA) * ONE
    xbp = math.sin(ALPHA) * ZERO - math.cos(ALPHA) * ONE
    xm = (ZERO + np.exp(1j * math.pi / 3) * ONE) / math.sqrt(2)
    xmp = (ZERO + np.exp(-1j * math.pi / 3) * ONE) / math.sqrt(2)
    return {"x+": xp, "xbar+": xbp, "x-": xm, "x-'": xmp}


def x_plus_test() -> np.ndarray:
    s = _x_branch_states()
    return proj(kron(s["x+"], s["x+"])) + proj(kron(s["xbar+"], s["xbar+"]))


def x_minus_test(kind: MinusTest = "symmetric") -> np.ndarray:
    """Two-qubit test applied after the X outcome ``-``.

    The post-measurement subspace has two non-orthogonal product states in its
    complement, ``|x- x-'>`` and its swap ``|x-' x->``. ``"symmetric"`` rejects
    each with probability 1/2; ``"printed"`` rejects only ``|x- x-'>``.
    """
    s = _x_branch_states()
    a = proj(kron(s["x-"], s["x-'"]))
    if kind == "printed":
        return I4 - a
    if kind == "symmetric":
        b = proj(kron(s["x-'"], s["x-"]))
        return I4 - 0.5 * (a + b)
    raise ValueError(f"unknown X- test variant {kind!r}")


def post_measurement_subspace(pauli: str, outcome: str) -> Subspace2:
    """Span of the two-qubit states left on qubits 2,3 after measuring qubit 1."""
    ghz, w = make_states()
    if pauli == "Z":
        first = ZERO if outcome == "+" else ONE
    elif pauli == "X":
        first = PLUS if outcome == "+" else MINUS
    else:
        raise ValueError(f"unsupported Pauli {pauli!r}")
    bra = kron(first.conj(), I4)
    vecs = [bra @ psi for psi in (ghz, w)]
    return Subspace2.from_vectors(vecs)


def _check_x_branches() -> None:
    plus_space = post_measurement_subspace("X", "+")
    err = np.max(np.abs(x_plus_test() - plus_space.projector))
    if err > 1e-10:
        raise AssertionError(f"|x+x+>, |xbar+xbar+> do not span the X,+ subspace (error {err:.2e})")
    minus_space = post_measurement_subspace("X", "-")
    for b in minus_space.basis:
        if np.max(np.abs(x_minus_test("printed") @ b - b)) > 1e-10:
            raise AssertionError("X,- test does not fix the X,- subspace")


@functools.lru_cache(maxsize=None)
def _mx1(kind: MinusTest) -> np.ndarray:
    _check_x_branches()
    return kron(proj(PLUS), x_plus_test()) + kron(proj(MINUS), x_minus_test(kind))


def make_MX(i: int, kind: MinusTest = "symmetric") -> TestOperator3:
    """X-based adaptive test with the X measurement on qubit ``i`` (1-based)."""
    if i not in (1, 2, 3):
        raise ValueError(f"qubit index must be 1, 2 or 3, got {i}")
    m = _mx1(kind)
    if i != 1:
        sigma = [0, 1, 2]
        sigma[0], sigma[i - 1] = sigma[i - 1], sigma[0]
        v = permutation_unitary(sigma)
        m = v @ m @ v.conj().T
    return TestOperator3(m, f"X{i}" if kind == "symmetric" else f"X{i}[printed]")


def rotate(op: TestOperator3, j: int) -> TestOperator3:
    """``U_j^dagger M U_j``: apply the phase rotation ``U_j`` before testing."""
    _, (u1, u2) = symmetry_ops()
    u = {1: u1, 2: u2}[j]
    return TestOperator3(u.conj().T @ op.m @ u, f"{op.provenance}@U{j}")


@functools.lru_cache(maxsize=None)
def _ten(kind: MinusTest) -> tuple[TestOperator3, ...]:
    xs = [make_MX(i, kind) for i in (1, 2, 3)]
    rotated = [rotate(m, j) for j in (1, 2) for m in xs]
    return (make_MZ(), *xs, *rotated)


def all_ten_tests(kind: MinusTest = "symmetric") -> list[TestOperator3]:
    """``M_Z``, ``M_{X,1..3}``, then ``U_1``- and ``U_2``-rotated X tests."""
    return list(_ten(kind))


def global_test() -> TestOperator3:
    return TestOperator3(projector3(), "global")


# ---------------------------------------------------------------------------
# Strategies and spectral gaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Strategy3:
    items: tuple[tuple[float, TestOperator3], ...]
    label: str
    mu: dict = field(default_factory=dict)

    def __post_init__(self):
        weights = [w for w, _ in self.items]
        if any(w < 0 or w > 1 for w in weights):
            raise ValueError("weights must lie in [0, 1]")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(weights)!r}, not 1")
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.items])

    @property
    def operators(self) -> list[np.ndarray]:
        return [op.m for _, op in self.items]

    @functools.cached_property
    def omega(self) -> np.ndarray:
        out = np.zeros((8, 8), dtype=complex)
        for w, op in self.items:
            out += w * op.m
        return out

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "mu": self.mu,
            "items": [
                {"weight": w, "provenance": op.provenance, "matrix": matrix_to_pairs(op.m)}
                for w, op in self.items
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Strategy3":
        items = []
        for it in data["items"]:
            m = np.array([[complex(re, im) for re, im in row] for row in it["matrix"]])
            items.append((float(it["weight"]), TestOperator3(m, it["provenance"])))
        return cls(tuple(items), data.get("label", ""), dict(data.get("mu", {})))


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def omega_xz(mu_z: float, kind: MinusTest = "symmetric") -> Strategy3:
    """``M_Z`` with probability ``mu_z``, otherwise ``M_{X,i}`` for a uniform ``i``."""
    mu_z = _check_prob("mu_z", mu_z)
    ten = _ten(kind)
    items = [(mu_z, ten[0])] + [((1 - mu_z) / 3, op) for op in ten[1:4]]
    return Strategy3(tuple(items), "xz", {"Z": mu_z, "X": 1 - mu_z})


def omega_rotation(mu_x: float, kind: MinusTest = "symmetric") -> Strategy3:
    """``M_Z`` with probability ``1 - mu_x``; otherwise one of {none, U_1, U_2}
    and then ``M_{X,i}``, all uniform."""
    mu_x = _check_prob("mu_x", mu_x)
    ten = _ten(kind)
    items = [(1 - mu_x, ten[0])] + [(mu_x / 9, op) for op in ten[1:]]
    return Strategy3(tuple(items), "rotation", {"Z": 1 - mu_x, "X": mu_x})


def global_strategy() -> Strategy3:
    return Strategy3(((1.0, global_test()),), "global", {})


@dataclass(frozen=True)
class GapReport:
    nu: float
    lambda_max: float
    top_vector: np.ndarray
    mu: dict

    def to_json(self) -> dict:
        return {
            "nu": self.nu,
            "lambda_max": self.lambda_max,
            "top_vector": [[float(z.real), float(z.imag)] for z in self.top_vector],
            "mu": self.mu,
        }


def projected_operator(omega: np.ndarray) -> np.ndarray:
    """``(1 - P) omega (1 - P)`` for the GHZ-W projector ``P``."""
    q = np.eye(8) - _projector3()
    return q @ omega @ q


def gap_of_operator(omega: np.ndarray) -> tuple[float, np.ndarray]:
    """Return ``(lambda_max, top_vector)`` of the projected operator on the complement."""
    lam, vec = compressed_top(omega, _perp_basis())
    return max(lam, 0.0), vec


def spectral_gap(s: Strategy3) -> GapReport:
    """Spectral gap ``1 - lambda_max`` of the strategy's projected operator.

    Items are :class:`TestOperator3` instances and were validated when they
    were built, so this only does the eigenvalue work.
    """
    for _, op in s.items:
        if not isinstance(op, TestOperator3):
            raise InvalidTestOperator("strategy items must be TestOperator3 instances")
    lam, vec = gap_of_operator(s.omega)
    return GapReport(min(max(1.0 - lam, 0.0), 1.0), lam, vec, dict(s.mu))


def analytic_gap_rotation(mu_x: float) -> float:
    mu_x = _check_prob("mu_x", mu_x)
    return min(47 / 80 * mu_x, 1 - 11 / 15 * mu_x)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def grid(step: float, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    if not 0 < step <= 0.5:
        raise ValueError(f"step must lie in (0, 0.5], got {step}")
    n = int(round((hi - lo) / step))
    pts = lo + step * np.arange(n + 1)
    return np.clip(pts, lo, hi)


StrategyKind = Literal["xz", "rotation"]


def strategy_builder(kind: StrategyKind) -> Callable[[float], Strategy3]:
    try:
        return {"xz": omega_xz, "rotation": omega_rotation}[kind]
    except KeyError:
        raise ValueError(f"unknown strategy {kind!r}; expected 'xz' or 'rotation'") from None


def sweep(kind: StrategyKind, step: float, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Gap on a uniform grid of the strategy's free probability.

    ``mu`` is ``mu(Z)`` for the XZ strategy and ``mu(X)`` for the rotation
    strategy.
    """
    build = strategy_builder(kind)
    mus = grid(step)

    def one(mu: float) -> float:
        return spectral_gap(build(mu)).nu

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            nus = list(ex.map(one, mus))
    else:
        nus = [one(mu) for mu in mus]
    return mus, np.array(nus)


def best_on_grid(mus: np.ndarray, nus: np.ndarray) -> tuple[float, float]:
    k = int(np.argmax(nus))
    return float(mus[k]), float(nus[k])


def optimal_xz(step: float = 0.001) -> tuple[float, float]:
    """``(mu_z, nu)`` maximizing the XZ gap on a grid."""
    return best_on_grid(*sweep("xz", step))


def write_sweep_csv(path, mus: Iterable[float], nus: Iterable[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "nu"])
        for mu, nu in zip(mus, nus):
            w.writerow([f"{mu:.12g}", f"{nu:.12g}"])


def strategy_json(s: Strategy3) -> str:
    return json.dumps(s.to_json())


# ---------------------------------------------------------------------------
# Symmetrization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AveragedCoefficients:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    g: float

    def eigenpairs(self) -> list[tuple[np.ndarray, float]]:
        """The six complement eigenpairs of the averaged operator."""
        vecs = averaged_eigenvectors()
        vals = [2 * self.a - 1, 1 - 3 * self.e, 1 - 3 * self.e, self.f - self.g, self.f - self.g, self.f + 2 * self.g]
        return list(zip(vecs, vals))

    @property
    def gap(self) -> float:
        return 1 - max(2 * self.a - 1, 1 - 3 * self.e, self.f - self.g, self.f + 2 * self.g)


def averaged_eigenvectors() -> list[np.ndarray]:
    b = {k: np.eye(8, dtype=complex)[int(k, 2)] for k in ("000", "001", "010", "011", "100", "101", "110", "111")}
    r2, r3 = math.sqrt(2), math.sqrt(3)
    return [
        (b["000"] - b["111"]) / r2,
        (b["001"] - b["010"]) / r2,
        (b["001"] - b["100"]) / r2,
        (b["011"] - b["101"]) / r2,
        (b["011"] - b["110"]) / r2,
        (b["011"] + b["101"] + b["110"]) / r3,
    ]


# nonzero positions of the averaged operator, by coefficient name
_PATTERN = {
    "a": [(0, 0)],
    "b": [(0, 7), (7, 0)],
    "c": [(7, 7)],
    "d": [(1, 1), (2, 2), (4, 4)],
    "e": [(1, 2), (2, 1), (1, 4), (4, 1), (2, 4), (4, 2)],
    "f": [(3, 3), (5, 5), (6, 6)],
    "g": [(3, 5), (5, 3), (3, 6), (6, 3), (5, 6), (6, 5)],
}


def pattern_residual(m: np.ndarray) -> float:
    """How far ``m`` is from the averaged-operator template (zeros and ties)."""
    resid = 0.0
    used = np.zeros((8, 8), dtype=bool)
    for pos in _PATTERN.values():
        vals = [m[p] for p in pos]
        resid = max(resid, max(abs(v - vals[0]) for v in vals))
        for p in pos:
            used[p] = True
    if (~used).any():
        resid = max(resid, float(np.max(np.abs(m[~used]))))
    return float(resid)


def symmetrize(op: TestOperator3 | np.ndarray) -> tuple[np.ndarray, AveragedCoefficients]:
    """Average over {1, U_1, U_2} and then over all qubit permutations."""
    m = op.m if isinstance(op, TestOperator3) else np.asarray(op, dtype=complex)
    perms, (u1, u2) = symmetry_ops()
    mprime = (m + u1.conj().T @ m @ u1 + u2.conj().T @ m @ u2) / 3
    mbar = sum(v @ mprime @ v.conj().T for v in perms) / 6
    coeffs = AveragedCoefficients(
        *(float(mbar[_PATTERN[k][0]].real) for k in "abcdefg")
    )
    return mbar, coeffs


# ---------------------------------------------------------------------------
# Sample complexity
# ---------------------------------------------------------------------------


def sample_complexity(nu: float, eps: float, delta: float, mode: Literal["exact", "approx"] = "exact") -> int:
    """Copies needed so an ``eps``-bad source passes with probability at most ``delta``.

    ``exact`` is ``ceil(ln(1/delta) / ln(1/(1 - nu*eps)))``; ``approx`` replaces
    the denominator by ``nu*eps``.
    """
    if not 0.0 <= nu <= 1.0 + 1e-12:
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    if nu <= ZERO_GAP_TOL:
        raise ZeroGapError("strategy cannot verify: spectral gap is zero")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    x = nu * eps
    if x >= 1.0:
        return 1
    log_inv_delta = math.log(1.0 / delta)
    if mode == "exact":
        n = log_inv_delta / -math.log1p(-x)
    elif mode == "approx":
        n = log_inv_delta / x
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return max(1, math.ceil(n))


def x_minus_verdict() -> Verdict:
    """Classifier verdict for the X,- post-measurement subspace."""
    return classify(post_measurement_subspace("X", "-")).verdict
