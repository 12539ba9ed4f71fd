"""Monte Carlo simulation of the verification procedure.

Each round picks a test operator with its strategy weight and passes with the
Born probability ``tr[M rho]``; a trial accepts when all ``N`` rounds pass.

Randomness comes from Philox, a counter-based generator. The key is the user
seed and the trial index occupies a high counter word, so every trial owns an
independent stream and round ``r`` always reads draws ``2r`` and ``2r + 1`` of
it. Results therefore do not depend on how trials are split across workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .ghzw import Strategy3, make_states, projector3, sample_complexity, spectral_gap
from .linalg import eig_hermitian, hermiticity_residual, proj
from .subspace2 import VerificationOperator2

CLAMP_TOL = 1e-9
MAX_SEED = 2**64


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DensityOp:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (4, 8):
            raise ValueError(f"density operator must be 4x4 or 8x8, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise ValueError("density operator has non-finite entries")
        if hermiticity_residual(rho) > 1e-10:
            raise ValueError("density operator is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density operator has trace {tr}, expected 1")
        lo = eig_hermitian(rho).values[0]
        if lo < -1e-10:
            raise ValueError(f"density operator has negative eigenvalue {lo:.3e}")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def pure(cls, ket: np.ndarray) -> "DensityOp":
        ket = np.asarray(ket, dtype=complex)
        return cls(proj(ket / np.linalg.norm(ket)))

    @classmethod
    def from_json(cls, data: Any) -> "DensityOp":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        if isinstance(data, dict):
            data = data.get("rho", data.get("matrix"))
        m = np.array([[complex(*z) if isinstance(z, (list, tuple)) else complex(z) for z in row] for row in data])
        return cls(m)


# ---------------------------------------------------------------------------
# State sources
# ---------------------------------------------------------------------------


class StateSource:
    """Produces the state handed to the verifier in a given trial and round.

    None of the built-in sources consume randomness, so ``rng_independent``
    is always true; it is kept so callers can tell a deterministic source from
    one that would need its own stream.
    """

    kind: str = "custom"
    rng_independent: bool = True

    def state(self, trial: int, round_: int) -> DensityOp:
        raise NotImplementedError

    @property
    def iid(self) -> bool:
        return True

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(eq=False)
class Ideal(StateSource):
    ket: np.ndarray = field(default_factory=lambda: make_states()[0])
    kind: str = "ideal"

    def __post_init__(self):
        self._rho = DensityOp.pure(self.ket)
        if self._rho.rho.shape == (8, 8):
            fid = np.trace(projector3() @ self._rho.rho).real
            if abs(fid - 1.0) > 1e-10:
                raise ValueError("ideal source ket must lie in the GHZ-W subspace")

    def state(self, trial, round_):
        return self._rho


@dataclass(eq=False)
class WorstCase(StateSource):
    strategy: Strategy3 = None
    eps: float = 0.0
    kind: str = "worst_case"

    def __post_init__(self):
        self._rho = worst_case_state(self.strategy, self.eps)

    def state(self, trial, round_):
        return self._rho

    def describe(self):
        return {"kind": self.kind, "eps": self.eps}


@dataclass(eq=False)
class Depolarized(StateSource):
    ket: np.ndarray = field(default_factory=lambda: make_states()[0])
    p: float = 0.0
    kind: str = "depolarized"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing probability must lie in [0, 1], got {self.p}")
        pure = DensityOp.pure(self.ket).rho
        d = pure.shape[0]
        self._rho = DensityOp((1 - self.p) * pure + self.p * np.eye(d) / d)

    def state(self, trial, round_):
        return self._rho

    def describe(self):
        return {"kind": self.kind, "p": self.p}


@dataclass(eq=False)
class Custom(StateSource):
    """A fixed state, or a per-round sequence cycled through by round index."""

    states: Sequence[DensityOp] = ()
    kind: str = "custom"

    def __post_init__(self):
        if isinstance(self.states, DensityOp):
            self.states = (self.states,)
        self.states = tuple(s if isinstance(s, DensityOp) else DensityOp(s) for s in self.states)
        if not self.states:
            raise ValueError("custom source needs at least one state")

    @property
    def iid(self):
        return len(self.states) == 1

    def state(self, trial, round_):
        return self.states[round_ % len(self.states)]

    def describe(self):
        return {"kind": self.kind, "n_states": len(self.states)}


def worst_case_state(s: Strategy3, eps: float) -> DensityOp:
    """Mix GHZ with the top complement eigenvector so that ``tr[P sigma] = 1 - eps``.

    This state attains the largest pass probability ``1 - nu * eps`` allowed
    for an ``eps``-far state.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    ghz, _ = make_states()
    v = spectral_gap(s).top_vector
    return DensityOp((1 - eps) * proj(ghz) + eps * proj(v))


# ---------------------------------------------------------------------------
# Rounds and protocol
# ---------------------------------------------------------------------------

Testable = Union[Strategy3, VerificationOperator2, Sequence[tuple[float, np.ndarray]]]


def strategy_items(s: Testable) -> tuple[np.ndarray, list[np.ndarray]]:
    """Weights and pass effects of anything that can be run as a strategy."""
    if isinstance(s, Strategy3):
        return s.weights, s.operators
    if isinstance(s, VerificationOperator2):
        k = len(s.tests)
        return np.full(k, 1.0 / k), list(s.tests)
    weights = np.array([float(w) for w, _ in s])
    return weights, [np.asarray(m, dtype=complex) for _, m in s]


def pass_probability(m: np.ndarray, rho: np.ndarray) -> float:
    p = float(np.real(np.trace(m @ rho)))
    if p < -CLAMP_TOL or p > 1 + CLAMP_TOL:
        raise InvariantViolation(f"pass probability {p!r} is outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def _pick(cumulative: np.ndarray, u: np.ndarray | float):
    # smallest k with u < cumulative[k]; ties go to the lower index
    return np.minimum(np.searchsorted(cumulative, u, side="right"), len(cumulative) - 1)


def run_round(s: Testable, rho: DensityOp | np.ndarray, draw: tuple[float, float]) -> bool:
    """One round: ``draw[0]`` chooses the test, ``draw[1]`` decides pass/fail."""
    weights, ops = strategy_items(s)
    r = rho.rho if isinstance(rho, DensityOp) else np.asarray(rho, dtype=complex)
    k = int(_pick(np.cumsum(weights), draw[0]))
    return bool(draw[1] < pass_probability(ops[k], r))


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Independent Philox stream for one trial."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, trial, 0]))


def acceptance_bound(nu: float, eps: float, n: int) -> float:
    """Upper bound ``(1 - nu*eps)**n`` on accepting an ``eps``-far source."""
    return (1.0 - nu * eps) ** n


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def wilson_std_error(k: int, n: int) -> float:
    """Half-width of the Wilson interval at one standard deviation."""
    lo, hi = wilson_interval(k, n, z=1.0)
    return 0.5 * (hi - lo)


@dataclass
class SimConfig:
    strategy: Testable
    source: StateSource
    rounds: int
    trials: int
    seed: int = 0
    eps: Optional[float] = None
    nu: Optional[float] = None

    def __post_init__(self):
        if self.rounds < 1 or self.trials < 1:
            raise ValueError("rounds and trials must be positive")
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimReport:
    accept_count: int
    trials: int
    accept_rate: float
    bound: Optional[float]
    wilson_ci: tuple[float, float]
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from . import __version__

        return {
            "version": __version__,
            "accept_count": self.accept_count,
            "trials": self.trials,
            "accept_rate": self.accept_rate,
            "bound": self.bound,
            "wilson_ci": list(self.wilson_ci),
            "config": self.config,
        }


def _trial_passes(cfg: SimConfig, trial: int, cum: np.ndarray, ops, fixed_probs) -> bool:
    u = trial_generator(int(cfg.seed), trial).random(2 * cfg.rounds).reshape(cfg.rounds, 2)
    picks = _pick(cum, u[:, 0])
    if fixed_probs is not None:
        probs = fixed_probs[picks]
    else:
        probs = np.array(
            [pass_probability(ops[k], cfg.source.state(trial, r).rho) for r, k in enumerate(picks)]
        )
    return bool(np.all(u[:, 1] < probs))


def run_protocol(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Run ``cfg.trials`` independent trials of ``cfg.rounds`` rounds each."""
    weights, ops = strategy_items(cfg.strategy)
    cum = np.cumsum(weights)
    fixed_probs = None
    if cfg.source.iid:
        rho = cfg.source.state(0, 0).rho
        fixed_probs = np.array([pass_probability(m, rho) for m in ops])

    def count(block: range) -> int:
        return sum(_trial_passes(cfg, t, cum, ops, fixed_probs) for t in block)

    if workers > 1:
        size = math.ceil(cfg.trials / workers)
        blocks = [range(i, min(i + size, cfg.trials)) for i in range(0, cfg.trials, size)]
        with ThreadPoolExecutor(workers) as ex:
            accepted = sum(ex.map(count, blocks))
    else:
        accepted = count(range(cfg.trials))

    bound = None
    if cfg.nu is not None and cfg.eps is not None:
        bound = acceptance_bound(cfg.nu, cfg.eps, cfg.rounds)
    label = cfg.strategy.label if isinstance(cfg.strategy, Strategy3) else type(cfg.strategy).__name__
    config = {
        "strategy": label,
        "mu": getattr(cfg.strategy, "mu", {}),
        "source": cfg.source.describe(),
        "rounds": cfg.rounds,
        "trials": cfg.trials,
        "seed": int(cfg.seed),
        "eps": cfg.eps,
        "nu": cfg.nu,
    }
    return SimReport(accepted, cfg.trials, accepted / cfg.trials, bound, wilson_interval(accepted, cfg.trials), config)


def soundness_config(
    strategy: Strategy3,
    eps: float,
    delta: float,
    trials: int,
    seed: int,
    source: Optional[Callable[[Strategy3, float], StateSource]] = None,
) -> SimConfig:
    """Config with ``N`` from the exact sample complexity for ``(eps, delta)``.

    The default source is the worst case; raises :class:`ZeroGapError` if the
    strategy has no gap.
    """
    nu = spectral_gap(strategy).nu
    rounds = sample_complexity(nu, eps, delta, "exact")
    src = WorstCase(strategy, eps) if source is None else source(strategy, eps)
    return SimConfig(strategy, src, rounds, trials, seed, eps, nu)
