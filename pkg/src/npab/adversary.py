"""Eavesdropper strategies acting on qubits in flight.

Coherent attacks enter only through their Pauli-probability form: for the
checking measurements the protocol performs, an arbitrary interaction is
indistinguishable from a classical mixture of Pauli error patterns.

Strategies see the quantum slots and nothing else. Public announcements do
not exist yet when ``apply_attack`` runs; the protocol enforces that order.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import binom

from .qcore import (
    PROB_ATOL,
    Basis,
    DensityMatrix,
    Pauli,
    QubitState,
    apply_paulis,
    measure_with_uniforms,
)


class AttackError(ValueError):
    pass


def _normalize_probs(probs: Mapping[Pauli | str, float]) -> tuple[float, float, float, float]:
    out = [0.0, 0.0, 0.0, 0.0]
    for key, p in probs.items():
        try:
            pauli = key if isinstance(key, Pauli) else Pauli.parse(str(key))
        except ValueError as e:
            raise AttackError(str(e)) from None
        out[pauli] += float(p)
    if min(out) < 0:
        raise AttackError("Pauli probabilities must be non-negative")
    if abs(sum(out) - 1.0) > PROB_ATOL:
        raise AttackError(f"Pauli probabilities sum to {sum(out)!r}, expected 1")
    return tuple(out)  # type: ignore[return-value]


class BasisPolicy(enum.Enum):
    ALWAYS_Z = "z"
    ALWAYS_X = "x"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoAttack:
    pass


@dataclass(frozen=True)
class InterceptResend:
    basis_policy: BasisPolicy = BasisPolicy.UNIFORM


@dataclass(frozen=True)
class PauliChannel:
    """Independent Pauli error on every slot, probabilities indexed I, X, Y, Z."""

    probs: tuple[float, float, float, float]

    def __init__(self, probs: Mapping[Pauli | str, float]):
        object.__setattr__(self, "probs", _normalize_probs(probs))

    @property
    def error_rate(self) -> float:
        """Expected bit-error rate: X and Z err half the time, Y always."""
        return self.probs[1] / 2 + self.probs[2] + self.probs[3] / 2


@dataclass(frozen=True)
class CorrelatedPauli:
    """One Pauli per basis-sequence position, reapplied in every round."""

    probs: tuple[float, float, float, float]

    def __init__(self, probs: Mapping[Pauli | str, float]):
        object.__setattr__(self, "probs", _normalize_probs(probs))

    @property
    def error_rate(self) -> float:
        return self.probs[1] / 2 + self.probs[2] + self.probs[3] / 2


@dataclass(frozen=True)
class BasisLearner:
    """Measure every slot in a fixed basis, keep the outcomes, forward the collapsed state."""

    measure_basis: Basis = Basis.Z


AttackStrategy = Union[NoAttack, InterceptResend, PauliChannel, CorrelatedPauli, BasisLearner]


def pauli_probs_for_error_rate(rate: float) -> dict[Pauli, float]:
    """Symmetric X/Y/Z channel with the given expected bit-error rate."""
    if not 0.0 <= rate <= 1.0:
        raise AttackError("error rate must be in [0, 1]")
    # rate = px/2 + py + pz/2 = 2p for px = py = pz = p
    p = rate / 2
    if 3 * p > 1.0 + PROB_ATOL:
        raise AttackError(f"a symmetric channel cannot reach error rate {rate}")
    return {Pauli.I: 1.0 - 3 * p, Pauli.X: p, Pauli.Y: p, Pauli.Z: p}


@dataclass(frozen=True, eq=False)
class SlotBatch:
    """Qubits in flight: 0-based ``positions`` and ``rounds`` plus ``(N, 2)`` amplitudes."""

    positions: np.ndarray
    rounds: np.ndarray
    amps: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.int64)
        rnd = np.asarray(self.rounds, dtype=np.int64)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1, 2)
        if not (len(pos) == len(rnd) == len(amps)):
            raise AttackError("positions, rounds and states must have equal length")
        norms = (np.abs(amps) ** 2).sum(axis=1)
        if len(amps) and np.abs(norms - 1).max() > 1e-12:
            raise AttackError("slot carries an unnormalised state")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rounds", rnd)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_slots(cls, slots: Iterable[tuple[int, int, QubitState]]) -> "SlotBatch":
        slots = list(slots)
        return cls(
            np.array([s[0] for s in slots], dtype=np.int64),
            np.array([s[1] for s in slots], dtype=np.int64),
            np.array([s[2].vector for s in slots], dtype=complex).reshape(-1, 2),
        )

    def __len__(self) -> int:
        return len(self.amps)

    def states(self) -> list[QubitState]:
        return [QubitState.from_vector(a) for a in self.amps]

    def canonical_order(self) -> np.ndarray:
        """Permutation sorting slots by (round, position)."""
        return np.lexsort((self.positions, self.rounds))

    def with_amps(self, amps: np.ndarray) -> "SlotBatch":
        return SlotBatch(self.positions, self.rounds, amps)


@dataclass
class EveRecord:
    """What Eve saw. Per-slot arrays follow the slot order handed to ``apply_attack``.

    ``bases`` / ``bits`` hold -1 where Eve did not measure; ``paulis`` holds -1
    where she applied no Pauli. ``posterior`` is filled in after the session by
    ``infer_basis_posterior``: P(b_j = 1) for each position ``j``.
    """

    strategy: str = "none"
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rounds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    bases: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    paulis: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    posterior: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.positions)

    def to_dict(self) -> dict:
        def enc(a):
            return None if a is None else [int(x) for x in a]

        return {
            "strategy": self.strategy,
            "positions": enc(self.positions),
            "rounds": enc(self.rounds),
            "bases": enc(self.bases),
            "bits": enc(self.bits),
            "paulis": enc(self.paulis),
            "posterior": None if self.posterior is None else [float(f"{p:.12g}") for p in self.posterior],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EveRecord":
        def dec(key, dtype):
            v = d.get(key)
            return None if v is None else np.array(v, dtype=dtype)

        rec = cls(d.get("strategy", "none"))
        for key, dtype in (("positions", np.int64), ("rounds", np.int64), ("bases", np.int8), ("bits", np.int8), ("paulis", np.int8)):
            val = dec(key, dtype)
            if val is not None:
                setattr(rec, key, val)
        rec.posterior = dec("posterior", float)
        return rec


def _sample_paulis(probs: Sequence[float], u: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.cumsum(probs)[:-1], u, side="right").astype(np.int8)


def _check_grid(slots: SlotBatch) -> tuple[int, int]:
    if len(slots) == 0:
        return 0, 0
    positions = np.unique(slots.positions)
    rounds = np.unique(slots.rounds)
    L, r = len(positions), len(rounds)
    complete = (
        positions[0] == 0
        and positions[-1] == L - 1
        and rounds[0] == 0
        and rounds[-1] == r - 1
        and len(slots) == L * r
        and len(np.unique(slots.rounds * L + slots.positions)) == L * r
    )
    if not complete:
        raise AttackError("CorrelatedPauli needs slots forming a complete positions x rounds grid")
    return L, r


def apply_attack(
    strategy: AttackStrategy, slots: SlotBatch | Sequence[tuple[int, int, QubitState]], rng: np.random.Generator
) -> tuple[SlotBatch, EveRecord]:
    """Let Eve act on every slot. Returns the forwarded slots and her record.

    Random draws are made in canonical (round, position) order and then mapped
    back, so the outcome for a given slot does not depend on the order in
    which slots are presented.
    """
    if not isinstance(slots, SlotBatch):
        slots = SlotBatch.from_slots(slots)
    n = len(slots)
    order = slots.canonical_order()

    def per_slot_uniforms() -> np.ndarray:
        u = np.empty(n)
        u[order] = rng.random(n)
        return u

    record = EveRecord(type(strategy).__name__, slots.positions.copy(), slots.rounds.copy())
    none = np.full(n, -1, dtype=np.int8)
    record.bases, record.bits, record.paulis = none, none.copy(), none.copy()

    if isinstance(strategy, NoAttack):
        record.positions = record.positions[:0]
        record.rounds = record.rounds[:0]
        record.bases = record.bits = record.paulis = none[:0]
        return slots, record

    if isinstance(strategy, PauliChannel):
        paulis = _sample_paulis(strategy.probs, per_slot_uniforms())
        record.paulis = paulis
        return slots.with_amps(apply_paulis(slots.amps, paulis)), record

    if isinstance(strategy, CorrelatedPauli):
        L, _ = _check_grid(slots)
        per_position = _sample_paulis(strategy.probs, rng.random(L))
        paulis = per_position[slots.positions] if n else per_position[:0]
        record.paulis = paulis
        return slots.with_amps(apply_paulis(slots.amps, paulis)), record

    if isinstance(strategy, InterceptResend):
        if strategy.basis_policy is BasisPolicy.UNIFORM:
            eve_bases = np.empty(n, dtype=np.int8)
            eve_bases[order] = rng.integers(0, 2, size=n, dtype=np.int8)
        else:
            eve_bases = np.full(n, 0 if strategy.basis_policy is BasisPolicy.ALWAYS_Z else 1, dtype=np.int8)
        bits, post = measure_with_uniforms(slots.amps, eve_bases, per_slot_uniforms())
        record.bases, record.bits = eve_bases, bits.astype(np.int8)
        return slots.with_amps(post), record

    if isinstance(strategy, BasisLearner):
        eve_bases = np.full(n, int(strategy.measure_basis), dtype=np.int8)
        bits, post = measure_with_uniforms(slots.amps, eve_bases, per_slot_uniforms())
        record.bases, record.bits = eve_bases, bits.astype(np.int8)
        return slots.with_amps(post), record

    raise AttackError(f"unknown strategy {strategy!r}")


# -- basis inference -------------------------------------------------------------


def infer_basis_posterior(
    record: EveRecord, ensembles: Mapping[int, DensityMatrix], n_positions: int | None = None
) -> np.ndarray:
    """P(b_j = 1 | Eve's outcomes at position j), uniform prior.

    ``ensembles[b]`` is the density operator Alice's source emits for basis
    bit ``b``; Eve is assumed to know the source. Positions without
    measurements keep the prior 1/2.
    """
    if n_positions is None:
        n_positions = int(record.positions.max()) + 1 if len(record) else 0
    loglik = np.zeros((n_positions, 2))
    measured = record.bits >= 0
    for b in (0, 1):
        rho = ensembles[b]
        table = np.array([[rho.probability(eb, o) for o in (0, 1)] for eb in (0, 1)])
        with np.errstate(divide="ignore"):
            ll = np.log(table[record.bases[measured], record.bits[measured]])
        np.add.at(loglik[:, b], record.positions[measured], ll)
    loglik -= loglik.max(axis=1, keepdims=True)
    w = np.exp(loglik)
    return w[:, 1] / w.sum(axis=1)


def position_observations(record: EveRecord) -> dict[int, tuple]:
    """Per-position summary statistic: counts of (eve basis, outcome) over rounds.

    The tuple is ``(#Z->0, #Z->1, #X->0, #X->1)``.
    """
    out: dict[int, list[int]] = {}
    measured = record.bits >= 0
    for pos, basis, bit in zip(record.positions[measured], record.bases[measured], record.bits[measured]):
        counts = out.setdefault(int(pos), [0, 0, 0, 0])
        counts[2 * int(basis) + int(bit)] += 1
    return {k: tuple(v) for k, v in out.items()}


def _mutual_information(pairs: Sequence[tuple[object, int]]) -> float:
    """Plug-in mutual information in bits with the Miller-Madow bias correction."""
    n = len(pairs)
    joint = Counter(pairs)
    xs = Counter(x for x, _ in pairs)
    ys = Counter(y for _, y in pairs)

    def h(counts) -> float:
        c = np.array(list(counts.values()), dtype=float)
        p = c / n
        return float(-(p * np.log2(p)).sum())

    mi = h(xs) + h(ys) - h(joint)
    correction = (len(joint) - len(xs) - len(ys) + 1) / (2 * n * math.log(2))
    return mi - correction


@dataclass(frozen=True)
class BasisInformation:
    """Estimated mutual information between Eve's per-position view and ``b``."""

    bits_per_position: float
    stderr: float
    sessions: int
    samples: int
    sufficient: bool


MIN_SESSIONS = 100


def eve_basis_information(
    records: Sequence[EveRecord],
    true_b: np.ndarray | Sequence[np.ndarray],
    *,
    bootstrap: int = 200,
    rng: np.random.Generator | None = None,
) -> BasisInformation:
    """Mutual information (bits per basis position) between observations and ``b``.

    Each (session, position) contributes one sample: Eve's observation counts
    at that position paired with the true basis bit. ``true_b`` is either one
    basis sequence shared by all sessions or one per session. The standard
    error is a bootstrap over sessions. Fewer than ``MIN_SESSIONS`` sessions
    are flagged as insufficient rather than rejected.
    """
    if not records:
        raise AttackError("no Eve records supplied")
    true_b = np.asarray(true_b)
    per_session_b = true_b if true_b.ndim == 2 else np.broadcast_to(true_b, (len(records), len(true_b)))
    session_pairs = []
    for rec, b in zip(records, per_session_b):
        obs = position_observations(rec)
        session_pairs.append([(obs.get(j, ()), int(b[j])) for j in range(len(b))])
    flat = [p for s in session_pairs for p in s]
    estimate = _mutual_information(flat)

    rng = rng if rng is not None else np.random.default_rng(0)
    reps = []
    k = len(session_pairs)
    for _ in range(bootstrap):
        idx = rng.integers(0, k, size=k)
        reps.append(_mutual_information([p for i in idx for p in session_pairs[i]]))
    stderr = float(np.std(reps, ddof=1)) if bootstrap > 1 else float("nan")
    return BasisInformation(float(estimate), stderr, k, len(flat), k >= MIN_SESSIONS)


def binomial_basis_information(p0_given_b: tuple[float, float], rounds: int, prior_one: float = 0.5) -> float:
    """Exact mutual information between ``b`` and the count of 0 outcomes over ``rounds`` slots.

    Models an Eve who measures every slot of a position in one fixed basis,
    reading 0 with probability ``p0_given_b[b]``.
    """
    k = np.arange(rounds + 1)
    prior = np.array([1 - prior_one, prior_one])
    cond = np.array([binom.pmf(k, rounds, p) for p in p0_given_b])
    marg = prior @ cond

    def h(p):
        p = p[p > 0]
        return float(-(p * np.log2(p)).sum())

    return h(marg) - sum(w * h(c) for w, c in zip(prior, cond))


def holevo_quantity(ensembles: Mapping[int, DensityMatrix], prior_one: float = 0.5) -> float:
    """Holevo bound (bits) on what one slot can reveal about its basis bit."""
    avg = (1 - prior_one) * ensembles[0].entries + prior_one * ensembles[1].entries
    avg_dm = DensityMatrix((avg + avg.conj().T) / 2)
    return avg_dm.entropy() - (1 - prior_one) * ensembles[0].entropy() - prior_one * ensembles[1].entropy()
