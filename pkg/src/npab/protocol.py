"""QKD without public announcement of bases: Alice, Bob, and one full session.

A session has ``2n`` slots. Slot ``s`` belongs to basis-sequence position
``s % L`` and round ``s // L`` where ``L = 2n / r`` (0-based throughout), so
the shared basis sequence is tiled ``r`` times.

Public discussion is modelled by ``PublicChannel``, which refuses any
announcement until Bob has acknowledged receipt of every qubit. Eve only ever
receives the ``SlotBatch`` in flight.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import rng as rngmod
from .adversary import AttackStrategy, EveRecord, NoAttack, SlotBatch, apply_attack
from .gf2codes import NestedCodePair, bits_to_str, random_codeword
from .qcore import DensityMatrix, measure_batch
from .sources import Ideal, SourceModel, emit_batch, ensemble_density

log = logging.getLogger(__name__)

DEFAULT_ABORT_THRESHOLD = 0.11


class ProtocolError(ValueError):
    """Invalid parameters or an operation attempted out of order."""


class BasisSequenceDiscarded(ProtocolError):
    pass


class Lifecycle(enum.Enum):
    ACTIVE = "active"
    DISCARDED = "discarded"


class LifecycleEvent(enum.Enum):
    KEY_USED_FOR_ENCRYPTION = "key-used-for-encryption"
    SESSION_ABORTED = "session-aborted"
    SESSION_SUCCEEDED = "session-succeeded"


@dataclass(frozen=True, eq=False)
class BasisSequence:
    """The pre-shared secret basis string (0 = Z, 1 = X)."""

    bits: np.ndarray
    lifecycle: Lifecycle = Lifecycle.ACTIVE

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if bits.size == 0 or bits.max() > 1:
            raise ProtocolError("basis sequence must be a non-empty 0/1 vector")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "BasisSequence":
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8))

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def active(self) -> bool:
        return self.lifecycle is Lifecycle.ACTIVE

    def require_active(self) -> None:
        if not self.active:
            raise BasisSequenceDiscarded("basis sequence has been discarded and may not be reused")


def basis_lifecycle_event(b: BasisSequence, event: LifecycleEvent) -> BasisSequence:
    """Advance the basis sequence lifecycle.

    Using a derived key for encryption leaks key information through the
    ciphertext and hence about ``b``, so the sequence must be discarded.
    Aborted or successful sessions leave it active: the encoded bits are
    fresh every session, so the transmitted ensemble stays ``I/2``.
    """
    b.require_active()
    if event is LifecycleEvent.KEY_USED_FOR_ENCRYPTION:
        return replace(b, lifecycle=Lifecycle.DISCARDED)
    if event in (LifecycleEvent.SESSION_ABORTED, LifecycleEvent.SESSION_SUCCEEDED):
        return b
    raise ProtocolError(f"unknown lifecycle event {event!r}")


@dataclass(frozen=True)
class SessionParams:
    n: int
    r: int
    code_pair: NestedCodePair
    abort_threshold: float = DEFAULT_ABORT_THRESHOLD
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n <= 0:
            raise ProtocolError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.r, (int, np.integer)) or self.r <= 0:
            raise ProtocolError(f"r must be a positive integer, got {self.r!r}")
        if (2 * self.n) % self.r:
            raise ProtocolError(f"2n/r must be a positive integer (n = {self.n}, r = {self.r})")
        if not 0.0 < self.abort_threshold < 1.0:
            raise ProtocolError(f"abort_threshold must lie in (0, 1), got {self.abort_threshold}")
        self.code_pair.validated()
        if self.n < self.code_pair.length:
            raise ProtocolError(
                f"n = {self.n} is shorter than the code block length {self.code_pair.length}"
            )

    @property
    def total_slots(self) -> int:
        return 2 * self.n

    @property
    def basis_length(self) -> int:
        return 2 * self.n // self.r

    @property
    def blocks(self) -> int:
        return self.n // self.code_pair.length

    @property
    def key_length(self) -> int:
        return self.blocks * self.code_pair.key_length


def slot_layout(params: SessionParams) -> tuple[np.ndarray, np.ndarray]:
    """Position and round of every slot, in slot-index order."""
    s = np.arange(params.total_slots)
    return s % params.basis_length, s // params.basis_length


def slot_bases(params: SessionParams, b: BasisSequence) -> np.ndarray:
    if len(b) != params.basis_length:
        raise ProtocolError(f"basis sequence has length {len(b)}, expected 2n/r = {params.basis_length}")
    return np.tile(b.bits, params.r)


def alice_prepare(
    params: SessionParams, b: BasisSequence, source: SourceModel, rng: np.random.Generator
) -> tuple[np.ndarray, SlotBatch]:
    """Fresh random bits for every slot, encoded in the basis of the slot's position.

    With an entangled source the recorded bits are Alice's measurement outcomes.
    """
    b.require_active()
    bases = slot_bases(params, b)
    requested = rng.integers(0, 2, size=params.total_slots, dtype=np.uint8)
    bits, amps = emit_batch(source, requested, bases, rng)
    positions, rounds = slot_layout(params)
    return bits, SlotBatch(positions, rounds, amps)


def bob_measure(states: SlotBatch | np.ndarray, b: BasisSequence, rng: np.random.Generator) -> np.ndarray:
    """Measure each slot in the basis of its position (S_z for 0, S_x for 1)."""
    if isinstance(states, SlotBatch):
        if len(states) % len(b):
            raise ProtocolError("slot count is not a multiple of the basis length")
        order = np.argsort(states.rounds * len(b) + states.positions, kind="stable")
        if not np.array_equal(states.rounds[order] * len(b) + states.positions[order], np.arange(len(states))):
            raise ProtocolError("slots do not form a complete positions x rounds grid")
        amps = states.amps[order]
    else:
        amps = np.asarray(states, dtype=complex).reshape(-1, 2)
        if len(amps) % len(b):
            raise ProtocolError("slot count is not a multiple of the basis length")
    bases = np.tile(b.bits, len(amps) // len(b))
    bits, _ = measure_batch(amps, bases, rng)
    return bits


def select_check_bits(rng: np.random.Generator, total: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly random half of the slots as check bits; the rest are code bits.

    Both index arrays are returned sorted.
    """
    if total <= 0 or total % 2:
        raise ProtocolError(f"total slot count must be a positive even number, got {total}")
    perm = rng.permutation(total)
    return np.sort(perm[: total // 2]), np.sort(perm[total // 2 :])


def estimate_and_test(alice_check: np.ndarray, bob_check: np.ndarray, threshold: float) -> tuple[float, bool]:
    """Disagreement fraction on the check bits; abort iff it strictly exceeds ``threshold``."""
    a, b = np.asarray(alice_check), np.asarray(bob_check)
    if a.shape != b.shape or a.size == 0:
        raise ProtocolError("check strings must be non-empty and of equal length")
    qber = float(np.count_nonzero(a != b)) / a.size
    return qber, qber > threshold


@dataclass(frozen=True, eq=False)
class Reconciliation:
    announcement: np.ndarray
    alice_key: np.ndarray
    bob_key: np.ndarray


def reconcile(
    pair: NestedCodePair, v_alice: np.ndarray, v_bob: np.ndarray, rng: np.random.Generator
) -> Reconciliation:
    """Syndrome-free CSS post-processing over consecutive code blocks.

    Per block Alice draws ``u`` in C1 and announces ``u + v``. Bob adds that
    to his ``v + e``, decodes ``u + e`` to C1, and both take the coset of
    ``u + C2`` as the key. Bits beyond the last whole block are dropped.
    """
    v_alice = np.asarray(v_alice, dtype=np.uint8)
    v_bob = np.asarray(v_bob, dtype=np.uint8)
    if v_alice.shape != v_bob.shape or v_alice.ndim != 1:
        raise ProtocolError("code-bit strings must be 1-D and of equal length")
    nb = pair.length
    blocks = len(v_alice) // nb
    if blocks == 0:
        raise ProtocolError(f"need at least {nb} code bits, got {len(v_alice)}")
    va = v_alice[: blocks * nb].reshape(blocks, nb)
    vb = v_bob[: blocks * nb].reshape(blocks, nb)
    u = random_codeword(pair.c1, rng, size=blocks)
    announcement = u ^ va
    corrected = pair.c1.decode(vb ^ announcement)
    return Reconciliation(
        announcement.ravel(),
        pair.coset_label(u).ravel(),
        pair.coset_label(corrected).ravel(),
    )


class Phase(enum.IntEnum):
    PREPARED = 0
    TRANSMITTED = 1
    ACKNOWLEDGED = 2
    CHECKS_ANNOUNCED = 3
    TESTED = 4
    FINISHED = 5


class PublicChannel:
    """Authenticated classical channel; closed until Bob acknowledges the qubits."""

    def __init__(self) -> None:
        self.open = False
        self.log: list[tuple[str, str, Any]] = []

    def acknowledge(self) -> None:
        self.open = True
        self.log.append(("bob", "ack", None))

    def announce(self, sender: str, what: str, payload: Any) -> Any:
        if not self.open:
            raise ProtocolError(f"{sender} tried to announce {what!r} before all qubits arrived")
        self.log.append((sender, what, payload))
        return payload


@dataclass(eq=False)
class SessionTranscript:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    slot_bases: np.ndarray
    check_positions: np.ndarray
    check_errors: int
    qber: float
    aborted: bool
    announcement: np.ndarray | None
    alice_key: np.ndarray | None
    bob_key: np.ndarray | None
    eve_record: EveRecord = field(default_factory=EveRecord)

    @property
    def n(self) -> int:
        return len(self.alice_bits) // 2

    @property
    def code_positions(self) -> np.ndarray:
        mask = np.ones(len(self.alice_bits), dtype=bool)
        mask[self.check_positions] = False
        return np.flatnonzero(mask)

    @property
    def code_error_rate(self) -> float:
        code = self.code_positions
        return float(np.count_nonzero(self.alice_bits[code] != self.bob_bits[code])) / len(code)

    @property
    def keys_agree(self) -> bool | None:
        if self.aborted:
            return None
        return bool(np.array_equal(self.alice_key, self.bob_key))

    def to_dict(self) -> dict:
        def bits(a):
            return None if a is None else bits_to_str(a)

        return {
            "alice_bits": bits(self.alice_bits),
            "bob_bits": bits(self.bob_bits),
            "slot_bases": bits(self.slot_bases),
            "check_positions": [int(i) for i in self.check_positions],
            "check_errors": int(self.check_errors),
            "qber": float(f"{self.qber:.12g}"),
            "aborted": bool(self.aborted),
            "announcement": bits(self.announcement),
            "alice_key": bits(self.alice_key),
            "bob_key": bits(self.bob_key),
            "eve_record": self.eve_record.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "SessionTranscript":
        def bits(s):
            return None if s is None else np.array([int(c) for c in s], dtype=np.uint8)

        return cls(
            alice_bits=bits(d["alice_bits"]),
            bob_bits=bits(d["bob_bits"]),
            slot_bases=bits(d["slot_bases"]),
            check_positions=np.array(d["check_positions"], dtype=np.int64),
            check_errors=int(d["check_errors"]),
            qber=float(d["qber"]),
            aborted=bool(d["aborted"]),
            announcement=bits(d["announcement"]),
            alice_key=bits(d["alice_key"]),
            bob_key=bits(d["bob_key"]),
            eve_record=EveRecord.from_dict(d.get("eve_record") or {}),
        )


class Session:
    """One protocol run, advanced phase by phase.

    Each step checks that it follows the previous one; calling them out of
    order raises ``ProtocolError``. ``run_session`` drives the full sequence.
    """

    def __init__(
        self,
        params: SessionParams,
        b: BasisSequence,
        source: SourceModel | None = None,
        attack: AttackStrategy | None = None,
        session_index: int = 0,
    ) -> None:
        b.require_active()
        slot_bases(params, b)  # validates the basis length
        self.params = params
        self.b = b
        self.source = source if source is not None else Ideal()
        self.attack = attack if attack is not None else NoAttack()
        self.streams = rngmod.session_streams(params.seed, session_index)
        self.channel = PublicChannel()
        self.phase = Phase.PREPARED
        self.eve_record = EveRecord()
        self.alice_bits, self._in_flight = alice_prepare(params, b, self.source, self.streams["alice"])

    def _advance(self, expected: Phase, to: Phase) -> None:
        if self.phase is not expected:
            raise ProtocolError(f"cannot enter {to.name} from {self.phase.name}")
        self.phase = to

    def transmit(self) -> None:
        """Qubits cross the channel; Eve acts on them now or never."""
        self._advance(Phase.PREPARED, Phase.TRANSMITTED)
        arrived, self.eve_record = apply_attack(self.attack, self._in_flight, self.streams["eve"])
        self.bob_bits = bob_measure(arrived, self.b, self.streams["bob"])
        self._in_flight = None

    def acknowledge(self) -> None:
        self._advance(Phase.TRANSMITTED, Phase.ACKNOWLEDGED)
        self.channel.acknowledge()

    def announce_checks(self) -> None:
        self._advance(Phase.ACKNOWLEDGED, Phase.CHECKS_ANNOUNCED)
        check, code = select_check_bits(self.streams["sampler"], self.params.total_slots)
        self.check_positions = self.channel.announce("alice", "check-positions", check)
        self.code_positions = code
        self._alice_check = self.channel.announce("alice", "check-values", self.alice_bits[check])
        self._bob_check = self.channel.announce("bob", "check-values", self.bob_bits[check])

    def test(self) -> None:
        self._advance(Phase.CHECKS_ANNOUNCED, Phase.TESTED)
        self.qber, self.aborted = estimate_and_test(self._alice_check, self._bob_check, self.params.abort_threshold)
        self.check_errors = int(np.count_nonzero(self._alice_check != self._bob_check))

    def finish(self) -> SessionTranscript:
        self._advance(Phase.TESTED, Phase.FINISHED)
        announcement = alice_key = bob_key = None
        if not self.aborted:
            rec = reconcile(
                self.params.code_pair,
                self.alice_bits[self.code_positions],
                self.bob_bits[self.code_positions],
                self.streams["alice"],
            )
            announcement = self.channel.announce("alice", "u+v", rec.announcement)
            alice_key, bob_key = rec.alice_key, rec.bob_key
        return SessionTranscript(
            alice_bits=self.alice_bits,
            bob_bits=self.bob_bits,
            slot_bases=slot_bases(self.params, self.b),
            check_positions=self.check_positions,
            check_errors=self.check_errors,
            qber=self.qber,
            aborted=self.aborted,
            announcement=announcement,
            alice_key=alice_key,
            bob_key=bob_key,
            eve_record=self.eve_record,
        )


def run_session(
    params: SessionParams,
    b: BasisSequence,
    source: SourceModel | None = None,
    attack: AttackStrategy | None = None,
    session_index: int = 0,
) -> SessionTranscript:
    """Run one complete session; deterministic in ``(params.seed, session_index)``."""
    s = Session(params, b, source, attack, session_index)
    s.transmit()
    s.acknowledge()
    s.announce_checks()
    s.test()
    t = s.finish()
    log.debug("session %d: qber=%.4f aborted=%s", session_index, t.qber, t.aborted)
    return t


def transmitted_density(source: SourceModel, b: BasisSequence, r: int) -> list[DensityMatrix]:
    """Exact per-slot density operator Eve faces, averaging over Alice's fresh bits."""
    per_position = [ensemble_density(source, int(bit)) for bit in b.bits]
    return per_position * r
