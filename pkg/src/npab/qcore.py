"""Exact single-qubit quantum mechanics for BB84-style states.

States are two complex amplitudes. Everything here is immutable; randomness
only ever enters through an explicit ``numpy.random.Generator``.

Alongside the scalar API (``QubitState``, ``measure`` ...) there is a batch
API working on ``(N, 2)`` complex arrays of amplitudes. The protocol uses the
batch form; tests cross-check it against the scalar form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: tolerance for algebraic identities (normalisation, Hermiticity, equality)
ATOL = 1e-12
#: tolerance on ensemble probabilities summing to one
PROB_ATOL = 1e-9

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class Basis(enum.IntEnum):
    """Measurement/preparation basis. The value is the basis-sequence bit."""

    Z = 0
    X = 1


class Pauli(enum.IntEnum):
    """Pauli operators, numbered as sigma_0..sigma_3 = I, X, Y, Z."""

    I = 0
    X = 1
    Y = 2
    Z = 3

    @property
    def matrix(self) -> np.ndarray:
        return PAULI_MATRICES[self].copy()

    def __mul__(self, other: "Pauli") -> "Pauli":  # type: ignore[override]
        # composition up to global phase: the Pauli group mod phase is Z2 x Z2
        if not isinstance(other, Pauli):
            return NotImplemented
        return Pauli(_COMPOSE[self, other])

    @classmethod
    def parse(cls, label: str) -> "Pauli":
        key = label.strip().upper()
        aliases = {"SIGMA_X": "X", "SIGMA_Y": "Y", "SIGMA_Z": "Z", "SX": "X", "SY": "Y", "SZ": "Z", "0": "I"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown Pauli operator {label!r}") from None


PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_MATRICES.setflags(write=False)

# X and Z bits of each Pauli; Y = XZ up to phase
_XBIT = np.array([0, 1, 1, 0])
_ZBIT = np.array([0, 0, 1, 1])
_FROM_BITS = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}
_COMPOSE = np.array(
    [[_FROM_BITS[(int(_XBIT[a] ^ _XBIT[b]), int(_ZBIT[a] ^ _ZBIT[b]))] for b in range(4)] for a in range(4)]
)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
HADAMARD.setflags(write=False)

# BASIS_VECTORS[basis, outcome] is the eigenvector for that outcome
BASIS_VECTORS = np.array(
    [
        [[1, 0], [0, 1]],
        [[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]],
    ],
    dtype=complex,
)
BASIS_VECTORS.setflags(write=False)


@dataclass(frozen=True, eq=False)
class QubitState:
    """A normalised pure qubit state ``amp0|0> + amp1|1>``.

    Equality is up to global phase: two states compare equal when
    ``|<a|b>| = 1`` within ``ATOL``. States are therefore unhashable.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "amp0", complex(self.amp0))
        object.__setattr__(self, "amp1", complex(self.amp1))
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"qubit state is not normalised (|a0|^2+|a1|^2 = {norm!r})")

    @classmethod
    def from_vector(cls, vec: Sequence[complex] | np.ndarray) -> "QubitState":
        a0, a1 = vec
        return cls(complex(a0), complex(a1))

    @classmethod
    def bb84(cls, bit: int, basis: Basis | int) -> "QubitState":
        """The BB84 state encoding ``bit`` in ``basis``."""
        return cls.from_vector(BASIS_VECTORS[int(basis), int(bit)])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def overlap(self, other: "QubitState") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.vector, other.vector))

    def same_as(self, other: "QubitState", atol: float = ATOL) -> bool:
        return abs(abs(self.overlap(other)) - 1.0) <= atol

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QubitState):
            return NotImplemented
        return self.same_as(other)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"QubitState({self.amp0:.6g}, {self.amp1:.6g})"


ZERO = QubitState.bb84(0, Basis.Z)
ONE = QubitState.bb84(1, Basis.Z)
PLUS = QubitState.bb84(0, Basis.X)
MINUS = QubitState.bb84(1, Basis.X)


def hadamard(s: QubitState) -> QubitState:
    return QubitState.from_vector(HADAMARD @ s.vector)


def apply_pauli(s: QubitState, p: Pauli) -> QubitState:
    return QubitState.from_vector(PAULI_MATRICES[p] @ s.vector)


def outcome_probability(s: QubitState, basis: Basis | int, bit: int = 0) -> float:
    """Born-rule probability of reading ``bit`` when measuring ``s`` in ``basis``."""
    p = abs(np.vdot(BASIS_VECTORS[int(basis), int(bit)], s.vector)) ** 2
    return float(_snap(p))


def measure(s: QubitState, basis: Basis | int, rng: np.random.Generator) -> tuple[int, QubitState]:
    """Projective measurement of ``s`` in ``basis``.

    Consumes exactly one uniform draw from ``rng``. Returns the outcome bit and
    the post-measurement eigenstate.
    """
    bits, post = measure_batch(s.vector[None, :], np.array([int(basis)]), rng)
    return int(bits[0]), QubitState.from_vector(post[0])


# -- batch API -----------------------------------------------------------------


def bb84_amplitudes(bits: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """Amplitude array ``(N, 2)`` for BB84 states with the given bits and bases."""
    bits = np.asarray(bits, dtype=np.intp)
    bases = np.asarray(bases, dtype=np.intp)
    return BASIS_VECTORS[bases, bits].copy()


def apply_paulis(amps: np.ndarray, paulis: np.ndarray) -> np.ndarray:
    """Apply Pauli ``paulis[i]`` (integer codes 0..3) to row ``i`` of ``amps``."""
    paulis = np.asarray(paulis, dtype=np.intp)
    return np.einsum("nij,nj->ni", PAULI_MATRICES[paulis], amps)


def hadamard_batch(amps: np.ndarray) -> np.ndarray:
    return amps @ HADAMARD.T


def outcome_probabilities(amps: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """Probability of outcome 0 for each row of ``amps`` measured in ``bases``."""
    bases = np.asarray(bases, dtype=np.intp)
    e0 = BASIS_VECTORS[bases, 0]
    p0 = np.abs(np.einsum("ni,ni->n", e0.conj(), amps)) ** 2
    return _snap(p0)


def measure_with_uniforms(amps: np.ndarray, bases: np.ndarray, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Measure each row using a caller-supplied uniform in [0, 1).

    The outcome is 0 iff ``uniform < P(0)``, so eigenstates give their
    eigenvalue deterministically.
    """
    bases = np.asarray(bases, dtype=np.intp)
    p0 = outcome_probabilities(amps, bases)
    bits = (np.asarray(uniforms) >= p0).astype(np.uint8)
    post = BASIS_VECTORS[bases, bits].copy()
    return bits, post


def measure_batch(amps: np.ndarray, bases: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Measure every row of ``amps``; one uniform draw per row, in row order."""
    uniforms = rng.random(len(amps))
    return measure_with_uniforms(amps, bases, uniforms)


def _snap(p):
    # clamp round-off so eigenstates measure deterministically
    p = np.clip(p, 0.0, 1.0)
    p = np.where(p < ATOL, 0.0, p)
    return np.where(p > 1.0 - ATOL, 1.0, p)


# -- density matrices ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A 2x2 Hermitian, positive semidefinite, unit-trace operator."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=ATOL):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > ATOL:
            raise ValueError(f"density matrix trace is {np.trace(m).real!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def pure(cls, s: QubitState) -> "DensityMatrix":
        v = s.vector
        return cls(np.outer(v, v.conj()))

    def allclose(self, other: "DensityMatrix", atol: float = ATOL) -> bool:
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def probability(self, basis: Basis | int, bit: int) -> float:
        """Probability of reading ``bit`` when measuring this ensemble in ``basis``."""
        e = BASIS_VECTORS[int(basis), int(bit)]
        return float(np.real(e.conj() @ self.entries @ e))

    def entropy(self) -> float:
        """Von Neumann entropy in bits."""
        w = np.clip(np.linalg.eigvalsh(self.entries), 0.0, 1.0)
        w = w[w > ATOL]
        return float(-(w * np.log2(w)).sum())


MAXIMALLY_MIXED = DensityMatrix(np.eye(2) / 2)


def density_of_ensemble(members: Iterable[tuple[float, QubitState]]) -> DensityMatrix:
    """``sum_i p_i |psi_i><psi_i|`` for an ensemble of pure states."""
    members = list(members)
    probs = np.array([p for p, _ in members], dtype=float)
    if len(members) == 0:
        raise ValueError("ensemble is empty")
    if (probs < 0).any():
        raise ValueError("ensemble probabilities must be non-negative")
    if abs(probs.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"ensemble probabilities sum to {probs.sum()!r}, expected 1")
    vecs = np.array([s.vector for _, s in members])
    return density_from_amplitudes(vecs, probs)


def density_from_amplitudes(amps: np.ndarray, weights: np.ndarray | None = None) -> DensityMatrix:
    """Weighted mixture of the rows of ``amps`` (uniform weights by default)."""
    amps = np.asarray(amps, dtype=complex)
    if weights is None:
        weights = np.full(len(amps), 1.0 / len(amps))
    m = np.einsum("n,ni,nj->ij", weights, amps, amps.conj())
    # remove round-off asymmetry and trace drift (large sums) before validation
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of ``a - b``."""
    w = np.linalg.eigvalsh(a.entries - b.entries)
    return float(min(1.0, 0.5 * np.abs(w).sum()))


def expected_error_rate(p: Pauli) -> float:
    """Bit-error probability of ``p`` for a uniformly random BB84 state.

    The state is prepared and measured in the same basis; averaging the
    transition probability ``|<not bit| p |bit>|^2`` over the four BB84
    states gives 0, 1/2, 1, 1/2 for I, X, Y, Z.
    """
    m = PAULI_MATRICES[p]
    total = 0.0
    for basis in (0, 1):
        for bit in (0, 1):
            sent = BASIS_VECTORS[basis, bit]
            wrong = BASIS_VECTORS[basis, 1 - bit]
            total += abs(np.vdot(wrong, m @ sent)) ** 2
    return float(_snap(total / 4))
