"""Alice's photon source: ideal, basis-leaking, and entangled-pair variants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .qcore import (
    BASIS_VECTORS,
    PAULI_MATRICES,
    Basis,
    DensityMatrix,
    QubitState,
    apply_paulis,
    bb84_amplitudes,
    density_of_ensemble,
)


@dataclass(frozen=True)
class Ideal:
    """Exact BB84 states."""

    @property
    def label(self) -> str:
        return "ideal"


@dataclass(frozen=True)
class ImperfectDirect:
    """Direct preparation whose X-basis states are tilted by ``delta`` toward ``|0>``.

    ``|0bar>`` and ``|1bar>`` sit at polar angles -+pi/4 from ``|0>``; here both
    angles shrink to ``pi/4 - delta``, so the X ensemble is
    ``diag(cos^2, sin^2)`` instead of ``I/2``. Z-basis states are exact.
    """

    delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < np.pi / 4:
            raise ValueError(f"delta must lie in [0, pi/4), got {self.delta}")

    @property
    def label(self) -> str:
        return f"imperfect-direct(delta={self.delta:g})"


@dataclass(frozen=True)
class EntangledSource:
    """Alice measures one half of a Bell-diagonal pair and sends the other half.

    The pair state is ``F |Phi+><Phi+|`` plus ``(1 - F)/3`` on each of
    ``|Phi->``, ``|Psi+>``, ``|Psi->``. Those three are ``|Phi+>`` with Z, X or
    Y applied to Bob's half, which is how ``emit`` samples them.
    """

    fidelity: float

    def __post_init__(self) -> None:
        if not 0.25 <= self.fidelity <= 1.0:
            raise ValueError(f"fidelity must lie in [0.25, 1], got {self.fidelity}")

    @property
    def label(self) -> str:
        return f"entangled(F={self.fidelity:g})"

    @property
    def pauli_probs(self) -> np.ndarray:
        """Probabilities of I, X, Y, Z acting on Bob's half of ``|Phi+>``."""
        e = (1.0 - self.fidelity) / 3.0
        return np.array([self.fidelity, e, e, e])


SourceModel = Union[Ideal, ImperfectDirect, EntangledSource]


def _imperfect_x_amplitudes(delta: float) -> np.ndarray:
    theta = np.pi / 4 - delta
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [c, -s]], dtype=complex)


def emit(src: SourceModel, bit: int, basis: Basis | int, rng: np.random.Generator) -> tuple[int, QubitState]:
    """Emit one qubit. Returns Alice's recorded bit and the state sent to Bob.

    For ``EntangledSource`` the recorded bit is Alice's measurement outcome and
    the requested ``bit`` is ignored.
    """
    bits, amps = emit_batch(src, np.array([bit]), np.array([int(basis)]), rng)
    return int(bits[0]), QubitState.from_vector(amps[0])


def emit_batch(
    src: SourceModel, bits: np.ndarray, bases: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``emit``: returns recorded bits and an ``(N, 2)`` amplitude array.

    Only ``EntangledSource`` consumes randomness: one integer draw for Alice's
    outcomes, then one uniform draw per slot for the Bell-diagonal error.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    bases = np.asarray(bases, dtype=np.intp)
    if isinstance(src, Ideal):
        return bits.copy(), bb84_amplitudes(bits, bases)
    if isinstance(src, ImperfectDirect):
        amps = bb84_amplitudes(bits, bases)
        x = bases == 1
        amps[x] = _imperfect_x_amplitudes(src.delta)[bits[x]]
        return bits.copy(), amps
    if isinstance(src, EntangledSource):
        outcomes = rng.integers(0, 2, size=len(bases), dtype=np.uint8)
        u = rng.random(len(bases))
        paulis = np.searchsorted(np.cumsum(src.pauli_probs)[:-1], u, side="right")
        amps = apply_paulis(bb84_amplitudes(outcomes, bases), paulis)
        return outcomes, amps
    raise TypeError(f"unknown source model {src!r}")


def _bell_diagonal(fidelity: float) -> np.ndarray:
    s = 1.0 / np.sqrt(2.0)
    phi_p = np.array([s, 0, 0, s])
    phi_m = np.array([s, 0, 0, -s])
    psi_p = np.array([0, s, s, 0])
    psi_m = np.array([0, s, -s, 0])
    e = (1.0 - fidelity) / 3.0
    rho = fidelity * np.outer(phi_p, phi_p)
    for v in (phi_m, psi_p, psi_m):
        rho = rho + e * np.outer(v, v)
    return rho.astype(complex)


def ensemble_density(src: SourceModel, basis: Basis | int) -> DensityMatrix:
    """Density operator of Bob's qubit for uniform bits in ``basis``, computed exactly.

    For the entangled source this is the partial trace over Alice of the
    two-qubit pair state after her projective measurement, summed over her
    outcomes; it does not use the Pauli decomposition that ``emit`` samples.
    """
    basis = int(basis)
    if isinstance(src, (Ideal, ImperfectDirect)):
        if isinstance(src, ImperfectDirect) and basis == 1:
            amps = _imperfect_x_amplitudes(src.delta)
        else:
            amps = BASIS_VECTORS[basis]
        return density_of_ensemble([(0.5, QubitState.from_vector(a)) for a in amps])
    if isinstance(src, EntangledSource):
        rho = _bell_diagonal(src.fidelity).reshape(2, 2, 2, 2)  # [a, b, a', b']
        bob = np.zeros((2, 2), dtype=complex)
        for outcome in (0, 1):
            e = BASIS_VECTORS[basis, outcome]
            proj = np.outer(e, e.conj())
            bob += np.einsum("ac,cbad->bd", proj, rho)
        return DensityMatrix((bob + bob.conj().T) / 2)
    raise TypeError(f"unknown source model {src!r}")


def conditional_density(src: SourceModel, basis: Basis | int, bit: int) -> DensityMatrix:
    """Bob's state given Alice's recorded ``bit`` in ``basis`` (exact)."""
    basis, bit = int(basis), int(bit)
    if isinstance(src, ImperfectDirect) and basis == 1:
        return DensityMatrix.pure(QubitState.from_vector(_imperfect_x_amplitudes(src.delta)[bit]))
    if isinstance(src, EntangledSource):
        v = BASIS_VECTORS[basis, bit]
        m = sum(p * np.outer(P @ v, (P @ v).conj()) for p, P in zip(src.pauli_probs, PAULI_MATRICES))
        return DensityMatrix(m)
    return DensityMatrix.pure(QubitState.bb84(bit, basis))
