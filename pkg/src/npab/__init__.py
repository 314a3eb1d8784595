"""Simulator for quantum key distribution without public announcement of bases.

Alice and Bob share a secret basis sequence and reuse it for ``r`` rounds of
BB84-style encoding, then run CSS-style classical post-processing.
"""

from .adversary import (
    BasisLearner,
    BasisPolicy,
    CorrelatedPauli,
    EveRecord,
    InterceptResend,
    NoAttack,
    PauliChannel,
    SlotBatch,
    apply_attack,
    eve_basis_information,
)
from .gf2codes import LinearCode, NestedCodePair, catalog_pair, steane_pair
from .protocol import (
    BasisSequence,
    Lifecycle,
    LifecycleEvent,
    SessionParams,
    SessionTranscript,
    basis_lifecycle_event,
    run_session,
)
from .qcore import Basis, DensityMatrix, Pauli, QubitState
from .sources import EntangledSource, Ideal, ImperfectDirect

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "BasisLearner",
    "BasisPolicy",
    "BasisSequence",
    "CorrelatedPauli",
    "DensityMatrix",
    "EntangledSource",
    "EveRecord",
    "Ideal",
    "ImperfectDirect",
    "InterceptResend",
    "Lifecycle",
    "LifecycleEvent",
    "LinearCode",
    "NestedCodePair",
    "NoAttack",
    "Pauli",
    "PauliChannel",
    "QubitState",
    "SessionParams",
    "SessionTranscript",
    "SlotBatch",
    "apply_attack",
    "basis_lifecycle_event",
    "catalog_pair",
    "eve_basis_information",
    "run_session",
    "steane_pair",
]
