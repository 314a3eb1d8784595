"""Campaign summaries, Hoeffding intervals, and the BB84-vs-NPAB deviation study."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import rng as rngmod
from .adversary import CorrelatedPauli, PauliChannel
from .gf2codes import NestedCodePair, steane_pair
from .protocol import BasisSequence, SessionParams, SessionTranscript, run_session
from .qcore import Pauli

BOOTSTRAP_RESAMPLES = 2000
CONFIDENCE = 0.95


def fmt(x: float | None) -> float | None:
    """Round to 12 significant digits for serialisation."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class CampaignSummary:
    sessions: int
    qber_mean: float
    qber_std: float
    abort_rate: float
    key_agreement_rate: float | None
    qbers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "sessions": self.sessions,
            "qber_mean": fmt(self.qber_mean),
            "qber_std": fmt(self.qber_std),
            "abort_rate": fmt(self.abort_rate),
            "key_agreement_rate": fmt(self.key_agreement_rate),
            "qbers": [fmt(q) for q in self.qbers],
        }


def summarize(transcripts: Sequence[SessionTranscript]) -> CampaignSummary:
    """Descriptive statistics over sessions.

    ``qber_std`` is the population standard deviation. Key agreement is the
    fraction of non-aborted sessions whose keys match, and ``None`` when every
    session aborted.
    """
    if not transcripts:
        raise ValueError("cannot summarise an empty campaign")
    q = np.array([t.qber for t in transcripts])
    aborted = np.array([t.aborted for t in transcripts])
    completed = [t for t in transcripts if not t.aborted]
    agreement = float(np.mean([t.keys_agree for t in completed])) if completed else None
    return CampaignSummary(
        sessions=len(transcripts),
        qber_mean=float(q.mean()),
        qber_std=float(q.std()),
        abort_rate=float(aborted.mean()),
        key_agreement_rate=agreement,
        qbers=tuple(float(x) for x in q),
    )


def campaign_csv(transcripts: Sequence[SessionTranscript], arm: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["session", "arm", "qber", "aborted", "key_agreement"])
    for i, t in enumerate(transcripts):
        agree = "" if t.aborted else int(t.keys_agree)
        w.writerow([i, arm, f"{t.qber:.12g}", int(t.aborted), agree])
    return buf.getvalue()


# -- Hoeffding ---------------------------------------------------------------------


@dataclass(frozen=True)
class HoeffdingInterval:
    lower: float
    upper: float
    half_width: float
    confidence: float
    applicable: bool
    note: str = ""

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def hoeffding_bound(qber: float, size: int, confidence: float, independent: bool = True) -> HoeffdingInterval:
    """Two-sided Hoeffding interval for a per-slot error probability.

    ``P(|mean - p| >= t) <= 2 exp(-2 size t^2)``, solved for ``t`` at failure
    probability ``1 - confidence`` and clamped to [0, 1]. The bound assumes
    independent slots; pass ``independent=False`` for correlated attacks and
    the interval is returned but marked inapplicable.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    if size <= 0:
        raise ValueError("sample size must be positive")
    t = math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * size))
    note = "" if independent else "slots are correlated; Hoeffding's independence assumption fails"
    return HoeffdingInterval(max(0.0, qber - t), min(1.0, qber + t), t, confidence, independent, note)


# -- bootstrap -----------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    lower: float
    upper: float
    stderr: float

    def to_dict(self) -> dict:
        return {k: fmt(getattr(self, k)) for k in ("value", "lower", "upper", "stderr")}


def _percentile_estimate(point: float, reps: np.ndarray, confidence: float) -> Estimate:
    alpha = (1.0 - confidence) / 2
    lo, hi = np.quantile(reps, [alpha, 1 - alpha])
    return Estimate(float(point), float(min(lo, point)), float(max(hi, point)), float(reps.std(ddof=1)))


def bootstrap_std(
    x: np.ndarray, rng: np.random.Generator, resamples: int = BOOTSTRAP_RESAMPLES, confidence: float = CONFIDENCE
) -> Estimate:
    """Sample standard deviation with a percentile bootstrap interval."""
    x = np.asarray(x, dtype=float)
    idx = rng.integers(0, len(x), size=(resamples, len(x)))
    reps = x[idx].std(axis=1, ddof=1)
    return _percentile_estimate(float(x.std(ddof=1)), reps, confidence)


# -- deviation study -------------------------------------------------------------------

ARMS = ("bb84", "npab-independent", "npab-correlated")


@dataclass(frozen=True)
class ArmResult:
    label: str
    n_check: int
    rounds: int
    qbers: np.ndarray
    std: Estimate

    @property
    def mean(self) -> float:
        return float(self.qbers.mean())

    @property
    def mean_stderr(self) -> float:
        return float(self.qbers.std(ddof=1) / math.sqrt(len(self.qbers)))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "sessions": int(len(self.qbers)),
            "check_bits": self.n_check,
            "rounds": self.rounds,
            "qber_mean": fmt(self.mean),
            "qber_mean_stderr": fmt(self.mean_stderr),
            "qber_std": self.std.to_dict(),
        }


@dataclass(frozen=True)
class DeviationReport:
    """Three arms at a matched marginal error rate.

    ``ratios`` holds standard-deviation ratios with bootstrap intervals:
    ``correlated/independent``, ``correlated/bb84`` and ``independent/bb84``.
    ``std_difference`` is std(correlated) - std(bb84) with its bootstrap
    standard error.
    """

    n: int
    r: int
    marginal: tuple[float, float, float, float]
    sessions: int
    arms: Mapping[str, ArmResult]
    ratios: Mapping[str, Estimate]
    std_difference: Estimate
    seed: int
    confidence: float = CONFIDENCE
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "marginal": {p.name: fmt(x) for p, x in zip(Pauli, self.marginal)},
            "sessions_per_arm": self.sessions,
            "seed": self.seed,
            "confidence": self.confidence,
            "arms": {k: a.to_dict() for k, a in self.arms.items()},
            "std_ratios": {k: e.to_dict() for k, e in self.ratios.items()},
            "std_difference_correlated_minus_bb84": self.std_difference.to_dict(),
            "notes": list(self.notes),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["arm", "session", "qber"])
        for label in ARMS:
            for i, q in enumerate(self.arms[label].qbers):
                w.writerow([label, i, f"{q:.12g}"])
        return buf.getvalue()


def _arm_qbers(params: SessionParams, attack, sessions: int) -> np.ndarray:
    out = np.empty(sessions)
    for i in range(sessions):
        b = BasisSequence.random(params.basis_length, rngmod.stream(params.seed, "session", i, "basis"))
        out[i] = run_session(params, b, attack=attack, session_index=i).qber
    return out


def deviation_study(
    n: int,
    r: int,
    attack_marginal: Mapping[Pauli | str, float],
    sessions: int,
    seed: int,
    *,
    code_pair: NestedCodePair | None = None,
    resamples: int = BOOTSTRAP_RESAMPLES,
    confidence: float = CONFIDENCE,
) -> DeviationReport:
    """Compare check-bit QBER spread for BB84 and NPAB at the same Pauli marginal.

    Arms:
      * ``bb84``: ``n/r`` check bits, one round, fresh bases (NPAB with r = 1).
      * ``npab-independent``: ``n`` check bits, ``r`` rounds, independent Paulis.
      * ``npab-correlated``: as above, one Pauli per basis position for all rounds.

    Every session draws a fresh basis sequence. The two NPAB arms share their
    seed, so they see identical bits, bases and check selections and differ
    only in how Eve's Paulis are correlated.
    """
    if (2 * n) % r or n % r:
        raise ValueError(f"r must divide n (and hence 2n); got n = {n}, r = {r}")
    if sessions < 200:
        raise ValueError("a deviation study needs at least 200 sessions per arm")
    code_pair = code_pair if code_pair is not None else steane_pair()
    independent = PauliChannel(attack_marginal)
    correlated = CorrelatedPauli(attack_marginal)
    arm_seed = {a: int(rngmod.stream(seed, "deviation", a).integers(0, 2**63)) for a in ("bb84", "npab")}
    threshold = 0.5  # the study looks at QBER spread, not at the abort decision
    p_a = SessionParams(n // r, 1, code_pair, threshold, arm_seed["bb84"])
    p_bc = SessionParams(n, r, code_pair, threshold, arm_seed["npab"])
    q = {
        "bb84": _arm_qbers(p_a, independent, sessions),
        "npab-independent": _arm_qbers(p_bc, independent, sessions),
        "npab-correlated": _arm_qbers(p_bc, correlated, sessions),
    }

    boot = rngmod.stream(seed, "deviation", "bootstrap")
    ia = boot.integers(0, sessions, size=(resamples, sessions))
    ibc = boot.integers(0, sessions, size=(resamples, sessions))  # B and C are paired
    reps = {
        "bb84": q["bb84"][ia].std(axis=1, ddof=1),
        "npab-independent": q["npab-independent"][ibc].std(axis=1, ddof=1),
        "npab-correlated": q["npab-correlated"][ibc].std(axis=1, ddof=1),
    }
    point = {k: float(v.std(ddof=1)) for k, v in q.items()}
    arms = {
        k: ArmResult(
            k,
            (n // r) if k == "bb84" else n,
            1 if k == "bb84" else r,
            q[k],
            _percentile_estimate(point[k], reps[k], confidence),
        )
        for k in ARMS
    }

    def ratio(num: str, den: str) -> Estimate:
        with np.errstate(divide="ignore", invalid="ignore"):
            rr = reps[num] / reps[den]
            pt = point[num] / point[den] if point[den] > 0 else float("nan")
        rr = rr[np.isfinite(rr)]
        return _percentile_estimate(pt, rr, confidence)

    ratios = {
        "correlated/independent": ratio("npab-correlated", "npab-independent"),
        "correlated/bb84": ratio("npab-correlated", "bb84"),
        "independent/bb84": ratio("npab-independent", "bb84"),
    }
    diff = _percentile_estimate(
        point["npab-correlated"] - point["bb84"], reps["npab-correlated"] - reps["bb84"], confidence
    )
    return DeviationReport(
        n=n,
        r=r,
        marginal=independent.probs,
        sessions=sessions,
        arms=arms,
        ratios=ratios,
        std_difference=diff,
        seed=seed,
        confidence=confidence,
    )


def correlated_std_ratio(n: int, r: int, error_given_z: float, error_given_x: float) -> float:
    """Exact std(correlated) / std(independent) of the check QBER for fresh random bases.

    Both arms pick ``n`` of ``2n`` slots uniformly as check bits. Slot error
    probability depends only on the basis of its position (``error_given_z``
    or ``error_given_x``). Under the correlated attack every slot at a position
    errs together. Computed by the law of total variance over (bases, errors)
    and the hypergeometric check sample; see ``tests/test_stats.py`` for a
    brute-force check on small instances.
    """
    return math.sqrt(check_qber_variance(n, r, error_given_z, error_given_x, correlated=True)
                     / check_qber_variance(n, r, error_given_z, error_given_x, correlated=False))


def check_qber_variance(n: int, r: int, ez: float, ex: float, correlated: bool) -> float:
    """Variance of the check-bit QBER; see ``correlated_std_ratio``."""
    N = 2 * n
    L = N // r
    # per-position error indicator: block of r slots that all err (correlated)
    # or r independent slot indicators (independent); bases are fresh uniform
    m1 = (ez + ex) / 2  # P(slot errs)
    if correlated:
        # E[K], E[K^2] where K = number of erroneous slots among all N
        # K = r * sum_j e_j with e_j ~ Bernoulli(m1) i.i.d. over positions
        ek = r * L * m1
        var_k = r * r * L * m1 * (1 - m1)
    else:
        # per position: K_j | basis ~ Binomial(r, e_basis); positions i.i.d.
        e_kj = r * m1
        e_kj2 = 0.5 * sum(r * e * (1 - e) + (r * e) ** 2 for e in (ez, ex))
        ek = L * e_kj
        var_k = L * (e_kj2 - e_kj**2)
    ek2 = var_k + ek**2
    # check errors C | K ~ Hypergeometric(N, K, n)
    # E[C | K] = n K / N,  Var[C | K] = n (K/N) (1 - K/N) (N - n) / (N - 1)
    var_e = (n / N) ** 2 * var_k
    e_var = n * (N - n) / (N - 1) * (ek / N - ek2 / N**2)
    return (var_e + e_var) / n**2
