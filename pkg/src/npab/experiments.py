"""Multi-session experiments built on ``protocol.run_session``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .adversary import (
    AttackStrategy,
    BasisInformation,
    BasisLearner,
    InterceptResend,
    BasisPolicy,
    binomial_basis_information,
    eve_basis_information,
    holevo_quantity,
    infer_basis_posterior,
)
from .protocol import BasisSequence, SessionParams, SessionTranscript, run_session
from .qcore import density_from_amplitudes, trace_distance
from .sources import SourceModel, emit_batch, ensemble_density


def campaign_basis(params: SessionParams) -> BasisSequence:
    """The basis sequence shared by every session of a campaign."""
    return BasisSequence.random(params.basis_length, rngmod.stream(params.seed, "basis"))


def run_campaign(
    params: SessionParams,
    source: SourceModel,
    attack: AttackStrategy,
    sessions: int,
    *,
    b: BasisSequence | None = None,
    threads: int = 1,
) -> list[SessionTranscript]:
    """Run ``sessions`` sessions reusing one basis sequence.

    Session ``i`` draws from streams derived from ``(seed, i)``, so the result
    list is the same for any ``threads`` value.
    """
    if sessions < 1:
        raise ValueError("a campaign needs at least one session")
    b = b if b is not None else campaign_basis(params)

    def one(i: int) -> SessionTranscript:
        return run_session(params, b, source, attack, session_index=i)

    if threads <= 1:
        return [one(i) for i in range(sessions)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(sessions)))


@dataclass(frozen=True)
class SourceAudit:
    source: str
    analytic_trace_distance: float
    empirical_trace_distance: float
    empirical_vs_analytic: tuple[float, float]
    samples: int

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "analytic_trace_distance": float(f"{self.analytic_trace_distance:.12g}"),
            "empirical_trace_distance": float(f"{self.empirical_trace_distance:.12g}"),
            "empirical_vs_analytic": {
                "Z": float(f"{self.empirical_vs_analytic[0]:.12g}"),
                "X": float(f"{self.empirical_vs_analytic[1]:.12g}"),
            },
            "samples_per_basis": self.samples,
        }


def source_audit(source: SourceModel, samples: int, seed: int) -> SourceAudit:
    """Distance between Bob's Z- and X-conditioned ensembles, exact and sampled."""
    analytic = [ensemble_density(source, basis) for basis in (0, 1)]
    empirical = []
    for basis in (0, 1):
        g = rngmod.stream(seed, "audit", basis)
        bits = g.integers(0, 2, size=samples, dtype=np.uint8)
        _, amps = emit_batch(source, bits, np.full(samples, basis), g)
        empirical.append(density_from_amplitudes(amps))
    return SourceAudit(
        source=source.label,
        analytic_trace_distance=trace_distance(*analytic),
        empirical_trace_distance=trace_distance(*empirical),
        empirical_vs_analytic=(
            trace_distance(empirical[0], analytic[0]),
            trace_distance(empirical[1], analytic[1]),
        ),
        samples=samples,
    )


@dataclass(frozen=True)
class BasisInfoResult:
    source: str
    sessions: int
    positions: int
    rounds: int
    estimate: BasisInformation
    analytic: float | None
    holevo_bound: float
    trace_distance: float
    posterior_accuracy: float

    def to_dict(self) -> dict:
        def f(x):
            return None if x is None or math.isnan(x) else float(f"{x:.12g}")

        return {
            "source": self.source,
            "sessions": self.sessions,
            "positions": self.positions,
            "rounds": self.rounds,
            "mutual_information_bits_per_position": f(self.estimate.bits_per_position),
            "stderr": f(self.estimate.stderr),
            "samples": self.estimate.samples,
            "sufficient_sessions": self.estimate.sufficient,
            "analytic_mutual_information": f(self.analytic),
            "holevo_bound_r_slots": f(self.holevo_bound),
            "ensemble_trace_distance": f(self.trace_distance),
            "posterior_accuracy": f(self.posterior_accuracy),
        }


def basis_information_experiment(
    params: SessionParams,
    source: SourceModel,
    attack: AttackStrategy,
    sessions: int,
    *,
    bootstrap: int = 200,
    threads: int = 1,
) -> BasisInfoResult:
    """How much Eve learns about ``b`` by watching ``sessions`` sessions.

    Runs a campaign with one shared basis sequence, then estimates the mutual
    information between each position's observations (per session) and its
    basis bit. For a fixed-basis learner the exact binomial mutual information
    is reported alongside. ``holevo_bound`` caps what any measurement on the
    ``r`` slots of a position could reveal.
    """
    if not isinstance(attack, (BasisLearner, InterceptResend)):
        raise ValueError("basis information needs a measuring strategy (basis-learner or intercept-resend)")
    b = campaign_basis(params)
    transcripts = run_campaign(params, source, attack, sessions, b=b, threads=threads)
    records = [t.eve_record for t in transcripts]
    estimate = eve_basis_information(
        records, b.bits, bootstrap=bootstrap, rng=rngmod.stream(params.seed, "basis-info", "bootstrap")
    )
    ens = {bit: ensemble_density(source, bit) for bit in (0, 1)}
    prior_one = float(b.bits.mean())

    analytic = None
    eve_basis = None
    if isinstance(attack, BasisLearner):
        eve_basis = int(attack.measure_basis)
    elif attack.basis_policy is not BasisPolicy.UNIFORM:
        eve_basis = 0 if attack.basis_policy is BasisPolicy.ALWAYS_Z else 1
    if eve_basis is not None:
        p0 = (ens[0].probability(eve_basis, 0), ens[1].probability(eve_basis, 0))
        analytic = binomial_basis_information(p0, params.r, prior_one)

    correct = []
    for rec in records:
        post = infer_basis_posterior(rec, ens, params.basis_length)
        rec.posterior = post
        guess = (post > 0.5).astype(np.uint8)
        ties = np.abs(post - 0.5) < 1e-9
        correct.append(np.where(ties, 0.5, guess == b.bits).mean())

    return BasisInfoResult(
        source=source.label,
        sessions=sessions,
        positions=params.basis_length,
        rounds=params.r,
        estimate=estimate,
        analytic=analytic,
        holevo_bound=min(1.0, params.r * holevo_quantity(ens, prior_one)),
        trace_distance=trace_distance(ens[0], ens[1]),
        posterior_accuracy=float(np.mean(correct)),
    )
