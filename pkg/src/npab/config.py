"""Experiment configuration: a flat ``section.key = value`` file (TOML syntax).

Example::

    experiment.kind = "campaign"
    experiment.seed = 7
    experiment.sessions = 200
    session.n = 14336
    session.r = 4
    session.code = "steane"
    attack.kind = "intercept-resend"
    attack.policy = "uniform"

Every key is checked against ``SCHEMA``; unknown keys, wrong types and
cross-field violations are reported before anything runs.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adversary import (
    AttackError,
    AttackStrategy,
    BasisLearner,
    BasisPolicy,
    CorrelatedPauli,
    InterceptResend,
    NoAttack,
    PauliChannel,
)
from .gf2codes import CodeError, NestedCodePair, catalog_pair, load_code_pair
from .protocol import DEFAULT_ABORT_THRESHOLD, ProtocolError, SessionParams
from .qcore import Basis, Pauli
from .sources import EntangledSource, Ideal, ImperfectDirect, SourceModel

KINDS = ("single", "campaign", "deviation-study", "source-audit", "basis-info")
SOURCE_KINDS = ("ideal", "imperfect-direct", "entangled")
ATTACK_KINDS = ("none", "intercept-resend", "pauli", "correlated-pauli", "basis-learner")

# key -> (type, default); a default of REQUIRED means the key must be given
REQUIRED = object()
SCHEMA: dict[str, tuple[type, Any]] = {
    "experiment.kind": (str, REQUIRED),
    "experiment.seed": (int, 0),
    "experiment.sessions": (int, 1),
    "experiment.threads": (int, 1),
    "session.n": (int, REQUIRED),
    "session.r": (int, REQUIRED),
    "session.code": (str, "steane"),
    "session.code_file": (str, None),
    "session.abort_threshold": (float, DEFAULT_ABORT_THRESHOLD),
    "source.kind": (str, "ideal"),
    "source.delta": (float, None),
    "source.fidelity": (float, None),
    "attack.kind": (str, "none"),
    "attack.policy": (str, None),
    "attack.basis": (str, None),
    "attack.p_i": (float, None),
    "attack.p_x": (float, None),
    "attack.p_y": (float, None),
    "attack.p_z": (float, None),
    "output.dir": (str, "out"),
    "deviation.bootstrap": (int, 2000),
    "deviation.confidence": (float, 0.95),
    "audit.samples": (int, 100_000),
    "basis_info.bootstrap": (int, 200),
}

# keys that only make sense for one value of a selector key
_ONLY_FOR = {
    "source.delta": ("source.kind", ("imperfect-direct",)),
    "source.fidelity": ("source.kind", ("entangled",)),
    "attack.policy": ("attack.kind", ("intercept-resend",)),
    "attack.basis": ("attack.kind", ("basis-learner",)),
    **{f"attack.p_{p}": ("attack.kind", ("pauli", "correlated-pauli")) for p in "ixyz"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: SessionParams
    source: SourceModel
    attack: AttackStrategy
    sessions: int
    threads: int
    out_dir: Path
    raw: dict[str, Any] = field(repr=False, default_factory=dict)

    @property
    def seed(self) -> int:
        return self.params.seed

    def get(self, key: str) -> Any:
        return self.raw[key]


def _flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _typed(key: str, value: Any) -> Any:
    typ, _ = SCHEMA[key]
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, typ) or isinstance(value, bool):
        raise ConfigError(f"{key} must be of type {typ.__name__}, got {value!r}")
    return value


def _code_pair(cfg: dict[str, Any], base: Path) -> NestedCodePair:
    try:
        if cfg["session.code_file"] is not None:
            path = Path(cfg["session.code_file"])
            return load_code_pair(path if path.is_absolute() else base / path)
        return catalog_pair(cfg["session.code"])
    except (CodeError, OSError) as e:
        raise ConfigError(f"session.code: {e}") from e


def _source(cfg: dict[str, Any]) -> SourceModel:
    kind = cfg["source.kind"]
    try:
        if kind == "ideal":
            return Ideal()
        if kind == "imperfect-direct":
            if cfg["source.delta"] is None:
                raise ConfigError("source.delta is required for source.kind = imperfect-direct")
            return ImperfectDirect(cfg["source.delta"])
        if kind == "entangled":
            if cfg["source.fidelity"] is None:
                raise ConfigError("source.fidelity is required for source.kind = entangled")
            return EntangledSource(cfg["source.fidelity"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"source: {e}") from e
    raise ConfigError(f"source.kind must be one of {SOURCE_KINDS}, got {kind!r}")


def _pauli_probs(cfg: dict[str, Any]) -> dict[Pauli, float]:
    given = {p: cfg[f"attack.p_{p.name.lower()}"] for p in Pauli}
    if all(v is None for v in given.values()):
        raise ConfigError("attack.p_x / p_y / p_z are required for Pauli attacks")
    if given[Pauli.I] is None:
        given[Pauli.I] = 1.0 - sum(v for v in given.values() if v is not None)
    return {p: (0.0 if v is None else v) for p, v in given.items()}


def _attack(cfg: dict[str, Any]) -> AttackStrategy:
    kind = cfg["attack.kind"]
    try:
        if kind == "none":
            return NoAttack()
        if kind == "intercept-resend":
            policy = cfg["attack.policy"] or "uniform"
            try:
                return InterceptResend(BasisPolicy(policy))
            except ValueError:
                raise ConfigError(f"attack.policy must be one of z, x, uniform; got {policy!r}") from None
        if kind == "pauli":
            return PauliChannel(_pauli_probs(cfg))
        if kind == "correlated-pauli":
            return CorrelatedPauli(_pauli_probs(cfg))
        if kind == "basis-learner":
            label = (cfg["attack.basis"] or "z").upper()
            if label not in ("Z", "X"):
                raise ConfigError(f"attack.basis must be z or x, got {cfg['attack.basis']!r}")
            return BasisLearner(Basis[label])
    except AttackError as e:
        raise ConfigError(f"attack: {e}") from e
    raise ConfigError(f"attack.kind must be one of {ATTACK_KINDS}, got {kind!r}")


def parse_config(
    text: str,
    *,
    base_dir: str | Path = ".",
    seed: int | None = None,
    out_dir: str | Path | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Parse and fully validate a config. Command-line overrides win over the file."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config is not valid: {e}") from e
    flat = _flatten(data)
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg: dict[str, Any] = {}
    for key, (_, default) in SCHEMA.items():
        if key in flat:
            cfg[key] = _typed(key, flat[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key}")
        else:
            cfg[key] = default
    if seed is not None:
        cfg["experiment.seed"] = seed
    if out_dir is not None:
        cfg["output.dir"] = str(out_dir)
    if threads is not None:
        cfg["experiment.threads"] = threads

    for key, (selector, allowed) in _ONLY_FOR.items():
        if key in flat and cfg[selector] not in allowed:
            raise ConfigError(f"{key} only applies when {selector} is one of {', '.join(allowed)}")
    if "session.code_file" in flat and "session.code" in flat:
        raise ConfigError("give either session.code or session.code_file, not both")

    kind = cfg["experiment.kind"]
    if kind not in KINDS:
        raise ConfigError(f"experiment.kind must be one of {KINDS}, got {kind!r}")
    if not 0 <= cfg["experiment.seed"] < 2**64:
        raise ConfigError("experiment.seed must be a 64-bit unsigned integer")
    if cfg["experiment.sessions"] < 1:
        raise ConfigError("experiment.sessions must be at least 1")
    if cfg["experiment.threads"] < 1:
        raise ConfigError("experiment.threads must be at least 1")

    try:
        params = SessionParams(
            n=cfg["session.n"],
            r=cfg["session.r"],
            code_pair=_code_pair(cfg, Path(base_dir)),
            abort_threshold=cfg["session.abort_threshold"],
            seed=cfg["experiment.seed"],
        )
    except ProtocolError as e:
        raise ConfigError(f"session: {e}") from e
    source = _source(cfg)
    attack = _attack(cfg)

    if kind == "deviation-study":
        if not isinstance(attack, (PauliChannel, CorrelatedPauli)):
            raise ConfigError("deviation-study needs attack.kind = pauli or correlated-pauli (the marginal)")
        if params.n % params.r:
            raise ConfigError(f"deviation-study needs r to divide n (n = {params.n}, r = {params.r})")
        if params.n // params.r < params.code_pair.length:
            raise ConfigError("deviation-study needs n/r to be at least the code block length")
        if cfg["experiment.sessions"] < 200:
            raise ConfigError("deviation-study needs experiment.sessions >= 200")
        if not 0 < cfg["deviation.confidence"] < 1:
            raise ConfigError("deviation.confidence must lie in (0, 1)")
        if cfg["deviation.bootstrap"] < 2:
            raise ConfigError("deviation.bootstrap must be at least 2")
    if kind == "basis-info" and not isinstance(attack, (BasisLearner, InterceptResend)):
        raise ConfigError("basis-info needs attack.kind = basis-learner or intercept-resend")
    if kind == "source-audit" and cfg["audit.samples"] < 1:
        raise ConfigError("audit.samples must be positive")

    return ExperimentConfig(
        kind=kind,
        params=params,
        source=source,
        attack=attack,
        sessions=cfg["experiment.sessions"],
        threads=cfg["experiment.threads"],
        out_dir=Path(cfg["output.dir"]),
        raw=cfg,
    )


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, base_dir=path.parent, **overrides)
