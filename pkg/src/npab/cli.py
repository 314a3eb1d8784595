"""Command-line front end.

    npab run             --config cfg.toml   # one session -> transcript.json
    npab campaign        --config cfg.toml   # sessions.csv + summary.json
    npab deviation-study --config cfg.toml   # deviation_report.json + deviation_sessions.csv
    npab source-audit    --config cfg.toml   # source_audit.json
    npab basis-info      --config cfg.toml   # basis_info.json
    npab codes-info      [--config cfg.toml]

Exit codes: 0 success, 1 usage/config/I-O error, 2 the single session aborted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable

from . import stats
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import basis_information_experiment, campaign_basis, run_campaign, source_audit
from .gf2codes import CATALOG, NestedCodePair, bits_to_str, catalog_pair
from .protocol import run_session

log = logging.getLogger("npab")

EXIT_OK, EXIT_ERROR, EXIT_ABORTED = 0, 1, 2

SUBCOMMAND_KIND = {
    "run": "single",
    "campaign": "campaign",
    "deviation-study": "deviation-study",
    "source-audit": "source-audit",
    "basis-info": "basis-info",
}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def cmd_run(cfg: ExperimentConfig) -> int:
    b = campaign_basis(cfg.params)
    t = run_session(cfg.params, b, cfg.source, cfg.attack, session_index=0)
    _write(cfg.out_dir / "transcript.json", t.to_json())
    status = "ABORTED" if t.aborted else "ok"
    print(f"qber={t.qber:.6f} check_errors={t.check_errors}/{t.n} {status}")
    if not t.aborted:
        print(f"alice_key={bits_to_str(t.alice_key)}\nbob_key  ={bits_to_str(t.bob_key)}")
    return EXIT_ABORTED if t.aborted else EXIT_OK


def cmd_campaign(cfg: ExperimentConfig) -> int:
    transcripts = run_campaign(cfg.params, cfg.source, cfg.attack, cfg.sessions, threads=cfg.threads)
    summary = stats.summarize(transcripts)
    arm = cfg.get("attack.kind")
    _write(cfg.out_dir / "sessions.csv", stats.campaign_csv(transcripts, arm))
    _write(cfg.out_dir / "summary.json", _dump(summary.to_dict()))
    agree = "n/a" if summary.key_agreement_rate is None else f"{summary.key_agreement_rate:.4f}"
    print(
        f"sessions={summary.sessions} qber_mean={summary.qber_mean:.6f} "
        f"qber_std={summary.qber_std:.6f} abort_rate={summary.abort_rate:.4f} key_agreement={agree}"
    )
    return EXIT_OK


def cmd_deviation_study(cfg: ExperimentConfig) -> int:
    report = stats.deviation_study(
        cfg.params.n,
        cfg.params.r,
        dict(zip("IXYZ", cfg.attack.probs)),
        cfg.sessions,
        cfg.seed,
        code_pair=cfg.params.code_pair,
        resamples=cfg.get("deviation.bootstrap"),
        confidence=cfg.get("deviation.confidence"),
    )
    _write(cfg.out_dir / "deviation_report.json", _dump(report.to_dict()))
    _write(cfg.out_dir / "deviation_sessions.csv", report.to_csv())
    for label, arm in report.arms.items():
        print(f"{label:18s} check_bits={arm.n_check:6d} mean={arm.mean:.6f} std={arm.std.value:.6f}")
    for label, e in report.ratios.items():
        print(f"std ratio {label:24s} {e.value:.4f}  CI [{e.lower:.4f}, {e.upper:.4f}]")
    return EXIT_OK


def cmd_source_audit(cfg: ExperimentConfig) -> int:
    audit = source_audit(cfg.source, cfg.get("audit.samples"), cfg.seed)
    _write(cfg.out_dir / "source_audit.json", _dump(audit.to_dict()))
    print(f"source={audit.source}")
    print(f"analytic trace distance (Z vs X ensemble):  {audit.analytic_trace_distance:.6e}")
    print(f"empirical trace distance ({audit.samples} samples): {audit.empirical_trace_distance:.6e}")
    return EXIT_OK


def cmd_basis_info(cfg: ExperimentConfig) -> int:
    result = basis_information_experiment(
        cfg.params,
        cfg.source,
        cfg.attack,
        cfg.sessions,
        bootstrap=cfg.get("basis_info.bootstrap"),
        threads=cfg.threads,
    )
    _write(cfg.out_dir / "basis_info.json", _dump(result.to_dict()))
    est = result.estimate
    print(
        f"source={result.source} sessions={est.sessions} "
        f"I(obs; b)={est.bits_per_position:.6f} +/- {est.stderr:.6f} bits/position"
    )
    if not est.sufficient:
        print("warning: fewer than 100 sessions; estimate is unreliable", file=sys.stderr)
    return EXIT_OK


def _describe_pair(pair: NestedCodePair) -> dict:
    return {
        "name": pair.name,
        "n": pair.length,
        "dim_c1": pair.c1.dimension,
        "dim_c2": pair.c2.dimension,
        "key_bits_per_block": pair.key_length,
        "coset_representatives": [bits_to_str(r) for r in pair.coset_representatives],
    }


def cmd_codes_info(cfg: ExperimentConfig | None) -> int:
    pairs = [cfg.params.code_pair] if cfg is not None else [catalog_pair(name) for name in CATALOG]
    for pair in pairs:
        print(json.dumps(_describe_pair(pair)))
    return EXIT_OK


COMMANDS: dict[str, Callable[[ExperimentConfig], int]] = {
    "run": cmd_run,
    "campaign": cmd_campaign,
    "deviation-study": cmd_deviation_study,
    "source-audit": cmd_source_audit,
    "basis-info": cmd_basis_info,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="npab", description="Simulate QKD without public announcement of bases.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "codes-info"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "codes-info", type=Path)
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--out", type=Path, help="override output.dir")
        p.add_argument("--threads", type=int, help="override experiment.threads")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    cfg = None
    if args.config is not None:
        try:
            cfg = load_config(args.config, seed=args.seed, out_dir=args.out, threads=args.threads)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_ERROR
    if args.command == "codes-info":
        return cmd_codes_info(cfg)

    expected = SUBCOMMAND_KIND[args.command]
    if cfg.kind != expected:
        print(f"config error: experiment.kind is {cfg.kind!r} but '{args.command}' needs {expected!r}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](cfg)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
