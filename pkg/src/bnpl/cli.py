"""Command line entry point: ``bnpl simulate|fit|diagnose|summarize``.

Data files go to ``--out`` (or ``BNPL_OUTPUT_DIR``); logs go to stderr so the
artifacts stay byte-identical for a fixed ``--seed``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from bnpl import __version__
from bnpl.client import RankingClient, simulate
from bnpl.config import OutputSettings, RunConfig, SimulationConfig
from bnpl.data_io import (
    ingest_csv,
    load_run_config,
    read_chain_jsonl,
    write_chain_jsonl,
    write_json,
    write_manifest,
    write_rankings_csv,
    write_summary_csv,
)
from bnpl.errors import (
    EX_USAGE,
    BnplError,
    DiagnosticFailure,
    exit_code_for_error,
)
from bnpl.models import GammaProcessParams
from bnpl.oracle import SUITES, run_suite

logger = logging.getLogger(__name__)

STATIC_EPOCH_LABEL = "all"
DEFAULT_DIAGNOSE_SEED = 20240117


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _output_dir(flag: str | None) -> Path:
    out = Path(flag) if flag else OutputSettings().output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---- Subcommands ------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    params = GammaProcessParams(alpha=args.alpha, tau=args.tau)
    config = SimulationConfig(
        epochs=args.epochs,
        list_length=args.list_len,
        phi=args.phi,
        xi=args.xi,
    )
    rng = np.random.default_rng(args.seed)
    dataset, truth = simulate(args.model, config, params, rng)
    out = _output_dir(args.out)
    files = [
        write_rankings_csv(dataset, out / "data.csv"),
        write_json(truth, out / "truth.json"),
    ]
    write_manifest(files, out)
    logger.info("wrote %d epochs to %s", dataset.n_epochs, out)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    config = load_run_config(args.config) if args.config else RunConfig()
    overrides = {
        key: value
        for key, value in [
            ("model", args.model),
            ("seed", args.seed),
            ("chains", args.chains),
            ("iterations", args.iterations),
            ("burn_in", args.burn_in),
        ]
        if value is not None
    }
    if overrides:
        config = RunConfig.model_validate(config.model_dump() | overrides)

    dataset = ingest_csv(args.data, time_unit_days=config.time_unit_days)
    with RankingClient(config) as client:
        chains = client.fit(dataset)

    labels = (
        [STATIC_EPOCH_LABEL] if config.model == "static" else list(dataset.epoch_labels)
    )
    out = _output_dir(args.out)
    seeds = [config.seed] * len(chains)
    files = [
        write_chain_jsonl(chains, out / config.chain_file, labels, seeds),
        write_summary_csv(chains, out / config.summary_file, labels),
    ]
    write_manifest(files, out)
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    report = run_suite(args.suite, np.random.default_rng(args.seed), quick=args.quick)
    report = report.model_copy(update={"seed": args.seed})
    text = report.model_dump_json(indent=2)
    print(text)
    if args.out:
        out = _output_dir(args.out)
        (out / f"diagnose-{args.suite}.json").write_text(text + "\n", encoding="utf-8")
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        failed += [
            f"{g.model}:{s.name}"
            for g in report.geweke
            for s in g.statistics
            if not s.passed
        ]
        raise DiagnosticFailure(
            f"suite {args.suite} failed: {', '.join(failed)}",
            error_code="diagnostic_failed",
        )
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    chains, labels = read_chain_jsonl(args.chain)
    out = _output_dir(args.out)
    files = [write_summary_csv(chains, out / "summary.csv", labels)]
    write_manifest(files, out)
    return 0


# ---- Parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnpl",
        description="Nonparametric Plackett-Luce models for top-m ranking lists",
    )
    parser.add_argument("--version", action="version", version=f"bnpl {__version__}")
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress, -vv for per-sweep debug output",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Draw a synthetic dataset and its truth")
    p.add_argument("--model", choices=["static", "dynamic"], default="dynamic")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tau", type=float, default=1.0)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--phi", type=float, default=1.0)
    group.add_argument("--xi", type=float, default=None)
    p.add_argument(
        "--epochs",
        type=int,
        default=10,
        help="Epochs (dynamic) or number of lists (static)",
    )
    p.add_argument("--list-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("fit", help="Run Gibbs chains on a ranking CSV")
    p.add_argument("--model", choices=["static", "dynamic"], default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="RunConfig JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("diagnose", help="Run an oracle suite")
    p.add_argument("--suite", choices=list(SUITES), required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_DIAGNOSE_SEED)
    p.add_argument("--quick", action="store_true", help="Smaller Monte Carlo sizes")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_diagnose)

    p = sub.add_parser("summarize", help="Re-derive summaries from a chain file")
    p.add_argument("--chain", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_summarize)
    return parser


def cli(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else EX_USAGE
    _configure_logging(args.verbose)
    try:
        return int(args.handler(args))
    except (BnplError, ValidationError, OSError) as e:
        print(f"bnpl: error: {e}", file=sys.stderr)
        logger.debug("command failed", exc_info=True)
        return exit_code_for_error(e)


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
