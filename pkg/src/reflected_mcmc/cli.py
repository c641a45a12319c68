"""Command line entry point: ``reflected-mcmc <command> [options]``.

Exit codes: 0 success, 1 configuration / input error, 2 asserted invariant failed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, preset_names
from .experiments import (
    TuningError,
    autocorr,
    dataset_for,
    model_for,
    spectral_verify,
    sweep_acceptance,
)
from .io import (
    ACCEPTANCE_COLUMNS,
    ACF_COLUMNS,
    SUMMARY_COLUMNS,
    Provenance,
    SchemaError,
    read_csv,
    write_chain,
    write_csv,
    write_dataset,
)
from .svgplot import SCHEMAS, plot_csv

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 1, 2


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="flat key = value config file")
    parser.add_argument("--preset", default=default, help="bundled preset name (see --list-presets)")
    parser.add_argument("--seed", type=int, default=default, help="master seed (overrides config)")
    parser.add_argument("--out", default=default, help="output directory (overrides config)")
    parser.add_argument("--workers", type=int, default=default, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflected-mcmc", description="Reflected random walk MCMC experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--list-presets", action="store_true", help="print bundled presets and exit")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")
    for name, help_text in (
        ("generate-data", "draw a truth from the prior and write noisy observations"),
        ("sweep-acceptance", "acceptance rate for every (algorithm, K, epsilon)"),
        ("autocorr", "tuned production chains with ACF and IAT"),
        ("spectral-verify", "finite-chain spectral suites and gap tables"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p, suppress=True)
    p = sub.add_parser("plot", help="render a CSV output as SVG")
    _common(p, suppress=True)
    p.add_argument("csv", help="acceptance.csv or acf.csv")
    p.add_argument("--kind", choices=sorted(SCHEMAS), help="plot kind (inferred from the columns if omitted)")
    p.add_argument("--svg", help="output SVG path (default: next to the CSV, or in --out)")
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(
        args.config, preset=args.preset, master_seed=args.seed, output_dir=args.out, workers=args.workers
    )


def _prov(cfg: ExperimentConfig) -> Provenance:
    return Provenance(cfg.config_hash, cfg.master_seed)


def _write_run_config(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.cfg").write_text(_prov(cfg).header() + "\n" + cfg.canonical(), encoding="utf-8")


def cmd_generate_data(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    data = dataset_for(cfg)
    csv_path, json_path = write_dataset(out, data, model_for(cfg, cfg.data_K).obs.locations, _prov(cfg))
    _write_run_config(cfg, out)
    print(f"wrote {csv_path} ({len(data.y)} observations) and {json_path}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    rows = sweep_acceptance(cfg)
    path = write_csv(out / "acceptance.csv", _prov(cfg), ACCEPTANCE_COLUMNS, [r.as_tuple() for r in rows])
    plot_csv(path, "acceptance", out / "acceptance.svg")
    _write_run_config(cfg, out)
    for r in rows:
        print(f"{r.algorithm:6s} K={r.K:<4d} eps={r.epsilon:<8g} accept={r.accept_rate:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_autocorr(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    res = autocorr(cfg)
    prov = _prov(cfg)
    acf_path = write_csv(out / "acf.csv", prov, ACF_COLUMNS, res.acf_rows)
    write_csv(
        out / "summary.csv", prov, SUMMARY_COLUMNS,
        [(s.algorithm, s.K, s.epsilon, s.functional_id, s.accept_rate, s.iat, s.ess, s.seed) for s in res.summary],
    )
    write_csv(
        out / "tuning.csv", prov, ("algorithm", "K", "epsilon", "accept_rate", "selected"),
        [(t.algorithm, t.K, t.epsilon, t.accept_rate, t.selected) for t in res.tuning],
    )
    if res.acf_rows:
        plot_csv(acf_path, "acf", out / "acf.svg")
    if cfg.save_chains:
        for (alg, K), chain in res.chains.items():
            write_chain(out / "chains" / f"{alg}_K{K}.csv", chain, prov)
    _write_run_config(cfg, out)
    for s in res.summary:
        eps = "-" if s.epsilon is None else f"{s.epsilon:g}"
        print(f"{s.algorithm:6s} K={s.K:<4d} eps={eps:<8s} {s.functional_id:7s} "
              f"accept={s.accept_rate:.4f} iat={s.iat:.4g} ess={s.ess:.4g}")
    print(f"wrote {acf_path}")
    return EXIT_OK


def cmd_spectral(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    rep = spectral_verify(cfg)
    prov = _prov(cfg)
    for suite in rep.suites:
        write_csv(out / f"{suite.name}.csv", prov, suite.columns, suite.rows)
    cx_dir = out / "counterexamples"
    for name, text in sorted(rep.counterexamples.items()):
        cx_dir.mkdir(parents=True, exist_ok=True)
        (cx_dir / f"{name}.txt").write_text(text, encoding="utf-8")
    lines = rep.lines()
    bound = next(s for s in rep.suites if s.name == "posterior_gap_bound")
    lines.append("posterior gap lower bound (log10), with and without the factor 1/8:")
    for K, eps, _, g, b8, b in bound.rows:
        lines.append(f"  K={K} eps={eps:g} gap_prop={g:.6g} log10_bound={b8:.6g} log10_bound_without_8={b:.6g}")
    lines.append(f"asserted failures: {rep.asserted_failures}")
    (out / "spectral_report.txt").write_text(prov.header() + "\n" + "\n".join(lines) + "\n", encoding="utf-8")
    _write_run_config(cfg, out)
    print("\n".join(lines))
    return EXIT_ASSERT if rep.asserted_failures else EXIT_OK


def _infer_kind(csv_path: str) -> str:
    _, columns, _ = read_csv(csv_path)
    for kind, cols in SCHEMAS.items():
        if all(c in columns for c in cols):
            return kind
    raise SchemaError(f"{csv_path}: columns {columns} match no plot schema")


def cmd_plot(args: argparse.Namespace) -> int:
    kind = args.kind or _infer_kind(args.csv)
    if args.svg:
        svg = Path(args.svg)
    elif args.out:
        svg = Path(args.out) / (Path(args.csv).stem + ".svg")
    else:
        svg = Path(args.csv).with_suffix(".svg")
    path = plot_csv(args.csv, kind, svg)
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "generate-data": cmd_generate_data,
    "sweep-acceptance": cmd_sweep,
    "autocorr": cmd_autocorr,
    "spectral-verify": cmd_spectral,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        if args.command == "plot":
            return cmd_plot(args)
        return COMMANDS[args.command](_config(args))
    except (ConfigError, TuningError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
