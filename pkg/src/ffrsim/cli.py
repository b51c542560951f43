"""ffrsim command line: ``ffrsim run|batch|version``.

Exit codes:
    0   success
    10  config file missing
    11  config is not valid JSON
    12  unknown config key
    13  config value out of range / invalid
    20  simulation aborted (collapse, non-finite state, failed batch cell)
    30  output could not be written
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__, output, plots
from ._kernels import BACKEND
from .config import EXIT_OUT_OF_RANGE, ConfigError, default_document, parse_config
from .errors import ConfigurationError, FfrsimError, SimulationError, SystemCollapseError
from .scenario import CASES, STRATEGIES, compare_strategies, run_scenario

EXIT_OK = 0
EXIT_SIM_ABORT = 20
EXIT_IO = 30

STRATEGY_FLAGS = {
    "adaptive": "adaptive",
    "bess": "bess_dominant",
    "dc": "dc_dominant",
    "ev": "ev_dominant",
    "custom": "custom",
}


def default_out_dir() -> str:
    return os.environ.get("FFRSIM_OUT") or "ffrsim_out"


def _err(msg: str) -> None:
    print(f"ffrsim: {msg}", file=sys.stderr)


def load_document(args):
    doc = parse_config(args.config) if args.config else default_document()
    return doc.with_overrides(dt=args.dt, duration=args.duration)


def summary_line(case_id: int, strategy: str, m) -> str:
    rec = "not-recovered" if m.recovery_time_s is None else f"{m.recovery_time_s:.3f}s"
    p = m.max_power_mw
    return (f"case={case_id} strategy={strategy} nadir={m.nadir_hz:.4f}Hz "
            f"rocof={m.rocof_hz_per_s:.4f}Hz/s recovery={rec} "
            f"pmax_ev={p['ev']:.2f}MW pmax_dc={p['dc']:.2f}MW pmax_bess={p['bess']:.2f}MW "
            f"energy={m.ffr_energy_mwh:.4f}MWh")


def cell_dirname(strategy: str, case_id: int) -> str:
    return f"{strategy}_case{case_id}"


def _inputs(doc, **extra) -> dict:
    d = {"config": doc.data}
    d.update(extra)
    return d


def cmd_run(args) -> int:
    try:
        doc = load_document(args)
        kind = STRATEGY_FLAGS[args.strategy]
        scenario = doc.scenario(args.case, kind)
    except ConfigError as exc:
        _err(str(exc))
        return exc.exit_code
    except ConfigurationError as exc:
        _err(f"invalid configuration: {exc}")
        return EXIT_OUT_OF_RANGE

    try:
        result = run_scenario(scenario)
    except (SystemCollapseError, SimulationError) as exc:
        _err(f"simulation aborted: {exc}")
        return EXIT_SIM_ABORT

    out = Path(args.out or default_out_dir())
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = output.write_run(out, result)
        if args.no_plots:
            _err("plots skipped (--no-plots)")
        else:
            files.append(plots.write_run_plot(out / "run.svg", result))
        output.write_manifest(out, config_sha256=doc.sha256, config_source=doc.source, version=__version__,
                              inputs=_inputs(doc, case=args.case, strategy=kind), files=files)
    except OSError as exc:
        _err(f"cannot write output in {out}: {exc}")
        return EXIT_IO

    print(summary_line(args.case, kind, result.metrics))
    return EXIT_OK


def cmd_batch(args) -> int:
    try:
        doc = load_document(args)
        base = doc.base_scenario()
    except ConfigError as exc:
        _err(str(exc))
        return exc.exit_code
    except ConfigurationError as exc:
        _err(f"invalid configuration: {exc}")
        return EXIT_OUT_OF_RANGE

    t0 = time.perf_counter()
    comparison = compare_strategies(base, jobs=max(1, args.jobs))
    elapsed = time.perf_counter() - t0

    out = Path(args.out or default_out_dir())
    rows = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for kind in STRATEGIES:
            for case_id in CASES:
                res = comparison.results.get((kind, case_id))
                if res is None:
                    continue
                cell = out / cell_dirname(kind, case_id)
                cell_files = output.write_run(cell, res)
                output.write_manifest(cell, config_sha256=doc.sha256, config_source=doc.source,
                                      version=__version__,
                                      inputs=_inputs(doc, case=case_id, strategy=kind), files=cell_files)
                rows.append(output.summary_row(kind, case_id, res.metrics))
        files.append(output.atomic_write(out / output.SUMMARY, output.summary_text(rows)))
        if args.no_plots:
            _err("plots skipped (--no-plots)")
        elif comparison.results:
            files.extend(plots.render_plots(comparison.results, out))
        output.write_manifest(out, config_sha256=doc.sha256, config_source=doc.source, version=__version__,
                              inputs=_inputs(doc, jobs=args.jobs), files=files)
    except OSError as exc:
        _err(f"cannot write output in {out}: {exc}")
        return EXIT_IO

    print(f"batch: {len(comparison.results)}/{len(STRATEGIES) * len(CASES)} cells in {elapsed:.2f}s; "
          f"adaptive dominates case 4: {'yes' if comparison.adaptive_dominates else 'no'}")
    if comparison.errors:
        for (kind, case_id), exc in sorted(comparison.errors.items()):
            _err(f"cell {cell_dirname(kind, case_id)} failed: {type(exc).__name__}: {exc}")
        return EXIT_SIM_ABORT
    return EXIT_OK


def cmd_version(args) -> int:
    info = {"version": __version__, "backend": BACKEND}
    print(json.dumps(info) if args.json else f"ffrsim {__version__} (backend: {BACKEND})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffrsim", description="Coordinated fast frequency response simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON scenario config (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory (default: $FFRSIM_OUT or ./ffrsim_out)")
        p.add_argument("--dt", type=float, help="integration step (s)")
        p.add_argument("--duration", type=float, help="simulated time (s)")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")

    run = sub.add_parser("run", help="simulate one case")
    common(run)
    run.add_argument("--case", type=int, choices=CASES, default=4)
    run.add_argument("--strategy", choices=tuple(STRATEGY_FLAGS), default="adaptive")
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run the strategy x case matrix")
    common(batch)
    batch.add_argument("--jobs", type=int, default=1, help="worker threads")
    batch.set_defaults(func=cmd_batch)

    ver = sub.add_parser("version", help="print version and kernel backend")
    ver.add_argument("--json", action="store_true")
    ver.set_defaults(func=cmd_version)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FfrsimError as exc:
        _err(f"simulation aborted: {exc}")
        return EXIT_SIM_ABORT


if __name__ == "__main__":
    sys.exit(main())
