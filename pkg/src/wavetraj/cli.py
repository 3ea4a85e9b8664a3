"""``wavetraj`` command line: run scenarios, verify accuracy targets, list, plot.

Exit codes: 0 success, 1 simulation error, 2 usage or configuration error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, outputs, verify
from .errors import ConfigParse, WavetrajError
from .scenarios import build_scenario, list_scenarios, run_scenario

log = logging.getLogger("wavetraj")

EXIT_OK, EXIT_SIM, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_config_text(text, source="<config>"):
    """``key = value`` lines; ``#`` starts a comment; keys may be dotted."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or any(c.isspace() for c in key):
            raise ConfigParse(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        out[key] = value
    return out


def read_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def parse_sets(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigParse(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def collect_overrides(args):
    """defaults < config file < flags < --set."""
    merged = {}
    if args.config:
        merged.update(read_config(args.config))
    if args.paper_scale:
        merged["paper_scale"] = "true"
    if args.strict_eq29:
        merged["strict_projection"] = "true"
    if args.eikonal:
        merged["eikonal_mode"] = "true"
    if args.workers is not None:
        merged["workers"] = str(args.workers)
    merged.update(parse_sets(args.set))
    return merged


def _summary(cfg, result, error=None):
    s = {"scenario": cfg.name if cfg else None, "error": error}
    if result is None:
        return s
    lg, setup = result.log, result.setup
    s.update({
        "epsilon": setup.epsilon,
        "n_rays": lg.n_rays,
        "dt": lg.dt,
        "steps": int(lg.steps[-1]),
        "t_final": float(lg.t[-1]),
        "termination": lg.termination,
        "events": lg.events,
        "oracles": result.checks,
        "max_H_drift": float(np.max(lg.H_drift)),
        "max_H_drift_interior": float(np.max(lg.H_drift[:, 2:-2])) if lg.n_rays > 4 else None,
        "max_flux_deviation": float(np.max(lg.flux_dev)),
        "flags_seen": sorted({int(f) for f in np.unique(lg.flags)}),
    })
    return s


def _write_error_summary(out, cfg, exc):
    if out is None:
        return
    err = {"code": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    try:
        outputs.atomic_write(Path(out) / "summary.json", outputs.to_json(_summary(cfg, None, err)))
    except WavetrajError as io_exc:
        log.error("%s", io_exc)


def cmd_run(args):
    out = Path(args.out) if args.out else Path("runs") / args.scenario
    cfg = None
    try:
        overrides = collect_overrides(args)
        overrides.pop("scenario", None)
        cfg = build_scenario(args.scenario, overrides)
    except WavetrajError as exc:
        log.error("%s: %s", exc.code, exc)
        _write_error_summary(out if args.out else None, cfg, exc)
        return exc.exit_code
    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg)
    except WavetrajError as exc:
        log.error("%s: %s", exc.code, exc)
        _write_error_summary(out, cfg, exc)
        return EXIT_SIM
    wall = time.perf_counter() - t0
    digests = {}
    try:
        digests["trajectories.csv"] = outputs.atomic_write(out / "trajectories.csv",
                                                           outputs.trajectories_csv(result.log))
        digests["metrics.csv"] = outputs.atomic_write(out / "metrics.csv",
                                                      outputs.metrics_csv(result.metrics))
        digests["summary.json"] = outputs.atomic_write(out / "summary.json",
                                                       outputs.to_json(_summary(cfg, result)))
        if args.plot:
            data = outputs.read_trajectories_csv(out / "trajectories.csv")
            digests["trajectories.svg"] = outputs.atomic_write(out / "trajectories.svg",
                                                               outputs.trajectories_svg(data))
            digests["intensity.svg"] = outputs.atomic_write(out / "intensity.svg",
                                                            outputs.intensity_svg(data))
        manifest = {
            "scenario": cfg.name,
            "overrides": overrides,
            "config": cfg.resolved(),
            "units": result.setup.units.as_dict(),
            "code_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "wall_seconds": wall,
            "events": result.log.events,
            "termination": result.log.termination,
            "outputs": digests,
        }
        outputs.atomic_write(out / "manifest.json", outputs.to_json(manifest))
    except WavetrajError as exc:
        log.error("%s: %s", exc.code, exc)
        return exc.exit_code
    print(f"{cfg.name}: {result.log.termination} after {int(result.log.steps[-1])} steps "
          f"(t = {result.log.t[-1]:.6g}, {wall:.1f} s) -> {out}")
    return EXIT_OK


def cmd_verify(args):
    try:
        overrides = collect_overrides(args)
        workers = int(overrides.pop("workers", 1))
        selection = args.checks or None
        if selection:
            verify.resolve(selection)
        # fail fast on bad overrides before any long run
        build_scenario("free_gaussian", overrides)
    except KeyError as exc:
        log.error("%s", exc.args[0] if exc.args else exc)
        return EXIT_USAGE
    except (WavetrajError, ValueError) as exc:
        log.error("%s", exc)
        return getattr(exc, "exit_code", EXIT_USAGE)
    try:
        results = verify.run_checks(selection, include_slow=args.paper_scale, workers=workers,
                                    overrides=overrides, echo=print)
    except WavetrajError as exc:
        log.error("%s: %s", exc.code, exc)
        return EXIT_SIM
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    if args.out:
        report = [{"number": r.number, "name": r.name, "passed": r.passed, "summary": r.summary,
                   "measured": r.measured, "seconds": r.seconds} for r in results]
        try:
            outputs.atomic_write(Path(args.out) / "verify.json", outputs.to_json(report))
        except WavetrajError as exc:
            log.error("%s", exc)
            return exc.exit_code
    return EXIT_OK if n_pass == len(results) else EXIT_VERIFY


def cmd_list(args):
    for name, text in list_scenarios():
        print(f"{name:<18} {text}")
    return EXIT_OK


def cmd_plot(args):
    csv_path = Path(args.csv)
    out = Path(args.out) if args.out else csv_path.with_suffix(".svg")
    try:
        data = outputs.read_trajectories_csv(csv_path)
        outputs.atomic_write(out, outputs.trajectories_svg(data))
    except WavetrajError as exc:
        log.error("%s: %s", exc.code, exc)
        return exc.exit_code
    print(out)
    return EXIT_OK


def _add_common(p):
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--config", metavar="FILE", help="key = value configuration file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override one setting (repeatable; wins over --config)")
    p.add_argument("--paper-scale", action="store_true",
                   help="use the 1e-4 wavelength-to-waist ratio (verify: include the slow check)")
    p.add_argument("--strict-eq29", action="store_true",
                   help="use the literal (px/pz)^2 projection factor")
    p.add_argument("--eikonal", action="store_true", help="drop the Wave Potential (W = 0)")
    p.add_argument("--workers", type=int, metavar="N", help="threads for the ray update")


def build_parser():
    parser = _Parser(prog="wavetraj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wavetraj {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one scenario and write its artefacts")
    p.add_argument("scenario")
    _add_common(p)
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the accuracy checks")
    p.add_argument("checks", nargs="*", help="names or numbers of checks (default: all fast ones)")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("list", help="list the registered scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("plot", help="render a trajectories.csv as SVG")
    p.add_argument("csv")
    p.add_argument("--out", metavar="SVG")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
