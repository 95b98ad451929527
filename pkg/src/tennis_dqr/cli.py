"""Command-line entry point: ingest, fit, contour, plot, validate.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .design import CovariateProfile, encode_design, response_matrix, standardize
from .engine import (PRESETS, compare_profiles, contourset_from_dict, contourset_to_dict,
                     dumps, fit_all_directions, load_modelfit, save_modelfit, write_chains)
from .ingest import (DEFAULT_CUTOFF, DEFAULT_START, FilterConfig, IngestError,
                     fingerprint_observations, ingest, read_observations, write_observations)
from .sampler import SamplerConfig

log = logging.getLogger("tennis_dqr")

# config-file keys and their types; flags given on the command line win
FIT_KEYS = {
    "tau": float, "directions": int, "burn_in": int, "iters": int, "thin": int,
    "prior_var": float, "sigma_shape": float, "sigma_scale": float, "seed": int, "jobs": int,
}
FIT_DEFAULTS = {
    "tau": 0.25, "directions": 180, "burn_in": 10_000, "iters": 100_000, "thin": 100,
    "prior_var": 100.0, "sigma_shape": 0.01, "sigma_scale": 0.01, "seed": 0, "jobs": 1,
}


class UsageError(Exception):
    pass


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out: Path, command: str, settings: dict, inputs: list[Path]) -> Path:
    """Sidecar record of how an artifact was made. Kept out of the artifact so
    that the artifact bytes depend only on inputs, settings and seed."""
    m = {
        "command": command,
        "settings": settings,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "output": {str(out): file_sha256(out)},
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "tool_version": __version__,
    }
    path = manifest_path(out)
    path.write_text(dumps(m), encoding="utf-8")
    return path


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def read_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    out = {}
    for key, raw in cp["run"].items():
        key = key.replace("-", "_")
        if key not in FIT_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            out[key] = FIT_KEYS[key](raw)
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    return out


# --- commands ----------------------------------------------------------------

def cmd_ingest(args) -> int:
    out = Path(args.out)
    config = FilterConfig(start=args.start_date, cutoff=args.cutoff_date)
    result = ingest(args.csv_dir, config, pattern=args.pattern)
    write_observations(result.observations, out)
    report_path = Path(args.report) if args.report else out.with_name(out.stem + ".report.json")
    report = dict(result.report, observation_fingerprint=fingerprint_observations(result.observations),
                  manifest=manifest_path(out).name)
    report_path.write_text(dumps(report), encoding="utf-8")
    inputs = [Path(args.csv_dir) / f for f in result.report["input_files"]]
    write_manifest(out, "ingest", {"start_date": config.start.isoformat(),
                                   "cutoff_date": config.cutoff.isoformat(),
                                   "pattern": args.pattern}, inputs)
    excluded = sum(result.report["excluded"].values())
    print(f"rows parsed: {result.report['rows_parsed']} (malformed: {result.report['rows_malformed']})")
    print(f"matches retained: {result.report['rows_retained']}, excluded: {excluded}")
    for step, count in result.report["excluded"].items():
        print(f"  excluded [{step}]: {count}")
    print(f"observations: {len(result.observations)}")
    if "loss_paradox_rate" in result.report:
        print(f"loss paradox rate (big three): {result.report['loss_paradox_rate']:.4f}")
    if "tour_loss_paradox_rate" in result.report:
        print(f"loss paradox rate (tour): {result.report['tour_loss_paradox_rate']:.4f}")
    return 0


def _fit_settings(args) -> dict:
    settings = dict(FIT_DEFAULTS)
    if args.config:
        settings.update(read_config(args.config))
    for key in FIT_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def cmd_fit(args) -> int:
    settings = _fit_settings(args)
    obs_path = Path(args.observations)
    obs = read_observations(obs_path)
    if not obs:
        raise UsageError("observation table is empty")
    try:
        cfg = SamplerConfig(burn_in=settings["burn_in"], total_iters=settings["iters"],
                            thin=settings["thin"], prior_var=settings["prior_var"],
                            sigma_prior=(settings["sigma_shape"], settings["sigma_scale"]),
                            seed=settings["seed"])
        if not 0 < settings["tau"] < 1:
            raise ValueError("tau must lie in (0, 1)")
        if settings["directions"] < 3:
            raise ValueError("need at least 3 directions")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    design = encode_design(obs)
    Z, scaling = standardize(response_matrix(obs))

    def progress(done, total):
        log.info("direction %d/%d done", done, total)

    fit = fit_all_directions(Z, design.X, settings["tau"], cfg, settings["directions"],
                             scaling=scaling, column_names=design.column_names,
                             data_fingerprint=fingerprint_observations(obs),
                             jobs=settings["jobs"], progress=progress)
    out = Path(args.out)
    save_modelfit(fit, out, extra={"n_observations": len(obs), "manifest": manifest_path(out).name})
    if args.dump_chains:
        write_chains(fit, args.dump_chains)
    write_manifest(out, "fit", settings, [obs_path])
    print(f"fitted {len(fit.fits)} directions at tau={fit.tau} on {len(obs)} observations -> {out}")
    return 0


_BOOL = {"yes": True, "true": True, "1": True, "no": False, "false": False, "0": False}


def parse_profile(text: str) -> tuple[str, CovariateProfile]:
    """``name:player=Nadal,surface=Clay``; unspecified fields stay at reference."""
    name, colon, body = text.partition(":")
    if not colon:
        name, body = text, text
    fields = {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        key, eq, value = part.partition("=")
        key = key.strip()
        if not eq:
            raise UsageError(f"malformed profile field {part!r} (expected key=value)")
        if key in ("win", "top20"):
            if value.strip().lower() not in _BOOL:
                raise UsageError(f"{key} must be yes/no, got {value!r}")
            fields[key] = _BOOL[value.strip().lower()]
        elif key in ("player", "surface", "tournament"):
            fields[key] = value.strip()
        else:
            raise UsageError(f"unknown profile field {key!r}")
    try:
        return name.strip(), CovariateProfile(**fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_contour(args) -> int:
    if not args.preset and not args.profile:
        raise UsageError("give --preset or at least one --profile")
    profiles = list(PRESETS[args.preset]) if args.preset else []
    profiles += [parse_profile(p) for p in args.profile or []]
    fit_path = Path(args.fit)
    fit = load_modelfit(fit_path)
    family = args.preset if args.preset and not args.profile else "custom"
    cs = compare_profiles(fit, profiles, family=family)
    out = Path(args.out)
    doc = contourset_to_dict(cs)
    doc["manifest"] = manifest_path(out).name
    doc["fit_fingerprint"] = fit.fingerprint()
    out.write_text(dumps(doc), encoding="utf-8")
    write_manifest(out, "contour", {"preset": args.preset, "profiles": args.profile or []}, [fit_path])
    empty = [e.name for e in cs.profiles if e.standardized.is_empty]
    print(f"{len(cs.profiles)} profiles -> {out}")
    for name in empty:
        print(f"warning: empty region for {name}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import render_contours, write_vertex_table

    src = Path(args.contours)
    cs = contourset_from_dict(json.loads(src.read_text(encoding="utf-8")))
    out = Path(args.out)
    render_contours(cs, out, standardized=args.standardized)
    table = out.with_suffix(".csv")
    write_vertex_table(cs, table)
    write_manifest(out, "plot", {"standardized": args.standardized}, [src])
    print(f"wrote {out} and {table}")
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation

    results = run_validation(args.scale)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tennis-dqr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="build the observation table from match CSVs")
    s.add_argument("csv_dir")
    s.add_argument("-o", "--out", required=True, help="observation table (.csv or .json)")
    s.add_argument("--report", help="exclusion report path (default: <out>.report.json)")
    s.add_argument("--start-date", type=_date, default=DEFAULT_START)
    s.add_argument("--cutoff-date", type=_date, default=DEFAULT_CUTOFF)
    s.add_argument("--pattern", default="atp_matches_[0-9][0-9][0-9][0-9].csv",
                   help="glob for match files inside csv_dir")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("fit", help="fit every direction and write the model fit JSON")
    s.add_argument("observations")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--config", help="key = value file; command-line flags override it")
    s.add_argument("--tau", type=float)
    s.add_argument("--directions", type=int)
    s.add_argument("--burn-in", dest="burn_in", type=int)
    s.add_argument("--iters", type=int, help="iterations kept after burn-in, before thinning")
    s.add_argument("--thin", type=int)
    s.add_argument("--prior-var", dest="prior_var", type=float)
    s.add_argument("--sigma-shape", dest="sigma_shape", type=float)
    s.add_argument("--sigma-scale", dest="sigma_scale", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--dump-chains", metavar="DIR", help="write retained draws per direction as CSV")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("contour", help="quantile regions for covariate profiles")
    s.add_argument("fit")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--profile", action="append",
                   help="name:player=Nadal,win=yes,surface=Clay,tournament=GrandSlam,top20=no")
    s.set_defaults(func=cmd_contour)

    s = sub.add_parser("plot", help="render a contour set to SVG (+ CSV of vertices)")
    s.add_argument("contours")
    s.add_argument("-o", "--out", required=True, help="output .svg")
    s.add_argument("--standardized", action="store_true", help="plot in standardized units")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("validate", help="run the oracle self-checks")
    s.add_argument("--scale", choices=["tiny", "default"], default="default")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (IngestError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
