"""Command line entry point: ``fockconc deficit | verify | sweep``.

Exit codes: 0 success, 1 usage / IO / validation error or failed suite,
2 concentration inequality violated beyond the error bar.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import concentration as C
from . import highdim as H
from . import stability as S
from . import suites
from . import transforms as Tr
from .fock import load as load_fock

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _json_value(v, indent: int) -> str:
    pad = "  " * indent
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_json_value(x, indent + 1)}' for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        items = [f"{pad}  {_json_value(x, indent + 1)}" for x in v]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if v is None:
        return "null"
    return json.dumps(str(v))


def dump_json(obj) -> str:
    """JSON with insertion-ordered keys and every float at 17 significant digits."""
    return _json_value(obj, 0) + "\n"


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text)
    return p


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

CONFIG_KEYS = ("fock", "mask", "signal", "region", "grid", "degree", "seed", "workers", "out", "only", "tol", "scale")


def _parse_grid(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"--grid expects n=<int>,R=<float>, got {text!r}")
        k, v = (x.strip() for x in part.split("=", 1))
        try:
            if k == "n":
                out["n"] = int(v)
            elif k == "R":
                out["R"] = float(v)
            else:
                raise UsageError(f"unknown grid key {k!r}")
        except ValueError as exc:
            raise UsageError(f"bad grid value {part!r}") from exc
    return out


def _parse_tol(items) -> dict:
    out = {}
    for it in items or []:
        for part in str(it).split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise UsageError(f"--tol expects name=<float>, got {part!r}")
            k, v = (x.strip() for x in part.split("=", 1))
            try:
                val = float(v)
            except ValueError as exc:
                raise UsageError(f"bad tolerance {part!r}") from exc
            if not val > 0:
                raise UsageError(f"tolerance {k} must be positive")
            out[k] = val
    return out


def _read_config(path) -> dict:
    text = Path(path).read_text()
    cp = configparser.ConfigParser()
    cp.read_string("[run]\n" + text)
    out = {}
    for sect in cp.sections():
        for k, v in cp.items(sect):
            k = k.replace("-", "_")
            if k not in CONFIG_KEYS:
                raise UsageError(f"unknown config key {k!r}")
            out[k] = v
    return out


def resolve(args) -> argparse.Namespace:
    """Merge config file, environment and flags (flags win)."""
    cfg = _read_config(args.config) if getattr(args, "config", None) else {}
    for k, v in cfg.items():
        if getattr(args, k, None) in (None, []):
            if k == "tol":
                v = [v]
            setattr(args, k, v)
    if args.seed is None:
        env = os.environ.get("FOCKCONC_SEED")
        args.seed = env if env not in (None, "") else 0
    try:
        args.seed = int(args.seed)
    except ValueError as exc:
        raise UsageError(f"seed must be an integer, got {args.seed!r}") from exc
    if args.seed < 0 or args.seed >= 2 ** 64:
        raise UsageError("seed must fit in an unsigned 64-bit integer")
    args.workers = int(args.workers) if args.workers else (os.cpu_count() or 1)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    args.grid = _parse_grid(args.grid) if isinstance(args.grid, str) else (args.grid or {})
    args.tol = _parse_tol(args.tol)
    args.out = Path(args.out or ".")
    if args.degree is not None:
        args.degree = int(args.degree)
        if args.degree < 0:
            raise UsageError("--degree must be >= 0")
    return args


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _load_function(args):
    if args.fock and args.signal:
        raise UsageError("give either --fock or --signal, not both")
    if args.fock:
        return load_fock(args.fock)
    if args.signal:
        sig = Tr.read_signal_csv(args.signal)
        e = Tr.hermite_expand(sig, args.degree if args.degree is not None else Tr.DEFAULT_MODES)
        return Tr.bargmann(e)
    raise UsageError("deficit needs --fock or --signal")


def cmd_deficit(args) -> int:
    F = _load_function(args)
    if F.dim >= 2:
        if not args.region:
            raise UsageError("functions on C^d with d >= 2 need --region")
        reg = H.load_region(args.region)
        mc = H.MCSpec(int(args.samples), seed=args.seed, streams=args.streams, workers=args.workers)
        rep = H.deficit_d(F, reg, mc)
        d = rep.to_dict()
        d["region"] = reg.to_dict()
        p = _write(args.out, "deficit.json", dump_json(d))
        print(p.read_text(), end="")
        return EXIT_VIOLATION if rep.deficit < -3 * rep.stderr else EXIT_OK
    if not args.mask:
        raise UsageError("deficit needs --mask")
    mask = C.load_mask(args.mask)
    if args.grid:
        want = C.GridSpec(args.grid.get("R", mask.spec.R), args.grid.get("n", mask.spec.n), mask.spec.center)
        if want != mask.spec:
            raise UsageError(f"--grid {want} does not match the mask grid {mask.spec}")
    rep = C.deficit(F, mask)
    p = _write(args.out, "deficit.json", dump_json(rep.to_dict()))
    print(p.read_text(), end="")
    if rep.violation:
        print(f"concentration inequality violated: deficit {rep.deficit:.3e} < -{rep.quad_err:.3e}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _flipped_v(k, s):
    return -S.v_coefficient(k, s)


FAULTS = {"vk-sign": ("vfunc", _flipped_v)}


def cmd_verify(args) -> int:
    ctx = suites.Context(seed=args.seed, scale=float(args.scale), workers=args.workers, tol=args.tol)
    for f in args.inject_fault or []:
        if f not in FAULTS:
            raise UsageError(f"unknown fault {f!r}; choose from {', '.join(FAULTS)}")
        attr, val = FAULTS[f]
        setattr(ctx, attr, val)
    only = [s.strip() for s in args.only.split(",")] if args.only else None
    for o in only or []:
        if o not in suites.SUITES:
            raise UsageError(f"unknown suite {o!r}; choose from {', '.join(suites.SUITES)}")

    def progress(suite, r):
        mark = "PASS" if r.passed else "FAIL"
        print(f"[{mark}] {suite}.{r.name}: {r.prop} (value {r.value:.6g}, {r.seconds:.1f}s)", file=sys.stderr)
        if not r.passed and r.detail:
            print(f"       {r.detail}", file=sys.stderr)

    t0 = time.perf_counter()
    res = suites.run_suites(ctx, only, progress)
    summary = {
        "seed": args.seed,
        "scale": float(args.scale),
        "passed": all(r.passed for rs in res.values() for r in rs),
        "suites": {k: [r.to_dict() for r in v] for k, v in res.items()},
    }
    _write(args.out, "verify.json", dump_json(summary))
    n_fail = sum(not r.passed for rs in res.values() for r in rs)
    n_all = sum(len(rs) for rs in res.values())
    print(f"{n_all - n_fail}/{n_all} checks passed in {time.perf_counter() - t0:.1f}s")
    for k, rs in res.items():
        for r in rs:
            if not r.passed:
                print(f"FAILED {k}.{r.name}: {r.prop}")
    return EXIT_OK if n_fail == 0 else EXIT_USAGE


def _float_list(text: str, name: str):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name} expects comma-separated numbers") from exc
    if not vals:
        raise UsageError(f"--{name} is empty")
    return vals


def cmd_sweep(args) -> int:
    if args.kind == "sharpness":
        eps = _float_list(args.eps, "eps")
        res = S.sharpness_sweep(float(args.s), eps, workers=args.workers)
        p = _write(args.out, f"sharpness_s{args.s}.csv", _csv_text(res.csv_rows()))
        print(f"limit {res.limit:.10g} (target {res.target:.10g}), slope {res.slope:.6g} -> {p}")
        return EXIT_OK
    areas = _float_list(args.areas, "areas")
    eps = float(args.eps_fixed)
    n = args.grid.get("n", 512)
    rows = [("area", "deficit", "distance", "ratio", "asymmetry", "asymmetry_ratio")]
    F = S.perturbed_gaussian(eps).normalized()
    R = args.grid.get("R", C.default_radius(2, max(areas)))
    spec = C.GridSpec(R, n)
    grid = C.sample_density(F, spec)

    def row(a):
        r = math.sqrt(a / math.pi)
        m = C.ellipse_mask(spec, 0j, 1.2 * r, r / 1.2)
        rep = S.stability_report(F, m, grid)
        return tuple(
            format(v, ".17g") for v in (m.measure, rep.deficit, math.sqrt(rep.distance_sq), rep.ratio, rep.asymmetry, rep.asymmetry_ratio)
        )

    if args.workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(args.workers) as ex:
            rows += list(ex.map(row, areas))
    else:
        rows += [row(a) for a in areas]
    p = _write(args.out, "area_scan.csv", _csv_text(rows))
    print(f"{len(rows) - 1} rows -> {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI-style key=value file; flags take precedence")
    p.add_argument("--fock", help="function in 'fock v1' text format")
    p.add_argument("--mask", help="region in 'mask v1' text format")
    p.add_argument("--signal", help="signal samples as t,re,im CSV")
    p.add_argument("--region", help="ball/product region JSON for d >= 2")
    p.add_argument("--grid", help="n=<int>,R=<float>")
    p.add_argument("--degree", help="truncation degree / Hermite modes")
    p.add_argument("--seed", help="u64 seed (default: $FOCKCONC_SEED or 0)")
    p.add_argument("--workers", help="worker threads (default: CPU count)")
    p.add_argument("--out", help="output directory (default: .)")
    p.add_argument("--only", help="comma-separated suites to run")
    p.add_argument("--tol", action="append", help="tolerance override name=<float> (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fockconc", description="Concentration and stability computations in Fock space.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deficit", help="deficit of a function on a region")
    _common(p)
    p.add_argument("--samples", default=1_000_000, type=int, help="Monte Carlo samples for d >= 2")
    p.add_argument("--streams", default=8, type=int, help="independent random streams for d >= 2")
    p.set_defaults(func=cmd_deficit)

    p = sub.add_parser("verify", help="run the property suites")
    _common(p)
    p.add_argument("--scale", default=None, help="ensemble size multiplier (default 1)")
    p.add_argument("--inject-fault", action="append", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="sharpness sweeps and area scans")
    _common(p)
    p.add_argument("kind", choices=("sharpness", "area"))
    p.add_argument("--s", default="1.0", help="measure of the level sets (sharpness)")
    p.add_argument("--eps", default="0.05,0.035,0.025,0.0175", help="comma-separated eps values (sharpness)")
    p.add_argument("--areas", default="0.5,1,2,3", help="comma-separated areas (area scan)")
    p.add_argument("--eps-fixed", default="0.05", help="perturbation size for the area scan")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        args = resolve(args)
        if args.command == "verify":
            args.scale = float(args.scale) if args.scale is not None else 1.0
            if not args.scale > 0:
                raise UsageError("--scale must be positive")
        return args.func(args)
    except (UsageError, ValueError, OSError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
