"""Command-line interface.

Every subcommand reads its settings from three layers: built-in defaults, an
optional ``--config`` JSON file, and explicit flags (flags win). The resolved
settings are written next to the outputs as ``<stem>.config.json`` so a run
can be replayed exactly.

Exit codes: 0 success, 1 unexpected library error, 2 usage, 3 I/O,
4 file format, 5 precondition, 6 registration diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import fileio, harness, metrics, plotting, synthetic
from .errors import ScanGapError
from .harness import ScanSet
from .metrics import MetricSpec
from .perturb import PERTURBATION_KINDS, PerturbationSpec

log = logging.getLogger("scangap")

OUTPUT_ENV = "SCANGAP_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(ScanGapError):
    exit_code = EXIT_USAGE


# -- defaults ------------------------------------------------------------------

COMMON = {"seed": 0, "jobs": None, "out": None}

DEFAULTS: dict[str, dict[str, Any]] = {
    "compare": {"metric": "chamfer", "format": None, "output": None},
    "two-step": {"threshold": 0.9, "format": None},
    "perturb": {"kind": None, "output": None, "format": None, "std": None, "count": None, "n_clusters": None,
                "max_points": 1000, "max_radius": 1.0, "max_center_dist": 20.0, "fraction": None,
                "cell": None, "rotation": None, "translation": None, "scale": None, "shear": None},
    "sweep": {"manifest": None, "modifier": "noise", "levels": None, "range": None, "axis": None,
              "param": None, "metric": ["all"], "stem": "sweep"},
    "accuracy": {"manifest": None, "kind": "identity", "modifiers": None, "std": None, "count": None,
                 "n_clusters": None, "max_points": 1000, "max_radius": 1.0, "max_center_dist": 20.0,
                 "fraction": None, "cell": None, "rotation": None, "translation": None, "scale": None,
                 "shear": None, "metric": ["all"], "stem": "accuracy"},
    "selftest": {"manifest": None, "metric": ["all"], "noise_levels": [0.05, 0.2, 0.5], "time_budget": 2.0,
                 "stem": "selftest"},
    "bench": {"metric": ["all"], "sizes": [1000, 10000], "repetitions": 3, "timeout": 120.0, "stem": "timing"},
    "pairwise": {"real": None, "sim": None, "metric": ["all"], "stem": "pairwise"},
    "plot": {"kind": None, "output": None},
    "synth": {"scans": 10, "spacing": 6.0, "channels": 32, "columns": 720, "format": "ply_binary"},
    "transfer-intensity": {"radius": 1.0, "output": None, "format": None},
    "serve": {"host": "127.0.0.1", "port": 8000},
}

METRIC_KEYS = {
    "alpha": ("alpha", float),
    "n": ("n", int),
    "voxel_cell": ("voxel_cell", float),
    "bins": ("bins", int),
    "order": ("minkowski_order", float),
    "voxel_size": ("voxel_size", float),
    "cell_size": ("cell_size", float),
    "vds": ("pre_downsample", float),
    "seed": ("seed", int),
    "cap": ("emd_cap", int),
    "max_iterations": ("max_iterations", int),
    "tol": ("convergence_tol", float),
    "max_dist": ("max_correspondence_dist", float),
}


def parse_metric(text: str) -> MetricSpec:
    """``kind[:key=value,...]``, for example ``dcd:alpha=10`` or ``histogram:n=1000``.

    Keys: alpha, n (random sampling size), voxel_cell (voxel sampling cell),
    bins, order, voxel_size, cell_size, vds (pre-downsample cell), seed, cap,
    max_iterations, tol, max_dist.
    """
    kind, _, rest = text.partition(":")
    params: dict[str, Any] = {}
    for item in filter(None, rest.split(",")):
        key, eq, raw = item.partition("=")
        if not eq or key not in METRIC_KEYS:
            raise UsageError(f"bad metric parameter {item!r} in {text!r}; known keys: {', '.join(METRIC_KEYS)}")
        name, conv = METRIC_KEYS[key]
        try:
            params[name] = conv(raw)
        except ValueError:
            raise UsageError(f"metric parameter {key} needs a number, got {raw!r}") from None
    if "n" in params and "voxel_cell" in params:
        raise UsageError("choose either n (random sampling) or voxel_cell (voxel sampling)")
    if "n" in params:
        params["sampling"] = {"random": {"n": params.pop("n")}}
    elif "voxel_cell" in params:
        params["sampling"] = {"voxel": {"cell": params.pop("voxel_cell")}}
    return MetricSpec.from_dict({"metric": kind, "params": params})


def resolve_metrics(items) -> list[MetricSpec]:
    if isinstance(items, (str, dict)):
        items = [items]
    out: list[MetricSpec] = []
    for it in items:
        if it == "all":
            out.extend(harness.default_metrics())
        elif isinstance(it, dict):
            out.append(MetricSpec.from_dict(it))
        else:
            out.append(parse_metric(str(it)))
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    return [int(v) for v in _float_list(text)]


def _key_value(text: str) -> tuple[str, Any]:
    key, eq, raw = text.partition("=")
    if not eq:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


# -- parser --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed=True, out=True, jobs=True) -> None:
    p.add_argument("--config", help="JSON file of settings; explicit flags override it")
    if seed:
        p.add_argument("--seed", type=int, help="master seed (default 0)")
    if out:
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./scangap-out)")
    if jobs:
        p.add_argument("--jobs", type=int, help="worker threads (default: available CPUs)")
    p.add_argument("--json", action="store_true", help="print machine-readable JSON instead of a table")
    p.add_argument("-v", "--verbose", action="store_true")


def _metric_flags(p: argparse.ArgumentParser, multiple: bool) -> None:
    if multiple:
        p.add_argument("--metric", action="append",
                       help="metric as kind[:key=value,...]; repeatable; 'all' for the default line-up")
    else:
        p.add_argument("--metric", help="metric as kind[:key=value,...] (default chamfer)")
        p.add_argument("--alpha", type=float, help="DCD sensitivity")
        p.add_argument("--n", type=int, help="histogram: random sampling size")
        p.add_argument("--voxel-cell", type=float, help="histogram: voxel sampling cell")
        p.add_argument("--bins", type=int, help="histogram bin count")
        p.add_argument("--order", type=float, help="histogram Minkowski order")
        p.add_argument("--voxel-size", type=float, help="voxel IoU cell")
        p.add_argument("--cell-size", type=float, help="BEV raster cell")
        p.add_argument("--vds", type=float, help="voxel pre-downsampling cell for chamfer/dcd")
        p.add_argument("--cap", type=int, help="EMD point cap")
        p.add_argument("--max-iterations", type=int, help="ICP iteration limit")
        p.add_argument("--tol", type=float, help="ICP convergence tolerance")
        p.add_argument("--max-dist", type=float, help="ICP inlier distance")


def _perturb_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=PERTURBATION_KINDS)
    p.add_argument("--std", type=float, help="noise: Gaussian std (m)")
    p.add_argument("--count", type=int, help="random_outliers: points to add")
    p.add_argument("--n-clusters", type=int, help="clustered_outliers: cluster count")
    p.add_argument("--max-points", type=int, help="clustered_outliers: max points per cluster")
    p.add_argument("--max-radius", type=float, help="clustered_outliers: max cluster radius")
    p.add_argument("--max-center-dist", type=float, help="clustered_outliers: max center distance from centroid")
    p.add_argument("--fraction", type=float, help="downsample_random: kept fraction")
    p.add_argument("--cell", type=float, help="downsample_voxel: voxel edge")
    p.add_argument("--rotation", type=float, nargs=3, metavar=("RX", "RY", "RZ"), help="transform: radians")
    p.add_argument("--translation", type=float, nargs=3, metavar=("TX", "TY", "TZ"), help="transform: meters")
    p.add_argument("--scale", type=float, help="transform: uniform scale")
    p.add_argument("--shear", type=_key_value, action="append", metavar="AXIS=V", help="transform: e.g. xy=0.1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scangap", description="Quantify geometric gaps between LiDAR scans.")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        return sub.add_parser(name, help=help_, argument_default=S)

    p = add("compare", "score two clouds with one metric (JSON on stdout)")
    p.add_argument("a")
    p.add_argument("b")
    _metric_flags(p, multiple=False)
    p.add_argument("--format", choices=fileio.FORMATS, help="input format (default: from extension)")
    p.add_argument("--output", help="also write the result JSON here")
    p.add_argument("--server", help="evaluate on a running scangap service at this URL")
    _common(p, jobs=False)

    p = add("two-step", "DCD screen followed by chamfer grading")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--threshold", type=float)
    p.add_argument("--format", choices=fileio.FORMATS)
    p.add_argument("--server")
    _common(p, seed=False, out=False, jobs=False)

    p = add("perturb", "apply a seeded modifier and write the result")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="output file (default: <out>/<stem>.<kind><ext>)")
    _perturb_flags(p)
    p.add_argument("--format", choices=fileio.FORMATS, help="output format (default: same as input)")
    p.add_argument("--server")
    _common(p, jobs=False)

    p = add("sweep", "sensitivity sweep of metrics over modifier levels")
    p.add_argument("--manifest")
    p.add_argument("--modifier", choices=PERTURBATION_KINDS)
    p.add_argument("--levels", type=_float_list, help="comma-separated levels")
    p.add_argument("--range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"),
                   help="COUNT evenly spaced levels from START to STOP")
    p.add_argument("--axis", help="transform sweeps: translation_x, rotation_z, scale, shear_xy, ...")
    p.add_argument("--param", type=_key_value, action="append", metavar="KEY=V", help="fixed modifier parameter")
    _metric_flags(p, multiple=True)
    p.add_argument("--stem")
    _common(p)

    p = add("accuracy", "pair-identification accuracy under a modifier")
    p.add_argument("--manifest")
    _perturb_flags(p)
    _metric_flags(p, multiple=True)
    p.add_argument("--stem")
    _common(p)

    p = add("selftest", "check the metric conditions on a scan set")
    p.add_argument("--manifest")
    _metric_flags(p, multiple=True)
    p.add_argument("--noise-levels", type=_float_list)
    p.add_argument("--time-budget", type=float, help="efficiency budget per call (s)")
    p.add_argument("--stem")
    _common(p, jobs=False)

    p = add("bench", "wall-time benchmark on synthetic clouds")
    _metric_flags(p, multiple=True)
    p.add_argument("--sizes", type=_int_list, help="comma-separated point counts")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--timeout", type=float, help="per-call timeout (s)")
    p.add_argument("--stem")
    _common(p, jobs=False)

    p = add("pairwise", "score simulated scans against real scans with the same file stem")
    p.add_argument("--real")
    p.add_argument("--sim")
    _metric_flags(p, multiple=True)
    p.add_argument("--stem")
    _common(p, seed=False)

    p = add("plot", "render a report as SVG")
    p.add_argument("report")
    p.add_argument("--kind", choices=plotting.PLOT_KINDS)
    p.add_argument("-o", "--output", help="SVG path (default: next to the report)")
    _common(p, seed=False, out=False, jobs=False)

    p = add("synth", "generate a seeded synthetic street scan set and manifest")
    p.add_argument("--scans", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--channels", type=int)
    p.add_argument("--columns", type=int)
    p.add_argument("--format", choices=fileio.FORMATS)
    _common(p, jobs=False)

    p = add("transfer-intensity", "copy real intensity onto simulated geometry")
    p.add_argument("sim")
    p.add_argument("real")
    p.add_argument("--radius", type=float)
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=fileio.FORMATS)
    _common(p, seed=False, jobs=False)

    p = add("serve", "run the HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# -- config layering -------------------------------------------------------------

RUNTIME_KEYS = {"command", "config", "json", "verbose", "server"}


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """defaults < config file < flags."""
    cmd = args.command
    base = {**COMMON, **DEFAULTS[cmd]}
    flags = {k: v for k, v in vars(args).items() if k not in RUNTIME_KEYS}
    file_cfg: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        allowed = set(base) | METRIC_FLAG_KEYS | POSITIONALS.get(cmd, set())
        unknown = sorted(set(file_cfg) - allowed)
        if unknown:
            raise UsageError(f"unknown setting(s) for {cmd} in {args.config}: {', '.join(unknown)}")
    cfg = {**base, **file_cfg, **flags}
    if "jobs" in cfg and cfg["jobs"] is None:
        cfg["jobs"] = os.cpu_count() or 1
    if "out" in cfg and cfg["out"] is None:
        cfg["out"] = os.environ.get(OUTPUT_ENV, "scangap-out")
    return cfg


# snapshots record positionals (and perturb's derived spec); accepted on replay, flags still win
POSITIONALS = {"compare": {"a", "b"}, "two-step": {"a", "b"}, "perturb": {"input", "spec"}, "plot": {"report"},
               "transfer-intensity": {"sim", "real"}}

METRIC_FLAG_KEYS = {"alpha", "n", "voxel_cell", "bins", "order", "voxel_size", "cell_size", "vds", "cap",
                    "max_iterations", "tol", "max_dist"}


def _single_metric(cfg: dict) -> MetricSpec:
    metric = cfg["metric"]
    if isinstance(metric, dict):
        base = MetricSpec.from_dict(metric)
        text = None
    else:
        text = str(metric)
    extras = [f"{k}={cfg[k]}" for k in sorted(METRIC_FLAG_KEYS) if cfg.get(k) is not None]
    if text is None:
        if extras:
            raise UsageError("metric flags cannot be combined with a metric object from the config file")
        return base
    if extras:
        text += ("," if ":" in text else ":") + ",".join(extras)
    if cfg.get("seed") and "seed=" not in text:
        text += ("," if ":" in text else ":") + f"seed={cfg['seed']}"
    return parse_metric(text)


def _perturbation(cfg: dict, seed: int) -> PerturbationSpec:
    kind = cfg.get("kind")
    if kind is None:
        raise UsageError("--kind is required")
    p: dict[str, Any] = {}
    simple = {"std": "std", "count": "count", "n_clusters": "n_clusters", "fraction": "fraction", "cell": "cell"}
    for key, name in simple.items():
        if cfg.get(key) is not None:
            p[name] = cfg[key]
    if kind == "clustered_outliers":
        p.update(max_points_per_cluster=cfg["max_points"], max_radius=cfg["max_radius"],
                 max_center_dist=cfg["max_center_dist"])
    if kind == "transform":
        for key in ("rotation", "translation", "scale"):
            if cfg.get(key) is not None:
                p[key] = cfg[key]
        if cfg.get("shear"):
            shear = cfg["shear"]
            p["shear"] = dict(shear) if isinstance(shear, list) else shear
        if not p:
            raise UsageError("transform needs at least one of --rotation, --translation, --scale, --shear")
    return PerturbationSpec(kind, p, seed)


def _snapshot(path: Path, command: str, cfg: dict) -> Path:
    doc = {"command": command, "settings": _jsonable(cfg)}
    with fileio.atomic_write(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _emit(doc: Any) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in header]] + [["" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))
                                            for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _load_scans(cfg: dict) -> ScanSet:
    if not cfg.get("manifest"):
        raise UsageError("--manifest is required")
    return harness.load_manifest(cfg["manifest"])


def _write_report(report, cfg: dict, command: str, args) -> dict:
    outdir = Path(cfg["out"])
    jpath, cpath = report.write(outdir, cfg["stem"])
    snap = _snapshot(outdir / f"{cfg['stem']}.config.json", command, cfg)
    return {"json": str(jpath), "csv": str(cpath), "config": str(snap)}


# -- commands --------------------------------------------------------------------


def cmd_compare(cfg: dict, args) -> int:
    spec = _single_metric(cfg)
    a, b = fileio.load(cfg["a"], cfg["format"]), fileio.load(cfg["b"], cfg["format"])
    if getattr(args, "server", None):
        from .service.client import ServiceClient

        doc = ServiceClient(args.server).compare(a, b, spec.to_dict())
    else:
        doc = metrics.evaluate(spec, a, b).to_dict()
    if cfg.get("output"):
        out = Path(cfg["output"])
        with fileio.atomic_write(out, "w") as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _snapshot(out.with_name(out.stem + ".config.json"), "compare", cfg)
    _emit(doc)
    return EXIT_OK


def cmd_two_step(cfg: dict, args) -> int:
    a, b = fileio.load(cfg["a"], cfg["format"]), fileio.load(cfg["b"], cfg["format"])
    if getattr(args, "server", None):
        from .service.client import ServiceClient

        doc = ServiceClient(args.server).two_step(a, b, cfg["threshold"])
    else:
        doc = metrics.two_step_compare(a, b, cfg["threshold"]).to_dict()
    _emit(doc)
    return EXIT_OK


_EXT = {"ply_ascii": ".ply", "ply_binary": ".ply", "kitti_bin": ".bin"}


def cmd_perturb(cfg: dict, args) -> int:
    src = Path(cfg["input"])
    in_fmt = fileio.guess_format(src)
    cloud = fileio.load(src)
    spec = _perturbation(cfg, cfg["seed"])
    fmt = cfg["format"] or in_fmt
    out = Path(cfg["output"]) if cfg.get("output") else Path(cfg["out"]) / f"{src.stem}.{spec.kind}{_EXT[fmt]}"
    if getattr(args, "server", None):
        from .service.client import ServiceClient

        result = ServiceClient(args.server).perturb(cloud, spec.to_dict())
    else:
        result = spec.apply(cloud)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.save(result, out, fmt)
    snap = _snapshot(out.with_name(out.name + ".config.json"), "perturb", {**cfg, "spec": spec.to_dict()})
    doc = {"input": str(src), "output": str(out), "format": fmt, "points_in": len(cloud),
           "points_out": len(result), "spec": spec.to_dict(), "config": str(snap)}
    if args.json:
        _emit(doc)
    else:
        sys.stdout.write(f"{src} ({len(cloud)} points) -> {out} ({len(result)} points, {fmt})\n")
    return EXIT_OK


def _levels(cfg: dict) -> list[float]:
    if cfg.get("levels") is not None and cfg.get("range") is not None:
        raise UsageError("give either --levels or --range, not both")
    if cfg.get("levels") is not None:
        return [float(v) for v in cfg["levels"]]
    if cfg.get("range") is not None:
        start, stop, count = cfg["range"]
        if int(count) != count or count < 2:
            raise UsageError("--range COUNT must be an integer >= 2")
        # round away float noise so 0..2 in 11 steps gives 0.2, 0.4, ...
        return [round(float(v), 12) for v in np.linspace(start, stop, int(count))]
    raise UsageError("--levels or --range is required")


def cmd_sweep(cfg: dict, args) -> int:
    scans = _load_scans(cfg)
    levels = _levels(cfg)
    base = dict(cfg.get("param") or {})
    if cfg.get("axis"):
        base["axis"] = cfg["axis"]
    report = harness.sensitivity_sweep(scans, cfg["modifier"], levels, resolve_metrics(cfg["metric"]),
                                       seed=cfg["seed"], base_params=base, jobs=cfg["jobs"])
    paths = _write_report(report, cfg, "sweep", args)
    rho, crho = report.spearman_rho(), report.curve_spearman_rho()
    if args.json:
        _emit({**paths, "spearman_rho": rho, "curve_spearman_rho": crho})
    else:
        rows = []
        for m in report.metrics:
            curve = report.curve(m)
            errs = sum(1 for c in report.cells if c.metric == m and c.error)
            rows.append((m, curve[0], curve[-1], rho[m], crho[m], errs))
        sys.stdout.write(_table(("metric", f"mean@{levels[0]:g}", f"mean@{levels[-1]:g}", "rho", "curve_rho",
                                 "errors"), rows))
        sys.stdout.write(f"report: {paths['json']}\n")
    return EXIT_OK


def cmd_accuracy(cfg: dict, args) -> int:
    scans = _load_scans(cfg)
    specs = resolve_metrics(cfg["metric"])
    if cfg.get("modifiers"):
        modifiers = [PerturbationSpec.from_dict(m) for m in cfg["modifiers"]]
    else:
        modifiers = [_perturbation(cfg, 0)]
    report = None
    for mod in modifiers:
        part = harness.accuracy_eval(scans, mod, specs, seed=cfg["seed"], jobs=cfg["jobs"])
        report = part if report is None else report.merged(part)
    paths = _write_report(report, cfg, "accuracy", args)
    if args.json:
        _emit({**paths, "accuracy": report.to_dict()["accuracy"]})
    else:
        rows = [(e.modifier, e.metric, e.accuracy, e.hits, e.total, e.errors) for e in report.entries]
        sys.stdout.write(_table(("modifier", "metric", "accuracy", "hits", "scans", "errors"), rows))
        sys.stdout.write(f"report: {paths['json']}\n")
    return EXIT_OK


def cmd_selftest(cfg: dict, args) -> int:
    scans = _load_scans(cfg)
    report = harness.condition_selftest(resolve_metrics(cfg["metric"]), scans, seed=cfg["seed"],
                                        noise_levels=cfg["noise_levels"], time_budget_s=cfg["time_budget"])
    paths = _write_report(report, cfg, "selftest", args)
    if args.json:
        _emit({**paths, "matrix": report.matrix})
    else:
        header, rows = report.csv_rows()
        sys.stdout.write(_table(header, rows))
        sys.stdout.write(f"report: {paths['json']}\n")
    return EXIT_OK


def cmd_bench(cfg: dict, args) -> int:
    report = harness.timing_bench(resolve_metrics(cfg["metric"]), cfg["sizes"], cfg["repetitions"],
                                  seed=cfg["seed"], timeout_s=cfg["timeout"])
    paths = _write_report(report, cfg, "bench", args)
    if args.json:
        _emit({**paths, "entries": report.to_dict()["entries"]})
    else:
        rows = [(e.size, e.metric, e.mean_s, e.std_s, e.status) for e in report.entries]
        sys.stdout.write(_table(("size", "metric", "mean_s", "std_s", "status"), rows))
        sys.stdout.write(f"report: {paths['json']}\n")
    return EXIT_OK


def cmd_pairwise(cfg: dict, args) -> int:
    if not cfg.get("real") or not cfg.get("sim"):
        raise UsageError("--real and --sim are required")
    report = harness.pairwise_compare(cfg["real"], cfg["sim"], resolve_metrics(cfg["metric"]), jobs=cfg["jobs"])
    paths = _write_report(report, cfg, "pairwise", args)
    summary = report.summary()
    if args.json:
        _emit({**paths, "summary": summary, "missing": report.missing})
    else:
        rows = [(m, s["mean"], s["std"], s["n"]) for m, s in summary.items()]
        sys.stdout.write(_table(("metric", "mean", "std", "pairs"), rows))
        for k, ids in report.missing.items():
            if ids:
                sys.stdout.write(f"{k}: {', '.join(ids)}\n")
        sys.stdout.write(f"report: {paths['json']}\n")
    return EXIT_OK


_DEFAULT_PLOT = {"sweep": "sensitivity_curves", "accuracy": "accuracy_heatmap", "timing": "timing_bars",
                 "pairwise": "distribution_hist"}


def cmd_plot(cfg: dict, args) -> int:
    report_path = Path(cfg["report"])
    kind = cfg.get("kind")
    if kind is None:
        doc = harness.report_from_json(report_path)
        if doc.kind not in _DEFAULT_PLOT:
            raise UsageError(f"no plot for {doc.kind} reports; pass --kind")
        kind = _DEFAULT_PLOT[doc.kind]
    out = Path(cfg["output"]) if cfg.get("output") else report_path.with_name(f"{report_path.stem}.{kind}.svg")
    plotting.plot(report_path, kind, out)
    if args.json:
        _emit({"svg": str(out), "kind": kind})
    else:
        sys.stdout.write(f"wrote {out}\n")
    return EXIT_OK


def cmd_synth(cfg: dict, args) -> int:
    scanner = synthetic.Scanner(channels=cfg["channels"], columns=cfg["columns"])
    clouds = synthetic.scan_sequence(cfg["scans"], seed=cfg["seed"], spacing=cfg["spacing"], scanner=scanner)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for c in clouds:
        name = f"{c.frame_id}{_EXT[cfg['format']]}"
        fileio.save(c, outdir / name, cfg["format"])
        entries.append({"id": c.frame_id, "path": name, "format": cfg["format"], "pose": c.pose.to_dict()})
    harness.write_manifest(outdir / "manifest.json", entries)
    _snapshot(outdir / "synth.config.json", "synth", cfg)
    doc = {"manifest": str(outdir / "manifest.json"), "scans": len(clouds), "points": [len(c) for c in clouds]}
    if args.json:
        _emit(doc)
    else:
        sys.stdout.write(f"wrote {len(clouds)} scans and {doc['manifest']}\n")
    return EXIT_OK


def cmd_transfer(cfg: dict, args) -> int:
    sim, real = fileio.load(cfg["sim"]), fileio.load(cfg["real"])
    result, frac = metrics.transfer_intensity(sim, real, cfg["radius"])
    fmt = cfg["format"] or fileio.guess_format(cfg["sim"])
    src = Path(cfg["sim"])
    out = Path(cfg["output"]) if cfg.get("output") else Path(cfg["out"]) / f"{src.stem}.intensity{_EXT[fmt]}"
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.save(result, out, fmt)
    _snapshot(out.with_name(out.name + ".config.json"), "transfer-intensity", cfg)
    doc = {"output": str(out), "matched_fraction": frac}
    if args.json:
        _emit(doc)
    else:
        sys.stdout.write(f"wrote {out}; {frac:.1%} of points matched a real point\n")
    return EXIT_OK


def cmd_serve(cfg: dict, args) -> int:
    import uvicorn

    uvicorn.run("scangap.service.app:app", host=cfg["host"], port=cfg["port"])
    return EXIT_OK


COMMANDS = {
    "compare": cmd_compare,
    "two-step": cmd_two_step,
    "perturb": cmd_perturb,
    "sweep": cmd_sweep,
    "accuracy": cmd_accuracy,
    "selftest": cmd_selftest,
    "bench": cmd_bench,
    "pairwise": cmd_pairwise,
    "plot": cmd_plot,
    "synth": cmd_synth,
    "transfer-intensity": cmd_transfer,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.json = getattr(args, "json", False)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except ScanGapError as exc:
        print(f"scangap: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"scangap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
