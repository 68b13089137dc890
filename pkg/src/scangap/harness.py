"""Metric evaluation protocol: sensitivity sweeps, pair identification accuracy,
condition self-tests, timing benchmarks and real-vs-simulated pairwise tables.

Every stochastic cell gets its own seed derived from the master seed, so any
cell can be replayed alone, and results are aggregated in a fixed order so
reports do not depend on how many worker threads ran them.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import fileio, rng
from .errors import FormatError, PreconditionError, ScanGapError
from .metrics import DISTANCE, SIMILARITY, MetricSpec, RandomSampling, evaluate
from .perturb import PerturbationSpec, add_noise, scaled
from .pointcloud import Odometry, PointCloud
from .synthetic import uniform_cloud

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9


# -- scan sets -----------------------------------------------------------------


@dataclass(frozen=True)
class Scan:
    id: str
    cloud: PointCloud
    pose: Optional[Odometry] = None


@dataclass(frozen=True)
class ScanSet:
    scans: tuple[Scan, ...]

    def __post_init__(self):
        ids = [s.id for s in self.scans]
        if len(set(ids)) != len(ids):
            raise PreconditionError("scan ids must be unique")

    def __len__(self) -> int:
        return len(self.scans)

    def __iter__(self):
        return iter(self.scans)

    @classmethod
    def from_clouds(cls, clouds: Sequence[PointCloud], prefix: str = "scan") -> "ScanSet":
        return cls(tuple(Scan(c.frame_id or f"{prefix}{i:03d}", c, c.pose) for i, c in enumerate(clouds)))


def load_manifest(path) -> ScanSet:
    """Read a JSON manifest: ``{"scans": [{"id", "path", "format"?, "pose"?}, ...]}`` or a bare list.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    entries = doc["scans"] if isinstance(doc, dict) else doc
    scans = []
    for e in entries:
        p = Path(e["path"])
        if not p.is_absolute():
            p = path.parent / p
        cloud = fileio.load(p, e.get("format"))
        pose = Odometry.from_dict(e["pose"]) if e.get("pose") else cloud.pose
        scans.append(Scan(str(e["id"]), cloud, pose))
    return ScanSet(tuple(scans))


def write_manifest(path, entries: Sequence[dict]) -> None:
    with fileio.atomic_write(path, "w") as fh:
        json.dump({"scans": list(entries)}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- helpers -------------------------------------------------------------------


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties.

    Defined as 0 when either sequence is constant (no monotone association).
    """
    if len(x) != len(y) or len(x) < 2:
        raise PreconditionError("spearman needs two equal-length sequences of at least 2 values")
    rx, ry = rankdata(x), rankdata(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    den = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if den == 0.0:
        return 0.0
    return float((dx * dy).sum()) / den


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _safe_eval(spec: MetricSpec, a: PointCloud, b: PointCloud) -> tuple[Optional[float], Optional[str], float]:
    try:
        res = evaluate(spec, a, b)
    except ScanGapError as exc:
        return None, f"{type(exc).__name__}: {exc}", 0.0
    return res.value, None, res.wall_time


def _std(values: list[float]) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


def _dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _dump_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


class _Report:
    kind = "report"

    def to_dict(self) -> dict:
        raise NotImplementedError

    def csv_rows(self) -> tuple[Sequence[str], list[Sequence]]:
        raise NotImplementedError

    def to_json(self) -> str:
        return _dump_json({"report": self.kind, **self.to_dict()})

    def to_csv(self) -> str:
        header, rows = self.csv_rows()
        return _dump_csv(header, rows)

    def write(self, outdir, stem: Optional[str] = None) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        jpath, cpath = outdir / f"{stem}.json", outdir / f"{stem}.csv"
        with fileio.atomic_write(jpath, "w") as fh:
            fh.write(self.to_json())
        with fileio.atomic_write(cpath, "w") as fh:
            fh.write(self.to_csv())
        return jpath, cpath


# -- sensitivity sweep -----------------------------------------------------------


@dataclass
class SweepCell:
    scan_id: str
    level_index: int
    level: float
    metric: str
    value: Optional[float]
    error: Optional[str] = None


@dataclass
class SweepReport(_Report):
    modifier: str
    levels: list[float]
    metrics: list[str]
    orientations: dict[str, str]
    cells: list[SweepCell]
    seed: int
    modifier_params: dict = field(default_factory=dict)
    kind = "sweep"

    def summary(self) -> list[dict]:
        rows = []
        for m in self.metrics:
            for li, level in enumerate(self.levels):
                vals = [c.value for c in self.cells if c.metric == m and c.level_index == li and c.error is None]
                errs = sum(1 for c in self.cells if c.metric == m and c.level_index == li and c.error is not None)
                rows.append({
                    "metric": m,
                    "level": level,
                    "mean": statistics.fmean(vals) if vals else None,
                    "std": _std(vals) if vals else None,
                    "n": len(vals),
                    "errors": errs,
                })
        return rows

    def curve(self, metric: str) -> list[Optional[float]]:
        return [r["mean"] for r in self.summary() if r["metric"] == metric]

    def spearman_rho(self) -> dict[str, Optional[float]]:
        """Rank correlation between level and value over every successful (scan, level) cell."""
        out = {}
        for m in self.metrics:
            pairs = [(c.level, c.value) for c in self.cells if c.metric == m and c.error is None]
            out[m] = spearman(*zip(*pairs)) if len(pairs) >= 2 else None
        return out

    def curve_spearman_rho(self) -> dict[str, Optional[float]]:
        """Rank correlation between level and the per-level mean (the plotted curve)."""
        out = {}
        for m in self.metrics:
            pairs = [(lv, v) for lv, v in zip(self.levels, self.curve(m)) if v is not None]
            out[m] = spearman(*zip(*pairs)) if len(pairs) >= 2 else None
        return out

    def to_dict(self) -> dict:
        return {
            "modifier": self.modifier,
            "modifier_params": self.modifier_params,
            "levels": self.levels,
            "seed": self.seed,
            "metrics": self.metrics,
            "orientations": self.orientations,
            "summary": self.summary(),
            "spearman_rho": self.spearman_rho(),
            "curve_spearman_rho": self.curve_spearman_rho(),
            "cells": [c.__dict__ for c in self.cells],
        }

    def summary_csv(self) -> str:
        """One row per (metric, level): the aggregated curve."""
        header = ("metric", "level", "mean", "std", "n", "errors")
        return _dump_csv(header, [tuple(r[k] for k in header) for r in self.summary()])

    def write(self, outdir, stem: Optional[str] = None) -> tuple[Path, Path]:
        jpath, cpath = super().write(outdir, stem)
        with fileio.atomic_write(cpath.with_name(cpath.stem + ".summary.csv"), "w") as fh:
            fh.write(self.summary_csv())
        return jpath, cpath

    def csv_rows(self):
        header = ("modifier", "scan_id", "level_index", "level", "metric", "value", "error")
        rows = [(self.modifier, c.scan_id, c.level_index, c.level, c.metric, c.value, c.error) for c in self.cells]
        return header, rows


def cell_seed(master: int, scan_id: str, level_index: int, kind: str) -> int:
    return rng.derive_seed(master, scan_id, level_index, kind)


def sensitivity_sweep(
    scans: ScanSet,
    modifier: str,
    levels: Sequence[float],
    metrics: Sequence[MetricSpec],
    seed: int = 0,
    base_params: Optional[dict] = None,
    jobs: int = 1,
) -> SweepReport:
    """Perturb every scan at every level and score it against its original with every metric.

    Metrics are evaluated as ``f(original, perturbed)``. Failures are kept as
    error cells; they never abort the sweep.
    """
    if len(scans) == 0:
        raise PreconditionError("sweep needs at least one scan")
    levels = [float(v) for v in levels]
    if len(levels) < 2:
        raise PreconditionError("sweep needs at least 2 levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise PreconditionError("sweep levels must be strictly increasing")
    labels = _unique_labels(metrics)

    tasks = [(scan, li, lv) for scan in scans for li, lv in enumerate(levels)]

    def run(task):
        scan, li, lv = task
        spec = scaled(modifier, lv, base_params).with_seed(cell_seed(seed, scan.id, li, modifier))
        try:
            perturbed = spec.apply(scan.cloud)
        except ScanGapError as exc:
            msg = f"{type(exc).__name__}: {exc}"
            return [SweepCell(scan.id, li, lv, lab, None, msg) for lab in labels]
        out = []
        for lab, m in zip(labels, metrics):
            value, err, _ = _safe_eval(m, scan.cloud, perturbed)
            out.append(SweepCell(scan.id, li, lv, lab, value, err))
        return out

    cells = [c for chunk in _map(run, tasks, jobs) for c in chunk]
    return SweepReport(
        modifier=modifier,
        levels=levels,
        metrics=labels,
        orientations={lab: m.orientation for lab, m in zip(labels, metrics)},
        cells=cells,
        seed=seed,
        modifier_params=dict(base_params or {}),
    )


def _unique_labels(metrics: Sequence[MetricSpec]) -> list[str]:
    labels = [m.label for m in metrics]
    if len(set(labels)) != len(labels):
        raise PreconditionError(f"duplicate metric specs: {labels}")
    return labels


# -- accuracy ----------------------------------------------------------------------


@dataclass
class AccuracyEntry:
    metric: str
    modifier: str
    hits: int
    total: int
    errors: int

    @property
    def accuracy(self) -> float:
        return self.hits / self.total if self.total else 0.0


@dataclass
class AccuracyReport(_Report):
    entries: list[AccuracyEntry]
    cells: list[dict]
    seed: int
    kind = "accuracy"

    def accuracy(self, metric: str, modifier: Optional[str] = None) -> float:
        for e in self.entries:
            if e.metric == metric and (modifier is None or e.modifier == modifier):
                return e.accuracy
        raise KeyError((metric, modifier))

    def merged(self, other: "AccuracyReport") -> "AccuracyReport":
        return AccuracyReport(self.entries + other.entries, self.cells + other.cells, self.seed)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "accuracy": [
                {"metric": e.metric, "modifier": e.modifier, "accuracy": e.accuracy,
                 "hits": e.hits, "total": e.total, "errors": e.errors}
                for e in self.entries
            ],
            "cells": self.cells,
        }

    def csv_rows(self):
        header = ("modifier", "metric", "perturbed_id", "candidate_id", "value", "error")
        rows = [(c["modifier"], c["metric"], c["perturbed_id"], c["candidate_id"], c["value"], c["error"])
                for c in self.cells]
        return header, rows


def modifier_label(spec: PerturbationSpec) -> str:
    if not spec.params:
        return spec.kind
    parts = ",".join(f"{k}={v}" for k, v in sorted(spec.params.items()))
    return f"{spec.kind}({parts})"


def accuracy_eval(
    scans: ScanSet,
    modifier: PerturbationSpec,
    metrics: Sequence[MetricSpec],
    seed: int = 0,
    jobs: int = 1,
) -> AccuracyReport:
    """Fraction of perturbed scans whose best-scoring original is their true source.

    Best means minimum for distances and maximum for similarities; a tie for
    best counts as a miss, as does an error on the true pair.
    """
    if len(scans) < 2:
        raise PreconditionError("accuracy evaluation needs at least 2 scans")
    labels = _unique_labels(metrics)
    mod_label = modifier_label(modifier)
    originals = list(scans)

    def perturb_one(scan: Scan) -> PointCloud:
        return modifier.with_seed(cell_seed(seed, scan.id, 0, modifier.kind)).apply(scan.cloud)

    perturbed = _map(perturb_one, originals, jobs)
    tasks = [(i, j, k) for k in range(len(metrics)) for i in range(len(originals)) for j in range(len(originals))]

    def run(task):
        i, j, k = task
        return _safe_eval(metrics[k], originals[j].cloud, perturbed[i])[:2]

    results = _map(run, tasks, jobs)
    table = {t: r for t, r in zip(tasks, results)}

    entries, cells = [], []
    for k, (lab, m) in enumerate(zip(labels, metrics)):
        hits = errors = 0
        for i, scan in enumerate(originals):
            scored = []
            for j, cand in enumerate(originals):
                value, err = table[(i, j, k)]
                cells.append({"modifier": mod_label, "metric": lab, "perturbed_id": scan.id,
                              "candidate_id": cand.id, "value": value, "error": err})
                if err is not None:
                    errors += 1
                else:
                    scored.append((j, value))
            if _is_hit(i, scored, m.orientation):
                hits += 1
        entries.append(AccuracyEntry(lab, mod_label, hits, len(originals), errors))
    return AccuracyReport(entries, cells, seed)


def _is_hit(true_index: int, scored: list[tuple[int, float]], orientation: str) -> bool:
    if not scored:
        return False
    values = [v for _, v in scored]
    best = min(values) if orientation == DISTANCE else max(values)
    winners = [j for j, v in scored if v == best]
    return winners == [true_index]


# -- condition self-test -----------------------------------------------------------

CONDITIONS = ("self_consistency", "symmetry", "sensitivity", "efficiency", "range")
PASS, FAIL, EXEMPT, ERROR = "pass", "fail", "exempt", "error"


def declared_range(spec: MetricSpec) -> Optional[tuple[float, float]]:
    """Closed value interval the metric guarantees, or None when unbounded."""
    if spec.kind in ("dcd", "voxel_iou"):
        return (0.0, 1.0)
    if spec.kind == "bev":
        return (0.0, 2.0)
    if spec.kind == "histogram":
        return (0.0, 2.0 * spec.bins)
    if spec.kind == "icp":
        return (0.0, spec.icp.max_correspondence_dist)
    return None


@dataclass
class SelftestReport(_Report):
    metrics: list[str]
    matrix: dict[str, dict[str, str]]
    notes: dict[str, dict[str, Any]]
    seed: int
    kind = "selftest"

    def status(self, metric: str, condition: str) -> str:
        return self.matrix[metric][condition]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "conditions": list(CONDITIONS), "metrics": self.metrics,
                "matrix": self.matrix, "notes": self.notes}

    def csv_rows(self):
        header = ("metric",) + CONDITIONS
        return header, [(m, *[self.matrix[m][c] for c in CONDITIONS]) for m in self.metrics]


def condition_selftest(
    metrics: Sequence[MetricSpec],
    scans: ScanSet,
    seed: int = 0,
    noise_levels: Sequence[float] = (0.05, 0.2, 0.5),
    time_budget_s: float = 2.0,
) -> SelftestReport:
    """Check the five metric conditions on real data and return a pass/fail matrix.

    self_consistency: f(a, a) equals the identity value exactly on every scan.
    symmetry: |f(a, b) - f(b, a)| <= 1e-9 on consecutive scan pairs (ICP exempt).
    sensitivity: distance from identity strictly grows over ``noise_levels``.
    efficiency: mean wall time per call within ``time_budget_s``.
    range: the metric declares a bounded range and every observed value lies in it.
    """
    if len(scans) < 1:
        raise PreconditionError("selftest needs at least one scan")
    labels = _unique_labels(metrics)
    scan_list = list(scans)
    matrix, notes = {}, {}
    for lab, m in zip(labels, metrics):
        row, note = {}, {}
        observed, times = [], []
        identity = 1.0 if m.orientation == SIMILARITY else 0.0

        def ev(a, b):
            value, err, wall = _safe_eval(m, a, b)
            if err is None:
                observed.append(value)
                times.append(wall)
            return value, err

        self_vals, self_errs = [], []
        for s in scan_list:
            v, e = ev(s.cloud, s.cloud)
            (self_errs if e else self_vals).append(e or v)
        if self_errs and not self_vals:
            row["self_consistency"] = ERROR
            note["self_consistency"] = self_errs[0]
        else:
            row["self_consistency"] = PASS if all(v == identity for v in self_vals) and not self_errs else FAIL
            note["self_consistency"] = {"values": self_vals}

        if m.kind == "icp":
            row["symmetry"] = EXEMPT
        pairs = list(zip(scan_list, scan_list[1:])) or [(scan_list[0], scan_list[0])]
        gaps, sym_err = [], None
        for a, b in pairs:
            (v1, e1), (v2, e2) = ev(a.cloud, b.cloud), ev(b.cloud, a.cloud)
            if e1 or e2:
                sym_err = e1 or e2
                continue
            gaps.append(abs(v1 - v2))
        note["symmetry"] = {"max_gap": max(gaps) if gaps else None}
        if m.kind != "icp":
            if not gaps:
                row["symmetry"] = ERROR
                note["symmetry"]["error"] = sym_err
            else:
                row["symmetry"] = PASS if max(gaps) <= SYMMETRY_TOL and sym_err is None else FAIL

        base = scan_list[0].cloud
        sens = []
        for li, std in enumerate(noise_levels):
            noisy = add_noise(base, std, cell_seed(seed, scan_list[0].id, li, "noise"))
            v, e = ev(base, noisy)
            sens.append(None if e else abs(v - identity))
        if any(v is None for v in sens):
            row["sensitivity"] = ERROR
        else:
            grows = sens[0] > 0 and all(b > a for a, b in zip(sens, sens[1:]))
            row["sensitivity"] = PASS if grows else FAIL
        note["sensitivity"] = {"noise_levels": list(noise_levels), "gap_from_identity": sens}

        mean_t = statistics.fmean(times) if times else None
        row["efficiency"] = ERROR if mean_t is None else (PASS if mean_t <= time_budget_s else FAIL)
        # wall times stay out of the report so reruns are byte-identical
        note["efficiency"] = {"budget_s": time_budget_s}

        rng_decl = declared_range(m)
        if rng_decl is None:
            row["range"] = FAIL
            note["range"] = {"declared": None}
        else:
            lo, hi = rng_decl
            inside = all(lo <= v <= hi for v in observed)
            row["range"] = PASS if inside else FAIL
            note["range"] = {"declared": [lo, hi]}
        matrix[lab], notes[lab] = row, note
    return SelftestReport(labels, matrix, notes, seed)


# -- timing ------------------------------------------------------------------------


@dataclass
class TimingEntry:
    metric: str
    size: int
    mean_s: Optional[float]
    std_s: Optional[float]
    repetitions: int
    status: str = "ok"
    error: Optional[str] = None


@dataclass
class TimingReport(_Report):
    entries: list[TimingEntry]
    sizes: list[int]
    seed: int
    kind = "timing"

    def mean(self, metric: str, size: int) -> Optional[float]:
        for e in self.entries:
            if e.metric == metric and e.size == size:
                return e.mean_s
        raise KeyError((metric, size))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "sizes": self.sizes, "entries": [e.__dict__ for e in self.entries]}

    def csv_rows(self):
        header = ("metric", "size", "mean_s", "std_s", "repetitions", "status", "error")
        return header, [(e.metric, e.size, e.mean_s, e.std_s, e.repetitions, e.status, e.error) for e in self.entries]


def timing_bench(
    metrics: Sequence[MetricSpec],
    sizes: Sequence[int],
    repetitions: int = 3,
    seed: int = 0,
    timeout_s: float = 120.0,
    clouds: Optional[Callable[[int, int], PointCloud]] = None,
) -> TimingReport:
    """Mean/std wall time of each metric on synthetic clouds of each size.

    One warm-up call per (metric, size) is discarded. A call slower than
    ``timeout_s`` marks the cell as ``timeout`` and skips its remaining
    repetitions (calls run to completion; the timeout is checked afterwards).
    Entries are sorted fastest-first within each size.
    """
    if repetitions < 3:
        raise PreconditionError("timing needs at least 3 repetitions")
    if not sizes or any(s <= 0 for s in sizes):
        raise PreconditionError("sizes must be positive point counts")
    make = clouds or (lambda n, s: uniform_cloud(n, s))
    labels = _unique_labels(metrics)
    entries = []
    for size in sizes:
        a = make(size, rng.derive_seed(seed, "bench", size, 0))
        b = make(size, rng.derive_seed(seed, "bench", size, 1))
        row = []
        for lab, m in zip(labels, metrics):
            row.append(_time_metric(lab, m, a, b, size, repetitions, timeout_s))
        row.sort(key=lambda e: (e.mean_s is None, e.mean_s if e.mean_s is not None else 0.0, e.metric))
        entries.extend(row)
    return TimingReport(entries, list(sizes), seed)


def _time_metric(label, spec, a, b, size, repetitions, timeout_s) -> TimingEntry:
    times = []
    for rep in range(repetitions + 1):
        t0 = time.perf_counter()
        try:
            evaluate(spec, a, b)
        except ScanGapError as exc:
            return TimingEntry(label, size, None, None, 0, "error", f"{type(exc).__name__}: {exc}")
        dt = time.perf_counter() - t0
        if dt > timeout_s:
            return TimingEntry(label, size, None, None, len(times), "timeout", f"call took {dt:.1f}s > {timeout_s}s")
        if rep > 0:
            times.append(dt)
    return TimingEntry(label, size, statistics.fmean(times), _std(times), len(times))


# -- pairwise real vs simulated --------------------------------------------------


_CLOUD_SUFFIXES = (".ply", ".bin")


def _scan_files(directory) -> dict[str, Path]:
    return {p.stem: p for p in sorted(Path(directory).iterdir()) if p.suffix.lower() in _CLOUD_SUFFIXES}


@dataclass
class PairwiseReport(_Report):
    metrics: list[str]
    rows: list[dict]
    missing: dict[str, list[str]]
    kind = "pairwise"

    def summary(self) -> dict[str, dict]:
        out = {}
        for m in self.metrics:
            vals = [r["value"] for r in self.rows if r["metric"] == m and r["error"] is None]
            out[m] = {"mean": statistics.fmean(vals) if vals else None, "std": _std(vals) if vals else None,
                      "n": len(vals)}
        return out

    def to_dict(self) -> dict:
        return {"metrics": self.metrics, "rows": self.rows, "summary": self.summary(), "missing": self.missing}

    def csv_rows(self):
        header = ("id", "metric", "value", "orientation", "error")
        rows = [(r["id"], r["metric"], r["value"], r["orientation"], r["error"]) for r in self.rows]
        for m, s in self.summary().items():
            rows.append(("__mean__", m, s["mean"], "", None))
            rows.append(("__std__", m, s["std"], "", None))
        return header, rows


def pairwise_compare(real_dir, sim_dir, metrics: Sequence[MetricSpec], jobs: int = 1) -> PairwiseReport:
    """Score every simulated scan against the real scan with the same file stem: ``f(real, sim)``."""
    real, sim = _scan_files(real_dir), _scan_files(sim_dir)
    shared = sorted(set(real) & set(sim))
    missing = {"real_only": sorted(set(real) - set(sim)), "sim_only": sorted(set(sim) - set(real))}
    for k, ids in missing.items():
        if ids:
            log.warning("%s ids without counterpart, skipped: %s", k, ", ".join(ids))
    labels = _unique_labels(metrics)

    def run(sid):
        a, b = fileio.load(real[sid]), fileio.load(sim[sid])
        out = []
        for lab, m in zip(labels, metrics):
            value, err, _ = _safe_eval(m, a, b)
            out.append({"id": sid, "metric": lab, "value": value, "orientation": m.orientation, "error": err})
        return out

    rows = [r for chunk in _map(run, shared, jobs) for r in chunk]
    return PairwiseReport(labels, rows, missing)


def default_metrics() -> list[MetricSpec]:
    """The metric line-up compared throughout: every kind plus the usual variants."""
    return [
        MetricSpec("chamfer"),
        MetricSpec("chamfer", pre_downsample=1.0),
        *(MetricSpec("dcd", alpha=a) for a in (1.0, 10.0, 100.0, 1000.0)),
        MetricSpec("histogram", sampling=RandomSampling(1000)),
        MetricSpec("histogram"),
        MetricSpec("icp"),
        MetricSpec("voxel_iou"),
        MetricSpec("bev"),
    ]


def report_from_json(path) -> _Report:
    """Rebuild a report written by :meth:`_Report.write` (used by plotting)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path} is not a report object")
    try:
        return _report_from_doc(doc, path)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path} does not match the {doc.get('report')!r} report schema: missing {exc}") from exc


def _report_from_doc(doc: dict, path) -> _Report:
    kind = doc.get("report")
    if kind == "sweep":
        cells = [SweepCell(**c) for c in doc["cells"]]
        return SweepReport(doc["modifier"], doc["levels"], doc["metrics"], doc["orientations"], cells,
                           doc["seed"], doc.get("modifier_params", {}))
    if kind == "accuracy":
        entries = [AccuracyEntry(e["metric"], e["modifier"], e["hits"], e["total"], e["errors"]) for e in doc["accuracy"]]
        return AccuracyReport(entries, doc["cells"], doc["seed"])
    if kind == "timing":
        return TimingReport([TimingEntry(**e) for e in doc["entries"]], doc["sizes"], doc["seed"])
    if kind == "pairwise":
        return PairwiseReport(doc["metrics"], doc["rows"], doc["missing"])
    if kind == "selftest":
        return SelftestReport(doc["metrics"], doc["matrix"], doc["notes"], doc["seed"])
    raise FormatError(f"unrecognised report kind {kind!r} in {path}")
