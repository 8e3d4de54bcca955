"""Benchmark generation, prediction scoring and report files.

Directory layout written by :func:`generate_benchmark`::

    <output_dir>/manifest.csv
    <output_dir>/images/<id>__<transform>__s<severity>.nii
    <output_dir>/labels/<id>__<transform>__s<severity>_label.nii

The clean pair is stored as transform ``clean``, severity 0. Predictions are
expected as ``<pred_dir>/<id>__<transform>__s<severity>.nii[.gz]``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import __version__
from .metrics import CLEAN, SampleMetrics, evaluate_sample
from .robustness import (
    DEGRADATION_KEYS,
    RobustnessReport,
    RobustnessWeights,
    build_report,
)
from .transforms.engine import TransformSpec, apply_with_record, derive_seed, warp_label
from .transforms.severity import NUM_LEVELS, SPATIAL_KINDS, SeverityTable, TransformKind
from .volume import LabelVolume, Volume, VolumeError, load_label, load_volume, save_label, save_volume

__all__ = [
    "PipelineError",
    "ManifestRow",
    "DatasetManifest",
    "MetricsRow",
    "discover_samples",
    "cell_name",
    "generate_benchmark",
    "regenerate_row",
    "evaluate_predictions",
    "read_metrics",
    "write_metrics",
    "write_report",
]

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("sample_id", "transform", "severity", "image_path", "label_path", "seed",
                    "status", "aux")
METRICS_COLUMNS = ("sample_id", "transform", "severity", "dsc", "hd95_mm", "null_prediction",
                   "status")
_NIFTI_SUFFIXES = (".nii.gz", ".nii")


class PipelineError(RuntimeError):
    pass


def _strip_nifti(name: str) -> Optional[str]:
    for suffix in _NIFTI_SUFFIXES:
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return None


def cell_name(sample_id: str, transform: str, severity: int) -> str:
    return f"{sample_id}__{transform}__s{int(severity)}"


def discover_samples(input_dir: str) -> List[Tuple[str, str, str]]:
    """``(sample_id, image_path, label_path)`` for every ``<id>`` / ``<id>_label`` pair."""
    images: Dict[str, str] = {}
    labels: Dict[str, str] = {}
    for name in sorted(os.listdir(input_dir)):
        stem = _strip_nifti(name)
        if stem is None:
            continue
        path = os.path.join(input_dir, name)
        if stem.endswith("_label"):
            labels[stem[: -len("_label")]] = path
        else:
            images[stem] = path
    unmatched = sorted(set(images) ^ set(labels))
    if unmatched:
        raise PipelineError(f"unmatched image/label files for sample(s): {unmatched}")
    if not images:
        raise PipelineError(f"no NIfTI image/label pairs found in {input_dir}")
    return [(sid, images[sid], labels[sid]) for sid in sorted(images)]


# ------------------------------------------------------------------ manifest


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    transform: str
    severity: int
    image_path: str
    label_path: str
    seed: int
    status: str = "ok"
    aux: Dict = field(default_factory=dict)

    @property
    def key(self) -> Tuple[str, str, int]:
        return (self.sample_id, self.transform, self.severity)


def _sort_key(row: ManifestRow) -> Tuple:
    order = [CLEAN] + [k.value for k in TransformKind]
    t = order.index(row.transform) if row.transform in order else len(order)
    return (row.sample_id, t, row.transform, row.severity)


@dataclass
class DatasetManifest:
    global_seed: int
    table_checksum: str
    rows: List[ManifestRow]
    tool_version: str = __version__
    table: Optional[Dict] = None
    root: str = "."

    def failed(self) -> List[ManifestRow]:
        return [r for r in self.rows if r.status != "ok"]

    def write(self, path: str) -> None:
        buf = io.StringIO()
        buf.write("# roodbench benchmark manifest\n")
        buf.write(f"# global_seed={self.global_seed}\n")
        buf.write(f"# table_checksum={self.table_checksum}\n")
        buf.write(f"# tool_version={self.tool_version}\n")
        if self.table is not None:
            buf.write(f"# table={json.dumps(self.table, sort_keys=True, separators=(',', ':'))}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in sorted(self.rows, key=_sort_key):
            writer.writerow([r.sample_id, r.transform, r.severity, r.image_path, r.label_path,
                             r.seed, r.status, json.dumps(r.aux, sort_keys=True)])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def read(cls, path: str) -> "DatasetManifest":
        meta: Dict[str, str] = {}
        body = []
        with open(path, encoding="utf-8", newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    text = line[1:].strip()
                    if "=" in text:
                        k, v = text.split("=", 1)
                        meta[k.strip()] = v.strip()
                else:
                    body.append(line)
        reader = csv.DictReader(body)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise PipelineError(f"{path}: unexpected manifest columns {reader.fieldnames}")
        rows = [
            ManifestRow(d["sample_id"], d["transform"], int(d["severity"]), d["image_path"],
                        d["label_path"], int(d["seed"]), d["status"], json.loads(d["aux"] or "{}"))
            for d in reader
        ]
        try:
            seed = int(meta["global_seed"])
        except (KeyError, ValueError):
            raise PipelineError(f"{path}: manifest header lacks global_seed") from None
        return cls(seed, meta.get("table_checksum", ""), rows, meta.get("tool_version", ""),
                   json.loads(meta["table"]) if "table" in meta else None,
                   os.path.dirname(os.path.abspath(path)))

    def resolve(self, relpath: str) -> str:
        return os.path.join(self.root, relpath)


# ------------------------------------------------------------------ generation


def _image_rel(sample_id: str, transform: str, severity: int, ext: str) -> str:
    return f"images/{cell_name(sample_id, transform, severity)}{ext}"


def _label_rel(sample_id: str, transform: str, severity: int, ext: str) -> str:
    return f"labels/{cell_name(sample_id, transform, severity)}_label{ext}"


def _transform_pair(spec: TransformSpec, table: SeverityTable, image: Volume, label: LabelVolume
                    ) -> Tuple[Volume, LabelVolume, Dict]:
    out, realized = apply_with_record(spec, table, image)
    out_label = warp_label(spec.kind, realized, label)[0] if spec.kind in SPATIAL_KINDS else label
    return out, out_label, realized


def _process_sample(job: Tuple) -> List[ManifestRow]:
    sample_id, image_path, label_path, output_dir, table_dict, kinds, global_seed, ext = job
    table = SeverityTable(table_dict)
    cells = [(CLEAN, 0)] + [(k, s) for k in kinds for s in range(1, NUM_LEVELS + 1)]
    rows: List[ManifestRow] = []
    try:
        image = load_volume(image_path)
        label = load_label(label_path)
        if not label.same_grid(image):
            raise VolumeError(f"label grid {label.shape} does not match image grid {image.shape}")
    except Exception as exc:
        log.error("%s: cannot load sample: %s", sample_id, exc)
        return [ManifestRow(sample_id, t, s, "", "", derive_seed(global_seed, sample_id, t, s),
                            "failed", {"error": str(exc)}) for t, s in cells]

    for transform, severity in cells:
        seed = derive_seed(global_seed, sample_id, transform, severity)
        img_rel = _image_rel(sample_id, transform, severity, ext)
        lab_rel = _label_rel(sample_id, transform, severity, ext)
        try:
            if transform == CLEAN:
                out, out_label, realized = image, label, {}
            else:
                spec = TransformSpec(TransformKind(transform), severity=severity, seed=seed)
                out, out_label, realized = _transform_pair(spec, table, image, label)
            save_volume(out, os.path.join(output_dir, img_rel))
            save_label(out_label, os.path.join(output_dir, lab_rel))
            rows.append(ManifestRow(sample_id, transform, severity, img_rel, lab_rel, seed, "ok",
                                    realized))
        except Exception as exc:
            log.error("%s %s s%d failed: %s", sample_id, transform, severity, exc)
            rows.append(ManifestRow(sample_id, transform, severity, "", "", seed, "failed",
                                    {"error": str(exc)}))
    log.info("%s: %d cells written", sample_id, sum(r.status == "ok" for r in rows))
    return rows


def generate_benchmark(
    input_dir: str,
    output_dir: str,
    table: Optional[SeverityTable] = None,
    transforms: Optional[Sequence[TransformKind | str]] = None,
    global_seed: int = 0,
    jobs: int = 1,
    compress: bool = False,
) -> DatasetManifest:
    """Write every (sample, transform, severity) image/label pair and the manifest.

    Results do not depend on ``jobs``: each cell's randomness comes only from
    its derived seed, and rows are sorted before writing.
    """
    table = table or SeverityTable()
    kinds = [TransformKind(t).value for t in (transforms or list(TransformKind))]
    if len(set(kinds)) != len(kinds):
        raise PipelineError(f"duplicate transforms in {kinds}")
    if jobs < 1:
        raise PipelineError("jobs must be >= 1")
    samples = discover_samples(input_dir)
    for sub in ("images", "labels"):
        try:
            os.makedirs(os.path.join(output_dir, sub), exist_ok=True)
        except OSError as exc:
            raise PipelineError(f"cannot create output directory {output_dir}: {exc}") from exc
    ext = ".nii.gz" if compress else ".nii"
    table_dict = table.to_dict()
    work = [(sid, img, lab, output_dir, table_dict, kinds, int(global_seed), ext)
            for sid, img, lab in samples]
    rows: List[ManifestRow] = []
    if jobs == 1 or len(work) == 1:
        for job in work:
            rows.extend(_process_sample(job))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_process_sample, work):
                rows.extend(part)
    manifest = DatasetManifest(int(global_seed), table.checksum(), sorted(rows, key=_sort_key),
                               table=table_dict, root=os.path.abspath(output_dir))
    manifest.write(os.path.join(output_dir, MANIFEST_NAME))
    return manifest


def regenerate_row(manifest: DatasetManifest, row: ManifestRow) -> Tuple[Volume, LabelVolume]:
    """Recompute one cell from the manifest's clean copy of its sample.

    Bit-identical to the stored files whenever the source image was already
    representable in float32 (the on-disk type of the clean copy).
    """
    clean = next((r for r in manifest.rows
                  if r.sample_id == row.sample_id and r.transform == CLEAN and r.status == "ok"), None)
    if clean is None:
        raise PipelineError(f"{row.sample_id}: no clean entry in manifest")
    image = load_volume(manifest.resolve(clean.image_path))
    label = load_label(manifest.resolve(clean.label_path))
    if row.transform == CLEAN:
        return image, label
    table = SeverityTable(manifest.table) if manifest.table is not None else SeverityTable()
    spec = TransformSpec(TransformKind(row.transform), severity=row.severity, seed=row.seed)
    out, out_label, _ = _transform_pair(spec, table, image, label)
    return out, out_label


# ------------------------------------------------------------------ evaluation


@dataclass(frozen=True)
class MetricsRow:
    sample_id: str
    transform: str
    severity: int
    dsc: Optional[float]
    hd95_mm: Optional[float]
    null_prediction: Optional[bool]
    status: str = "ok"  # ok | missing | failed | error

    def to_sample_metrics(self) -> SampleMetrics:
        return SampleMetrics(self.sample_id, self.transform, self.severity, self.dsc,
                             self.hd95_mm, bool(self.null_prediction))

    @classmethod
    def from_sample_metrics(cls, m: SampleMetrics) -> "MetricsRow":
        return cls(m.sample_id, m.transform, m.severity, m.dsc, m.hd95_mm, m.null_prediction)


def _find_prediction(pred_dir: str, sample_id: str, transform: str, severity: int) -> Optional[str]:
    base = os.path.join(pred_dir, cell_name(sample_id, transform, severity))
    for suffix in _NIFTI_SUFFIXES:
        if os.path.exists(base + suffix):
            return base + suffix
    return None


def _evaluate_row(job: Tuple[ManifestRow, str, str]) -> MetricsRow:
    row, root, pred_dir = job
    if row.status != "ok":
        return MetricsRow(row.sample_id, row.transform, row.severity, None, None, None, "failed")
    pred_path = _find_prediction(pred_dir, row.sample_id, row.transform, row.severity)
    if pred_path is None:
        return MetricsRow(row.sample_id, row.transform, row.severity, None, None, None, "missing")
    try:
        gt = load_label(os.path.join(root, row.label_path))
        pred = load_label(pred_path)
        return MetricsRow.from_sample_metrics(
            evaluate_sample(pred, gt, row.sample_id, row.transform, row.severity))
    except (VolumeError, OSError) as exc:
        log.error("%s: %s", cell_name(row.sample_id, row.transform, row.severity), exc)
        return MetricsRow(row.sample_id, row.transform, row.severity, None, None, None, "error")


def evaluate_predictions(manifest: DatasetManifest | str, pred_dir: str,
                         out_path: Optional[str] = None, jobs: int = 1) -> List[MetricsRow]:
    """Score every manifest cell against its (co-transformed) label."""
    if isinstance(manifest, str):
        manifest = DatasetManifest.read(manifest)
    work = [(row, manifest.root, pred_dir) for row in sorted(manifest.rows, key=_sort_key)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_row, work, chunksize=8))
    else:
        results = [_evaluate_row(job) for job in work]
    if out_path is not None:
        write_metrics(results, out_path)
    return results


def _fmt_full(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_metrics(rows: Iterable[MetricsRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for r in rows:
            null = "" if r.null_prediction is None else str(bool(r.null_prediction)).lower()
            writer.writerow([r.sample_id, r.transform, r.severity, _fmt_full(r.dsc),
                             _fmt_full(r.hd95_mm), null, r.status])


def read_metrics(path: str) -> List[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(METRICS_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise PipelineError(f"{path}: missing metrics columns {sorted(missing)}")
        rows = []
        for d in reader:
            null = {"true": True, "false": False, "": None}[d["null_prediction"].strip().lower()]
            rows.append(MetricsRow(
                d["sample_id"], d["transform"], int(d["severity"]),
                float(d["dsc"]) if d["dsc"] else None,
                float(d["hd95_mm"]) if d["hd95_mm"] else None,
                null, d.get("status") or "ok"))
    return rows


def usable_metrics(rows: Iterable[MetricsRow]) -> List[SampleMetrics]:
    return [r.to_sample_metrics() for r in rows if r.status == "ok"]


# ------------------------------------------------------------------ report files

WEIGHTED_COLUMNS = ("mDSC_clean", "wmDSC", "sDSC_clean", "wsDSC",
                    "mHD95_clean", "wmHD95", "sHD95_clean", "wsHD95")


def _fmt6(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6g}"


def write_report(report: RobustnessReport, out_dir: str, prefix: str = "report") -> Dict[str, str]:
    """Write the JSON report, the two summary tables and sensitivity-curve data."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "json": os.path.join(out_dir, f"{prefix}.json"),
        "degradation": os.path.join(out_dir, f"{prefix}_degradation.csv"),
        "weighted": os.path.join(out_dir, f"{prefix}_weighted.csv"),
        "curves": os.path.join(out_dir, f"{prefix}_curves.csv"),
    }
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    names = [t.transform for t in report.transforms]
    with open(paths["degradation"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", *names, "Avg."])
        for key in DEGRADATION_KEYS:
            writer.writerow([key, *(_fmt6(t.metric(key)) for t in report.transforms),
                             _fmt6(report.aggregates[key])])

    clean = report.clean
    with open(paths["weighted"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["transform", *WEIGHTED_COLUMNS, "null_pct_clean"])
        clean_cols = (clean.m_dsc, clean.s_dsc, clean.m_hd95, clean.s_hd95)
        for t in report.transforms:
            vals = (t.wmDSC, t.wsDSC, t.wmHD95, t.wsHD95)
            writer.writerow([t.transform, *_interleave(clean_cols, vals),
                             _fmt6(100.0 * clean.null_fraction)])
        agg = tuple(report.aggregates[k] for k in ("wmDSC", "wsDSC", "wmHD95", "wsHD95"))
        writer.writerow(["Avg.", *_interleave(clean_cols, agg), _fmt6(100.0 * clean.null_fraction)])

    with open(paths["curves"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["transform", "severity", "n", "mDSC", "sDSC", "mHD95", "sHD95", "null_pct"])
        for t in report.transforms:
            for s, st in enumerate(t.per_severity):
                writer.writerow([t.transform, s, st.n, _fmt6(st.m_dsc), _fmt6(st.s_dsc),
                                 _fmt6(st.m_hd95), _fmt6(st.s_hd95), _fmt6(100.0 * st.null_fraction)])
    return paths


def _interleave(clean: Sequence[Optional[float]], weighted: Sequence[Optional[float]]) -> List[str]:
    out: List[str] = []
    for c, w in zip(clean, weighted):
        out.extend([_fmt6(c), _fmt6(w)])
    return out


def report_from_metrics(metrics: Sequence[MetricsRow] | str, alpha: float, out_dir: str,
                        prefix: str = "report") -> Tuple[RobustnessReport, Dict[str, str]]:
    if isinstance(metrics, str):
        metrics = read_metrics(metrics)
    report = build_report(usable_metrics(metrics), RobustnessWeights(alpha))
    return report, write_report(report, out_dir, prefix)
