"""File-based pipeline stages: train, generate, features, classify, report, detect.

Every stage writes into its own directory and leaves a ``manifest.json``
holding the fully resolved run configuration, the seeds, the SHA-256 of each
input file and of each output file.  Downstream stages locate their inputs
through the upstream manifest and refuse to run when a file no longer matches
its recorded hash.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import shutil
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cgan import GanConfig, GanModel, TrainTrace, generate, get_preset, train
from .classifier import HOLDOUT_FRACTIONS, Item, classical_baseline, evaluate, train_svm
from .convergence import ConvergenceConfig, compare, measure
from .features import FEATURE_NAMES, feature_matrix, pca_fit, pca_project, welch_psd, write_pca_csv
from .signalio import (
    PreprocessConfig,
    SegmentSet,
    augment,
    load_record,
    load_segments,
    merge,
    save_record,
    save_segments,
    segment_record,
)
from .structsim import make_benchmark

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StaleArtifact(RuntimeError):
    """An upstream file is missing or differs from the hash its manifest recorded."""


@dataclass
class ClassifierSettings:
    C: float = 1.0
    epochs: int = 200
    split_fraction: float = HOLDOUT_FRACTIONS[">15%"]


@dataclass
class RunConfig:
    seed: int = 0
    preset: str = "desk"
    generate_n: int = 1000
    gan: GanConfig = field(default_factory=GanConfig.desk)
    preprocess: PreprocessConfig = field(default_factory=lambda: PreprocessConfig(segment_length=301))
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "gan": GanConfig,
    "preprocess": PreprocessConfig,
    "convergence": ConvergenceConfig,
    "classifier": ClassifierSettings,
}


def _check_keys(name, table, cls):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown key(s) in [{name}]: {sorted(unknown)}")


def resolve_config(path=None, seed=None, preset=None) -> RunConfig:
    """Merge defaults, an optional TOML file and command-line overrides.

    Precedence is flag > file > default.  The preset picks the default epoch
    count and forces the segment length to the preset's signal length; the
    seed drives training, generation, splitting and the SVM alike.
    """
    doc = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    top = {k: v for k, v in doc.items() if k not in _SECTIONS}
    _check_keys("top level", top, RunConfig)
    if seed is not None:
        top["seed"] = seed
    if preset is not None:
        top["preset"] = preset
    seed_v = int(top.get("seed", 0))
    preset_v = str(top.get("preset", "desk"))
    length = get_preset(preset_v).signal_length

    gan_t = dict(doc.get("gan", {}))
    _check_keys("gan", gan_t, GanConfig)
    gan_t.pop("scale_preset", None)
    gan_t.pop("seed", None)
    base = GanConfig.desk() if preset_v == "desk" else GanConfig()
    gan = replace(base, scale_preset=preset_v, seed=seed_v, **gan_t)

    pre_t = dict(doc.get("preprocess", {}))
    _check_keys("preprocess", pre_t, PreprocessConfig)
    if pre_t.get("segment_length", length) != length:
        raise ValueError(f"segment_length {pre_t['segment_length']} conflicts with preset {preset_v!r} ({length})")
    pre_t["segment_length"] = length
    pre = PreprocessConfig(**pre_t)

    conv_t = dict(doc.get("convergence", {}))
    _check_keys("convergence", conv_t, ConvergenceConfig)
    cls_t = dict(doc.get("classifier", {}))
    _check_keys("classifier", cls_t, ClassifierSettings)
    return RunConfig(
        seed=seed_v,
        preset=preset_v,
        generate_n=int(top.get("generate_n", 1000)),
        gan=gan,
        preprocess=pre,
        convergence=ConvergenceConfig(**conv_t),
        classifier=ClassifierSettings(**cls_t),
    )


def run_config_from_dict(d) -> RunConfig:
    return RunConfig(
        seed=d["seed"],
        preset=d["preset"],
        generate_n=d["generate_n"],
        gan=GanConfig(**d["gan"]),
        preprocess=PreprocessConfig(**d["preprocess"]),
        convergence=ConvergenceConfig(**d["convergence"]),
        classifier=ClassifierSettings(**d["classifier"]),
    )


# --- hashing and manifests -------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out: Path, command: str, cfg: RunConfig | None, inputs: dict, outputs: list[str], extra=None):
    doc = {
        "tool": "twinforge",
        "version": __version__,
        "command": command,
        "run_config": cfg.to_dict() if cfg is not None else None,
        "seeds": {"master": cfg.seed} if cfg is not None else {},
        "inputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in inputs.items()},
        "outputs": {name: sha256_file(out / name) for name in sorted(outputs)},
    }
    if extra:
        doc.update(extra)
    write_json(out / MANIFEST, doc)
    return doc


def read_manifest(stage_dir, command: str | None = None) -> dict:
    """Load a stage manifest and verify every listed output against its hash."""
    stage_dir = Path(stage_dir)
    mpath = stage_dir / MANIFEST
    if not mpath.is_file():
        raise StaleArtifact(f"{stage_dir}: no {MANIFEST}; run the upstream stage first")
    doc = json.loads(mpath.read_text())
    if command is not None and doc.get("command") != command:
        raise StaleArtifact(f"{stage_dir}: manifest is from {doc.get('command')!r}, expected {command!r}")
    for name, digest in doc["outputs"].items():
        p = stage_dir / name
        if not p.is_file():
            raise StaleArtifact(f"{p}: missing")
        if sha256_file(p) != digest:
            raise StaleArtifact(f"{p}: content hash differs from manifest (file modified or stale)")
    return doc


def _prepare(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- stages ---------------------------------------------------------------------


def simulate_stage(seed: int, out, fmt: str = "f64-binary") -> dict:
    out = _prepare(out)
    ext = "csv" if fmt == "csv" else "twf"
    names = []
    records = make_benchmark(seed)
    for name, rec in records.items():
        fname = f"{name}.{ext}"
        save_record(rec, out / fname, fmt)
        names.append(fname)
    scen = {n: {"channels": r.channels, "samples": r.samples_per_channel, "rate_hz": r.sample_rate_hz} for n, r in records.items()}
    return write_manifest(out, "simulate", None, {}, names, {"seeds": {"master": seed}, "scenarios": scen})


def _pair_segments(baseline, probe, cfg: RunConfig) -> SegmentSet:
    a = load_record(baseline)
    b = load_record(probe)
    data = merge(segment_record(a, cfg.preprocess, 0), segment_record(b, cfg.preprocess, 1))
    if cfg.preprocess.augmentation_noise_std > 0:
        data = augment(data, cfg.preprocess.augmentation_noise_std, cfg.seed)
    return data


def train_stage(baseline, probe, cfg: RunConfig, out, progress=None) -> tuple[dict, TrainTrace]:
    """Train one cGAN on (baseline -> label 0, probe -> label 1) and record its trace."""
    from .plotting import plot_scores

    out = _prepare(out)
    data = _pair_segments(baseline, probe, cfg)
    save_segments(data, out / "segments.twf", cfg.preprocess)
    model, trace = train(data, cfg.gan, progress)
    model.save(out / "model.twck")
    trace.to_csv(out / "trace.csv")
    metric = measure(trace, cfg.convergence)
    write_json(out / "metric.json", metric.to_dict())
    plot_scores(trace, out / "scores.png", cfg.convergence.smoothing_window, cfg.convergence.threshold)
    outputs = ["segments.twf", "segments.twf.json", "model.twck", "trace.csv", "metric.json", "scores.png"]
    doc = write_manifest(out, "train", cfg, {"baseline": baseline, "probe": probe}, outputs)
    return doc, trace


def _segment_ids(segs: SegmentSet):
    return [f"{s.source_tag}:ch{s.channel_index}:w{s.window_index}" for s in segs.segments]


def _mean_psd(values, fs):
    f, P = welch_psd(values, fs)
    return f, P.mean(axis=0)


def generate_stage(run_dir, out, n: int | None = None) -> dict:
    from .plotting import plot_spectra

    up = read_manifest(run_dir, "train")
    cfg = run_config_from_dict(up["run_config"])
    n = cfg.generate_n if n is None else n
    cfg = replace(cfg, generate_n=n)
    out = _prepare(out)
    run_dir = Path(run_dir)
    model = GanModel.load(run_dir / "model.twck")
    real = load_segments(run_dir / "segments.twf")
    segs = generate(model, 0, n, cfg.seed) + generate(model, 1, n, cfg.seed)
    gen = SegmentSet(segs, real.sample_rate_hz)
    save_segments(gen, out / "generated.twf", None, {"generated_per_label": n, "seed": cfg.seed})

    fs = real.sample_rate_hz
    X, y = real.matrix(), real.labels()
    G, gy = gen.matrix(), gen.labels()
    cols = {}
    for lab in (0, 1):
        f, cols[f"real_label{lab}"] = _mean_psd(X[y == lab], fs)
        _, cols[f"generated_label{lab}"] = _mean_psd(G[gy == lab], fs)
    with open(out / "spectra.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", *cols])
        for i, fi in enumerate(f):
            w.writerow([repr(float(fi)), *(repr(float(c[i])) for c in cols.values())])
    plot_spectra(f, cols, out / "spectra.png")
    inputs = {"model": run_dir / "model.twck", "segments": run_dir / "segments.twf"}
    return write_manifest(out, "generate", cfg, inputs, ["generated.twf", "generated.twf.json", "spectra.csv", "spectra.png"])


def features_stage(run_dir, gen_dir, out) -> dict:
    """Features of real and generated segments; PCA fitted on the real ones."""
    from .plotting import plot_pca

    read_manifest(run_dir, "train")
    up = read_manifest(gen_dir, "generate")
    cfg = run_config_from_dict(up["run_config"])
    out = _prepare(out)
    real = load_segments(Path(run_dir) / "segments.twf")
    gen = load_segments(Path(gen_dir) / "generated.twf")
    fs = real.sample_rate_hz
    Fr = feature_matrix(real.matrix(), fs)
    Fg = feature_matrix(gen.matrix(), fs)
    ids = _segment_ids(real) + [f"generated:l{s.condition_label}:{s.window_index}" for s in gen.segments]
    sources = ["real"] * len(real) + ["generated"] * len(gen)
    labels = np.concatenate([real.labels(), gen.labels()])
    origin = [s.source_tag for s in real.segments] + ["generated"] * len(gen)
    F = np.vstack([Fr, Fg])
    with open(out / "features.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment_id", "source", "label", "origin", *FEATURE_NAMES])
        for i in range(len(F)):
            w.writerow([ids[i], sources[i], int(labels[i]), origin[i], *(repr(float(v)) for v in F[i])])
    model = pca_fit(Fr, K=3)
    P = pca_project(model, F)
    write_pca_csv(out / "pca.csv", zip(ids, sources, labels, P))
    cent = centroid_summary(P, np.array(sources), labels)
    write_json(out / "pca.json", {"model": model.to_dict(), "centroids": cent})
    plot_pca(P, sources, labels, out / "pca.png")
    inputs = {"segments": Path(run_dir) / "segments.twf", "generated": Path(gen_dir) / "generated.twf"}
    return write_manifest(out, "features", cfg, inputs, ["features.csv", "pca.csv", "pca.json", "pca.png"])


def centroid_summary(coords, sources, labels) -> dict:
    """Distances between real and generated class centroids in PCA space.

    ``same_below_cross`` holds when every real class centroid lies closer to
    the generated centroid of its own label than to that of the other label.
    """
    c = {}
    for src in ("real", "generated"):
        for lab in (0, 1):
            m = (sources == src) & (labels == lab)
            c[(src, lab)] = coords[m].mean(axis=0) if m.any() else np.full(coords.shape[1], np.nan)
    d = lambda a, b: float(np.linalg.norm(c[a] - c[b]))  # noqa: E731
    same = [d(("real", k), ("generated", k)) for k in (0, 1)]
    cross = [d(("real", k), ("generated", 1 - k)) for k in (0, 1)]
    return {
        "same_class": same,
        "cross_class": cross,
        "real_between_class": d(("real", 0), ("real", 1)),
        "same_below_cross": bool(all(s < c for s, c in zip(same, cross))),
    }


def _items_from_csv(path):
    real, gen = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            it = Item(
                np.array([float(row[k]) for k in FEATURE_NAMES]),
                int(row["label"]),
                row["origin"],
                row["segment_id"],
            )
            (real if row["source"] == "real" else gen).append(it)
    return real, gen


def classify_stage(feat_dir, out) -> dict:
    """SVM trained on generated features, scored on every real segment; plus the real-only baseline."""
    from .plotting import plot_confusion

    up = read_manifest(feat_dir, "features")
    cfg = run_config_from_dict(up["run_config"])
    cs = cfg.classifier
    out = _prepare(out)
    real, gen = _items_from_csv(Path(feat_dir) / "features.csv")
    model = train_svm(gen, C=cs.C, epochs=cs.epochs, seed=cfg.seed)
    report = evaluate(model, real, split_fraction=1.0)
    report.extra["train_source"] = "generated"
    report.write(out / "report.json", out / "confusion.csv")
    write_json(out / "svm.json", model.to_dict())
    plot_confusion(report.confusion, out / "confusion.png", f"accuracy {report.accuracy:.4f}")
    base = classical_baseline(real, cs.split_fraction, seed=cfg.seed, C=cs.C, epochs=cs.epochs)
    base.extra["train_source"] = "real"
    base.write(out / "baseline.json", out / "baseline_confusion.csv")
    outputs = ["report.json", "confusion.csv", "svm.json", "confusion.png", "baseline.json", "baseline_confusion.csv"]
    return write_manifest(out, "classify", cfg, {"features": Path(feat_dir) / "features.csv"}, outputs)


def report_stage(baseline, probe, cfg: RunConfig, out, progress=None) -> dict:
    """Run every stage for one record pair and gather the plot data in one directory."""
    out = _prepare(out)
    stages = out / "stages"
    train_stage(baseline, probe, cfg, stages / "train", progress)
    generate_stage(stages / "train", stages / "generate")
    features_stage(stages / "train", stages / "generate", stages / "features")
    classify_stage(stages / "features", stages / "classify")
    bundle = {
        "train/trace.csv": "trace.csv",
        "train/scores.png": "scores.png",
        "train/metric.json": "metric.json",
        "generate/spectra.csv": "spectra.csv",
        "generate/spectra.png": "spectra.png",
        "features/pca.csv": "pca.csv",
        "features/pca.png": "pca.png",
        "classify/report.json": "confusion.json",
        "classify/confusion.csv": "confusion.csv",
        "classify/confusion.png": "confusion.png",
        "classify/baseline.json": "baseline.json",
    }
    for src, dst in bundle.items():
        shutil.copyfile(stages / src, out / dst)
    summary = {
        "metric": json.loads((out / "metric.json").read_text()),
        "classification": json.loads((out / "confusion.json").read_text()),
        "baseline": json.loads((out / "baseline.json").read_text()),
        "pca_centroids": json.loads((stages / "features" / "pca.json").read_text())["centroids"],
    }
    write_json(out / "summary.json", summary)
    return write_manifest(out, "report", cfg, {"baseline": baseline, "probe": probe}, [*bundle.values(), "summary.json"])


def detect_stage(baseline_pair, probe_pair, cfg: RunConfig, out, ratio_threshold: float = 1.5, progress=None):
    """Train on both pairs under one configuration and compare their learning durations."""
    out = _prepare(out)
    _, tb = train_stage(*baseline_pair, cfg, out / "baseline", progress)
    _, tp = train_stage(*probe_pair, cfg, out / "probe", progress)
    verdict = compare(measure(tb, cfg.convergence), measure(tp, cfg.convergence), ratio_threshold)
    write_json(out / "verdict.json", verdict.to_dict())
    inputs = {
        "baseline_a": baseline_pair[0],
        "baseline_b": baseline_pair[1],
        "probe_a": probe_pair[0],
        "probe_b": probe_pair[1],
    }
    outputs = ["verdict.json", *(f"{r}/{n}" for r in ("baseline", "probe") for n in ("trace.csv", "metric.json"))]
    write_manifest(out, "detect", cfg, inputs, outputs, {"ratio_threshold": ratio_threshold})
    return verdict
