"""Experiment orchestration: corpora, splits, stage plans, jobs, reports.

The training itself happens elsewhere; this module owns everything around
it: ingesting image/transcript pairs into a manifest, deterministic splits,
the cumulative stage table of an ablation study, job descriptors a trainer
can execute, and collection of per-job CERs into stage/budget reports.
All emitted files are byte-stable for identical inputs and seeds.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ocrforge import nags
from ocrforge.augment import (AugmentationPlan, BlotchParams,
                              BrightnessContrastParams, LoResDistortParams)
from ocrforge.lineimg import IMAGE_SUFFIXES


class OrphanFileWarning(UserWarning):
    """An image without a transcript, or a transcript without an image."""


# -- manifests ----------------------------------------------------------------


@dataclass
class ManifestEntry:
    line_id: str
    image: str
    gt: str
    split: str = "train"


@dataclass
class DatasetManifest:
    """All line records of a corpus; paths are relative to `root`."""

    entries: list[ManifestEntry]
    root: str = "."
    seed: int | None = None

    def __post_init__(self):
        ids = [e.line_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("line ids must be unique")

    def entries_for(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.split] = out.get(e.split, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "root": self.root,
            "seed": self.seed,
            "entries": [{"line_id": e.line_id, "image": e.image,
                         "gt": e.gt, "split": e.split}
                        for e in self.entries],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        entries = [ManifestEntry(e["line_id"], e["image"], e["gt"],
                                 e.get("split", "train"))
                   for e in doc["entries"]]
        return cls(entries, root=doc.get("root", "."), seed=doc.get("seed"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def ingest(data_dir: str | Path) -> DatasetManifest:
    """Build a manifest from a directory of images and `.gt.txt` transcripts.

    Pairs share a stem (`line7.png` + `line7.gt.txt`). Files missing their
    partner raise an OrphanFileWarning and stay out of the manifest; an
    empty result is an error.
    """
    data_dir = Path(data_dir)
    images = {p.stem: p for p in sorted(data_dir.iterdir())
              if p.suffix.lower() in IMAGE_SUFFIXES}
    gts = {p.name[:-len(".gt.txt")]: p
           for p in sorted(data_dir.glob("*.gt.txt"))}
    entries = []
    for stem in sorted(images):
        if stem not in gts:
            warnings.warn(f"image without transcript: {images[stem].name}",
                          OrphanFileWarning, stacklevel=2)
            continue
        entries.append(ManifestEntry(stem, images[stem].name, gts[stem].name))
    for stem in sorted(set(gts) - set(images)):
        warnings.warn(f"transcript without image: {gts[stem].name}",
                      OrphanFileWarning, stacklevel=2)
    if not entries:
        raise ValueError(f"no image/transcript pairs under {data_dir}")
    return DatasetManifest(entries, root=str(data_dir))


DEFAULT_SPLIT_NAMES = ("train", "validation", "test")


def split(manifest: DatasetManifest, fractions: Sequence[float], seed: int,
          names: Sequence[str] | None = None) -> DatasetManifest:
    """Retag entries into splits by a seeded shuffle.

    Split i receives round(fractions[i] * n) entries, the last split takes
    the remainder; fractions must sum to 1. The shuffle is a numpy
    permutation seeded with `seed`, so the assignment is reproducible and
    recorded in the returned manifest's `seed`.
    """
    if names is None:
        if len(fractions) > len(DEFAULT_SPLIT_NAMES):
            raise ValueError("pass explicit names for more than "
                             f"{len(DEFAULT_SPLIT_NAMES)} splits")
        names = DEFAULT_SPLIT_NAMES[:len(fractions)]
    if len(names) != len(fractions):
        raise ValueError("need one name per fraction")
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be >= 0")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(manifest.entries)
    order = np.random.default_rng(seed).permutation(n)
    sizes = [round(f * n) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    if sizes[-1] < 0:
        raise ValueError("rounding left a negative remainder split")
    tags = [""] * n
    at = 0
    for name, size in zip(names, sizes):
        for idx in order[at:at + size]:
            tags[idx] = name
        at += size
    entries = [replace(e, split=tags[i])
               for i, e in enumerate(manifest.entries)]
    return DatasetManifest(entries, root=manifest.root, seed=seed)


def budget_line_ids(manifest: DatasetManifest, budget: int | None,
                    seed: int) -> list[str]:
    """Training line ids for a budget: a prefix of one seeded permutation.

    Using the same seed for every budget makes smaller budgets strict
    subsets of larger ones.
    """
    train = manifest.entries_for("train")
    ids = [e.line_id for e in train]
    if budget is None:
        return ids
    if budget < 1 or budget > len(ids):
        raise ValueError(f"budget {budget} outside 1..{len(ids)}")
    order = np.random.default_rng(seed).permutation(len(ids))
    return [ids[i] for i in order[:budget]]


# -- replicate sizing ---------------------------------------------------------


@dataclass(frozen=True)
class SampleStats:
    """Mean / sample stddev / min of replicate CERs.

    A single replicate yields sigma = 0.0 with single_sample set, so
    downstream consumers can tell "no spread" from "spread unknown".
    """

    mu: float
    sigma: float
    min: float
    n: int
    single_sample: bool = False


def sample_stats(values: Sequence[float]) -> SampleStats:
    if len(values) == 0:
        raise ValueError("no values")
    values = [float(v) for v in values]
    if len(values) == 1:
        return SampleStats(values[0], 0.0, values[0], 1, single_sample=True)
    return SampleStats(statistics.mean(values), statistics.stdev(values),
                       min(values), len(values))


def required_sample_size(sigma: float, detectable_difference: float,
                         confidence: float = 0.95) -> int:
    """Replicates needed to resolve a mean difference at the given confidence.

    Normal approximation: n = ceil((z * sigma / d)^2) with z the two-sided
    quantile for `confidence`, floored at one replicate.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if detectable_difference <= 0:
        raise ValueError("detectable_difference must be > 0")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    z = statistics.NormalDist().inv_cdf(1.0 - (1.0 - confidence) / 2.0)
    return max(1, math.ceil((z * sigma / detectable_difference) ** 2))


# -- stage table --------------------------------------------------------------


@dataclass(frozen=True)
class StagePlan:
    """Full training configuration of one ablation stage."""

    stage: int
    name: str
    harmonize: bool
    architecture: nags.ArchitectureSpec
    batch_size: int | None
    clipping_norm: float | None
    augmentation: AugmentationPlan
    folds: int


STAGE_NAMES = {
    1: "defaults",
    2: "harmonize",
    3: "architecture",
    4: "batch-size",
    5: "clipping-norm",
    6: "distort",
    7: "blotches",
    8: "contrast",
    9: "ensemble",
    10: "no-architecture",
    11: "no-augmentation",
}

_DISTORT_OP = ("distort_lowres",
               LoResDistortParams(num_steps=8, distort_limit=0.5))
_BLOTCH_OP = ("add_blotches", BlotchParams(amount=0.0009, scale=9.0))
_CONTRAST_OP = ("random_brightness_contrast",
                BrightnessContrastParams(brightness_limit=0.2,
                                         contrast_limit=0.9))
AUGMENT_RATIO = 200.0


def stage_plan(stage: int) -> StagePlan:
    """The cumulative configuration for stages 1..11.

    Stages 1..9 add one ingredient each on top of the previous stage
    (harmonization, the tuned architecture, batch size 8, gradient clipping
    norm 0.001, then the three augmentation operators at ratio 200, then
    5-fold ensembling). Stages 10 and 11 are stage 9 with exactly one
    ingredient removed: the tuned architecture and the augmentation suite
    respectively. batch_size / clipping_norm stay None below their stage,
    meaning "leave the trainer's own default alone".
    """
    if stage not in STAGE_NAMES:
        raise ValueError(f"stage must be in 1..11, got {stage}")
    ops = []
    if stage >= 6 and stage != 11:
        ops.append(_DISTORT_OP)
    if stage >= 7 and stage != 11:
        ops.append(_BLOTCH_OP)
    if stage >= 8 and stage != 11:
        ops.append(_CONTRAST_OP)
    ratio = AUGMENT_RATIO if ops else 0.0
    return StagePlan(
        stage=stage,
        name=STAGE_NAMES[stage],
        harmonize=stage >= 2,
        architecture=(nags.tuned_architecture()
                      if stage >= 3 and stage != 10
                      else nags.stock_architecture()),
        batch_size=8 if stage >= 4 else None,
        clipping_norm=0.001 if stage >= 5 else None,
        augmentation=AugmentationPlan(ops=ops, ratio=ratio),
        folds=5 if stage >= 9 else 1,
    )


def default_replicates(stage: int) -> int:
    """16 single trainings below the ensembling stage, 4 ensembles from it."""
    return 16 if stage <= 8 else 4


# -- jobs ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrainJob:
    """One training run a trainer can execute from its descriptor alone."""

    job_id: str
    plan: StagePlan
    line_budget: int | None
    subset_seed: int
    seed: int
    manifest: str
    augmented_dir: str
    wallclock_hours: float | None = None


def _budget_label(budget: int | None) -> str:
    return "full" if budget is None else f"{budget:06d}"


def _job_seed(master: int, stage: int, budget: int | None, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=master,
                                spawn_key=(stage, budget or 0, rep))
    return int(ss.generate_state(1)[0])


def plan_ablation(stages: Sequence[int], budgets: Sequence[int | None],
                  replicates: int | None = None,
                  manifest: DatasetManifest | None = None,
                  manifest_path: str = "manifest.json", seed: int = 0,
                  augmented_root: str = "augmented") -> list[TrainJob]:
    """Expand stages x budgets x replicates into concrete training jobs.

    `replicates` overrides the default policy (16 below the ensembling
    stage, 4 from it). Budgets containing None mean the full training
    split; when a manifest is supplied, budgets are validated against its
    training split size. The subset seed equals `seed` for every job, so
    all jobs at one budget share the identical line subset and smaller
    budgets nest inside larger ones.
    """
    stages = sorted(set(stages))
    budget_list = sorted(set(budgets), key=lambda b: (b is None, b or 0))
    if not stages or not budget_list:
        raise ValueError("need at least one stage and one budget")
    if manifest is not None:
        n_train = len(manifest.entries_for("train"))
        for b in budget_list:
            if b is not None and b > n_train:
                raise ValueError(f"budget {b} exceeds the training split "
                                 f"({n_train} lines)")
    jobs = []
    for stage in stages:
        plan = stage_plan(stage)
        reps = replicates if replicates is not None else default_replicates(stage)
        for budget in budget_list:
            for rep in range(reps):
                job_id = (f"stage{stage:02d}_lines{_budget_label(budget)}"
                          f"_rep{rep:02d}")
                jobs.append(TrainJob(
                    job_id=job_id,
                    plan=plan,
                    line_budget=budget,
                    subset_seed=seed,
                    seed=_job_seed(seed, stage, budget, rep),
                    manifest=manifest_path,
                    augmented_dir=f"{augmented_root}/{job_id}",
                ))
    return jobs


def job_descriptor(job: TrainJob) -> dict:
    plan = job.plan
    aug = plan.augmentation.to_dict()
    aug["output_dir"] = job.augmented_dir
    return {
        "schema": 1,
        "job_id": job.job_id,
        "stage": plan.stage,
        "stage_name": plan.name,
        "harmonize": plan.harmonize,
        "architecture": nags.descriptor(plan.architecture),
        "batch_size": plan.batch_size,
        "clipping_norm": plan.clipping_norm,
        "augmentation": aug,
        "folds": plan.folds,
        "line_budget": job.line_budget,
        "subset_seed": job.subset_seed,
        "seed": job.seed,
        "manifest": job.manifest,
        "wallclock_hours": job.wallclock_hours,
    }


def emit_jobs(jobs: Sequence[TrainJob], out_dir: str | Path) -> list[Path]:
    """Write one `<job_id>.json` descriptor per job; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for job in jobs:
        path = out_dir / f"{job.job_id}.json"
        path.write_text(
            json.dumps(job_descriptor(job), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
        paths.append(path)
    return paths


def read_job(path: str | Path) -> TrainJob:
    """Rebuild a TrainJob from its descriptor file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    aug = dict(doc["augmentation"])
    augmented_dir = aug.pop("output_dir", "")
    plan = StagePlan(
        stage=doc["stage"],
        name=doc["stage_name"],
        harmonize=doc["harmonize"],
        architecture=nags.parse(doc["architecture"]),
        batch_size=doc["batch_size"],
        clipping_norm=doc["clipping_norm"],
        augmentation=AugmentationPlan.from_dict(aug),
        folds=doc["folds"],
    )
    return TrainJob(
        job_id=doc["job_id"],
        plan=plan,
        line_budget=doc["line_budget"],
        subset_seed=doc["subset_seed"],
        seed=doc["seed"],
        manifest=doc["manifest"],
        augmented_dir=augmented_dir,
        wallclock_hours=doc.get("wallclock_hours"),
    )


def load_jobs(jobs_dir: str | Path) -> list[TrainJob]:
    return [read_job(p) for p in sorted(Path(jobs_dir).glob("*.json"))]


# -- result collection --------------------------------------------------------


@dataclass
class StageBudgetRow:
    """Aggregated replicate results for one (stage, budget) cell."""

    stage: int
    stage_name: str
    budget: int | None
    stats: SampleStats | None
    delta_mu: float | None
    expected: int
    missing: int


def read_result(results_dir: Path, job_id: str) -> float | None:
    """CER (percent) for a job: `<job_id>.cer` scalar or `<job_id>.json`."""
    scalar = results_dir / f"{job_id}.cer"
    if scalar.exists():
        return float(scalar.read_text().strip())
    doc_path = results_dir / f"{job_id}.json"
    if doc_path.exists():
        doc = json.loads(doc_path.read_text(encoding="utf-8"))
        return float(doc["cer"])
    return None


def collect(jobs: Sequence[TrainJob] | str | Path,
            results_dir: str | Path) -> list[StageBudgetRow]:
    """Aggregate per-job CERs into (stage, budget) rows.

    `jobs` is either planned jobs or a directory of descriptors. delta_mu
    compares each row's mean against the previous stage present in the
    report at the same budget; rows with zero results keep stats=None and
    report every replicate as missing.
    """
    if isinstance(jobs, (str, Path)):
        jobs = load_jobs(jobs)
    results_dir = Path(results_dir)
    cells: dict[tuple[object, int], dict] = {}
    for job in jobs:
        key = (job.line_budget, job.plan.stage)
        cell = cells.setdefault(key, {"name": job.plan.name,
                                      "values": [], "expected": 0})
        cell["expected"] += 1
        value = read_result(results_dir, job.job_id)
        if value is not None:
            cell["values"].append(value)
    rows: list[StageBudgetRow] = []
    budget_order = sorted({b for b, _ in cells},
                          key=lambda b: (b is None, b or 0))
    for budget in budget_order:
        prev_mu = None
        for stage in sorted(s for b, s in cells if b == budget):
            cell = cells[(budget, stage)]
            values = cell["values"]
            stats = sample_stats(values) if values else None
            delta = None
            if stats is not None and prev_mu is not None:
                delta = stats.mu - prev_mu
            if stats is not None:
                prev_mu = stats.mu
            rows.append(StageBudgetRow(
                stage=stage,
                stage_name=cell["name"],
                budget=budget,
                stats=stats,
                delta_mu=delta,
                expected=cell["expected"],
                missing=cell["expected"] - len(values),
            ))
    return rows


def report_to_dict(rows: Sequence[StageBudgetRow]) -> dict:
    out = []
    for r in rows:
        out.append({
            "stage": r.stage,
            "stage_name": r.stage_name,
            "budget": r.budget,
            "mu_cerp": r.stats.mu if r.stats else None,
            "delta_mu": r.delta_mu,
            "sigma_cerp": r.stats.sigma if r.stats else None,
            "min_cerp": r.stats.min if r.stats else None,
            "n": r.stats.n if r.stats else 0,
            "expected": r.expected,
            "missing": r.missing,
            "single_sample": bool(r.stats.single_sample) if r.stats else False,
        })
    return {"schema": 1, "rows": out}


def write_report_json(rows: Sequence[StageBudgetRow], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(rows), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def write_report_csv(rows: Sequence[StageBudgetRow], path: str | Path) -> None:
    """CSV report; empty cells mark missing data, never fabricated zeros."""

    def fmt(x: float | None) -> str:
        return "" if x is None else repr(x)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "budget", "mu_cerp", "delta_mu",
                    "sigma_cerp", "min_cerp", "n"])
        for r in rows:
            w.writerow([
                r.stage,
                "full" if r.budget is None else r.budget,
                fmt(r.stats.mu if r.stats else None),
                fmt(r.delta_mu),
                fmt(r.stats.sigma if r.stats else None),
                fmt(r.stats.min if r.stats else None),
                r.stats.n if r.stats else 0,
            ])
