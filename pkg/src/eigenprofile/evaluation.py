"""Training-set sampling, confusion-matrix metrics, and Monte Carlo averaging.

Draws are reproducible across platforms: all randomness comes from
numpy's PCG64 generator seeded explicitly, classes are visited in
ascending label order, and candidate pixels are enumerated row-major.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datacube import LabelMap
from .errors import DegenerateDataError, NumericalError, PipelineError


@dataclass(frozen=True)
class SamplingScheme:
    """Per-class training proportion with a minimum count and a seed."""

    proportion: float
    min_per_class: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.proportion <= 1:
            raise ValueError(f"proportion must be in (0, 1], got {self.proportion}")
        if self.min_per_class < 1:
            raise ValueError(f"min_per_class must be >= 1, got {self.min_per_class}")


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def draw_training_set(
    labels: LabelMap, scheme: SamplingScheme
) -> tuple[np.ndarray, np.ndarray]:
    """Split labeled pixels into disjoint train/test index sets.

    Per class with N pixels, max(min_per_class, round(proportion * N))
    pixels are drawn uniformly without replacement; classes smaller than
    the minimum go entirely to training with a warning. Returned indices
    are flat row-major pixel positions, sorted ascending.
    """
    flat = labels.flat()
    present = labels.classes
    if present.size == 0:
        raise DegenerateDataError("label map has no labeled pixels", module="evaluation")
    for class_id in range(1, int(present.max()) + 1):
        if class_id not in present:
            raise DegenerateDataError(
                f"class {class_id} has zero labeled pixels", module="evaluation"
            )
    rng = np.random.Generator(np.random.PCG64(scheme.seed))
    train_parts = []
    test_parts = []
    for class_id in present:
        candidates = np.flatnonzero(flat == class_id)
        count = candidates.size
        want = max(scheme.min_per_class, _round_half_away(scheme.proportion * count))
        if count < scheme.min_per_class:
            warnings.warn(
                f"class {class_id} has only {count} pixels "
                f"(< min_per_class={scheme.min_per_class}); using all for training"
            )
        take = min(want, count)
        order = rng.permutation(count)
        train_parts.append(candidates[order[:take]])
        test_parts.append(candidates[order[take:]])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts)) if test_parts else np.empty(0, np.int64)
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts[i, j] = pixels of true class classes[i] predicted as classes[j]."""

    classes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        k = self.classes.size
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be ({k}, {k}), got {self.counts.shape}")
        if self.counts.min(initial=0) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(
    predicted: LabelMap, truth: LabelMap, test_indices: np.ndarray
) -> ConfusionMatrix:
    """Tally predictions against ground truth over the given pixel indices."""
    if (predicted.rows, predicted.cols) != (truth.rows, truth.cols):
        raise ValueError("predicted and truth rasters differ in shape")
    test_indices = np.asarray(test_indices, dtype=np.int64)
    classes = truth.classes
    k = classes.size
    counts = np.zeros((k, k), dtype=np.int64)
    if test_indices.size:
        if test_indices.min() < 0 or test_indices.max() >= truth.rows * truth.cols:
            raise ValueError("test index out of bounds")
        t = truth.flat()[test_indices]
        p = predicted.flat()[test_indices]
        for name, values in (("truth", t), ("prediction", p)):
            bad = ~np.isin(values, classes)
            if bad.any():
                raise ValueError(
                    f"{name} label {int(values[bad][0])} is outside the class list"
                )
        ti = np.searchsorted(classes, t)
        pi = np.searchsorted(classes, p)
        np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(classes, counts)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    """Percent of evaluated pixels on the diagonal."""
    total = cm.total
    if total == 0:
        raise DegenerateDataError("empty confusion matrix", module="evaluation")
    return 100.0 * float(np.trace(cm.counts)) / total


def per_class_accuracy(cm: ConfusionMatrix) -> np.ndarray:
    """Diagonal over row sums, in percent; NaN for classes with no test pixels."""
    rows = cm.counts.sum(axis=1)
    diag = np.diag(cm.counts).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = 100.0 * diag / rows
    return np.where(rows > 0, acc, np.nan)


def average_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class accuracy; classes without test pixels are skipped."""
    if cm.total == 0:
        raise DegenerateDataError("empty confusion matrix", module="evaluation")
    acc = per_class_accuracy(cm)
    missing = np.isnan(acc)
    if missing.any():
        skipped = cm.classes[missing].tolist()
        warnings.warn(f"classes {skipped} have no test pixels; excluded from AA")
    return float(np.mean(acc[~missing]))


def kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement, computed on integer counts.

    kappa = (n*trace - sum_i row_i*col_i) / (n^2 - sum_i row_i*col_i);
    the degenerate case of expected agreement 1 returns 0 with a warning.
    """
    total = cm.total
    if total == 0:
        raise DegenerateDataError("empty confusion matrix", module="evaluation")
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    chance = int(rows @ cols)
    numerator = total * int(np.trace(cm.counts)) - chance
    denominator = total * total - chance
    if denominator == 0:
        warnings.warn("expected agreement is 1; kappa defined as 0")
        return 0.0
    return numerator / denominator


@dataclass(frozen=True)
class RunMetrics:
    """Scores of one sample-train-classify cycle."""

    oa: float
    aa: float
    kappa: float
    per_class: np.ndarray
    seed: int


def score_confusion(cm: ConfusionMatrix, seed: int) -> RunMetrics:
    return RunMetrics(
        oa=overall_accuracy(cm),
        aa=average_accuracy(cm),
        kappa=kappa(cm),
        per_class=per_class_accuracy(cm),
        seed=seed,
    )


@dataclass(frozen=True)
class MetricsReport:
    """Monte-Carlo-averaged scores with their spread."""

    oa: float
    aa: float
    kappa: float
    per_class_accuracy: np.ndarray
    run_count: int
    oa_std: float = 0.0
    aa_std: float = 0.0
    kappa_std: float = 0.0
    per_class_std: np.ndarray | None = None
    runs: tuple[RunMetrics, ...] = ()


def _nan_mean_std(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means/stds ignoring NaN, without all-NaN warnings."""
    valid = ~np.isnan(stack)
    counts = valid.sum(axis=0)
    filled = np.where(valid, stack, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = filled.sum(axis=0) / counts
        var = (np.where(valid, (stack - mean) ** 2, 0.0)).sum(axis=0) / counts
    mean = np.where(counts > 0, mean, np.nan)
    return mean, np.where(counts > 0, np.sqrt(var), np.nan)


def monte_carlo(
    pipeline: Callable[[int], RunMetrics],
    runs: int,
    base_seed: int,
    workers: int = 1,
) -> MetricsReport:
    """Execute `pipeline(seed)` for seeds base_seed..base_seed+runs-1 and average.

    Run failures abort the whole experiment with the run index attached.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    seeds = [base_seed + i for i in range(runs)]

    def guarded(i_seed: tuple[int, int]) -> RunMetrics:
        i, seed = i_seed
        try:
            return pipeline(seed)
        except PipelineError as exc:
            raise type(exc)(
                f"monte carlo run {i} (seed {seed}) failed: {exc}",
                module=exc.module,
            ) from exc
        except Exception as exc:
            raise NumericalError(
                f"monte carlo run {i} (seed {seed}) failed: {exc}",
                module="evaluation",
            ) from exc

    jobs = list(enumerate(seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, jobs))
    else:
        results = [guarded(job) for job in jobs]

    oa = np.array([r.oa for r in results])
    aa = np.array([r.aa for r in results])
    kap = np.array([r.kappa for r in results])
    per_class = np.vstack([r.per_class for r in results])
    class_mean, class_std = _nan_mean_std(per_class)
    return MetricsReport(
        oa=float(np.mean(oa)),
        aa=float(np.mean(aa)),
        kappa=float(np.mean(kap)),
        per_class_accuracy=class_mean,
        run_count=runs,
        oa_std=float(np.std(oa)),
        aa_std=float(np.std(aa)),
        kappa_std=float(np.std(kap)),
        per_class_std=class_std,
        runs=tuple(results),
    )


def format_metrics_table(
    report: MetricsReport, classes: np.ndarray | None = None
) -> str:
    """Aligned per-class/OA/AA/kappa table averaged over all runs."""
    lines = [
        f"runs: {report.run_count}",
        f"{'class':>8}  {'accuracy%':>10}  {'std':>8}",
    ]
    k = report.per_class_accuracy.size
    names = classes if classes is not None else np.arange(1, k + 1)
    stds = (
        report.per_class_std
        if report.per_class_std is not None
        else np.zeros(k)
    )
    for name, acc, std in zip(names, report.per_class_accuracy, stds):
        acc_text = f"{acc:10.4f}" if np.isfinite(acc) else f"{'n/a':>10}"
        std_text = f"{std:8.4f}" if np.isfinite(std) else f"{'n/a':>8}"
        lines.append(f"{name:>8}  {acc_text}  {std_text}")
    lines.append(f"{'OA':>8}  {report.oa:10.4f}  {report.oa_std:8.4f}")
    lines.append(f"{'AA':>8}  {report.aa:10.4f}  {report.aa_std:8.4f}")
    lines.append(f"{'kappa':>8}  {report.kappa:10.6f}  {report.kappa_std:8.6f}")
    return "\n".join(lines) + "\n"


def format_metrics_csv(report: MetricsReport) -> str:
    """One CSV row per run plus a mean summary row."""
    k = report.per_class_accuracy.size
    header = "run,seed,oa,aa,kappa," + ",".join(f"class_{i + 1}" for i in range(k))
    lines = [header]

    def fmt(value: float) -> str:
        return "" if not np.isfinite(value) else f"{value:.6f}"

    for i, run in enumerate(report.runs):
        cells = [str(i), str(run.seed), fmt(run.oa), fmt(run.aa), fmt(run.kappa)]
        cells += [fmt(v) for v in run.per_class]
        lines.append(",".join(cells))
    summary = ["mean", "", fmt(report.oa), fmt(report.aa), fmt(report.kappa)]
    summary += [fmt(v) for v in report.per_class_accuracy]
    lines.append(",".join(summary))
    return "\n".join(lines) + "\n"
