"""End-to-end pipeline driver.

Reads a flat key=value config file (flags override file values), runs
load -> band removal -> spectral PCA -> filter design -> profile ->
repeated sample/train/classify/score cycles, and writes the metrics
table, per-run CSV, final classification map, eigenvalue dump, and
trained model under the output directory.
"""

from __future__ import annotations

import argparse
import colorsys
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import profiles, svm
from .datacube import (
    Image,
    LabelMap,
    expand_band_ranges,
    load_cube,
    load_labels,
    remove_bands,
    write_class_map,
)
from .errors import ConfigError, PipelineError
from .evaluation import (
    MetricsReport,
    RunMetrics,
    SamplingScheme,
    confusion,
    draw_training_set,
    format_metrics_csv,
    format_metrics_table,
    monte_carlo,
    score_confusion,
)
from .filters import FilterSelection, FilterSet, design_filter_set
from .profiles import build_profile, fit_feature_scaling
from .spectral import (
    PcStack,
    fit_spectral_pca,
    format_eigenspectrum,
    project,
    select_components,
)
from .svm import KernelParams, classify_map, save_model, train_multiclass


@dataclass(frozen=True)
class PipelineConfig:
    """Validated settings for one pipeline invocation."""

    cube: Path
    labels: Path
    cube_header: Path | None = None
    removed_bands: tuple[int, ...] = ()
    variance_fraction: float = 0.90
    window: int = 35
    num_filters: int | None = None
    filter_energy_fraction: float = 0.99
    degree: int = 3
    gamma: float | None = None
    coef0: float = 0.0
    penalty_c: float = 1.0
    proportion: float = 0.10
    min_per_class: int = 3
    runs: int = 50
    seed: int = 1
    threads: int = 1
    out: Path = Path("out")
    filters_per_component: bool = False
    append_pcs: bool = False

    def kernel_params(self) -> KernelParams:
        return KernelParams(
            degree=self.degree,
            gamma=self.gamma,
            coef0=self.coef0,
            penalty_c=self.penalty_c,
        )


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_gamma(text: str) -> float | None:
    if text.strip().lower() in ("auto", ""):
        return None
    return float(text)


_CONFIG_PARSERS = {
    "cube": Path,
    "cube_header": Path,
    "labels": Path,
    "removed_bands": str,
    "variance_fraction": float,
    "window": int,
    "num_filters": int,
    "filter_energy_fraction": float,
    "degree": int,
    "gamma": _parse_gamma,
    "coef0": float,
    "penalty_c": float,
    "scheme": float,
    "min_per_class": int,
    "runs": int,
    "seed": int,
    "threads": int,
    "out": Path,
    "filters_per_component": _parse_bool,
    "append_pcs": _parse_bool,
}

_KEY_TO_FIELD = {"scheme": "proportion"}


def parse_config_file(path: str | Path) -> dict[str, tuple[str, int]]:
    """Raw key -> (value, line number) pairs from a flat config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", module="cli")
    entries: dict[str, tuple[str, int]] = {}
    for line_no, raw_line in enumerate(path.read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {line_no}: expected key=value, got {raw_line!r}", module="cli"
            )
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}", module="cli")
        entries[key] = (value.strip(), line_no)
    return entries


def build_config(entries: dict[str, tuple[str, int]]) -> PipelineConfig:
    """Convert raw entries to a PipelineConfig, applying defaults and checks."""
    values: dict[str, object] = {}
    for key, (text, line_no) in entries.items():
        where = f"line {line_no}: " if line_no > 0 else ""
        try:
            parsed = _CONFIG_PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"{where}{key}: {exc}", module="cli")
        if key == "removed_bands":
            parsed = tuple(expand_band_ranges(text))
        values[_KEY_TO_FIELD.get(key, key)] = parsed

    missing = [k for k in ("cube", "labels") if k not in values]
    if missing:
        raise ConfigError(
            f"missing required config keys: {', '.join(missing)}", module="cli"
        )
    config = PipelineConfig(**values)

    problems = []
    if config.window < 1 or config.window % 2 == 0:
        problems.append(f"window must be odd and positive, got {config.window}")
    if not 0 < config.variance_fraction <= 1:
        problems.append(
            f"variance_fraction must be in (0, 1], got {config.variance_fraction}"
        )
    if not 0 < config.proportion <= 1:
        problems.append(f"scheme proportion must be in (0, 1], got {config.proportion}")
    if not 0 < config.filter_energy_fraction <= 1:
        problems.append(
            "filter_energy_fraction must be in (0, 1], "
            f"got {config.filter_energy_fraction}"
        )
    if config.num_filters is not None and config.num_filters < 1:
        problems.append(f"num_filters must be >= 1, got {config.num_filters}")
    if config.degree < 1:
        problems.append(f"degree must be >= 1, got {config.degree}")
    if config.gamma is not None and config.gamma <= 0:
        problems.append(f"gamma must be positive or 'auto', got {config.gamma}")
    if config.penalty_c <= 0:
        problems.append(f"penalty_c must be positive, got {config.penalty_c}")
    if config.min_per_class < 1:
        problems.append(f"min_per_class must be >= 1, got {config.min_per_class}")
    if config.runs < 1:
        problems.append(f"runs must be >= 1, got {config.runs}")
    if config.threads < 1:
        problems.append(f"threads must be >= 1, got {config.threads}")
    if problems:
        raise ConfigError("; ".join(problems), module="cli")
    return config


def validate_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a config file with no flag overrides."""
    return build_config(parse_config_file(path))


def default_palette(classes: np.ndarray) -> dict[int, tuple[int, int, int]]:
    """Deterministic, well-separated colors: golden-ratio hue steps."""
    palette = {}
    for i, class_id in enumerate(sorted(int(c) for c in classes)):
        hue = (i * 0.618033988749895) % 1.0
        r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 1.0)
        palette[class_id] = (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))
    return palette


def classification_run(
    features: profiles.EnergyProfile | np.ndarray,
    rows: int,
    cols: int,
    labels: LabelMap,
    seed: int,
    proportion: float,
    min_per_class: int,
    params: KernelParams,
    workers: int = 1,
) -> tuple[RunMetrics, LabelMap, svm.SvmModel]:
    """One sample -> scale -> train -> classify -> score cycle."""
    scheme = SamplingScheme(proportion, min_per_class, seed)
    train_idx, test_idx = draw_training_set(labels, scheme)
    scaled = fit_feature_scaling(features, train_idx, rows, cols)
    model = train_multiclass(scaled, labels, train_idx, params, workers=workers)
    predicted = classify_map(model, scaled, labels)
    cm = confusion(predicted, labels, test_idx)
    return score_confusion(cm, seed), predicted, model


def _build_features(
    config: PipelineConfig, pcs: PcStack
) -> tuple[np.ndarray, FilterSet]:
    """Profile feature matrix plus the (first) filter set used."""
    selection = FilterSelection(
        num_filters=config.num_filters,
        energy_fraction=config.filter_energy_fraction,
    )
    first_set: FilterSet | None = None
    if config.filters_per_component:
        blocks = []
        for p in range(pcs.k):
            plane_stack = PcStack(pcs.rows, pcs.cols, 1, pcs.planes[p : p + 1])
            filter_set = design_filter_set(_plane_image(pcs, p), config.window, selection)
            first_set = first_set or filter_set
            blocks.append(build_profile(plane_stack, filter_set).values)
        features = np.hstack(blocks)
    else:
        filter_set = design_filter_set(_plane_image(pcs, 0), config.window, selection)
        first_set = filter_set
        features = build_profile(pcs, filter_set).values
    if config.append_pcs:
        scores = pcs.planes.reshape(pcs.k, -1).T
        features = np.hstack([features, scores])
    return features, first_set


def _plane_image(pcs: PcStack, index: int) -> Image:
    return Image(pcs.rows, pcs.cols, np.array(pcs.planes[index]))


def run_pipeline(config: PipelineConfig) -> MetricsReport:
    """Execute the full pipeline and write all artifacts."""
    started = time.time()
    cube = load_cube(config.cube, config.cube_header)
    if config.removed_bands:
        cube = remove_bands(cube, list(config.removed_bands))
    labels = load_labels(config.labels, cube.rows, cube.cols)
    _log(f"cube {cube.rows}x{cube.cols}x{cube.bands}, "
         f"{labels.classes.size} classes")

    pca = fit_spectral_pca(cube)
    k = select_components(pca, config.variance_fraction)
    pcs = project(cube, pca, k)
    _log(f"retained {k} components for {100 * config.variance_fraction:.1f}% variance")

    features, filter_set = _build_features(config, pcs)
    _log(f"filter bank: {filter_set.n} filters of {config.window}x{config.window}; "
         f"profile dim {features.shape[1]}")

    params = config.kernel_params()
    final_seed = config.seed + config.runs - 1
    captured: dict[str, object] = {}
    monte_workers = min(config.threads, config.runs)
    pair_workers = config.threads if monte_workers == 1 else 1

    def run_once(seed: int) -> RunMetrics:
        metrics, predicted, model = classification_run(
            features,
            cube.rows,
            cube.cols,
            labels,
            seed,
            config.proportion,
            config.min_per_class,
            params,
            workers=pair_workers,
        )
        if seed == final_seed:
            captured["map"] = predicted
            captured["model"] = model
        return metrics

    report = monte_carlo(run_once, config.runs, config.seed, workers=monte_workers)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.txt").write_text(format_metrics_table(report, labels.classes))
    (out / "metrics.csv").write_text(format_metrics_csv(report))
    spectrum_text = format_eigenspectrum(pca)
    spectrum_text += "\nfilter energies\n" + "".join(
        f"{i + 1:>4}  {e:.6e}\n" for i, e in enumerate(filter_set.energies)
    )
    (out / "eigenspectrum.txt").write_text(spectrum_text)
    write_class_map(captured["map"], default_palette(labels.classes), out / "classmap.ppm")
    save_model(captured["model"], out / "model.bin")

    _log(
        f"OA {report.oa:.2f}  AA {report.aa:.2f}  kappa {report.kappa:.4f}  "
        f"({config.runs} runs, {time.time() - started:.1f}s)"
    )
    return report


def _log(message: str) -> None:
    print(f"eigenprofile: {message}", file=sys.stderr)


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenprofile",
        description=(
            "Learn an orthogonal maximum-energy spatial filter bank from a "
            "hyperspectral cube, build spectral-spatial features, and score "
            "an SVM classifier over repeated random training draws."
        ),
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--cube", help="raw cube file")
    parser.add_argument("--cube-header", dest="cube_header", help="cube header file")
    parser.add_argument("--labels", help="ground-truth raster (raw+hdr or PGM)")
    parser.add_argument("--removed-bands", dest="removed_bands",
                        help="1-based band ranges to drop, e.g. 104-108,150-163,220")
    parser.add_argument("--scheme", type=float, help="training proportion in (0, 1]")
    parser.add_argument("--runs", type=int, help="number of Monte Carlo runs")
    parser.add_argument("--window", type=int, help="filter window size c (odd)")
    parser.add_argument("--num-filters", dest="num_filters", type=int,
                        help="fixed filter count (default: energy rule)")
    parser.add_argument("--variance-fraction", dest="variance_fraction", type=float,
                        help="spectral variance fraction for component selection")
    parser.add_argument("--min-per-class", dest="min_per_class", type=int)
    parser.add_argument("--seed", type=int, help="base seed for the first run")
    parser.add_argument("--threads", type=int, help="worker count (1 = sequential)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--filters-per-component", dest="filters_per_component",
                        action="store_true", default=None,
                        help="learn a separate filter bank per component")
    parser.add_argument("--append-pcs", dest="append_pcs",
                        action="store_true", default=None,
                        help="append the component values to the feature vector")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        entries = parse_config_file(args.config) if args.config else {}
        for key in _CONFIG_PARSERS:
            flag_value = getattr(args, key, None)
            if flag_value is not None:
                entries[key] = (str(flag_value), 0)
        config = build_config(entries)
        run_pipeline(config)
        return 0
    except PipelineError as exc:
        where = exc.module or "pipeline"
        print(f"eigenprofile: {where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - defensive
        print(f"eigenprofile: unexpected error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())
