"""Polynomial-kernel soft-margin SVM with one-vs-one multiclass voting.

The dual problems are solved by sequential minimal optimization with
second-order working-set selection: each step picks the most violating
sample and the partner giving the largest objective decrease, updates the
pair analytically inside the box, and stops once the duality gap between
the most violating pair drops below the tolerance.
"""

from __future__ import annotations

import warnings
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .datacube import LabelMap
from .errors import DataIOError, DegenerateDataError, NumericalError
from .profiles import ScaledFeatures

_MODEL_VERSION = 1

#: default SMO stopping tolerance (duality-gap threshold)
DEFAULT_TOL = 1e-3

#: default kernel cache budget per binary problem, in megabytes
DEFAULT_CACHE_MB = 512.0


@dataclass(frozen=True)
class KernelParams:
    """Polynomial kernel (gamma * <x, y> + coef0)^degree plus box penalty.

    `gamma=None` means "resolve to 1 / feature count" at training time.
    """

    degree: int = 3
    gamma: float | None = None
    coef0: float = 0.0
    penalty_c: float = 1.0

    def __post_init__(self):
        if self.degree < 1 or int(self.degree) != self.degree:
            raise ValueError(f"degree must be a positive integer, got {self.degree}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.penalty_c <= 0:
            raise ValueError(f"penalty C must be positive, got {self.penalty_c}")

    def resolved(self, dim: int) -> "KernelParams":
        if self.gamma is not None:
            return self
        return replace(self, gamma=1.0 / dim)


def polynomial_kernel(x: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    """Kernel value for two feature vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if params.gamma is None:
        params = params.resolved(x.shape[0])
    return float((params.gamma * (x @ y) + params.coef0) ** params.degree)


def kernel_matrix(x: np.ndarray, y: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel values for all row pairs of two sample matrices."""
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if params.gamma is None:
        params = params.resolved(x.shape[1])
    return (params.gamma * (x @ y.T) + params.coef0) ** params.degree


class _KernelCache:
    """Row-wise kernel matrix access with a bounded memory footprint.

    Small problems precompute the full matrix; larger ones keep an LRU
    cache of rows, recomputing on miss.
    """

    def __init__(self, x: np.ndarray, params: KernelParams, cache_mb: float):
        self._x = x
        self._params = params
        n = x.shape[0]
        budget_rows = max(2, int(cache_mb * 2**20 / (8 * max(n, 1))))
        self._full = None
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self._capacity = budget_rows
        if n <= budget_rows:
            self._full = kernel_matrix(x, x, params)
            self.diagonal = np.diag(self._full).copy()
        else:
            self.diagonal = (
                params.gamma * np.einsum("ij,ij->i", x, x) + params.coef0
            ) ** params.degree

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        row = kernel_matrix(self._x[i : i + 1], self._x, self._params)[0]
        self._rows[i] = row
        if len(self._rows) > self._capacity:
            self._rows.popitem(last=False)
        return row


def _smo_solve(
    cache: _KernelCache,
    y: np.ndarray,
    penalty_c: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, float]:
    """Solve min 1/2 a'Qa - sum(a) s.t. 0 <= a <= C, y'a = 0, Q = yy' * K.

    Returns (alpha, bias, final duality gap). The per-sample quantity
    beta_i = y_i - u_i (u is the biasless decision value) is the bias that
    would put sample i exactly on the margin; optimality means every
    unbounded-up sample has beta <= b and every unbounded-down sample has
    beta >= b, so the gap max(beta_up) - min(beta_low) drives both the
    working-set choice and the stopping rule.
    """
    n = y.size
    C = penalty_c
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    gap = np.inf
    tau = 1e-12

    for _ in range(max_iter):
        beta = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        up_idx = np.flatnonzero(up)
        i = int(up_idx[np.argmax(beta[up_idx])])
        m = beta[i]
        low_idx = np.flatnonzero(low)
        M = float(beta[low_idx].min())
        gap = m - M
        if gap <= tol:
            break

        k_i = cache.row(i)
        cand = low_idx[beta[low_idx] < m]
        b_vals = m - beta[cand]
        a_vals = cache.diagonal[i] + cache.diagonal[cand] - 2.0 * k_i[cand]
        a_vals = np.where(a_vals > tau, a_vals, tau)
        t = int(cand[np.argmax(b_vals * b_vals / a_vals)])

        a_it = cache.diagonal[i] + cache.diagonal[t] - 2.0 * k_i[t]
        step = (m - beta[t]) / max(a_it, tau)
        room_i = (C - alpha[i]) if pos[i] else alpha[i]
        room_t = alpha[t] if pos[t] else (C - alpha[t])
        step = min(step, room_i, room_t)

        k_t = cache.row(t)
        alpha[i] = min(max(alpha[i] + y[i] * step, 0.0), C)
        alpha[t] = min(max(alpha[t] - y[t] * step, 0.0), C)
        grad += step * y * (k_i - k_t)
    else:
        warnings.warn(
            f"SMO hit the iteration cap ({max_iter}) with gap {gap:.3e}; "
            "returning the current iterate"
        )

    beta = -y * grad
    free = (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    if free.any():
        bias = float(beta[free].mean())
    else:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        hi = beta[up].max() if up.any() else 0.0
        lo = beta[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, float(gap)


@dataclass(frozen=True)
class BinaryModel:
    """Dual solution of one two-class problem.

    `alphas` are the signed multipliers alpha_i * y_i of the support
    vectors, so the decision value of x is K(support_vectors, x) @ alphas
    + bias and the sign separates the two classes.
    """

    support_vectors: np.ndarray
    alphas: np.ndarray
    bias: float
    params: KernelParams
    sv_indices: np.ndarray | None = None
    gap: float = 0.0

    def __post_init__(self):
        if self.support_vectors.shape[0] != self.alphas.shape[0]:
            raise ValueError("one multiplier per support vector required")
        if self.support_vectors.shape[0] < 1:
            raise ValueError("a trained machine must keep at least one support vector")
        if np.abs(self.alphas).max() > self.params.penalty_c * (1 + 1e-9):
            raise ValueError("multiplier magnitude exceeds the box constraint")

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"dimension mismatch: {x.shape[1]} vs {self.support_vectors.shape[1]}"
            )
        return kernel_matrix(x, self.support_vectors, self.params) @ self.alphas + self.bias


def train_binary(
    features: np.ndarray,
    labels: np.ndarray,
    params: KernelParams,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    cache_mb: float = DEFAULT_CACHE_MB,
) -> BinaryModel:
    """Fit one soft-margin machine on +/-1 labels."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, d) with one label per row")
    if x.shape[0] < 2:
        raise DegenerateDataError("need at least 2 samples", module="svm")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("binary labels must be +1 or -1")
    if np.unique(y).size < 2:
        raise DegenerateDataError(
            "both classes must be present in a binary problem", module="svm"
        )
    params = params.resolved(x.shape[1])
    if max_iter is None:
        max_iter = max(100_000, 100 * x.shape[0])
    cache = _KernelCache(x, params, cache_mb)
    alpha, bias, gap = _smo_solve(cache, y, params.penalty_c, tol, max_iter)
    keep = alpha > 1e-12 * params.penalty_c
    if not keep.any():
        raise NumericalError("optimizer returned an empty support set", module="svm")
    return BinaryModel(
        support_vectors=x[keep].copy(),
        alphas=(alpha * y)[keep],
        bias=bias,
        params=params,
        sv_indices=np.flatnonzero(keep),
        gap=gap,
    )


def kkt_violation(model: BinaryModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Largest margin-condition violation of a trained machine on its training set."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    u = model.decision_values(x) - model.bias
    beta = y - u
    alpha = np.zeros(y.size)
    alpha[model.sv_indices] = np.abs(model.alphas)
    C = model.params.penalty_c
    pos = y > 0
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (pos & (alpha > 0)) | (~pos & (alpha < C))
    hi = (beta[up] - model.bias).max(initial=0.0)
    lo = (model.bias - beta[low]).max(initial=0.0)
    return float(max(hi, lo, 0.0))


@dataclass(frozen=True)
class SvmModel:
    """One-vs-one ensemble: one binary machine per unordered class pair."""

    classes: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    machines: tuple[BinaryModel, ...]
    scaling_min: np.ndarray
    scaling_max: np.ndarray

    def __post_init__(self):
        k = self.classes.size
        expected = k * (k - 1) // 2
        if len(self.machines) != expected or len(self.pairs) != expected:
            raise ValueError(
                f"{k} classes require {expected} machines, got {len(self.machines)}"
            )

    @property
    def dim(self) -> int:
        return self.machines[0].support_vectors.shape[1]


def train_multiclass(
    scaled: ScaledFeatures,
    labels: LabelMap,
    train_indices: np.ndarray,
    params: KernelParams,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
    cache_mb: float = DEFAULT_CACHE_MB,
) -> SvmModel:
    """Train one machine per class pair on that pair's training pixels only."""
    train_indices = np.asarray(train_indices, dtype=np.int64)
    y_train = labels.flat()[train_indices]
    classes = np.unique(y_train)
    classes = classes[classes > 0]
    if classes.size < 2:
        raise DegenerateDataError(
            f"need at least 2 classes to train, got {classes.size}", module="svm"
        )
    params = params.resolved(scaled.dim)
    pairs = list(combinations(classes.tolist(), 2))

    def fit_pair(pair: tuple[int, int]) -> BinaryModel:
        ca, cb = pair
        mask = (y_train == ca) | (y_train == cb)
        idx = train_indices[mask]
        x = scaled.values[idx]
        y = np.where(y_train[mask] == ca, 1.0, -1.0)
        return train_binary(x, y, params, tol=tol, cache_mb=cache_mb)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            machines = list(pool.map(fit_pair, pairs))
    else:
        machines = [fit_pair(pair) for pair in pairs]

    return SvmModel(
        classes=classes,
        pairs=tuple(pairs),
        machines=tuple(machines),
        scaling_min=scaled.feature_min.copy(),
        scaling_max=scaled.feature_max.copy(),
    )


def _vote(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Vote counts per class for each query row; decision >= 0 backs the lower label."""
    votes = np.zeros((x.shape[0], model.classes.size), dtype=np.int64)
    index_of = {int(c): i for i, c in enumerate(model.classes)}
    for (ca, cb), machine in zip(model.pairs, model.machines):
        decision = machine.decision_values(x)
        votes[:, index_of[ca]] += decision >= 0
        votes[:, index_of[cb]] += decision < 0
    return votes


def predict(model: SvmModel, x: np.ndarray) -> int:
    """Majority-vote label for one feature vector; ties go to the lowest label."""
    return int(predict_batch(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def predict_batch(model: SvmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {model.dim}")
    votes = _vote(model, x)
    return model.classes[np.argmax(votes, axis=1)]


def classify_map(model: SvmModel, scaled: ScaledFeatures, mask: LabelMap) -> LabelMap:
    """Predict every labeled pixel of the mask; background stays 0."""
    if (scaled.rows, scaled.cols) != (mask.rows, mask.cols):
        raise ValueError(
            f"feature raster {scaled.rows}x{scaled.cols} does not match "
            f"mask {mask.rows}x{mask.cols}"
        )
    flat = mask.flat()
    idx = np.flatnonzero(flat > 0)
    out = np.zeros(flat.size, dtype=np.int32)
    if idx.size:
        out[idx] = predict_batch(model, scaled.values[idx])
    return LabelMap(mask.rows, mask.cols, out.reshape(mask.rows, mask.cols))


def save_model(model: SvmModel, path: str | Path) -> None:
    """Serialize the ensemble so classification can rerun without retraining."""
    payload: dict[str, np.ndarray] = {
        "format_version": np.array([_MODEL_VERSION]),
        "classes": model.classes.astype(np.int64),
        "pairs": np.array(model.pairs, dtype=np.int64).reshape(-1, 2),
        "scaling_min": model.scaling_min,
        "scaling_max": model.scaling_max,
        "kernel": np.array(
            [
                float(model.machines[0].params.degree),
                float(model.machines[0].params.gamma),
                float(model.machines[0].params.coef0),
                float(model.machines[0].params.penalty_c),
            ]
        ),
        "biases": np.array([m.bias for m in model.machines]),
    }
    for i, machine in enumerate(model.machines):
        payload[f"sv_{i}"] = machine.support_vectors
        payload[f"alpha_{i}"] = machine.alphas
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_model(path: str | Path) -> SvmModel:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"model file not found: {path}", module="svm")
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"][0])
        if version != _MODEL_VERSION:
            raise DataIOError(f"unsupported model version {version}", module="svm")
        degree, gamma, coef0, penalty_c = data["kernel"]
        params = KernelParams(
            degree=int(degree), gamma=float(gamma), coef0=float(coef0),
            penalty_c=float(penalty_c),
        )
        pairs = tuple((int(a), int(b)) for a, b in data["pairs"])
        biases = data["biases"]
        machines = tuple(
            BinaryModel(
                support_vectors=data[f"sv_{i}"],
                alphas=data[f"alpha_{i}"],
                bias=float(biases[i]),
                params=params,
            )
            for i in range(len(pairs))
        )
        return SvmModel(
            classes=data["classes"],
            pairs=pairs,
            machines=machines,
            scaling_min=data["scaling_min"],
            scaling_max=data["scaling_max"],
        )
