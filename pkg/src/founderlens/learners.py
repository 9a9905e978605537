"""Four model families behind one train/predict contract.

Families: general_linear (least squares), random_forest (bootstrap + per-node
feature sampling), gradient_boosting (squared-error stagewise trees), and
support_vector (linear epsilon-insensitive regression on internally
standardized features). Hyperparameters come from a grid; every grid point is
scored by pooled K-fold out-of-fold adjusted R-squared and the winner is refit
on all rows. Fitting is deterministic given the LearnerSpec seed.
"""
from __future__ import annotations

import collections.abc as cabc
import itertools
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, SampleSizeError, ValidationError
from .seeds import derive_seed
from .tree import RegressionTree, fit_regression_tree, predict_tree

log = logging.getLogger(__name__)

FAMILIES = ("general_linear", "random_forest", "gradient_boosting", "support_vector")

SCALE_MIN, SCALE_MAX = 1.0, 5.0

DEFAULT_KFOLDS = 10
MIN_TRAIN_ROWS = 10

# Conventional defaults; the config layer may override any axis.
DEFAULT_GRIDS: dict[str, dict[str, tuple]] = {
    "general_linear": {},
    "random_forest": {"trees": (100, 300), "max_features": ("third", "sqrt")},
    "gradient_boosting": {"trees": (200, 500), "depth": (2, 3), "learning_rate": (0.05, 0.1)},
    "support_vector": {"c": (0.1, 1.0, 10.0), "epsilon": (0.05, 0.1)},
}


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    grid: Mapping[str, tuple]
    seed: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown learner family {self.family!r}")
        if self.family == "random_forest" and not self.grid:
            raise ValidationError("random_forest is stochastic and needs a non-empty grid")
        for axis, values in self.grid.items():
            if not values:
                raise ValidationError(f"grid axis {axis!r} has no candidate values")


def default_spec(family: str, seed: int) -> LearnerSpec:
    return LearnerSpec(family=family, grid=dict(DEFAULT_GRIDS[family]), seed=seed)


def expand_grid(grid: Mapping[str, tuple]) -> list[dict]:
    """All grid points in a fixed order: axes sorted by name, values as given."""
    axes = sorted(grid)
    points = []
    for combo in itertools.product(*(grid[a] for a in axes)):
        points.append(dict(zip(axes, combo)))
    return points or [{}]


@dataclass(frozen=True)
class TraitModel:
    family: str
    trait: str
    feature_names: tuple
    parameters: Mapping
    chosen_hyperparameters: Mapping
    in_sample_adj_r2: float
    resample_adj_r2: float
    seed: int


def adjusted_r2(r2: float, n: int, p: int) -> float:
    """1 - (1-r2)(n-1)/(n-p-1); needs n > p + 1 to be defined."""
    if n <= p + 1:
        raise SampleSizeError(f"adjusted R2 undefined for n={n}, p={p}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def _r2(y: np.ndarray, pred: np.ndarray) -> float | None:
    """Plain R2; None when y is constant (caller applies the 0.0 convention)."""
    total = float(((y - y.mean()) ** 2).sum())
    if total == 0.0:
        return None
    sse = float(((y - pred) ** 2).sum())
    return 1.0 - sse / total


def _resolve_max_features(setting, p: int) -> int:
    if setting == "sqrt":
        return max(1, round(math.sqrt(p)))
    if setting == "third":
        return max(1, round(p / 3))
    if isinstance(setting, int):
        return min(max(1, setting), p)
    if isinstance(setting, float):
        return min(max(1, round(setting * p)), p)
    raise ValidationError(f"bad max_features setting {setting!r}")


# ---------------------------------------------------------------- families

def _fit_general_linear(X: np.ndarray, y: np.ndarray) -> dict:
    design = np.column_stack([np.ones(len(y)), X])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        # jittered ridge keeps the solve defined; intercept stays unpenalized
        log.warning("singular design for general_linear; falling back to ridge jitter")
        penalty = np.eye(design.shape[1])
        penalty[0, 0] = 0.0
        lam = 1e-8 * max(float(np.trace(design.T @ design)) / design.shape[1], 1.0)
        coef = np.linalg.solve(design.T @ design + lam * penalty, design.T @ y)
    return {"intercept": float(coef[0]), "coefficients": [float(c) for c in coef[1:]]}


def _predict_general_linear(params: Mapping, X: np.ndarray) -> np.ndarray:
    return params["intercept"] + X @ np.asarray(params["coefficients"], dtype=float)


def _fit_random_forest(X: np.ndarray, y: np.ndarray, hp: Mapping, seed: int) -> dict:
    n, p = X.shape
    n_trees = int(hp.get("trees", 100))
    m = _resolve_max_features(hp.get("max_features", "third"), p)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(derive_seed(seed, "tree", t))
        rows = rng.integers(0, n, size=n)
        tree = fit_regression_tree(
            X[rows], y[rows], max_features=m if m < p else None, rng=rng
        )
        trees.append(tree.to_dict())
    return {"trees": trees}


def _predict_random_forest(params: Mapping, X: np.ndarray) -> np.ndarray:
    acc = np.zeros(X.shape[0])
    for payload in params["trees"]:
        acc += predict_tree(RegressionTree.from_dict(payload), X)
    return acc / len(params["trees"])


def _fit_gradient_boosting(X: np.ndarray, y: np.ndarray, hp: Mapping, seed: int) -> dict:
    n_trees = int(hp.get("trees", 200))
    depth = int(hp.get("depth", 3))
    lr = float(hp.get("learning_rate", 0.1))
    base = float(y.mean())
    current = np.full(len(y), base)
    trees = []
    loss_curve = []
    for _ in range(n_trees):
        residual = y - current
        tree = fit_regression_tree(X, residual, max_depth=depth)
        current = current + lr * predict_tree(tree, X)
        trees.append(tree.to_dict())
        loss_curve.append(float(((y - current) ** 2).mean()))
    return {"base": base, "learning_rate": lr, "trees": trees, "loss_curve": loss_curve}


def _predict_gradient_boosting(params: Mapping, X: np.ndarray) -> np.ndarray:
    out = np.full(X.shape[0], params["base"])
    lr = params["learning_rate"]
    for payload in params["trees"]:
        out += lr * predict_tree(RegressionTree.from_dict(payload), X)
    return out


def _svr_objective(w, b, Z, y, c, epsilon) -> float:
    r = y - (Z @ w + b)
    hinge = np.maximum(np.abs(r) - epsilon, 0.0)
    return 0.5 * float(w @ w) + c * float(hinge.sum())


def _fit_svr_path(
    Z: np.ndarray, y: np.ndarray, c: float, epsilon: float, max_epochs: int = 500
) -> tuple[np.ndarray, float, list]:
    """Full-batch sub-gradient descent with backtracking; the Armijo test
    makes the objective trace non-increasing by construction."""
    w = np.zeros(Z.shape[1])
    b = float(y.mean())
    obj = _svr_objective(w, b, Z, y, c, epsilon)
    trace = [obj]
    for _ in range(max_epochs):
        r = y - (Z @ w + b)
        active = np.abs(r) > epsilon
        sign = np.sign(r) * active
        gw = w - c * (Z.T @ sign)
        gb = -c * float(sign.sum())
        gnorm2 = float(gw @ gw) + gb * gb
        if gnorm2 <= 1e-18:
            break
        step = 1.0 / (1.0 + c * len(y))
        accepted = False
        for _ in range(40):
            w_new = w - step * gw
            b_new = b - step * gb
            obj_new = _svr_objective(w_new, b_new, Z, y, c, epsilon)
            if obj_new <= obj - 1e-4 * step * gnorm2:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break
        improvement = obj - obj_new
        w, b, obj = w_new, b_new, obj_new
        trace.append(obj)
        if improvement <= 1e-10 * max(1.0, abs(obj)):
            break
    return w, b, trace


def _fit_support_vector(X: np.ndarray, y: np.ndarray, hp: Mapping) -> dict:
    c = float(hp.get("c", 1.0))
    epsilon = float(hp.get("epsilon", 0.1))
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    Z = (X - mean) / scale
    w, b, trace = _fit_svr_path(Z, y, c, epsilon)
    return {
        "weights": [float(v) for v in w],
        "intercept": float(b),
        "standardize_mean": [float(v) for v in mean],
        "standardize_scale": [float(v) for v in scale],
        "objective_trace": [float(v) for v in trace],
    }


def _predict_support_vector(params: Mapping, X: np.ndarray) -> np.ndarray:
    mean = np.asarray(params["standardize_mean"], dtype=float)
    scale = np.asarray(params["standardize_scale"], dtype=float)
    w = np.asarray(params["weights"], dtype=float)
    return ((X - mean) / scale) @ w + params["intercept"]


def _fit_family(family: str, X: np.ndarray, y: np.ndarray, hp: Mapping, seed: int) -> dict:
    if family == "general_linear":
        return _fit_general_linear(X, y)
    if family == "random_forest":
        return _fit_random_forest(X, y, hp, seed)
    if family == "gradient_boosting":
        return _fit_gradient_boosting(X, y, hp, seed)
    if family == "support_vector":
        return _fit_support_vector(X, y, hp)
    raise ValidationError(f"unknown learner family {family!r}")


def predict_matrix(model: TraitModel, X: np.ndarray) -> np.ndarray:
    """Raw (unclamped) predictions for rows aligned with feature_names."""
    X = np.asarray(X, dtype=float)
    if model.family == "general_linear":
        return _predict_general_linear(model.parameters, X)
    if model.family == "random_forest":
        return _predict_random_forest(model.parameters, X)
    if model.family == "gradient_boosting":
        return _predict_gradient_boosting(model.parameters, X)
    if model.family == "support_vector":
        return _predict_support_vector(model.parameters, X)
    raise ValidationError(f"unknown learner family {model.family!r}")


# ---------------------------------------------------------------- training

def _validate_training_data(X: np.ndarray, y: np.ndarray):
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("X rows must align with y")
    if X.shape[0] < MIN_TRAIN_ROWS:
        raise SampleSizeError(f"training needs at least {MIN_TRAIN_ROWS} rows, got {X.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("training data contains non-finite values")


def kfold_resample_adj_r2(
    spec: LearnerSpec, X: np.ndarray, y: np.ndarray, k: int = DEFAULT_KFOLDS
) -> float:
    """Pooled out-of-fold adjusted R2 for one pinned hyperparameter point."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 2 * k:
        raise SampleSizeError(f"K-fold evaluation needs at least {2 * k} rows, got {X.shape[0]}")
    points = expand_grid(spec.grid)
    if len(points) != 1:
        raise ValidationError("kfold evaluation needs the grid pinned to one point")
    hp = points[0]
    rng = np.random.default_rng(derive_seed(spec.seed, "cv", k))
    order = rng.permutation(X.shape[0])
    folds = np.array_split(order, k)
    pooled = np.empty_like(y)
    for j, fold in enumerate(folds):
        train_rows = np.setdiff1d(order, fold)
        params = _fit_family(
            spec.family, X[train_rows], y[train_rows], hp, derive_seed(spec.seed, "fold", j)
        )
        model = TraitModel(
            family=spec.family,
            trait="",
            feature_names=(),
            parameters=params,
            chosen_hyperparameters=hp,
            in_sample_adj_r2=0.0,
            resample_adj_r2=0.0,
            seed=spec.seed,
        )
        pooled[fold] = predict_matrix(model, X[fold])
    r2 = _r2(y, pooled)
    if r2 is None:
        return 0.0
    return adjusted_r2(r2, len(y), X.shape[1])


def train(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    *,
    trait: str = "",
    feature_names: Sequence[str] | None = None,
    kfolds: int = DEFAULT_KFOLDS,
) -> TraitModel:
    """Grid search by resample adjusted R2, then refit the winner on all rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _validate_training_data(X, y)
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(X.shape[1]))
    if len(feature_names) != X.shape[1]:
        raise ValidationError("feature_names must align with X columns")

    points = expand_grid(spec.grid)
    constant_y = float(y.min()) == float(y.max())
    if constant_y:
        # nothing to rank: every family reduces to the constant prediction
        best_idx, best_score = 0, 0.0
    else:
        best_idx, best_score = -1, -math.inf
        for i, hp in enumerate(points):
            sub = replace(
                spec, grid={a: (v,) for a, v in hp.items()}, seed=derive_seed(spec.seed, "grid", i)
            )
            score = kfold_resample_adj_r2(sub, X, y, k=kfolds)
            log.debug("%s grid point %d %s: resample adj R2 %.4f", spec.family, i, hp, score)
            if score > best_score:
                best_idx, best_score = i, score

    chosen = points[best_idx]
    params = _fit_family(spec.family, X, y, chosen, derive_seed(spec.seed, "refit", best_idx))
    model = TraitModel(
        family=spec.family,
        trait=trait,
        feature_names=tuple(feature_names),
        parameters=params,
        chosen_hyperparameters=chosen,
        in_sample_adj_r2=0.0,
        resample_adj_r2=best_score,
        seed=spec.seed,
    )
    raw = predict_matrix(model, X)
    r2 = _r2(y, raw)
    in_sample = 0.0 if r2 is None else adjusted_r2(r2, len(y), X.shape[1])
    return replace(model, in_sample_adj_r2=in_sample)


def predict(model: TraitModel, features) -> float:
    """Single-user trait estimate, clamped to the response scale [1, 5].

    Accepts a FeatureVector or a plain name-to-value mapping.
    """
    values = features if isinstance(features, cabc.Mapping) else features.values
    row = []
    for name in model.feature_names:
        if name not in values:
            raise ContractError(f"feature vector is missing {name!r}")
        row.append(values[name])
    raw = float(predict_matrix(model, np.asarray([row], dtype=float))[0])
    return min(max(raw, SCALE_MIN), SCALE_MAX)


# ------------------------------------------------------------- persistence

ARTIFACT_FORMAT = "trait-model"
ARTIFACT_VERSION = 1


def model_to_dict(model: TraitModel) -> dict:
    return {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "family": model.family,
        "trait": model.trait,
        "feature_names": list(model.feature_names),
        "parameters": model.parameters,
        "chosen_hyperparameters": model.chosen_hyperparameters,
        "in_sample_adj_r2": model.in_sample_adj_r2,
        "resample_adj_r2": model.resample_adj_r2,
        "seed": model.seed,
    }


def model_from_dict(payload: Mapping) -> TraitModel:
    if payload.get("format") != ARTIFACT_FORMAT:
        raise ValidationError(f"not a trait model artifact: format={payload.get('format')!r}")
    if payload.get("version") != ARTIFACT_VERSION:
        raise ValidationError(f"unsupported artifact version {payload.get('version')!r}")
    return TraitModel(
        family=payload["family"],
        trait=payload["trait"],
        feature_names=tuple(payload["feature_names"]),
        parameters=payload["parameters"],
        chosen_hyperparameters=payload["chosen_hyperparameters"],
        in_sample_adj_r2=float(payload["in_sample_adj_r2"]),
        resample_adj_r2=float(payload["resample_adj_r2"]),
        seed=int(payload["seed"]),
    )


def save_trait_model(model: TraitModel, path: Path | str):
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), separators=(",", ":")) + "\n")


def load_trait_model(path: Path | str) -> TraitModel:
    return model_from_dict(json.loads(Path(path).read_text()))
