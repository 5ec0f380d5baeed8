"""Natural-gradient boosting of all distribution parameters jointly."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .distributions import (
    LOG_SCALE_MIN,
    Family,
    Rule,
    clamp,
    fit_marginal,
    log_pdf,
)
from .natgrad import Direction, check_direction, direction
from .scoring import score
from .trees import RegressionTree, TreeConfig, fit_tree, presort

LINE_SEARCH_MODES = ("first", "best", "none")


class NumericalError(ArithmeticError):
    """Training produced a non-finite score or direction."""


@dataclass(frozen=True)
class BoostConfig:
    n_stages: int = 500
    learning_rate: float = 0.01
    minibatch_frac: float = 1.0
    direction: Direction = Direction.NATURAL
    rule: Rule = Rule.LOGSCORE
    family: Family = Family.NORMAL
    tree: TreeConfig = TreeConfig()
    seed: int = 0
    line_search_max_halvings: int = 30
    # "first": first halving that lowers the batch score; "best": lowest
    # score over all halvings; "none": always rho = 1
    line_search: str = "first"

    def __post_init__(self):
        if self.n_stages < 1:
            raise ValueError("n_stages must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.minibatch_frac <= 1:
            raise ValueError("minibatch_frac must lie in (0, 1]")
        if self.line_search not in LINE_SEARCH_MODES:
            raise ValueError(f"line_search must be one of {LINE_SEARCH_MODES}")
        if self.line_search_max_halvings < 0:
            raise ValueError("line_search_max_halvings must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        check_direction(self.direction, self.rule, self.family)


@dataclass(frozen=True, eq=False)
class Stage:
    trees: tuple[RegressionTree, ...]
    rho: float

    def outputs(self, X: np.ndarray) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees], axis=-1)


@dataclass(eq=False)
class BoostModel:
    config: BoostConfig
    theta0: np.ndarray
    stages: list[Stage] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    # per-example parameters at the end of training; not persisted
    train_theta: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _advance(theta: np.ndarray, outputs: np.ndarray, lr: float, rho: float) -> np.ndarray:
    theta = theta - (lr * rho) * outputs
    return clamp(theta)


def line_search(theta, outputs, y, rule: Rule, family: Family, max_halvings: int = 30, mode: str = "first"):
    """Step scale along ``-outputs`` by successive halving from 1.

    Returns the accepted scale, or ``None`` when no tried scale strictly
    lowers the summed score.
    """
    theta = np.asarray(theta, dtype=np.float64)
    outputs = np.asarray(outputs, dtype=np.float64)
    if mode == "none":
        return 1.0
    base = float(np.sum(score(rule, family, theta, y)))
    rho = 1.0
    best_rho, best = None, base
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_halvings + 1):
            trial = clamp(theta - rho * outputs)
            s = float(np.sum(score(rule, family, trial, y)))
            if s < best:
                if mode == "first":
                    return rho
                best_rho, best = rho, s
            rho *= 0.5
    return best_rho


def _check_finite(arr: np.ndarray, what: str, stage: int, rows: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        pos = int(np.argwhere(bad)[0][0])
        raise NumericalError(f"non-finite {what} at stage {stage}, example {int(rows[pos])}")


def train(
    dataset: Dataset,
    cfg: BoostConfig = BoostConfig(),
    *,
    theta0: Sequence[float] | None = None,
    trainable: Sequence[bool] = (True, True),
    on_stage: Callable[[int, float], None] | None = None,
) -> BoostModel:
    """Fit a boosted model.

    ``theta0`` overrides the marginal initialization and ``trainable`` freezes
    parameter columns (their trees are constant zero); both exist for the
    homoscedastic ablation and for checking the reduction to least-squares
    boosting. ``on_stage`` receives ``(stage, total training score)`` after
    every retained stage.
    """
    started = time.perf_counter()
    X = np.ascontiguousarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.targets, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")

    if theta0 is None:
        init = fit_marginal(cfg.family, cfg.rule, y)
    else:
        init = clamp(np.array(theta0, dtype=np.float64))
    theta = np.tile(init, (n, 1))
    rng = np.random.default_rng(cfg.seed)
    batch_size = min(n, math.ceil(cfg.minibatch_frac * n))
    full_batch = batch_size == n
    all_rows = np.arange(n)
    full_order = presort(X) if full_batch else None
    stages: list[Stage] = []

    for m in range(1, cfg.n_stages + 1):
        if full_batch:
            rows, Xb, order = all_rows, X, full_order
        else:
            rows = np.sort(rng.choice(n, size=batch_size, replace=False))
            Xb = X[rows]
            order = presort(Xb)
        theta_b, y_b = theta[rows], y[rows]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            g = direction(cfg.direction, cfg.rule, cfg.family, theta_b, y_b)
        _check_finite(g, "direction", m, rows)
        trees = tuple(
            fit_tree(Xb, g[:, k], cfg.tree, order) if trainable[k] else RegressionTree.constant(0.0)
            for k in range(cfg.family.param_count)
        )
        stage = Stage(trees=trees, rho=1.0)
        out_b = stage.outputs(Xb)
        rho = line_search(
            theta_b, out_b, y_b, cfg.rule, cfg.family, cfg.line_search_max_halvings, cfg.line_search
        )
        if rho is None:
            break
        stage = Stage(trees=trees, rho=rho)
        stages.append(stage)
        out = out_b if full_batch else stage.outputs(X)
        theta = _advance(theta, out, cfg.learning_rate, rho)
        if on_stage is not None:
            total = score(cfg.rule, cfg.family, theta, y)
            _check_finite(total, "score", m, all_rows)
            on_stage(m, float(np.sum(total)))

    final = score(cfg.rule, cfg.family, theta, y)
    _check_finite(final, "score", len(stages), all_rows)
    metadata = {
        "n": n,
        "d": X.shape[1],
        "feature_names": list(dataset.feature_names),
        "target_name": dataset.target_name,
        "final_train_score": float(np.sum(final)),
        "wall_time": time.perf_counter() - started,
    }
    return BoostModel(config=cfg, theta0=init, stages=stages, metadata=metadata, train_theta=theta)


def train_homoscedastic(dataset: Dataset, cfg: BoostConfig = BoostConfig()) -> BoostModel:
    """Boost the mean only, then fix one global scale from the training residuals."""
    if cfg.family is not Family.NORMAL or cfg.rule is not Rule.LOGSCORE:
        raise ValueError("homoscedastic boosting requires the normal family with the log score")
    model = train(dataset, cfg, trainable=(True, False))
    mu = model.train_theta[:, 0]
    spread = float(np.std(np.asarray(dataset.targets, dtype=np.float64) - mu))
    log_scale = math.log(spread) if spread > 0 else LOG_SCALE_MIN
    theta0 = clamp(np.array([model.theta0[0], log_scale]))
    theta = model.train_theta.copy()
    theta[:, 1] = theta0[1]
    y = np.asarray(dataset.targets, dtype=np.float64)
    model.metadata["final_train_score"] = float(np.sum(score(cfg.rule, cfg.family, theta, y)))
    model.metadata["homoscedastic"] = True
    model.theta0 = theta0
    model.train_theta = theta
    return model


def predict_params(model: BoostModel, X) -> np.ndarray:
    """Per-row parameters, shape ``(n, p)``; a single feature vector gives ``(p,)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return predict_params(model, X[None, :])[0]
    theta = np.tile(model.theta0, (len(X), 1))
    for stage in model.stages:
        theta = _advance(theta, stage.outputs(X), model.config.learning_rate, stage.rho)
    return theta


def staged_params(model: BoostModel, X):
    """Yield the parameters after 0, 1, ..., n_stages stages."""
    X = np.asarray(X, dtype=np.float64)
    theta = np.tile(model.theta0, (len(X), 1))
    yield theta
    for stage in model.stages:
        theta = _advance(theta, stage.outputs(X), model.config.learning_rate, stage.rho)
        yield theta


def staged_nll(model: BoostModel, X, y) -> np.ndarray:
    """Mean negative log-likelihood using the first m stages, for m = 0..n_stages."""
    y = np.asarray(y, dtype=np.float64)
    fam = model.config.family
    return np.array([-float(np.mean(log_pdf(fam, theta, y))) for theta in staged_params(model, X)])


def truncate(model: BoostModel, m: int) -> BoostModel:
    if not 0 <= m <= model.n_stages:
        raise ValueError(f"cannot truncate a {model.n_stages}-stage model to {m} stages")
    return replace(model, stages=list(model.stages[:m]), metadata=dict(model.metadata), train_theta=None)
