"""Metrics, the repeated train/validation/test protocol, and ablations."""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .boosting import BoostConfig, BoostModel, predict_params, staged_nll, train, train_homoscedastic, truncate
from .data import Dataset
from .distributions import Family, Rule, log_pdf, point_estimate
from .natgrad import Direction, direction
from .scoring import score

TEST_FRAC = 0.1
VALIDATION_FRAC = 0.2


class Variant(enum.Enum):
    NGBOOST = "ngboost"
    SECOND_ORDER = "second_order"
    MULTIPARAMETER = "multiparameter"
    HOMOSCEDASTIC = "homoscedastic"


def nll(model: BoostModel, dataset: Dataset) -> float:
    theta = predict_params(model, dataset.features)
    return -float(np.mean(log_pdf(model.config.family, theta, dataset.targets)))


def rmse(model: BoostModel, dataset: Dataset) -> float:
    theta = predict_params(model, dataset.features)
    err = dataset.targets - point_estimate(model.config.family, theta)
    return math.sqrt(float(np.mean(err * err)))


@dataclass(frozen=True)
class RepetitionRecord:
    repetition: int
    seed: int
    chosen_M: int
    n_stages: int
    test_nll: float
    test_rmse: float
    split_hash: str


@dataclass(frozen=True)
class ProtocolResult:
    records: tuple[RepetitionRecord, ...]
    mean_nll: float
    mean_rmse: float
    se_nll: float | None
    se_rmse: float | None

    @classmethod
    def aggregate(cls, records) -> "ProtocolResult":
        records = tuple(sorted(records, key=lambda r: r.repetition))
        nlls = np.array([r.test_nll for r in records])
        rmses = np.array([r.test_rmse for r in records])
        k = len(records)

        def se(v):
            return float(np.std(v, ddof=1) / math.sqrt(k)) if k > 1 else None

        return cls(records, float(nlls.mean()), float(rmses.mean()), se(nlls), se(rmses))


def split_sizes(n: int) -> tuple[int, int, int]:
    """(train, validation, test) sizes for ``n`` examples."""
    n_test = int(round(TEST_FRAC * n))
    n_val = int(round(VALIDATION_FRAC * (n - n_test)))
    n_train = n - n_test - n_val
    if min(n_test, n_val, n_train) < 1:
        raise ValueError(f"{n} examples are too few for a train/validation/test split")
    return n_train, n_val, n_test


def fit_variant(dataset: Dataset, cfg: BoostConfig, variant: Variant = Variant.NGBOOST) -> BoostModel:
    if variant is Variant.HOMOSCEDASTIC:
        return train_homoscedastic(dataset, replace(cfg, direction=Direction.NATURAL))
    kind = {
        Variant.NGBOOST: Direction.NATURAL,
        Variant.SECOND_ORDER: Direction.SADDLE_FREE,
        Variant.MULTIPARAMETER: Direction.ORDINARY,
    }[variant]
    return train(dataset, replace(cfg, direction=kind))


def _repetition_seeds(seed: int, repetitions: int) -> list[tuple[np.random.Generator, int]]:
    out = []
    for child in np.random.SeedSequence(seed).spawn(repetitions):
        train_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        out.append((np.random.default_rng(child), train_seed))
    return out


def run_protocol(
    dataset: Dataset,
    cfg: BoostConfig = BoostConfig(),
    repetitions: int = 20,
    seed: int = 0,
    variant: Variant = Variant.NGBOOST,
    select_M: bool = True,
) -> ProtocolResult:
    """Repeated hold-out evaluation.

    Each repetition shuffles, holds out 10% for testing, selects the stage
    count on a 20% validation slice of the remainder, retrains on the whole
    remainder with that count and scores the test slice. With
    ``select_M=False`` the validation step is skipped and ``cfg.n_stages``
    is used directly.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    n = len(dataset)
    n_train, n_val, n_test = split_sizes(n)
    records = []
    for rep, (rng, train_seed) in enumerate(_repetition_seeds(seed, repetitions)):
        perm = rng.permutation(n)
        test_rows = perm[:n_test]
        val_rows = perm[n_test : n_test + n_val]
        fit_rows = perm[n_test + n_val :]
        rep_cfg = replace(cfg, seed=train_seed)
        if select_M:
            probe = fit_variant(dataset.subset(fit_rows), rep_cfg, variant)
            val = dataset.subset(val_rows)
            curve = staged_nll(probe, val.features, val.targets)
            chosen = int(np.argmin(curve))
        else:
            chosen = cfg.n_stages
        model = fit_variant(dataset.subset(perm[n_test:]), replace(rep_cfg, n_stages=max(chosen, 1)), variant)
        if chosen == 0:
            model = truncate(model, 0)
        test = dataset.subset(test_rows)
        digest = hashlib.sha256(np.sort(test_rows).tobytes() + b"|" + np.sort(val_rows).tobytes()).hexdigest()
        records.append(
            RepetitionRecord(
                repetition=rep,
                seed=train_seed,
                chosen_M=chosen,
                n_stages=model.n_stages,
                test_nll=nll(model, test),
                test_rmse=rmse(model, test),
                split_hash=digest[:16],
            )
        )
    return ProtocolResult.aggregate(records)


def run_ablation(
    dataset: Dataset, base_cfg: BoostConfig = BoostConfig(), repetitions: int = 20, seed: int = 0, variants=tuple(Variant)
) -> dict[Variant, ProtocolResult]:
    return {v: run_protocol(dataset, base_cfg, repetitions, seed, variant=v) for v in variants}


def gradient_field(
    rule: Rule,
    family: Family,
    mu_grid,
    log_scale_grid,
    y_sample,
    kind: Direction = Direction.NATURAL,
) -> np.ndarray:
    """Mean descent direction and mean score at each (mu, log-scale) grid point.

    Returns rows ``(mu, log_scale, d_mu, d_log_scale, score)`` with ``mu``
    varying slowest.
    """
    y = np.asarray(y_sample, dtype=np.float64).ravel()
    rows = []
    for mu in np.asarray(mu_grid, dtype=np.float64):
        for ls in np.asarray(log_scale_grid, dtype=np.float64):
            theta = np.array([mu, ls])
            step = 0.0 - np.mean(direction(kind, rule, family, theta, y), axis=0)  # no -0.0
            rows.append((mu, ls, step[0], step[1], float(np.mean(score(rule, family, theta, y)))))
    return np.array(rows, dtype=np.float64).reshape(-1, 5)
