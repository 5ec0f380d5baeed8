"""JSON persistence of trained models (format_version 1)."""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .boosting import BoostConfig, BoostModel, Stage
from .distributions import Family, Rule
from .natgrad import Direction
from .trees import LEAF, RegressionTree, TreeConfig

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tree_to_dict(tree: RegressionTree, node: int = 0) -> dict:
    if tree.left[node] == LEAF:
        return {"value": float(tree.value[node])}
    return {
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "left": tree_to_dict(tree, int(tree.left[node])),
        "right": tree_to_dict(tree, int(tree.right[node])),
    }


def tree_from_dict(doc: dict) -> RegressionTree:
    feature, threshold, left, right, value = [], [], [], [], []

    def build(d: dict) -> int:
        node = len(value)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        if "value" in d:
            value[node] = float(d["value"])
        else:
            feature[node] = int(d["feature"])
            threshold[node] = float(d["threshold"])
            left[node] = build(d["left"])
            right[node] = build(d["right"])
        return node

    build(doc)
    return RegressionTree(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        value=np.array(value),
    )


def config_to_dict(cfg: BoostConfig) -> dict:
    return {
        "n_stages": cfg.n_stages,
        "learning_rate": cfg.learning_rate,
        "minibatch_frac": cfg.minibatch_frac,
        "direction": cfg.direction.value,
        "rule": cfg.rule.value,
        "family": cfg.family.value,
        "max_depth": cfg.tree.max_depth,
        "min_samples_split": cfg.tree.min_samples_split,
        "seed": cfg.seed,
        "line_search_max_halvings": cfg.line_search_max_halvings,
        "line_search": cfg.line_search,
    }


def config_from_dict(doc: dict) -> BoostConfig:
    return BoostConfig(
        n_stages=int(doc["n_stages"]),
        learning_rate=float(doc["learning_rate"]),
        minibatch_frac=float(doc["minibatch_frac"]),
        direction=Direction(doc["direction"]),
        rule=Rule(doc["rule"]),
        family=Family(doc["family"]),
        tree=TreeConfig(int(doc["max_depth"]), int(doc["min_samples_split"])),
        seed=int(doc["seed"]),
        line_search_max_halvings=int(doc["line_search_max_halvings"]),
        line_search=doc["line_search"],
    )


def model_to_dict(model: BoostModel, record_wall_time: bool = False) -> dict:
    meta = {k: v for k, v in model.metadata.items() if k != "wall_time" or record_wall_time}
    return {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(model.config),
        "theta0": [float(v) for v in model.theta0],
        "stages": [{"rho": s.rho, "trees": [tree_to_dict(t) for t in s.trees]} for s in model.stages],
        "metadata": meta,
    }


def model_from_dict(doc: dict) -> BoostModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r}; expected {FORMAT_VERSION}")
    try:
        cfg = config_from_dict(doc["config"])
        stages = [
            Stage(trees=tuple(tree_from_dict(t) for t in s["trees"]), rho=float(s["rho"])) for s in doc["stages"]
        ]
        theta0 = np.array(doc["theta0"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if theta0.shape != (cfg.family.param_count,) or any(len(s.trees) != cfg.family.param_count for s in stages):
        raise ModelFormatError("parameter count does not match the distribution family")
    return BoostModel(config=cfg, theta0=theta0, stages=stages, metadata=dict(doc.get("metadata", {})))


def dumps(model: BoostModel, record_wall_time: bool = False) -> str:
    return json.dumps(model_to_dict(model, record_wall_time), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_model(model: BoostModel, path, record_wall_time: bool = False) -> None:
    atomic_write(path, dumps(model, record_wall_time))


def load_model(path) -> BoostModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not valid JSON: {exc}") from None
    return model_from_dict(doc)
