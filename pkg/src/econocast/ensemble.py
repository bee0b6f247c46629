"""Stacked master network over the eight sub-networks.

Each sub-network trains on its own feature matrix; the master trains on the
sub predictions over the training range only, so nothing from the test range
leaks into any trained parameter.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import List, Mapping, Sequence, Tuple

import numpy as np

from .metrics import MetricsReport, report
from .mlp import (
    TrainConfig,
    TrainedExpert,
    expert_from_dict,
    expert_to_dict,
    init,
    predict,
    train,
)
from .preprocess import FeatureMatrix, FeatureSpec, assemble
from .timeseries import MonthStamp, TimeSeries

__all__ = [
    "SubNetworkSpec",
    "EnsembleSpec",
    "EnsembleModel",
    "train_ensemble",
    "predict_ensemble",
    "save_ensemble",
    "load_ensemble",
    "MASTER_NAME",
]

MASTER_NAME = "Master Network"


@dataclass(frozen=True)
class SubNetworkSpec:
    """One sub-network: its features, hidden shape, and training knobs."""

    name: str
    features: Tuple[FeatureSpec, ...]
    hidden_layers: Tuple[int, ...]
    train_config: TrainConfig

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        hidden = tuple(int(n) for n in self.hidden_layers)
        if not hidden or min(hidden) < 1:
            raise ValueError("at least one hidden layer of size >= 1 required")
        object.__setattr__(self, "hidden_layers", hidden)

    def shape(self) -> Tuple[int, ...]:
        return (len(self.features), *self.hidden_layers, 1)


@dataclass(frozen=True)
class EnsembleSpec:
    """The sub-networks plus the master's hidden shape and training knobs.
    The master's input width is always the number of sub-networks."""

    sub_specs: Tuple[SubNetworkSpec, ...]
    master_hidden_layers: Tuple[int, ...] = (4,)
    master_train_config: TrainConfig = TrainConfig()

    def __post_init__(self) -> None:
        subs = tuple(self.sub_specs)
        if len(subs) < 2:
            raise ValueError("an ensemble needs at least two sub-networks")
        names = [s.name for s in subs]
        if len(set(names)) != len(names):
            raise ValueError("sub-network names must be unique")
        object.__setattr__(self, "sub_specs", subs)
        hidden = tuple(int(n) for n in self.master_hidden_layers)
        if not hidden or min(hidden) < 1:
            raise ValueError("master needs at least one hidden layer of size >= 1")
        object.__setattr__(self, "master_hidden_layers", hidden)

    def master_shape(self) -> Tuple[int, ...]:
        return (len(self.sub_specs), *self.master_hidden_layers, 1)


@dataclass(frozen=True)
class EnsembleModel:
    """Trained sub-experts, the master, and the per-expert indicator rows."""

    sub_experts: Tuple[TrainedExpert, ...]
    sub_names: Tuple[str, ...]
    master: TrainedExpert
    reports: Tuple[Tuple[str, MetricsReport], ...]
    target_name: str
    train_range: Tuple[MonthStamp, MonthStamp]
    test_range: Tuple[MonthStamp, MonthStamp]


def _master_specs(names: Sequence[str]) -> Tuple[FeatureSpec, ...]:
    return tuple(FeatureSpec(name) for name in names)


def _master_matrix(
    predictions: Sequence[TimeSeries],
    names: Sequence[str],
    target: TimeSeries,
    first: MonthStamp,
    last: MonthStamp,
    target_name: str,
) -> FeatureMatrix:
    columns = [p.slice_range(first, last).values for p in predictions]
    return FeatureMatrix(
        X=np.column_stack(columns),
        y=target.slice_range(first, last).values,
        start=first,
        specs=_master_specs(names),
        target_name=target_name,
    )


def train_ensemble(
    spec: EnsembleSpec,
    sources: Mapping[str, TimeSeries],
    target_name: str,
    train_range: Tuple[MonthStamp, MonthStamp],
    test_range: Tuple[MonthStamp, MonthStamp],
) -> EnsembleModel:
    """Train every sub-network on the training range, stack their predictions
    under the master, and report all experts over the testing range.

    Each sub trains with exactly its own config (builders hand out distinct
    seeds); the report rows come out in spec order with the master last."""
    if not (train_range[0] <= train_range[1] < test_range[0] <= test_range[1]):
        raise ValueError("train and test ranges must be disjoint and ordered")
    if target_name not in sources:
        raise ValueError(f"unknown target series {target_name!r}")
    target = sources[target_name]

    sub_experts: List[TrainedExpert] = []
    train_preds: List[TimeSeries] = []
    test_preds: List[TimeSeries] = []
    train_matrices: List[FeatureMatrix] = []
    test_matrices: List[FeatureMatrix] = []
    for i, sub in enumerate(spec.sub_specs):
        cfg = sub.train_config
        try:
            m_train = assemble(sub.features, sources, target_name, None, *train_range)
            m_test = assemble(sub.features, sources, target_name, None, *test_range)
            expert = train(init(sub.shape(), cfg), m_train, cfg)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(f"sub-network {i + 1} ({sub.name!r}) failed: {exc}") from exc
        expert = replace(expert, test_range=test_range)
        sub_experts.append(expert)
        train_matrices.append(m_train)
        test_matrices.append(m_test)
        train_preds.append(predict(expert, m_train))
        test_preds.append(predict(expert, m_test))

    names = [s.name for s in spec.sub_specs]
    master_train = _master_matrix(train_preds, names, target, *train_range, target_name)
    master_test = _master_matrix(test_preds, names, target, *test_range, target_name)
    master = train(
        init(spec.master_shape(), spec.master_train_config),
        master_train,
        spec.master_train_config,
    )
    master = replace(master, test_range=test_range)

    actual = target
    rows: List[Tuple[str, MetricsReport]] = []
    for name, expert, m_train, m_test in zip(names, sub_experts, train_matrices, test_matrices):
        rows.append((name, report(expert, m_train, m_test, actual)))
    rows.append((MASTER_NAME, report(master, master_train, master_test, actual)))

    return EnsembleModel(
        sub_experts=tuple(sub_experts),
        sub_names=tuple(names),
        master=master,
        reports=tuple(rows),
        target_name=target_name,
        train_range=train_range,
        test_range=test_range,
    )


def predict_ensemble(
    model: EnsembleModel,
    sources: Mapping[str, TimeSeries],
    first: MonthStamp,
    last: MonthStamp,
) -> TimeSeries:
    """Sub predictions over [first, last], then the master forward pass."""
    target = sources[model.target_name]
    preds = []
    for expert in model.sub_experts:
        matrix = assemble(list(expert.features), sources, model.target_name, None, first, last)
        preds.append(predict(expert, matrix))
    master_matrix = _master_matrix(preds, model.sub_names, target, first, last, model.target_name)
    return predict(model.master, master_matrix)


# ---------------------------------------------------------------------------
# Directory serialization
# ---------------------------------------------------------------------------


def save_ensemble(model: EnsembleModel, directory: str) -> None:
    """One JSON per expert plus a manifest with ranges and report rows."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "schema_version": 1,
        "target": model.target_name,
        "train_range": [str(model.train_range[0]), str(model.train_range[1])],
        "test_range": [str(model.test_range[0]), str(model.test_range[1])],
        "sub_networks": list(model.sub_names),
        "seeds": [expert.rng_seed for expert in model.sub_experts] + [model.master.rng_seed],
        "reports": [[name, rep.to_dict()] for name, rep in model.reports],
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    for name, expert in zip(model.sub_names, model.sub_experts):
        with open(os.path.join(directory, f"{name}.json"), "w", encoding="utf-8") as fh:
            json.dump(expert_to_dict(expert), fh, indent=1)
            fh.write("\n")
    with open(os.path.join(directory, "master.json"), "w", encoding="utf-8") as fh:
        json.dump(expert_to_dict(model.master), fh, indent=1)
        fh.write("\n")


def load_ensemble(directory: str) -> EnsembleModel:
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    names = tuple(manifest["sub_networks"])
    subs = []
    for name in names:
        with open(os.path.join(directory, f"{name}.json"), "r", encoding="utf-8") as fh:
            subs.append(expert_from_dict(json.load(fh)))
    with open(os.path.join(directory, "master.json"), "r", encoding="utf-8") as fh:
        master = expert_from_dict(json.load(fh))
    rows = tuple(
        (name, MetricsReport(**rep)) for name, rep in manifest["reports"]
    )
    return EnsembleModel(
        sub_experts=tuple(subs),
        sub_names=names,
        master=master,
        reports=rows,
        target_name=manifest["target"],
        train_range=(
            MonthStamp.parse(manifest["train_range"][0]),
            MonthStamp.parse(manifest["train_range"][1]),
        ),
        test_range=(
            MonthStamp.parse(manifest["test_range"][0]),
            MonthStamp.parse(manifest["test_range"][1]),
        ),
    )
