"""Series transforms and feature-matrix assembly.

All transforms are pure functions whose output dates are a contiguous
sub-range of the input dates; nothing is ever imputed or extrapolated. A
feature matrix starts only once every transform/lag warm-up is satisfied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .timeseries import MonthStamp, TimeSeries

__all__ = [
    "WarmupError",
    "Transform",
    "FeatureSpec",
    "FeatureMatrix",
    "diff",
    "sma",
    "ewma",
    "block_avg",
    "lag",
    "log_var_ma",
    "rolling_stddev",
    "dominant_cycle",
    "apply_feature",
    "assemble",
]


class WarmupError(ValueError):
    """A feature needs more leading history than the requested range allows."""

    def __init__(self, label: str, months_short: int):
        super().__init__(f"feature {label!r} needs {months_short} more month(s) of warm-up history")
        self.label = label
        self.months_short = months_short


def diff(s: TimeSeries) -> TimeSeries:
    """First differences: value j = s[j+1] - s[j]; start advances one month."""
    if len(s) < 2:
        raise ValueError("series too short to difference (need length >= 2)")
    return TimeSeries(s.start.plus(1), np.diff(s.values))


def _sliding_mean(values: np.ndarray, window: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(values, window)
    return view.mean(axis=1)


def sma(s: TimeSeries, window: int) -> TimeSeries:
    """Trailing simple moving average; output starts window-1 months later."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if len(s) < window:
        raise ValueError(f"window {window} exceeds series length {len(s)}")
    return TimeSeries(s.start.plus(window - 1), _sliding_mean(s.values, window))


def ewma(s: TimeSeries, beta: float) -> TimeSeries:
    """Exponentially weighted moving average y[t] = beta*s[t] + (1-beta)*y[t-1],
    seeded with y[0] = s[0]. Length-preserving."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    out = np.empty(len(s))
    out[0] = s.values[0]
    keep = 1.0 - beta
    for i in range(1, len(s)):
        out[i] = beta * s.values[i] + keep * out[i - 1]
    return TimeSeries(s.start, out)


def block_avg(s: TimeSeries, window: int, distance: int) -> TimeSeries:
    """Trailing window mean taken `distance` months before the reference month:
    value at t = mean(s[t-distance-window+1 .. t-distance])."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    if len(s) < window + distance:
        raise ValueError(
            f"series length {len(s)} insufficient for window {window} + distance {distance}"
        )
    n = len(s)
    means = _sliding_mean(s.values[: n - distance], window)
    return TimeSeries(s.start.plus(window + distance - 1), means)


def lag(s: TimeSeries, k: int) -> TimeSeries:
    """Shift by k months: value at date t equals the source value at t-k."""
    if k < 0:
        raise ValueError(f"lag must be >= 0, got {k}")
    if k >= len(s):
        raise ValueError(f"lag {k} >= series length {len(s)}")
    if k == 0:
        return s
    return TimeSeries(s.start.plus(k), s.values[: len(s) - k])


def log_var_ma(s: TimeSeries, window: int) -> TimeSeries:
    """Log relative variation of the moving average: ln(ma_t / ma_{t-1})."""
    ma = sma(s, window)
    if len(ma) < 2:
        raise ValueError("smoothed series too short for a variation")
    ratios = ma.values[1:] / ma.values[:-1]
    bad = np.nonzero(~(ratios > 0))[0]
    if bad.size:
        when = ma.start.plus(int(bad[0]) + 1)
        raise ValueError(f"non-positive moving-average ratio at {when}; log undefined")
    return TimeSeries(ma.start.plus(1), np.log(ratios))


def rolling_stddev(s: TimeSeries, window: int) -> TimeSeries:
    """Population standard deviation over each trailing window, aligned as sma."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if len(s) < window:
        raise ValueError(f"window {window} exceeds series length {len(s)}")
    view = np.lib.stride_tricks.sliding_window_view(s.values, window)
    return TimeSeries(s.start.plus(window - 1), view.std(axis=1))


def dominant_cycle(s: TimeSeries) -> int:
    """Dominant period in months: round(N / k*) for the nonzero discrete-Fourier
    bin k* of maximum magnitude. Ties break toward the longer period."""
    x = s.values - s.values.mean()
    if np.allclose(x, 0.0):
        raise ValueError("degenerate (constant) series has no dominant cycle")
    mags = np.abs(np.fft.rfft(x))
    k = int(np.argmax(mags[1:])) + 1  # argmax returns the first (lowest) bin on ties
    return int(round(len(s) / k))


# ---------------------------------------------------------------------------
# Declarative features
# ---------------------------------------------------------------------------

_KIND_PARAMS = {
    "identity": (),
    "diff": (),
    "sma": ("window",),
    "ewma": ("beta",),
    "block_avg": ("window", "distance"),
    "log_var_ma": ("window",),
    "rolling_std": ("window",),
}


@dataclass(frozen=True)
class Transform:
    """One series transform; see the module functions for semantics."""

    kind: str
    window: int | None = None
    distance: int | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KIND_PARAMS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        required = _KIND_PARAMS[self.kind]
        for name in ("window", "distance", "beta"):
            value = getattr(self, name)
            if name in required and value is None:
                raise ValueError(f"transform {self.kind!r} requires {name}")
            if name not in required and value is not None:
                raise ValueError(f"transform {self.kind!r} does not take {name}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        if self.distance is not None and self.distance < 0:
            raise ValueError("distance must be >= 0")
        if self.beta is not None and not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")

    @classmethod
    def identity(cls) -> "Transform":
        return cls("identity")

    @classmethod
    def diff(cls) -> "Transform":
        return cls("diff")

    @classmethod
    def sma(cls, window: int) -> "Transform":
        return cls("sma", window=window)

    @classmethod
    def ewma(cls, beta: float) -> "Transform":
        return cls("ewma", beta=beta)

    @classmethod
    def block_avg(cls, window: int, distance: int) -> "Transform":
        return cls("block_avg", window=window, distance=distance)

    @classmethod
    def log_var_ma(cls, window: int) -> "Transform":
        return cls("log_var_ma", window=window)

    @classmethod
    def rolling_std(cls, window: int) -> "Transform":
        return cls("rolling_std", window=window)

    def apply(self, s: TimeSeries) -> TimeSeries:
        if self.kind == "identity":
            return s
        if self.kind == "diff":
            return diff(s)
        if self.kind == "sma":
            return sma(s, self.window)
        if self.kind == "ewma":
            return ewma(s, self.beta)
        if self.kind == "block_avg":
            return block_avg(s, self.window, self.distance)
        if self.kind == "log_var_ma":
            return log_var_ma(s, self.window)
        if self.kind == "rolling_std":
            return rolling_stddev(s, self.window)
        raise AssertionError(self.kind)

    def label(self) -> str:
        if self.kind == "sma":
            return f"sma{self.window}"
        if self.kind == "ewma":
            return f"ewma{self.beta:g}"
        if self.kind == "block_avg":
            return f"ba{self.window}d{self.distance}"
        if self.kind == "log_var_ma":
            return f"logvar{self.window}"
        if self.kind == "rolling_std":
            return f"std{self.window}"
        return self.kind

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"kind": self.kind}
        for name in _KIND_PARAMS[self.kind]:
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Transform":
        kind = data.get("kind")
        if not isinstance(kind, str):
            raise ValueError(f"transform dict missing kind: {data!r}")
        extra = set(data) - {"kind", *_KIND_PARAMS.get(kind, ())}
        if extra:
            raise ValueError(f"unknown transform field(s) {sorted(extra)} for kind {kind!r}")
        return cls(kind, **{k: data[k] for k in _KIND_PARAMS.get(kind, ()) if k in data})


@dataclass(frozen=True)
class FeatureSpec:
    """One input column: a source series, a transform chain, and a lag in months."""

    source: str
    transforms: Tuple[Transform, ...] = (Transform("identity"),)
    lag: int = 0

    def __post_init__(self) -> None:
        chain = self.transforms
        if isinstance(chain, Transform):
            chain = (chain,)
        chain = tuple(chain)
        if not chain:
            chain = (Transform("identity"),)
        object.__setattr__(self, "transforms", chain)
        if self.lag < 0:
            raise ValueError(f"lag must be >= 0, got {self.lag}")

    def label(self) -> str:
        parts = [self.source]
        parts += [t.label() for t in self.transforms if t.kind != "identity"]
        if self.lag:
            parts.append(f"lag{self.lag}")
        return "~".join(parts)

    def to_dict(self) -> Dict[str, object]:
        return {
            "source": self.source,
            "transforms": [t.to_dict() for t in self.transforms],
            "lag": self.lag,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "FeatureSpec":
        extra = set(data) - {"source", "transforms", "lag"}
        if extra:
            raise ValueError(f"unknown feature field(s) {sorted(extra)}")
        transforms = tuple(Transform.from_dict(t) for t in data.get("transforms", []))
        return cls(
            source=str(data["source"]),
            transforms=transforms or (Transform("identity"),),
            lag=int(data.get("lag", 0)),
        )


def apply_feature(spec: FeatureSpec, sources: Mapping[str, TimeSeries]) -> TimeSeries:
    """Resolve one FeatureSpec against named sources."""
    if spec.source not in sources:
        raise ValueError(f"unknown source series {spec.source!r}")
    s = sources[spec.source]
    for t in spec.transforms:
        s = t.apply(s)
    return lag(s, spec.lag)


@dataclass(frozen=True)
class FeatureMatrix:
    """Aligned training rows: one row per month, one column per FeatureSpec,
    plus the target value for each row."""

    X: np.ndarray
    y: np.ndarray
    start: MonthStamp
    specs: Tuple[FeatureSpec, ...]
    target_name: str

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size or X.shape[0] == 0:
            raise ValueError("matrix and target shapes are inconsistent or empty")
        if X.shape[1] != len(self.specs):
            raise ValueError("one spec per column required")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("matrix cells must be finite")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "specs", tuple(self.specs))

    @property
    def rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def width(self) -> int:
        return int(self.X.shape[1])

    @property
    def end(self) -> MonthStamp:
        return self.start.plus(self.rows - 1)

    def row_dates(self) -> List[MonthStamp]:
        return [self.start.plus(i) for i in range(self.rows)]

    def column_labels(self) -> List[str]:
        return [spec.label() for spec in self.specs]

    def target_series(self) -> TimeSeries:
        return TimeSeries(self.start, self.y)


def assemble(
    features: Sequence[FeatureSpec],
    sources: Mapping[str, TimeSeries],
    target_name: str,
    target_transform: Transform | Sequence[Transform] | None,
    first: MonthStamp,
    last: MonthStamp,
) -> FeatureMatrix:
    """Build the aligned matrix over [first, last].

    Errors if any feature's warm-up (or tail) does not cover the range,
    reporting the feature and how many months it is short.
    """
    if first > last:
        raise ValueError(f"empty range {first}..{last}")
    if not features:
        raise ValueError("at least one feature is required")
    if target_name not in sources:
        raise ValueError(f"unknown target series {target_name!r}")

    if target_transform is None:
        target_chain: Tuple[Transform, ...] = (Transform("identity"),)
    elif isinstance(target_transform, Transform):
        target_chain = (target_transform,)
    else:
        target_chain = tuple(target_transform)
    target = sources[target_name]
    for t in target_chain:
        target = t.apply(target)
    if target.start > first:
        raise WarmupError(f"{target_name} (target)", target.start.months_since(first))
    if target.end < last:
        raise ValueError(f"target {target_name!r} ends {last.months_since(target.end)} month(s) early")

    columns = []
    for spec in features:
        s = apply_feature(spec, sources)
        if s.start > first:
            raise WarmupError(spec.label(), s.start.months_since(first))
        if s.end < last:
            raise ValueError(
                f"feature {spec.label()!r} ends {last.months_since(s.end)} month(s) before {last}"
            )
        columns.append(s.slice_range(first, last).values)

    return FeatureMatrix(
        X=np.column_stack(columns),
        y=target.slice_range(first, last).values,
        start=first,
        specs=tuple(features),
        target_name=target_name,
    )
