"""Monthly time series: calendar stamps, CSV round-trip, fixed-weight index math,
and a seeded synthetic-economy generator.

Every series is a contiguous run of finite monthly values anchored at a start
month. All containers are immutable after construction and safe to share
between concurrent tasks.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping

import numpy as np

__all__ = [
    "CsvFormatError",
    "MonthStamp",
    "TimeSeries",
    "SectorWeights",
    "DEFAULT_SECTOR_WEIGHTS",
    "SYNTH_START",
    "TARGET_NAME",
    "SECTOR_NAMES",
    "PREDICTOR_LEADS",
    "SyntheticBundle",
    "parse_csv",
    "render_csv",
    "laspeyres_index",
    "synthesize_economy",
]

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


class CsvFormatError(ValueError):
    """Malformed CSV input. Carries the offending 1-based row (header = row 1)
    and, when applicable, the column name."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True, order=True)
class MonthStamp:
    """A calendar month. Ordering is lexicographic on (year, month)."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise ValueError(f"malformed month {text!r}, expected YYYY-MM")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def plus(self, months: int) -> "MonthStamp":
        total = self.year * 12 + (self.month - 1) + months
        return MonthStamp(total // 12, total % 12 + 1)

    def successor(self) -> "MonthStamp":
        return self.plus(1)

    def months_since(self, other: "MonthStamp") -> int:
        """Signed number of months from `other` to self."""
        return (self.year - other.year) * 12 + (self.month - other.month)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Contiguous monthly observations; values[i] belongs to start.plus(i)."""

    start: MonthStamp
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("series must be a non-empty one-dimensional sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must all be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.values, other.values)

    @property
    def end(self) -> MonthStamp:
        return self.start.plus(len(self) - 1)

    def dates(self) -> List[MonthStamp]:
        return [self.start.plus(i) for i in range(len(self))]

    def index_of(self, stamp: MonthStamp) -> int:
        i = stamp.months_since(self.start)
        if not 0 <= i < len(self):
            raise KeyError(f"{stamp} outside series range {self.start}..{self.end}")
        return i

    def value_at(self, stamp: MonthStamp) -> float:
        return float(self.values[self.index_of(stamp)])

    def covers(self, first: MonthStamp, last: MonthStamp) -> bool:
        return self.start <= first and last <= self.end

    def slice_range(self, first: MonthStamp, last: MonthStamp) -> "TimeSeries":
        if first > last:
            raise ValueError(f"empty range {first}..{last}")
        i, j = self.index_of(first), self.index_of(last)
        return TimeSeries(first, self.values[i : j + 1])

    def aligned_with(self, other: "TimeSeries") -> bool:
        return self.start == other.start and len(self) == len(other)


@dataclass(frozen=True)
class SectorWeights:
    """Positive fixed weights per sector, in percentage points of the base year."""

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        frozen = dict(self.weights)
        for name, w in frozen.items():
            if not (math.isfinite(w) and w > 0):
                raise ValueError(f"weight for {name!r} must be finite and > 0, got {w}")
        object.__setattr__(self, "weights", MappingProxyType(frozen))

    def total(self) -> float:
        return math.fsum(self.weights.values())

    def sectors(self) -> List[str]:
        return list(self.weights)


# Productive-sector weights of the activity index, percentage points of the
# base-year aggregate (they deliberately cover 80% of it, not 100%).
DEFAULT_SECTOR_WEIGHTS = SectorWeights(
    {
        "oil": 20.9,
        "mining": 0.8,
        "manufacturing": 10.5,
        "water_power": 1.5,
        "construction": 5.2,
        "commerce": 11.7,
        "finance_insurance": 2.3,
        "real_estate": 6.8,
        "professional_services": 3.3,
        "communal_services": 9.6,
        "import_rights": 7.4,
    }
)

SECTOR_NAMES = DEFAULT_SECTOR_WEIGHTS.sectors()


def parse_csv(text: str) -> Dict[str, TimeSeries]:
    """Parse `date,<name>,...` monthly CSV into one series per named column.

    Months must be strictly increasing and contiguous; empty or non-numeric
    cells are errors (no imputation). Raises CsvFormatError with the 1-based
    row number (header = row 1) and column name where applicable.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise CsvFormatError("empty input", row=1)
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "date":
        raise CsvFormatError("header must start with 'date'", row=1, column=header[0] if header else None)
    names = header[1:]
    if not names:
        raise CsvFormatError("no data columns in header", row=1)
    seen = set()
    for name in names:
        if name == "":
            raise CsvFormatError("empty column name in header", row=1)
        if name in seen:
            raise CsvFormatError(f"duplicate column name {name!r}", row=1, column=name)
        seen.add(name)

    start: MonthStamp | None = None
    prev: MonthStamp | None = None
    columns: List[List[float]] = [[] for _ in names]
    for rownum, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise CsvFormatError(
                f"row {rownum} has {len(cells)} cells, expected {len(header)}", row=rownum
            )
        try:
            stamp = MonthStamp.parse(cells[0])
        except ValueError as exc:
            raise CsvFormatError(f"row {rownum}: {exc}", row=rownum, column="date") from exc
        if prev is not None and stamp != prev.successor():
            raise CsvFormatError(
                f"non-contiguous months at row {rownum}: {stamp} does not follow {prev}",
                row=rownum,
                column="date",
            )
        if start is None:
            start = stamp
        prev = stamp
        for name, cell, col in zip(names, cells[1:], columns):
            if cell == "":
                raise CsvFormatError(f"empty cell at row {rownum}, column {name!r}", row=rownum, column=name)
            try:
                value = float(cell)
            except ValueError as exc:
                raise CsvFormatError(
                    f"non-numeric cell {cell!r} at row {rownum}, column {name!r}",
                    row=rownum,
                    column=name,
                ) from exc
            if not math.isfinite(value):
                raise CsvFormatError(
                    f"non-finite value at row {rownum}, column {name!r}", row=rownum, column=name
                )
            col.append(value)
    if start is None:
        raise CsvFormatError("no data rows", row=2)
    return {name: TimeSeries(start, col) for name, col in zip(names, columns)}


def render_csv(series: Mapping[str, TimeSeries]) -> str:
    """Render aligned series to the parse_csv dialect with 6-significant-digit reals."""
    if not series:
        raise ValueError("nothing to render")
    items = list(series.items())
    first = items[0][1]
    for name, s in items:
        if not s.aligned_with(first):
            raise ValueError(f"series {name!r} is not aligned with the others")
    lines = ["date," + ",".join(name for name, _ in items)]
    for i, stamp in enumerate(first.dates()):
        cells = [f"{s.values[i]:.6g}" for _, s in items]
        lines.append(f"{stamp}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def laspeyres_index(
    sector_relatives: Mapping[str, TimeSeries],
    weights: SectorWeights,
    base_value: float,
) -> TimeSeries:
    """Fixed-weight index: base_value * sum_a(w_a * rel_a) / sum_a(w_a).

    `sector_relatives` are quantity ratios against the base period, so an
    all-ones month yields exactly base_value.
    """
    total = weights.total()
    if total <= 0:
        raise ValueError("total weight must be positive")
    missing = [name for name in weights.sectors() if name not in sector_relatives]
    if missing:
        raise ValueError(f"missing sector series: {', '.join(sorted(missing))}")
    reference: TimeSeries | None = None
    acc: np.ndarray | None = None
    for name in weights.sectors():
        s = sector_relatives[name]
        if reference is None:
            reference = s
            acc = np.zeros(len(s))
        elif not s.aligned_with(reference):
            raise ValueError(f"sector series {name!r} is not aligned with {weights.sectors()[0]!r}")
        acc = acc + weights.weights[name] * s.values
    assert reference is not None and acc is not None
    return TimeSeries(reference.start, base_value * acc / total)


# ---------------------------------------------------------------------------
# Synthetic economy
# ---------------------------------------------------------------------------

SYNTH_START = MonthStamp(1991, 1)
TARGET_NAME = "activity"

# Months by which each synthetic feed leads the activity index. These leads are
# planted by the generator and double as the shipped optimal lags of the
# network presets.
PREDICTOR_LEADS: Mapping[str, int] = MappingProxyType(
    {
        "power": 10,
        "stocks_local": 5,
        "stocks_foreign": 5,
        "crude": 7,
        "tbill_rate": 10,
        "gold": 2,
        "copper": 8,
        "eurodollar": 10,
        "commodities": 12,
        "utilities": 3,
        "loan_rate": 1,
        "exchange_rate": 6,
        "inflation": 9,
    }
)

# Noise multipliers, relative to the size of a typical monthly move. Calibrated
# so that at noise_scale 0.1 the index direction stays predictable but not
# perfectly so (single-expert hit ceiling near 90 percent) while individual
# feeds are noisy enough that combining experts pays.
_SECTOR_NOISE = 3.0
_PREDICTOR_NOISE = 5.0


@dataclass(frozen=True)
class SyntheticBundle:
    """Deterministic bundle of target index, sector relatives, and leading feeds."""

    series: Dict[str, TimeSeries]
    planted_leads: Dict[str, int]
    cycle_period: int
    seed: int
    months: int
    noise_scale: float

    @property
    def target(self) -> TimeSeries:
        return self.series[TARGET_NAME]

    def predictors(self) -> Dict[str, TimeSeries]:
        return {name: self.series[name] for name in self.planted_leads}

    def metadata(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "months": self.months,
            "cycle_period": self.cycle_period,
            "noise_scale": self.noise_scale,
            "target": TARGET_NAME,
            "planted_leads": dict(self.planted_leads),
        }


def _quantize6(values: np.ndarray) -> np.ndarray:
    # Snap to the 6-significant-digit CSV dialect so render/parse round-trips
    # bit-exactly.
    return np.array([float(f"{v:.6g}") for v in values])


def synthesize_economy(
    seed: int,
    months: int,
    cycle_period: int = 12,
    noise_scale: float = 0.1,
) -> SyntheticBundle:
    """Generate a desk-scale economy: a weighted activity index with a planted
    cycle plus feeds that lead it by known months.

    Deterministic per argument tuple. Sector relatives carry the cycle, a mild
    trend, and (scaled) idiosyncratic noise; the target is their fixed-weight
    index. Each predictor is an affine image of the clean index component
    `planted_leads[name]` months ahead, plus its own noise.
    """
    if months < 24:
        raise ValueError(f"months must be >= 24, got {months}")
    if cycle_period < 2:
        raise ValueError(f"cycle_period must be >= 2, got {cycle_period}")
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be >= 0, got {noise_scale}")

    rng = np.random.default_rng(seed)
    max_lead = max(PREDICTOR_LEADS.values())
    horizon = months + max_lead
    t = np.arange(horizon, dtype=float)
    phase = rng.uniform(0.0, cycle_period)
    cycle = np.sin(2.0 * np.pi * (t + phase) / cycle_period)

    total_w = DEFAULT_SECTOR_WEIGHTS.total()
    core = np.zeros(horizon)  # clean (noise-free) relative part of the index
    relatives: Dict[str, TimeSeries] = {}
    for name in SECTOR_NAMES:
        amp = rng.uniform(0.03, 0.09)
        trend = rng.uniform(0.0002, 0.0008)
        eps = rng.standard_normal(horizon)
        clean = amp * cycle + trend * t
        noisy = clean + noise_scale * _SECTOR_NOISE * amp * eps
        relatives[name] = TimeSeries(SYNTH_START, _quantize6(1.0 + noisy))
        core += (DEFAULT_SECTOR_WEIGHTS.weights[name] / total_w) * clean

    target_full = laspeyres_index(relatives, DEFAULT_SECTOR_WEIGHTS, 100.0)
    move_scale = float(np.std(np.diff(core)))

    series: Dict[str, TimeSeries] = {
        TARGET_NAME: TimeSeries(SYNTH_START, _quantize6(target_full.values[:months]))
    }
    for name in SECTOR_NAMES:
        series[name] = TimeSeries(SYNTH_START, relatives[name].values[:months])
    for name, lead in PREDICTOR_LEADS.items():
        level = rng.uniform(20.0, 500.0)
        gain = rng.uniform(0.5, 1.5)
        eta = rng.standard_normal(months)
        values = level * (
            1.0
            + gain * core[lead : lead + months]
            + noise_scale * _PREDICTOR_NOISE * gain * move_scale * eta
        )
        series[name] = TimeSeries(SYNTH_START, _quantize6(values))

    return SyntheticBundle(
        series=series,
        planted_leads=dict(PREDICTOR_LEADS),
        cycle_period=cycle_period,
        seed=seed,
        months=months,
        noise_scale=noise_scale,
    )
