"""Monthly aggregation of classified records into MME/day series and the
per-class summary tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from typing import NamedTuple, Sequence

import numpy as np

from .geo import ALL_CLASS_CODES, ClassifiedRecord
from .records import PrescriptionRecord, mme_per_day
from .stats import MeanCI, mean_ci

INDEX_BASE_YEAR = 2014
OVERALL = "overall"


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be 1..12, got {self.month}")

    @property
    def index(self) -> int:
        """Months since 2014-01 (0-based)."""
        return (self.year - INDEX_BASE_YEAR) * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, index: int) -> "MonthKey":
        return cls(INDEX_BASE_YEAR + index // 12, index % 12 + 1)

    @classmethod
    def from_date(cls, d: date) -> "MonthKey":
        return cls(d.year, d.month)

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        parts = text.split("-")
        if len(parts) != 2:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


DEFAULT_POLICY_MONTH = MonthKey(2018, 5)


class SeriesPoint(NamedTuple):
    month: MonthKey
    mean_mme_day: float  # NaN when the month has no records
    n_records: int


@dataclass
class ClassSeries:
    """Monthly mean MME/day for one (family, class) pair.

    Points are contiguous in month index; months without records are kept
    with ``n_records = 0`` and a NaN mean.
    """

    drug_family: str
    class_code: str  # two-digit code or "overall"
    points: list[SeriesPoint] = field(default_factory=list)
    policy_month: MonthKey = DEFAULT_POLICY_MONTH

    def months(self) -> list[MonthKey]:
        return [p.month for p in self.points]

    def values(self) -> np.ndarray:
        return np.array([p.mean_mme_day for p in self.points], dtype=float)

    def counts(self) -> np.ndarray:
        return np.array([p.n_records for p in self.points], dtype=int)

    def __len__(self) -> int:
        return len(self.points)


def _as_pairs(records) -> list[tuple[PrescriptionRecord, str | None]]:
    pairs = []
    for r in records:
        if isinstance(r, ClassifiedRecord):
            pairs.append((r.record, r.class_code.code))
        else:
            pairs.append((r, None))
    return pairs


def aggregate_monthly(
    records: Sequence[PrescriptionRecord | ClassifiedRecord],
    group_by: str = "class",
    family: str = "opioid",
    span: tuple[MonthKey, MonthKey] | None = None,
    policy_month: MonthKey = DEFAULT_POLICY_MONTH,
) -> list[ClassSeries]:
    """
    Build monthly mean-MME/day series for ``family``.

    ``group_by="class"`` yields one series per class code present (records
    must be classified); ``group_by="overall"`` pools the whole family and
    also accepts plain records.  ``span`` pins an inclusive month range;
    by default each series spans its own first..last month with records.
    """
    if group_by not in ("class", "overall"):
        raise ValueError(f"group_by must be 'class' or 'overall', got {group_by!r}")
    pairs = [(r, c) for r, c in _as_pairs(records) if r.drug_family == family]
    if group_by == "class" and any(c is None for _, c in pairs):
        raise ValueError("group_by='class' requires classified records")

    buckets: dict[str, dict[int, list[float]]] = {}
    for record, code in pairs:
        key = OVERALL if group_by == "overall" else code
        idx = MonthKey.from_date(record.fill_date).index
        buckets.setdefault(key, {}).setdefault(idx, []).append(mme_per_day(record))

    out: list[ClassSeries] = []
    for key in sorted(buckets):
        months = buckets[key]
        if span is None:
            lo, hi = min(months), max(months)
        else:
            lo, hi = span[0].index, span[1].index
        points = []
        for idx in range(lo, hi + 1):
            values = months.get(idx, ())
            n = len(values)
            # fsum is correctly rounded, so the mean is exactly permutation-
            # invariant in record order.
            mean = math.fsum(values) / n if n else math.nan
            points.append(SeriesPoint(MonthKey.from_index(idx), mean, n))
        out.append(ClassSeries(family, key, points, policy_month))
    return out


def split_pre_post(
    series: ClassSeries,
    policy_month: MonthKey = DEFAULT_POLICY_MONTH,
) -> tuple[ClassSeries, ClassSeries]:
    """Partition a series at the policy month (that month starts the post side)."""
    pre_pts = [p for p in series.points if p.month < policy_month]
    post_pts = [p for p in series.points if p.month >= policy_month]
    pre = ClassSeries(series.drug_family, series.class_code, pre_pts, policy_month)
    post = ClassSeries(series.drug_family, series.class_code, post_pts, policy_month)
    return pre, post


@dataclass(frozen=True)
class ClassSummaryRow:
    class_code: str
    n_records: int
    n_months: int
    mean_days_supply: float
    sd_days_supply: float
    mean_mme: float
    sd_mme: float
    mean_mme_day: MeanCI | None  # None when fewer than 2 months of data
    pct_of_mme: float
    pct_of_records: float


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size >= 2 else math.nan


def summarize_classes(
    classified: Sequence[ClassifiedRecord],
    family: str = "opioid",
) -> list[ClassSummaryRow]:
    """Per-class record statistics plus the CI of the monthly mean MME/day.

    Both the MME share and the record share are reported; they answer
    different questions and do not generally agree.
    """
    fam = [c for c in classified if c.record.drug_family == family]
    total_records = len(fam)
    total_mme = sum(c.record.mme_total for c in fam)

    by_code: dict[str, list[ClassifiedRecord]] = {code: [] for code in ALL_CLASS_CODES}
    for c in fam:
        by_code[c.class_code.code].append(c)

    rows: list[ClassSummaryRow] = []
    for code in ALL_CLASS_CODES:
        group = by_code[code]
        if not group:
            rows.append(ClassSummaryRow(code, 0, 0, math.nan, math.nan, math.nan,
                                        math.nan, None, 0.0, 0.0))
            continue
        days = np.array([c.record.days_supply for c in group], dtype=float)
        mme = np.array([c.record.mme_total for c in group], dtype=float)
        series = aggregate_monthly(group, group_by="class", family=family)
        pts = [p for s in series if s.class_code == code for p in s.points]
        monthly = np.array([p.mean_mme_day for p in pts if p.n_records > 0])
        ci = mean_ci(monthly) if monthly.size >= 2 else None
        rows.append(ClassSummaryRow(
            class_code=code,
            n_records=len(group),
            n_months=int(monthly.size),
            mean_days_supply=float(np.mean(days)),
            sd_days_supply=_sd(days),
            mean_mme=float(np.mean(mme)),
            sd_mme=_sd(mme),
            mean_mme_day=ci,
            pct_of_mme=100.0 * float(np.sum(mme)) / total_mme if total_mme else 0.0,
            pct_of_records=100.0 * len(group) / total_records if total_records else 0.0,
        ))
    return rows


@dataclass(frozen=True)
class PrePostCell:
    """Window average of monthly means; lo/hi are NaN below 2 months."""

    mean: float
    lo: float
    hi: float
    n_months: int


def _window_cell(monthly: np.ndarray) -> PrePostCell | None:
    if monthly.size == 0:
        return None
    if monthly.size < 2:
        return PrePostCell(float(monthly[0]), math.nan, math.nan, 1)
    ci = mean_ci(monthly)
    return PrePostCell(ci.mean, ci.lo, ci.hi, ci.n)


def pre_post_table(
    classified: Sequence[ClassifiedRecord],
    family: str = "opioid",
    policy_month: MonthKey = DEFAULT_POLICY_MONTH,
) -> dict[str, tuple[PrePostCell | None, PrePostCell | None]]:
    """Per-class pre/post window averages of the monthly mean MME/day.

    Keys cover all 16 class codes; a missing window maps to ``None``.
    """
    table: dict[str, tuple[PrePostCell | None, PrePostCell | None]] = {}
    series = {s.class_code: s for s in aggregate_monthly(
        classified, group_by="class", family=family, policy_month=policy_month)}
    for code in ALL_CLASS_CODES:
        s = series.get(code)
        if s is None:
            table[code] = (None, None)
            continue
        pre, post = split_pre_post(s, policy_month)
        pre_vals = pre.values()[pre.counts() > 0]
        post_vals = post.values()[post.counts() > 0]
        table[code] = (_window_cell(pre_vals), _window_cell(post_vals))
    return table
