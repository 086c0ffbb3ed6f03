"""Seeded synthetic prescription-record generator.

Scenarios are calibrated per class: days of supply and total MME are drawn
from truncated normals whose location is solved so that each class's mean
MME/day lands on its configured target, stakeholder coordinates are placed
on the sphere so the geometric classifier reproduces the intended class
code exactly, and a per-class post-policy multiplier supplies the ground-
truth intervention effect for end-to-end verification.
"""

from __future__ import annotations

import calendar
import math
from dataclasses import dataclass, field, asdict
from datetime import date

import numpy as np

from ._special import normal_cdf, normal_ppf_vec
from .records import FAMILIES, GeoPoint, PrescriptionRecord, write_csv  # noqa: F401
from .series import MonthKey, DEFAULT_POLICY_MONTH

EARTH_RADIUS_MILES = 3958.7613

# Per-class defaults: record share, days-supply and total-MME moments, and
# the mean MME/day the generator is calibrated to reproduce.
_DEFAULT_CLASS_TABLE = (
    # code, share,  mean_days, sd_days, mean_mme, sd_mme,  target_mme_day
    ("00", 12.05, 14.89, 4.87, 802.32, 310.46, 48.88),
    ("01", 35.76, 15.05, 5.09, 771.95, 292.38, 46.90),
    ("02", 3.87, 16.04, 4.91, 809.49, 304.97, 48.66),
    ("03", 40.65, 15.40, 5.15, 800.95, 302.02, 47.96),
    ("10", 0.19, 8.84, 3.74, 478.36, 362.17, 44.00),
    ("11", 1.29, 14.89, 5.95, 815.39, 395.73, 47.51),
    ("12", 0.08, 19.37, 7.62, 1064.53, 994.58, 55.26),
    ("13", 1.66, 14.06, 5.20, 770.80, 357.95, 49.08),
    ("20", 0.16, 7.56, 3.38, 309.30, 219.66, 37.84),
    ("21", 0.80, 13.42, 6.25, 704.96, 411.89, 46.40),
    ("22", 0.07, 18.93, 6.97, 1110.24, 746.99, 91.71),
    ("23", 1.17, 12.69, 5.09, 721.36, 384.68, 52.46),
    ("30", 0.19, 7.66, 3.15, 322.93, 230.59, 37.78),
    ("31", 1.22, 12.69, 5.03, 723.15, 1336.44, 47.50),
    ("32", 0.14, 20.06, 7.51, 1374.09, 1153.52, 96.50),
    ("33", 1.87, 12.81, 4.67, 761.86, 375.38, 56.00),
)

# Overall mean MME/day the default opioid scenario is scaled to hit in the
# pre-policy window, and the post/pre ratio applied after the policy month.
DEFAULT_PRE_MEAN = 53.68
DEFAULT_POST_MEAN = 51.09

_PI_RANGES = ((130.0, 248.0), (252.0, 498.0), (505.0, 995.0), (1010.0, 2400.0))


@dataclass(frozen=True)
class ClassProfile:
    class_code: str
    record_share: float
    mean_days: float
    sd_days: float
    mean_mme: float
    sd_mme: float
    target_mme_day: float
    post_policy_multiplier: float = 1.0


@dataclass
class FamilySettings:
    """Per-family knobs: volume share, level scaling and class profiles."""

    record_share: float
    level_scale: float
    profiles: list[ClassProfile]

    def shares(self) -> np.ndarray:
        raw = np.array([p.record_share for p in self.profiles], dtype=float)
        if np.any(raw < 0) or raw.sum() <= 0:
            raise ValueError("class shares must be nonnegative with positive sum")
        return raw / raw.sum()


@dataclass
class ScenarioConfig:
    start: MonthKey = MonthKey(2014, 1)
    end: MonthKey = MonthKey(2021, 11)
    policy_month: MonthKey = DEFAULT_POLICY_MONTH
    trend_slope: float = 0.0          # relative level drift per month
    seasonal_amplitude: float = 0.02  # relative, period 12
    noise_sd: float = 0.01            # relative month-level disturbance
    seed: int = 0
    families: dict[str, FamilySettings] = field(default_factory=dict)

    def n_months(self) -> int:
        return self.end.index - self.start.index + 1

    def month_keys(self) -> list[MonthKey]:
        return [MonthKey.from_index(i)
                for i in range(self.start.index, self.end.index + 1)]

    def validate(self) -> None:
        if self.end < self.start:
            raise ValueError("end month precedes start month")
        if not self.start <= self.policy_month <= self.end:
            raise ValueError("policy month outside the scenario range")
        for fam in self.families:
            if fam not in FAMILIES:
                raise ValueError(f"unknown drug family {fam!r}")


def _truncnorm_mean(mu: float, sigma: float, lower: float) -> float:
    alpha = (lower - mu) / sigma
    tail = 1.0 - normal_cdf(alpha)
    if tail <= 0.0:
        return lower
    pdf = math.exp(-0.5 * alpha * alpha) / math.sqrt(2.0 * math.pi)
    return mu + sigma * pdf / tail


def _solve_truncnorm_location(target: float, sigma: float, lower: float = 0.0) -> float:
    """Location mu with E[TN(mu, sigma, >= lower)] = target (bisection)."""
    if target <= lower:
        raise ValueError(f"target mean {target} must exceed the bound {lower}")
    lo, hi = target - 10.0 * sigma, target + sigma
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _truncnorm_mean(mid, sigma, lower) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10 * max(1.0, abs(target)):
            break
    return 0.5 * (lo + hi)


def _rounded_days_distribution(mean: float, sd: float) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of each integer day count under the rounded, >=1 draw."""
    k_max = max(2, int(math.ceil(mean + 10.0 * sd)))
    ks = np.arange(1, k_max + 1)
    upper = np.array([normal_cdf((k + 0.5 - mean) / sd) for k in ks])
    lower = np.array([normal_cdf((k - 0.5 - mean) / sd) for k in ks])
    probs = upper - lower
    probs[0] = upper[0] - normal_cdf((0.5 - mean) / sd)
    total = probs.sum()
    if total <= 0:
        raise ValueError("degenerate days-supply distribution")
    return ks, probs / total


def _mean_inverse_days(mean: float, sd: float) -> float:
    ks, probs = _rounded_days_distribution(mean, sd)
    return float((probs / ks).sum())


def default_config(seed: int = 0) -> ScenarioConfig:
    """
    Default two-family scenario over 2014-01..2021-11.

    Opioid class targets are scaled so that the pre-policy overall mean
    MME/day is 53.68, and every opioid class carries the same post-policy
    multiplier 51.09 / 53.68; the control family has no policy effect.
    """
    cfg = ScenarioConfig(seed=seed)
    months = cfg.month_keys()
    pre_factors = [_month_factor(cfg, m) for m in months if m < cfg.policy_month]
    mean_factor = sum(pre_factors) / len(pre_factors)

    shares_raw = np.array([row[1] for row in _DEFAULT_CLASS_TABLE])
    shares = shares_raw / shares_raw.sum()
    base_mean = float(sum(s * row[6] for s, row in zip(shares, _DEFAULT_CLASS_TABLE)))
    scale = DEFAULT_PRE_MEAN / (base_mean * mean_factor)
    opioid_mult = DEFAULT_POST_MEAN / DEFAULT_PRE_MEAN

    def build(mult: float) -> list[ClassProfile]:
        return [ClassProfile(code, share, mean_days, sd_days, mean_mme, sd_mme,
                             target, post_policy_multiplier=mult)
                for code, share, mean_days, sd_days, mean_mme, sd_mme, target
                in _DEFAULT_CLASS_TABLE]

    cfg.families = {
        "opioid": FamilySettings(record_share=0.75, level_scale=scale,
                                 profiles=build(opioid_mult)),
        "benzodiazepine": FamilySettings(record_share=0.25, level_scale=scale,
                                         profiles=build(1.0)),
    }
    return cfg


def _month_factor(cfg: ScenarioConfig, month: MonthKey) -> float:
    t = month.index - cfg.start.index
    seasonal = math.sin(2.0 * math.pi * (month.month - 1) / 12.0)
    return (1.0 + cfg.trend_slope * t) * (1.0 + cfg.seasonal_amplitude * seasonal)


def _geodesic(lat: np.ndarray, lon: np.ndarray, bearing: np.ndarray,
              miles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct great-circle step: endpoint after ``miles`` along ``bearing``."""
    delta = miles / EARTH_RADIUS_MILES
    lat2 = np.arcsin(np.sin(lat) * np.cos(delta)
                     + np.cos(lat) * np.sin(delta) * np.cos(bearing))
    lon2 = lon + np.arctan2(np.sin(bearing) * np.sin(delta) * np.cos(lat),
                            np.cos(delta) - np.sin(lat) * np.sin(lat2))
    lon2 = (lon2 + math.pi) % (2.0 * math.pi) - math.pi
    return lat2, lon2


def _triangle_sides(pi_total: np.ndarray, disparity: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Side lengths (a, b, c) of the stakeholder triangle: a and b are the
    apex's two edges, c joins the remaining pair.  Isolation patterns use a
    short base far from the apex; the "otherwise" pattern is mildly scalene
    so no vertex can satisfy the isolation rule.
    """
    if disparity == 3:
        return 0.33 * pi_total, 0.37 * pi_total, 0.30 * pi_total
    base = np.minimum(40.0, pi_total / 15.0)
    far = (pi_total - base) / 2.0
    return far, far, base


def _place_triangles(n: int, pi_lo: float, pi_hi: float, disparity: int,
                     rng: np.random.Generator):
    """Random placements with exact target side lengths; returns the three
    stakeholder coordinate arrays ordered (patient, prescriber, dispenser)."""
    pi_total = rng.uniform(pi_lo, pi_hi, n)
    a, b, c = _triangle_sides(pi_total, disparity, rng)

    lat1 = np.radians(rng.uniform(-60.0, 60.0, n))
    lon1 = np.radians(rng.uniform(-180.0, 180.0, n))
    bearing = rng.uniform(0.0, 2.0 * math.pi, n)

    ah, bh, ch = (a / EARTH_RADIUS_MILES, b / EARTH_RADIUS_MILES,
                  c / EARTH_RADIUS_MILES)
    cos_gamma = (np.cos(ch) - np.cos(ah) * np.cos(bh)) / (np.sin(ah) * np.sin(bh))
    gamma = np.arccos(np.clip(cos_gamma, -1.0, 1.0))

    lat2, lon2 = _geodesic(lat1, lon1, bearing, a)
    lat3, lon3 = _geodesic(lat1, lon1, bearing + gamma, b)

    apex = np.degrees([lat1, lon1])
    v2 = np.degrees([lat2, lon2])
    v3 = np.degrees([lat3, lon3])
    if disparity == 0:    # patient isolated: apex=patient, base=prescriber+dispenser
        return apex, v2, v3
    if disparity == 1:    # prescriber isolated
        return v2, apex, v3
    if disparity == 2:    # dispenser isolated
        return v2, v3, apex
    return apex, v2, v3   # otherwise: apex edges 0.33/0.37, base 0.30


def _truncnorm_draws(rng: np.random.Generator, mu: float, sigma: float,
                     lower: float, size: int) -> np.ndarray:
    """Inverse-CDF truncated-normal draws (one uniform per record)."""
    p_lo = normal_cdf((lower - mu) / sigma)
    u = rng.uniform(p_lo, 1.0, size)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return mu + sigma * normal_ppf_vec(u)


def generate(config: ScenarioConfig, n_records: int, seed: int | None = None
             ) -> list[PrescriptionRecord]:
    """
    Draw a synthetic transaction set.

    Record counts per month are Poisson around the family's share of
    ``n_records``; each record gets a class by share, a rounded truncated-
    normal days supply, a truncated-normal total MME calibrated so the
    class mean MME/day matches its target (times trend/seasonal/noise
    month factors, times the class multiplier after the policy month), and
    coordinates constructed to reproduce the intended class code exactly.
    """
    config.validate()
    if n_records <= 0:
        raise ValueError("n_records must be positive")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    months = config.month_keys()
    n_months = len(months)

    records: list[PrescriptionRecord] = []
    serial = 0
    for family in FAMILIES:
        if family not in config.families:
            continue
        fam = config.families[family]
        profiles = fam.profiles
        shares = fam.shares()

        # Pre-solve the per-class MME draw locations.
        mme_locs, mme_sds, day_stats, mults = [], [], [], []
        for p in profiles:
            inv_days = _mean_inverse_days(p.mean_days, p.sd_days)
            target_total = p.target_mme_day * fam.level_scale / inv_days
            mme_locs.append(_solve_truncnorm_location(target_total, p.sd_mme))
            mme_sds.append(p.sd_mme)
            day_stats.append((p.mean_days, p.sd_days))
            mults.append(p.post_policy_multiplier)

        per_month = n_records * fam.record_share / n_months
        month_noise = rng.normal(0.0, config.noise_sd, n_months)
        counts = rng.poisson(per_month, n_months)

        for mi, month in enumerate(months):
            count = int(counts[mi])
            if count == 0:
                continue
            factor = _month_factor(config, month) * (1.0 + month_noise[mi])
            post = month >= config.policy_month
            class_idx = rng.choice(len(profiles), size=count, p=shares)
            days_in_month = calendar.monthrange(month.year, month.month)[1]
            days_of_month = rng.integers(1, days_in_month + 1, count)

            for ci in range(len(profiles)):
                sel = np.where(class_idx == ci)[0]
                if sel.size == 0:
                    continue
                prof = profiles[ci]
                mean_days, sd_days = day_stats[ci]
                raw_days = _truncnorm_draws(rng, mean_days, sd_days, 0.5, sel.size)
                days = np.maximum(1, np.floor(raw_days + 0.5).astype(int))
                mme = _truncnorm_draws(rng, mme_locs[ci], mme_sds[ci], 0.0, sel.size)
                mme = mme * factor * (mults[ci] if post else 1.0)

                level = int(prof.class_code[0])
                disp = int(prof.class_code[1])
                pi_lo, pi_hi = _PI_RANGES[level]
                patient, prescriber, dispenser = _place_triangles(
                    sel.size, pi_lo, pi_hi, disp, rng)

                for j, rec_row in enumerate(sel):
                    serial += 1
                    records.append(PrescriptionRecord(
                        record_id=f"r{serial:07d}-{prof.class_code}",
                        fill_date=date(month.year, month.month,
                                       int(days_of_month[rec_row])),
                        patient=GeoPoint(float(patient[0][j]), float(patient[1][j])),
                        prescriber=GeoPoint(float(prescriber[0][j]),
                                            float(prescriber[1][j])),
                        dispenser=GeoPoint(float(dispenser[0][j]),
                                           float(dispenser[1][j])),
                        mme_total=float(mme[j]),
                        days_supply=int(days[j]),
                        drug_family=family,
                    ))
    return records


def intended_class_code(record: PrescriptionRecord) -> str:
    """The class a generated record was drawn for (encoded in its id)."""
    return record.record_id.rsplit("-", 1)[-1]


# --- JSON round-trip for scenario files ------------------------------------

def config_to_dict(config: ScenarioConfig) -> dict:
    d = {
        "start": str(config.start),
        "end": str(config.end),
        "policy_month": str(config.policy_month),
        "trend_slope": config.trend_slope,
        "seasonal_amplitude": config.seasonal_amplitude,
        "noise_sd": config.noise_sd,
        "seed": config.seed,
        "families": {},
    }
    for name, fam in config.families.items():
        d["families"][name] = {
            "record_share": fam.record_share,
            "level_scale": fam.level_scale,
            "profiles": [asdict(p) for p in fam.profiles],
        }
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    cfg = ScenarioConfig(
        start=MonthKey.parse(d["start"]),
        end=MonthKey.parse(d["end"]),
        policy_month=MonthKey.parse(d["policy_month"]),
        trend_slope=float(d.get("trend_slope", 0.0)),
        seasonal_amplitude=float(d.get("seasonal_amplitude", 0.0)),
        noise_sd=float(d.get("noise_sd", 0.0)),
        seed=int(d.get("seed", 0)),
    )
    for name, fam in d.get("families", {}).items():
        cfg.families[name] = FamilySettings(
            record_share=float(fam["record_share"]),
            level_scale=float(fam["level_scale"]),
            profiles=[ClassProfile(**p) for p in fam["profiles"]],
        )
    cfg.validate()
    return cfg
