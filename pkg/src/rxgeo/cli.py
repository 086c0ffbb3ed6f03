"""Command-line pipeline: simulate -> ingest -> classify -> aggregate ->
stats / its -> report, with a reproducibility manifest per run.

Exit codes: 0 success, 1 usage error, 2 data/contract error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, arima, geo, records, report, syngen
from .intervention import EVENT_KINDS, its_batch
from .records import PrescriptionRecord, parse_csv, write_csv
from .series import (MonthKey, aggregate_monthly, pre_post_table,
                     summarize_classes)
from .stats import mean_ci, one_way_anova, t_test_greater

CLASSIFIED_EXTRA = ("d_pp", "d_pd", "d_rd", "pi_total", "class_code", "risk_level")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, never SystemExit(2)
        raise UsageError(f"{self.prog}: {message}")


def _month_arg(text: str) -> MonthKey:
    try:
        return MonthKey.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected YYYY-MM, got {text!r}") from None


def _date_arg(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected YYYY-MM-DD, got {text!r}") from None


def _family_arg(text: str) -> str:
    if text not in (*records.FAMILIES, "both"):
        raise argparse.ArgumentTypeError(
            f"expected one of {records.FAMILIES + ('both',)}, got {text!r}")
    return text


def _families(arg: str) -> tuple[str, ...]:
    return records.FAMILIES if arg == "both" else (arg,)


# --- manifest ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    argv: list[str]
    seed: int | None = None
    version: str = __version__
    started_at: str = ""
    finished_at: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def write(self, outdir: Path) -> None:
        self.finished_at = datetime.now(timezone.utc).isoformat()
        path = outdir / f"manifest_{self.command}.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _start_manifest(args, command: str) -> RunManifest:
    return RunManifest(command=command, argv=sys.argv[1:],
                       seed=getattr(args, "seed", None),
                       started_at=datetime.now(timezone.utc).isoformat())


def _track_input(manifest: RunManifest, path: Path) -> None:
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    manifest.inputs[str(path)] = _sha256(path)


# --- shared I/O --------------------------------------------------------------

def _read_records(path: Path, manifest: RunManifest) -> list[PrescriptionRecord]:
    _track_input(manifest, path)
    with open(path, newline="") as fh:
        recs, errors = parse_csv(fh)
    if errors:
        raise DataError(f"{path}: {len(errors)} malformed rows "
                        f"(first: line {errors[0].line}: {errors[0].reason})")
    return recs


def _write_classified_csv(path: Path, classified) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(records.CSV_COLUMNS + CLASSIFIED_EXTRA)
        for c in classified:
            r = c.record
            writer.writerow([
                r.record_id, r.fill_date.isoformat(),
                repr(r.patient.lat), repr(r.patient.lon),
                repr(r.prescriber.lat), repr(r.prescriber.lon),
                repr(r.dispenser.lat), repr(r.dispenser.lon),
                repr(r.mme_total), r.days_supply, r.drug_family,
                repr(c.geometry.d_pp), repr(c.geometry.d_pd), repr(c.geometry.d_rd),
                repr(c.geometry.pi_total), c.class_code.code, c.risk.level,
            ])


def _read_classified_csv(path: Path, manifest: RunManifest) -> list[geo.ClassifiedRecord]:
    _track_input(manifest, path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = set(records.CSV_COLUMNS) | set(CLASSIFIED_EXTRA)
        have = set(reader.fieldnames or ())
        if not need <= have:
            raise DataError(f"{path}: not a classified CSV "
                            f"(missing columns {sorted(need - have)})")
        for row in reader:
            base = {k: row[k] for k in records.CSV_COLUMNS}
            rec = records._parse_row(base)
            g = geo.TriangleGeometry(float(row["d_pp"]), float(row["d_pd"]),
                                     float(row["d_rd"]))
            code = row["class_code"]
            cc = geo.ClassCode(int(code[0]), geo.DisparityLabel(int(code[1])))
            out.append(geo.ClassifiedRecord(rec, g, cc,
                                            geo.RiskLevel(int(row["risk_level"]))))
    return out


def _monthly_groups(classified, family: str) -> dict[str, list[float]]:
    """Per-class lists of monthly means (months with records only)."""
    groups: dict[str, list[float]] = {}
    for s in aggregate_monthly(classified, group_by="class", family=family):
        vals = [p.mean_mme_day for p in s.points if p.n_records > 0]
        groups[s.class_code] = vals
    return groups


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv_rows(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


# --- subcommands ---------------------------------------------------------------

def _cmd_simulate(args) -> int:
    manifest = _start_manifest(args, "simulate")
    if args.config:
        cfg_path = Path(args.config)
        _track_input(manifest, cfg_path)
        try:
            cfg = syngen.config_from_dict(json.loads(cfg_path.read_text()))
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad scenario config {cfg_path}: {exc}") from exc
    else:
        cfg = syngen.default_config()
    recs = syngen.generate(cfg, args.n, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(recs, out)
    manifest.outputs.append(str(out))
    if args.dump_config:
        dump = Path(args.dump_config)
        _write_json(dump, syngen.config_to_dict(cfg))
        manifest.outputs.append(str(dump))
    manifest.write(out.parent)
    print(f"simulate: wrote {len(recs)} records to {out}")
    return 0


def _cmd_ingest(args) -> int:
    manifest = _start_manifest(args, "ingest")
    in_path = Path(args.input)
    _track_input(manifest, in_path)
    with open(in_path, newline="") as fh:
        try:
            recs, errors = parse_csv(fh)
        except records.SchemaError as exc:
            raise DataError(str(exc)) from exc
    kept, rep = records.clean(recs, cap=args.cap, cutoff_date=args.cutoff_date,
                              n_malformed=len(errors))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(kept, out)
    payload = rep.to_dict()
    payload["row_errors"] = [{"line": e.line, "reason": e.reason} for e in errors]
    _write_json(Path(args.report), payload)
    manifest.outputs += [str(out), args.report]
    manifest.write(out.parent)
    print(f"ingest: kept {rep.total_kept}/{rep.total_in} records "
          f"({rep.total_excluded} excluded)")
    return 0


def _cmd_classify(args) -> int:
    manifest = _start_manifest(args, "classify")
    recs = _read_records(Path(args.input), manifest)
    thresholds = geo.ClassThresholds(near_miles=args.near_miles,
                                     isolation_ratio=args.isolation_ratio)
    classified = geo.classify_records(recs, thresholds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_classified_csv(out, classified)
    manifest.outputs.append(str(out))
    manifest.write(out.parent)
    counts = geo.class_counts(classified)
    print("classify: " + " ".join(f"{k}={v}" for k, v in counts.items() if v))
    return 0


def _series_filename(family: str, code: str) -> str:
    return f"series_{family}_{code}.csv"


def _write_series_csv(path: Path, s) -> None:
    rows = [["month_index", "year", "month", "mean_mme_day", "n_records"]]
    for p in s.points:
        mean = "" if math.isnan(p.mean_mme_day) else repr(p.mean_mme_day)
        rows.append([p.month.index, p.month.year, p.month.month, mean, p.n_records])
    _write_csv_rows(path, rows)


def _cmd_aggregate(args) -> int:
    manifest = _start_manifest(args, "aggregate")
    classified = _read_classified_csv(Path(args.input), manifest)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for family in _families(args.family):
        all_series = aggregate_monthly(classified, group_by="class", family=family,
                                       policy_month=args.policy_month)
        all_series += aggregate_monthly(classified, group_by="overall", family=family,
                                        policy_month=args.policy_month)
        for s in all_series:
            path = outdir / _series_filename(family, s.class_code)
            _write_series_csv(path, s)
            manifest.outputs.append(str(path))
            vals = s.values()[s.counts() > 0]
            summary[f"{family}/{s.class_code}"] = {
                "n_months": int(len(s)),
                "n_records": int(s.counts().sum()),
                "mean_mme_day": float(np.mean(vals)) if vals.size else None,
            }
    _write_json(outdir / "aggregate_summary.json", summary)
    manifest.outputs.append(str(outdir / "aggregate_summary.json"))
    manifest.write(outdir)
    print(f"aggregate: wrote {len(manifest.outputs) - 1} series files to {outdir}")
    return 0


def _cmd_summary_table(args) -> int:
    manifest = _start_manifest(args, "summary-table")
    classified = _read_classified_csv(Path(args.input), manifest)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for family in _families(args.family):
        rows = summarize_classes(classified, family=family)
        md = report.class_summary_markdown(rows, family)
        (outdir / f"class_summary_{family}.md").write_text(md)
        _write_csv_rows(outdir / f"class_summary_{family}.csv",
                        report.class_summary_csv_rows(rows))
        grid = pre_post_table(classified, family=family,
                              policy_month=args.policy_month)
        (outdir / f"pre_post_{family}.md").write_text(
            report.pre_post_markdown(grid, family))
        _write_csv_rows(outdir / f"pre_post_{family}.csv",
                        report.pre_post_csv_rows(grid))
        manifest.outputs += [str(outdir / f"class_summary_{family}.md"),
                             str(outdir / f"class_summary_{family}.csv"),
                             str(outdir / f"pre_post_{family}.md"),
                             str(outdir / f"pre_post_{family}.csv")]
    manifest.write(outdir)
    print(f"summary-table: wrote tables to {args.outdir}")
    return 0


def _cmd_anova(args) -> int:
    manifest = _start_manifest(args, "anova")
    classified = _read_classified_csv(Path(args.input), manifest)
    if args.unit == "monthly":
        groups = [v for v in _monthly_groups(classified, args.family).values()
                  if len(v) >= 2]
    else:
        by_code: dict[str, list[float]] = {}
        for c in classified:
            if c.record.drug_family == args.family:
                by_code.setdefault(c.class_code.code, []).append(c.mme_day)
        groups = [v for v in by_code.values() if len(v) >= 2]
    if len(groups) < 2:
        raise DataError("fewer than 2 classes have enough data for ANOVA")
    res = one_way_anova(groups)
    payload = {"statistic": res.statistic, "df": list(res.df),
               "p_value": res.p_value, "n_groups": len(groups), "unit": args.unit}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    manifest.outputs.append(str(out))
    manifest.write(out.parent)
    print(f"anova: F = {res.statistic:.4f}, df = ({res.df[0]:.0f}, {res.df[1]:.0f}), "
          f"p = {report.format_p(res.p_value)}")
    return 0


def _cmd_ttest(args) -> int:
    manifest = _start_manifest(args, "ttest")
    classified = _read_classified_csv(Path(args.input), manifest)
    if args.unit == "monthly":
        values = _monthly_groups(classified, args.family).get(args.class_code, [])
    else:
        values = [c.mme_day for c in classified
                  if c.record.drug_family == args.family
                  and c.class_code.code == args.class_code]
    if len(values) < 2:
        raise DataError(f"class {args.class_code} has fewer than 2 {args.unit} values")
    res = t_test_greater(values, args.mu0)
    ci = mean_ci(values)
    payload = {"statistic": res.statistic, "df": list(res.df), "p_value": res.p_value,
               "mu0": args.mu0, "mean": ci.mean, "ci_lo": ci.lo, "ci_hi": ci.hi,
               "n": ci.n, "unit": args.unit}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    manifest.outputs.append(str(out))
    manifest.write(out.parent)
    print(f"ttest: class {args.class_code} vs mu0={args.mu0}: "
          f"t = {res.statistic:.4f}, p = {report.format_p(res.p_value)}")
    return 0


def _orders_arg(text: str):
    if text == "auto":
        return "auto"
    parts = text.split(",")
    if len(parts) not in (3, 6):
        raise argparse.ArgumentTypeError(
            f"expected 'auto' or p,d,q[,P,D,Q], got {text!r}")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-integer order in {text!r}") from None
    return nums


def _read_series_csv(path: Path, manifest: RunManifest) -> np.ndarray:
    _track_input(manifest, path)
    values = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "mean_mme_day" not in reader.fieldnames:
            raise DataError(f"{path}: expected an aggregate series CSV "
                            "(missing mean_mme_day column)")
        for row in reader:
            raw = row["mean_mme_day"]
            values.append(float(raw) if raw not in ("", None) else math.nan)
    if not values:
        raise DataError(f"{path}: empty series")
    return np.asarray(values)


def _fit_to_payload(f: arima.ArimaFit) -> dict:
    o = f.orders
    return {
        "orders": {"p": o.p, "d": o.d, "q": o.q, "P": o.P, "D": o.D, "Q": o.Q,
                   "s": o.s},
        "model": o.label(),
        "coefficients": [
            {"name": c.name, "estimate": c.estimate, "std_error": c.std_error,
             "p_value": c.p_value} for c in f.coefficients()],
        "sigma2": f.params.sigma2,
        "bic": f.bic,
        "n_effective": f.n_effective,
        "n_interpolated": f.n_interpolated,
        "degenerate": f.degenerate,
    }


def _cmd_fit(args) -> int:
    manifest = _start_manifest(args, "fit")
    y = _read_series_csv(Path(args.input), manifest)
    if args.impute == "none" and np.any(~np.isfinite(y)):
        raise DataError("series has missing months and --impute none was given")
    try:
        if args.orders == "auto":
            f = arima.auto_fit(y, s=args.season)
        else:
            nums = args.orders
            if len(nums) == 3:
                orders = arima.ArimaOrders(nums[0], nums[1], nums[2], s=args.season)
            else:
                orders = arima.ArimaOrders(*nums, s=args.season)
            f = arima.fit(y, orders)
    except (arima.FitError, ValueError) as exc:
        raise DataError(f"fit failed: {exc}") from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, _fit_to_payload(f))
    manifest.outputs.append(str(out))
    if args.residuals:
        rows = [["t", "residual"]] + [[i, repr(float(r))]
                                      for i, r in enumerate(f.residuals)]
        _write_csv_rows(Path(args.residuals), rows)
        manifest.outputs.append(args.residuals)
    manifest.write(out.parent)
    print(f"fit: {f.orders.label()} bic={f.bic:.2f} sigma2={f.params.sigma2:.4f}")
    return 0


def _its_result_payload(res) -> dict:
    return {
        "family": res.drug_family,
        "class_code": res.class_code,
        "policy_month": str(res.policy_month),
        "pre_fit": _fit_to_payload(res.pre_fit),
        "arimax": {
            "model": res.arimax.orders.label(),
            "coefficients": [
                {"name": c.name, "estimate": c.estimate, "std_error": c.std_error,
                 "p_value": c.p_value, "stars": c.stars}
                for c in res.arimax.coefficients()],
            "bic": res.arimax.bic,
        },
        "dropped_events": res.dropped_events,
        "mismatch": [
            {"month": str(m.month),
             "delta": None if math.isnan(m.delta) else m.delta,
             "outside_interval": m.outside_interval}
            for m in res.mismatch],
    }


def _cmd_its(args) -> int:
    manifest = _start_manifest(args, "its")
    classified = _read_classified_csv(Path(args.input), manifest)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    event_kinds = args.events.split(",")
    for kind in event_kinds:
        if kind not in EVENT_KINDS:
            raise DataError(f"unknown event kind {kind!r}; expected {EVENT_KINDS}")

    all_series = []
    for family in _families(args.family):
        fam_records = [c for c in classified if c.record.drug_family == family]
        if not fam_records:
            continue
        months = [MonthKey.from_date(c.record.fill_date) for c in fam_records]
        span = (min(months), max(months))
        all_series += aggregate_monthly(fam_records, group_by="overall",
                                        family=family, span=span,
                                        policy_month=args.policy_month)
        all_series += aggregate_monthly(fam_records, group_by="class",
                                        family=family, span=span,
                                        policy_month=args.policy_month)

    batch = its_batch(all_series, policy_month=args.policy_month,
                      event_kinds=event_kinds, alpha=args.alpha,
                      announce_month=args.announce_month, threads=args.threads)
    by_key = {(s.drug_family, s.class_code): s for s in all_series}
    payload = {"results": [_its_result_payload(r) for r in batch.results],
               "failures": batch.failures}
    _write_json(outdir / "its_results.json", payload)
    manifest.outputs.append(str(outdir / "its_results.json"))

    md = report.arimax_markdown(batch.results, alpha=args.alpha)
    (outdir / "its_coefficients.md").write_text(md)
    rows = [report.TABLE_HEADER] + report.arimax_table_rows(batch.results,
                                                            alpha=args.alpha)
    _write_csv_rows(outdir / "its_coefficients.csv", rows)
    manifest.outputs += [str(outdir / "its_coefficients.md"),
                         str(outdir / "its_coefficients.csv")]

    for res in batch.results:
        s = by_key[(res.drug_family, res.class_code)]
        path = outdir / f"plotdata_{res.drug_family}_{res.class_code}.csv"
        _write_csv_rows(path, report.plot_data_rows(res, s))
        manifest.outputs.append(str(path))
    manifest.write(outdir)
    n_sig = sum(1 for r in batch.results if r.significant_events(args.alpha))
    print(f"its: analyzed {len(batch.results)} series "
          f"({len(batch.failures)} failures, {n_sig} with significant events)")
    return 0


def _cmd_report(args) -> int:
    manifest = _start_manifest(args, "report")
    results_dir = Path(args.results_dir)
    if not results_dir.is_dir():
        raise DataError(f"results directory not found: {results_dir}")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    sections = ["# Analysis report\n"]
    wanted = sorted(results_dir.glob("class_summary_*.md")) \
        + sorted(results_dir.glob("pre_post_*.md"))
    its_md = results_dir / "its_coefficients.md"
    if not wanted:
        raise DataError(f"missing stage output: no class_summary_*.md / "
                        f"pre_post_*.md in {results_dir} (run summary-table first)")
    if not its_md.exists():
        raise DataError(f"missing stage output: {its_md} (run its first)")
    for path in [*wanted, its_md]:
        _track_input(manifest, path)
        sections.append(path.read_text())

    plots = sorted(results_dir.glob("plotdata_*.csv"))
    if plots:
        sections.append("## Plot data files\n\n"
                        + "\n".join(f"- {p.name}" for p in plots) + "\n")
    for p in plots:
        target = outdir / p.name
        target.write_bytes(p.read_bytes())
        manifest.outputs.append(str(target))

    out_md = outdir / "report.md"
    out_md.write_text("\n".join(sections))
    manifest.outputs.append(str(out_md))
    manifest.write(outdir)
    print(f"report: wrote {out_md}")
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="rxgeo", description=__doc__, epilog=(
        "A JSON config file (--config-file) may supply any subcommand flag as "
        '{"<subcommand>": {"<flag-name>": value, ...}}; command-line flags win.'))
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config-file", default=None,
                        help="JSON file of per-subcommand flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("simulate", help="generate a synthetic transaction CSV")
    p.add_argument("--config", help="scenario JSON (default: built-in scenario)")
    p.add_argument("--n", type=int, required=True, help="target record count")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-config", help="also write the scenario JSON used")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="parse and filter a transaction CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="cleaned records CSV")
    p.add_argument("--report", required=True, help="filter report JSON")
    p.add_argument("--cap", type=float, default=records.DEFAULT_MME_CAP)
    p.add_argument("--cutoff-date", type=_date_arg, default=records.DEFAULT_CUTOFF)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("classify", help="append geometry and class codes")
    p.add_argument("--input", required=True, help="cleaned records CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--near-miles", type=float, default=50.0)
    p.add_argument("--isolation-ratio", type=float, default=3.0)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("aggregate", help="build monthly series CSVs")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--outdir", required=True)
    p.add_argument("--family", type=_family_arg, default="both")
    p.add_argument("--policy-month", type=_month_arg, default=MonthKey(2018, 5))
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("summary-table", help="per-class and pre/post tables")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--outdir", required=True)
    p.add_argument("--family", type=_family_arg, default="opioid")
    p.add_argument("--policy-month", type=_month_arg, default=MonthKey(2018, 5))
    p.set_defaults(func=_cmd_summary_table)

    p = sub.add_parser("anova", help="one-way ANOVA across classes")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--family", type=_family_arg, default="opioid")
    p.add_argument("--unit", choices=("monthly", "records"), default="monthly")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_anova)

    p = sub.add_parser("ttest", help="one-sided t-test of a class against a threshold")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--family", type=_family_arg, default="opioid")
    p.add_argument("--class-code", required=True)
    p.add_argument("--mu0", type=float, required=True)
    p.add_argument("--unit", choices=("monthly", "records"), default="monthly")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ttest)

    p = sub.add_parser("fit", help="fit one series (auto or fixed orders)")
    p.add_argument("--input", required=True, help="series CSV from aggregate")
    p.add_argument("--season", type=int, default=12)
    p.add_argument("--orders", type=_orders_arg, default="auto",
                   help="'auto' or p,d,q[,P,D,Q]")
    p.add_argument("--impute", choices=("linear", "none"), default="linear")
    p.add_argument("--out", required=True, help="fit JSON")
    p.add_argument("--residuals", help="optional residuals CSV")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("its", help="interrupted-time-series analysis per series")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--outdir", required=True)
    p.add_argument("--family", type=_family_arg, default="both")
    p.add_argument("--policy-month", type=_month_arg, default=MonthKey(2018, 5))
    p.add_argument("--events", default=",".join(EVENT_KINDS))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--announce-month", type=_month_arg, default=None,
                   help="optional second onset for announcement effects")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_its)

    p = sub.add_parser("report", help="assemble the Markdown report bundle")
    p.add_argument("--results-dir", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser, dict(sub.choices)


def _apply_config_file(argv: list[str], subparsers) -> list[str] | None:
    """Inject per-subcommand flag defaults from a --config-file JSON."""
    if "--config-file" not in argv:
        return argv
    i = argv.index("--config-file")
    if i + 1 >= len(argv):
        raise UsageError("rxgeo: --config-file requires a path")
    path = Path(argv[i + 1])
    argv = argv[:i] + argv[i + 2:]
    try:
        defaults = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"bad --config-file {path}: {exc}") from exc
    command = next((a for a in argv if not a.startswith("-")), None)
    section = defaults.get(command) if isinstance(defaults, dict) else None
    if command in subparsers and isinstance(section, dict):
        sp = subparsers[command]
        kv = {key.replace("-", "_"): value for key, value in section.items()}
        sp.set_defaults(**kv)
        for action in sp._actions:
            if action.dest in kv:
                action.required = False
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subparsers = build_parser()
    try:
        argv = _apply_config_file(argv, subparsers)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, records.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
