import csv
import json

import pytest

from rxgeo.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small simulate -> ingest -> classify run shared by the tests."""
    root = tmp_path_factory.mktemp("pipe")
    data = root / "data.csv"
    cleaned = root / "clean.csv"
    classified = root / "classified.csv"
    assert run("simulate", "--n", 4000, "--seed", 7, "--out", data,
               "--dump-config", root / "scenario.json") == 0
    assert run("ingest", "--input", data, "--out", cleaned,
               "--report", root / "filter.json") == 0
    assert run("classify", "--input", cleaned, "--out", classified) == 0
    return root


def test_subcommands_do_not_mutate_inputs(pipeline):
    data = (pipeline / "data.csv").read_bytes()
    cleaned = (pipeline / "clean.csv").read_bytes()
    classified = (pipeline / "classified.csv").read_bytes()
    assert run("aggregate", "--input", pipeline / "classified.csv",
               "--outdir", pipeline / "series_again") == 0
    assert run("anova", "--input", pipeline / "classified.csv",
               "--out", pipeline / "anova2.json") == 0
    assert (pipeline / "data.csv").read_bytes() == data
    assert (pipeline / "clean.csv").read_bytes() == cleaned
    assert (pipeline / "classified.csv").read_bytes() == classified


def test_simulate_and_manifest(pipeline):
    manifest = json.loads((pipeline / "manifest_simulate.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 7
    assert str(pipeline / "data.csv") in manifest["outputs"]
    assert manifest["version"]


def test_filter_report_conserves(pipeline):
    rep = json.loads((pipeline / "filter.json").read_text())
    excluded = sum(rep[k] for k in ("pre_2014", "mme_exceeds_cap",
                                    "missing_or_zero_days_supply",
                                    "invalid_coordinates", "malformed_row"))
    assert rep["total_in"] == rep["total_kept"] + excluded


def test_classified_csv_has_extra_columns(pipeline):
    with open(pipeline / "classified.csv", newline="") as fh:
        header = next(csv.reader(fh))
    for col in ("d_pp", "d_pd", "d_rd", "pi_total", "class_code", "risk_level"):
        assert col in header


def test_aggregate_and_fit(pipeline):
    outdir = pipeline / "series"
    assert run("aggregate", "--input", pipeline / "classified.csv",
               "--outdir", outdir) == 0
    overall = outdir / "series_opioid_overall.csv"
    assert overall.exists()
    with open(overall, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["month_index"] == "0" or int(rows[0]["month_index"]) >= 0
    assert run("fit", "--input", overall, "--out", pipeline / "fit.json",
               "--residuals", pipeline / "resid.csv") == 0
    fit = json.loads((pipeline / "fit.json").read_text())
    assert {"orders", "coefficients", "sigma2", "bic", "n_effective"} <= set(fit)
    assert all({"name", "estimate", "std_error", "p_value"} <= set(c)
               for c in fit["coefficients"])


def test_summary_and_stats_commands(pipeline):
    results = pipeline / "results"
    assert run("summary-table", "--input", pipeline / "classified.csv",
               "--outdir", results) == 0
    assert (results / "class_summary_opioid.md").exists()
    assert (results / "pre_post_opioid.csv").exists()
    assert run("anova", "--input", pipeline / "classified.csv",
               "--out", pipeline / "anova.json") == 0
    anova = json.loads((pipeline / "anova.json").read_text())
    assert anova["statistic"] >= 0 and 0 <= anova["p_value"] <= 1
    assert run("ttest", "--input", pipeline / "classified.csv",
               "--class-code", "03", "--mu0", 50,
               "--out", pipeline / "ttest.json") == 0
    tt = json.loads((pipeline / "ttest.json").read_text())
    assert tt["mu0"] == 50.0 and "ci_lo" in tt


def test_usage_errors_exit_1(capsys, tmp_path):
    assert run("aggregate", "--input", "x.csv", "--outdir", tmp_path,
               "--policy-month", "May 2018") == 1
    err = capsys.readouterr().err
    assert "--policy-month" in err
    assert run("--no-such-flag") == 1
    assert run("fit", "--input", "x.csv", "--orders", "1,2", "--out", "y") == 1


def test_data_errors_exit_2(tmp_path, capsys):
    assert run("ingest", "--input", tmp_path / "missing.csv",
               "--out", tmp_path / "o.csv", "--report", tmp_path / "r.json") == 2
    assert "missing input file" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert run("ingest", "--input", bad, "--out", tmp_path / "o.csv",
               "--report", tmp_path / "r.json") == 2
    empty = tmp_path / "results"
    empty.mkdir()
    assert run("report", "--results-dir", empty, "--outdir", tmp_path / "rep") == 2
    err = capsys.readouterr().err
    assert "summary-table" in err or "missing stage output" in err


def test_report_requires_its_outputs(pipeline, tmp_path, capsys):
    results = pipeline / "results"
    if not (results / "class_summary_opioid.md").exists():
        run("summary-table", "--input", pipeline / "classified.csv",
            "--outdir", results)
    # its output absent -> named in the error
    assert run("report", "--results-dir", results, "--outdir", tmp_path / "r") == 2
    assert "its" in capsys.readouterr().err


def test_config_file_supplies_flags(tmp_path):
    cfg = tmp_path / "flags.json"
    out = tmp_path / "d.csv"
    cfg.write_text(json.dumps({"simulate": {"n": 200, "seed": 3,
                                            "out": str(out)}}))
    assert run("--config-file", cfg, "simulate") == 0
    assert out.exists()
    # explicit flags win over config-file defaults
    out2 = tmp_path / "e.csv"
    assert run("--config-file", cfg, "simulate", "--out", out2) == 0
    assert out2.exists()
    assert run("--config-file", tmp_path / "absent.json", "simulate") == 2


def test_pipeline_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        assert run("simulate", "--n", 1500, "--seed", 42, "--out", d / "data.csv") == 0
        assert run("ingest", "--input", d / "data.csv", "--out", d / "clean.csv",
                   "--report", d / "filter.json") == 0
        assert run("classify", "--input", d / "clean.csv",
                   "--out", d / "classified.csv") == 0
        assert run("aggregate", "--input", d / "classified.csv",
                   "--outdir", d / "series") == 0
        outs.append(d)
    a, b = outs
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "classified.csv").read_bytes() == (b / "classified.csv").read_bytes()
    for f in sorted((a / "series").glob("*.csv")):
        assert f.read_bytes() == (b / "series" / f.name).read_bytes()
