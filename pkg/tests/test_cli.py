"""End-to-end tests of the command-line interface via main()."""

import json

import pytest

from repscale import load_law_spec, read_report
from repscale.cli import main
from repscale.data import load_native_csv
from repscale.reference import STANDARD_WD_BASE


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def sweep_csv(tmp_path_factory):
    """A noiseless combined single+multi epoch sweep from the add1 reference law."""
    root = tmp_path_factory.mktemp("cli-data")
    single = root / "single.csv"
    multi = root / "multi.csv"
    assert run_cli("synth", "--preset", "grid-std-single", "--ref", "std-add1",
                   "--out", str(single)) == 0
    assert run_cli("synth", "--preset", "grid-std-multi", "--ref", "std-add1",
                   "--out", str(multi)) == 0
    combined = root / "sweep.csv"
    lines = single.read_text().splitlines()
    lines += multi.read_text().splitlines()[1:]
    combined.write_text("\n".join(lines) + "\n")
    return combined


def test_synth_writes_loadable_csv(sweep_csv):
    ds = load_native_csv(sweep_csv)
    assert len(ds) == 56 + 93


def test_fit_round_trip(sweep_csv, tmp_path, capsys):
    spec_path = tmp_path / "fitted.json"
    out_path = tmp_path / "report.json"
    code = run_cli(
        "fit", "--data", str(sweep_csv), "--law", "add1",
        "--spec-out", str(spec_path), "--out", str(out_path),
    )
    assert code == 0
    fitted = load_law_spec(spec_path)
    assert fitted.rep.kind == "add1"
    assert fitted.rep.p == pytest.approx(0.02305, rel=0.02)
    report = read_report(out_path)
    assert report.spec == fitted
    assert report.metrics["r2_all"] > 0.999
    assert "add1" in capsys.readouterr().out


def test_fit_phase1_only_needs_single_epoch_runs(tmp_path):
    csv = tmp_path / "multi-only.csv"
    csv.write_text(
        "n_params,u_tokens,epochs,loss_nats\n"
        + "".join(f"1e8,1e9,{e},3.{e}\n" for e in (2, 3, 4, 5, 6, 7, 8))
    )
    assert run_cli("fit", "--data", str(csv), "--law", "chinchilla", "--phase", "1") == 1


def test_fit_bootstrap_table(sweep_csv, tmp_path, capsys):
    boot_path = tmp_path / "boot.json"
    code = run_cli(
        "fit", "--data", str(sweep_csv), "--law", "add1",
        "--boot", "4", "--seed", "7", "--boot-out", str(boot_path),
    )
    assert code == 0
    rows = read_report(boot_path)
    assert rows[0]["parameter"] == "p"
    assert rows[0]["mad"] <= 1e-6  # noiseless data
    assert "mad" in capsys.readouterr().out


def test_compare_orders_and_reports_all_variants(sweep_csv, tmp_path):
    out = tmp_path / "compare.json"
    assert run_cli("compare", "--data", str(sweep_csv), "--out", str(out)) == 0
    rows = read_report(out)
    assert [r["law"] for r in rows] == ["exp-decay", "eff-param", "add1", "add2", "add4"]
    by_law = {r["law"]: r for r in rows}
    # The generating law is add1; every additive variant can represent it.
    assert by_law["add1"]["huber"] <= by_law["exp-decay"]["huber"]
    assert by_law["add1"]["param_p"] == pytest.approx(0.02305, rel=0.02)


def test_compare_single_law_flag(sweep_csv, tmp_path):
    out = tmp_path / "one.json"
    assert run_cli("compare", "--data", str(sweep_csv), "--law", "add2", "--out", str(out)) == 0
    rows = read_report(out)
    assert len(rows) == 1 and rows[0]["law"] == "add2"


def test_residuals_reports_shared_exponent(sweep_csv, tmp_path):
    out = tmp_path / "residuals.json"
    assert run_cli("residuals", "--data", str(sweep_csv), "--out", str(out)) == 0
    rows = read_report(out)
    assert len(rows) == 17  # one row per (model size, budget) cell
    exponents = {r["shared_exponent"] for r in rows}
    assert len(exponents) == 1  # tied across cells
    # add1 excess is exactly linear in the repetition count.
    assert rows[0]["shared_exponent"] == pytest.approx(1.0, abs=0.05)


def test_allocate_frontier_crossover_flow(tmp_path, capsys):
    spec_a = tmp_path / "std.json"
    spec_b = tmp_path / "wd.json"
    from repscale.data import save_law_spec
    from repscale.reference import STANDARD_WD_ADD4_SPEC, STRONG_WD_ADD4_SPEC

    save_law_spec(STANDARD_WD_ADD4_SPEC, spec_a)
    save_law_spec(STRONG_WD_ADD4_SPEC, spec_b)

    alloc_out = tmp_path / "alloc.json"
    assert run_cli(
        "allocate", "--spec", str(spec_a), "--C", "5e18", "--U", "2.5e8",
        "--out", str(alloc_out),
    ) == 0
    row = read_report(alloc_out)[0]
    assert row["epochs"] == 5.0

    frontier_out = tmp_path / "frontier.json"
    assert run_cli(
        "frontier", "--spec", str(spec_a), "--U", "5e8",
        "--c-min", "1e18", "--c-max", "1e19", "--c-points", "7",
        "--out", str(frontier_out),
    ) == 0
    rows = read_report(frontier_out)
    assert len(rows) == 7
    assert rows[0]["compute"] == pytest.approx(1e18)

    cross_out = tmp_path / "cross.json"
    assert run_cli(
        "crossover", "--spec", str(spec_a), "--spec", str(spec_b), "--U", "2.5e8",
        "--c-min", "1e17", "--c-max", "1e21", "--out", str(cross_out),
    ) == 0
    c = read_report(cross_out)[0]["crossover_compute"]
    assert 2e18 <= c <= 5e18
    capsys.readouterr()


def test_crossover_requires_two_specs(tmp_path, capsys):
    spec_a = tmp_path / "std.json"
    from repscale.data import save_law_spec
    from repscale.reference import STANDARD_WD_ADD4_SPEC

    save_law_spec(STANDARD_WD_ADD4_SPEC, spec_a)
    assert run_cli("crossover", "--spec", str(spec_a), "--U", "2.5e8") == 1
    assert "two --spec" in capsys.readouterr().err


def test_missing_data_file_is_an_error_not_a_traceback(capsys):
    assert run_cli("fit", "--data", "/nonexistent/runs.csv") == 1
    assert "error:" in capsys.readouterr().err


def test_reanalyze_published_vs_refit(sweep_csv, tmp_path):
    published = tmp_path / "published.json"
    published.write_text(json.dumps(
        {"E": STANDARD_WD_BASE.E, "A": STANDARD_WD_BASE.A, "alpha": STANDARD_WD_BASE.alpha,
         "B": STANDARD_WD_BASE.B, "beta": STANDARD_WD_BASE.beta}
    ))
    out = tmp_path / "reanalysis.json"
    code = run_cli(
        "reanalyze", "--data", str(sweep_csv), "--published", str(published),
        "--law", "add1", "--out", str(out),
    )
    assert code == 0
    rows = read_report(out)
    assert [r["condition"] for r in rows] == [
        "published-base", "published-base+add1", "refit-base", "refit-base+add1",
    ]
    assert rows[1]["param_p"] == pytest.approx(0.02305, rel=1e-3)


def test_report_renders_records_file(tmp_path, capsys):
    from repscale.data import write_report

    path = tmp_path / "rows.json"
    write_report([{"law": "add1", "p": 0.023}], path)
    assert run_cli("report", "--input", str(path)) == 0
    out = capsys.readouterr().out
    assert "law" in out and "0.023" in out


def test_records_stdout_format(tmp_path, capsys):
    spec_path = tmp_path / "std.json"
    from repscale.data import save_law_spec
    from repscale.reference import STANDARD_WD_ADD4_SPEC

    save_law_spec(STANDARD_WD_ADD4_SPEC, spec_path)
    assert run_cli(
        "allocate", "--spec", str(spec_path), "--C", "5e18", "--U", "2.5e8",
        "--format", "records",
    ) == 0
    line = capsys.readouterr().out.strip().splitlines()[0]
    assert json.loads(line)["epochs"] == 5.0


def test_deterministic_output(tmp_path, capsys):
    spec_path = tmp_path / "std.json"
    from repscale.data import save_law_spec
    from repscale.reference import STANDARD_WD_ADD4_SPEC

    save_law_spec(STANDARD_WD_ADD4_SPEC, spec_path)
    args = ("frontier", "--spec", str(spec_path), "--U", "5e8",
            "--c-min", "1e18", "--c-max", "1e20", "--c-points", "9")
    assert run_cli(*args) == 0
    first = capsys.readouterr().out
    assert run_cli(*args) == 0
    assert capsys.readouterr().out == first


def test_help_for_each_subcommand(capsys):
    for sub in ("fit", "compare", "residuals", "allocate", "frontier",
                "crossover", "synth", "reanalyze", "report"):
        with pytest.raises(SystemExit) as exc:
            run_cli(sub, "--help")
        assert exc.value.code == 0
        assert "usage:" in capsys.readouterr().out
