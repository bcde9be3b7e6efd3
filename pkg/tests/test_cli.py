import csv
import io
import json

import pytest

from axonsim import cli, report


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_table3(capsys):
    code, out, _ = run(capsys, "analyze", "--rows", "256", "--cols", "256", "--dataflow", "os",
                       "--workloads", "builtin:table3")
    rep = json.loads(out)
    assert code == 0 and rep["schema_version"] == 1
    assert len(rep["records"]) == 20 and "mean_speedup" in rep["aggregate"]
    names = [r["name"] for r in rep["records"]]
    assert names == sorted(names)


def test_analyze_gnmt1(capsys):
    _, out, _ = run(capsys, "analyze", "--orchestration", "both", "--workloads", "builtin:table3")
    gnmt1 = next(r for r in json.loads(out)["records"] if r["name"] == "GNMT1")
    assert gnmt1["speedup"] == pytest.approx(1.47, abs=0.01)


def test_bad_rows_exit_validation(capsys):
    code, _, err = run(capsys, "analyze", "--rows", "0", "--gemm", "1,1,1")
    assert code == 2 and "rows" in err


@pytest.mark.parametrize("argv", [["analyze", "--dataflow", "xs"], [], ["frobnicate"]])
def test_usage_errors_exit_one(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 1


def test_missing_file_exit_two(capsys, tmp_path):
    assert run(capsys, "analyze", "--workloads", str(tmp_path / "none.csv"))[0] == 2


def test_simulate_fig4(capsys):
    code, out, _ = run(capsys, "simulate", "--rows", "3", "--cols", "3", "--orchestration", "axon",
                       "--gemm", "3,3,3", "--verify")
    rec = json.loads(out)["records"][0]
    assert code == 0 and rec["axon_verified"] is True and rec["axon_simulated_cycles"] == 8


def test_simulate_sparsity(capsys):
    _, out, _ = run(capsys, "simulate", "--rows", "8", "--cols", "8", "--gemm", "64,64,32",
                    "--sparsity-a", "0.1", "--sparsity-b", "0", "--seed", "3")
    frac = json.loads(out)["records"][0]["conventional_gated_fraction"]
    assert frac == pytest.approx(0.10, abs=0.02)


def test_simulate_deterministic(capsys, tmp_path):
    args = ["simulate", "--rows", "4", "--cols", "5", "--gemm", "6,7,8", "--gemm", "3,9,2",
            "--sparsity-a", "0.3", "--seed", "11", "--orchestration", "both", "--verify"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(args + ["--output", str(a)]) == 0
    assert cli.main(args + ["--output", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_max_macs(capsys):
    assert run(capsys, "simulate", "--gemm", "100,100,100", "--max-macs", "1000")[0] == 2


def test_verification_failure_exit_three(capsys, monkeypatch):
    monkeypatch.setattr(report, "verify", lambda res, w: False)
    code, _, err = run(capsys, "simulate", "--rows", "2", "--cols", "2", "--gemm", "2,2,2", "--verify")
    assert code == 3 and "oracle" in err


def test_trace_file(capsys, tmp_path):
    path = tmp_path / "t.txt"
    code, _, _ = run(capsys, "simulate", "--rows", "2", "--cols", "2", "--gemm", "2,2,2",
                     "--orchestration", "axon", "--trace", str(path))
    lines = path.read_text().splitlines()
    assert code == 0 and lines[0].startswith("#") and any(" MAC " in ln for ln in lines)


def test_csv_is_flat_projection(capsys):
    _, js, _ = run(capsys, "analyze", "--orchestration", "both", "--gemm", "40,50,60")
    _, cs, _ = run(capsys, "analyze", "--orchestration", "both", "--gemm", "40,50,60",
                   "--format", "csv")
    rec = json.loads(js)["records"][0]
    row = next(csv.DictReader(io.StringIO(cs)))
    assert set(row) == set(rec)
    assert int(row["axon_cycles"]) == rec["axon_cycles"]


def test_conv_single_pointwise(capsys, tmp_path):
    p = tmp_path / "pw.csv"
    p.write_text("name,ifmap_h,ifmap_w,filter_h,filter_w,channels,num_filters,stride\n"
                 "pw,28,28,1,1,64,128,1\n")
    code, out, _ = run(capsys, "conv", "--layers", str(p))
    assert code == 0 and json.loads(out)["records"][0]["reduction"] == 0


def test_conv_resnet(capsys):
    _, out, _ = run(capsys, "conv", "--layers", "builtin:resnet50_conv")
    rep = json.loads(out)
    assert rep["aggregate"]["reduction"] >= 0.35
    for rec in rep["records"]:
        if rec["filter"] == 3 and rec["stride"] == 1 and rec["out_w"] >= 32:
            assert rec["reduction"] >= 0.60


def test_conv_geometry_error_names_layer(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("name,ifmap_h,ifmap_w,filter_h,filter_w,channels,num_filters,stride\n"
                 "oddlayer,6,6,3,3,1,1,2\n")
    code, _, err = run(capsys, "conv", "--layers", str(p))
    assert code == 2 and "oddlayer" in err
