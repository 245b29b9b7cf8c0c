import csv
import io
import json
import math

import pytest

from hallconst.cli import EXIT_NOT_CONVERGED, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, result_digest


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def record(out):
    lines = out.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_hall_record(capsys):
    code, out, _ = run(capsys, "hall", "2")
    assert code == EXIT_OK
    rec = record(out)
    assert rec["schema_version"] == 1 and rec["status"] == "ok"
    assert rec["result"]["constant"] == pytest.approx(2 / math.pi, rel=1e-12)
    man = rec["manifest"]
    assert man["command"] == "hall" and man["parameters"]["n"] == 2
    assert man["result_digest"] == result_digest(rec)


def test_hall_recognize(capsys):
    code, out, _ = run(capsys, "hall", "4", "--recognize")
    rec = record(out)["result"]["recognition"]
    assert code == 0 and rec["pi_power"] == 2 and rec["recognized_integer"] == "71680"
    assert rec["factorization"] == [["2", 11], ["5", 1], ["7", 1]]


def test_round_trip(capsys):
    from hallconst.pipeline import ConstantResult
    _, out, _ = run(capsys, "hall", "3", "--recognize")
    rec = record(out)
    res = ConstantResult.from_dict(rec["result"])
    assert json.loads(json.dumps(res.to_dict())) == rec["result"]


def test_divergence_exit(capsys):
    code, out, err = run(capsys, "hall", "2", "--beta", "3")
    assert code == EXIT_NUMERIC and out == "" and "DivergenceError" in err


@pytest.mark.parametrize("argv", [["hall", "1"], ["hall", "2", "--rel-tol", "-1"],
                                  ["recognize", "--value", "-3"], ["density", "bures2", "--marginal", "phi"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_bad_flag_is_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["hall", "2", "--no-such-flag"])
    assert exc.value.code == EXIT_USAGE


def test_budget_exhaustion_exit(capsys):
    code, out, _ = run(capsys, "hall", "3", "--max-evals", "500")
    assert code == EXIT_NOT_CONVERGED
    assert record(out)["status"] == "not_converged"


def test_entropy_fit_and_no_fit(capsys):
    _, out, _ = run(capsys, "entropy", "2")
    res = record(out)["result"]
    assert res["mean_entropy_nats"] == pytest.approx(0.219628, abs=1e-6)
    assert (res["fit_numerator"], res["fit_denominator"]) == (7, 6)
    _, out, _ = run(capsys, "entropy", "3", "--no-fit")
    res = record(out)["result"]
    assert res["fit_numerator"] is None and res["mean_entropy_nats"] == pytest.approx(0.507937, abs=1e-6)


def test_density_csv(capsys):
    code, out, _ = run(capsys, "density", "bures2", "--grid", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# manifest=") and lines[1].startswith("# schema_version=1")
    rows = list(csv.reader(io.StringIO("\n".join(lines[2:]))))
    assert rows[0] == ["theta", "density"] and len(rows) == 2
    assert float(rows[1][0]) == pytest.approx(math.pi / 4)


def test_density_json(capsys):
    _, out, _ = run(capsys, "density", "bures3", "--marginal", "theta-phi", "--grid", "3", "--format", "json")
    assert len(record(out)["result"]["rows"]) == 9


def test_recognize_and_bernoulli(capsys):
    _, out, _ = run(capsys, "recognize", "--value", repr(2342475135 / math.pi ** 2),
                    "--pi-powers", "0..4", "--sequence-match")
    res = record(out)["result"]
    assert res["recognized_integer"] == "2342475135"
    assert {"index": 13, "multiplier": 63, "form": "multiple"} in res["sequence_matches"]
    code, out, _ = run(capsys, "recognize", "--value", "0.123456789", "--pi-powers", "0..0",
                       "--max-residual", "1e-12")
    assert code == 0 and record(out)["status"] == "unrecognized"
    _, out, _ = run(capsys, "bernoulli", "--terms", "5", "--partial-sum-denominators")
    assert record(out)["result"]["partial_sum_denominators"] == ["1", "6", "15", "70", "105"]
    _, out, _ = run(capsys, "bernoulli", "--terms", "3")
    assert [b["value"] for b in record(out)["result"]["bernoulli"]] == ["1", "-1/2", "1/6"]


def test_out_manifest_and_replay(tmp_path, capsys):
    out = tmp_path / "c3.jsonl"
    assert run(capsys, "hall", "3", "--out", str(out))[0] == 0
    man_path = tmp_path / "c3.jsonl.manifest.json"
    man = json.loads(man_path.read_text())
    assert {"schema_version", "command", "parameters", "code_version", "wall_time_s",
            "result_digest"} <= set(man)
    assert record(out.read_text())["manifest"] == man
    code, stdout, _ = run(capsys, "replay", str(man_path))
    assert code == 0 and record(stdout)["reproduced"] is True
    man["result_digest"] = "0" * 64
    man_path.write_text(json.dumps(man))
    assert run(capsys, "replay", str(man_path))[0] == EXIT_NUMERIC


def test_config_file_and_cache(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"rel_tol": 1e-6, "recognize": True}))
    cache = tmp_path / "cache.jsonl"
    _, out, _ = run(capsys, "hall", "3", "--config", str(cfg), "--cache", str(cache))
    rec = record(out)
    assert rec["manifest"]["parameters"]["rel_tol"] == 1e-6
    assert rec["result"]["recognition"]["recognized_integer"] == "35"
    # explicit flag beats config
    _, out, _ = run(capsys, "hall", "3", "--config", str(cfg), "--rel-tol", "1e-9")
    assert record(out)["manifest"]["parameters"]["rel_tol"] == 1e-9
    assert len(cache.read_text().splitlines()) == 1
    (tmp_path / "bad.json").write_text("{")
    assert run(capsys, "hall", "2", "--config", str(tmp_path / "bad.json"))[0] == EXIT_USAGE


def test_workers_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("HALLCONST_WORKERS", "3")
    _, out, _ = run(capsys, "hall", "2")
    assert record(out)["manifest"]["parameters"]["workers"] == 3
    _, out, _ = run(capsys, "hall", "2", "--workers", "1")
    assert record(out)["manifest"]["parameters"]["workers"] == 1
