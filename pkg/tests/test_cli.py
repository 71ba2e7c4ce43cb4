from __future__ import annotations

import json
import re

import pytest

from eulerspec.cli import main
from eulerspec.config import VERSION, RunConfig, load_config

SAMPLES_HEADER = "x01,x02,x03,xi01,xi02,xi03,T,lambda1,lambda2,drift_H,drift_bxi"
TRACE_HEADER = "t,x1,x2,x3,xi1,xi2,xi3,log_xi,H,drift_bxi"


def _stamp_ok(line: str) -> bool:
    return re.fullmatch(r"# eulerspec version=\S+ config=[0-9a-f]{64}", line) is not None


def test_check_flow_catalog_passes(capsys):
    assert main(["check-flow", "--flow", "abc", "--A", "1", "--B", "1", "--C", "1"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out


def test_check_flow_nonsteady_exits_2(tmp_path, capsys):
    path = tmp_path / "flow.json"
    path.write_text(json.dumps({"name": "advective", "modes": [
        {"k": [1, 0, 0], "re": [0.0, 1.0, 0.0], "im": [0.0, 0.0, 0.0]},
        {"k": [0, 2, 0], "re": [1.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0]},
    ]}))
    assert main(["check-flow", "--flow", "file", "--flow-file", str(path)]) == 2
    out = capsys.readouterr().out
    assert "FAIL" in out and "worst grid point" in out


def test_check_flow_malformed_file_exits_2(tmp_path, capsys):
    path = tmp_path / "flow.json"
    path.write_text(json.dumps({"name": "compressible", "modes": [
        {"k": [1, 0, 0], "re": [1.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0]},
    ]}))
    assert main(["check-flow", "--flow", "file", "--flow-file", str(path)]) == 2
    assert "validation error" in capsys.readouterr().err


def test_trace_writes_csv(tmp_path, capsys):
    code = main(["trace", "--flow", "abc", "--x0", "0.3,0.7,0.1",
                 "--xi0", "0.2,-0.5,0.8", "--T", "5", "--samples", "11",
                 "--outdir", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert _stamp_ok(lines[0])
    assert lines[1] == TRACE_HEADER
    assert len(lines) == 2 + 11
    first = lines[2].split(",")
    assert float(first[0]) == 0.0
    last = lines[-1].split(",")
    assert float(last[0]) == 5.0


def test_exponents_writes_csv(tmp_path):
    code = main(["exponents", "--flow", "abc", "--x0", "0.3,0.7,0.1",
                 "--xi0", "0.2,-0.5,0.8", "--T", "50",
                 "--outdir", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "exponents.csv").read_text().splitlines()
    assert _stamp_ok(lines[0])
    assert lines[1] == SAMPLES_HEADER
    assert len(lines) == 3
    row = lines[2].split(",")
    assert float(row[6]) == 50.0
    assert float(row[7]) >= float(row[8])  # lambda1 >= lambda2


def test_spectrum_outputs(tmp_path):
    code = main(["spectrum", "--flow", "shear", "--U", "1,0,0",
                 "--count", "4", "--horizon", "20", "--strategy", "lattice",
                 "--times", "1,5", "--outdir", str(tmp_path)])
    assert code == 0
    for name in ("estimate.json", "config.json", "samples.csv",
                 "intervals.csv", "annuli.csv"):
        assert (tmp_path / name).exists(), name

    est = json.loads((tmp_path / "estimate.json").read_text())
    assert set(est) >= {"version", "config_hash", "flow", "plan", "mu_hat",
                        "M_hat", "gap_report", "convergence", "annulus", "audit"}
    assert est["version"] == VERSION
    assert est["mu_hat"] == 0.0 and est["M_hat"] == 0.0
    assert [a["r_inner"] for a in est["annulus"]] == [1.0, 1.0]

    lines = (tmp_path / "samples.csv").read_text().splitlines()
    assert lines[1] == SAMPLES_HEADER and len(lines) == 2 + 4
    assert (tmp_path / "intervals.csv").read_text().splitlines()[1] == "lambda_lo,lambda_hi"
    annuli = (tmp_path / "annuli.csv").read_text().splitlines()
    assert annuli[1] == "t,r_inner,r_outer"
    assert len(annuli) == 2 + 2

    cfg_doc = json.loads((tmp_path / "config.json").read_text())
    assert cfg_doc["config_hash"] == est["config_hash"]


def test_spectrum_rerun_from_persisted_config_is_bitwise_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["spectrum", "--flow", "abc", "--count", "3", "--horizon", "25",
            "--strategy", "random", "--seed", "5"]
    assert main(args + ["--outdir", str(out1)]) == 0
    assert main(["spectrum", "--config", str(out1 / "config.json"),
                 "--outdir", str(out2)]) == 0
    assert (out1 / "estimate.json").read_bytes() == (out2 / "estimate.json").read_bytes()


def test_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        "[flow]\nkind = \"shear\"\nU = [1.0, 0.0, 0.0]\n"
        "[plan]\ncount = 4\nhorizon = 20.0\nstrategy = \"lattice\"\n"
    )
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--count", "6",
                 "--outdir", str(out)]) == 0
    est = json.loads((out / "estimate.json").read_text())
    assert est["n_samples"] == 6
    persisted = load_config(out / "config.json")
    assert persisted.plan.count == 6  # effective post-override value persisted


def test_env_var_default_outdir(tmp_path, monkeypatch):
    dest = tmp_path / "from-env"
    monkeypatch.setenv("EULERSPEC_OUTDIR", str(dest))
    assert main(["exponents", "--flow", "shear", "--U", "1,0,0",
                 "--x0", "0,0,0", "--xi0", "0,0,1", "--T", "10"]) == 0
    assert (dest / "exponents.csv").exists()


def test_numerical_failure_exits_1(tmp_path, capsys):
    code = main(["spectrum", "--flow", "abc", "--count", "3", "--horizon", "50",
                 "--max-steps", "40", "--outdir", str(tmp_path)])
    assert code == 1
    assert "numerical failure" in capsys.readouterr().err


def test_bad_vector_argument_exits_2(capsys):
    # argparse terminates malformed invocations itself; the contract is the
    # process exit status, which must be the validation code 2.
    with pytest.raises(SystemExit) as exc:
        main(["trace", "--flow", "abc", "--x0", "1,2", "--xi0", "0,0,1",
              "--T", "5"])
    assert exc.value.code == 2


def test_audit_outputs(tmp_path):
    code = main(["audit", "--flow", "kolmogorov", "--amplitude", "1",
                 "--x0", "0.3,0.7,0.1", "--xi0", "0.6,-0.3,0.5", "--T", "10",
                 "--tolerances", "1e-6,1e-9", "--outdir", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "audit.json").read_text())
    assert set(doc["report"]) == {"max_H_drift", "max_bxi_drift",
                                  "det_jacobian_err", "xi_consistency_angle",
                                  "group_roundtrip_err"}
    assert doc["oracle_max_deviation"] <= 1e-8
    assert doc["step_halving"]["passed"] is True
    lines = (tmp_path / "halving.csv").read_text().splitlines()
    assert lines[1] == "tolerance,lambda1,lambda2,diff_from_prev"
    assert len(lines) == 2 + 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert VERSION in capsys.readouterr().out


def test_config_round_trip_hash_stable(tmp_path):
    cfg = RunConfig(flow_kind="abc", flow_params={"A": 1.0, "B": 0.5, "C": 0.25})
    doc = {"version": VERSION, "config_hash": cfg.config_hash(),
           "config": cfg.to_dict()}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    loaded = load_config(path)
    assert loaded.config_hash() == cfg.config_hash()
    assert loaded.flow_params == cfg.flow_params
