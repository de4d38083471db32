import json

import pytest

from cachebc.cli import main


@pytest.fixture
def common_cfg(tmp_path):
    path = tmp_path / "common.json"
    path.write_text(
        json.dumps(
            {
                "K": 2,
                "D": 2,
                "F": 1,
                "deltas": [0.8, 0.2],
                "rates": [1.0, 0.5],
                "memories": [1.1, 0.2],
                "n": 1000,
                "demand_set": {"kind": "common"},
            }
        )
    )
    return str(path)


@pytest.fixture
def sweep_cfg(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(
        json.dumps(
            {
                "K": 2,
                "D": 10,
                "F": 1,
                "deltas": [0.8, 0.2],
                "rates": [0.4] * 10,
                "memories": [1.0, 1.0],
            }
        )
    )
    return str(path)


@pytest.fixture
def sim_cfg(tmp_path):
    path = tmp_path / "sim.json"
    path.write_text(
        json.dumps(
            {
                "K": 2,
                "D": 2,
                "F": 8,
                "deltas": [0.8, 0.2],
                "rates": [1.0, 1.0],
                "memories": [0.8, 0.0],
                "n": 800,
            }
        )
    )
    return str(path)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_region_check_inside_with_witness(capsys, common_cfg):
    code, out, _ = run(
        capsys,
        [
            "region-check", "--config", common_cfg, "--scheme", "common",
            "--rates", "1.0,0.5", "--memories", "1.1,0.2",
        ],
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["inside"] is True
    assert payload["witness"][0] == pytest.approx([0.8, 0.3])


def test_region_check_outside_exit_one(capsys, common_cfg):
    code, out, _ = run(
        capsys,
        ["region-check", "--config", common_cfg, "--scheme", "common", "--memories", "1.0,0.2"],
    )
    assert code == 1
    assert json.loads(out)["inside"] is False


def test_config_errors_exit_two(capsys, tmp_path):
    code, _, err = run(capsys, ["region-check", "--config", str(tmp_path / "nope.json"), "--scheme", "common"])
    assert code == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"K": 2, "D": 1, "F": 1, "deltas": [0.2, 0.8], "rates": [1], "memories": [0, 0]}))
    code2, _, err2 = run(capsys, ["region-check", "--config", str(bad), "--scheme", "common"])
    assert code2 == 2 and "nonincreasing" in err2
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"K": 2, "D": 1, "deltas": [0.8, 0.2], "rates": [1], "memories": [0, 0]}))
    code3, _, err3 = run(capsys, ["region-check", "--config", str(missing), "--scheme", "common"])
    assert code3 == 2 and "missing config key: F" in err3


def test_usage_error_exit_two(capsys, common_cfg):
    assert main(["region-check", "--config", common_cfg, "--scheme", "bogus"]) == 2
    assert main(["no-such-verb"]) == 2


def test_region_sweep_csv(capsys, sweep_cfg):
    code, out, _ = run(capsys, ["region-sweep", "--config", sweep_cfg, "--schemes", "all", "--grid", "0:0.5:5"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "M,scheme,R_analytical,pe_hat,ci_lo,ci_hi,n,trials,seed"
    assert len(lines) == 1 + 11 * 3  # grid 0..5 step 0.5, three schemes


def test_optimize_general_and_phase_lp(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(
        json.dumps(
            {
                "K": 3, "D": 3, "F": 1, "deltas": [0.8, 0.5, 0.2],
                "rates": [0.4] * 3, "memories": [0.3, 0.3, 0.0],
            }
        )
    )
    code, out, _ = run(capsys, ["optimize", "--config", str(path), "--mode", "general", "--K0", "2", "--M", "0.3"])
    assert code == 0
    assert json.loads(out)["rate"] == pytest.approx(0.4, abs=1e-9)
    code2, out2, _ = run(capsys, ["optimize", "--config", str(path), "--mode", "phase-lp", "--K0", "2", "--M", "0.3"])
    assert code2 == 0
    assert json.loads(out2)["rate"] == pytest.approx(0.25, abs=1e-9)


def test_placement_show(capsys, sim_cfg):
    code, out, _ = run(capsys, ["placement-show", "--config", sim_cfg, "--K0", "1", "--t", "1", "--M", "0.8"])
    assert code == 0
    payload = json.loads(out)
    assert payload["receivers"][0]["receiver"] == 1
    assert payload["receivers"][1]["entries"] == []


def test_schedule_show(capsys, sim_cfg):
    code, out, _ = run(
        capsys,
        ["schedule-show", "--config", sim_cfg, "--scheme", "joint-2rx", "--demand", "1,2", "--backoff", "0.9"],
    )
    assert code == 0
    payload = json.loads(out)
    kinds = [it["kind"] for it in payload["phases"][0]["items"]]
    assert kinds == ["uncached-part", "piggyback-slice"]
    assert payload["verify_ok"] is True


def test_simulate_json_and_byte_identical(capsys, sim_cfg):
    argv = [
        "simulate", "--config", sim_cfg, "--scheme", "joint-2rx",
        "--backoff", "0.8", "--trials", "4", "--seed", "7",
    ]
    code1, out1, _ = run(capsys, argv)
    code2, out2, _ = run(capsys, argv)
    assert code1 == code2 == 0
    assert out1 == out2  # byte-identical stdout under a fixed seed
    payload = json.loads(out1)
    assert payload["pe_hat"] == 0.0
    assert "elapsed_s" not in payload  # wall clock goes to stderr
