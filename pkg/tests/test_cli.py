import csv
import json
import math
import xml.etree.ElementTree as ET

import pytest

from qdarwin import cli
from qdarwin.haar_ensemble import page_mean_entropy


def run(args, tmp_path, name="out", monkeypatch=None):
    prefix = tmp_path / name
    code = cli.main(list(args) + ["--output", str(prefix), "--workers", "1"])
    return code, prefix


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_branch_pip_deterministic(tmp_path):
    args = ["branch-pip", "--d-sys", "2", "--d-env", "2", "--n-env", "8", "--seed", "42", "--n-states", "10"]
    c1, p1 = run(args, tmp_path, "a")
    c2, p2 = run(args, tmp_path, "b")
    assert c1 == c2 == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = read_csv(tmp_path / "a.csv")
    assert rows[0] == list(cli.PIP_COLUMNS)
    assert len(rows) == 10
    assert b"\r\n" not in (tmp_path / "a.csv").read_bytes()


def test_worker_count_does_not_change_output(tmp_path):
    base = ["branch-pip", "--n-env", "6", "--seed", "3", "--n-states", "8", "--output"]
    assert cli.main(base + [str(tmp_path / "w1"), "--workers", "1"]) == 0
    assert cli.main(base + [str(tmp_path / "w3"), "--workers", "3"]) == 0
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w3.csv").read_bytes()


def test_config_round_trip(tmp_path):
    code, _ = run(["redundancy", "--d-sys", "3", "--n-env", "12", "--n-states", "3", "--deltas", "0.05,0.2", "--seed", "9"], tmp_path, "r1")
    assert code == 0
    cfg = tmp_path / "r1.config.json"
    data = json.loads(cfg.read_text())
    assert data["universe"]["d_sys"] == 3 and data["deltas"] == [0.05, 0.2]
    code, _ = run(["redundancy", "--config", str(cfg)], tmp_path, "r2")
    assert code == 0
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    rows = read_csv(tmp_path / "r1.csv")
    assert rows[0] == list(cli.REDUNDANCY_COLUMNS)
    assert len(rows) == 3


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"universe": {"n_env": 5}, "units": "bits"}))
    code, _ = run(["haar-pip", "--config", str(cfg), "--n-env", "4"], tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "out.csv")
    assert len(rows) == 6 and rows[1][4] == "bits"


def test_haar_pip_antisymmetric_rows(tmp_path):
    code, _ = run(["haar-pip", "--d-sys", "2", "--d-env", "2", "--n-env", "12"], tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "out.csv")
    i6, i12 = float(rows[7][1]), float(rows[13][1])
    assert abs(i6 - page_mean_entropy(2, 2 ** 12)) <= 1e-9
    assert abs(i6 - i12 / 2) <= 1e-9


def test_ghz_pip_rows(tmp_path):
    code, _ = run(["branch-pip", "--initial-state", "ghz", "--n-env", "4", "--n-states", "2"], tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "out.csv")
    assert len(rows) == 6
    assert rows[2][1] == rows[3][1] == rows[4][1]


def test_bits_mode(tmp_path):
    run(["haar-pip", "--n-env", "5"], tmp_path, "nats")
    run(["haar-pip", "--n-env", "5", "--units", "bits"], tmp_path, "bits")
    nats = read_csv(tmp_path / "nats.csv")[1:]
    bits = read_csv(tmp_path / "bits.csv")[1:]
    for a, b in zip(nats, bits):
        assert float(b[1]) == pytest.approx(float(a[1]) / math.log(2), rel=1e-15)


def test_empty_curve_is_header_only(tmp_path):
    path = cli.emit_pip_csv(None, tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == "m,i_mean,i_std,n_samples,units\n"


def test_svg_outputs_parse(tmp_path):
    for cmd in (["branch-pip", "--n-env", "6", "--n-states", "3"], ["spip", "--source", "haar", "--n-env", "8"],
                ["theory-overlay", "--n-env", "8", "--n-states", "3"],
                ["redundancy", "--n-env", "8", "--n-states", "2"]):
        code, prefix = run(cmd + ["--emit-svg"], tmp_path, cmd[0])
        assert code == 0
        root = ET.parse(f"{prefix}.svg").getroot()
        assert root.tag.endswith("svg")
        text = " ".join(el.text or "" for el in root.iter())
        assert "H_S" in text


def test_spec_r_sweep_and_dfactor(tmp_path):
    code, prefix = run(["spec-r-sweep", "--initial-state", "ghz", "--n-envs", "4,8,16", "--n-states", "1", "--n-permutations", "2"], tmp_path, "sw")
    assert code == 0
    summary = json.loads((tmp_path / "sw.summary.json").read_text())
    assert summary["slope"] == pytest.approx(0.9)
    code, _ = run(["dfactor-stats", "--d-envs", "2,4", "--n-samples", "1000"], tmp_path, "d")
    assert code == 0
    rows = read_csv(tmp_path / "d.csv")
    assert float(rows[2][1]) == pytest.approx(11 / 12)


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "77")
    code, _ = run(["branch-pip", "--n-env", "4", "--n-states", "2"], tmp_path)
    assert code == 0
    assert json.loads((tmp_path / "out.config.json").read_text())["seed"] == 77


def test_exit_codes(tmp_path, capsys):
    assert run(["redundancy", "--delta", "1.5"], tmp_path)[0] == cli.EXIT_CONFIG
    assert run(["haar-pip", "--method", "montecarlo", "--n-env", "20"], tmp_path)[0] == cli.EXIT_GUARD
    assert run(["branch-pip", "--n-env", "600"], tmp_path)[0] == cli.EXIT_GUARD
    assert run(["branch-pip", "--initial-state", "custom"], tmp_path)[0] == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"no_such_key": 1}')
    assert run(["branch-pip", "--config", str(bad)], tmp_path)[0] == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        cli.main(["not-a-command"])
    assert exc.value.code == 2


def test_validate_subset(tmp_path, capsys):
    code, _ = run(["validate", "--checks", "5,13"], tmp_path)
    out = capsys.readouterr().out
    assert code == 0
    assert "2/2 checks passed" in out
    code, _ = run(["validate", "--checks", "12"], tmp_path, "v2")
    assert code == cli.EXIT_VALIDATION
