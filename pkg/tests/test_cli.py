import csv
import json

import numpy as np
import pytest

from gsquant import io
from gsquant.cli import CHECKS, ConfigError, RunConfig, load_config, main, run_check
from gsquant.stft import STFTField


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_defaults_and_overrides(tmp_path):
    cfg = load_config(None, {})
    assert cfg.n == 32 and not cfg.n_given
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n": 16, "t": 0.0}))
    cfg = load_config(str(p), {"t": 1.0})
    assert cfg.n == 16 and cfg.n_given and cfg.t == 1.0


@pytest.mark.parametrize("data", [{"n": 31}, {"n": 0}, {"h_ladder": []}, {"r_ladder": [1, -1]},
                                  {"q": [0.5]}, {"route": "scenic"}, {"bogus": 1},
                                  {"memory_mb": 0}])
def test_config_rejects(tmp_path, data):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(str(p), {})


def test_config_q_accepts_inf():
    assert RunConfig(q=[1, "inf"]).q_values == [1.0, float("inf")]


def test_gen_and_stft(tmp_path, capsys):
    code, out, _ = run(capsys, "stft", "gaussian", "--out", str(tmp_path / "g.gsq"))
    assert code == 0
    info = json.loads(out)
    F = STFTField.load(info["field"])
    assert F.values.shape == (32, 32)
    with open(info["csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 32 * 32
    top = max(rows, key=lambda r: float(r["abs"]))
    assert float(top["x"]) == 0.0 and float(top["xi"]) == 0.0
    code, out, _ = run(capsys, "gen", "hermite:3", "--out", str(tmp_path / "h3.gsq"))
    assert code == 0
    h3 = io.read_gsq1(tmp_path / "h3.gsq")
    assert h3.grid.n == (32,) and abs(np.sum(np.abs(h3.values) ** 2) * h3.grid.cell - 1) <= 1e-12


@pytest.mark.parametrize("argv", [
    ["stft", "/nonexistent/f.gsq"],
    ["stft", "gaussian", "--n", "31"],
    ["stft", "gaussian", "--memory-mb", "0.001"],
    ["gen", "hermite:x"],
    ["gen", "nonsense"],
    ["compose", "--a", "gauss2d", "--b", "gauss2d", "--matrix", "s=1"],
])
def test_usage_errors_exit_two(capsys, tmp_path, argv):
    code, _, err = run(capsys, *argv, "--out-dir", str(tmp_path))
    assert code == 2
    assert err.startswith("gsq: error:")


def test_malformed_config_exit_two(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(capsys, "verify", "--check", "kappa", "--config", str(p))[0] == 2
    assert run(capsys, "verify", "--check", "kappa", "--config", str(tmp_path / "none.json"))[0] == 2


def test_unknown_check_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--check", "everything"])
    assert exc.value.code == 2


def test_bad_thread_env_exit_two(monkeypatch, capsys):
    monkeypatch.setenv("GSQ_THREADS", "abc")
    assert run(capsys, "verify", "--check", "inversion")[0] == 2


def test_classify_builtins(capsys):
    code, out, _ = run(capsys, "classify", "gauss2d")
    assert code == 0
    v = json.loads(out)
    assert v["pattern"] == "Gamma^{sigma,s;0}_{s,sigma;0}"
    code, out, _ = run(capsys, "classify", "growth:r=0.5,s=2", "--s", "2", "--sigma", "2")
    assert code == 0
    v = json.loads(out)
    for rate in v["growth"].values():
        assert rate == pytest.approx(0.5, rel=0.1)


def test_quantize_and_compose(tmp_path, capsys):
    code, out, _ = run(capsys, "quantize", "gauss2d", "--input", "hermite:2", "--t", "0.5",
                       "--out", str(tmp_path / "o.gsq"))
    assert code == 0 and json.loads(out)["t"] == 0.5
    g = io.read_gsq1(tmp_path / "o.gsq")
    assert g.grid.d == 1 and np.all(np.isfinite(g.values))
    for route in ("kernel", "multiplier"):
        path = tmp_path / f"c_{route}.gsq"
        code, _, _ = run(capsys, "compose", "--a", "gauss2d", "--b", "gauss2d", "--matrix", "t=0.5",
                         "--route", route, "--out", str(path))
        assert code == 0
    a = io.read_gsq1(tmp_path / "c_kernel.gsq").values
    b = io.read_gsq1(tmp_path / "c_multiplier.gsq").values
    assert np.max(np.abs(a - b)) <= 1e-7


@pytest.mark.parametrize("check, bound", [("inversion", 1e-10), ("kappa", 0.0),
                                          ("sharp-hom", 1e-7)])
def test_verify_examples(capsys, check, bound):
    code, out, _ = run(capsys, "verify", "--check", check)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert rep["max_dev"] <= bound
    assert set(rep) >= {"check", "max_dev", "tolerance", "pass"}


def test_verify_failure_exit_one(capsys):
    code, out, _ = run(capsys, "verify", "--check", "covariance", "--tolerance", "1e-12")
    assert code == 1 and not json.loads(out)["pass"]


def test_reports_byte_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        run(capsys, "verify", "--check", "kappa", "--seed", "11", "--out", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_timings_flag(capsys):
    code, out, _ = run(capsys, "verify", "--check", "moyal", "--timings")
    assert code == 0 and "seconds" in json.loads(out)


@pytest.mark.parametrize("check", [c for c in CHECKS if c not in ("kappa", "trace")])
def test_every_check_passes_at_defaults(check):
    assert run_check(check, RunConfig())["pass"]


def test_trace_check_small_grid():
    assert run_check("trace", RunConfig(n=16))["pass"]
