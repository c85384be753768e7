import json

import numpy as np
import pytest

from vsmap.cli import EXIT_CONFIG, EXIT_NO_RESULT, EXIT_OK, OUTPUT_ROOT_ENV, main
from vsmap.forward import ProbabilityMap, save_map
from vsmap.io import file_digest
from vsmap.physics import TABLE1, precession_frequency


def run(*argv):
    return main([str(a) for a in argv])


def digests(directory):
    return {p.name: file_digest(p) for p in sorted(directory.iterdir()) if p.name != "manifest.json"}


@pytest.fixture(scope="module")
def landscape(tmp_path_factory):
    out = tmp_path_factory.mktemp("land")
    assert run("synth-landscape", "--seed", 3, "--out", out) == EXIT_OK
    return out


def test_synth_landscape_deterministic(landscape, tmp_path):
    assert run("synth-landscape", "--seed", 3, "--out", tmp_path) == EXIT_OK
    assert digests(tmp_path) == digests(landscape)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "synth-landscape" and man["config"]["seed"] == 3
    assert set(man["outputs"]) and all(len(v) == 64 for v in man["outputs"].values())


@pytest.mark.parametrize("argv", [
    ["synth-landscape", "--seed", "1", "--set", "landscape.pitch=0"],
    ["synth-landscape"],  # missing seed
    ["simulate-map", "--seed", "1", "--set", "landscape=/nonexistent"],
    ["simulate-map", "--seed", "1", "--set", "mode=\"bogus\""],
    ["extract"],
    ["magnetospec", "--seed", "1", "--set", "refit=false", "--set", "alpha=null"],
    ["fit-anticrossing", "--set", "spectrum=/nonexistent.csv"],
])
def test_configuration_errors_exit_2(argv, tmp_path, capsys):
    assert run(*argv, "--out", tmp_path) == EXIT_CONFIG
    assert capsys.readouterr().err.strip()


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2]")
    assert run("synth-landscape", "--config", cfg, "--seed", 1, "--out", tmp_path / "o") == EXIT_CONFIG


def test_env_var_sets_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert run("synth-landscape", "--seed", 0) == EXIT_OK
    assert (tmp_path / "synth-landscape" / "manifest.json").exists()


def _small_map(landscape, out, seed=1, shots=1000):
    cfg = out.parent / f"{out.name}.json"
    cfg.write_text(json.dumps({"landscape": str(landscape), "d_nm": [0, 208.6, 100], "B_T": [0.05, 0.56, 80],
                               "noise": {"shots": shots}}))
    return run("simulate-map", "--config", cfg, "--seed", seed, "--out", out)


def test_simulate_and_extract_pipeline(landscape, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _small_map(landscape, a) == EXIT_OK
    assert _small_map(landscape, b) == EXIT_OK
    assert digests(a) == digests(b)
    man = json.loads((a / "manifest.json").read_text())
    assert any(k.endswith("landscape_E_VS.csv") or "E_VS" in k for k in man["inputs"])

    ex = tmp_path / "ex"
    cfg = tmp_path / "ex.json"
    cfg.write_text(json.dumps({"maps": [str(a / "map.csv")], "truth_landscape": str(landscape)}))
    assert run("extract", "--config", cfg, "--out", ex) == EXIT_OK
    rep = json.loads((ex / "report.json").read_text())
    assert rep["two_dimensional"] is False
    assert not (ex / "map2d.csv").exists()
    assert rep["comparison"][0]["rms_B_error_T"] < 0.008


def test_noiseless_map_flag(landscape, tmp_path):
    assert _small_map(landscape, tmp_path / "n", shots=0) == EXIT_OK
    side = json.loads((tmp_path / "n" / "map.json").read_text())
    assert side["config"]["noise"]["shots"] == 0


def test_extract_all_invalid_exits_3(tmp_path):
    pm = ProbabilityMap("d", np.linspace(0, 200, 30), "B", np.linspace(0.05, 0.56, 40), np.full((30, 40), 0.5))
    save_map(pm, tmp_path / "flat.csv")
    rc = run("extract", "--set", f'maps=["{tmp_path / "flat.csv"}"]', "--out", tmp_path / "ex")
    assert rc == EXIT_NO_RESULT


def test_magnetospec_round_trip_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["magnetospec", "--seed", 2, "--set", 'triangulation={"calibration": [[0, 0], [0.1, 6]]}']
    assert run(*argv, "--out", a) == EXIT_OK
    assert run(*argv, "--out", b) == EXIT_OK
    assert digests(a) == digests(b)
    rep = json.loads((a / "report.json").read_text())
    assert abs(rep["positions"]["E_ST_ueV"]["value"] - 50.0) < 2.0
    assert rep["triangulation"]["consistent"]
    assert rep["y_calibration_nm_per_V"]["value"] == pytest.approx(60.0)


def test_fit_anticrossing_command(tmp_path):
    B = np.linspace(0.3, 0.7, 60)
    nu = precession_frequency(TABLE1, B)
    f = tmp_path / "nu.csv"
    f.write_text("B_T,nu_Hz\n" + "".join(f"{float(b)!r},{float(n)!r}\n" for b, n in zip(B, nu)))
    assert run("fit-anticrossing", "--set", f'spectrum="{f}"', "--out", tmp_path / "o") == EXIT_OK
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    est = {k: v["value"] for k, v in rep["parameters"].items()}
    assert sorted([est["E_l"], est["E_r"]]) == pytest.approx(sorted([TABLE1.E_l, TABLE1.E_r]), abs=0.5)


def test_triangulation_batch_of_34(tmp_path):
    import time

    from vsmap.magnetospec import cross_capacitance_ratio, default_gate_layout

    gates = default_gate_layout()
    x = np.linspace(-30, 30, 121)
    a = cross_capacitance_ratio(gates, "SB", "ST", x, x)
    b = cross_capacitance_ratio(gates, "LB", "RB", x, x)
    rng = np.random.default_rng(0)
    idx = rng.integers(10, 110, size=(34, 2))
    batch = [{"alpha_SB_ST": [float(a.ratio[i, j]), 0.01], "alpha_LB_RB": [float(b.ratio[i, j]), 0.01]}
             for i, j in idx]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"triangulation": {"batch": batch}}))
    t0 = time.perf_counter()
    assert run("magnetospec", "--config", cfg, "--seed", 0, "--out", tmp_path / "o") == EXIT_OK
    assert time.perf_counter() - t0 < 30
    rep = json.loads((tmp_path / "o" / "report.json").read_text())["triangulation_batch"]
    assert len(rep) == 34
    for r, (i, j) in zip(rep, idx):
        assert abs(r["x"] - x[i]) <= 0.5 and abs(r["y"] - x[j]) <= 0.5


def test_triangulation_batch_bad_entry(tmp_path):
    rc = run("magnetospec", "--seed", 0, "--set", 'triangulation={"batch": [{"alpha_SB_ST": [1.2, 0.1]}]}',
             "--out", tmp_path)
    assert rc == EXIT_CONFIG


def test_command_time_budgets(tmp_path):
    import time

    t0 = time.perf_counter()
    assert run("synth-landscape", "--seed", 4, "--out", tmp_path / "land") == EXIT_OK
    t1 = time.perf_counter()
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"landscape": str(tmp_path / "land"), "d_nm": [0, 208.6, 150],
                               "B_T": [0.05, 0.56, 80], "noise": {"shots": 1000}}))
    assert run("simulate-map", "--config", cfg, "--seed", 4, "--out", tmp_path / "map") == EXIT_OK
    t2 = time.perf_counter()
    assert t1 - t0 < 5 and t2 - t1 < 60
