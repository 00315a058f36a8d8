import json
from pathlib import Path

import numpy as np
import pytest

from skinlab.cli import load_config, main, run_experiment, validate_config
from skinlab.errors import ConfigError

PHI_HALF_PI = 1.5707963267948966


def write_config(tmp_path, obj, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def spectra_config(tmp_path, **overrides):
    cfg = {
        "experiment": "Spectra",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": [0.0, PHI_HALF_PI]},
        "n_sites": 20,
        "n_k": 128,
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    return cfg


def test_validate_accepts_good_config(tmp_path):
    cfg = validate_config(spectra_config(tmp_path))
    assert cfg.experiment == "Spectra"
    assert len(cfg.config_hash()) == 16


def test_validation_errors_name_the_field(tmp_path):
    with pytest.raises(ConfigError) as err:
        validate_config(spectra_config(tmp_path, experiment="Wrong"))
    assert err.value.field == "experiment"
    with pytest.raises(ConfigError) as err:
        validate_config({"experiment": "Spectra", "model": {"type": "cosine", "J": 1, "T": 0, "R": -1}})
    assert err.value.field == "model.R"
    with pytest.raises(ConfigError) as err:
        validate_config({
            "experiment": "Trajectories",
            "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": 0.3},
            "n_sites": 5, "t_final": 1.0, "dt": 0.02, "n_traj": 10,
        })
    assert err.value.field == "dt"


def test_config_hash_ignores_output_plumbing(tmp_path):
    a = validate_config(spectra_config(tmp_path))
    b = validate_config(spectra_config(tmp_path, output_dir="elsewhere", n_threads=4))
    assert a.config_hash() == b.config_hash()
    c = validate_config(spectra_config(tmp_path, n_k=256))
    assert a.config_hash() != c.config_hash()


def test_spectra_experiment_outputs(tmp_path):
    cfg = validate_config(spectra_config(tmp_path))
    manifest = run_experiment(cfg)
    outdir = Path(cfg.output_dir)
    assert sorted(manifest["outputs"]) == sorted(
        ["pbc_phi0.csv", "obc_phi0.csv", "pbc_phi1.csv", "obc_phi1.csv", "summary.json"]
    )
    assert (outdir / "manifest.json").exists()
    summary = json.loads((outdir / "summary.json").read_text())
    locs = {round(p["phi"], 3): abs(p["skin_localization"]) for p in summary["panels"]}
    assert locs[0.0] < 0.05 and locs[round(PHI_HALF_PI, 3)] > 0.3
    header = (outdir / "pbc_phi0.csv").read_text().splitlines()
    assert header[2] == f"# config={manifest['config_hash']}"


def test_reruns_are_byte_identical(tmp_path):
    cfg_a = validate_config(spectra_config(tmp_path, output_dir=str(tmp_path / "a")))
    cfg_b = validate_config(spectra_config(tmp_path, output_dir=str(tmp_path / "b")))
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    for name in ("pbc_phi0.csv", "obc_phi1.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trajectories_experiment_threads_do_not_change_bytes(tmp_path):
    base = {
        "experiment": "Trajectories",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": PHI_HALF_PI},
        "n_sites": 7,
        "t_final": 0.5,
        "dt": 0.01,
        "n_traj": 300,
        "master_seed": 11,
    }
    for sub, threads in (("t1", 1), ("t4", 4)):
        cfg = validate_config({**base, "output_dir": str(tmp_path / sub), "n_threads": threads})
        run_experiment(cfg)
    assert (tmp_path / "t1" / "rho_estimate.csv").read_bytes() == \
        (tmp_path / "t4" / "rho_estimate.csv").read_bytes()
    summary = json.loads((tmp_path / "t1" / "ensemble.json").read_text())
    assert summary["error_over_standard_error"] < 5
    assert summary["max_norm_drift"] < 1e-9


def test_entropy_trace_experiment(tmp_path):
    cfg = validate_config({
        "experiment": "EntropyTrace",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": PHI_HALF_PI},
        "n_sites": 11,
        "times": [0.0, 5.0, 320.0],
        "output_dir": str(tmp_path / "ent"),
    })
    run_experiment(cfg)
    summary = json.loads((tmp_path / "ent" / "summary.json").read_text())
    assert abs(summary["s_infinity"] - np.log(11)) < 1e-6
    rows = [l for l in (tmp_path / "ent" / "entropy.csv").read_text().splitlines()
            if not l.startswith("#")]
    last = rows[-1].split(",")
    assert abs(float(last[1]) - np.log(11)) < 1e-3


def test_bulk_and_drift_and_liouvillian_experiments(tmp_path):
    bulk_cfg = validate_config({
        "experiment": "BulkRelax",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": 0.0},
        "n_k": 128,
        "times": [1.0, 2.0],
        "window": [-10, 10],
        "output_dir": str(tmp_path / "bulk"),
    })
    manifest = run_experiment(bulk_cfg)
    assert "density_t0.csv" in manifest["outputs"]
    frames = json.loads((tmp_path / "bulk" / "frames.json").read_text())
    assert len(frames["frames"]) == 2

    drift_cfg = validate_config({
        "experiment": "SemiclassicalDrift",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": PHI_HALF_PI},
        "n_sites": 21,
        "times": [1.0, 3.0],
        "rho0_site": 11,
        "output_dir": str(tmp_path / "drift"),
    })
    run_experiment(drift_cfg)
    rows = [l for l in (tmp_path / "drift" / "drift.csv").read_text().splitlines()
            if not l.startswith("#") and not l.startswith("t,")]
    t, fm_master, fm_semi = (float(x) for x in rows[-1].split(","))
    assert abs(fm_master - 11) < 0.5
    assert abs(fm_semi - 11) > 1.0

    lsp_cfg = validate_config({
        "experiment": "LiouvillianSpectrum",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": 0.0},
        "n_sites": 7,
        "output_dir": str(tmp_path / "lsp"),
    })
    run_experiment(lsp_cfg)
    stationary = json.loads((tmp_path / "lsp" / "stationary.json").read_text())
    assert stationary["zero_eigenvalue_multiplicity"] == 7


def test_hatano_nelson_experiment(tmp_path):
    cfg = validate_config({
        "experiment": "HatanoNelson",
        "model": {"type": "hatano_nelson", "J1": 1, "J2": 2},
        "n_sites": 9,
        "times": [0.5, 1.0],
        "rho0_site": 5,
        "output_dir": str(tmp_path / "hn"),
    })
    manifest = run_experiment(cfg)
    assert "spectrum.csv" in manifest["outputs"]
    spectrum = [l for l in (tmp_path / "hn" / "spectrum.csv").read_text().splitlines()
                if not l.startswith("#") and not l.startswith("re,")]
    assert len(spectrum) == 81
    assert max(float(row.split(",")[0]) for row in spectrum) <= 1e-8


def test_main_exit_codes(tmp_path, capsys):
    good = write_config(tmp_path, spectra_config(tmp_path), "good.json")
    assert main(["validate", str(good)]) == 0
    bad = write_config(tmp_path, {"experiment": "Nope"}, "bad.json")
    assert main(["validate", str(bad)]) == 2
    assert main(["run", str(bad)]) == 2
    # passes validation but trips the wrap-around guard at runtime
    runtime_bad = write_config(tmp_path, {
        "experiment": "BulkRelax",
        "model": {"type": "cosine", "J": 1, "T": 0, "R": 1, "phi": 0.0},
        "n_k": 64,
        "times": [100.0],
        "output_dir": str(tmp_path / "boom"),
    }, "runtime.json")
    assert main(["run", str(runtime_bad)]) == 3
    capsys.readouterr()


def test_main_run_with_overrides(tmp_path):
    path = write_config(tmp_path, spectra_config(tmp_path), "cfg.json")
    assert main(["run", str(path), "--out", str(tmp_path / "other"), "--threads", "2"]) == 0
    assert (tmp_path / "other" / "manifest.json").exists()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_coefficient_table_model(tmp_path):
    cfg = validate_config({
        "experiment": "Spectra",
        "model": {"type": "coeffs",
                  "h": [[1, 1.0, 0.0], [-1, 1.0, 0.0]],
                  "p": [[0, 1.0, 0.0]]},
        "n_sites": 10,
        "n_k": 64,
        "output_dir": str(tmp_path / "coeffs"),
    })
    manifest = run_experiment(cfg)
    assert "pbc_phi0.csv" in manifest["outputs"]
    # momentum-independent jump amplitude: every energy has Im = -1/2
    rows = [l for l in (tmp_path / "coeffs" / "pbc_phi0.csv").read_text().splitlines()
            if not l.startswith("#") and not l.startswith("k,")]
    ims = {float(r.split(",")[2]) for r in rows}
    assert all(abs(v + 0.5) < 1e-12 for v in ims)


def test_bad_coefficient_tables_fail_validation():
    with pytest.raises(ConfigError) as err:
        validate_config({
            "experiment": "Spectra",
            "model": {"type": "coeffs", "h": [[1, 1.0, 0.0]], "p": []},
            "n_sites": 10,
        })
    assert err.value.field == "model"
