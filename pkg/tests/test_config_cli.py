from __future__ import annotations

import json
from pathlib import Path

import pytest

from src.cli.main import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, build_parser, main, resolve_config
from src.config.run_config import DEFAULT_FIELDS, FIELD_UNITS, QUICK_FIELDS, load_config, parse_config, parse_quantity
from src.config.settings import DATA_DIR, Settings
from src.errors import ConfigError
from src.outputs.files import read_csv, read_json
from src.services import pipeline

A = 0.5431
PARAMS_PATH = DATA_DIR / "si_sp3d5s_boykin2004.json"


def _minimal() -> dict:
    return {"domain": {"extents_nm": [20, 20, 20], "impurity_depth_nm": 10.0}}


def _write_config(directory: Path, **overrides) -> Path:
    document = {
        "domain": {"extents_nm": [A, 2 * A, A], "impurity_depth_nm": A},
        "params_file": str(PARAMS_PATH),
        "potential": {"u0_ev": 4.33},
        "field": {"grid_V_per_um": [-0.1, -0.05, 0.0, 0.05, 0.1]},
        "depth_range_nm": [0.1, 1.0],
        "solver": {
            "n_states": 4,
            "sigma": 0.5,
            "mode": "plain",
            "tolerance": 1e-10,
            "window_halfwidth": None,
            "check_interval": 1000,
            "max_basis": 320,
            "seed": 3,
        },
        "output_dir": str(directory / "out"),
    }
    document.update(overrides)
    path = directory / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_minimal_config_fills_defaults():
    config = parse_config(_minimal())
    assert config.domain.lattice_constant == pytest.approx(A)
    assert config.domain.depth_axis == "y"
    assert config.efield.grid == DEFAULT_FIELDS
    assert config.efield.direction == (0.0, -1.0, 0.0)
    assert 0.0 in config.efield.grid
    assert config.potential.kappa == pytest.approx(11.9)
    assert config.potential.u0 is None
    assert config.potential.target_binding == pytest.approx(0.0456)
    assert config.depths == ()
    assert config.workers >= 1


def test_quantities_accept_units():
    document = _minimal()
    document["domain"]["impurity_depth_nm"] = "100 A"
    document["potential"] = {"target_binding_ev": "45.6 meV"}
    document["field"] = {"grid_V_per_um": ["-10 kV/cm", 0, "1 MV/m"]}
    config = parse_config(document)
    assert config.domain.impurity_depth == pytest.approx(10.0)
    assert config.potential.target_binding == pytest.approx(0.0456)
    assert config.efield.grid == pytest.approx((-1.0, 0.0, 1.0))


def test_unknown_unit_names_the_field():
    document = _minimal()
    document["domain"]["extents_nm"] = [20, "20 furlongs", 20]
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.field == "domain.extents_nm[1]"


def test_unknown_keys_are_rejected():
    document = _minimal()
    document["solver"] = {"n_state": 4}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.field == "solver.n_state"


def test_field_grid_must_contain_zero():
    document = _minimal()
    document["field"] = {"grid_V_per_um": [-1.0, 1.0]}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.field == "field.grid_V_per_um"


def test_depths_outside_the_range_are_rejected():
    document = _minimal()
    document["depths_nm"] = [40.0]
    with pytest.raises(ConfigError):
        parse_config(document)


def test_round_trip_preserves_the_hash():
    config = parse_config(_minimal())
    again = parse_config(config.to_document())
    assert again.config_hash == config.config_hash


def test_output_dir_and_workers_do_not_change_the_hash(tmp_path):
    config = parse_config(_minimal())
    moved = config.with_overrides(output_dir=tmp_path, workers=4)
    assert moved.config_hash == config.config_hash
    assert config.with_overrides(seed=99).config_hash != config.config_hash


def test_parse_quantity_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_quantity("fast", FIELD_UNITS, "--field")
    assert parse_quantity("2.5e-1 V/um", FIELD_UNITS, "--field") == pytest.approx(0.25)


def test_quick_then_explicit_fields(tmp_path):
    path = _write_config(tmp_path, domain={"extents_nm": [20, 20, 20], "impurity_depth_nm": 10.0}, depth_range_nm=[5, 32])
    args = build_parser().parse_args(["sweep", "--config", str(path), "--quick"])
    quick = resolve_config(args)
    assert quick.efield.grid == QUICK_FIELDS
    assert quick.domain.extents == (8.0, 8.0, 8.0)
    assert quick.domain.impurity_depth == pytest.approx(4.0)

    args = build_parser().parse_args(["sweep", "--config", str(path), "--quick", "--fields", "-0.2,0,0.2"])
    assert resolve_config(args).efield.grid == (-0.2, 0.0, 0.2)


def test_missing_config_exits_with_a_config_error(tmp_path, capsys):
    code = main(["sweep", "--config", str(tmp_path / "missing.json")])
    assert code == EXIT_CONFIG
    document = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert document["error"] == "config"
    assert document["details"]["field"] == "--config"


def test_depth_scan_without_depths_fails(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert main(["depth-scan", "--config", str(path)]) == EXIT_FAILURE
    document = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert document["error"] == "precondition"


def test_dense_check_on_a_single_cell(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(pipeline, "DENSE_CHECK_CELLS", 1)
    path = _write_config(tmp_path)
    assert main(["dense-check", "--config", str(path)]) == EXIT_OK
    assert any(line.startswith("dense-check: PASS") for line in capsys.readouterr().out.splitlines())
    result = read_json(tmp_path / "out" / "dense_check.json")
    assert result["n_sites"] == 8
    assert result["max_abs_eigenvalue_difference_ev"] <= 1e-9
    manifest = read_json(tmp_path / "out" / "manifest.json")
    assert manifest["command"] == "dense-check"
    assert manifest["extra"]["status"] == "ok"
    assert "tb_params" in manifest["param_checksums"]


@pytest.mark.slow
def test_dense_check_on_the_standard_cube(tmp_path):
    config = load_config(_write_config(tmp_path))
    assert pipeline.run_dense_check(config)["status"] == "PASS"


def test_solve_writes_observables_and_maps(tmp_path):
    config = load_config(_write_config(tmp_path))
    document = pipeline.run_solve(config, b0=0.35)
    assert [entry["field_V_per_um"] for entry in document["fields"]] == [0.0, 0.1]
    assert document["fields"][0]["ratio_all"] == 1.0
    out = tmp_path / "out"
    for name in ("solve.json", "zero_field.ckpt", "density_zero.csv", "density_difference.csv", "manifest.json"):
        assert (out / name).exists()
    config_hash, frame = read_csv(out / "density_zero.csv")
    assert config_hash == config.config_hash
    assert list(frame.columns) == ["x_nm", "y_nm", "z_nm", "value"]


def _synthetic_scan() -> dict:
    entries = []
    for depth, eta1 in ((5.0, 2e-3), (10.0, 1e-3)):
        fields = [-1.0, -0.5, 0.0, 0.5, 1.0]
        entries.append(
            {
                "requested_depth_nm": depth,
                "depth_nm": depth,
                "sweep": {
                    "depth_nm": depth,
                    "points": [
                        {"field_V_per_um": f, "ratio_all": 1.0 - 3.7e-3 * f * f + eta1 * f, "dipole_nm": 0.1 * f}
                        for f in fields
                    ],
                },
                "stark_fit": {"eta2_um2_per_V2": -3.7e-3, "eta1_um_per_V": eta1, "eta2_sigma": 1e-5, "eta1_sigma": 1e-5},
                "dipole_fit": {"slope_nm_per_V_per_um": 0.1, "intercept_nm": 0.0},
            }
        )
    return {"config_hash": "feedc0de", "u0_ev": 4.33, "entries": entries, "trends": {}}


def test_plot_from_a_depth_scan_document(tmp_path, capsys):
    scan_path = tmp_path / "scan.json"
    scan_path.write_text(json.dumps(_synthetic_scan()), encoding="utf-8")
    path = _write_config(tmp_path)
    assert main(["plot", "--config", str(path), "--from", str(scan_path)]) == EXIT_OK
    assert "plot: ok" in capsys.readouterr().out.splitlines()
    out = tmp_path / "out"
    for name in ("fig1a", "fig1b", "fig1c", "fig1d"):
        first_line = (out / f"{name}.csv").read_text(encoding="utf-8").splitlines()[0]
        assert first_line == "# config_hash=feedc0de"
        assert (out / f"{name}.svg").read_text(encoding="utf-8").count("<svg") == 1
    assert (out / "fig1b_eta1.svg").exists()
    _, fig1a = read_csv(out / "fig1a.csv")
    assert len(fig1a) == 10
    assert list(fig1a["depth"]) == sorted(fig1a["depth"])


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("DONOR_STARK_WORKERS", "0")
    monkeypatch.setenv("DONOR_STARK_DENSE_CAP", "1200")
    monkeypatch.setenv("DONOR_STARK_KAPPA", "12.1")
    loaded = Settings.from_env()
    assert loaded.runtime.workers == 1
    assert loaded.runtime.dense_cap == 1200
    assert loaded.physics.kappa == pytest.approx(12.1)


def test_settings_reject_non_numeric_values(monkeypatch):
    monkeypatch.setenv("DONOR_STARK_DENSE_CAP", "lots")
    with pytest.raises(RuntimeError, match="DONOR_STARK_DENSE_CAP"):
        Settings.from_env()


def test_bands_report_and_core_table(tmp_path):
    config = load_config(_write_config(tmp_path))
    summary = pipeline.run_bands(config)
    assert summary["checks"]["indirect_gap_within_0.05_ev"]
    assert summary["checks"]["valley_in_0.81_0.85"]
    out = tmp_path / "out"
    _, bands = read_csv(out / "bands.csv")
    assert len(bands) == summary["n_kpoints"]
    assert "band_00" in bands.columns
    _, core = read_csv(out / "core_potential.csv")
    assert core["q_per_nm"].iloc[0] == 0.0
    assert read_json(out / "manifest.json")["command"] == "bands"
