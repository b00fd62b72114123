from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.analysis.localization import predicted_amplitudes
from src.core.mechanics import QDPosition, load_catalog
from src.pipeline.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CATALOG = CONFIG_DIR / "catalog_device.json"


def test_budget_exit_ok(tmp_path, capsys):
    code = main(["-q", "budget", "--config", str(CONFIG_DIR / "fast_config.yaml"), "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "budget_sweep.csv").is_file()
    assert "budget_sweep.csv" in capsys.readouterr().out


def test_bad_yaml_exit_code(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("simulation: {duration_s: 0.1\n")
    assert main(["-q", "simulate", "--config", str(path)]) == EXIT_VALIDATION


def test_missing_input_exit_code(tmp_path):
    assert main(["-q", "analyze", str(tmp_path / "absent.ptag"), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_zero_areas_exit_code(tmp_path):
    areas = tmp_path / "areas.csv"
    areas.write_text("detuning_rad_per_s,area\n1e9,0\n2e9,0\n3e9,0\n")
    shape = tmp_path / "lineshape.json"
    shape.write_text('{"lorentzian_fwhm_rad_per_s": 5.6e9, "gaussian_fwhm_rad_per_s": 8.8e9, '
                     '"amplitude_per_s": 1e8}')
    code = main(["-q", "analyze", "--areas", str(areas), "--lineshape", str(shape), "--mode", "F1x",
                 "--catalog", str(CATALOG), "--out", str(tmp_path)])
    assert code == EXIT_NUMERICAL


def test_localize_prints_position(tmp_path, capsys):
    catalog = load_catalog(CATALOG)
    labels = ("F1x", "F1y", "F2x", "F3x")
    values = predicted_amplitudes(catalog, QDPosition(35e-9, np.deg2rad(20.0)), labels)
    path = tmp_path / "amplitudes.csv"
    pd.DataFrame({"label": labels, "amplitude": values}).to_csv(path, index=False)
    code = main(["-q", "localize", str(path), "--catalog", str(CATALOG), "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "r = 35.0 nm" in out
    assert "phi = 20.0 deg" in out


def test_recipe_exit_ok(tmp_path):
    assert main(["-q", "recipe", "fig4c", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "fig4c" / "fig4c.csv").is_file()


def test_unknown_recipe_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["recipe", "fig9z"])
    assert info.value.code == EXIT_VALIDATION


def test_verbosity_flags_are_exclusive():
    with pytest.raises(SystemExit) as info:
        main(["-v", "-q", "budget", "--config", "x.yaml"])
    assert info.value.code == 2


def test_malformed_amplitudes_exit_code(tmp_path):
    path = tmp_path / "amplitudes.csv"
    path.write_text('label,amplitude\nB2,1.0\n"F1x,0.4\nF1y,0.2,0.1,9\n')
    assert main(["-q", "localize", str(path), "--catalog", str(CATALOG), "--out", str(tmp_path)]) == EXIT_VALIDATION
    path.write_text("label,amplitude\nB2,1.0\nF1x,strong\n")
    assert main(["-q", "localize", str(path), "--catalog", str(CATALOG), "--out", str(tmp_path)]) == EXIT_VALIDATION
    path.write_text("")
    assert main(["-q", "localize", str(path), "--catalog", str(CATALOG), "--out", str(tmp_path)]) == EXIT_VALIDATION
