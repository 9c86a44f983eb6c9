import subprocess
import sys

import numpy as np
import pandas as pd
import pytest
import yaml

from leo_precoding.cli import main
from leo_precoding.config import ConfigError, config_from_dict, parse_config
from leo_precoding.export import (
    emit_plot_data,
    export_results,
    parse_filter,
    read_results,
)
from leo_precoding.simulation import RECORD_COLUMNS, empty_records, run_campaign

TINY = {"seed": 5, "iterations": 1, "lattice": {"n_rings": 1}, "user_density_per_km2": 0.001,
        "array": {"nx": 4, "ny": 4}, "terminals": ["handheld"], "scenarios": ["fixed"],
        "power_density_dbw_mhz": [4.0], "schemes": ["mmse", "mb"]}


@pytest.fixture(scope="module")
def records():
    return run_campaign(config_from_dict(TINY)).records


@pytest.fixture
def tiny_yaml(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def test_defaults_materialise(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 7\n")
    cfg = parse_config(path)
    assert cfg.seed == 7
    assert cfg.power_density_dbw_mhz == [0.0, 4.0, 8.0, 12.0]
    assert cfg.lattice.n_rings == 5 and cfg.array.nx * cfg.array.ny == 256
    assert len(cfg.cells()) == 2 * 2 * 2 * 2 * 4 * 4 * 3


def test_power_list_is_read(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("power_density_dbw_mhz: [0, 4, 8, 12]\n")
    assert parse_config(path).power_density_dbw_mhz == [0, 4, 8, 12]


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="lattice.n_ring"):
        config_from_dict({"lattice": {"n_ring": 2}})


def test_out_of_range_is_named():
    with pytest.raises(ConfigError, match="iterations"):
        config_from_dict({"iterations": 0})
    with pytest.raises(ConfigError, match="schemes"):
        config_from_dict({"schemes": ["mmse", "mmse"]})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_fingerprint_tracks_content():
    a, b = config_from_dict({}), config_from_dict({"seed": 1})
    assert a.fingerprint() == config_from_dict({}).fingerprint()
    assert a.fingerprint() != b.fingerprint()


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip(records, tmp_path, fmt):
    path = export_results(records, tmp_path / f"r.{fmt}", fmt)
    back = read_results(path)
    assert list(back.columns) == RECORD_COLUMNS
    for col in ("sinr_db", "sir_db", "se_bps_hz"):
        np.testing.assert_array_equal(back[col].to_numpy(), records[col].to_numpy())
    np.testing.assert_array_equal(back["scheme"].astype(str), records["scheme"].astype(str))


def test_export_is_byte_stable(records, tmp_path):
    a = export_results(records, tmp_path / "a.csv").read_bytes()
    b = export_results(records, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_empty_export_has_header(tmp_path):
    path = export_results(empty_records(), tmp_path / "e.csv")
    assert path.read_text().strip() == ",".join(RECORD_COLUMNS)


def test_unknown_format(records, tmp_path):
    with pytest.raises(ValueError):
        export_results(records, tmp_path / "x", "parquet")


def test_parse_filter():
    assert parse_filter("scheme=mmse,mb;power_dbw_mhz=4") == {"scheme": ["mmse", "mb"],
                                                              "power_dbw_mhz": [4.0]}
    assert parse_filter(None) == {}
    with pytest.raises(ValueError):
        parse_filter("colour=red")


@pytest.mark.parametrize("kind", ["mean_se_histogram", "sinr_cdf", "sir_cdf"])
def test_plot_data(records, tmp_path, kind):
    path = emit_plot_data(records, kind, tmp_path, {"scheme": ["mmse"]})
    table = pd.read_csv(path)
    assert (table["scheme"] == "mmse").all()
    assert (tmp_path / f"plot_{kind}.py").exists()
    if kind != "mean_se_histogram":
        for _, grp in table.groupby(["space", "propagation", "normalization"]):
            assert grp["probability"].iloc[-1] == pytest.approx(1.0)
            assert np.all(np.diff(grp["probability"]) > 0)


def test_plot_data_empty_filter(records, tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(records, "sir_cdf", tmp_path, {"scheme": ["ss-mmse"]})


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------

def test_cli_run_and_plot(tiny_yaml, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(tiny_yaml), "--out", str(out)]) == 0
    assert (out / "records.csv").exists() and (out / "mean_se.csv").exists()
    echo = yaml.safe_load((out / "config_echo.yaml").read_text())
    assert echo["config"]["seed"] == 5
    assert main(["plot-data", "--records", str(out / "records.csv"), "--kind", "sir_cdf",
                 "--filter", "normalization=spc", "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "sir_cdf.csv").exists()


def test_cli_cells_and_seed_override(tiny_yaml, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(tiny_yaml), "--out", str(out), "--seed", "9",
                 "--cells", "scheme=mb;normalization=pac", "--format", "jsonl"]) == 0
    back = read_results(out / "records.jsonl")
    assert set(back["scheme"].astype(str)) == {"mb"}
    assert set(back["normalization"].astype(str)) == {"pac"}
    assert yaml.safe_load((out / "config_echo.yaml").read_text())["config"]["seed"] == 9


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("bogus: 1\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "bogus" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "o"), "--cells", "colour=red"]) == 1


def test_cli_config_prints_echo(tiny_yaml, capsys):
    assert main(["config", "--config", str(tiny_yaml)]) == 0
    echo = yaml.safe_load(capsys.readouterr().out)
    assert echo["schema_version"] == 1


def test_console_script_module_entry(tiny_yaml):
    proc = subprocess.run([sys.executable, "-m", "leo_precoding.cli", "config", "--config",
                           str(tiny_yaml)], capture_output=True, text=True)
    assert proc.returncode == 0 and "fingerprint" in proc.stdout
