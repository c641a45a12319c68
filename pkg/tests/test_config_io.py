import json
import math

import numpy as np
import pytest

from reflected_mcmc.config import ConfigError, ExperimentConfig, load_config, parse_config_text, preset_names
from reflected_mcmc.field import BasisSpec
from reflected_mcmc.forward import ForwardModel, Mesh, ObservationOperator
from reflected_mcmc.io import (
    Provenance,
    SchemaError,
    fmt,
    read_csv,
    read_dataset,
    render_csv,
    write_csv,
    write_dataset,
)
from reflected_mcmc.posterior import make_synthetic_data
from reflected_mcmc.svgplot import line_plot, plot_csv

PROV = Provenance("abc123", 7)


def test_defaults_and_overrides(tmp_path):
    cfg = load_config()
    assert cfg.K == (25, 250) and cfg.abar == 4.38
    path = tmp_path / "a.cfg"
    path.write_text("# comment\nK = 3, 5\nsigma = 0.1\nalgorithms = RWM, IS\n")
    cfg = load_config(path, sigma=0.2)
    assert cfg.K == (3, 5) and cfg.sigma == 0.2 and cfg.algorithms == ("RWM", "IS")


def test_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("sigmaa = 0.1\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("sigma = 0.1\nsigma = 0.2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")
    with pytest.raises(ConfigError):
        parse_config_text("n_cells = many\n")


def test_validation_errors():
    with pytest.raises(ConfigError):
        load_config(sigma=-1.0)
    with pytest.raises(ConfigError):
        load_config(preset="no_such_preset")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.cfg")


def test_presets_all_load():
    names = preset_names()
    assert "acceptance_sweep" in names and "concentrated_sigma0.03_d0.03" in names
    for name in names:
        assert isinstance(load_config(preset=name), ExperimentConfig)


def test_config_hash_ignores_output_location():
    a = load_config(output_dir="x", workers=1)
    b = load_config(output_dir="y", workers=4)
    assert a.config_hash == b.config_hash
    assert a.config_hash != load_config(master_seed=1).config_hash
    # the canonical text parses back to the same config
    assert load_config(**parse_config_text(a.canonical())).config_hash == a.config_hash


def test_fmt():
    assert fmt(True) == "1" and fmt(np.int64(3)) == "3"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf" and fmt(math.nan) == "nan"
    assert fmt(None) == ""
    assert float(fmt(1 / 3)) == 1 / 3


def test_csv_round_trip(tmp_path):
    path = write_csv(tmp_path / "t.csv", PROV, ("a", "b"), [(1, 0.25), ("x", math.inf)])
    meta, cols, rows = read_csv(path)
    assert meta["config_hash"] == "abc123" and meta["master_seed"] == "7"
    assert cols == ["a", "b"]
    assert rows == [{"a": "1", "b": "0.25"}, {"a": "x", "b": "inf"}]
    with pytest.raises(SchemaError):
        render_csv(PROV, ("a", "b"), [(1,)])


@pytest.mark.parametrize("d,count", [(1 / 32, 33), (0.1, 11)])
def test_dataset_round_trip(tmp_path, d, count):
    model = ForwardModel(BasisSpec(2), Mesh(64), ObservationOperator(d))
    ds = make_synthetic_data(3, model, 0.05)
    csv_path, json_path = write_dataset(tmp_path, ds, model.obs.locations, PROV)
    back = read_dataset(csv_path)
    assert len(back.y) == count
    assert np.array_equal(back.y, ds.y)
    assert back.sigma == ds.sigma and back.d == ds.d
    side = json.loads(json_path.read_text())
    assert side["config_hash"] == "abc123"


def test_plot_rejects_bad_input(tmp_path):
    empty = write_csv(tmp_path / "e.csv", PROV, ("algorithm", "K", "epsilon", "accept_rate"), [])
    svg = tmp_path / "e.svg"
    with pytest.raises(SchemaError):
        plot_csv(empty, "acceptance", svg)
    assert not svg.exists()
    wrong = write_csv(tmp_path / "w.csv", PROV, ("algorithm", "K"), [("IS", 1)])
    with pytest.raises(SchemaError):
        plot_csv(wrong, "acceptance", svg)
    with pytest.raises(SchemaError):
        plot_csv(wrong, "histogram", svg)
    with pytest.raises(SchemaError):
        plot_csv(tmp_path / "missing.csv", "acf", svg)
    assert not svg.exists()


def test_plot_is_deterministic_and_captioned(tmp_path):
    rows = [("RWM", 25, 0.1, "u0", lag, 0.9**lag) for lag in range(20)]
    path = write_csv(tmp_path / "acf.csv", PROV, ("algorithm", "K", "epsilon", "functional_id", "lag", "rho"), rows)
    a = plot_csv(path, "acf", tmp_path / "a.svg").read_bytes()
    b = plot_csv(path, "acf", tmp_path / "b.svg").read_bytes()
    assert a == b
    assert b"<desc>functionals: u0</desc>" in a
    with pytest.raises(SchemaError):
        line_plot({}, "x", "y", "t")
