import json

import numpy as np
import pytest

import bscch


def small(**extra):
    cfg = {"geometry": {"level": 2}, "params": {"m": 0.1}}
    cfg.update(extra)
    return json.dumps(cfg)


def test_preset_round_trip():
    text = bscch.preset("spinodal")
    assert bscch.normalize_config(text) == text
    assert json.loads(text)["geometry"]["radius"] == 2.5
    assert bscch.config_hash(text) == bscch.config_hash(bscch.normalize_config(text))


def test_config_errors_name_rules():
    with pytest.raises(ValueError, match="D1"):
        bscch.normalize_config('{"params": {"beta": 2.0, "m": 0.6}}')
    with pytest.raises(ValueError, match="unknown key"):
        bscch.normalize_config('{"paramz": {}}')


def test_initial_data_is_seeded_and_admissible():
    model = bscch.Model(small())
    b1, s1 = model.initial(3)
    b2, s2 = model.initial(3)
    assert np.array_equal(b1, b2) and np.array_equal(s1, s2)
    assert b1.shape == (model.num_bulk,) and s1.shape == (model.num_surface,)
    assert max(np.abs(b1).max(), np.abs(s1).max()) <= 0.9
    mesh = model.mesh()
    assert mesh["nodes"].shape == (model.num_bulk, 2)
    assert len(mesh["surface_nodes"]) == model.num_surface


def test_simulation_dissipates_energy():
    model = bscch.Model(small(scheme={"dt": 0.01}))
    b, s = model.initial(1)
    out = model.simulate(b, s, 0.0, 0.2)
    energy = out["series"]["energy"]
    assert out["steps"] == 20
    assert np.all(np.diff(energy) <= 1e-10)
    assert out["energy_residual_positive_part"] <= 1e-10
    mass = out["series"]["mass"]
    assert abs(mass[-1] - mass[0]) <= 1e-12
    assert model.energy(out["bulk"], out["surface"])["total"] == pytest.approx(energy[-1], abs=1e-13)


def test_constant_state_is_stationary():
    model = bscch.Model(small())
    c = np.full(model.num_bulk, 0.1), np.full(model.num_surface, 0.1)
    sol = model.stationary(*c)
    assert sol["iterations"] == 0
    assert sol["residual"] <= 1e-12
    assert sol["delta_star"] == pytest.approx(0.9)


def test_errors_are_translated():
    model = bscch.Model(small())
    with pytest.raises(bscch.BscchError):
        model.energy(np.zeros(3), np.zeros(2))
    with pytest.raises(bscch.BscchError):
        bscch.decay_gronwall_Q(0.0, 1.0, 1.0)


def test_scalar_utilities():
    assert bscch.decay_gronwall_Q(1.0, 1.0, 0.0) == pytest.approx(17.5579, abs=1e-4)
    assert bscch.uniform_gronwall_bound(np.log(2.0), 1.0, 1.0, 1.0) == pytest.approx(4.0)
    d1 = bscch.yosida_derivative(1.0, 0.01, 0.5)
    d2 = bscch.yosida_derivative(1.0, 0.01, 0.6)
    assert 0.0 < (d2 - d1) / 0.1 <= 100.0 + 1e-9


def test_run_experiment_writes_artifacts(tmp_path):
    text = small(experiment="simulate", run={"t_end": 0.01})
    assert bscch.run_experiment(text, str(tmp_path / "a")) == 0
    assert bscch.run_experiment(text, str(tmp_path / "b")) == 0
    a = (tmp_path / "a" / "timeseries.csv").read_bytes()
    assert a == (tmp_path / "b" / "timeseries.csv").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["csv_columns"][0] == "t"
    rows = bscch.certify(small(experiment="certify"))
    assert rows and all(r["passed"] for r in rows)
