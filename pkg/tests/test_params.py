import dataclasses

import pytest

import gliacomm as g
from gliacomm.params import (ConfigError, config_from_dict, config_to_dict,
                             preset_ad, default_volume, UM3_TO_LITRE)


def test_healthy_defaults_are_oscillation_set():
    p = g.HealthyParams()
    assert p.sigma0 == 0.05
    assert p.kappa_o == 0.5
    assert p.Sigma_M3 == 40.0
    assert p.Sigma_M2 == 15.0
    assert p.hill_n == 2.02 and p.hill_m == 2.2


def test_two_column_presets_differ_where_expected():
    normal = preset_ad(g.Scenario.HEALTHY)
    ad = preset_ad(g.Scenario.ALZHEIMER)
    assert normal.k1 == 0.0004 and ad.k1 == 0.1
    assert normal.k3 == 0.5 and ad.k3 == 0.1
    assert normal.beta == 35.0 and ad.beta == 0.1
    assert normal.K_a == 0.2 and ad.K_a == 2.02
    assert normal.k_CCE == 0.01 and ad.k_CCE == 2.2
    # shared stochastic-production constants
    for p in (normal, ad):
        assert p.O_beta == 0.15 and p.O_delta == 0.15
        assert p.t_k_mean == 0.3 and p.v_n_mean == 30.0
        assert p.F_max == 3.64 and p.I_theta == 0.15 and p.omega_I == 0.05


def test_mean_j_prod():
    p = preset_ad(g.Scenario.ALZHEIMER)
    expected = 0.5 * 0.15 / 0.3 + 0.5 * 0.15 / 30.0
    assert p.mean_j_prod() == pytest.approx(expected)


def test_default_volumes():
    assert default_volume(g.Scenario.HEALTHY) == pytest.approx(19.635 * UM3_TO_LITRE)
    assert default_volume(g.Scenario.ALZHEIMER) == pytest.approx(11.027 * UM3_TO_LITRE)


def test_vgcc_constants():
    vg = g.VgccParams()
    assert (vg.g_T, vg.g_L, vg.g_N, vg.g_R) == (0.06, 3.5, 0.39, 0.2225)
    assert vg.V_ast == 5.223e-13
    assert vg.ca_out == 1500.0


@pytest.mark.parametrize("field,value", [
    ("delta_quantum", 0.0),
    ("delta_quantum", -1.0),
    ("sim_time_max", -5.0),
    ("cell_volume", 0.0),
    ("activation_threshold", 0.0),
])
def test_validate_rejects_bad_scalars(field, value):
    cfg = dataclasses.replace(g.ScenarioConfig(), **{field: value})
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert field.split("_")[0] in str(err.value) or field in str(err.value)


def test_validate_rejects_out_of_bounds_cells():
    cfg = dataclasses.replace(g.ScenarioConfig(), receiver_cell=(9, 0, 0))
    with pytest.raises(ConfigError, match="receiver"):
        cfg.validate()


def test_validate_rejects_tx_equals_rx():
    cfg = dataclasses.replace(g.ScenarioConfig(),
                              transmitter_cell=(1, 1, 1),
                              receiver_cell=(1, 1, 1))
    with pytest.raises(ConfigError):
        cfg.validate()


def test_config_round_trip(tmp_path):
    cfg = g.ScenarioConfig(
        scenario=g.Scenario.ALZHEIMER,
        lattice_dims=(4, 5, 6),
        transmitter_cell=(1, 2, 3),
        receiver_cell=(3, 2, 3),
        topology_spec=g.LinkRadius(d=2.5, n_max=4),
        stimulus=g.StimulusSpec(kind=g.StimulusKind.SQUARE, frequency_hz=0.25),
        rng_seed=77,
        delta_quantum=0.02,
    )
    d = config_to_dict(cfg)
    back = config_from_dict(d)
    assert back == cfg
    path = tmp_path / "cfg.yaml"
    g.save_config(cfg, path)
    assert g.load_config(path) == cfg


def test_config_from_dict_rejects_unknown_keys():
    d = config_to_dict(g.ScenarioConfig())
    d["not_a_field"] = 1
    with pytest.raises(ConfigError, match="not_a_field"):
        config_from_dict(d)


def test_ad_params_validate_catches_negative():
    p = dataclasses.replace(preset_ad(g.Scenario.ALZHEIMER), k2=-1.0)
    with pytest.raises(ConfigError, match="k2"):
        p.validate()
