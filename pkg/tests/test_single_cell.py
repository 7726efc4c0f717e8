import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import gliacomm as g
from gliacomm.params import preset_ad
from gliacomm.single_cell import (CellInputs, HEALTHY_REST, Model,
                                  ad_fluxes, ad_rest_state, ad_rhs,
                                  gate_steady_states, gate_time_constants,
                                  gating_rhs, healthy_fluxes, healthy_rhs,
                                  integrate, nernst_ca, scan_oscillations,
                                  vgcc_flux)

# frozen oracle: three-pool RHS at (0.2, 1.2, 0.3) computed independently
HEALTHY_RHS_ORACLE = (22.24048661926522, -22.290486619265216,
                      -0.008615384615384613)
HEALTHY_SIGMAS_ORACLE = (33.79048661926522, 12.0, 0.015384615384615387)


def test_healthy_rhs_against_frozen_oracle():
    out = healthy_rhs(np.array([0.2, 1.2, 0.3]), g.HealthyParams())
    assert np.allclose(out, HEALTHY_RHS_ORACLE, rtol=1e-12)


def test_healthy_fluxes_against_frozen_oracle():
    s1, s2, s3 = healthy_fluxes(0.2, 1.2, 0.3, g.HealthyParams())
    assert (s1, s2, s3) == pytest.approx(HEALTHY_SIGMAS_ORACLE, rel=1e-12)


def test_healthy_mass_balance():
    # every ER exchange term appears with opposite sign in dEr
    p = g.HealthyParams()
    state = np.array([0.31, 2.1, 0.2])
    dCa, dEr, _ = healthy_rhs(state, p)
    total = dCa + dEr
    assert total == pytest.approx(p.sigma0 - p.kappa_o * state[0], rel=1e-12)


# frozen oracle: four-pool fluxes at (C, E, I, R) = (0.5, 4.0, 0.4, 0.6),
# normal-tissue column, computed independently
AD_FLUX_ORACLE = dict(v_CCE=0.008620689655172414, v_iR=0.07339449541284403,
                      V_OUT=0.25, v_ER_leak=0.0014,
                      v_ER_rel=0.2317241379310345, v_SERCA=0.25)


def test_ad_fluxes_against_frozen_oracle():
    p = preset_ad(g.Scenario.HEALTHY)
    fs = ad_fluxes(0.5, 4.0, 0.4, 0.6, p)
    for name, val in AD_FLUX_ORACLE.items():
        assert getattr(fs, name) == pytest.approx(val, rel=1e-12), name


def test_ad_er_exchange_scaled_by_beta():
    p = preset_ad(g.Scenario.ALZHEIMER)
    s = ad_rest_state(p, g.VgccParams())
    d = ad_rhs(s, p, g.VgccParams(), CellInputs())
    fs = ad_fluxes(s[0], s[1], s[2], s[3], p)
    assert d[1] == pytest.approx(p.beta * (fs.v_SERCA - fs.v_ER_leak
                                           - fs.v_ER_rel), rel=1e-9)


def test_gate_time_constant_paper_value():
    # transient-type activation time constant at -68 mV is 77 ms
    tau_ms = gate_time_constants(-68.0)
    assert tau_ms[0] == pytest.approx(77.0, abs=1e-9)


def test_vgcc_current_to_flux_factor():
    # 1 fA of inward current over the astrocyte volume: uM/s per fA
    vg = g.VgccParams()
    factor = 1e-15 / (vg.z * vg.faraday * vg.V_ast) * 1e6
    assert factor == pytest.approx(9.921793349066718e-3, rel=1e-12)
    gates, _, _ = gate_steady_states(-70.0, 0.1)
    i_pA, j = vgcc_flux(gates, -70.0, 0.1, vg)
    assert j == pytest.approx(-i_pA * 1e3 * factor, rel=1e-12)
    # hyperpolarized below the Ca reversal potential: inward current,
    # positive cytosolic flux
    assert i_pA < 0 < j


def test_nernst_potential_positive_for_high_external_ca():
    assert nernst_ca(0.1, g.VgccParams()) > 100.0  # mV


@given(V=st.floats(-100.0, 60.0), Ca=st.floats(1e-4, 50.0))
@settings(max_examples=200, deadline=None)
def test_gate_steady_states_bounded(V, Ca):
    gates, h_L, h_N = gate_steady_states(V, Ca)
    assert np.all(gates >= 0.0) and np.all(gates <= 1.0)
    assert 0.0 <= h_L <= 1.0 and 0.0 <= h_N <= 1.0


@given(V=st.floats(-100.0, 60.0), dt=st.floats(1e-5, 1.0))
@settings(max_examples=100, deadline=None)
def test_gate_relaxation_stays_bounded(V, dt):
    gates = np.full(7, 0.5)
    tau_s = gate_time_constants(V) * 1e-3
    assert np.all(tau_s > 0)
    xbar, _, _ = gate_steady_states(V, 0.1)
    relaxed = xbar + (gates - xbar) * np.exp(-dt / tau_s)
    assert np.all(relaxed >= 0.0) and np.all(relaxed <= 1.0)
    # the ODE drives each gate toward its steady state
    d = gating_rhs(gates, V)
    assert np.all(np.sign(d) == np.sign(xbar - gates))


def test_healthy_limit_cycle_from_perturbed_start():
    p = g.HealthyParams()
    traj = integrate(Model.HEALTHY, np.array([0.3, 1.0, 0.2]), p, 800.0, 0.01)
    tail = traj.ca[-20000:]
    assert tail.max() - tail.min() > 0.3  # sustained oscillation, uM


def test_closed_cell_conservation():
    # no plasma-membrane exchange: cytosol + store calcium is conserved
    p = dataclasses.replace(g.HealthyParams(), sigma0=0.0, kappa_o=0.0)
    s0 = np.array([0.3, 1.0, 0.2])
    traj = integrate(Model.HEALTHY, s0, p, 100.0, 0.01)
    total = traj.states[:, 0] + traj.states[:, 1]
    assert np.max(np.abs(total - total[0])) <= 1e-6


def test_integrate_clamps_and_reports():
    # huge efflux drives Ca negative within one step without clamping
    p = dataclasses.replace(g.HealthyParams(), kappa_o=1e4, sigma0=0.0)
    traj = integrate(Model.HEALTHY, HEALTHY_REST.copy(), p, 1.0, 0.01)
    assert np.all(traj.ca >= 0.0)


def test_scan_zero_drive_is_quiescent():
    points = scan_oscillations(Model.HEALTHY, g.HealthyParams(),
                               drives=[0.0], t_span=100.0)
    assert points[0].oscillating is False


def test_trajectory_csv_round_trip(tmp_path):
    p = g.HealthyParams()
    traj = integrate(Model.HEALTHY, HEALTHY_REST.copy(), p, 1.0, 0.1)
    path = tmp_path / "traj.csv"
    traj.to_csv(path, Model.HEALTHY)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[0] == traj.t.size
    assert np.allclose(data[:, 1], traj.ca)
