import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import gliacomm as g
from gliacomm.gap_junction import (GjProbabilities, GjState, gj_rates,
                                   gj_sample, gj_stationary, gj_step)

# frozen oracle: stationary distribution at v_j = 0 with the default
# rate constants, from solving the two-state balance by hand
STATIONARY_VJ0 = (0.9970318765370614, 0.0014840617314693075,
                  0.0014840617314693075)


def test_rates_at_zero_junctional_voltage():
    p = g.GapJunctionParams()
    a1, a2, b1, b2 = gj_rates(0.0, p)
    assert a1 == pytest.approx(p.lam * math.exp(p.A_alpha * p.v0))
    assert a2 == pytest.approx(p.lam * math.exp(p.A_alpha * p.v0))
    assert b1 == pytest.approx(p.lam * math.exp(-p.A_beta * p.v0))
    assert b2 == pytest.approx(p.lam * math.exp(-p.A_beta * p.v0))


def test_stationary_against_frozen_oracle():
    probs = gj_stationary(0.0, g.GapJunctionParams())
    assert probs.as_array() == pytest.approx(STATIONARY_VJ0, rel=1e-12)


def test_stationary_balances_fluxes():
    p = g.GapJunctionParams()
    for vj in (-20.0, 0.0, 15.0, 40.0):
        probs = gj_stationary(vj, p)
        a1, a2, b1, b2 = gj_rates(vj, p)
        assert b1 * probs.p_hh == pytest.approx(a1 * probs.p_hl, rel=1e-9)
        assert b2 * probs.p_hh == pytest.approx(a2 * probs.p_lh, rel=1e-9)


def test_stationary_is_step_fixed_point():
    p = g.GapJunctionParams()
    probs = gj_stationary(0.0, p)
    stepped = gj_step(probs, 0.0, 5.0, p)
    assert stepped.as_array() == pytest.approx(probs.as_array(), abs=1e-9)


@given(vj=st.floats(-50.0, 50.0), dt=st.floats(1e-4, 10.0),
       w=st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_step_preserves_normalization(vj, dt, w):
    p = g.GapJunctionParams()
    start = GjProbabilities(p_hh=1.0 - w, p_hl=w / 2, p_lh=w / 2)
    probs = gj_step(start, vj, dt, p)
    arr = probs.as_array()
    assert abs(arr.sum() - 1.0) <= 1e-9
    assert np.all(arr >= -1e-12) and np.all(arr <= 1.0 + 1e-12)


def test_step_converges_to_stationary():
    p = g.GapJunctionParams()
    probs = GjProbabilities(p_hh=0.2, p_hl=0.5, p_lh=0.3)
    for _ in range(400):
        probs = gj_step(probs, 0.0, 0.5, p)
    target = gj_stationary(0.0, p)
    assert probs.as_array() == pytest.approx(target.as_array(), abs=1e-6)


def test_validate_rejects_unnormalized():
    with pytest.raises(ValueError):
        GjProbabilities(p_hh=0.5, p_hl=0.2, p_lh=0.2).validate()


def test_sample_statistics():
    rng = np.random.default_rng(5)
    probs = GjProbabilities(p_hh=0.6, p_hl=0.3, p_lh=0.1)
    draws = [gj_sample(probs, rng) for _ in range(20000)]
    freq = np.bincount([d.value for d in draws], minlength=3) / len(draws)
    assert freq == pytest.approx([0.6, 0.3, 0.1], abs=0.02)
    assert all(isinstance(d, GjState) for d in draws)
