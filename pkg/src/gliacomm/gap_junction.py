"""Two-gate voltage-sensitive gap junction state model.

Three states are tracked (HH, HL, LH); the doubly-closed state is
neglected, so the three probabilities sum to one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .params import GapJunctionParams


class GjState(enum.Enum):
    HH = 0
    HL = 1
    LH = 2


@dataclass(frozen=True)
class GjProbabilities:
    p_hh: float
    p_hl: float
    p_lh: float

    def validate(self, tol: float = 1e-9) -> None:
        for v in (self.p_hh, self.p_hl, self.p_lh):
            if not -tol <= v <= 1 + tol:
                raise ValueError(f"probability {v} outside [0, 1]")
        if abs(self.p_hh + self.p_hl + self.p_lh - 1.0) > tol:
            raise ValueError("gap junction probabilities must sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_hh, self.p_hl, self.p_lh])


@dataclass
class GjEdgeState:
    probs: GjProbabilities
    v_j: float = 0.0
    sampled_state: GjState = GjState.HH


def gj_rates(v_j: float, p: GapJunctionParams):
    """(alpha1, alpha2, beta1, beta2) opening/closing rates in 1/s."""
    a1 = p.lam * math.exp(-p.A_alpha * (v_j - p.v0))
    a2 = p.lam * math.exp(p.A_alpha * (v_j + p.v0))
    b1 = p.lam * math.exp(p.A_beta * (v_j - p.v0))
    b2 = p.lam * math.exp(-p.A_beta * (v_j + p.v0))
    return a1, a2, b1, b2


def gj_stationary(v_j: float, p: GapJunctionParams) -> GjProbabilities:
    """Stationary distribution for a frozen junctional voltage."""
    a1, a2, b1, b2 = gj_rates(v_j, p)
    # b1 p_HH = a1 p_HL and b2 p_HH = a2 p_LH at equilibrium
    p_hh = 1.0 / (1.0 + b1 / a1 + b2 / a2)
    return GjProbabilities(p_hh, (b1 / a1) * p_hh, (b2 / a2) * p_hh)


def gj_step(probs: GjProbabilities, v_j: float, dt: float,
            p: GapJunctionParams) -> GjProbabilities:
    """Advance the probability ODEs by dt with internal Euler sub-stepping.

    The sub-step is capped well under the fastest rate so every
    intermediate stays a valid distribution.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    a1, a2, b1, b2 = gj_rates(v_j, p)
    rmax = max(a1, a2, b1, b2)
    h_max = 0.1 / rmax
    n = max(1, int(math.ceil(dt / h_max))) if dt > 0 else 0
    p_hl, p_lh = probs.p_hl, probs.p_lh
    p_hh = 1.0 - p_hl - p_lh
    h = dt / n if n else 0.0
    for _ in range(n):
        # each off state is sourced by its beta and damped by its own
        # alpha; cross-damping makes the difference mode unstable
        d_hl = b1 * p_hh - a1 * p_hl
        d_lh = b2 * p_hh - a2 * p_lh
        p_hl += h * d_hl
        p_lh += h * d_lh
        p_hl = min(max(p_hl, 0.0), 1.0)
        p_lh = min(max(p_lh, 0.0), 1.0)
        p_hh = 1.0 - p_hl - p_lh
        if p_hh < 0.0:
            s = p_hl + p_lh
            p_hl /= s
            p_lh /= s
            p_hh = 0.0
    return GjProbabilities(p_hh, p_hl, p_lh)


def gj_sample(probs: GjProbabilities, rng: np.random.Generator) -> GjState:
    """Categorical draw over the three gate states."""
    u = rng.random()
    if u < probs.p_hh:
        return GjState.HH
    if u < probs.p_hh + probs.p_hl:
        return GjState.HL
    return GjState.LH
