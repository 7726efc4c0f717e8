"""Intracellular calcium dynamics for one astrocyte.

Two deterministic models: the healthy three-pool model (cytosolic Ca,
ER Ca, IP3) and the four-pool variant used for the Alzheimer scenario
(adds the active IP3R fraction and a VGCC-driven membrane influx).
State vectors are plain numpy arrays:

  healthy: [Ca, Er, Ip3]
  four-pool: [Ca, Er, Ip3, R, m_T, h_Tf, h_Ts, m_L, m_N, m_R, h_R]
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .params import ADParams, HealthyParams, VgccParams

HEALTHY_DIM = 3
AD_DIM = 11
N_GATES = 7
GATE_NAMES = ("m_T", "h_Tf", "h_Ts", "m_L", "m_N", "m_R", "h_R")

HEALTHY_REST = np.array([0.1, 1.5, 0.1])


class Model(enum.Enum):
    HEALTHY = "healthy"
    AD = "ad"


class IntegrationDivergedError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.6g} s")
        self.t = t


@dataclass(frozen=True)
class CellInputs:
    """External drives of one cell: all default to quiet."""

    membrane_voltage: float = -70.0   # mV
    ip3_diffusion_in: float = 0.0     # uM/s, net IP3 gap flow into the cell
    j_prod_rate: float = 0.0          # uM/s, current stochastic IP3 production


QUIET = CellInputs()


# --- healthy three-pool model ----------------------------------------------

def healthy_fluxes(Ca, Er, Ip3, p: HealthyParams):
    """(sigma1, sigma2, sigma3): CICR, SERCA and PLC fluxes in uM/s."""
    Can = Ca ** p.hill_n
    sigma1 = (4.0 * p.Sigma_M3
              * (p.kappa_C1 ** p.hill_n * Can)
              / ((Can + p.kappa_C1 ** p.hill_n) * (Can + p.kappa_C2 ** p.hill_n))
              * Ip3 ** p.hill_m / (p.kappa_I ** p.hill_m + Ip3 ** p.hill_m)
              * (Er - Ca))
    sigma2 = p.Sigma_M2 * Ca ** 2 / (p.kappa_2 ** 2 + Ca ** 2)
    sigma3 = p.Sigma_p * Ca ** p.hill_p / (p.kappa_p ** p.hill_p + Ca ** p.hill_p)
    return sigma1, sigma2, sigma3


def healthy_rhs(state, p: HealthyParams, ip3_scale: float = 1.0):
    """Time derivative of [Ca, Er, Ip3]; ip3_scale multiplies IP3 production."""
    Ca, Er, Ip3 = state
    sigma1, sigma2, sigma3 = healthy_fluxes(Ca, Er, Ip3, p)
    leak = p.kappa_f * (Er - Ca)
    dCa = p.sigma0 - p.kappa_o * Ca + sigma1 - sigma2 + leak
    dEr = sigma2 - sigma1 - leak
    dIp3 = ip3_scale * sigma3 - p.kappa_d * Ip3
    return np.array([dCa, dEr, dIp3])


# --- VGCC kinetics (Table-style sigmoid steady states, Gaussian taus) -------

def gate_steady_states(V: float, Ca_uM: float):
    """Steady-state values of the 7 gating variables plus algebraic h_L, h_N.

    The Ca-dependent inactivations use half-saturations of 0.00045 and
    0.0001 mM; cytosolic Ca is converted from uM here, the one site where
    that conversion happens.
    """
    ca_mM = Ca_uM * 1e-3
    m_T = 1.0 / (1.0 + math.exp(-(V + 63.5) / 1.5))
    h_T = 1.0 / (1.0 + math.exp((V + 76.2) / 3.0))
    m_L = 1.0 / (1.0 + math.exp(-(V + 50.0) / 3.0))
    m_N = 1.0 / (1.0 + math.exp(-(V + 45.0) / 7.0))
    m_R = 1.0 / (1.0 + math.exp(-(V + 10.0) / 10.0))
    h_R = 1.0 / (1.0 + math.exp((V + 48.0) / 5.0))
    h_L = 0.00045 / (0.00045 + ca_mM)
    h_N = 0.0001 / (0.0001 + ca_mM)
    # h_Tf and h_Ts share the same steady state; only their taus differ.
    return np.array([m_T, h_T, h_T, m_L, m_N, m_R, h_R]), h_L, h_N


def gate_time_constants(V: float):
    """Time constants of the 7 gating variables in ms."""
    tau_m_T = 65.0 * math.exp(-(((V + 68.0) / 6.0) ** 2)) + 12.0
    tau_h_Tf = 50.0 * math.exp(-(((V + 72.0) / 10.0) ** 2)) + 10.0
    tau_h_Ts = 400.0 * math.exp(-(((V + 100.0) / 10.0) ** 2)) + 400.0
    tau_m_L = 18.0 * math.exp(-(((V + 45.0) / 20.0) ** 2)) + 1.5
    tau_m_N = 18.0 * math.exp(-(((V + 70.0) / 25.0) ** 2)) + 0.30
    tau_m_R = 0.1 * math.exp(-(((V + 62.0) / 13.0) ** 2)) + 0.05
    tau_h_R = 0.5 * math.exp(-(((V + 55.6) / 18.0) ** 2)) + 0.5
    return np.array([tau_m_T, tau_h_Tf, tau_h_Ts, tau_m_L, tau_m_N,
                     tau_m_R, tau_h_R])


def gating_rhs(gates, V: float):
    """First-order relaxation toward the voltage steady states (1/s)."""
    xbar, _, _ = gate_steady_states(V, 0.1)
    tau_s = gate_time_constants(V) * 1e-3
    return (xbar - gates) / tau_s


def nernst_ca(Ca_uM: float, vg: VgccParams) -> float:
    """Ca reversal potential in mV."""
    ca = max(Ca_uM, 1e-9)
    return 1e3 * (vg.gas_constant * vg.temperature
                  / (vg.z * vg.faraday)) * math.log(vg.ca_out / ca)


def vgcc_flux(gates, V: float, Ca_uM: float, vg: VgccParams):
    """(I_VGCC in pA, J_VGCC in uM/s) for the current gating state."""
    m_T, h_Tf, h_Ts, m_L, m_N, m_R, h_R = gates
    _, h_L, h_N = gate_steady_states(V, Ca_uM)
    e_ca = nernst_ca(Ca_uM, vg)
    drive = V - e_ca
    # pS * mV = fA
    i_fA = drive * (vg.g_T * m_T * (h_Tf + 0.04 * h_Ts)
                    + vg.g_L * m_L * h_L
                    + vg.g_N * m_N * h_N
                    + vg.g_R * m_R * h_R)
    i_pA = i_fA * 1e-3
    # pA -> A, divide by z F V_ast (C/mol * L) -> mol/(L s), -> uM/s
    j = -i_pA * 1e-12 / (vg.z * vg.faraday * vg.V_ast) * 1e6
    return i_pA, j


# --- four-pool (AD) model ---------------------------------------------------

@dataclass(frozen=True)
class FluxSet:
    v_CCE: float
    v_iR: float
    v_PLCbeta: float
    V_OUT: float
    v_ER_leak: float
    v_ER_rel: float
    v_SERCA: float


def ad_fluxes(Ca, Er, Ip3, R, p: ADParams) -> FluxSet:
    """All named fluxes of the four-pool model, in uM/s."""
    v_cce = p.k_CCE * p.H_CCE ** 2 / (p.H_CCE ** 2 + Er ** 2)
    atp14 = p.atp_ex ** 1.4
    v_ir = p.k_ATP_P2X * atp14 / (p.H_ATP_P2X + atp14) if p.atp_ex > 0 else 0.0
    v_plcb = p.k_ATP_P2Y * p.atp_ex / (p.K_D + p.atp_ex)
    v_out = p.k5 * Ca
    v_leak = p.k1 * (Er - Ca)
    v_rel = (p.k2 * R * Ca ** 2 * Ip3 ** 2
             / ((p.K_a ** 2 + Ca ** 2) * (p.K_IP3 ** 2 + Ip3 ** 2))
             * (Er - Ca))
    v_serca = p.k3 * Ca
    return FluxSet(v_cce, v_ir, v_plcb, v_out, v_leak, v_rel, v_serca)


def ip3r_recovery_rate(Ca, p: ADParams) -> float:
    return p.k6 * p.K_i ** 2 / (p.K_i + Ca ** 2)


def ad_rhs(state, p: ADParams, vg: VgccParams, inputs: CellInputs = QUIET):
    """Time derivative of the 11-component four-pool state."""
    Ca, Er, Ip3, R = state[:4]
    gates = state[4:]
    fx = ad_fluxes(Ca, Er, Ip3, R, p)
    _, j_vgcc = vgcc_flux(gates, inputs.membrane_voltage, Ca, vg)
    dCa = (j_vgcc + fx.v_CCE + fx.v_iR - fx.V_OUT
           + fx.v_ER_leak + fx.v_ER_rel - fx.v_SERCA)
    dEr = p.beta * (fx.v_SERCA - fx.v_ER_leak - fx.v_ER_rel)
    dR = ip3r_recovery_rate(Ca, p) - p.k6 * R
    dIp3 = inputs.j_prod_rate - p.k9 * Ip3 + inputs.ip3_diffusion_in
    dgates = gating_rhs(gates, inputs.membrane_voltage)
    return np.concatenate(([dCa, dEr, dIp3, dR], dgates))


def ad_rest_state(p: ADParams, vg: VgccParams, V: float = -70.0,
                  Ca=0.1, Er=1.5, Ip3=0.1, R=0.5):
    """Nominal resting state with gates at their voltage steady state."""
    gates, _, _ = gate_steady_states(V, Ca)
    return np.concatenate(([Ca, Er, Ip3, R], gates))


# --- integration ------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray            # shape (len(t), dim)
    clamp_events: list = field(default_factory=list)  # (t, component index)

    @property
    def ca(self):
        return self.states[:, 0]

    def to_csv(self, path, model: Model) -> None:
        if model is Model.HEALTHY:
            header = "t,Ca,Er,Ip3"
        else:
            header = "t,Ca,Er,Ip3,R," + ",".join(GATE_NAMES)
        data = np.column_stack([self.t, self.states])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def _rhs_for(model: Model, p, vg, inputs_fn, ip3_scale):
    if model is Model.HEALTHY:
        def rhs(t, y):
            return healthy_rhs(y, p, ip3_scale=ip3_scale)
    else:
        def rhs(t, y):
            return ad_rhs(y, p, vg, inputs_fn(t))
    return rhs


def integrate(model: Model, s0, p, t_span: float, dt: float,
              vg: Optional[VgccParams] = None,
              inputs: Optional[Callable[[float], CellInputs]] = None,
              ip3_scale: float = 1.0) -> Trajectory:
    """Fixed-step RK4 trajectory.

    Negative concentrations are clamped to zero after each accepted step
    and recorded; non-finite states abort with IntegrationDivergedError.
    `inputs` maps t to CellInputs for the four-pool model (default quiet).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if t_span < 0:
        raise ValueError("t_span must be >= 0")
    inputs_fn = inputs or (lambda t: QUIET)
    rhs = _rhs_for(model, p, vg or VgccParams(), inputs_fn, ip3_scale)

    n = int(round(t_span / dt))
    y = np.asarray(s0, dtype=float).copy()
    out = np.empty((n + 1, y.size))
    out[0] = y
    ts = np.arange(n + 1) * dt
    clamps = []
    # Pools clamped to >= 0; gate variables live in [0, 1] by construction.
    n_pools = HEALTHY_DIM if model is Model.HEALTHY else 4
    def clipped(v):
        # stage states can transiently dip negative at coarse dt; the
        # fractional-power fluxes are undefined there
        w = v.copy()
        np.maximum(w[:n_pools], 0.0, out=w[:n_pools])
        return w

    for i in range(n):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, clipped(y + dt / 2 * k1))
        k3 = rhs(t + dt / 2, clipped(y + dt / 2 * k2))
        k4 = rhs(t + dt, clipped(y + dt * k3))
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationDivergedError(float(ts[i + 1]))
        for c in range(n_pools):
            if y[c] < 0:
                y[c] = 0.0
                clamps.append((float(ts[i + 1]), c))
        out[i + 1] = y
    return Trajectory(ts, out, clamps)


# --- oscillation scanning ---------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    drive: float
    ca_min: float
    ca_max: float
    oscillating: bool


def _drive_inputs(model: Model, p, drive: float):
    if model is Model.HEALTHY:
        return None, drive
    rate = drive * p.mean_j_prod()
    inp = CellInputs(j_prod_rate=rate)
    return (lambda t: inp), 1.0


def scan_oscillations(model: Model, p, drives, t_span: float = 600.0,
                      dt: float = 0.01, vg: Optional[VgccParams] = None,
                      s0=None, transient_frac: float = 0.5,
                      amplitude_eps: float = 0.01):
    """Min/max cytosolic Ca per drive value, past a transient window.

    The drive multiplies the IP3 production pathway: the PLC flux for the
    healthy model, the mean stochastic production rate for the four-pool
    model.  A point oscillates when the post-transient peak-to-peak Ca
    amplitude exceeds amplitude_eps.
    """
    drives = list(drives)
    if not drives:
        raise ValueError("drive range is empty")
    if s0 is None:
        s0 = (HEALTHY_REST.copy() if model is Model.HEALTHY
              else ad_rest_state(p, vg or VgccParams()))
    points = []
    for drive in drives:
        inputs, scale = _drive_inputs(model, p, drive)
        traj = integrate(model, s0, p, t_span, dt, vg=vg,
                         inputs=inputs, ip3_scale=scale)
        start = int(transient_frac * len(traj.t))
        ca = traj.ca[start:]
        ca_min, ca_max = float(ca.min()), float(ca.max())
        points.append(ScanPoint(drive, ca_min, ca_max,
                                (ca_max - ca_min) > amplitude_eps))
    return points


def scan_to_csv(points, path) -> None:
    with open(path, "w") as fh:
        fh.write("drive,ca_min,ca_max,oscillating\n")
        for pt in points:
            fh.write(f"{pt.drive},{pt.ca_min},{pt.ca_max},{int(pt.oscillating)}\n")
