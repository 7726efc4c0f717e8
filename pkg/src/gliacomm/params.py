"""Model parameters, scenario presets and config loading.

All concentrations are in uM, time in s, voltage in mV and volumes in
litres internally.  Config files may give the cell volume in um^3; it is
converted at the boundary.  Every constant used by any rate equation in
the package resolves to exactly one field defined here.
"""

from __future__ import annotations

import copy
import dataclasses
import enum
import os
from dataclasses import dataclass, field
from typing import Union

import yaml

UM3_TO_LITRE = 1e-15

# Cell volumes (um^3): atrophied volume under beta-amyloid influence.
HEALTHY_VOLUME_UM3 = 19.635
AD_VOLUME_UM3 = 11.027

SEED_ENV_VAR = "GLIACOMM_SEED"


class ConfigError(ValueError):
    """Malformed or out-of-range configuration; message names the key."""


class Scenario(enum.Enum):
    HEALTHY = "healthy"
    ALZHEIMER = "alzheimer"


@dataclass(frozen=True)
class HealthyParams:
    """Constants of the healthy three-pool model.

    Defaults follow the Lavrentovich & Hemkin spontaneous-oscillation
    parameter set; they are config defaults, not measured values.
    """

    sigma0: float = 0.05        # uM/s, influx from extracellular space
    kappa_o: float = 0.5        # 1/s, efflux rate
    kappa_f: float = 0.5        # 1/s, ER leak rate
    kappa_d: float = 0.08       # 1/s, IP3 degradation rate
    Sigma_M3: float = 40.0      # 1/s, max CICR rate (multiplies Er-Ca)
    kappa_C1: float = 0.15      # uM, CICR activation constant
    kappa_C2: float = 0.15      # uM, CICR inhibition constant
    kappa_I: float = 0.1        # uM, IP3 half-saturation for CICR
    Sigma_M2: float = 15.0      # uM/s, max SERCA flux
    kappa_2: float = 0.1        # uM, SERCA half-saturation
    Sigma_p: float = 0.05       # uM/s, max PLC-driven IP3 production
    kappa_p: float = 0.3        # uM, PLC half-saturation
    hill_n: float = 2.02
    hill_m: float = 2.2
    hill_p: float = 2.0

    def validate(self) -> None:
        for key in ("sigma0", "kappa_o", "kappa_f", "kappa_d", "Sigma_M3",
                    "Sigma_M2", "Sigma_p", "kappa_I", "kappa_2", "kappa_p"):
            if getattr(self, key) < 0:
                raise ConfigError(f"healthy.{key} must be >= 0")
        for key in ("hill_n", "hill_m", "hill_p"):
            if getattr(self, key) < 1:
                raise ConfigError(f"healthy.{key} must be >= 1")
        if self.kappa_C1 == 0 or self.kappa_C2 == 0:
            raise ConfigError("healthy.kappa_C1 and healthy.kappa_C2 must be nonzero")


@dataclass(frozen=True)
class ADParams:
    """Constants of the four-pool model (normal or beta-amyloid column).

    v7 and K_Ca are carried as documented but inert fields: no implemented
    rate equation uses them.
    """

    k1: float       # 1/s, ER leak
    k2: float       # 1/s, IP3R release
    k3: float       # 1/s, SERCA pumping
    k5: float       # 1/s, plasma-membrane extrusion
    k6: float       # 1/s, IP3R inactivation/recovery
    k9: float       # 1/s, IP3 degradation
    K_IP3: float    # uM, IP3 half-saturation of IP3R
    K_a: float      # uM, Ca half-saturation of IP3R activation
    K_i: float      # uM, Ca half-saturation of IP3R recovery
    beta: float     # ER/cytosol volume scaling
    H_CCE: float    # uM, CCE half-inactivation
    k_CCE: float    # uM/s, max CCE influx
    k_ATP_P2X: float   # uM/s, max ionotropic influx
    H_ATP_P2X: float   # uM, ionotropic half-saturation
    k_ATP_P2Y: float   # uM/s, max metabotropic IP3 production
    K_D: float         # uM, metabotropic dissociation constant
    atp_ex: float = 1.0       # uM, extracellular ATP
    O_beta: float = 0.15      # uM/s, max synaptically-evoked IP3 production
    O_delta: float = 0.15     # uM/s, max spontaneous IP3 production
    t_k_mean: float = 0.3     # s, mean inter-event time, synaptic stream
    v_n_mean: float = 30.0    # s, mean inter-event time, spontaneous stream
    F_max: float = 3.64       # 1/s, max IP3 gap flow
    I_theta: float = 0.15     # uM, IP3 gradient threshold
    omega_I: float = 0.05     # uM, IP3 gradient slope
    v7: float = 0.02          # uM/s, unhoused symbol (inert)
    K_Ca: float = 0.3         # uM, unhoused symbol (inert)

    def validate(self) -> None:
        for key in ("k1", "k2", "k3", "k5", "k6", "k9", "K_IP3", "K_a", "K_i",
                    "t_k_mean", "v_n_mean", "omega_I"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"ad.{key} must be > 0")
        for key in ("beta", "H_CCE", "k_CCE", "k_ATP_P2X", "H_ATP_P2X",
                    "k_ATP_P2Y", "K_D", "atp_ex", "O_beta", "O_delta",
                    "F_max", "I_theta"):
            if getattr(self, key) < 0:
                raise ConfigError(f"ad.{key} must be >= 0")

    def mean_j_prod(self) -> float:
        """Mean rate (uM/s) of the stochastic IP3 production impulses."""
        return 0.5 * self.O_beta / self.t_k_mean + 0.5 * self.O_delta / self.v_n_mean


@dataclass(frozen=True)
class VgccParams:
    """Voltage-gated Ca channel constants (conductances in pS)."""

    g_T: float = 0.06
    g_L: float = 3.5
    g_N: float = 0.39
    g_R: float = 0.2225
    z: float = 2.0
    temperature: float = 300.0        # K
    gas_constant: float = 8.31        # J/(mol K)
    faraday: float = 96485.0          # C/mol
    V_ast: float = 5.223e-13          # litres
    ca_out: float = 1500.0            # uM, extracellular Ca for Nernst potential

    def validate(self) -> None:
        for key in ("g_T", "g_L", "g_N", "g_R"):
            if getattr(self, key) < 0:
                raise ConfigError(f"vgcc.{key} must be >= 0")
        if self.V_ast <= 0:
            raise ConfigError("vgcc.V_ast must be > 0")
        if self.temperature <= 0:
            raise ConfigError("vgcc.temperature must be > 0")


@dataclass(frozen=True)
class GapJunctionParams:
    """Two-gate voltage-sensitive gap junction constants.

    Numeric defaults are taken from the connexin gating literature, not
    from any single measured junction; override per experiment.
    """

    lam: float = 0.1          # 1/s, common rate at the reference voltage
    A_alpha: float = 0.077    # 1/mV, opening-rate voltage sensitivity
    A_beta: float = 0.14      # 1/mV, closing-rate voltage sensitivity
    v0: float = 30.0          # mV, reference junctional voltage

    def validate(self) -> None:
        if self.lam <= 0:
            raise ConfigError("gap_junction.lam must be > 0")


@dataclass(frozen=True)
class RegularDegree:
    n: int = 6


@dataclass(frozen=True)
class LinkRadius:
    d: float = 3.0
    n_max: int = 6


@dataclass(frozen=True)
class Shortcut:
    a: int = 5
    n: int = 4


@dataclass(frozen=True)
class ErdosRenyi:
    p: float = 0.2


TopologySpec = Union[RegularDegree, LinkRadius, Shortcut, ErdosRenyi]

_TOPOLOGY_KINDS = {
    "regular_degree": RegularDegree,
    "link_radius": LinkRadius,
    "shortcut": Shortcut,
    "erdos_renyi": ErdosRenyi,
}


def topology_kind(spec: TopologySpec) -> str:
    for name, cls in _TOPOLOGY_KINDS.items():
        if isinstance(spec, cls):
            return name
    raise TypeError(f"unknown topology spec {spec!r}")


class StimulusKind(enum.Enum):
    BURST = "burst"
    SINE = "sine"
    SQUARE = "square"


@dataclass(frozen=True)
class StimulusSpec:
    kind: StimulusKind = StimulusKind.BURST
    frequency_hz: float = 0.5
    amplitude: float = 10.0   # uM/s source rate at the transmitter
    duration: float = 4.0     # s
    start: float = 1.0        # s

    def validate(self) -> None:
        if self.frequency_hz < 0:
            raise ConfigError("stimulus.frequency_hz must be >= 0")
        if self.duration <= 0:
            raise ConfigError("stimulus.duration must be > 0")
        if self.start < 0:
            raise ConfigError("stimulus.start must be >= 0")
        if self.amplitude < 0:
            raise ConfigError("stimulus.amplitude must be >= 0")


@dataclass(frozen=True)
class EngineParams:
    """Engine-level knobs not tied to any biochemical constant."""

    diffusion_coefficient: float = 1.0e-13  # litre/s; edge rate is D / cell volume
    sub_dt: float = 1e-3          # s, deterministic sub-step cadence
    settle_time: float = 50.0     # s, deterministic pre-equilibration
    snapshot_interval: float = 0.1  # s
    membrane_voltage: float = -70.0  # mV, constant V(t) driving the VGCCs
    junctional_voltage: float = 0.0  # mV, gap junction v_j
    gj_weights: tuple = (1.0, 0.5, 0.5)  # conductance weights for HH, HL, LH
    record_events: bool = True

    def validate(self) -> None:
        if self.diffusion_coefficient < 0:
            raise ConfigError("engine.diffusion_coefficient must be >= 0")
        if self.sub_dt <= 0:
            raise ConfigError("engine.sub_dt must be > 0")
        if self.settle_time < 0:
            raise ConfigError("engine.settle_time must be >= 0")
        if len(self.gj_weights) != 3 or any(w < 0 for w in self.gj_weights):
            raise ConfigError("engine.gj_weights must be three non-negative numbers")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = Scenario.HEALTHY
    lattice_dims: tuple = (7, 7, 7)
    topology_spec: TopologySpec = field(default_factory=RegularDegree)
    cell_volume: float = HEALTHY_VOLUME_UM3 * UM3_TO_LITRE  # litres
    transmitter_cell: tuple = (3, 3, 3)
    receiver_cell: tuple = (6, 3, 3)
    stimulus: StimulusSpec = field(default_factory=StimulusSpec)
    sim_time_max: float = 10.0
    rng_seed: int = 0
    delta_quantum: float = 0.01   # uM per reaction firing
    activation_threshold: float = 0.05  # uM above baseline
    gain_window: float = 4.0      # s
    healthy: HealthyParams = field(default_factory=HealthyParams)
    ad: ADParams = field(default_factory=lambda: preset_ad(Scenario.ALZHEIMER))
    vgcc: VgccParams = field(default_factory=VgccParams)
    gap_junction: GapJunctionParams = field(default_factory=GapJunctionParams)
    engine: EngineParams = field(default_factory=EngineParams)

    def validate(self) -> None:
        I, J, K = self.lattice_dims
        if I < 1 or J < 1 or K < 1 or I * J * K < 2:
            raise ConfigError("lattice dims must be positive with at least 2 cells")
        for name, cell in (("transmitter", self.transmitter_cell),
                           ("receiver", self.receiver_cell)):
            i, j, k = cell
            if not (0 <= i < I and 0 <= j < J and 0 <= k < K):
                raise ConfigError(f"{name} {cell} outside lattice {self.lattice_dims}")
        if self.transmitter_cell == self.receiver_cell:
            raise ConfigError("transmitter must differ from receiver")
        if self.delta_quantum <= 0:
            raise ConfigError("delta_quantum must be > 0")
        if self.sim_time_max < 0:
            raise ConfigError("sim_time_max must be >= 0")
        if self.cell_volume <= 0:
            raise ConfigError("cell_volume must be > 0")
        if self.gain_window <= 0:
            raise ConfigError("gain_window must be > 0")
        if self.activation_threshold <= 0:
            raise ConfigError("activation_threshold must be > 0")
        self.stimulus.validate()
        self.healthy.validate()
        self.ad.validate()
        self.vgcc.validate()
        self.gap_junction.validate()
        self.engine.validate()
        _validate_topology(self.topology_spec)


def _validate_topology(spec: TopologySpec) -> None:
    if isinstance(spec, RegularDegree):
        if not 1 <= spec.n <= 6:
            raise ConfigError("topology.n must be in [1, 6]")
    elif isinstance(spec, LinkRadius):
        if spec.d <= 0:
            raise ConfigError("topology.d must be > 0")
        if not 0 <= spec.n_max <= 6:
            raise ConfigError("topology.n_max must be in [0, 6]")
    elif isinstance(spec, Shortcut):
        if spec.a < 1:
            raise ConfigError("topology.a must be >= 1")
        if not 1 <= spec.n <= 6:
            raise ConfigError("topology.n must be in [1, 6]")
    elif isinstance(spec, ErdosRenyi):
        if not 0.0 <= spec.p <= 1.0:
            raise ConfigError("topology.p must be in [0, 1]")
    else:
        raise ConfigError(f"unknown topology spec {spec!r}")


# --- Table II presets -------------------------------------------------------

# Column shared by both scenarios.
_AD_COMMON = dict(
    k_ATP_P2Y=0.5,
    atp_ex=1.0,
    O_beta=0.15, O_delta=0.15,
    t_k_mean=0.3, v_n_mean=30.0,
    F_max=3.64, I_theta=0.15, omega_I=0.05,
)

_NORMAL_COLUMN = dict(
    k1=0.0004, k2=0.2, k3=0.5, k5=0.5, k6=4.0, k9=0.08,
    K_IP3=0.3, K_a=0.2, K_i=0.2, beta=35.0,
    H_CCE=10.0, k_CCE=0.01, k_ATP_P2X=0.08, H_ATP_P2X=0.09, K_D=10.0,
    v7=0.02, K_Ca=0.3,
)

# k_ATP_P2X has no published Alzheimer value; the normal value is kept as a
# conservative, overridable default.
_ALZHEIMER_COLUMN = dict(
    k1=0.1, k2=1.5, k3=0.1, k5=0.05, k6=0.5, k9=0.5,
    K_IP3=0.5, K_a=2.02, K_i=0.15, beta=0.1,
    H_CCE=40.0, k_CCE=2.2, k_ATP_P2X=0.08, H_ATP_P2X=0.15, K_D=0.8,
    v7=15.0, K_Ca=0.15,
)

# Keys whose two table columns actually differ.
TWO_COLUMN_KEYS = frozenset(
    k for k in _NORMAL_COLUMN if _NORMAL_COLUMN[k] != _ALZHEIMER_COLUMN[k]
)


def preset_ad(scenario: Scenario) -> ADParams:
    column = _NORMAL_COLUMN if scenario is Scenario.HEALTHY else _ALZHEIMER_COLUMN
    return ADParams(**column, **_AD_COMMON)


def preset(scenario: Scenario):
    """Full parameter preset for a scenario.

    Returns (cell model params, VGCC params, gap junction params); the cell
    model params are HealthyParams for the healthy scenario and ADParams
    for the Alzheimer one.
    """
    if scenario is Scenario.HEALTHY:
        cell = HealthyParams()
    else:
        cell = preset_ad(Scenario.ALZHEIMER)
    return cell, VgccParams(), GapJunctionParams()


def default_volume(scenario: Scenario) -> float:
    """Scenario cell volume in litres (atrophied under AD)."""
    um3 = HEALTHY_VOLUME_UM3 if scenario is Scenario.HEALTHY else AD_VOLUME_UM3
    return um3 * UM3_TO_LITRE


# --- config file I/O --------------------------------------------------------

def _build(cls, data, prefix):
    """Instantiate a params dataclass from a config mapping, with key checks."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {prefix}.{key}")
    return data


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = copy.deepcopy(raw)

    try:
        scenario = Scenario(str(raw.pop("scenario", "healthy")).lower())
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None

    lattice = raw.pop("lattice", {"i": 7, "j": 7, "k": 7})
    try:
        dims = (int(lattice["i"]), int(lattice["j"]), int(lattice["k"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"lattice must give i, j, k ({exc})") from None

    topo_raw = raw.pop("topology", {"kind": "regular_degree"})
    kind = topo_raw.pop("kind", None)
    if kind not in _TOPOLOGY_KINDS:
        raise ConfigError(f"topology.kind must be one of {sorted(_TOPOLOGY_KINDS)}")
    topo_cls = _TOPOLOGY_KINDS[kind]
    topo = topo_cls(**_build(topo_cls, topo_raw, "topology"))

    volume_um3 = raw.pop("cell_volume_um3", None)
    if volume_um3 is None:
        volume = default_volume(scenario)
    else:
        volume = float(volume_um3) * UM3_TO_LITRE

    stim_raw = raw.pop("stimulus", {})
    if "kind" in stim_raw:
        try:
            stim_raw["kind"] = StimulusKind(str(stim_raw["kind"]).lower())
        except ValueError:
            raise ConfigError("stimulus.kind must be burst, sine or square") from None
    stimulus = StimulusSpec(**_build(StimulusSpec, stim_raw, "stimulus"))

    ad_raw = _build(ADParams, raw.pop("ad", {}), "ad")
    ad = dataclasses.replace(preset_ad(scenario), **ad_raw)

    engine_raw = _build(EngineParams, raw.pop("engine", {}), "engine")
    if "gj_weights" in engine_raw:
        engine_raw["gj_weights"] = tuple(engine_raw["gj_weights"])

    seed = raw.pop("rng_seed", 0)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from None

    cfg = ScenarioConfig(
        scenario=scenario,
        lattice_dims=dims,
        topology_spec=topo,
        cell_volume=volume,
        transmitter_cell=tuple(raw.pop("transmitter", (0, 0, 0))),
        receiver_cell=tuple(raw.pop("receiver", (dims[0] - 1, 0, 0))),
        stimulus=stimulus,
        sim_time_max=float(raw.pop("sim_time_max", 10.0)),
        rng_seed=int(seed),
        delta_quantum=float(raw.pop("delta_quantum", 0.01)),
        activation_threshold=float(raw.pop("activation_threshold", 0.05)),
        gain_window=float(raw.pop("gain_window", 4.0)),
        healthy=HealthyParams(**_build(HealthyParams, raw.pop("healthy", {}), "healthy")),
        ad=ad,
        vgcc=VgccParams(**_build(VgccParams, raw.pop("vgcc", {}), "vgcc")),
        gap_junction=GapJunctionParams(
            **_build(GapJunctionParams, raw.pop("gap_junction", {}), "gap_junction")),
        engine=EngineParams(**engine_raw),
    )
    for key in raw:
        raise ConfigError(f"unknown key {key}")
    cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    """Load and validate a YAML scenario config."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Serialize a config so that config_from_dict round-trips it."""
    out = {
        "scenario": cfg.scenario.value,
        "lattice": {"i": cfg.lattice_dims[0], "j": cfg.lattice_dims[1],
                    "k": cfg.lattice_dims[2]},
        "topology": {"kind": topology_kind(cfg.topology_spec),
                     **dataclasses.asdict(cfg.topology_spec)},
        "cell_volume_um3": cfg.cell_volume / UM3_TO_LITRE,
        "transmitter": list(cfg.transmitter_cell),
        "receiver": list(cfg.receiver_cell),
        "stimulus": {**dataclasses.asdict(cfg.stimulus),
                     "kind": cfg.stimulus.kind.value},
        "sim_time_max": cfg.sim_time_max,
        "rng_seed": cfg.rng_seed,
        "delta_quantum": cfg.delta_quantum,
        "activation_threshold": cfg.activation_threshold,
        "gain_window": cfg.gain_window,
        "healthy": dataclasses.asdict(cfg.healthy),
        "ad": dataclasses.asdict(cfg.ad),
        "vgcc": dataclasses.asdict(cfg.vgcc),
        "gap_junction": dataclasses.asdict(cfg.gap_junction),
        "engine": {**dataclasses.asdict(cfg.engine),
                   "gj_weights": list(cfg.engine.gj_weights)},
    }
    return out


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
