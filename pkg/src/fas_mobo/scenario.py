"""Random air-ground scene generation from a small set of physical parameters."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .config_space import SpaceSpec
from .dynamics import DynamicScene, FadingState, KinematicState, MobilityParams, jakes_rho, los_update, user_from_state
from .isac_physics import SPEED_OF_LIGHT, Clutter, Scene, Target, db_to_amplitude, dbm_to_watt


@dataclass(frozen=True)
class ScenarioParams:
    carrier_hz: float = 28e9
    bs_position: tuple[float, float, float] = (0.0, 0.0, 30.0)
    n_targets: int = 2
    n_clutter: int = 3
    n_paths: int = 4
    tx_power_dbm: float = 30.0
    noise_comm_dbm: float = -90.0
    noise_sense_dbm: float = -90.0
    si_atten_db: float = -100.0
    target_gain_db: float = -105.0
    clutter_gain_db: float = -115.0
    nlos_decay_db: float = 10.0
    user_range_m: tuple[float, float] = (40.0, 120.0)
    user_height_m: float = 1.5
    target_range_m: tuple[float, float] = (50.0, 150.0)
    target_altitude_m: tuple[float, float] = (50.0, 150.0)
    phase_bits: int = 3
    beam_elevation: float = -math.pi / 8
    slot_s: float = 0.5
    doppler_hz: float | None = None  # None: user_v_max / wavelength
    rho_theta: float = 0.9
    var_theta: float = 1e-4
    user_v_max: float = 15.0
    target_v_max: float = 10.0
    accel_bound: float = 2.0

    def __post_init__(self):
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.n_paths < 1:
            raise ValueError("each user needs at least the LoS path")
        if min(self.n_targets, self.n_clutter) < 0:
            raise ValueError("target and clutter counts must be nonnegative")
        if self.slot_s <= 0:
            raise ValueError("slot_s must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioParams":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise KeyError(unknown[0])
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kwargs)


def _ring_point(rng, radius_range, height) -> np.ndarray:
    r = rng.uniform(*radius_range)
    az = rng.uniform(-math.pi, math.pi)
    return np.array([r * math.cos(az), r * math.sin(az), height])


def _random_heading(rng, speed: float, planar: bool) -> np.ndarray:
    d = rng.standard_normal(3)
    if planar:
        d[2] = 0.0
    return d / np.linalg.norm(d) * speed


def random_dynamic_scene(space: SpaceSpec, params: ScenarioParams, rng: np.random.Generator) -> DynamicScene:
    lam = params.wavelength
    bs = np.asarray(params.bs_position, dtype=float)
    doppler = params.user_v_max / lam if params.doppler_hz is None else params.doppler_hz
    rho_g = jakes_rho(doppler, params.slot_s)

    user_states, fading = [], []
    for _ in range(space.n_users):
        pos = _ring_point(rng, params.user_range_m, params.user_height_m)
        vel = _random_heading(rng, rng.uniform(0.5, 1.0) * params.user_v_max, planar=True)
        user_states.append(KinematicState(pos, vel))
        los_power = abs(los_update(pos, bs, lam).gain) ** 2
        n_nlos = params.n_paths - 1
        var_g = los_power * 10 ** (-params.nlos_decay_db / 10)
        gains = (rng.standard_normal(n_nlos) + 1j * rng.standard_normal(n_nlos)) * math.sqrt(var_g / 2)
        mean_el = rng.uniform(-math.pi / 3, 0.0, n_nlos)
        mean_az = rng.uniform(-math.pi, math.pi, n_nlos)
        fading.append(FadingState(gains, mean_el, mean_az, mean_el, mean_az, rho_g, params.rho_theta, var_g, params.var_theta))

    users = tuple(user_from_state(s, f, bs, lam) for s, f in zip(user_states, fading))

    target_states, targets = [], []
    amp = db_to_amplitude(params.target_gain_db)
    for _ in range(params.n_targets):
        pos = _ring_point(rng, params.target_range_m, rng.uniform(*params.target_altitude_m))
        vel = _random_heading(rng, rng.uniform(0.5, 1.0) * params.target_v_max, planar=False)
        target_states.append(KinematicState(pos, vel))
        los = los_update(pos, bs, lam)
        alpha = amp * complex(np.exp(-4j * math.pi * los.distance / lam))
        targets.append(Target(pos, alpha, los.elevation, los.azimuth))

    clutter_amp = db_to_amplitude(params.clutter_gain_db)
    clutter = tuple(
        Clutter(
            clutter_amp * complex(np.exp(2j * math.pi * rng.random())),
            rng.uniform(-math.pi / 4, -math.pi / 16),
            rng.uniform(-math.pi, math.pi),
        )
        for _ in range(params.n_clutter)
    )

    scene = Scene(
        users=users,
        targets=tuple(targets),
        clutter=clutter,
        noise_comm=dbm_to_watt(params.noise_comm_dbm),
        noise_sense=dbm_to_watt(params.noise_sense_dbm),
        si_atten=db_to_amplitude(params.si_atten_db),
        tx_power=dbm_to_watt(params.tx_power_dbm),
        wavelength=lam,
        bs_position=bs,
        phase_bits=params.phase_bits,
        beam_elevation=params.beam_elevation,
    )
    mobility = MobilityParams(params.user_v_max, params.target_v_max, params.accel_bound, True)
    return DynamicScene(scene, tuple(user_states), tuple(target_states), tuple(fading), params.slot_s, doppler, mobility)


def random_scene(space: SpaceSpec, params: ScenarioParams, rng: np.random.Generator) -> Scene:
    return random_dynamic_scene(space, params, rng).scene


def frozen(ds: DynamicScene) -> DynamicScene:
    """Same scene with every entity at rest and fading frozen."""
    from dataclasses import replace

    return replace(
        ds,
        users=tuple(KinematicState(s.position, np.zeros(3)) for s in ds.users),
        targets=tuple(KinematicState(s.position, np.zeros(3)) for s in ds.targets),
        fading=tuple(replace(f, rho_g=1.0, rho_theta=1.0) for f in ds.fading),
        mobility=MobilityParams(ds.mobility.user_v_max, ds.mobility.target_v_max, 0.0, ds.mobility.users_planar),
    )
