"""Slot-by-slot scene evolution: kinematics, geometric LoS, AR fading of NLoS paths."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ZeroRangeError
from .isac_physics import PathSet, Scene, Target, User

# Below this argument the power series of J0 is summed directly; above it the
# Hankel asymptotic expansion is accurate to better than 1e-10.
_J0_SERIES_LIMIT = 12.0


def _j0_series(x: np.ndarray) -> np.ndarray:
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = term * q / (k * k)
        total = total + term
    return total


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    inv8x = 1.0 / (8.0 * x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    # Hankel coefficients at order zero: a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k).
    a = 1.0
    last = np.full_like(x, np.inf)
    for k in range(1, 40):
        a *= -((2 * k - 1) ** 2) / k
        term = a * inv8x**k
        # The expansion is asymptotic: stop once terms stop shrinking.
        live = np.abs(term) < last
        if not np.any(live) or np.all(np.abs(term) < 1e-18):
            break
        term = np.where(live, term, 0.0)
        last = np.where(live, np.abs(term), 0.0)
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            p = p + sign * term
        else:
            q = q + sign * term
    chi = x - math.pi / 4
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind."""
    arr = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(arr)
    small = arr <= _J0_SERIES_LIMIT
    out[small] = _j0_series(arr[small])
    if np.any(~small):
        out[~small] = _j0_asymptotic(arr[~small])
    return out if out.ndim else float(out)


def jakes_rho(doppler_hz: float, slot_s: float) -> float:
    if doppler_hz < 0 or slot_s <= 0:
        raise ValueError("need doppler >= 0 and slot duration > 0")
    return float(bessel_j0(2 * math.pi * doppler_hz * slot_s))


# -- kinematics -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KinematicState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


def _clip_speed(v: np.ndarray, v_max: float) -> np.ndarray:
    speed = float(np.linalg.norm(v))
    return v * (v_max / speed) if speed > v_max else v


def step_kinematics(
    state: KinematicState,
    slot_s: float,
    accel_bound: float,
    rng: np.random.Generator,
    v_max: float = math.inf,
    planar: bool = False,
) -> KinematicState:
    """Advance position with the current velocity, then perturb the velocity.

    The perturbation is uniform in the ball of radius ``accel_bound * slot_s``
    (a disc in the x-y plane when ``planar``).
    """
    if slot_s <= 0:
        raise ValueError("slot duration must be positive")
    position = state.position + state.velocity * slot_s
    dims = 2 if planar else 3
    radius = accel_bound * slot_s
    direction = rng.standard_normal(dims)
    norm = np.linalg.norm(direction)
    kick = np.zeros(3)
    if radius > 0 and norm > 0:
        kick[:dims] = direction / norm * radius * rng.random() ** (1.0 / dims)
    return KinematicState(position, _clip_speed(state.velocity + kick, v_max))


class LosParams(tuple):
    __slots__ = ()

    def __new__(cls, gain: complex, elevation: float, azimuth: float, distance: float):
        return super().__new__(cls, (gain, elevation, azimuth, distance))

    gain = property(lambda s: s[0])
    elevation = property(lambda s: s[1])
    azimuth = property(lambda s: s[2])
    distance = property(lambda s: s[3])


def los_update(entity_position, bs_position, wavelength: float) -> LosParams:
    """Free-space gain (lambda / 4 pi r) exp(-j 2 pi r / lambda) and BS-frame angles."""
    delta = np.asarray(entity_position, dtype=float) - np.asarray(bs_position, dtype=float)
    r = float(np.linalg.norm(delta))
    if r == 0.0:
        raise ZeroRangeError("entity coincides with the base station")
    gain = wavelength / (4 * math.pi * r) * complex(np.exp(-2j * math.pi * r / wavelength))
    elevation = math.asin(max(-1.0, min(1.0, delta[2] / r)))
    azimuth = math.atan2(delta[1], delta[0])
    return LosParams(gain, elevation, azimuth, r)


# -- fading ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FadingState:
    """NLoS paths of one entity. Angles follow an AR(1) around their mean direction."""

    gains: np.ndarray
    elevations: np.ndarray
    azimuths: np.ndarray
    mean_elevations: np.ndarray
    mean_azimuths: np.ndarray
    rho_g: float
    rho_theta: float
    var_g: float
    var_theta: float = 1e-4

    def __post_init__(self):
        if abs(self.rho_g) > 1 or not 0 <= self.rho_theta <= 1:
            raise ValueError("need |rho_g| <= 1 and rho_theta in [0, 1]")
        for name in ("gains", "elevations", "azimuths", "mean_elevations", "mean_azimuths"):
            dtype = complex if name == "gains" else float
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype).ravel())


def ar_step(fading: FadingState, rng: np.random.Generator) -> FadingState:
    n = len(fading.gains)
    cn = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(fading.var_g / 2)
    gains = fading.rho_g * fading.gains + math.sqrt(max(0.0, 1 - abs(fading.rho_g) ** 2)) * cn
    a = math.sqrt(max(0.0, 1 - fading.rho_theta**2))
    sd = math.sqrt(fading.var_theta)
    dev_el = fading.elevations - fading.mean_elevations
    dev_az = fading.azimuths - fading.mean_azimuths
    el = fading.mean_elevations + fading.rho_theta * dev_el + a * sd * rng.standard_normal(n)
    az = fading.mean_azimuths + fading.rho_theta * dev_az + a * sd * rng.standard_normal(n)
    return replace(fading, gains=gains, elevations=el, azimuths=az)


# -- scene -----------------------------------------------------------------------


@dataclass(frozen=True)
class MobilityParams:
    user_v_max: float = 15.0
    target_v_max: float = 10.0
    accel_bound: float = 2.0
    users_planar: bool = True


@dataclass(frozen=True, eq=False)
class DynamicScene:
    scene: Scene
    users: tuple[KinematicState, ...]
    targets: tuple[KinematicState, ...]
    fading: tuple[FadingState, ...]  # one per user
    slot_s: float
    doppler_hz: float
    mobility: MobilityParams = MobilityParams()
    slot: int = 0

    def __post_init__(self):
        if self.slot_s <= 0:
            raise ValueError("slot duration must be positive")
        if len(self.users) != self.scene.n_users or len(self.targets) != len(self.scene.targets):
            raise ValueError("kinematic states must match the scene's users and targets")
        if len(self.fading) != len(self.users):
            raise ValueError("need one fading state per user")

    @property
    def n_entities(self) -> int:
        return len(self.users) + len(self.targets)


def user_from_state(state: KinematicState, fading: FadingState, bs_position, wavelength: float) -> User:
    los = los_update(state.position, bs_position, wavelength)
    return User(
        position=state.position,
        paths=PathSet(
            gains=np.concatenate([[los.gain], fading.gains]),
            elevations=np.concatenate([[los.elevation], fading.elevations]),
            azimuths=np.concatenate([[los.azimuth], fading.azimuths]),
        ),
    )


def advance_scene(ds: DynamicScene, rng: np.random.Generator) -> DynamicScene:
    """One slot forward: move entities, recompute LoS, AR-step fading, re-aim targets."""
    sc = ds.scene
    mob = ds.mobility
    lam = sc.wavelength
    users = tuple(
        step_kinematics(s, ds.slot_s, mob.accel_bound, rng, mob.user_v_max, mob.users_planar) for s in ds.users
    )
    targets = tuple(step_kinematics(s, ds.slot_s, mob.accel_bound, rng, mob.target_v_max) for s in ds.targets)
    fading = tuple(ar_step(f, rng) for f in ds.fading)

    new_users = tuple(user_from_state(s, f, sc.bs_position, lam) for s, f in zip(users, fading))
    new_targets = []
    for old, state in zip(sc.targets, targets):
        r_old = float(np.linalg.norm(old.position - sc.bs_position))
        los = los_update(state.position, sc.bs_position, lam)
        # Two-way range change rotates the echo phase; magnitude is held fixed.
        alpha = old.alpha * complex(np.exp(-4j * math.pi * (los.distance - r_old) / lam))
        new_targets.append(Target(state.position, alpha, los.elevation, los.azimuth))
    scene = replace(sc, users=new_users, targets=tuple(new_targets))
    return replace(ds, scene=scene, users=users, targets=targets, fading=fading, slot=ds.slot + 1)


def trajectory_record(ds: DynamicScene) -> dict:
    """JSON-ready snapshot of one slot for trajectory logs."""
    return {
        "slot": ds.slot,
        "users": [{"position": s.position.tolist(), "velocity": s.velocity.tolist()} for s in ds.users],
        "targets": [{"position": s.position.tolist(), "velocity": s.velocity.tolist()} for s in ds.targets],
        "scene": ds.scene.to_dict(),
    }
