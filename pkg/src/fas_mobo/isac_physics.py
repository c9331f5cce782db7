"""Ground-truth FAS-ISAC simulator and the grey-box split f = g(h(z)).

Two routes compute the latent constituents:

* :func:`latent_constituents` builds every channel matrix explicitly for one
  configuration, following the signal model term by term;
* :func:`latent_batch` evaluates stacks of encoded configurations with
  precomputed per-port steering tables (used by exhaustive search).

Both are checked against each other in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .config_space import Configuration, SpaceSpec, orientation_angles, port_cells
from .errors import CovarianceDegenerateError, PhysicsError, ZeroDistanceError

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


def unit_direction(elevation, azimuth) -> np.ndarray:
    """Unit vector(s) for elevation above the x-y plane and azimuth from +x."""
    el = np.asarray(elevation, dtype=float)
    az = np.asarray(azimuth, dtype=float)
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def rotation_matrix(elevation: float, azimuth: float) -> np.ndarray:
    """Tilt about the local y axis, then spin about z. (0, 0) is the identity."""
    ce, se = math.cos(elevation), math.sin(elevation)
    ca, sa = math.cos(azimuth), math.sin(azimuth)
    tilt = np.array([[ce, 0.0, se], [0.0, 1.0, 0.0], [-se, 0.0, ce]])
    spin = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    return spin @ tilt


# -- scene --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathSet:
    gains: np.ndarray  # complex, (L,)
    elevations: np.ndarray
    azimuths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex).ravel())
        object.__setattr__(self, "elevations", np.asarray(self.elevations, dtype=float).ravel())
        object.__setattr__(self, "azimuths", np.asarray(self.azimuths, dtype=float).ravel())
        if not len(self.gains) == len(self.elevations) == len(self.azimuths) >= 1:
            raise ValueError("a path set needs >= 1 path with matching gain/angle lengths")


@dataclass(frozen=True, eq=False)
class User:
    position: np.ndarray
    paths: PathSet


@dataclass(frozen=True, eq=False)
class Target:
    position: np.ndarray
    alpha: complex
    elevation: float
    azimuth: float


@dataclass(frozen=True, eq=False)
class Clutter:
    gain: complex
    elevation: float
    azimuth: float


@dataclass(frozen=True, eq=False)
class Scene:
    """Physical ground truth. Powers in watts, lengths in meters, angles in radians."""

    users: tuple[User, ...]
    targets: tuple[Target, ...]
    clutter: tuple[Clutter, ...]
    noise_comm: float
    noise_sense: float
    si_atten: float  # linear amplitude factor
    tx_power: float
    wavelength: float
    bs_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 30.0]))
    phase_bits: int = 3
    beam_elevation: float = -math.pi / 8

    def __post_init__(self):
        if self.noise_comm <= 0 or self.noise_sense <= 0:
            raise ValueError("noise powers must be positive")
        if self.si_atten < 0:
            raise ValueError("si_atten must be nonnegative")
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "clutter", tuple(self.clutter))
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float))

    @property
    def n_users(self) -> int:
        return len(self.users)

    def with_tx_power(self, watts: float) -> "Scene":
        return replace(self, tx_power=float(watts))

    def to_dict(self) -> dict:
        return scene_to_dict(self)


def _cpx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _from_cpx(pair) -> complex:
    return complex(float(pair[0]), float(pair[1]))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "wavelength_m": scene.wavelength,
        "bs_position": scene.bs_position.tolist(),
        "tx_power_dbm": watt_to_dbm(scene.tx_power),
        "noise_comm_dbm": watt_to_dbm(scene.noise_comm),
        "noise_sense_dbm": watt_to_dbm(scene.noise_sense),
        "si_atten_db": 20 * math.log10(scene.si_atten) if scene.si_atten > 0 else None,
        "phase_bits": scene.phase_bits,
        "beam_elevation": scene.beam_elevation,
        "users": [
            {
                "position": u.position.tolist(),
                "paths": [
                    {"gain": _cpx(g), "elevation": float(e), "azimuth": float(a)}
                    for g, e, a in zip(u.paths.gains, u.paths.elevations, u.paths.azimuths)
                ],
            }
            for u in scene.users
        ],
        "targets": [
            {
                "position": t.position.tolist(),
                "alpha": _cpx(t.alpha),
                "elevation": t.elevation,
                "azimuth": t.azimuth,
            }
            for t in scene.targets
        ],
        "clutter": [{"gain": _cpx(c.gain), "elevation": c.elevation, "azimuth": c.azimuth} for c in scene.clutter],
    }


def scene_from_dict(data: dict) -> Scene:
    si_db = data.get("si_atten_db")
    return Scene(
        users=tuple(
            User(
                position=np.asarray(u["position"], dtype=float),
                paths=PathSet(
                    gains=[_from_cpx(p["gain"]) for p in u["paths"]],
                    elevations=[p["elevation"] for p in u["paths"]],
                    azimuths=[p["azimuth"] for p in u["paths"]],
                ),
            )
            for u in data["users"]
        ),
        targets=tuple(
            Target(
                position=np.asarray(t["position"], dtype=float),
                alpha=_from_cpx(t["alpha"]),
                elevation=float(t["elevation"]),
                azimuth=float(t["azimuth"]),
            )
            for t in data.get("targets", [])
        ),
        clutter=tuple(
            Clutter(gain=_from_cpx(c["gain"]), elevation=float(c["elevation"]), azimuth=float(c["azimuth"]))
            for c in data.get("clutter", [])
        ),
        noise_comm=dbm_to_watt(data["noise_comm_dbm"]),
        noise_sense=dbm_to_watt(data["noise_sense_dbm"]),
        si_atten=0.0 if si_db is None else db_to_amplitude(si_db),
        tx_power=dbm_to_watt(data["tx_power_dbm"]),
        wavelength=float(data["wavelength_m"]),
        bs_position=np.asarray(data.get("bs_position", [0.0, 0.0, 30.0]), dtype=float),
        phase_bits=int(data.get("phase_bits", 3)),
        beam_elevation=float(data.get("beam_elevation", -math.pi / 8)),
    )


# -- geometry and channels ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    local: np.ndarray  # (rows, cols, 3) port positions in the array frame, centroid at origin
    rotation: np.ndarray
    bs_position: np.ndarray

    def relative(self, cells: Sequence[tuple[int, int]]) -> np.ndarray:
        """Rotated port positions relative to the aperture centroid (phase reference)."""
        cells = np.asarray(cells, dtype=int).reshape(-1, 2)
        return self.local[cells[:, 0], cells[:, 1]] @ self.rotation.T

    def positions(self, cells: Sequence[tuple[int, int]]) -> np.ndarray:
        return self.relative(cells) + self.bs_position

    def all_relative(self) -> np.ndarray:
        """(rows * cols, 3) rotated positions indexed by flat cell id."""
        return self.local.reshape(-1, 3) @ self.rotation.T


def local_grid(space: SpaceSpec, wavelength: float) -> np.ndarray:
    step = space.port_spacing * wavelength
    rows = (np.arange(space.grid_rows) - (space.grid_rows - 1) / 2) * step
    cols = (np.arange(space.grid_cols) - (space.grid_cols - 1) / 2) * step
    grid = np.zeros((space.grid_rows, space.grid_cols, 3))
    grid[..., 0] = cols[None, :]
    grid[..., 1] = rows[:, None]
    return grid


def build_geometry(space: SpaceSpec, orientation_idx: int, wavelength: float, bs_position=(0.0, 0.0, 30.0)) -> ArrayGeometry:
    if not 0 <= orientation_idx < space.n_orientations:
        raise ValueError(f"orientation index {orientation_idx} outside [0, {space.n_orientations})")
    el, az = orientation_angles(space.n_orientations)[orientation_idx]
    return ArrayGeometry(
        local=local_grid(space, wavelength),
        rotation=rotation_matrix(el, az),
        bs_position=np.asarray(bs_position, dtype=float),
    )


def steering_vector(positions, elevation, azimuth, wavelength: float) -> np.ndarray:
    """exp(-j 2pi/lambda p_m . u) for each position row."""
    u = unit_direction(elevation, azimuth)
    return np.exp(-2j * np.pi / wavelength * (np.asarray(positions, dtype=float) @ u))


def steering_matrix(positions, elevations, azimuths, wavelength: float) -> np.ndarray:
    """Rows are steering vectors, one per direction: shape (n_dirs, n_positions)."""
    u = unit_direction(np.atleast_1d(elevations), np.atleast_1d(azimuths))
    return np.exp(-2j * np.pi / wavelength * (u @ np.asarray(positions, dtype=float).T))


def comm_channel(geom: ArrayGeometry, tx_ports, paths: PathSet, wavelength: float) -> np.ndarray:
    field_response = steering_matrix(geom.relative(tx_ports), paths.elevations, paths.azimuths, wavelength)
    return field_response.T @ paths.gains


def _far_field(geom, rx_ports, tx_ports, gains, elevations, azimuths, wavelength) -> np.ndarray:
    n_r, n_t = len(rx_ports), len(tx_ports)
    out = np.zeros((n_r, n_t), dtype=complex)
    if len(gains) == 0:
        return out
    b = steering_matrix(geom.relative(rx_ports), elevations, azimuths, wavelength)
    a = steering_matrix(geom.relative(tx_ports), elevations, azimuths, wavelength)
    for g, bq, aq in zip(gains, b, a):
        out += g * np.outer(bq, aq.conj())
    return out


def target_channel(geom: ArrayGeometry, rx_ports, tx_ports, targets: Sequence[Target], wavelength: float) -> np.ndarray:
    return _far_field(
        geom,
        rx_ports,
        tx_ports,
        [t.alpha for t in targets],
        [t.elevation for t in targets],
        [t.azimuth for t in targets],
        wavelength,
    )


def clutter_channel(geom: ArrayGeometry, rx_ports, tx_ports, clutter: Sequence[Clutter], wavelength: float) -> np.ndarray:
    return _far_field(
        geom,
        rx_ports,
        tx_ports,
        [c.gain for c in clutter],
        [c.elevation for c in clutter],
        [c.azimuth for c in clutter],
        wavelength,
    )


def si_channel(geom: ArrayGeometry, rx_ports, tx_ports, si_atten: float, wavelength: float) -> np.ndarray:
    """Spherical-wave leakage (beta / d) exp(-j 2pi d / lambda) between rx and tx ports."""
    pr = geom.relative(rx_ports)
    pt = geom.relative(tx_ports)
    dist = np.linalg.norm(pr[:, None, :] - pt[None, :, :], axis=-1)
    if np.any(dist <= 0):
        raise ZeroDistanceError("coincident transmit and receive ports")
    return si_atten / dist * np.exp(-2j * np.pi * dist / wavelength)


def quantize_phases(values: np.ndarray, bits: int) -> np.ndarray:
    """Unit-modulus entries whose phases are rounded to the 2^bits-point grid."""
    levels = 2**bits
    step = 2 * np.pi / levels
    idx = np.round(np.angle(values) / step) % levels
    return np.exp(1j * step * idx)


def beam_directions(n_beams: int, elevation: float) -> tuple[np.ndarray, np.ndarray]:
    az = 2 * np.pi * np.arange(n_beams) / n_beams
    return np.full(n_beams, elevation), az


def build_precoder(
    cfg: Configuration,
    geom: ArrayGeometry,
    space: SpaceSpec,
    tx_power: float,
    wavelength: float,
    phase_bits: int = 3,
    beam_elevation: float = -math.pi / 8,
) -> np.ndarray:
    """N_t x K codebook precoder with equal power split; Tr(F F^H) = tx_power.

    Column k holds the phase-quantized matched response toward beam
    direction ``beam_idx[k]``, scaled by sqrt(tx_power / K) / sqrt(N_t).
    """
    if any(not 0 <= b < space.n_beams for b in cfg.beam_idx):
        raise ValueError("beam index outside the codebook")
    el, az = beam_directions(space.n_beams, beam_elevation)
    pos = geom.relative(cfg.tx_ports)
    n_t, k = len(cfg.tx_ports), len(cfg.beam_idx)
    scale = math.sqrt(tx_power / k) / math.sqrt(n_t)
    # Matched (conjugate) phases steer the beam toward its codebook direction.
    cols = [quantize_phases(np.conj(steering_vector(pos, el[b], az[b], wavelength)), phase_bits) for b in cfg.beam_idx]
    return scale * np.stack(cols, axis=1)


# -- grey-box split -------------------------------------------------------------


class ObjectiveVector(NamedTuple):
    r_c: float
    r_s: float


@dataclass(frozen=True, eq=False)
class LatentConstituents:
    pair_powers: np.ndarray  # (K, K), entry (k, q) = |h_k^T f_q|^2
    sensing_eigs: np.ndarray  # (N_r,), descending

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pair_powers.ravel(), self.sensing_eigs])

    @classmethod
    def from_vector(cls, vec, n_users: int, n_rx: int) -> "LatentConstituents":
        vec = np.asarray(vec, dtype=float)
        k2 = n_users * n_users
        return cls(vec[:k2].reshape(n_users, n_users), vec[k2 : k2 + n_rx])


def latent_dim(space: SpaceSpec) -> int:
    return space.n_users**2 + space.n_rx


def _whitened_eigs(g_t, r_x, r_i, noise_sense) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(r_i)
    except np.linalg.LinAlgError as exc:
        raise CovarianceDegenerateError("interference covariance is not positive definite") from exc
    w = np.linalg.solve(chol, g_t)
    m = w @ r_x @ w.conj().T / noise_sense
    eigs = np.linalg.eigvals(m)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    if np.max(np.abs(eigs.imag)) > 1e-8 * scale:
        raise PhysicsError("whitened sensing matrix has complex eigenvalues")
    eigs = np.clip(eigs.real, 0.0, None)
    # Rank-deficient directions come back as rounding noise; flush them to zero.
    eigs[eigs < 1e-12 * scale] = 0.0
    return np.sort(eigs)[::-1]


def latent_constituents(cfg: Configuration, scene: Scene, space: SpaceSpec) -> LatentConstituents:
    """Pair powers and whitened sensing eigenvalues, built matrix by matrix.

    The interference-plus-noise covariance is noise-normalized,
    R_i = (G_clu R_x G_clu^H + G_si R_x G_si^H) / sigma_s^2 + I,
    so interference-free scenes whiten with the identity.
    """
    lam = scene.wavelength
    geom = build_geometry(space, cfg.orientation_idx, lam, scene.bs_position)
    f = build_precoder(cfg, geom, space, scene.tx_power, lam, scene.phase_bits, scene.beam_elevation)
    h = np.stack([comm_channel(geom, cfg.tx_ports, u.paths, lam) for u in scene.users])
    pair_powers = np.abs(h @ f) ** 2

    r_x = f @ f.conj().T
    g_t = target_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.targets, lam)
    g_clu = clutter_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.clutter, lam)
    g_si = si_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.si_atten, lam)
    r_i = (g_clu @ r_x @ g_clu.conj().T + g_si @ r_x @ g_si.conj().T) / scene.noise_sense
    r_i = r_i + np.eye(len(cfg.rx_ports))
    eigs = _whitened_eigs(g_t, r_x, r_i, scene.noise_sense)
    return LatentConstituents(pair_powers, eigs)


def known_map_g(h: LatentConstituents, noise_comm: float) -> ObjectiveVector:
    p = np.asarray(h.pair_powers, dtype=float)
    signal = np.diag(p)
    interference = p.sum(axis=1) - signal
    r_c = float(np.sum(np.log2(1.0 + signal / (interference + noise_comm))))
    r_s = float(np.sum(np.log2(1.0 + np.asarray(h.sensing_eigs, dtype=float))))
    return ObjectiveVector(r_c, r_s)


def g_batch(latent: np.ndarray, n_users: int, noise_comm: float) -> np.ndarray:
    """Vectorized known map on latent vectors of shape (..., K^2 + N_r) -> (..., 2)."""
    latent = np.asarray(latent, dtype=float)
    k2 = n_users * n_users
    p = latent[..., :k2].reshape(latent.shape[:-1] + (n_users, n_users))
    signal = np.diagonal(p, axis1=-2, axis2=-1)
    interference = p.sum(axis=-1) - signal
    r_c = np.sum(np.log2(1.0 + signal / (interference + noise_comm)), axis=-1)
    r_s = np.sum(np.log2(1.0 + latent[..., k2:]), axis=-1)
    return np.stack([r_c, r_s], axis=-1)


def perturb_latent(h: LatentConstituents, std: float, rng: np.random.Generator | None) -> LatentConstituents:
    """Relative Gaussian estimation error on each constituent, clipped at zero."""
    if std == 0:
        return h
    if rng is None:
        raise ValueError("a random stream is required for noisy observations")
    vec = h.as_vector()
    noisy = np.clip(vec * (1.0 + std * rng.standard_normal(vec.shape)), 0.0, None)
    k = h.pair_powers.shape[0]
    out = LatentConstituents.from_vector(noisy, k, len(h.sensing_eigs))
    return LatentConstituents(out.pair_powers, np.sort(out.sensing_eigs)[::-1])


def evaluate(
    cfg: Configuration,
    scene: Scene,
    space: SpaceSpec,
    obs_noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[ObjectiveVector, LatentConstituents]:
    """Ground-truth objectives plus the (possibly noisy) observed constituents."""
    h_true = latent_constituents(cfg, scene, space)
    return known_map_g(h_true, scene.noise_comm), perturb_latent(h_true, obs_noise_std, rng)


# -- batched route ----------------------------------------------------------------


class _OrientationTables(NamedTuple):
    pos: np.ndarray  # (P, 3)
    user: np.ndarray  # (K, P) per-port comm channel
    beams: np.ndarray  # (Q_b, P) quantized beam phases
    targets: np.ndarray  # (Q, P)
    clutter: np.ndarray  # (Q_c, P)


def _tables(scene: Scene, space: SpaceSpec, orientation_idx: int) -> _OrientationTables:
    lam = scene.wavelength
    pos = build_geometry(space, orientation_idx, lam, scene.bs_position).all_relative()
    user = np.stack(
        [steering_matrix(pos, u.paths.elevations, u.paths.azimuths, lam).T @ u.paths.gains for u in scene.users]
    )
    el, az = beam_directions(space.n_beams, scene.beam_elevation)
    beams = quantize_phases(np.conj(steering_matrix(pos, el, az, lam)), scene.phase_bits)

    def table(items, el_attr, az_attr):
        if not items:
            return np.zeros((0, len(pos)), dtype=complex)
        return steering_matrix(pos, [getattr(i, el_attr) for i in items], [getattr(i, az_attr) for i in items], lam)

    return _OrientationTables(
        pos, user, beams, table(scene.targets, "elevation", "azimuth"), table(scene.clutter, "elevation", "azimuth")
    )


def _far_field_times_f(table, gains, rx, tx, f) -> np.ndarray:
    """(sum_q g_q b_q a_q^H) F for each row, shape (n, N_r, K)."""
    out = np.zeros((len(rx), rx.shape[1], f.shape[2]), dtype=complex)
    for q, g in enumerate(gains):
        a_f = np.einsum("nm,nmk->nk", table[q][tx].conj(), f)
        out += g * table[q][rx][:, :, None] * a_f[:, None, :]
    return out


def _latent_chunk(coords: np.ndarray, scene: Scene, space: SpaceSpec, tabs: _OrientationTables) -> np.ndarray:
    n = len(coords)
    cells = port_cells(coords, space)
    tx, rx = cells[:, : space.n_tx], cells[:, space.n_tx :]
    beam_idx = coords[:, space.orientation_slot + 1 :]
    k = space.n_users

    f = tabs.beams[beam_idx[:, None, :], tx[:, :, None]] * (math.sqrt(scene.tx_power / k) / math.sqrt(space.n_tx))
    h = np.transpose(tabs.user[:, tx], (1, 0, 2))  # (n, K, N_t)
    pair = np.abs(h @ f) ** 2

    gtf = _far_field_times_f(tabs.targets, [t.alpha for t in scene.targets], rx, tx, f)
    gcf = _far_field_times_f(tabs.clutter, [c.gain for c in scene.clutter], rx, tx, f)
    dist = np.linalg.norm(tabs.pos[rx][:, :, None, :] - tabs.pos[tx][:, None, :, :], axis=-1)
    if np.any(dist <= 0):
        raise ZeroDistanceError("coincident transmit and receive ports")
    g_si = scene.si_atten / dist * np.exp(-2j * np.pi * dist / scene.wavelength)
    gsf = g_si @ f

    r_i = (gcf @ np.conj(np.swapaxes(gcf, 1, 2)) + gsf @ np.conj(np.swapaxes(gsf, 1, 2))) / scene.noise_sense
    r_i = r_i + np.eye(space.n_rx)
    try:
        chol = np.linalg.cholesky(r_i)
    except np.linalg.LinAlgError as exc:
        raise CovarianceDegenerateError("interference covariance is not positive definite") from exc
    w = np.linalg.solve(chol, gtf)  # (n, N_r, K)
    # Nonzero spectrum of W W^H equals that of the smaller Gram W^H W.
    if k < space.n_rx:
        gram = np.conj(np.swapaxes(w, 1, 2)) @ w
        eig = np.zeros((n, space.n_rx))
        eig[:, :k] = np.linalg.eigvalsh(gram)
    else:
        eig = np.linalg.eigvalsh(w @ np.conj(np.swapaxes(w, 1, 2)))
    eig = np.clip(eig / scene.noise_sense, 0.0, None)
    eig[eig < 1e-12 * np.maximum(1.0, eig.max(axis=1, keepdims=True))] = 0.0
    eig = np.sort(eig, axis=1)[:, ::-1]
    return np.concatenate([pair.reshape(n, k * k), eig], axis=1)


def latent_batch(coords: np.ndarray, scene: Scene, space: SpaceSpec, chunk: int = 65536) -> np.ndarray:
    """Latent vectors for stacked encoded configurations, shape (n, K^2 + N_r)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    out = np.empty((len(coords), latent_dim(space)))
    orient = coords[:, space.orientation_slot]
    for o in np.unique(orient):
        tabs = _tables(scene, space, int(o))
        idx = np.flatnonzero(orient == o)
        for start in range(0, len(idx), chunk):
            part = idx[start : start + chunk]
            out[part] = _latent_chunk(coords[part], scene, space, tabs)
    return out


def objectives_batch(coords: np.ndarray, scene: Scene, space: SpaceSpec) -> tuple[np.ndarray, np.ndarray]:
    latent = latent_batch(coords, scene, space)
    return g_batch(latent, space.n_users, scene.noise_comm), latent

