"""Independent reference implementations shared by the unit and acceptance tests.

Each oracle follows the textbook definition as literally as possible and
shares no code with the package beyond the scene and channel builders.
"""
import math

import mpmath
import numpy as np
from scipy import stats

from fas_mobo import _hv
from fas_mobo.isac_physics import (
    SPEED_OF_LIGHT,
    Clutter,
    PathSet,
    Scene,
    Target,
    User,
    build_geometry,
    build_precoder,
    clutter_channel,
    dbm_to_watt,
    si_channel,
    target_channel,
)

LAM_28GHZ = SPEED_OF_LIGHT / 28e9


def j0_series(x: float, terms: int = 40) -> float:
    """Power series sum_k (-x^2/4)^k / (k!)^2 evaluated in 50-digit arithmetic."""
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        return float(mpmath.fsum((-1) ** k * (x / 2) ** (2 * k) / mpmath.factorial(k) ** 2 for k in range(terms)))


def dense_gp(x, y, xq, lengthscales, noise, tq=None, t=None, tau=None):
    """Posterior mean and variance from explicit kernel loops and a dense solve, standardized targets."""
    mean_y = y.mean(0)
    std_y = np.where(y.std(0) > 0, y.std(0), 1.0)
    ys = (y - mean_y) / std_y

    def k(a, b, ta=None, tb=None):
        d2 = sum(((a[i] - b[i]) / lengthscales[i]) ** 2 for i in range(len(a)))
        v = math.exp(-0.5 * d2)
        if tau is not None:
            v *= math.exp(-abs(ta - tb) / tau)
        return v

    n = len(x)
    tt = [None] * n if t is None else t
    K = np.array([[k(x[i], x[j], tt[i], tt[j]) for j in range(n)] for i in range(n)]) + noise * np.eye(n)
    means, variances = [], []
    for q in xq:
        kv = np.array([k(q, x[i], tq, tt[i]) for i in range(n)])
        means.append(mean_y + std_y * (kv @ np.linalg.solve(K, ys)))
        variances.append((1.0 - kv @ np.linalg.solve(K, kv)) * std_y**2)
    return np.array(means), np.array(variances)


def grid_hv(points, ref, res=1000):
    """Covered share of a res x res cell grid over the unit square above ``ref``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    centers = (np.arange(res) + 0.5) / res
    xs, ys = ref[0] + centers, ref[1] + centers
    covered = np.zeros((res, res), dtype=bool)
    for px, py in pts:
        covered |= (xs[:, None] <= px) & (ys[None, :] <= py)
    return covered.mean()


def direct_mi(cfg, scene, space):
    """log2 det(I + G_t R_x G_t^H R_i^{-1}) with R_i in watts (clutter + leakage + noise)."""
    lam = scene.wavelength
    geom = build_geometry(space, cfg.orientation_idx, lam, scene.bs_position)
    f = build_precoder(cfg, geom, space, scene.tx_power, lam, scene.phase_bits, scene.beam_elevation)
    r_x = f @ f.conj().T
    g_t = target_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.targets, lam)
    g_c = clutter_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.clutter, lam)
    g_s = si_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.si_atten, lam)
    r_i = g_c @ r_x @ g_c.conj().T + g_s @ r_x @ g_s.conj().T + scene.noise_sense * np.eye(len(cfg.rx_ports))
    m = np.eye(len(cfg.rx_ports)) + g_t @ r_x @ g_t.conj().T @ np.linalg.inv(r_i)
    return np.log2(abs(np.linalg.det(m)))


def random_isac_scene(rng, n_users=1, n_targets=1, n_clutter=2, si_db=-100.0) -> Scene:
    """Scene with arbitrary path angles and gains, independent of the scenario generator."""

    def angles():
        return rng.uniform(-math.pi / 2, 0.2), rng.uniform(-math.pi, math.pi)

    users = []
    for _ in range(n_users):
        n_paths = 3
        el, az = zip(*[angles() for _ in range(n_paths)])
        gains = 1e-6 * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths))
        users.append(User(rng.uniform(-50, 50, 3), PathSet(gains, el, az)))
    targets = []
    for _ in range(n_targets):
        el, az = angles()
        targets.append(Target(rng.uniform(-50, 50, 3), 1e-5 * complex(*rng.standard_normal(2)), el, az))
    clutter = []
    for _ in range(n_clutter):
        el, az = angles()
        clutter.append(Clutter(1e-6 * complex(*rng.standard_normal(2)), el, az))
    return Scene(
        users=tuple(users),
        targets=tuple(targets),
        clutter=tuple(clutter),
        noise_comm=dbm_to_watt(-90),
        noise_sense=dbm_to_watt(-90),
        si_atten=10 ** (si_db / 20),
        tx_power=1.0,
        wavelength=LAM_28GHZ,
    )


class GaussianObjectives:
    """Posterior whose draws are mean + sd * eps with no clipping, i.e. a linear known map."""

    def __init__(self, mean, sd):
        self.mean = np.asarray(mean, dtype=float)
        self.sd = np.asarray(sd, dtype=float)

    def draw_eps(self, n_mc, rng):
        return rng.standard_normal((n_mc, 2))

    def sample(self, x, eps):
        eps = np.asarray(eps).reshape(-1, 1, 2)
        return np.broadcast_to(self.mean + self.sd * eps, (len(eps), len(np.atleast_2d(x)), 2))


def ehvi_quadrature(mean, sd, front, n=2000, half_width=8.0):
    """Expected HVI of a Gaussian objective vector by a dense midpoint rule over the latent square."""
    e = -half_width + (np.arange(n) + 0.5) * 2 * half_width / n
    w = stats.norm.pdf(e) * 2 * half_width / n
    total = 0.0
    for i in range(0, n, 250):
        e1, e2 = np.meshgrid(e[i : i + 250], e, indexing="ij")
        f = np.asarray(mean) + np.asarray(sd) * np.stack([e1, e2], axis=-1)
        total += np.sum(_hv.hvi_batch(f, front, (0, 0)) * w[i : i + 250, None] * w[None, :])
    return total
