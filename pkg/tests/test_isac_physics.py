import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fas_mobo.config_space import SpaceSpec, decode, encode, sample_uniform
from fas_mobo.errors import ZeroDistanceError
from fas_mobo.isac_physics import (
    SPEED_OF_LIGHT,
    Clutter,
    LatentConstituents,
    PathSet,
    Scene,
    Target,
    User,
    build_geometry,
    build_precoder,
    clutter_channel,
    comm_channel,
    evaluate,
    g_batch,
    known_map_g,
    latent_batch,
    latent_constituents,
    objectives_batch,
    quantize_phases,
    rotation_matrix,
    scene_from_dict,
    scene_to_dict,
    si_channel,
    steering_vector,
    target_channel,
)
from fas_mobo.scenario import ScenarioParams, random_scene
from oracles import direct_mi, random_isac_scene

LAM = SPEED_OF_LIGHT / 28e9


# -- geometry -------------------------------------------------------------------------


def test_identity_orientation():
    space = SpaceSpec(3, 3, 1, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, 0, LAM)
    assert np.allclose(geom.rotation, np.eye(3))
    pos = geom.relative([(0, 0), (0, 1), (1, 0)])
    assert np.allclose(pos[:, 2], 0)


@pytest.mark.parametrize("idx", range(8))
def test_rotation_orthonormal_and_isometric(idx):
    space = SpaceSpec(3, 3, 1, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, idx, LAM)
    assert np.linalg.norm(geom.rotation.T @ geom.rotation - np.eye(3)) < 1e-10
    ref = build_geometry(space, 0, LAM).all_relative()
    rot = geom.all_relative()
    d_ref = np.linalg.norm(ref[:, None] - ref[None], axis=-1)
    d_rot = np.linalg.norm(rot[:, None] - rot[None], axis=-1)
    assert np.allclose(d_ref, d_rot, atol=1e-15)


def test_adjacent_spacing_at_28ghz():
    space = SpaceSpec()
    geom = build_geometry(space, 3, LAM)
    step = np.linalg.norm(geom.positions([(4, 4)]) - geom.positions([(4, 5)]))
    assert step == pytest.approx(0.5 * SPEED_OF_LIGHT / 28e9, rel=1e-12)
    assert step * 1e3 == pytest.approx(5.3534, abs=1e-3)


def test_positions_include_base_station():
    space = SpaceSpec(3, 3, 1, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, 0, LAM, (1.0, 2.0, 3.0))
    assert np.allclose(geom.positions([(1, 1)]), [[1.0, 2.0, 3.0]])


# -- steering and channels -------------------------------------------------------------


def test_steering_at_origin_is_ones():
    assert np.allclose(steering_vector(np.zeros((4, 3)), 0.3, 1.1, LAM), 1)


def test_broadside_is_ones():
    space = SpaceSpec(3, 3, 1, 1, 1, 8, 4, 0.5)
    pos = build_geometry(space, 0, LAM).all_relative()
    # The unrotated array lies in the x-y plane; broadside is the z axis.
    assert np.allclose(steering_vector(pos, math.pi / 2, 0.0, LAM), 1)


def test_endfire_half_wavelength_phase_is_pi():
    pos = np.array([[0, 0, 0], [LAM / 2, 0, 0]])
    a = steering_vector(pos, 0.0, 0.0, LAM)
    assert abs(np.angle(a[1] / a[0])) == pytest.approx(math.pi, abs=1e-12)
    assert np.allclose(np.abs(a), 1)


def test_comm_channel_linear_and_superposed():
    space = SpaceSpec(3, 3, 2, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, 2, LAM)
    tx = [(0, 0), (2, 1)]
    p1 = PathSet([1.0], [0.2], [0.7])
    p2 = PathSet([0.3 - 0.4j], [-0.5], [2.0])
    both = PathSet([1.0, 0.3 - 0.4j], [0.2, -0.5], [0.7, 2.0])
    h1 = comm_channel(geom, tx, p1, LAM)
    assert np.allclose(h1, steering_vector(geom.relative(tx), 0.2, 0.7, LAM))
    scaled = PathSet([2.5], [0.2], [0.7])
    assert np.allclose(comm_channel(geom, tx, scaled, LAM), 2.5 * h1)
    assert np.allclose(comm_channel(geom, tx, both, LAM), h1 + comm_channel(geom, tx, p2, LAM))


def test_target_channel_rank():
    space = SpaceSpec(4, 4, 3, 3, 1, 8, 4, 0.5)
    geom = build_geometry(space, 1, LAM)
    tx, rx = [(0, 0), (1, 2), (3, 3)], [(0, 3), (2, 2), (3, 0)]
    one = [Target(np.zeros(3), 1 + 1j, -0.3, 0.8)]
    two = one + [Target(np.zeros(3), 0.5, -0.9, -2.1)]
    s1 = np.linalg.svd(target_channel(geom, rx, tx, one, LAM), compute_uv=False)
    s2 = np.linalg.svd(target_channel(geom, rx, tx, two, LAM), compute_uv=False)
    assert np.sum(s1 > 1e-10 * s1[0]) == 1
    assert np.sum(s2 > 1e-10 * s2[0]) == 2
    zero = [Target(np.zeros(3), 0.0, -0.3, 0.8)]
    assert np.allclose(target_channel(geom, rx, tx, zero, LAM), 0)


def test_clutter_channel_rank():
    space = SpaceSpec(4, 4, 4, 4, 1, 8, 4, 0.5)
    geom = build_geometry(space, 5, LAM)
    tx = [(0, 0), (0, 1), (0, 2), (0, 3)]
    rx = [(3, 0), (3, 1), (3, 2), (3, 3)]
    assert np.allclose(clutter_channel(geom, rx, tx, [], LAM), 0)
    rng = np.random.default_rng(0)
    for q in (1, 3):
        cl = [Clutter(complex(*rng.standard_normal(2)), rng.uniform(-1, 0), rng.uniform(-3, 3)) for _ in range(q)]
        s = np.linalg.svd(clutter_channel(geom, rx, tx, cl, LAM), compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) <= q
    assert np.sum(s > 1e-10 * s[0]) == 3


def test_si_channel_magnitudes():
    space = SpaceSpec(4, 4, 1, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, 0, LAM)
    assert np.allclose(si_channel(geom, [(0, 1)], [(0, 0)], 0.0, LAM), 0)
    beta = 1e-5  # -100 dB in amplitude
    near = si_channel(geom, [(0, 2)], [(0, 0)], beta, LAM)  # distance = lambda
    far = si_channel(geom, [(0, 3)], [(0, 1)], beta, LAM)
    assert abs(near[0, 0]) == pytest.approx(1e-5 / LAM, rel=1e-12)
    one = si_channel(geom, [(0, 1)], [(0, 0)], beta, LAM)
    assert abs(one[0, 0]) == pytest.approx(2 * abs(near[0, 0]), rel=1e-12)
    assert abs(far[0, 0]) == pytest.approx(abs(near[0, 0]), rel=1e-12)


def test_si_zero_distance():
    space = SpaceSpec(4, 4, 1, 1, 1, 8, 4, 0.5)
    geom = build_geometry(space, 0, LAM)
    with pytest.raises(ZeroDistanceError):
        si_channel(geom, [(1, 1)], [(1, 1)], 1e-5, LAM)


# -- precoder ---------------------------------------------------------------------------


@pytest.mark.parametrize("n_users", [1, 2])
def test_precoder_power_for_every_codebook_entry(n_users):
    space = SpaceSpec(4, 4, 3, 2, n_users, 4, 4, 0.5)
    cfg0 = sample_uniform(space, np.random.default_rng(1))
    for o in range(space.n_orientations):
        geom = build_geometry(space, o, LAM)
        for beams in np.ndindex(*([space.n_beams] * n_users)):
            f = build_precoder(replace(cfg0, orientation_idx=o, beam_idx=beams), geom, space, 0.7, LAM)
            assert abs(np.trace(f @ f.conj().T).real - 0.7) < 1e-12


def test_precoder_phases_on_3bit_grid():
    space = SpaceSpec(4, 4, 4, 2, 2, 4, 8, 0.5)
    cfg = sample_uniform(space, np.random.default_rng(2))
    f = build_precoder(cfg, build_geometry(space, cfg.orientation_idx, LAM), space, 1.0, LAM, phase_bits=3)
    k = np.angle(f) / (2 * math.pi / 8)
    assert np.allclose(k, np.round(k), atol=1e-9)


def test_precoder_fine_quantization_limit():
    space = SpaceSpec(4, 4, 4, 2, 1, 4, 8, 0.5)
    cfg = sample_uniform(space, np.random.default_rng(3))
    geom = build_geometry(space, cfg.orientation_idx, LAM)
    f = build_precoder(cfg, geom, space, 1.0, LAM, phase_bits=16, beam_elevation=-0.4)
    az = 2 * math.pi * cfg.beam_idx[0] / space.n_beams
    exact = np.conj(steering_vector(geom.relative(cfg.tx_ports), -0.4, az, LAM))
    err = np.angle(f[:, 0] / exact)
    assert np.max(np.abs(err)) < 1e-3


def test_quantize_phases_unit_modulus():
    z = np.exp(1j * np.linspace(-4, 4, 50)) * 3
    q = quantize_phases(z, 2)
    assert np.allclose(np.abs(q), 1)
    assert np.all(np.abs(np.angle(q / z)) <= math.pi / 4 + 1e-12)


# -- latent constituents and the known map -------------------------------------------------


@pytest.mark.parametrize("n_rx", [1, 2, 4, 6])
def test_eigen_form_matches_direct_log_det(n_rx):
    rng = np.random.default_rng(n_rx)
    space = SpaceSpec(4, 4, 2, n_rx, 1, 8, 8, 0.5)
    for trial in range(10):
        scene = random_isac_scene(rng, n_targets=int(rng.integers(1, 3)), n_clutter=int(rng.integers(0, 4)))
        cfg = sample_uniform(space, rng)
        h = latent_constituents(cfg, scene, space)
        r_s = float(np.sum(np.log2(1 + h.sensing_eigs)))
        assert r_s == pytest.approx(direct_mi(cfg, scene, space), abs=1e-8, rel=1e-8)


def test_identity_whitening_without_interference():
    rng = np.random.default_rng(4)
    space = SpaceSpec(4, 4, 2, 3, 1, 8, 8, 0.5)
    scene = replace(random_isac_scene(rng, n_targets=2, n_clutter=0), si_atten=0.0)
    cfg = sample_uniform(space, rng)
    geom = build_geometry(space, cfg.orientation_idx, LAM)
    f = build_precoder(cfg, geom, space, scene.tx_power, LAM)
    g_t = target_channel(geom, cfg.rx_ports, cfg.tx_ports, scene.targets, LAM)
    expected = np.sort(np.linalg.eigvalsh(g_t @ f @ f.conj().T @ g_t.conj().T / scene.noise_sense))[::-1]
    got = latent_constituents(cfg, scene, space).sensing_eigs
    assert np.allclose(got, np.clip(expected, 0, None), rtol=1e-9, atol=1e-12 * expected.max())


def test_no_targets_no_sensing():
    rng = np.random.default_rng(5)
    space = SpaceSpec(4, 4, 2, 3, 1, 8, 8, 0.5)
    scene = random_isac_scene(rng, n_targets=0)
    h = latent_constituents(sample_uniform(space, rng), scene, space)
    assert np.all(h.sensing_eigs == 0)


def test_latent_invariants(two_user_space, two_user_scene):
    rng = np.random.default_rng(6)
    for _ in range(20):
        h = latent_constituents(sample_uniform(two_user_space, rng), two_user_scene, two_user_space)
        assert h.pair_powers.shape == (2, 2) and np.all(h.pair_powers >= 0)
        assert np.all(h.sensing_eigs >= 0) and np.all(np.diff(h.sensing_eigs) <= 0)
        assert len(h.as_vector()) == 2 * 2 + two_user_space.n_rx


def test_known_map_examples():
    assert known_map_g(LatentConstituents(np.array([[2.0]]), np.zeros(2)), 2.0).r_c == pytest.approx(1.0)
    zero = known_map_g(LatentConstituents(np.zeros((2, 2)), np.zeros(3)), 1.0)
    assert zero == (0.0, 0.0)
    sym = known_map_g(LatentConstituents(np.array([[3.0, 1.0], [1.0, 3.0]]), np.zeros(1)), 1.0)
    assert sym.r_c == pytest.approx(2 * math.log2(1 + 3 / 2), abs=1e-12)
    assert sym.r_c == pytest.approx(2.6439, abs=1e-4)
    assert known_map_g(LatentConstituents(np.zeros((1, 1)), np.array([3.0, 1.0])), 1.0).r_s == pytest.approx(3.0)


@given(st.lists(st.floats(0, 1e3), min_size=4 + 3, max_size=4 + 3))
def test_g_batch_matches_scalar_map(values):
    h = LatentConstituents.from_vector(values, 2, 3)
    f = known_map_g(h, 0.5)
    assert np.allclose(g_batch(np.array(values), 2, 0.5), f, rtol=1e-12, atol=1e-12)


def test_evaluate_noiseless_and_seeded(two_user_space, two_user_scene):
    cfg = sample_uniform(two_user_space, np.random.default_rng(0))
    f, h = evaluate(cfg, two_user_scene, two_user_space, 0.0)
    h_true = latent_constituents(cfg, two_user_scene, two_user_space)
    assert np.array_equal(h.as_vector(), h_true.as_vector())
    a = evaluate(cfg, two_user_scene, two_user_space, 0.1, np.random.default_rng(3))[1].as_vector()
    b = evaluate(cfg, two_user_scene, two_user_space, 0.1, np.random.default_rng(3))[1].as_vector()
    assert np.array_equal(a, b) and np.all(a >= 0)
    assert f == known_map_g(h_true, two_user_scene.noise_comm)


def test_noisy_observation_converges_to_truth(two_user_space, two_user_scene):
    cfg = sample_uniform(two_user_space, np.random.default_rng(0))
    f_true, _ = evaluate(cfg, two_user_scene, two_user_space)
    rng = np.random.default_rng(1)
    errors = []
    for std in (0.3, 0.1, 0.03, 0.01):
        draws = [evaluate(cfg, two_user_scene, two_user_space, std, rng)[1] for _ in range(1000)]
        g = np.array([known_map_g(h, two_user_scene.noise_comm) for h in draws])
        errors.append(np.mean(np.abs(g - np.array(f_true))))
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 0.02


# -- whole-scene properties ---------------------------------------------------------------


def _rotate_scene(scene: Scene, dphi: float) -> Scene:
    users = tuple(User(u.position, PathSet(u.paths.gains, u.paths.elevations, u.paths.azimuths + dphi)) for u in scene.users)
    targets = tuple(replace(t, azimuth=t.azimuth + dphi) for t in scene.targets)
    clutter = tuple(replace(c, azimuth=c.azimuth + dphi) for c in scene.clutter)
    return replace(scene, users=users, targets=targets, clutter=clutter)


def test_rotation_invariance(two_user_space, two_user_scene):
    # A quarter turn about the vertical axis maps orientation o -> o + 1 (within a tilt)
    # and beam b -> b + Q_b / 4; every scene azimuth shifts by pi / 2.
    space, scene = two_user_space, two_user_scene
    rotated = _rotate_scene(scene, math.pi / 2)
    rng = np.random.default_rng(7)
    for _ in range(20):
        cfg = sample_uniform(space, rng)
        o = cfg.orientation_idx
        o2 = (o // 4) * 4 + (o % 4 + 1) % 4
        beams = tuple((b + space.n_beams // 4) % space.n_beams for b in cfg.beam_idx)
        f0 = evaluate(cfg, scene, space)[0]
        f1 = evaluate(replace(cfg, orientation_idx=o2, beam_idx=beams), rotated, space)[0]
        assert np.allclose(f0, f1, rtol=1e-8, atol=1e-8)


def test_rotation_matrix_quarter_turn():
    assert np.allclose(rotation_matrix(0.0, math.pi / 2) @ [1, 0, 0], [0, 1, 0])


def test_leakage_monotone_in_sensing(bench_space):
    rng = np.random.default_rng(8)
    base = random_scene(bench_space, ScenarioParams(n_targets=1), rng)
    coords = np.array([encode(sample_uniform(bench_space, rng), bench_space) for _ in range(50)])
    prev = None
    for db in (-160, -130, -110, -100, -90):
        f, _ = objectives_batch(coords, replace(base, si_atten=10 ** (db / 20)), bench_space)
        if prev is not None:
            assert np.all(f[:, 1] <= prev + 1e-9)
        prev = f[:, 1]


def test_channel_builders_are_pure(two_user_space, two_user_scene):
    cfg = sample_uniform(two_user_space, np.random.default_rng(9))
    a = latent_constituents(cfg, two_user_scene, two_user_space).as_vector()
    b = latent_constituents(cfg, two_user_scene, two_user_space).as_vector()
    assert np.array_equal(a, b)


@pytest.mark.parametrize("space_args", [(3, 3, 1, 1, 1, 2, 2, 0.5), (4, 4, 2, 3, 2, 8, 4, 0.5), (4, 4, 2, 2, 1, 4, 8, 0.5)])
def test_batch_route_matches_scalar_route(space_args):
    space = SpaceSpec(*space_args)
    rng = np.random.default_rng(10)
    scene = random_scene(space, ScenarioParams(n_targets=2 if space.n_rx > 1 else 1), rng)
    coords = np.array([encode(sample_uniform(space, rng), space) for _ in range(60)])
    batch = latent_batch(coords, scene, space)
    for x, row in zip(coords, batch):
        ref = latent_constituents(decode(x, space), scene, space).as_vector()
        assert np.allclose(row, ref, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(ref).max()))


def test_scene_dict_round_trip(two_user_scene, two_user_space):
    again = scene_from_dict(scene_to_dict(two_user_scene))
    cfg = sample_uniform(two_user_space, np.random.default_rng(0))
    assert np.allclose(
        latent_constituents(cfg, again, two_user_space).as_vector(),
        latent_constituents(cfg, two_user_scene, two_user_space).as_vector(),
        rtol=1e-12,
    )
