import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leo_precoding.geometry import (
    EARTH_RADIUS,
    MU_EARTH,
    SPEED_OF_LIGHT,
    DelayBudget,
    GeometryError,
    SatelliteState,
    Scenario,
    UserTerminal,
    associate_beams,
    beam_footprint,
    build_beam_lattice,
    compute_delay_budget,
    drop_users,
    elevation_deg,
    move_user,
    move_users,
    propagate_satellite,
    slant_range,
    slant_range_from_elevation,
    tangent_velocities,
    uv_coordinates,
    uv_to_ground,
)

NADIR = np.array([EARTH_RADIUS, 0.0, 0.0])


def ground_point(central_angle_rad, azimuth_rad=np.pi / 2):
    """Ground point at a given Earth-central angle from the sub-satellite point (lat 0, lon 0)."""
    # rotate (R, 0, 0) towards the y-z plane direction given by the azimuth
    d = np.array([0.0, np.cos(azimuth_rad), np.sin(azimuth_rad)])
    return EARTH_RADIUS * (np.cos(central_angle_rad) * np.array([1.0, 0, 0])
                           + np.sin(central_angle_rad) * d)


# --------------------------------------------------------------------------
# orbit
# --------------------------------------------------------------------------

def test_circular_state_invariants(sat):
    assert sat.radius == pytest.approx(EARTH_RADIUS + 600e3, rel=1e-15)
    assert np.dot(sat.position, sat.velocity) == pytest.approx(0.0, abs=1e-6)
    assert np.linalg.norm(sat.velocity) == pytest.approx(math.sqrt(MU_EARTH / sat.radius))


def test_propagate_zero_is_identity(sat):
    s = propagate_satellite(sat, 0.0)
    np.testing.assert_array_equal(s.position, sat.position)
    np.testing.assert_array_equal(s.velocity, sat.velocity)


def test_propagate_full_period_returns(sat):
    s = propagate_satellite(sat, sat.period)
    assert np.linalg.norm(s.position - sat.position) < 1.0


def test_propagate_along_track_displacement(sat):
    dt = 16.65e-3
    s = propagate_satellite(sat, dt)
    v = math.sqrt(MU_EARTH / sat.radius)
    # chord of an arc v dt on radius a; the chord/arc difference is ~1e-12 m
    disp = np.linalg.norm(s.position - sat.position)
    assert disp == pytest.approx(v * dt, abs=1e-6)
    assert disp == pytest.approx(125.9, abs=0.05)


def test_propagate_negative_dt_rejected(sat):
    with pytest.raises(ValueError):
        propagate_satellite(sat, -1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 3000), st.floats(0, 3000), st.floats(0, 98))
def test_propagate_composes(t1, t2, inc):
    s0 = SatelliteState.circular(600e3, inc)
    a = propagate_satellite(propagate_satellite(s0, t1), t2)
    b = propagate_satellite(s0, t1 + t2)
    assert np.linalg.norm(a.position - b.position) < 1e-6
    assert np.linalg.norm(a.velocity) == pytest.approx(np.linalg.norm(s0.velocity), rel=1e-12)


# --------------------------------------------------------------------------
# ranges and angles
# --------------------------------------------------------------------------

def test_nadir_slant_range(sat):
    assert slant_range(NADIR, sat) == pytest.approx(600e3, abs=1e-6)
    assert elevation_deg(NADIR, sat) == pytest.approx(90.0)


def test_slant_range_at_30_degrees(sat):
    eps = math.radians(30.0)
    a = sat.radius
    gamma = math.acos(EARTH_RADIUS * math.cos(eps) / a) - eps
    user = ground_point(gamma)
    d = slant_range(user, sat)
    # law of cosines in the Earth-centre / user / satellite triangle
    oracle = math.sqrt(EARTH_RADIUS**2 + a**2 - 2 * EARTH_RADIUS * a * math.cos(gamma))
    assert d == pytest.approx(oracle, rel=1e-12)
    assert d == pytest.approx(slant_range_from_elevation(30.0, 600e3), rel=1e-12)
    assert d / 1e3 == pytest.approx(1075.1, abs=0.1)
    assert elevation_deg(user, sat) == pytest.approx(30.0, abs=1e-9)


def test_symmetric_users_have_equal_range(sat):
    g = 0.05
    d1 = slant_range(ground_point(g, 0.3), sat)
    d2 = slant_range(ground_point(g, 0.3 + np.pi), sat)
    assert d1 == pytest.approx(d2, rel=1e-13)


def test_slant_range_decreases_with_elevation():
    d = [slant_range_from_elevation(e, 600e3) for e in np.linspace(10, 90, 33)]
    assert np.all(np.diff(d) < 0)


def test_uv_of_nadir_and_horizon(sat):
    np.testing.assert_allclose(uv_coordinates(NADIR, sat), [0.0, 0.0], atol=1e-15)
    x_axis = sat.antenna_frame()[0]
    np.testing.assert_allclose(uv_coordinates(sat.position + 1e3 * x_axis, sat), [1.0, 0.0],
                               atol=1e-12)


def test_uv_behind_array_rejected(sat):
    with pytest.raises(GeometryError):
        uv_coordinates(sat.position * 1.1, sat)


def test_uv_ground_round_trip(sat):
    lattice = build_beam_lattice(5, 0.1)
    ground = uv_to_ground(lattice.centers, sat)
    np.testing.assert_allclose(np.linalg.norm(ground, axis=1), EARTH_RADIUS, rtol=1e-14)
    np.testing.assert_allclose(uv_coordinates(ground, sat), lattice.centers, atol=1e-9)


# --------------------------------------------------------------------------
# lattice and drop
# --------------------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
def test_lattice_size(n):
    assert build_beam_lattice(n, 0.05).n_beams == 1 + 3 * n * (n + 1)


def test_lattice_geometry():
    lat = build_beam_lattice(5, 0.1)
    assert lat.n_beams == 91
    np.testing.assert_array_equal(lat.centers[0], [0.0, 0.0])
    d = np.linalg.norm(lat.centers[:, None] - lat.centers[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    np.testing.assert_allclose(d.min(axis=1), 0.1, rtol=1e-12)
    assert len({tuple(np.round(c, 12)) for c in lat.centers}) == 91


@pytest.mark.parametrize("spacing", [0.0, -0.1])
def test_lattice_rejects_bad_spacing(spacing):
    with pytest.raises(ValueError):
        build_beam_lattice(2, spacing)


def test_associate_beams_picks_nearest():
    lat = build_beam_lattice(1, 0.1)
    np.testing.assert_array_equal(associate_beams(lat.centers + 0.01, lat), np.arange(7))


def test_drop_rejects_non_positive_density(sat, rng):
    with pytest.raises(ValueError):
        drop_users(build_beam_lattice(1, 0.1), sat, 0.0, rng)


def test_drop_is_deterministic(sat):
    lat = build_beam_lattice(1, 0.1)
    a = drop_users(lat, sat, 0.002, np.random.default_rng(3))
    b = drop_users(lat, sat, 0.002, np.random.default_rng(3))
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.beam, b.beam)


def test_drop_fills_every_beam(sat):
    lat = build_beam_lattice(2, 0.1)
    pop = drop_users(lat, sat, 1e-5, np.random.default_rng(0))
    assert set(pop.beam.tolist()) == set(range(lat.n_beams))
    # every user sits in the beam whose centre is nearest
    np.testing.assert_array_equal(associate_beams(uv_coordinates(pop.positions, sat), lat),
                                  pop.beam)


def test_drop_count_is_poisson(sat):
    lat = build_beam_lattice(1, 0.1)
    fp = beam_footprint(lat, sat)
    area_km2 = fp.area(2_000_000, seed=7) / 1e6
    density = 0.01
    lam = density * area_km2
    rng = np.random.default_rng(99)
    counts = np.array([len(drop_users(lat, sat, density, rng)) for _ in range(1000)])
    # empty beams are practically impossible at this density, so no re-seeding bias
    sigma = math.sqrt(lam / 1000 + (lam * 1e-3) ** 2)
    assert abs(counts.mean() - lam) < 2.576 * sigma
    assert counts.var() == pytest.approx(lam, rel=0.15)


def test_fixed_drop_has_zero_velocity(sat, rng):
    pop = drop_users(build_beam_lattice(1, 0.1), sat, 0.002, rng)
    assert not pop.velocities.any()


def test_moving_drop_is_tangent(sat, rng):
    pop = drop_users(build_beam_lattice(1, 0.1), sat, 0.002, rng,
                     scenario=Scenario.PUBLIC_SAFETY, speed=250 / 3.6)
    np.testing.assert_allclose(np.linalg.norm(pop.velocities, axis=1), 250 / 3.6, rtol=1e-12)
    np.testing.assert_allclose(np.sum(pop.velocities * pop.positions, axis=1), 0.0, atol=1e-3)


# --------------------------------------------------------------------------
# user motion
# --------------------------------------------------------------------------

def _user(speed, heading=0.7):
    pos = ground_point(0.03)
    vel = tangent_velocities(pos[None], speed, [heading])[0]
    return UserTerminal(0, pos, vel)


def test_fixed_user_does_not_move():
    u = _user(0.0)
    np.testing.assert_array_equal(move_user(u, 1.0).position, u.position)


def test_zero_dt_does_not_move():
    u = _user(250 / 3.6)
    np.testing.assert_array_equal(move_user(u, 0.0).position, u.position)


def test_public_safety_displacement():
    u = _user(250 / 3.6)
    moved = move_user(u, 16.6464e-3)
    disp = np.linalg.norm(moved.position - u.position)
    assert disp == pytest.approx(250 / 3.6 * 16.6464e-3, abs=1e-9)
    assert disp == pytest.approx(1.156, abs=1e-3)
    assert np.linalg.norm(moved.position) == pytest.approx(EARTH_RADIUS, rel=1e-14)


def test_move_users_negative_dt_rejected():
    with pytest.raises(ValueError):
        move_users(NADIR, np.zeros(3), -1.0)


# --------------------------------------------------------------------------
# delay budget
# --------------------------------------------------------------------------

def test_delay_budget_nadir(sat):
    users = np.tile(NADIR, (5, 1))
    b = compute_delay_budget(sat, users, NADIR)
    d_over_c = 600e3 / SPEED_OF_LIGHT
    assert b.t_ut_max == pytest.approx(d_over_c, rel=1e-12)
    assert b.delta_t == pytest.approx(3 * d_over_c, rel=1e-12)


def test_delay_budget_uses_farthest_user(sat):
    far = ground_point(0.05)
    b = compute_delay_budget(sat, np.vstack([NADIR, far]), NADIR, 5e-3, 4e-3)
    assert b.t_ut_max == pytest.approx(slant_range(far, sat) / SPEED_OF_LIGHT, rel=1e-12)
    assert b.delta_t == pytest.approx(b.t_ut_max + 2 * b.t_feeder + 9e-3, rel=1e-15)


def test_delay_budget_validation(sat):
    with pytest.raises(ValueError):
        compute_delay_budget(sat, np.empty((0, 3)), NADIR)
    with pytest.raises(ValueError):
        DelayBudget(1e-3, 2e-3, -1e-3, 0.0)


@given(*[st.floats(0, 1, allow_nan=False) for _ in range(4)])
def test_delay_budget_composition(t_ut, t_feeder, t_p, t_ad):
    assert DelayBudget(t_ut, t_feeder, t_p, t_ad).delta_t == t_ut + 2 * t_feeder + t_p + t_ad
