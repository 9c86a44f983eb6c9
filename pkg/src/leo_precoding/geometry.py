"""Orbit, ground geometry, beam lattice and estimation-to-transmission delay.

Spherical Earth, circular Keplerian orbit, Earth rotation neglected. All
positions live in one Earth-centred frame (metres). The satellite antenna
frame has its z-axis on nadir, x-axis along-track and y = z cross x, so a
direction (u, v, w) in that frame gives the uv-coordinates directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

EARTH_RADIUS = 6371.0e3
MU_EARTH = 3.986004418e14
SPEED_OF_LIGHT = 299_792_458.0


class GeometryError(ValueError):
    """Raised for degenerate or invisible geometry."""


class TerminalClass(str, Enum):
    VSAT = "vsat"
    HANDHELD = "handheld"


class Scenario(str, Enum):
    FIXED = "fixed"
    PUBLIC_SAFETY = "public_safety"


class ArchitectureMode(str, Enum):
    CPC = "cpc"
    DPC = "dpc"


def _unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass(frozen=True)
class SatelliteState:
    epoch: float
    position: np.ndarray
    velocity: np.ndarray

    @classmethod
    def circular(cls, altitude: float, inclination_deg: float = 0.0, epoch: float = 0.0):
        """Satellite over (lat 0, lon 0) heading east-north at the given inclination."""
        a = EARTH_RADIUS + altitude
        speed = np.sqrt(MU_EARTH / a)
        inc = np.radians(inclination_deg)
        position = np.array([a, 0.0, 0.0])
        velocity = speed * np.array([0.0, np.cos(inc), np.sin(inc)])
        return cls(epoch, position, velocity)

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.position))

    @property
    def altitude(self) -> float:
        return self.radius - EARTH_RADIUS

    @property
    def boresight(self) -> np.ndarray:
        return -self.position / self.radius

    @property
    def angular_rate(self) -> float:
        return float(np.sqrt(MU_EARTH / self.radius**3))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.angular_rate

    def antenna_frame(self) -> np.ndarray:
        """Rows are the antenna-frame x, y, z axes expressed in the Earth frame."""
        z = self.boresight
        x = self.velocity - np.dot(self.velocity, z) * z
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        return np.vstack([x, y, z])


@dataclass(frozen=True)
class UserTerminal:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    terminal_class: TerminalClass = TerminalClass.VSAT
    scenario: Scenario = Scenario.FIXED
    noise_temperature: float = 290.0

    @property
    def rx_boresight(self) -> np.ndarray:
        # Every terminal points at the single serving satellite; kept for symmetry.
        return _unit(self.position)


@dataclass
class UserPopulation:
    """Struct-of-arrays view of a user drop (one row per terminal)."""

    ids: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    beam: np.ndarray
    scenario: Scenario = Scenario.FIXED

    def __len__(self) -> int:
        return len(self.ids)

    def terminal(self, k: int, terminal_class=TerminalClass.VSAT, noise_temperature=290.0):
        return UserTerminal(int(self.ids[k]), self.positions[k].copy(), self.velocities[k].copy(),
                            TerminalClass(terminal_class), self.scenario, noise_temperature)

    def users_by_beam(self, n_beams: int) -> dict[int, list[int]]:
        out = {b: [] for b in range(n_beams)}
        for uid, b in zip(self.ids.tolist(), self.beam.tolist()):
            out[b].append(uid)
        return out


@dataclass(frozen=True)
class BeamLattice:
    centers: np.ndarray
    spacing: float

    @property
    def n_beams(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class DelayBudget:
    t_ut_max: float
    t_feeder: float
    t_p: float
    t_ad: float
    mode: ArchitectureMode = ArchitectureMode.CPC

    def __post_init__(self):
        for name in ("t_ut_max", "t_feeder", "t_p", "t_ad"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def delta_t(self) -> float:
        return self.t_ut_max + 2 * self.t_feeder + self.t_p + self.t_ad


# --------------------------------------------------------------------------
# orbit and motion
# --------------------------------------------------------------------------

def _rotate(vec, axis, angle):
    # Rodrigues rotation; axis is a unit vector.
    return (vec * np.cos(angle) + np.cross(axis, vec) * np.sin(angle)
            + axis * np.dot(axis, vec) * (1 - np.cos(angle)))


def propagate_satellite(state: SatelliteState, dt: float) -> SatelliteState:
    """Advance a circular orbit by ``dt`` seconds (exact rotation in the orbital plane)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return replace(state)
    normal = _unit(np.cross(state.position, state.velocity))
    angle = state.angular_rate * dt
    return SatelliteState(state.epoch + dt,
                          _rotate(state.position, normal, angle),
                          _rotate(state.velocity, normal, angle))


def move_users(positions, velocities, dt: float):
    """Move ground terminals along great circles at their (tangent) velocity.

    Returns new ``(positions, velocities)``. Straight-line displacement equals
    ``|v| dt`` to within (|v| dt)^3 / R^2, i.e. far below a micrometre here.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    velocities = np.atleast_2d(np.asarray(velocities, dtype=float))
    speed = np.linalg.norm(velocities, axis=1)
    moving = speed > 0
    new_pos, new_vel = positions.copy(), velocities.copy()
    if dt == 0 or not moving.any():
        return new_pos, new_vel
    p, v = positions[moving], velocities[moving]
    r = np.linalg.norm(p, axis=1, keepdims=True)
    angle = (speed[moving] * dt / r[:, 0])[:, None]
    heading = v / speed[moving][:, None]
    new_pos[moving] = p * np.cos(angle) + heading * r * np.sin(angle)
    new_vel[moving] = v * np.cos(angle) - (p / r) * speed[moving][:, None] * np.sin(angle)
    return new_pos, new_vel


def move_user(user: UserTerminal, dt: float) -> UserTerminal:
    """Move one terminal; the heading was fixed when the user was dropped."""
    pos, vel = move_users(user.position, user.velocity, dt)
    return replace(user, position=pos[0], velocity=vel[0])


def tangent_velocities(positions, speed: float, headings) -> np.ndarray:
    """Velocity vectors of magnitude ``speed`` along ``headings`` (rad, from local north)."""
    positions = np.atleast_2d(positions)
    up = _unit(positions)
    pole = np.array([0.0, 0.0, 1.0])
    east = np.cross(pole, up)
    # users exactly on the pole get an arbitrary east
    bad = np.linalg.norm(east, axis=1) < 1e-12
    east[bad] = np.array([0.0, 1.0, 0.0])
    east = _unit(east)
    north = np.cross(up, east)
    headings = np.asarray(headings)[:, None]
    return speed * (np.cos(headings) * north + np.sin(headings) * east)


# --------------------------------------------------------------------------
# ranges, angles, uv
# --------------------------------------------------------------------------

def slant_range(positions, sat: SatelliteState) -> np.ndarray | float:
    """Straight-line distance from ground point(s) to the satellite."""
    d = np.linalg.norm(np.asarray(positions, dtype=float) - sat.position, axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def elevation_deg(positions, sat: SatelliteState) -> np.ndarray | float:
    positions = np.asarray(positions, dtype=float)
    los = sat.position - positions
    up = positions / np.linalg.norm(positions, axis=-1, keepdims=True)
    sin_el = np.sum(los * up, axis=-1) / np.linalg.norm(los, axis=-1)
    el = np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))
    return float(el) if np.ndim(el) == 0 else el


def check_visible(positions, sat: SatelliteState, min_elevation_deg: float = 10.0):
    el = np.atleast_1d(elevation_deg(positions, sat))
    if np.any(el < min_elevation_deg):
        raise GeometryError(f"{int(np.sum(el < min_elevation_deg))} point(s) below "
                            f"{min_elevation_deg} deg elevation (min {el.min():.2f} deg)")


def slant_range_from_elevation(elevation_deg_: float, altitude: float,
                               radius: float = EARTH_RADIUS) -> float:
    s = np.sin(np.radians(elevation_deg_))
    return float(np.sqrt(radius**2 * s**2 + 2 * radius * altitude + altitude**2) - radius * s)


def uv_coordinates(target_positions, sat: SatelliteState) -> np.ndarray:
    """Direction cosines (u, v) of target(s) in the satellite antenna frame.

    Returns shape ``(..., 2)``. Raises if a target sits behind the array plane.
    """
    d = np.asarray(target_positions, dtype=float) - sat.position
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    local = d @ sat.antenna_frame().T
    if np.any(local[..., 2] < 0):
        raise GeometryError("target behind the array plane")
    return local[..., :2]


def uv_to_direction(uv, sat: SatelliteState) -> np.ndarray:
    uv = np.asarray(uv, dtype=float)
    rho2 = np.sum(uv**2, axis=-1)
    if np.any(rho2 > 1):
        raise GeometryError("uv outside visible space")
    local = np.concatenate([uv, np.sqrt(1 - rho2)[..., None]], axis=-1)
    return local @ sat.antenna_frame()


def uv_to_ground(uv, sat: SatelliteState) -> np.ndarray:
    """Ground point hit by the ray leaving the satellite in direction ``uv``."""
    direction = uv_to_direction(uv, sat)
    p = sat.position
    # |p + s d|^2 = R^2, nearest root
    b = direction @ p
    disc = b**2 - (p @ p - EARTH_RADIUS**2)
    if np.any(disc < 0):
        raise GeometryError("uv direction misses the Earth")
    s = -b - np.sqrt(disc)
    return p + s[..., None] * direction


def central_angle(a, b) -> np.ndarray:
    a, b = _unit(a), _unit(b)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


# --------------------------------------------------------------------------
# beam lattice and user drop
# --------------------------------------------------------------------------

def build_beam_lattice(n_rings: int, spacing: float) -> BeamLattice:
    """Hexagonal lattice of ``1 + 3 n (n + 1)`` beam centres around boresight."""
    if n_rings < 0:
        raise ValueError("n_rings must be >= 0")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, np.sqrt(3) / 2])
    pts = []
    for i in range(-n_rings, n_rings + 1):
        for j in range(-n_rings, n_rings + 1):
            # hex distance in axial coordinates
            if max(abs(i), abs(j), abs(i + j)) <= n_rings:
                pts.append(i * a1 + j * a2)
    pts = np.array(pts) * spacing
    ring = np.round(np.linalg.norm(pts, axis=1) / spacing, 9)
    order = np.lexsort((np.arctan2(pts[:, 1], pts[:, 0]), ring))
    centers = pts[order]
    if np.any(np.linalg.norm(centers, axis=1) > 1):
        raise GeometryError("lattice extends outside visible uv space")
    return BeamLattice(centers, float(spacing))


def associate_beams(uv, lattice: BeamLattice) -> np.ndarray:
    """Index of the closest beam centre in uv; ties go to the lowest index."""
    uv = np.atleast_2d(uv)
    d2 = np.sum((uv[:, None, :] - lattice.centers[None, :, :]) ** 2, axis=-1)
    return np.argmin(d2, axis=1)


@dataclass(frozen=True)
class Footprint:
    """Union of spherical caps centred on the beam-centre ground projections."""

    centers: np.ndarray  # ground points, (N_B, 3)
    cap_angles: np.ndarray  # central-angle radius per cap
    nadir: np.ndarray
    bound_angle: float
    rng_area_samples: int = field(default=200_000, compare=False)

    def contains(self, points) -> np.ndarray:
        ang = central_angle(np.asarray(points)[:, None, :], self.centers[None, :, :])
        return np.any(ang <= self.cap_angles[None, :], axis=1)

    @property
    def bound_area(self) -> float:
        return 2 * np.pi * EARTH_RADIUS**2 * (1 - np.cos(self.bound_angle))

    def area(self, n_samples: int | None = None, seed: int = 0) -> float:
        """Union area in m^2 by uniform sampling of the bounding cap."""
        n = n_samples or self.rng_area_samples
        pts = sample_cap(self.nadir, self.bound_angle, n, np.random.default_rng(seed))
        return self.bound_area * float(np.mean(self.contains(pts)))


def sample_cap(center, max_angle: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform on the spherical cap of given central-angle radius."""
    center = _unit(center)
    cos_g = rng.uniform(np.cos(max_angle), 1.0, n)
    az = rng.uniform(0.0, 2 * np.pi, n)
    sin_g = np.sqrt(1 - cos_g**2)
    helper = np.array([0.0, 0.0, 1.0]) if abs(center[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = _unit(np.cross(center, helper))
    e2 = np.cross(center, e1)
    dirs = (cos_g[:, None] * center + sin_g[:, None] * (np.cos(az)[:, None] * e1
                                                          + np.sin(az)[:, None] * e2))
    return EARTH_RADIUS * dirs


def beam_footprint(lattice: BeamLattice, sat: SatelliteState, overlap: float = 1.15) -> Footprint:
    """Caps of radius ``overlap`` x half the ground distance to the hexagonal neighbours."""
    ground = uv_to_ground(lattice.centers, sat)
    nb = np.stack([lattice.spacing * np.array([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)])
                   for k in range(6)])
    radii = np.empty(lattice.n_beams)
    for ell, c in enumerate(lattice.centers):
        neighbours = c + nb
        neighbours = neighbours[np.sum(neighbours**2, axis=1) < 1]
        pts = uv_to_ground(neighbours, sat)
        radii[ell] = 0.5 * overlap * np.mean(central_angle(pts, ground[ell]))
    nadir = EARTH_RADIUS * _unit(sat.position)
    bound = float(np.max(central_angle(ground, nadir) + radii))
    return Footprint(ground, radii, nadir, bound)


def drop_users(lattice: BeamLattice, sat: SatelliteState, density_per_km2: float,
               rng: np.random.Generator, overlap: float = 1.15,
               scenario: Scenario = Scenario.FIXED, speed: float = 0.0,
               heading_rng: np.random.Generator | None = None) -> UserPopulation:
    """Poisson drop over the footprint, one user re-seeded into every empty beam.

    Candidates are drawn as a Poisson process on the bounding cap and thinned
    to the footprint, so the count is Poisson with mean density x union area.
    ``heading_rng`` draws the constant headings of moving terminals; it is
    always consumed so fixed and moving drops stay matched.
    """
    if density_per_km2 <= 0:
        raise ValueError("user density must be positive")
    fp = beam_footprint(lattice, sat, overlap)
    if fp.bound_angle <= 0:
        raise GeometryError("zero-area footprint")
    n_cand = rng.poisson(density_per_km2 * fp.bound_area / 1e6)
    cand = sample_cap(fp.nadir, fp.bound_angle, n_cand, rng)
    pos = cand[fp.contains(cand)] if n_cand else np.empty((0, 3))
    beam = associate_beams(uv_coordinates(pos, sat), lattice) if len(pos) else np.empty(0, int)
    extra_pos, extra_beam = [], []
    for ell in np.setdiff1d(np.arange(lattice.n_beams), beam):
        while True:
            p = sample_cap(fp.centers[ell], fp.cap_angles[ell], 1, rng)
            if associate_beams(uv_coordinates(p, sat), lattice)[0] == ell:
                break
        extra_pos.append(p[0])
        extra_beam.append(ell)
    if extra_pos:
        pos = np.vstack([pos, np.array(extra_pos)])
        beam = np.concatenate([beam, np.array(extra_beam, dtype=int)])
    heading_rng = heading_rng or rng
    headings = heading_rng.uniform(0.0, 2 * np.pi, len(pos))
    if scenario is Scenario.PUBLIC_SAFETY and speed > 0:
        vel = tangent_velocities(pos, speed, headings)
    else:
        vel = np.zeros_like(pos)
    return UserPopulation(np.arange(len(pos)), pos, vel, beam.astype(int), Scenario(scenario))


# --------------------------------------------------------------------------
# delay budget
# --------------------------------------------------------------------------

def compute_delay_budget(sat: SatelliteState, user_positions, gw_position, t_p: float = 0.0,
                         t_ad: float = 0.0, mode: ArchitectureMode = ArchitectureMode.CPC) -> DelayBudget:
    """Estimation-to-transmission latency.

    The same composition holds for CPC and DPC: with DPC the matrix is ready
    after ``t_ut_max + t_p``, but the symbols still travel the feeder twice.
    """
    user_positions = np.atleast_2d(np.asarray(user_positions, dtype=float))
    if user_positions.shape[0] == 0 or user_positions.size == 0:
        raise ValueError("empty user list")
    t_ut = float(np.max(slant_range(user_positions, sat))) / SPEED_OF_LIGHT
    t_feeder = float(slant_range(np.asarray(gw_position, dtype=float), sat)) / SPEED_OF_LIGHT
    return DelayBudget(t_ut, t_feeder, float(t_p), float(t_ad), ArchitectureMode(mode))
