"""Noise-normalised feed-space channel, additional losses and scene evolution."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .antenna import ArrayGeometry, BeamformingMatrix, ElementModel, feed_phase_response
from .geometry import (
    DelayBudget,
    SatelliteState,
    UserPopulation,
    elevation_deg,
    move_users,
    propagate_satellite,
    slant_range,
    uv_coordinates,
    uv_to_ground,
)

BOLTZMANN = 1.380649e-23


class Propagation(str, Enum):
    PLOS = "plos"
    NLOS = "nlos"


class Space(str, Enum):
    FEED = "feed"
    BEAM = "beam"


# --------------------------------------------------------------------------
# additional losses
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LossTable:
    elevation: np.ndarray
    shadow_sigma: np.ndarray
    clutter: np.ndarray
    atmospheric: np.ndarray
    scintillation: np.ndarray
    environment: str = "suburban"

    @classmethod
    def load(cls, path=None, environment: str = "suburban") -> "LossTable":
        """Read an (elevation, shadow sigma, clutter, atm, scint) text table; default ships in the package."""
        if environment != "suburban":
            raise ValueError(f"unknown environment {environment!r}")
        if path is None:
            ref = resources.files("leo_precoding") / "data" / "suburban_s_band_nlos.txt"
            with resources.as_file(ref) as p:
                data = np.loadtxt(p, comments="#", ndmin=2)
        else:
            data = np.loadtxt(Path(path), comments="#", ndmin=2)
        if data.shape[1] != 5:
            raise ValueError(f"loss table needs 5 columns, got {data.shape[1]}")
        data = data[np.argsort(data[:, 0])]
        return cls(*(data[:, i].copy() for i in range(5)), environment=environment)

    def lookup(self, elevation_deg_):
        # np.interp clamps at both ends
        el = np.asarray(elevation_deg_, dtype=float)
        return tuple(np.interp(el, self.elevation, col) for col in
                     (self.shadow_sigma, self.clutter, self.atmospheric, self.scintillation))


@dataclass(frozen=True)
class LossSample:
    """Per-user additional losses in dB (arrays of equal length, or scalars)."""

    shadow_db: np.ndarray
    atmospheric_db: np.ndarray
    scintillation_db: np.ndarray
    clutter_db: np.ndarray

    @property
    def total_db(self) -> np.ndarray:
        return self.shadow_db + self.atmospheric_db + self.scintillation_db + self.clutter_db

    @classmethod
    def zeros(cls, n: int) -> "LossSample":
        z = np.zeros(n)
        return cls(z, z.copy(), z.copy(), z.copy())

    def __len__(self) -> int:
        return len(np.atleast_1d(self.shadow_db))


def draw_losses(elevations_deg, propagation: Propagation, rng: np.random.Generator,
                table: LossTable | None = None, environment: str = "suburban",
                min_elevation_deg: float = 10.0) -> LossSample:
    """Independent loss draws for every user; pLOS gives all-zero samples."""
    if environment != "suburban":
        raise ValueError(f"unknown environment {environment!r}")
    el = np.atleast_1d(np.asarray(elevations_deg, dtype=float))
    if np.any(el < min_elevation_deg):
        raise ValueError(f"elevation below {min_elevation_deg} deg")
    if Propagation(propagation) is Propagation.PLOS:
        return LossSample.zeros(len(el))
    table = table or LossTable.load()
    sigma, clutter, atm, scint = table.lookup(el)
    z = rng.standard_normal((2, len(el)))
    return LossSample(sigma * z[0], atm, scint / 4 * z[1], clutter)


# --------------------------------------------------------------------------
# channel matrices
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray  # (n_users, n_cols)
    space: Space
    epoch: float
    noise_normalized: bool = True


@dataclass(frozen=True)
class LinkParams:
    """Everything besides geometry that enters a channel coefficient."""

    array: ArrayGeometry
    element: ElementModel
    bandwidth_hz: float


def channel_rows(uv, distance, rx_amplitude, noise_temperature, loss_db,
                 link: LinkParams) -> np.ndarray:
    """Vectorised feed-space coefficients, one row per (uv, distance) pair.

    h_n = g_tx,n g_rx / (4 pi d / lambda sqrt(L kappa B T)) exp(-j 2 pi d / lambda)
    """
    if link.bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    d = np.atleast_1d(np.asarray(distance, dtype=float))
    if np.any(d <= 0):
        raise ValueError("degenerate geometry: zero slant range")
    uv = np.atleast_2d(uv)
    lam = link.array.wavelength
    loss_lin = 10 ** (np.asarray(loss_db, dtype=float) / 10)
    noise = BOLTZMANN * link.bandwidth_hz * np.asarray(noise_temperature, dtype=float)
    amp = (link.element.amplitude(uv) * rx_amplitude
           / (4 * np.pi * d / lam * np.sqrt(loss_lin * noise)))
    # reduce d / lambda before the exponential to keep phase precision
    common = np.exp(-2j * np.pi * np.mod(d / lam, 1.0))
    return (amp * common)[:, None] * feed_phase_response(uv, link.array)


def feed_channel_row(position, sat: SatelliteState, link: LinkParams, loss_db: float,
                     rx_amplitude: complex, noise_temperature: float) -> np.ndarray:
    """Single-user feed-space row of length N_F."""
    position = np.atleast_2d(position)
    return channel_rows(uv_coordinates(position, sat), slant_range(position, sat),
                        rx_amplitude, noise_temperature, loss_db, link)[0]


@dataclass(frozen=True)
class SceneSnapshot:
    sat: SatelliteState
    users: UserPopulation
    losses: LossSample

    def __post_init__(self):
        if len(self.losses) != len(self.users):
            raise ValueError("one loss sample per user required")

    @property
    def epoch(self) -> float:
        return self.sat.epoch


def build_system_channel(scene: SceneSnapshot, link: LinkParams, rx_amplitude,
                         noise_temperature, rows=None) -> ChannelMatrix:
    """Feed-space matrix for all users of the scene, or the subset ``rows`` (indices)."""
    if len(scene.users) == 0:
        raise ValueError("empty scene")
    idx = np.arange(len(scene.users)) if rows is None else np.asarray(rows)
    pos = scene.users.positions[idx]
    rx = np.broadcast_to(rx_amplitude, (len(scene.users),))[idx]
    temp = np.broadcast_to(noise_temperature, (len(scene.users),))[idx]
    h = channel_rows(uv_coordinates(pos, scene.sat), slant_range(pos, scene.sat), rx, temp,
                     scene.losses.total_db[idx], link)
    return ChannelMatrix(h.reshape(idx.shape + (link.array.n_feeds,)), Space.FEED, scene.epoch)


def to_beam_space(h_feed: ChannelMatrix, bf: BeamformingMatrix | np.ndarray) -> ChannelMatrix:
    b = bf.entries if isinstance(bf, BeamformingMatrix) else np.asarray(bf)
    if h_feed.entries.shape[-1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: H has {h_feed.entries.shape[-1]} columns, "
                         f"B has {b.shape[0]} rows")
    return ChannelMatrix(h_feed.entries @ b, Space.BEAM, h_feed.epoch)


def beam_center_rows(centers_uv, sat: SatelliteState, link: LinkParams, rx_amplitude,
                     noise_temperature) -> np.ndarray:
    """Transmitter-side approximation: each row evaluated at a beam-centre ground point, no losses."""
    centers_uv = np.atleast_2d(centers_uv)
    ground = uv_to_ground(centers_uv, sat)
    return channel_rows(uv_coordinates(ground, sat), slant_range(ground, sat), rx_amplitude,
                        noise_temperature, np.zeros(len(centers_uv)), link)


def beam_center_channel_row(center_uv, sat: SatelliteState, link: LinkParams, rx_amplitude,
                            noise_temperature) -> np.ndarray:
    return beam_center_rows(center_uv, sat, link, rx_amplitude, noise_temperature)[0]


# --------------------------------------------------------------------------
# t0 -> t1
# --------------------------------------------------------------------------

def scene_losses(sat: SatelliteState, users: UserPopulation, propagation: Propagation,
                 rng: np.random.Generator, table: LossTable | None = None,
                 min_elevation_deg: float = 10.0) -> LossSample:
    return draw_losses(elevation_deg(users.positions, sat), propagation, rng, table,
                       min_elevation_deg=min_elevation_deg)


def evolve_scene(scene: SceneSnapshot, budget: DelayBudget | float, propagation: Propagation,
                 rng: np.random.Generator, table: LossTable | None = None,
                 min_elevation_deg: float = 10.0) -> SceneSnapshot:
    """Satellite and users advanced by the delay; every stochastic loss redrawn."""
    dt = budget.delta_t if isinstance(budget, DelayBudget) else float(budget)
    if dt < 0:
        raise ValueError("delta_t must be non-negative")
    sat = propagate_satellite(scene.sat, dt)
    pos, vel = move_users(scene.users.positions, scene.users.velocities, dt)
    users = replace(scene.users, positions=pos, velocities=vel)
    losses = scene_losses(sat, users, propagation, rng, table, min_elevation_deg)
    return SceneSnapshot(sat, users, losses)
