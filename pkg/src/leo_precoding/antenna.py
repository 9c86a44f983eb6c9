"""On-board planar array, element and terminal patterns, beamforming matrix."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import j1

from .geometry import BeamLattice, SPEED_OF_LIGHT, TerminalClass


@dataclass(frozen=True)
class ArrayGeometry:
    element_positions: np.ndarray  # (N_F, 3), antenna frame, metres
    wavelength: float

    @classmethod
    def planar(cls, nx: int, ny: int, frequency_hz: float, spacing_wavelengths: float = 0.5):
        """Rectangular ``nx`` x ``ny`` array in the antenna x-y plane, centred on the origin."""
        lam = SPEED_OF_LIGHT / frequency_hz
        d = spacing_wavelengths * lam
        xs = (np.arange(nx) - (nx - 1) / 2) * d
        ys = (np.arange(ny) - (ny - 1) / 2) * d
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pos = np.stack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)], axis=1)
        return cls(pos, lam)

    @property
    def n_feeds(self) -> int:
        return len(self.element_positions)

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength


@dataclass(frozen=True)
class BeamformingMatrix:
    entries: np.ndarray  # (N_F, N_B)
    lattice: BeamLattice


def _embed(uv):
    uv = np.asarray(uv, dtype=float)
    return np.concatenate([uv, np.zeros(uv.shape[:-1] + (1,))], axis=-1)


def beamforming_vector(c, array: ArrayGeometry) -> np.ndarray:
    """Unit-norm steering vector towards uv point ``c``: exp(-j k0 r_n . c) / sqrt(N_F)."""
    phase = array.k0 * (array.element_positions @ _embed(c))
    return np.exp(-1j * phase) / np.sqrt(array.n_feeds)


def beamforming_matrix(lattice: BeamLattice, array: ArrayGeometry) -> BeamformingMatrix:
    if lattice.n_beams == 0:
        raise ValueError("empty lattice")
    phase = array.k0 * (array.element_positions @ _embed(lattice.centers).T)
    return BeamformingMatrix(np.exp(-1j * phase) / np.sqrt(array.n_feeds), lattice)


# --------------------------------------------------------------------------
# element (transmit) pattern
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementModel:
    """Per-feed power pattern G0 cos^q(theta); ``isotropic`` ignores the angle.

    The exponent follows from the peak gain: a cos^q power pattern over the
    front hemisphere has directivity 2 (q + 1).
    """

    kind: str = "cosine"
    peak_gain_dbi: float = 10.7

    @property
    def peak_gain(self) -> float:
        return 10 ** (self.peak_gain_dbi / 10)

    @property
    def exponent(self) -> float:
        return max(self.peak_gain / 2 - 1, 0.0)

    def amplitude(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        if self.kind == "isotropic":
            return np.full(uv.shape[:-1], np.sqrt(self.peak_gain))
        if self.kind != "cosine":
            raise ValueError(f"unknown element model {self.kind!r}")
        cos_t = np.sqrt(np.clip(1 - np.sum(uv**2, axis=-1), 0.0, 1.0))
        return np.sqrt(self.peak_gain) * cos_t ** (self.exponent / 2)


def feed_phase_response(uv, array: ArrayGeometry) -> np.ndarray:
    """exp(+j k0 r_n . c) for every feed, shape ``(..., N_F)``.

    Element n sits r_n . c closer to a far-field point in direction c, hence the
    positive sign; with the steering vector above, (a(c) . b_l) peaks at c = c_l.
    """
    return np.exp(1j * array.k0 * (_embed(uv) @ array.element_positions.T))


def tx_feed_gains(uv, array: ArrayGeometry, element: ElementModel) -> np.ndarray:
    """Complex transmit gain of every feed toward direction(s) ``uv``: ``(..., N_F)``."""
    return element.amplitude(uv)[..., None] * feed_phase_response(uv, array)


def tx_feed_gain(feed_index: int, uv, array: ArrayGeometry, element: ElementModel) -> complex:
    r = array.element_positions[feed_index]
    phase = array.k0 * float(r @ _embed(uv))
    return complex(element.amplitude(uv) * np.exp(1j * phase))


# --------------------------------------------------------------------------
# terminal (receive) side
# --------------------------------------------------------------------------

def load_gain_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column text file: off-boresight angle [deg], gain [dBi]. ``#`` starts a comment."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns, got {data.shape[1]}")
    order = np.argsort(data[:, 0])
    return data[order, 0], data[order, 1]


@dataclass(frozen=True)
class TerminalRadioProfile:
    """Receive gain pattern plus noise temperature of a terminal class.

    ``pattern`` is one of ``parabolic`` (circular aperture, Airy roll-off),
    ``isotropic`` or ``table`` (sampled gain from ``table_path``).
    Noise temperature is derived from the G/T figure: T = G / (G/T).
    """

    terminal_class: TerminalClass
    peak_gain_dbi: float
    g_over_t_db_k: float
    pattern: str = "isotropic"
    aperture_efficiency: float = 0.65
    frequency_hz: float = 2.0e9
    table_path: str | None = None

    @property
    def noise_temperature(self) -> float:
        return 10 ** ((self.peak_gain_dbi - self.g_over_t_db_k) / 10)

    @property
    def aperture_radius(self) -> float:
        # G = eta (pi D / lambda)^2
        lam = SPEED_OF_LIGHT / self.frequency_hz
        g = 10 ** (self.peak_gain_dbi / 10)
        return lam * np.sqrt(g / self.aperture_efficiency) / (2 * np.pi)

    def first_null(self) -> float:
        """Off-boresight angle of the first null of the parabolic pattern."""
        lam = SPEED_OF_LIGHT / self.frequency_hz
        ka = 2 * np.pi / lam * self.aperture_radius
        return float(np.arcsin(min(3.8317059702075125 / ka, 1.0)))


def rx_gain(profile: TerminalRadioProfile, off_boresight) -> np.ndarray | complex:
    """Complex (amplitude) receive gain; phase is zero for every supported pattern."""
    theta = np.asarray(off_boresight, dtype=float)
    if np.any((theta < 0) | (theta > np.pi)):
        raise ValueError("off-boresight angle must lie in [0, pi]")
    g0 = 10 ** (profile.peak_gain_dbi / 10)
    if profile.pattern == "isotropic":
        power = np.full(theta.shape, g0)
    elif profile.pattern == "parabolic":
        lam = SPEED_OF_LIGHT / profile.frequency_hz
        x = 2 * np.pi / lam * profile.aperture_radius * np.sin(theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            airy = np.where(x == 0, 1.0, (2 * j1(x) / np.where(x == 0, 1.0, x)) ** 2)
        power = g0 * airy
    elif profile.pattern == "table":
        ang, gain_db = load_gain_table(profile.table_path)
        power = 10 ** (np.interp(np.degrees(theta), ang, gain_db) / 10)
    else:
        raise ValueError(f"unknown terminal pattern {profile.pattern!r}")
    amp = np.sqrt(power).astype(complex)
    return complex(amp) if amp.ndim == 0 else amp


DEFAULT_PROFILES = {
    # 3GPP-style NTN terminal budgets; configurable defaults
    TerminalClass.VSAT: TerminalRadioProfile(TerminalClass.VSAT, 39.7, 15.9, "parabolic"),
    TerminalClass.HANDHELD: TerminalRadioProfile(TerminalClass.HANDHELD, 0.0, -31.6, "isotropic"),
}
