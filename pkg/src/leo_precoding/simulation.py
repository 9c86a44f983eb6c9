"""Monte Carlo driver: scheduling, t0 estimation / t1 transmission, KPIs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd

from .antenna import (
    ArrayGeometry,
    ElementModel,
    TerminalRadioProfile,
    beamforming_matrix,
    rx_gain,
)
from .channel import (
    LinkParams,
    LossTable,
    Propagation,
    SceneSnapshot,
    beam_center_rows,
    channel_rows,
    evolve_scene,
    scene_losses,
)
from .config import CELL_AXES, CampaignConfig
from .geometry import (
    EARTH_RADIUS,
    SatelliteState,
    Scenario,
    TerminalClass,
    UserPopulation,
    build_beam_lattice,
    compute_delay_budget,
    drop_users,
    slant_range,
    uv_coordinates,
)
from .precoding import (
    Normalization,
    PrecodingError,
    Scheme,
    mb_precoder,
    mmse_precoder,
    normalization_scaling,
    regularization_from_snr,
    total_power_w,
)

log = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "cell_id", "space", "terminal", "scenario", "propagation", "power_dbw_mhz", "scheme",
    "normalization", "iteration", "frame", "user_id", "sinr_db", "sir_db", "se_bps_hz",
]

# per-iteration random streams, keyed so matched cells share draws
_STREAMS = ("drop", "heading", "schedule", "loss_t0", "loss_t1")


def iteration_rng(seed: int, iteration: int, stream: str) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(iteration, _STREAMS.index(stream)))
    return np.random.default_rng(ss)


# --------------------------------------------------------------------------
# KPIs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KpiRecord:
    config_fingerprint: str
    cell_id: int
    iteration: int
    frame: int
    user_id: int
    sinr_linear: float
    sir_linear: float
    se_bits_per_hz: float
    scheme: str
    normalization: str
    space: str


@dataclass(frozen=True)
class FrameSchedule:
    frame_index: int
    user_per_beam: list[int]


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray
    probabilities: np.ndarray

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalCdf":
        x = np.sort(np.asarray(samples, dtype=float))
        n = len(x)
        return cls(x, np.arange(1, n + 1) / n)


def frame_metrics(h: np.ndarray, w: np.ndarray):
    """SINR and SIR of every user for ``y = H W s + z`` with unit-variance noise.

    ``h`` is (..., K, N), ``w`` is (..., N, K). Returns two (..., K) arrays;
    SIR is +inf when a user sees no interference.
    """
    h, w = np.asarray(h), np.asarray(w)
    if h.shape[-1] != w.shape[-2] or h.shape[-2] != w.shape[-1]:
        raise ValueError(f"dimension mismatch: H {h.shape[-2:]} vs W {w.shape[-2:]}")
    return _metrics_from_product(h @ w)


def _metrics_from_product(hw: np.ndarray):
    g = np.abs(hw) ** 2
    signal = np.diagonal(g, axis1=-2, axis2=-1).copy()
    # sum the off-diagonal terms directly: row_sum - signal cancels badly at high SIR
    k = g.shape[-1]
    np.einsum("...ii->...i", g)[...] = 0.0
    interference = np.sum(g, axis=-1) if k > 1 else np.zeros_like(signal)
    sinr = signal / (1.0 + interference)
    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(interference > 0, signal / np.where(interference > 0, interference, 1.0),
                       np.inf)
    return sinr, sir


def spectral_efficiency(sinr):
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be non-negative")
    return np.log2(1.0 + sinr)


def schedule_frames(users_by_beam: dict[int, list[int]], rng: np.random.Generator) -> np.ndarray:
    """Random one-user-per-beam schedule covering every user.

    Returns an int array (frames, N_B) of user ids. Each beam serves its users
    in a uniformly random order; once exhausted it re-serves a uniformly drawn
    already-served user so every beam transmits in every frame.
    """
    beams = sorted(users_by_beam)
    for b in beams:
        if not users_by_beam[b]:
            raise ValueError(f"beam {b} has no users")
    n_frames = max(len(users_by_beam[b]) for b in beams)
    out = np.empty((n_frames, len(beams)), dtype=int)
    for col, b in enumerate(beams):
        ids = np.asarray(users_by_beam[b])
        order = rng.permutation(ids)
        extra = rng.choice(ids, n_frames - len(ids)) if n_frames > len(ids) else order[:0]
        out[:, col] = np.concatenate([order, extra])
    return out


def frame_schedules(table: np.ndarray) -> list[FrameSchedule]:
    return [FrameSchedule(i, row.tolist()) for i, row in enumerate(table)]


# --------------------------------------------------------------------------
# system set-up shared by every iteration of a campaign
# --------------------------------------------------------------------------

@dataclass
class System:
    config: CampaignConfig
    loss_table: LossTable = field(init=False)

    def __post_init__(self):
        self.loss_table = LossTable.load(self.config.loss_table, self.config.environment)

    @cached_property
    def sat0(self) -> SatelliteState:
        return SatelliteState.circular(self.config.altitude_m, self.config.inclination_deg)

    @cached_property
    def lattice(self):
        c = self.config.lattice
        return build_beam_lattice(c.n_rings, c.spacing_uv)

    @cached_property
    def array(self) -> ArrayGeometry:
        c = self.config.array
        return ArrayGeometry.planar(c.nx, c.ny, self.config.frequency_hz, c.spacing_wavelengths)

    @cached_property
    def bf(self) -> np.ndarray:
        return beamforming_matrix(self.lattice, self.array).entries

    @cached_property
    def link(self) -> LinkParams:
        c = self.config.array
        return LinkParams(self.array, ElementModel(c.element_model, c.element_gain_dbi),
                          self.config.bandwidth_hz)

    @cached_property
    def gateway(self) -> np.ndarray:
        gw = self.config.delay.gateway_ecef_m
        if gw is None:
            return EARTH_RADIUS * self.sat0.position / self.sat0.radius
        return np.asarray(gw, dtype=float)

    def profile(self, terminal: str) -> TerminalRadioProfile:
        p = getattr(self.config.terminal_profiles, terminal)
        return TerminalRadioProfile(TerminalClass(terminal), p.peak_gain_dbi, p.g_over_t_db_k,
                                    p.pattern, frequency_hz=self.config.frequency_hz,
                                    table_path=p.table_path)

    def receive(self, terminal: str):
        """(rx amplitude, true T, transmitter-side T estimate) for a terminal class."""
        prof = self.profile(terminal)
        # every terminal is pointed at the single satellite
        amp = rx_gain(prof, 0.0)
        t = prof.noise_temperature
        return amp, t, t * 10 ** (self.config.noise_temperature_error_db / 10)

    @property
    def speed_ms(self) -> float:
        return self.config.user_speed_kmh / 3.6


# --------------------------------------------------------------------------
# one Monte Carlo iteration
# --------------------------------------------------------------------------

def _rows_for(scene: SceneSnapshot, ids: np.ndarray, link: LinkParams, rx_amp, temp):
    pos = scene.users.positions[ids.ravel()]
    uv = uv_coordinates(pos, scene.sat)
    d = slant_range(pos, scene.sat)
    h = channel_rows(uv, d, rx_amp, temp, scene.losses.total_db[ids.ravel()], link)
    return h.reshape(ids.shape + (link.array.n_feeds,))


def _raw_precoder(scheme: Scheme, space: str, system: System, h0, h_hat, alpha, beams):
    """Unnormalised W: (N, K) when shared by all frames of a chunk, else (F, N, K)."""
    if scheme in (Scheme.MB, Scheme.NONE):
        return mb_precoder(system.bf, beams, space).entries
    if scheme is Scheme.SS_MMSE:
        return mmse_precoder(h_hat, alpha, space, scheme).entries
    return mmse_precoder(h0, alpha, space, scheme).entries


def _normalised_metrics(h1, w_raw, g_raw, norm: Normalization, p_t: float):
    """frame_metrics(h1, normalize(w_raw)) reusing h1 @ w_raw for scalar normalisations."""
    scalar, rows = normalization_scaling(w_raw, norm, p_t)
    if rows is not None:
        return frame_metrics(h1, rows[..., None] * w_raw)
    g = np.asarray(scalar)[..., None, None] * g_raw
    return _metrics_from_product(g)


class _Records:
    """Column buffers for one iteration; string axes are rebuilt from cell ids."""

    def __init__(self, cells, iteration):
        self.cells = cells
        self.index = {tuple(c[a] for a in CELL_AXES): i for i, c in enumerate(cells)}
        self.iteration = iteration
        self.parts = []

    def add(self, cell, frames, users, sinr, sir):
        n = sinr.size
        self.parts.append((np.full(n, self.index[cell]), frames.ravel(), users.ravel(),
                           sinr.ravel(), sir.ravel()))

    def frame(self) -> pd.DataFrame:
        if not self.parts:
            return empty_records()
        cell_id, frame, user, sinr, sir = (np.concatenate(c) for c in zip(*self.parts))
        order = np.lexsort((user, frame, cell_id))
        cell_id, frame, user, sinr, sir = (x[order] for x in (cell_id, frame, user, sinr, sir))
        data = {"cell_id": cell_id}
        for axis in CELL_AXES:
            values = [c[axis] for c in self.cells]
            if axis == "power_dbw_mhz":
                data[axis] = np.asarray(values, dtype=float)[cell_id]
            else:
                cats = sorted(set(values))
                codes = np.array([cats.index(v) for v in values])[cell_id]
                data[axis] = pd.Categorical.from_codes(codes, categories=cats)
        data["iteration"] = np.full(len(cell_id), self.iteration)
        data["frame"] = frame
        data["user_id"] = user
        with np.errstate(divide="ignore"):
            data["sinr_db"] = 10 * np.log10(sinr)
            data["sir_db"] = 10 * np.log10(sir)
        data["se_bps_hz"] = spectral_efficiency(sinr)
        return pd.DataFrame(data)[RECORD_COLUMNS]


def run_iteration(config: CampaignConfig, iteration: int, system: System | None = None,
                  skipped: list | None = None) -> pd.DataFrame:
    """All configured cells for one seeded iteration, as a record table.

    Every cell of the iteration sees the same user drop, headings, schedule and
    loss draws, so schemes, normalisations, powers, terminal classes, scenarios
    and propagation conditions are compared on matched samples.
    """
    system = system or System(config)
    cfg = config
    records = _Records(cfg.cells(), iteration)
    lattice, sat0 = system.lattice, system.sat0
    n_beams = lattice.n_beams

    drop = drop_users(lattice, sat0, cfg.user_density_per_km2,
                      iteration_rng(cfg.seed, iteration, "drop"), cfg.footprint_overlap,
                      Scenario.PUBLIC_SAFETY, system.speed_ms,
                      heading_rng=iteration_rng(cfg.seed, iteration, "heading"))
    schedule = schedule_frames(drop.users_by_beam(n_beams),
                               iteration_rng(cfg.seed, iteration, "schedule"))
    n_frames = schedule.shape[0]
    beams = np.arange(n_beams)
    budget = compute_delay_budget(sat0, drop.positions, system.gateway, cfg.delay.t_p_s,
                                  cfg.delay.t_ad_s, cfg.delay.mode)
    if cfg.delay.delta_t_override_s is not None:
        budget = cfg.delay.delta_t_override_s
    powers = [(p, total_power_w(p, cfg.bandwidth_hz)) for p in cfg.power_density_dbw_mhz]

    for scenario in cfg.scenarios:
        moving = scenario == Scenario.PUBLIC_SAFETY.value
        vel = drop.velocities if moving else np.zeros_like(drop.positions)
        users = UserPopulation(drop.ids, drop.positions, vel, drop.beam, Scenario(scenario))
        for propagation in cfg.propagations:
            prop = Propagation(propagation)
            losses0 = scene_losses(sat0, users, prop, iteration_rng(cfg.seed, iteration, "loss_t0"),
                                   system.loss_table, cfg.min_elevation_deg)
            scene0 = SceneSnapshot(sat0, users, losses0)
            scene1 = evolve_scene(scene0, budget, prop,
                                  iteration_rng(cfg.seed, iteration, "loss_t1"),
                                  system.loss_table, cfg.min_elevation_deg)
            for terminal in cfg.terminals:
                rx_amp, temp, temp_est = system.receive(terminal)
                h_hat_feed = beam_center_rows(lattice.centers, sat0, system.link, rx_amp, temp_est)
                # beam-centre link gain towards each beam's own centre
                gain_bc = np.abs(np.sum(h_hat_feed * system.bf.T, axis=1)) ** 2
                for start in range(0, n_frames, cfg.frame_chunk):
                    ids = schedule[start:start + cfg.frame_chunk]
                    frames = np.broadcast_to(np.arange(start, start + len(ids))[:, None], ids.shape)
                    h0_feed = _rows_for(scene0, ids, system.link, rx_amp, temp)
                    h1_feed = _rows_for(scene1, ids, system.link, rx_amp, temp)
                    for space in cfg.spaces:
                        if space == "beam":
                            h0, h1 = h0_feed @ system.bf, h1_feed @ system.bf
                            h_hat = h_hat_feed @ system.bf
                        else:
                            h0, h1, h_hat = h0_feed, h1_feed, h_hat_feed
                        shared = {}  # power-independent products (codebook schemes)
                        for power, p_t in powers:
                            if cfg.regularization == "link_budget":
                                snr = p_t / n_beams * gain_bc
                            else:
                                snr = np.full(n_beams, p_t / n_beams)
                            alpha = regularization_from_snr(snr)
                            for scheme_name in cfg.schemes:
                                scheme = Scheme(scheme_name)
                                key0 = (space, terminal, scenario, propagation, power, scheme_name)
                                codebook = scheme in (Scheme.MB, Scheme.NONE)
                                if codebook and "mb" in shared:
                                    w_raw, g_raw = shared["mb"]
                                else:
                                    try:
                                        w_raw = _raw_precoder(scheme, space, system, h0, h_hat,
                                                              alpha, beams)
                                    except PrecodingError as exc:
                                        log.warning("iteration %d cell %s frames %d+ skipped: %s",
                                                    iteration, key0, start, exc)
                                        if skipped is not None:
                                            skipped.append((iteration, key0, str(exc)))
                                        continue
                                    g_raw = h1 @ w_raw
                                    if codebook:
                                        shared["mb"] = (w_raw, g_raw)
                                for norm in cfg.normalizations:
                                    sinr, sir = _normalised_metrics(h1, w_raw, g_raw,
                                                                    Normalization(norm), p_t)
                                    records.add(key0 + (norm,), frames, ids, sinr, sir)
    return records.frame()


def empty_records() -> pd.DataFrame:
    return pd.DataFrame({k: pd.Series(dtype=_dtype(k)) for k in RECORD_COLUMNS})


def _dtype(col):
    if col in ("space", "terminal", "scenario", "propagation", "scheme", "normalization"):
        return "category"
    if col in ("cell_id", "iteration", "frame", "user_id"):
        return np.int64
    return float


# --------------------------------------------------------------------------
# campaign
# --------------------------------------------------------------------------

@dataclass
class CampaignResult:
    records: pd.DataFrame
    skipped: list = field(default_factory=list)

    def mean_se(self) -> pd.DataFrame:
        if self.records.empty:
            return pd.DataFrame(columns=["cell_id", *CELL_AXES, "mean_se_bps_hz"])
        g = self.records.groupby(["cell_id", *CELL_AXES], sort=True, observed=True)["se_bps_hz"].mean()
        return g.rename("mean_se_bps_hz").reset_index()

    def cdf(self, column: str, **filters) -> EmpiricalCdf:
        return EmpiricalCdf.from_samples(select(self.records, **filters)[column])


def select(records: pd.DataFrame, **filters) -> pd.DataFrame:
    mask = np.ones(len(records), dtype=bool)
    for key, value in filters.items():
        values = value if isinstance(value, (list, tuple, set)) else [value]
        mask &= records[key].isin(list(values)).to_numpy()
    return records[mask]


def _iteration_task(args):
    config, iteration = args
    skipped: list = []
    return run_iteration(config, iteration, skipped=skipped), skipped


def run_campaign(config: CampaignConfig | None, workers: int = 1) -> CampaignResult:
    """Every cell over every iteration; output ordered by (cell, iteration, frame, user).

    Iterations are independent and seeded by their index, so any number of
    worker processes yields the same bytes.
    """
    if config is None or not config.cells():
        return CampaignResult(empty_records())
    tasks = [(config, it) for it in range(config.iterations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_iteration_task, tasks))
    else:
        system = System(config)
        results = []
        for config_, it in tasks:
            skipped: list = []
            results.append((run_iteration(config_, it, system, skipped), skipped))
    frames = [r[0] for r in results]
    skipped = [s for r in results for s in r[1]]
    df = pd.concat(frames, ignore_index=True)
    df = df.sort_values(["cell_id", "iteration", "frame", "user_id"], kind="stable")
    return CampaignResult(df.reset_index(drop=True), skipped)
