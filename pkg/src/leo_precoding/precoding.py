"""Linear precoders and power normalisations.

Convention: ``W`` has shape ``(N, N_sch)``; rows are feeds (or beam ports),
columns are scheduled users, so user k receives ``H[k] @ W[:, k]``.
Every function accepts a leading batch dimension (one matrix per frame).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import get_lapack_funcs

COND_LIMIT = 1e12


class Scheme(str, Enum):
    MB = "mb"
    SS_MMSE = "ss-mmse"
    MMSE = "mmse"
    NONE = "none"


class Normalization(str, Enum):
    SPC = "spc"
    PAC = "pac"
    MPC = "mpc"
    RAW = "raw"


class PrecodingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrecodingMatrix:
    entries: np.ndarray
    space: str
    scheme: Scheme
    normalization: Normalization = Normalization.RAW


def regularization_from_snr(snr) -> np.ndarray:
    snr = np.asarray(snr, dtype=float)
    if np.any(~(snr > 0)):
        raise ValueError("expected SNR must be positive")
    return 1.0 / snr


def mb_precoder(bf: np.ndarray, beams, space: str = "feed") -> PrecodingMatrix:
    """Codebook precoder: user k gets the steering column of its beam.

    ``bf`` is the N_F x N_B beamforming matrix; in beam space the codebook is
    the identity over beam ports, so column k selects port ``beams[k]``.
    """
    bf = np.asarray(bf)
    beams = np.asarray(beams)
    n_beams = bf.shape[1]
    if np.any((beams < 0) | (beams >= n_beams)):
        raise IndexError("schedule references a nonexistent beam")
    if space == "feed":
        w = bf[:, beams]
    else:
        w = np.eye(n_beams, dtype=complex)[:, beams]
    return PrecodingMatrix(w, space, Scheme.MB)


def _hermitian_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``gram @ x = rhs`` for Hermitian positive-definite ``gram`` (batched).

    Cholesky factorisation per matrix; LAPACK's condition estimate guards
    against numerically singular systems.
    """
    batch = gram.shape[:-2]
    g = gram.reshape((-1,) + gram.shape[-2:])
    r = rhs.reshape((-1,) + rhs.shape[-2:])
    out = np.empty(np.broadcast_shapes(g.shape[:1], r.shape[:1]) + rhs.shape[-2:],
                   dtype=np.result_type(gram, rhs))
    for i in range(out.shape[0]):
        gi = g[i if len(g) > 1 else 0]
        try:
            factor = cho_factor(gi, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise PrecodingError("regularised Gram matrix is not positive definite") from None
        anorm = np.max(np.sum(np.abs(gi), axis=0))
        pocon, = get_lapack_funcs(('pocon',), (factor[0],))
        rcond, info = pocon(factor[0], anorm, uplo='L')
        if info != 0 or rcond * COND_LIMIT < 1:
            raise PrecodingError(f"regularised Gram matrix ill-conditioned (cond ~ {1 / rcond:.3g})")
        out[i] = cho_solve(factor, r[i if len(r) > 1 else 0], check_finite=False)
    return out.reshape(np.broadcast_shapes(batch, rhs.shape[:-2]) + rhs.shape[-2:])


def mmse_precoder(h: np.ndarray, alpha, space: str = "feed",
                  scheme: Scheme = Scheme.MMSE) -> PrecodingMatrix:
    """Regularised ZF: W = H^H (H H^H + diag(alpha))^-1, via a Cholesky solve."""
    h = np.asarray(h)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0)):
        raise ValueError("regularisation factors must be positive")
    k = h.shape[-2]
    gram = h @ np.conj(np.swapaxes(h, -1, -2))
    gram = gram + alpha[..., None] * np.eye(k) if alpha.ndim else gram + alpha * np.eye(k)
    # (G^-1 H)^H = H^H G^-1 because G is Hermitian
    x = _hermitian_solve(gram, h)
    return PrecodingMatrix(np.conj(np.swapaxes(x, -1, -2)), space, scheme)


def ss_mmse_precoder(h_hat: np.ndarray, alpha, space: str = "feed") -> PrecodingMatrix:
    """MMSE applied to the beam-centre channel approximation."""
    return mmse_precoder(h_hat, alpha, space, Scheme.SS_MMSE)


def _row_norms(w):
    return np.sqrt(np.sum(np.abs(w) ** 2, axis=-1))


def normalization_scaling(w: np.ndarray, mode: Normalization, p_t: float):
    """Scale factors turning a raw precoder into a normalised one.

    Returns ``(scalar, rows)``: the normalised matrix is ``scalar[..., None, None] * w``
    when ``rows`` is None (SPC, MPC, RAW), else ``rows[..., :, None] * w`` (PAC).
    """
    w = np.asarray(w)
    if p_t <= 0:
        raise ValueError("total power must be positive")
    mode = Normalization(mode)
    n = w.shape[-2]
    rows = _row_norms(w)
    if np.any(np.all(rows == 0, axis=-1)):
        raise ValueError("all-zero precoding matrix")
    if mode is Normalization.SPC:
        return np.sqrt(p_t / np.sum(rows**2, axis=-1)), None
    if mode is Normalization.MPC:
        return np.sqrt(p_t / (n * np.max(rows**2, axis=-1))), None
    if mode is Normalization.PAC:
        # zero rows carry no power and stay zero
        inv = np.divide(1.0, rows, out=np.zeros_like(rows), where=rows > 0)
        return None, np.sqrt(p_t / n) * inv
    return np.ones(w.shape[:-2]), None


def normalize_entries(w: np.ndarray, mode: Normalization, p_t: float) -> np.ndarray:
    w = np.asarray(w)
    scalar, rows = normalization_scaling(w, mode, p_t)
    if rows is not None:
        return rows[..., None] * w
    return np.asarray(scalar)[..., None, None] * w


def normalize(w: PrecodingMatrix, mode: Normalization, p_t: float) -> PrecodingMatrix:
    return replace(w, entries=normalize_entries(w.entries, mode, p_t),
                   normalization=Normalization(mode))


def total_power_w(p_density_dbw_mhz: float, bandwidth_hz: float) -> float:
    return 10 ** ((p_density_dbw_mhz + 10 * np.log10(bandwidth_hz / 1e6)) / 10)
