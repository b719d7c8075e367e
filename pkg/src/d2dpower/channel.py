"""dB-domain path loss with log-normal shadowing, and unit conversions.

All link gains are kept in dB until the throughput/penalty math needs
linear watts. Path loss follows L1 + L2*log10(d) with a minimum-distance
clamp at d0, so the gain never exceeds -(L1 + L2*log10(d0)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .topology import Drop


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants.

    l2_db is dB per decade of distance (10x the path-loss exponent).
    enb_l1_db / enb_l2_db override the transmitter-to-eNB constants when
    set; by default eNB links use the same model as device links.
    noise_dbw is the per-channel receiver noise-plus-cellular floor.
    """

    l1_db: float = 30.0
    l2_db: float = 40.0
    d0_m: float = 1.0
    shadow_sigma_db: float = 8.0
    shadowing_enabled: bool = True
    noise_dbw: float = -130.0
    enb_l1_db: float | None = None
    enb_l2_db: float | None = None
    per_channel_shadowing: bool = False

    def __post_init__(self):
        if self.l2_db <= 0:
            raise ConfigurationError(f"l2_db must be positive, got {self.l2_db}")
        if self.d0_m <= 0:
            raise ConfigurationError(f"d0_m must be positive, got {self.d0_m}")
        if self.shadow_sigma_db < 0:
            raise ConfigurationError(
                f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}"
            )


@dataclass(frozen=True)
class GainTable:
    """Per-drop link gains in dB.

    g_d2d_db[i, j] is the gain from the transmitter of pair i to the
    receiver of pair j; g_enb_db[i, c] from the transmitter of pair i to
    eNB c. With per-channel shadowing both carry a trailing channel axis.
    """

    g_d2d_db: np.ndarray
    g_enb_db: np.ndarray


def _path_loss(d, l1: float, l2: float, d0: float):
    return l1 + l2 * np.log10(np.maximum(d, d0))


def path_loss_db(d, params: ChannelParams):
    """L1 + L2*log10(max(d, d0)); scalar in, scalar out."""
    out = _path_loss(np.asarray(d, dtype=float), params.l1_db, params.l2_db, params.d0_m)
    return float(out) if out.ndim == 0 else out


def build_gain_table(
    drop: Drop, params: ChannelParams, rng=None, n_channels: int | None = None
) -> GainTable:
    """Gain tables for one drop.

    Gains are -path_loss plus one Normal(0, sigma^2) dB shadowing draw per
    link when shadowing is enabled. The spectrum is flat: one gain covers
    all channels unless per_channel_shadowing is set, in which case each
    link draws an independent shadowing term per channel and the tables
    gain a trailing axis of length n_channels.
    """
    coords = drop.coords()
    tx = coords[:, 0:2]
    rx = coords[:, 2:4]
    centers = drop.layout.cell_centers
    d_d2d = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)
    d_enb = np.linalg.norm(tx[:, None, :] - centers[None, :, :], axis=2)

    g_d2d = -_path_loss(d_d2d, params.l1_db, params.l2_db, params.d0_m)
    l1e = params.l1_db if params.enb_l1_db is None else params.enb_l1_db
    l2e = params.l2_db if params.enb_l2_db is None else params.enb_l2_db
    g_enb = -_path_loss(d_enb, l1e, l2e, params.d0_m)

    if params.shadowing_enabled:
        if rng is None:
            raise ValueError("shadowing is enabled but no random generator was given")
        sigma = params.shadow_sigma_db
        if params.per_channel_shadowing:
            if n_channels is None:
                raise ValueError(
                    "per-channel shadowing requires n_channels to be given"
                )
            g_d2d = g_d2d[:, :, None] + rng.normal(0.0, sigma, g_d2d.shape + (n_channels,))
            g_enb = g_enb[:, :, None] + rng.normal(0.0, sigma, g_enb.shape + (n_channels,))
        else:
            g_d2d = g_d2d + rng.normal(0.0, sigma, g_d2d.shape)
            g_enb = g_enb + rng.normal(0.0, sigma, g_enb.shape)
    return GainTable(g_d2d, g_enb)


def _maybe_scalar(x, out):
    return float(out) if np.ndim(out) == 0 else out


def dbm_to_watt(p):
    out = 10.0 ** ((np.asarray(p, dtype=float) - 30.0) / 10.0)
    return _maybe_scalar(p, out)


def watt_to_dbm(w):
    out = 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0
    return _maybe_scalar(w, out)


def dbw_to_watt(p):
    out = 10.0 ** (np.asarray(p, dtype=float) / 10.0)
    return _maybe_scalar(p, out)


def watt_to_dbw(w):
    out = 10.0 * np.log10(np.asarray(w, dtype=float))
    return _maybe_scalar(w, out)


def dbm_to_dbw(p):
    out = np.asarray(p, dtype=float) - 30.0
    return _maybe_scalar(p, out)
