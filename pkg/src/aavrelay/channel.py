"""Radio-link models: probabilistic-LoS ground-to-air links, LoS air-to-air
links, and the coherent virtual-antenna-array air-to-ground link.

All gains are linear power ratios; noise is the configured PSD integrated
over each link's own bandwidth.  Functions are pure and vectorized where the
simulator needs matrices (one rate per SN/AAV pair).
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from .config import ChannelParams
from .world import AavState, SensorNode, World

_C = 299_792_458.0  # speed of light, m/s


def noise_power_w(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power over a bandwidth, from a dBm/Hz density."""
    return 10.0 ** ((psd_dbm_hz + 10.0 * math.log10(bandwidth_hz) - 30.0) / 10.0)


def fspl_db(distance_m, frequency_hz: float):
    """Free-space path loss in dB: 20log10(d) + 20log10(f) + 20log10(4*pi/c)."""
    return (
        20.0 * np.log10(distance_m)
        + 20.0 * np.log10(frequency_hz)
        + 20.0 * math.log10(4.0 * math.pi / _C)
    )


def p_los(elevation_deg, params: ChannelParams):
    """LoS probability of the ground-to-air link at an elevation angle.

    Sigmoid in the elevation angle (degrees): 1 / (1 + a*exp(-b*(theta - a))).
    Monotone nondecreasing on [0, 90].
    """
    theta = np.asarray(elevation_deg, dtype=float)
    if np.any(theta < 0) or np.any(theta > 90):
        raise ValueError("elevation angle must lie in [0, 90] degrees")
    out = 1.0 / (1.0 + params.sigmoid_a * np.exp(-params.sigmoid_b * (theta - params.sigmoid_a)))
    return out if out.ndim else float(out)


def _g2a_gain_arrays(
    sn_xyz: np.ndarray, aav_xyz: np.ndarray, params: ChannelParams
) -> np.ndarray:
    """Linear G2A gain matrix, shape (n_sn, n_aav)."""
    diff = sn_xyz[:, None, :] - aav_xyz[None, :, :]
    d3 = np.sqrt((diff**2).sum(-1))
    if np.any(d3 <= 0):
        raise ValueError("coincident SN/AAV positions")
    dz = np.abs(diff[..., 2])
    theta = np.degrees(np.arcsin(np.clip(dz / d3, -1.0, 1.0)))
    pl = p_los(theta, params)
    base_db = fspl_db(d3, params.carrier_frequency)
    loss_los = 10.0 ** ((base_db + params.eta_los_db) / 10.0)
    loss_nlos = 10.0 ** ((base_db + params.eta_nlos_db) / 10.0)
    return 1.0 / (pl * loss_los + (1.0 - pl) * loss_nlos)


def g2a_gain(sn: SensorNode, aav: AavState, params: ChannelParams) -> float:
    """Average linear channel power gain of one SN-AAV link."""
    return float(
        _g2a_gain_arrays(sn.position[None, :], aav.position[None, :], params)[0, 0]
    )


def g2a_rate(sn: SensorNode, aav: AavState, params: ChannelParams) -> float:
    """Uplink rate of one SN-AAV link in bits/second."""
    g = g2a_gain(sn, aav, params)
    sigma2 = noise_power_w(params.noise_psd_dbm_hz, params.per_sn_bandwidth)
    return params.per_sn_bandwidth * math.log2(1.0 + sn.transmit_power * g / sigma2)


def g2a_rate_matrix(world: World, params: ChannelParams) -> np.ndarray:
    """All SN-AAV uplink rates, shape (n_sn, n_aav)."""
    gains = _g2a_gain_arrays(world.sn_positions(), world.aav_positions(), params)
    powers = np.array([s.transmit_power for s in world.sensors])[:, None]
    sigma2 = noise_power_w(params.noise_psd_dbm_hz, params.per_sn_bandwidth)
    return params.per_sn_bandwidth * np.log2(1.0 + powers * gains / sigma2)


def a2a_broadcast_rate(source_index: int, world: World, params: ChannelParams) -> float:
    """Broadcast rate of one AAV: the minimum per-receiver rate so every
    other AAV receives the payload simultaneously."""
    n = len(world.aavs)
    if n < 2:
        raise ValueError("a2a broadcast needs at least 2 AAVs")
    if not 0 <= source_index < n:
        raise ValueError("source_index out of range")
    pos = world.aav_positions()
    sigma2 = noise_power_w(params.noise_psd_dbm_hz, params.per_aav_bandwidth)
    rates = []
    for jp in range(n):
        if jp == source_index:
            continue
        d = float(np.linalg.norm(pos[source_index] - pos[jp]))
        if d <= 0:
            raise ValueError("coincident AAV positions")
        gain = params.rho0 / d**params.alpha_a2a
        power = world.aavs[jp].transmit_power
        rates.append(params.per_aav_bandwidth * math.log2(1.0 + power * gain / sigma2))
    return min(rates)


def vaa_a2g_rate(world: World, params: ChannelParams) -> Tuple[float, float]:
    """Coherent-combining SNR and rate of the AAV swarm toward the BS.

    Amplitudes add before squaring, so N identical-geometry AAVs give N^2
    times the single-AAV SNR.
    """
    bs = np.asarray(world.config.bs_position, dtype=float)
    pos = world.aav_positions()
    d = np.sqrt(((pos - bs[None, :]) ** 2).sum(-1))
    if np.any(d <= 0):
        raise ValueError("AAV coincides with the BS")
    powers = np.array([a.transmit_power for a in world.aavs])
    amplitude = np.sqrt(powers * params.g0 * d ** (-params.alpha_a2g)).sum()
    sigma2 = noise_power_w(params.noise_psd_dbm_hz, params.total_bandwidth)
    snr = amplitude**2 / sigma2
    rate = params.total_bandwidth * math.log2(1.0 + snr)
    return float(snr), float(rate)
