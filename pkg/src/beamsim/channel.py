"""Per-subcarrier downlink channel synthesis and SNR-controlled noise.

The channel for one BS-UE link is a sum over propagation paths; on
subcarrier k the contribution of a path with linear power rho, phase
theta and delay tau is

    sqrt(rho / K) * exp(j * (theta + 2*pi*k*tau*B/K)) * a(azimuth, elevation)

with a(.) the UPA array response, K the total subcarrier count and B the
bandwidth.  One transmit array, one receive port; no receive combining.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .geometry import AnglePair, UpaGeometry, array_response


@dataclass(frozen=True)
class RayPath:
    """One propagation path: power in dB, phase in radians, delay in seconds."""

    power_db: float
    phase_rad: float
    delay_s: float
    departure: AnglePair
    is_los: bool = False

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError(f"delay must be >= 0, got {self.delay_s}")

    @property
    def power_linear(self) -> float:
        return 10.0 ** (self.power_db / 10.0)


@dataclass(frozen=True)
class OfdmConfig:
    num_subcarriers: int
    bandwidth_hz: float
    selected: tuple = ()

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        sel = tuple(self.selected) if self.selected else tuple(range(self.num_subcarriers))
        if len(set(sel)) != len(sel):
            raise ValueError("selected subcarriers must be unique")
        if any(not 0 <= k < self.num_subcarriers for k in sel):
            raise ValueError("selected subcarrier index out of range")
        object.__setattr__(self, "selected", sel)


@dataclass
class ChannelTensor:
    """Complex entries shaped (num selected subcarriers, num elements)."""

    entries: np.ndarray
    geom: UpaGeometry
    ofdm: OfdmConfig

    def __post_init__(self):
        expected = (len(self.ofdm.selected), self.geom.num_elements)
        if self.entries.shape != expected:
            raise ValueError(f"entries shape {self.entries.shape} != {expected}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("channel entries must be finite")

    @property
    def energy(self) -> float:
        """Squared Frobenius norm over all stored entries."""
        return float(np.sum(np.abs(self.entries) ** 2))


def synthesize_channel(paths, geom: UpaGeometry, ofdm: OfdmConfig) -> ChannelTensor:
    """Sum the per-path contributions on every selected subcarrier."""
    paths = list(paths)
    if not paths:
        raise ValueError("cannot synthesize a channel from an empty path list")
    k = np.asarray(ofdm.selected, dtype=np.float64)
    big_k = float(ofdm.num_subcarriers)
    responses = np.stack([array_response(p.departure, geom) for p in paths])
    amp = np.array([np.sqrt(p.power_linear / big_k) for p in paths])
    phase0 = np.array([p.phase_rad for p in paths])
    delay = np.array([p.delay_s for p in paths])
    # coefficient of path l on subcarrier k: amp_l * exp(j*(phase_l + 2*pi*k*tau_l*B/K))
    phases = phase0[None, :] + 2.0 * np.pi * np.outer(k, delay) * ofdm.bandwidth_hz / big_k
    coeffs = amp[None, :] * np.exp(1j * phases)
    return ChannelTensor(entries=coeffs @ responses, geom=geom, ofdm=ofdm)


def noise_power_for_snr(h: ChannelTensor, snr_db: float) -> float:
    """Linear noise power that realizes the target SNR for this channel."""
    energy = h.energy
    if energy <= 0.0:
        raise NumericError("zero-energy channel has no defined SNR")
    return energy / 10.0 ** (snr_db / 10.0)


def snr_of(h: ChannelTensor, noise_power: float) -> float:
    """SNR in dB; exact inverse of noise_power_for_snr."""
    energy = h.energy
    if energy <= 0.0 or noise_power <= 0.0:
        raise NumericError("snr requires positive channel energy and noise power")
    return 10.0 * np.log10(energy / noise_power)


def add_noise(h: ChannelTensor, noise_power: float, seed: int) -> ChannelTensor:
    """Add i.i.d. circularly-symmetric complex Gaussian noise.

    Per-entry variance is noise_power / (number of entries) so the
    expected total injected energy equals noise_power.  Deterministic in
    (h, noise_power, seed).
    """
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    if noise_power == 0.0:
        return ChannelTensor(entries=h.entries.copy(), geom=h.geom, ofdm=h.ofdm)
    rng = np.random.default_rng(seed)
    shape = h.entries.shape
    sigma = np.sqrt(noise_power / h.entries.size / 2.0)
    noise = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ChannelTensor(entries=h.entries + noise, geom=h.geom, ofdm=h.ofdm)
