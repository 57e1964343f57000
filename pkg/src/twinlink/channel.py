"""MIMO-OFDM space-frequency channel synthesis from path lists."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .scene import PathRecord


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform planar array at the BS; spacings are in wavelengths."""

    n_v: int = 8
    n_h: int = 16
    spacing_v: float = 0.8
    spacing_h: float = 0.5

    def __post_init__(self):
        if self.n_v < 1 or self.n_h < 1:
            raise ValueError("array needs at least one element per axis")
        if self.spacing_v <= 0 or self.spacing_h <= 0:
            raise ValueError("element spacings must be > 0")

    @property
    def n_antennas(self) -> int:
        return self.n_v * self.n_h


@dataclass(frozen=True)
class OfdmConfig:
    f_c: float = 28e9
    bandwidth: float = 400e6
    n_c: int = 512
    symbol_power: float = 1.0

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        if self.symbol_power <= 0:
            raise ValueError("symbol_power must be > 0")

    def subcarrier_frequencies(self) -> np.ndarray:
        """Baseband subcarrier offsets f_l = l * B / N_c."""
        return np.arange(self.n_c) * (self.bandwidth / self.n_c)


@dataclass(frozen=True)
class NoiseModel:
    """AWGN at a target SNR; ``snr_db = inf`` means noiseless."""

    snr_db: float
    rng_seed: int = 0

    def sigma_z_sq(self, signal_power: float, symbol_power: float = 1.0) -> float:
        """Noise variance giving SNR = symbol_power * signal_power / sigma_z^2."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return symbol_power * signal_power / 10.0 ** (self.snr_db / 10.0)


def steering_vector(array: ArrayConfig, azimuth, elevation) -> np.ndarray:
    """Array response e_v(elevation) kron e_h(azimuth, elevation).

    Scalar angles give a vector of length ``n_v * n_h``; array-valued angles
    give one column per angle pair.
    """
    az = np.atleast_1d(np.asarray(azimuth, dtype=float))
    el = np.atleast_1d(np.asarray(elevation, dtype=float))
    m = np.arange(array.n_v)[:, None]
    n = np.arange(array.n_h)[:, None]
    e_v = np.exp(-2j * np.pi * array.spacing_v * m * np.sin(el)[None, :])
    e_h = np.exp(-2j * np.pi * array.spacing_h * n * (np.cos(el) * np.sin(az))[None, :])
    e = (e_v[:, None, :] * e_h[None, :, :]).reshape(array.n_antennas, -1)
    if np.ndim(azimuth) == 0 and np.ndim(elevation) == 0:
        return e[:, 0]
    return e


def path_arrays(paths: Sequence[PathRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    gains = np.array([p.gain for p in paths], dtype=complex)
    delays = np.array([p.delay for p in paths], dtype=float)
    az = np.array([p.azimuth for p in paths], dtype=float)
    el = np.array([p.elevation for p in paths], dtype=float)
    return gains, delays, az, el


def cfr(paths: Sequence[PathRecord], l: int, array: ArrayConfig, ofdm: OfdmConfig) -> np.ndarray:
    """Channel frequency response across the array at subcarrier ``l``."""
    if not 0 <= l < ofdm.n_c:
        raise ValueError(f"subcarrier index {l} outside [0, {ofdm.n_c})")
    if not paths:
        return np.zeros(array.n_antennas, dtype=complex)
    gains, delays, az, el = path_arrays(paths)
    f_l = l * (ofdm.bandwidth / ofdm.n_c)
    coeff = gains * np.exp(-2j * np.pi * delays * f_l)
    return steering_vector(array, az, el) @ coeff


def sfcrm(paths: Sequence[PathRecord], array: ArrayConfig, ofdm: OfdmConfig) -> np.ndarray:
    """Space-frequency response matrix H of shape (n_v * n_h, n_c)."""
    if not paths:
        return np.zeros((array.n_antennas, ofdm.n_c), dtype=complex)
    gains, delays, az, el = path_arrays(paths)
    phasors = np.exp(-2j * np.pi * np.outer(delays, ofdm.subcarrier_frequencies()))
    return steering_vector(array, az, el) @ (gains[:, None] * phasors)


def add_awgn(h: np.ndarray, noise: NoiseModel, ofdm: OfdmConfig) -> np.ndarray:
    """Channel estimate H + Z / sigma_s at the SNR requested by ``noise``.

    The noise variance is calibrated on the mean entry power of ``h`` so the
    per-entry SNR equals ``noise.snr_db``.
    """
    if math.isinf(noise.snr_db) and noise.snr_db > 0:
        return h.copy()
    if not math.isfinite(noise.snr_db):
        raise ValueError("snr_db must be finite or +inf")
    power = float(np.mean(np.abs(h) ** 2))
    if power == 0.0:
        raise ValueError("SNR is undefined for a zero-energy channel")
    var = noise.sigma_z_sq(power, ofdm.symbol_power) / ofdm.symbol_power
    rng = np.random.default_rng(noise.rng_seed)
    z = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    return h + math.sqrt(var / 2.0) * z


_DUMP_HEADER = struct.Struct("<HHI")


def dump_sfcrm(path: str | Path, h: np.ndarray, array: ArrayConfig) -> None:
    """Binary dump: 8-byte header (n_v, n_h as uint16; n_c as uint32), then row-major complex64."""
    n_c = h.shape[1]
    if h.shape[0] != array.n_antennas:
        raise ValueError("matrix rows do not match the array size")
    with open(path, "wb") as f:
        f.write(_DUMP_HEADER.pack(array.n_v, array.n_h, n_c))
        f.write(np.ascontiguousarray(h, dtype="<c8").tobytes())


def load_sfcrm(path: str | Path) -> tuple[np.ndarray, int, int]:
    raw = Path(path).read_bytes()
    n_v, n_h, n_c = _DUMP_HEADER.unpack_from(raw)
    h = np.frombuffer(raw, dtype="<c8", offset=_DUMP_HEADER.size).reshape(n_v * n_h, n_c)
    return h.astype(complex), n_v, n_h
