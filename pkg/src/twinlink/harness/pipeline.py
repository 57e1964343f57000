"""Path lists to classifier-ready ADCPM images."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..channel import ArrayConfig, NoiseModel, OfdmConfig, add_awgn, sfcrm
from ..scene import Sample
from ..transform import angle_delay_response, build_dft, maxpool, normalize_adcpm

# RNG stream tags for the per-sample noise draws
NOISE_EVAL = 11
NOISE_AUGMENT = 12


def noise_seed(seed: int, stream: int, index: int, snr_db: float) -> int:
    snr_tag = int(round(snr_db * 100)) & 0xFFFFFFFF
    ss = np.random.SeedSequence([seed & (2**64 - 1), stream, index, snr_tag])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class AdcpmPipeline:
    """SFCRM -> optional AWGN -> ADCPM -> max-pool -> scaled log power.

    ``ref_power`` fixes the level that maps to 1.0; ``dynamic_range_db``
    is the span mapped onto [0, 1] below it (values under the floor sit at 0).
    """

    array: ArrayConfig
    ofdm: OfdmConfig
    pool: tuple[int, int] = (2, 4)
    ref_power: float = 1.0
    dynamic_range_db: float = 60.0

    @property
    def floor(self) -> float:
        return 10.0 ** (-self.dynamic_range_db / 10.0)

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.array.n_antennas // self.pool[0], self.ofdm.n_c // self.pool[1]

    def raw_maps(self, samples: Sequence[Sample], snr_db: float = math.inf, seed: int = 0,
                 stream: int = NOISE_EVAL, indices: Sequence[int] | None = None,
                 chunk: int = 256) -> np.ndarray:
        """Pooled linear-power ADCPMs, one per sample.

        Noise for sample i is seeded from (seed, stream, indices[i], snr), so a
        given sample sees the same draw regardless of batch composition.
        """
        dft = build_dft(self.array.n_v, self.array.n_h, self.ofdm.n_c)
        idx = range(len(samples)) if indices is None else indices
        noisy = not (math.isinf(snr_db) and snr_db > 0)
        out = np.empty((len(samples),) + self.image_shape)
        for start in range(0, len(samples), chunk):
            hs = []
            for s, i in zip(samples[start: start + chunk], idx[start: start + chunk]):
                h = sfcrm(s.paths, self.array, self.ofdm)
                if noisy:
                    h = add_awgn(h, NoiseModel(snr_db, noise_seed(seed, stream, i, snr_db)), self.ofdm)
                hs.append(h)
            g = angle_delay_response(np.stack(hs), dft)
            out[start: start + len(hs)] = maxpool(g.real ** 2 + g.imag ** 2, *self.pool)
        return out

    def to_images(self, maps: np.ndarray) -> np.ndarray:
        logp = normalize_adcpm(maps, ref_power=self.ref_power, floor=self.floor)
        return np.clip(1.0 + logp * (10.0 / self.dynamic_range_db), 0.0, None).astype(np.float32)

    def images(self, samples: Sequence[Sample], snr_db: float = math.inf, seed: int = 0,
               stream: int = NOISE_EVAL, indices: Sequence[int] | None = None) -> np.ndarray:
        return self.to_images(self.raw_maps(samples, snr_db, seed, stream, indices))

    def calibrated(self, samples: Sequence[Sample]) -> "AdcpmPipeline":
        """Copy whose reference level is the strongest pooled bin over ``samples``."""
        peak = float(self.raw_maps(samples).max())
        if peak <= 0:
            raise ValueError("calibration set carries no energy")
        return AdcpmPipeline(self.array, self.ofdm, self.pool, peak, self.dynamic_range_db)


def labels(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=float)
