"""Angle-delay power representation of the SFCRM and the CNN cost model.

The angle-delay channel power matrix (ADCPM) is

    G = (V_v kron V_h)^H  H  F^*  / sqrt(N_v N_h N_c),     P = E[|G|^2]

with centered DFT matrices on the two array axes and a plain DFT across
subcarriers. Max-pooling of P is the resolution-reduction step whose effect
on convolutional cost is captured by :func:`conv_cost`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class DftSet:
    v_v: np.ndarray
    v_h: np.ndarray
    f: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.v_v.shape[0] * self.v_h.shape[0], self.f.shape[0]


def _centered_dft(n: int) -> np.ndarray:
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    return np.exp(-2j * np.pi * a * (b - n / 2) / n) / math.sqrt(n)


def build_dft(n_v: int, n_h: int, n_c: int) -> DftSet:
    if min(n_v, n_h, n_c) < 1:
        raise ValueError("DFT dimensions must be >= 1")
    f_idx = np.arange(n_c)
    f = np.exp(-2j * np.pi * np.outer(f_idx, f_idx) / n_c) / math.sqrt(n_c)
    mats = [_centered_dft(n_v), _centered_dft(n_h), f]
    for m in mats:
        m.setflags(write=False)
    return DftSet(*mats)


def angle_delay_response(h: np.ndarray, dft: DftSet) -> np.ndarray:
    """G for one SFCRM (or a stack of them along a leading axis)."""
    n_v, n_h, n_c = dft.v_v.shape[0], dft.v_h.shape[0], dft.f.shape[0]
    h = np.asarray(h)
    if h.shape[-2:] != (n_v * n_h, n_c):
        raise ValueError(f"SFCRM shape {h.shape[-2:]} does not match DFT set {(n_v * n_h, n_c)}")
    lead = h.shape[:-2]
    cube = h.reshape(lead + (n_v, n_h, n_c))
    # (V_v kron V_h)^H applied as two mode products on the reshaped array
    g = np.einsum("ab,...acl->...bcl", dft.v_v.conj(), cube)
    g = np.einsum("cd,...bcl->...bdl", dft.v_h.conj(), g)
    g = g.reshape(lead + (n_v * n_h, n_c)) @ dft.f.conj()
    return g / math.sqrt(n_v * n_h * n_c)


def adcpm(h_realizations, dft: DftSet) -> np.ndarray:
    """Sample-mean ADCPM over one or more SFCRM realizations.

    Accepts a single 2-D matrix or an iterable / 3-D stack of them.
    """
    if isinstance(h_realizations, np.ndarray) and h_realizations.ndim == 2:
        stack = h_realizations[None]
    else:
        stack = np.stack(list(h_realizations)) if not isinstance(h_realizations, np.ndarray) else h_realizations
    if stack.shape[0] < 1:
        raise ValueError("need at least one realization")
    g = angle_delay_response(stack, dft)
    return np.mean(g.real ** 2 + g.imag ** 2, axis=0)


def maxpool(p: np.ndarray, a: int, b: int) -> np.ndarray:
    """Non-overlapping (a, b) max-pooling over the last two axes."""
    rows, cols = p.shape[-2:]
    if a < 1 or b < 1 or rows % a or cols % b:
        raise ValueError(f"pool factors ({a}, {b}) must divide shape ({rows}, {cols})")
    lead = p.shape[:-2]
    blocks = p.reshape(lead + (rows // a, a, cols // b, b))
    return blocks.max(axis=(-3, -1))


def normalize_adcpm(p: np.ndarray, ref_power: float | None = None, floor: float = 1e-12) -> np.ndarray:
    """Log-power image for the classifier.

    Without ``ref_power`` each map is scaled by its own peak so the maximum is
    0 (relative structure only). With ``ref_power`` every map is scaled by the
    same constant, which keeps the absolute received level visible.
    """
    p = np.asarray(p, dtype=float)
    if ref_power is None:
        peak = p.max(axis=(-2, -1), keepdims=True)
        peak = np.where(peak > 0, peak, 1.0)
        return np.log10(p / peak + floor)
    return np.log10(p / ref_power + floor)


# --------------------------------------------------------------------------
# convolutional cost model


@dataclass(frozen=True)
class ConvLayerCost:
    n_in: int
    n_out: int
    kernel: tuple[int, int]
    out_map: tuple[int, int]

    def __post_init__(self):
        if min(self.n_in, self.n_out, *self.kernel, *self.out_map) < 1:
            raise ValueError("all layer dimensions must be >= 1")

    @property
    def macs(self) -> int:
        return self.n_in * self.kernel[0] * self.kernel[1] * self.n_out * self.out_map[0] * self.out_map[1]


def conv_cost(layers: Iterable[ConvLayerCost]) -> int:
    """Multiply-accumulate count summed over convolutional layers."""
    layers = list(layers)
    if not layers:
        raise ValueError("cost model needs at least one layer")
    return sum(layer.macs for layer in layers)


def conv_output_size(m: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (m + 2 * padding - kernel) // stride + 1


def conv_stack_cost_model(
    input_shape: tuple[int, int],
    conv_stack: Sequence[tuple[int, int, int]],
    in_channels: int = 1,
) -> list[ConvLayerCost]:
    """Cost model for a plain conv stack of (out_channels, kernel, stride) layers with same-padding."""
    h, w = input_shape
    n_in = in_channels
    layers = []
    for n_out, k, s in conv_stack:
        h = conv_output_size(h, k, s, k // 2)
        w = conv_output_size(w, k, s, k // 2)
        layers.append(ConvLayerCost(n_in, n_out, (k, k), (h, w)))
        n_in = n_out
    return layers


def scale_maps(layers: Sequence[ConvLayerCost], a: int, b: int) -> list[ConvLayerCost]:
    """Same layers with every output map shrunk by (a, b); sizes must divide."""
    out = []
    for layer in layers:
        mh, mw = layer.out_map
        if mh % a or mw % b:
            raise ValueError(f"map {layer.out_map} not divisible by ({a}, {b})")
        out.append(ConvLayerCost(layer.n_in, layer.n_out, layer.kernel, (mh // a, mw // b)))
    return out


def speedup(cost_old: float, cost_new: float) -> float:
    if cost_new <= 0:
        raise ValueError("new cost must be > 0")
    return cost_old / cost_new


def speedup_from_reduction(a: int, b: int) -> int:
    """Speedup of a conv stack whose input is reduced by (a, b): every map term shrinks by a*b."""
    return a * b


def reduction_factors(old_shape: tuple[int, int], new_shape: tuple[int, int]) -> tuple[int, int]:
    (r0, c0), (r1, c1) = old_shape, new_shape
    if r0 % r1 or c0 % c1:
        raise ValueError(f"{new_shape} is not an integer reduction of {old_shape}")
    return r0 // r1, c0 // c1
