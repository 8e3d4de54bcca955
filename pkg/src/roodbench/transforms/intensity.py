"""Voxelwise and filtering corruptions: Rician noise, gamma contrast, Gaussian smoothing, bias field."""
from __future__ import annotations

import itertools
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.ndimage import convolve1d

from ..volume import Volume, VolumeError

__all__ = [
    "rician_noise",
    "apply_noise",
    "apply_gamma",
    "gaussian_kernel1d",
    "apply_smoothing",
    "BIAS_MONOMIALS",
    "bias_field",
    "sample_bias_coefficients",
    "apply_bias_field",
    "bias_field_from_coefficients",
]


def rician_noise(data: np.ndarray, sigma_g: float, rng: np.random.Generator) -> np.ndarray:
    """Magnitude of ``data`` plus complex white Gaussian noise of per-channel std ``sigma_g``."""
    real = rng.normal(0.0, sigma_g, size=data.shape) if sigma_g > 0 else np.zeros(data.shape)
    imag = rng.normal(0.0, sigma_g, size=data.shape) if sigma_g > 0 else np.zeros(data.shape)
    return np.hypot(data + real, imag)


def apply_noise(v: Volume, sigma_ratio: float, rng: np.random.Generator) -> Volume:
    """Rician noise whose Gaussian std is ``sigma_ratio`` times the image intensity std."""
    if sigma_ratio < 0:
        raise VolumeError(f"sigma_ratio must be non-negative, got {sigma_ratio}")
    sigma_img = float(v.data.std())
    if not sigma_img > 0:
        raise VolumeError("noise is scaled by image std, which is zero for a constant image")
    return v.with_data(rician_noise(v.data, sigma_ratio * sigma_img, rng))


def apply_gamma(v: Volume, gamma: float) -> Volume:
    """Gamma curve on intensities rescaled to [0, 1], mapped back to the original range."""
    if not gamma > 0:
        raise VolumeError(f"gamma must be positive, got {gamma}")
    lo = float(v.data.min())
    hi = float(v.data.max())
    span = hi - lo
    if not span > 0:
        raise VolumeError("gamma correction needs a non-constant image")
    if gamma == 1.0:
        return v
    unit = np.clip((v.data - lo) / span, 0.0, 1.0)
    out = np.clip(np.power(unit, gamma) * span + lo, lo, hi)
    # lo + (hi - lo) need not round back to hi
    out[v.data == hi] = hi
    return v.with_data(out)


def gaussian_kernel1d(sigma_vox: float) -> np.ndarray:
    """Sampled Gaussian truncated at ``ceil(4 sigma)`` voxels, normalized to unit sum."""
    if sigma_vox <= 0:
        return np.ones(1)
    radius = int(math.ceil(4.0 * sigma_vox))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma_vox) ** 2)
    return k / k.sum()


def apply_smoothing(v: Volume, sigma_mm: float) -> Volume:
    """Separable Gaussian blur; ``sigma_mm`` is converted to voxels per axis."""
    if sigma_mm < 0:
        raise VolumeError(f"sigma_mm must be non-negative, got {sigma_mm}")
    if sigma_mm == 0:
        return v
    out = v.data
    for axis, step in enumerate(v.spacing):
        kernel = gaussian_kernel1d(sigma_mm / step)
        if kernel.size > 1:
            out = convolve1d(out, kernel, axis=axis, mode="nearest")
    return v.with_data(out)


# (i, j, k) exponents of every monomial of total degree <= 3, in a fixed order.
BIAS_MONOMIALS: List[Tuple[int, int, int]] = [
    (i, j, k)
    for i, j, k in itertools.product(range(4), repeat=3)
    if i + j + k <= 3
]


def _unit_axis(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)


def bias_field(shape: Sequence[int], coefficients: Sequence[float]) -> np.ndarray:
    """Evaluate the cubic log-bias polynomial over [-1, 1]^3 sampled on ``shape``."""
    if len(coefficients) != len(BIAS_MONOMIALS):
        raise ValueError(f"expected {len(BIAS_MONOMIALS)} coefficients, got {len(coefficients)}")
    xs, ys, zs = (_unit_axis(n) for n in shape)
    px = np.stack([xs ** p for p in range(4)])
    py = np.stack([ys ** p for p in range(4)])
    pz = np.stack([zs ** p for p in range(4)])
    out = np.zeros(tuple(shape))
    for c, (i, j, k) in zip(coefficients, BIAS_MONOMIALS):
        if c != 0.0:
            out += c * px[i][:, None, None] * py[j][None, :, None] * pz[k][None, None, :]
    return out


def sample_bias_coefficients(coeff_bound: float, rng: np.random.Generator) -> Dict[str, object]:
    if coeff_bound < 0:
        raise VolumeError(f"coeff_bound must be non-negative, got {coeff_bound}")
    coeffs = rng.uniform(-coeff_bound, coeff_bound, size=len(BIAS_MONOMIALS))
    return {"coeff_bound": float(coeff_bound), "coefficients": [float(c) for c in coeffs]}


def bias_field_from_coefficients(v: Volume, coefficients: Sequence[float]) -> Volume:
    if not any(coefficients):
        return v
    return v.with_data(np.exp(bias_field(v.shape, coefficients)) * v.data)


def apply_bias_field(v: Volume, coeff_bound: float, rng: np.random.Generator) -> Volume:
    """Multiply by ``exp(B)`` where B has coefficients drawn from U(-b, b)."""
    realized = sample_bias_coefficients(coeff_bound, rng)
    return bias_field_from_coefficients(v, realized["coefficients"])
