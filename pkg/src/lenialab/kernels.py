"""Kernel construction: radial sums of Gaussian bumps, sampled on the lattice.

The radial profile is

    K(d) = sum_i b_i * exp(-((d / (r * R) - a_i)^2) / (2 * w_i^2))

evaluated at the Euclidean distance of every cell center in a (2R+1)^2
patch, zeroed outside radius r*R, then normalized to unit sum.  Unit-sum
normalization keeps sensed values on the same scale as cell values, which
is what the growth means (mu in [0.05, 0.5]) assume; the pre-normalization
sum is kept for diagnostics and for the normalization term of the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .params import DegenerateKernelError, Rule, RuleSet

_SUM_FLOOR = 1e-300


def radial_profile(rule: Rule, R: int, dist: np.ndarray) -> np.ndarray:
    """Bump-sum profile at Euclidean distances ``dist``, zero outside r*R."""
    rr = max(rule.r * R, 1e-9)
    x = dist / rr
    prof = np.zeros_like(dist, dtype=np.float64)
    for i in range(len(rule.b)):
        prof += rule.b[i] * np.exp(-((x - rule.a[i]) ** 2) / (2.0 * rule.w[i] ** 2))
    prof[dist > rule.r * R] = 0.0
    return prof


def distance_patch(R: int) -> np.ndarray:
    """Euclidean distances of cell centers on a (2R+1)^2 patch."""
    ax = np.arange(-R, R + 1, dtype=np.float64)
    return np.sqrt(ax[:, None] ** 2 + ax[None, :] ** 2)


def build_kernel(rule: Rule, R: int, return_sum: bool = False):
    """Normalized kernel patch for ``rule`` at radius ``R``.

    Returns the (2R+1)^2 float64 patch summing to 1, or ``(patch, raw_sum)``
    when ``return_sum`` is set.  Raises :class:`DegenerateKernelError` when
    every bump underflows to zero on the sampled lattice.
    """
    prof = radial_profile(rule, R, distance_patch(R))
    total = prof.sum()
    if not np.isfinite(total) or total < _SUM_FLOOR:
        raise DegenerateKernelError(
            f"kernel profile sums to {total!r}; normalization undefined"
        )
    if return_sum:
        return prof / total, float(total)
    return prof / total


def embed_kernel(patch: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Center a kernel patch at the origin of an HxW grid with wraparound."""
    H, W = shape
    R = patch.shape[0] // 2
    if patch.shape[0] > H or patch.shape[1] > W:
        raise ValueError(f"kernel {patch.shape} does not fit grid {shape}")
    full = np.zeros(shape, dtype=np.float64)
    full[:patch.shape[0], :patch.shape[1]] = patch
    return np.roll(full, (-R, -R), axis=(0, 1))


@dataclass
class CompiledRule:
    rule: Rule
    patch: np.ndarray
    raw_sum: float
    spectrum: np.ndarray  # rfft2 of the embedded kernel


@dataclass
class CompiledRules:
    """Per-grid-shape kernel spectra plus the step constants."""

    ruleset: RuleSet
    shape: tuple[int, int]
    dtype: np.dtype
    compiled: list[CompiledRule]

    @property
    def inv_T(self) -> float:
        return 1.0 / self.ruleset.T

    def by_source(self, c_src: int) -> list[CompiledRule]:
        return [c for c in self.compiled if c.rule.c_src == c_src]


def compile_rules(ruleset: RuleSet, shape: tuple[int, int],
                  dtype=np.float32) -> CompiledRules:
    dtype = np.dtype(dtype)
    cdtype = np.complex64 if dtype == np.float32 else np.complex128
    compiled = []
    for rule in ruleset.rules:
        R = ruleset.rule_radius(rule)
        patch, raw = build_kernel(rule, R, return_sum=True)
        spectrum = sfft.rfft2(embed_kernel(patch, shape)).astype(cdtype)
        compiled.append(CompiledRule(rule, patch, raw, spectrum))
    return CompiledRules(ruleset, tuple(shape), dtype, compiled)


def conv_spectral(field: np.ndarray, spectrum: np.ndarray) -> np.ndarray:
    """Circular convolution of ``field`` (HxW) with a precomputed spectrum."""
    shape = field.shape[-2:]
    return sfft.irfft2(sfft.rfft2(field, axes=(-2, -1)) * spectrum,
                       s=shape, axes=(-2, -1))


def conv_direct(field: np.ndarray, patch: np.ndarray) -> np.ndarray:
    """Circular convolution by explicit roll-and-accumulate.

    Slow reference path kept independent from the spectral implementation;
    used as the oracle in backend-equivalence checks.
    """
    R = patch.shape[0] // 2
    out = np.zeros_like(field, dtype=np.result_type(field, patch))
    for i in range(patch.shape[0]):
        for j in range(patch.shape[1]):
            v = patch[i, j]
            if v == 0.0:
                continue
            out += v * np.roll(field, (i - R, j - R), axis=(0, 1))
    return out
