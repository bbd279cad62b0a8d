"""Smoothly clipped absolute deviation penalty and its local approximation.

The penalty is defined through its derivative on t >= 0,

    p'(t) = lam * { 1(t <= lam) + (a*lam - t)_+ / ((a - 1)*lam) * 1(t > lam) },

which integrates (with p(0) = 0) to

    p(t) = lam * t                                        on [0, lam]
    p(t) = -(t^2 - 2*a*lam*t + lam^2) / (2*(a - 1))       on (lam, a*lam]
    p(t) = lam^2 * (a + 1) / 2                            beyond a*lam.

The quadratic weight ``lqa_weight`` majorizes the penalty locally and is
what the outer optimization loop consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ScadParams:
    """Penalty level ``lam`` (> 0) and concavity knot ``a`` (> 2)."""

    lam: float
    a: float = 3.7

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InputError("lam must be a positive finite number")
        if not (np.isfinite(self.a) and self.a > 2):
            raise InputError("a must be finite and > 2")


def scad_derivative(t, params: ScadParams):
    """p'(t) for t >= 0; accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("scad_derivative is defined for t >= 0")
    lam, a = params.lam, params.a
    inner = t <= lam
    out = np.where(
        inner,
        lam,
        np.maximum(a * lam - t, 0.0) / (a - 1.0),
    )
    if out.ndim == 0:
        return float(out)
    return out


def scad_value(t, params: ScadParams):
    """p(t) for t >= 0: the antiderivative of scad_derivative with p(0) = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("scad_value is defined for t >= 0")
    lam, a = params.lam, params.a
    flat = lam * lam * (a + 1.0) / 2.0
    mid = -(t * t - 2.0 * a * lam * t + lam * lam) / (2.0 * (a - 1.0))
    out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, flat))
    if out.ndim == 0:
        return float(out)
    return out


def lqa_weight(beta_j, params: ScadParams, eps: float = 1e-6):
    """Local quadratic weight p'(|b|) / (|b| + eps) at the current iterate."""
    if eps < 0:
        raise InputError("eps must be >= 0")
    b = np.abs(np.asarray(beta_j, dtype=float))
    out = scad_derivative(b, params) / (b + eps)
    if np.any(~np.isfinite(np.atleast_1d(out))):
        raise InputError("lqa_weight is undefined when |beta| + eps == 0")
    if np.ndim(out) == 0:
        return float(out)
    return out
