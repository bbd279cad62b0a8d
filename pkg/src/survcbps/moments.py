"""Estimating functions for the covariate-balancing propensity score.

For subject i with treatment D, covariates X, follow-up Y, event indicator
Delta, and propensity pi = expit(X' beta) clipped to [eps, 1 - eps], the
stacked moment vector has p + 2 components:

    balance:      (D/pi - (1 - D)/(1 - pi)) * X                      (p rows)
    calibration:  D * Delta / (pi * K1(Y)) - 1                       (1 row)
                  (1 - D) * Delta / ((1 - pi) * K0(Y)) - 1           (1 row)

where K1, K0 are the per-arm censoring survival curves. At the true
coefficient vector all p + 2 components have expectation zero; the two
calibration rows pin the total inverse-probability mass in each arm.

No intercept column is added implicitly; callers who want one must include
a constant covariate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .censoring import CensorSurvival
from .data import Dataset, ObservedRecord
from .errors import InputError


@dataclass(frozen=True)
class PropensityParams:
    """Coefficient vector and clipping bound eps for pi in [eps, 1 - eps]."""

    beta: np.ndarray
    clip: float = 0.01

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise InputError("beta must be a finite vector")
        if not 0.0 < self.clip < 0.5:
            raise InputError("clip must lie in (0, 0.5)")
        object.__setattr__(self, "beta", beta)
        beta.setflags(write=False)


@dataclass(frozen=True)
class GValue:
    """Stacked moment value for a single record."""

    balance: np.ndarray
    cal_treated: float
    cal_control: float

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate(
            (self.balance, [self.cal_treated], [self.cal_control])
        )


def propensity(params: PropensityParams, x):
    """Clipped logistic propensity; x is one covariate vector or a matrix."""
    x = np.asarray(x, dtype=float)
    raw = expit(x @ params.beta)
    out = np.clip(raw, params.clip, 1.0 - params.clip)
    if out.ndim == 0:
        return float(out)
    return out


def g_balance(params: PropensityParams, record: ObservedRecord) -> np.ndarray:
    pi = propensity(params, record.x)
    return (record.d / pi - (1 - record.d) / (1.0 - pi)) * record.x


def g_censor(
    params: PropensityParams,
    record: ObservedRecord,
    k1: CensorSurvival,
    k0: CensorSurvival,
):
    """The two calibration components for one record."""
    pi = propensity(params, record.x)
    k1y = k1.evaluate(record.y)
    k0y = k0.evaluate(record.y)
    cal1 = record.d * record.delta / (pi * k1y) - 1.0
    cal0 = (1 - record.d) * record.delta / ((1.0 - pi) * k0y) - 1.0
    return float(cal1), float(cal0)


def g_value(
    params: PropensityParams,
    record: ObservedRecord,
    k1: CensorSurvival,
    k0: CensorSurvival,
) -> GValue:
    cal1, cal0 = g_censor(params, record, k1, k0)
    return GValue(
        balance=g_balance(params, record), cal_treated=cal1, cal_control=cal0
    )


def _row_pieces(beta, clip, x, d, delta, k1y, k0y):
    """Per-row values and derivative scalars shared by g and its Jacobian.

    Returns (pi, a, cal1, cal0, b, dc1, dc0) where

        a    coefficient of X in the balance rows,
        b    coefficient of X X' in d(balance)/d(beta),
        dc1  coefficient of X in d(cal1)/d(beta),
        dc0  coefficient of X in d(cal0)/d(beta).

    Rows whose raw propensity falls outside the clip interval contribute
    zero derivative (the clipped score is locally constant there).
    """
    raw = expit(x @ beta)
    pi = np.clip(raw, clip, 1.0 - clip)
    free = (raw > clip) & (raw < 1.0 - clip)
    om = 1.0 - pi
    a = d / pi - (1.0 - d) / om
    cal1 = d * delta / (pi * k1y) - 1.0
    cal0 = (1.0 - d) * delta / (om * k0y) - 1.0
    b = np.where(free, -(d * om / pi + (1.0 - d) * pi / om), 0.0)
    dc1 = np.where(free, -d * delta * om / (pi * k1y), 0.0)
    dc0 = np.where(free, (1.0 - d) * delta * pi / (om * k0y), 0.0)
    return pi, a, cal1, cal0, b, dc1, dc0


def _gmat_arrays(beta, clip, x, d, delta, k1y, k0y):
    """n x (p + 2) stacked moment matrix from raw arrays."""
    _, a, cal1, cal0, _, _, _ = _row_pieces(beta, clip, x, d, delta, k1y, k0y)
    return np.concatenate(
        (a[:, None] * x, cal1[:, None], cal0[:, None]), axis=1
    )


def _mean_jacobian_arrays(beta, clip, x, d, delta, k1y, k0y):
    """(p + 2) x p Jacobian of the column means of the stacked matrix."""
    n = x.shape[0]
    _, _, _, _, b, dc1, dc0 = _row_pieces(beta, clip, x, d, delta, k1y, k0y)
    top = (x * b[:, None]).T @ x / n
    row1 = dc1 @ x / n
    row0 = dc0 @ x / n
    return np.vstack((top, row1, row0))


def _profile_grad_arrays(beta, clip, x, d, delta, k1y, k0y, lam, row_scale):
    """sum_i row_scale_i * J_i' lam, the chain-rule gradient in beta.

    J_i' lam collapses to a scalar multiple of x_i because every moment
    component depends on beta only through x_i' beta.
    """
    p = x.shape[1]
    _, _, _, _, b, dc1, dc0 = _row_pieces(beta, clip, x, d, delta, k1y, k0y)
    coeff = b * (x @ lam[:p]) + dc1 * lam[p] + dc0 * lam[p + 1]
    return x.T @ (row_scale * coeff)


def _k_vectors(data: Dataset, k1: CensorSurvival, k0: CensorSurvival):
    return k1.evaluate(data.y), k0.evaluate(data.y)


def stack_g(
    params: PropensityParams,
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
) -> np.ndarray:
    """All n stacked moment rows as an n x (p + 2) matrix."""
    if params.beta.shape[0] != data.p:
        raise InputError("beta length must equal the number of covariates")
    k1y, k0y = _k_vectors(data, k1, k0)
    return _gmat_arrays(
        params.beta, params.clip, data.x, data.d.astype(float),
        data.delta.astype(float), k1y, k0y,
    )


def jacobian_g(
    params: PropensityParams,
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
) -> np.ndarray:
    """Derivative of the stacked moment column means w.r.t. beta."""
    if params.beta.shape[0] != data.p:
        raise InputError("beta length must equal the number of covariates")
    k1y, k0y = _k_vectors(data, k1, k0)
    return _mean_jacobian_arrays(
        params.beta, params.clip, data.x, data.d.astype(float),
        data.delta.astype(float), k1y, k0y,
    )
