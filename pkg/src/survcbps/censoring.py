"""Censoring survival curves for inverse-probability-of-censoring weighting.

The censoring distribution is estimated per treatment arm with the
product-limit estimator applied to the flipped indicator: rows with
``delta == 0`` are the events of the censoring process, rows with
``delta == 1`` leave the risk set. Ties between an outcome event and a
censoring event at the same time are resolved by letting the outcome event
happen first, so a ``delta == 1`` subject at time t is not at risk for a
censoring event at t.

Curves are evaluated with the left limit K(u) = prod_{t_k < u} (1 - d_k/n_k)
(strict inequality) and clamped below at a configurable floor so that
weights 1/K stay bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DegenerateArmError, InputError


@dataclass(frozen=True)
class CensorSurvival:
    """Step function K(u) with jump times and post-jump values.

    ``values[k]`` is the curve value just after ``times[k]``; the value
    before the first jump is 1. All stored values are already clamped at
    ``floor``.
    """

    times: np.ndarray
    values: np.ndarray
    floor: float

    def __post_init__(self):
        if not 0.0 < self.floor < 1.0:
            raise InputError("floor must lie in (0, 1)")
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape:
            raise InputError("times and values must align")
        if times.size and np.any(np.diff(times) <= 0):
            raise InputError("jump times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        times.setflags(write=False)
        values.setflags(write=False)

    @classmethod
    def fit(cls, y, delta, floor: float = 0.05) -> "CensorSurvival":
        """Product-limit fit on raw arrays (single arm)."""
        y = np.asarray(y, dtype=float)
        delta = np.asarray(delta)
        if y.size == 0:
            raise DegenerateArmError("cannot fit a censoring curve on no records")
        if not 0.0 < floor < 1.0:
            raise InputError("floor must lie in (0, 1)")
        cens_times = np.unique(y[delta == 0])
        if cens_times.size == 0:
            return cls(times=np.empty(0), values=np.empty(0), floor=floor)
        # Censoring events at t; risk set = {y > t} plus censored rows at t,
        # outcome events at t having already left.
        d_k = np.array(
            [np.sum((y == t) & (delta == 0)) for t in cens_times], dtype=float
        )
        n_k = np.array(
            [np.sum(y > t) for t in cens_times], dtype=float
        ) + d_k
        surv = np.cumprod(1.0 - d_k / n_k)
        return cls(times=cens_times, values=np.maximum(surv, floor), floor=floor)

    def evaluate(self, u):
        """K at u (scalar or array), using the left limit at jump times."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or not np.all(np.isfinite(u)):
            raise InputError("evaluation points must be finite and >= 0")
        idx = np.searchsorted(self.times, u, side="left")
        padded = np.concatenate(([1.0], self.values))
        out = padded[idx]
        if out.ndim == 0:
            return float(out)
        return out


def fit_censoring_km(data: Dataset, group: int, floor: float = 0.05) -> CensorSurvival:
    """Censoring survival curve for one treatment arm of a dataset."""
    if group not in (0, 1):
        raise InputError("group must be 0 or 1")
    mask = data.d == group
    if not mask.any():
        raise DegenerateArmError(f"treatment arm d={group} is empty")
    return CensorSurvival.fit(data.y[mask], data.delta[mask], floor=floor)
