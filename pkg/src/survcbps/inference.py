"""Treatment effect estimation and inference from a fitted propensity model.

Point estimates are ratio (Hajek) forms of the censoring-adjusted inverse
probability weighted means,

    mu1 = sum_i D_i Delta_i Y_i / (pi_i K1(Y_i)) / sum_i D_i Delta_i / (pi_i K1(Y_i))

and the control analogue with 1 - D, 1 - pi, K0. Uncensored subjects are
reweighted by the inverse of the arm-specific probability of remaining
uncensored, which restores the mean of the latent event time under
covariate-independent censoring within arm.

Two standard errors are computed:

``se_propensity``
    the delta-method term through the fitted coefficients only,
    sqrt(grad_h' Sigma grad_h / n), with Sigma the sandwich covariance of
    the active coefficients and grad_h the finite-difference gradient of
    the ATE map.

``se``
    the full first-order influence-function standard error. It adds the
    sampling variability of the weighted means themselves (and its
    covariance with the coefficient noise) to the propensity term. The
    confidence interval uses ``se``; the propensity-only term materially
    understates the spread of the estimator whenever the outcome carries
    noise beyond what the covariates explain, which is the usual case.

Estimation error in the censoring curves is ignored throughout.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .censoring import CensorSurvival
from .data import Dataset
from .errors import DegenerateArmError, InputError, SingularMatrixError
from .moments import PropensityParams, jacobian_g, propensity, stack_g
from .solver import PELFit


@dataclass(frozen=True)
class ATEResult:
    mu1: float
    mu0: float
    ate: float
    se: float
    ci_low: float
    ci_high: float
    median1: float
    median0: float
    median_diff: float
    n_effective_1: float
    n_effective_0: float
    warnings: tuple
    level: float = 0.95
    se_propensity: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "mu0": self.mu0,
            "ate": self.ate,
            "se": self.se,
            "se_propensity": self.se_propensity,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "median1": self.median1,
            "median0": self.median0,
            "median_diff": self.median_diff,
            "n_effective_1": self.n_effective_1,
            "n_effective_0": self.n_effective_0,
            "level": self.level,
            "warnings": list(self.warnings),
        }


def _ipcw_weight_arrays(y, delta, d, pi, k1y, k0y):
    w1 = d * delta / (pi * k1y)
    w0 = (1.0 - d) * delta / ((1.0 - pi) * k0y)
    return w1, w0


def _hajek_means(y, w1, w0):
    den1 = float(w1.sum())
    den0 = float(w0.sum())
    if den1 <= 0.0:
        raise DegenerateArmError("treated arm has zero total weight")
    if den0 <= 0.0:
        raise DegenerateArmError("control arm has zero total weight")
    return float((w1 * y).sum() / den1), float((w0 * y).sum() / den0)


def _kish(w):
    tot = float(w.sum())
    ss = float((w * w).sum())
    return tot * tot / ss if ss > 0 else 0.0


def ipcw_ipw_means(
    data: Dataset,
    params: PropensityParams,
    k1: CensorSurvival,
    k0: CensorSurvival,
):
    """Censoring-adjusted weighted outcome means (mu1, mu0)."""
    pi = propensity(params, data.x)
    w1, w0 = _ipcw_weight_arrays(
        data.y, data.delta.astype(float), data.d.astype(float),
        pi, k1.evaluate(data.y), k0.evaluate(data.y),
    )
    return _hajek_means(data.y, w1, w0)


def normalized_weights(data: Dataset, params: PropensityParams):
    """Self-normalized inverse propensity weights (W1, W0), each summing to 1."""
    pi = propensity(params, data.x)
    d = data.d.astype(float)
    raw1 = d / pi
    raw0 = (1.0 - d) / (1.0 - pi)
    s1, s0 = raw1.sum(), raw0.sum()
    if s1 <= 0 or s0 <= 0:
        raise DegenerateArmError("an arm has zero total inverse propensity weight")
    return raw1 / s1, raw0 / s0


def weighted_median(y, w) -> float:
    """Smallest observed y whose weighted CDF reaches one half."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise InputError("y and w must be 1-d arrays of equal length")
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise InputError("weights must not all be zero")
    if abs(total - 1.0) > 1e-8:
        raise InputError("weights must sum to 1")
    order = np.argsort(y, kind="stable")
    cdf = np.cumsum(w[order])
    idx = int(np.searchsorted(cdf, 0.5, side="left"))
    idx = min(idx, y.size - 1)
    return float(y[order][idx])


def _sandwich_pieces(fit: PELFit, data: Dataset, k1, k0):
    """(Sigma, G1, V, gmat, warning messages) for the active coefficients."""
    active = np.asarray(fit.active_set, dtype=int)
    if active.size == 0:
        raise InputError("sandwich covariance needs a nonempty active set")
    params = fit.params
    notes = []
    jac = jacobian_g(params, data, k1, k0)
    gmat = stack_g(params, data, k1, k0)
    n = data.n
    vhat = gmat.T @ gmat / n
    g1 = jac[:, active]
    try:
        np.linalg.cholesky(vhat)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * float(np.trace(vhat))
        vhat = vhat + ridge * np.eye(vhat.shape[0])
        notes.append("moment second-moment matrix was singular; ridge added")
    vinv_g1 = np.linalg.solve(vhat, g1)
    bread = g1.T @ vinv_g1
    bread = 0.5 * (bread + bread.T)
    try:
        chol = np.linalg.cholesky(bread)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            "G1' V^{-1} G1 is singular; coefficients are not identified"
        ) from None
    eye = np.eye(bread.shape[0])
    half = np.linalg.solve(chol, eye)
    sigma = half.T @ half
    sigma = 0.5 * (sigma + sigma.T)
    return sigma, g1, vhat, gmat, notes


def sandwich_covariance(
    fit: PELFit,
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
) -> np.ndarray:
    """Estimate of n * Cov(active coefficients): (G1' V^{-1} G1)^{-1}."""
    sigma, _, _, _, notes = _sandwich_pieces(fit, data, k1, k0)
    for msg in notes:
        _warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return sigma


def _means_at_beta(beta, fit, data, k1y, k0y, dvec, delta):
    pi_params = PropensityParams(beta=beta, clip=fit.clip)
    pi = propensity(pi_params, data.x)
    w1, w0 = _ipcw_weight_arrays(data.y, delta, dvec, pi, k1y, k0y)
    return _hajek_means(data.y, w1, w0)


def ate_with_ci(
    data: Dataset,
    fit: PELFit,
    k1: CensorSurvival,
    k0: CensorSurvival,
    level: float = 0.95,
    h_scale: float = 1e-5,
) -> ATEResult:
    """Point estimate, standard errors, confidence interval and medians."""
    if not 0.0 < level < 1.0:
        raise InputError("level must lie in (0, 1)")
    notes = []
    if not fit.converged:
        notes.append("propensity fit did not converge; inference is approximate")
    dvec = data.d.astype(float)
    delta = data.delta.astype(float)
    k1y = k1.evaluate(data.y)
    k0y = k0.evaluate(data.y)
    n = data.n

    pi = propensity(fit.params, data.x)
    w1, w0 = _ipcw_weight_arrays(data.y, delta, dvec, pi, k1y, k0y)
    mu1, mu0 = _hajek_means(data.y, w1, w0)
    ate = mu1 - mu0

    active = np.asarray(fit.active_set, dtype=int)
    beta = fit.beta_hat

    # finite-difference gradient of the ATE map over active coefficients
    grad_h = np.zeros(active.size)
    for pos, j in enumerate(active):
        h_j = h_scale * (1.0 + abs(beta[j]))
        up = beta.copy()
        up[j] += h_j
        dn = beta.copy()
        dn[j] -= h_j
        m1u, m0u = _means_at_beta(up, fit, data, k1y, k0y, dvec, delta)
        m1d, m0d = _means_at_beta(dn, fit, data, k1y, k0y, dvec, delta)
        grad_h[pos] = ((m1u - m0u) - (m1d - m0d)) / (2.0 * h_j)

    den1 = float(w1.sum()) / n
    den0 = float(w0.sum()) / n
    phi = w1 * (data.y - mu1) / (n * den1) - w0 * (data.y - mu0) / (n * den0)

    if active.size:
        with _warnings.catch_warnings(record=True) as caught:
            _warnings.simplefilter("always")
            sigma, g1, vhat, gmat, sw_notes = _sandwich_pieces(fit, data, k1, k0)
        notes.extend(sw_notes)
        notes.extend(str(w.message) for w in caught)
        se_prop = math.sqrt(max(float(grad_h @ sigma @ grad_h), 0.0) / n)
        # per-row coefficient influence, mapped through the ATE gradient
        bmat = sigma @ (np.linalg.solve(vhat, g1).T)   # s x m
        psi = -(gmat @ (bmat.T @ grad_h)) / n
    else:
        notes.append("active set is empty; propensity variance term is zero")
        se_prop = 0.0
        psi = np.zeros(n)

    infl = phi + psi
    se = math.sqrt(float(infl @ infl))
    z = float(ndtri(0.5 + level / 2.0))

    w1n, w0n = normalized_weights(data, fit.params)
    med1 = weighted_median(data.y, w1n)
    med0 = weighted_median(data.y, w0n)

    return ATEResult(
        mu1=mu1,
        mu0=mu0,
        ate=ate,
        se=se,
        ci_low=ate - z * se,
        ci_high=ate + z * se,
        median1=med1,
        median0=med0,
        median_diff=med1 - med0,
        n_effective_1=_kish(w1),
        n_effective_0=_kish(w0),
        warnings=tuple(notes),
        level=level,
        se_propensity=se_prop,
    )
