import numpy as np
import pytest

import survcbps as sc
from survcbps.inference import (
    ate_with_ci,
    ipcw_ipw_means,
    normalized_weights,
    sandwich_covariance,
    weighted_median,
)
from survcbps.moments import PropensityParams
from survcbps.solver import FitOptions, fit_pel
from tests.conftest import small_dataset


def test_weighted_median_frozen_cases():
    assert weighted_median([1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.4]) == 3.0
    assert weighted_median([1.0, 2.0, 3.0], [1 / 3, 1 / 3, 1 / 3]) == 2.0
    assert weighted_median([5.0], [1.0]) == 5.0
    # order of the inputs must not matter
    assert weighted_median([4.0, 1.0, 3.0, 2.0], [0.4, 0.1, 0.3, 0.2]) == 3.0
    # point mass carrying half the weight is reached exactly
    assert weighted_median([1.0, 2.0], [0.5, 0.5]) == 1.0


def test_weighted_median_validation():
    with pytest.raises(sc.InputError):
        weighted_median([1.0, 2.0], [0.9, 0.2])
    with pytest.raises(sc.InputError):
        weighted_median([1.0, 2.0], [-0.1, 1.1])
    with pytest.raises(sc.InputError):
        weighted_median([1.0, 2.0], [0.5])


def test_uncensored_reduction_to_plain_hajek(toy_uncensored):
    """With delta = 1 everywhere the IPCW means equal plain Hajek IPW."""
    data = toy_uncensored
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    params = PropensityParams(beta=np.array([0.4, -0.2, 0.1]))
    mu1, mu0 = ipcw_ipw_means(data, params, k1, k0)

    pi = sc.propensity(params, data.x)
    d = data.d.astype(float)
    w1 = d / pi
    w0 = (1.0 - d) / (1.0 - pi)
    ref1 = float((w1 * data.y).sum() / w1.sum())
    ref0 = float((w0 * data.y).sum() / w0.sum())
    assert abs(mu1 - ref1) <= 1e-12
    assert abs(mu0 - ref0) <= 1e-12


def test_normalized_weights_sum_to_one(toy_data):
    params = PropensityParams(beta=np.zeros(toy_data.p))
    w1, w0 = normalized_weights(toy_data, params)
    assert w1.sum() == pytest.approx(1.0)
    assert w0.sum() == pytest.approx(1.0)
    # at beta = 0 the weights are uniform within each arm
    n1 = int((toy_data.d == 1).sum())
    np.testing.assert_allclose(w1[toy_data.d == 1], np.full(n1, 1.0 / n1))


def _fitted(data, tau=0.05):
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    fit = fit_pel(data, k1, k0, sc.ScadParams(lam=tau))
    return fit, k1, k0


def test_ate_with_ci_fields(toy_data):
    fit, k1, k0 = _fitted(toy_data)
    res = ate_with_ci(toy_data, fit, k1, k0)
    assert res.ate == pytest.approx(res.mu1 - res.mu0)
    assert res.ci_low < res.ate < res.ci_high
    assert res.se > 0
    half = res.ci_high - res.ate
    assert half == pytest.approx(1.959963984540054 * res.se, rel=1e-9)
    assert res.median_diff == pytest.approx(res.median1 - res.median0)
    assert 0 < res.n_effective_1 <= toy_data.n
    assert 0 < res.n_effective_0 <= toy_data.n
    d = res.to_dict()
    assert d["ate"] == res.ate and d["level"] == 0.95


def test_ci_level_changes_width(toy_data):
    fit, k1, k0 = _fitted(toy_data)
    res95 = ate_with_ci(toy_data, fit, k1, k0, level=0.95)
    res80 = ate_with_ci(toy_data, fit, k1, k0, level=0.80)
    assert (res80.ci_high - res80.ci_low) < (res95.ci_high - res95.ci_low)
    with pytest.raises(sc.InputError):
        ate_with_ci(toy_data, fit, k1, k0, level=1.0)


def test_se_stable_under_fd_step_halving(toy_data):
    fit, k1, k0 = _fitted(toy_data)
    res_a = ate_with_ci(toy_data, fit, k1, k0, h_scale=1e-5)
    res_b = ate_with_ci(toy_data, fit, k1, k0, h_scale=5e-6)
    assert abs(res_a.se - res_b.se) <= 0.01 * res_a.se
    assert abs(res_a.se_propensity - res_b.se_propensity) <= max(
        0.01 * res_a.se_propensity, 1e-12
    )


def test_sandwich_matches_direct_inverse():
    """Cholesky-based inversion agrees with a plain inv of G1' V^{-1} G1."""
    data = small_dataset(seed=9, n=80, p=2)
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    fit = fit_pel(data, k1, k0, scad=None)
    assert fit.active_set.size == 2
    sigma = sandwich_covariance(fit, data, k1, k0)
    from survcbps.moments import jacobian_g, stack_g

    jac = jacobian_g(fit.params, data, k1, k0)[:, fit.active_set]
    gmat = stack_g(fit.params, data, k1, k0)
    vhat = gmat.T @ gmat / data.n
    direct = np.linalg.inv(jac.T @ np.linalg.solve(vhat, jac))
    np.testing.assert_allclose(sigma, direct, rtol=1e-8)
    # symmetric positive definite
    np.testing.assert_allclose(sigma, sigma.T, rtol=1e-12)
    assert np.all(np.linalg.eigvalsh(sigma) > 0)


def test_empty_active_set_gives_zero_propensity_term():
    data = small_dataset(seed=41, n=100, p=3)
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    fit = fit_pel(data, k1, k0, sc.ScadParams(lam=50.0))
    assert fit.active_set.size == 0
    res = ate_with_ci(data, fit, k1, k0)
    assert res.se_propensity == 0.0
    # the outcome-sampling part of the variance is still there
    assert res.se > 0
    assert any("active set is empty" in w for w in res.warnings)


def test_influence_se_exceeds_propensity_term(toy_data):
    # the full standard error includes the weighted-mean sampling noise,
    # so it cannot fall below a pure reading of the coefficient noise alone
    fit, k1, k0 = _fitted(toy_data)
    res = ate_with_ci(toy_data, fit, k1, k0)
    assert res.se > 0
    assert res.se_propensity >= 0
    assert res.se >= 0.5 * res.se_propensity


def test_unconverged_fit_flagged(toy_data):
    fit, k1, k0 = _fitted(toy_data)
    shaky = sc.PELFit(
        beta_hat=fit.beta_hat,
        active_set=fit.active_set,
        tau=fit.tau,
        dual=fit.dual,
        outer_iterations=fit.outer_iterations,
        objective_trace=fit.objective_trace,
        converged=False,
        clip=fit.clip,
    )
    res = ate_with_ci(toy_data, shaky, k1, k0)
    assert any("did not converge" in w for w in res.warnings)


@pytest.mark.slow
def test_beta1_sandwich_calibration(p10_study):
    """SD of the fitted first coefficient vs its mean sandwich SE, 200 reps."""
    b1 = p10_study["beta1"]
    b1_se = p10_study["beta1_se"]
    assert b1.size >= 150  # the signal coordinate is almost always selected
    sd = float(b1.std(ddof=1))
    mean_se = float(b1_se.mean())
    assert 0.7 * sd <= mean_se <= 1.3 * sd
