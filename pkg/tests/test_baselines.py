import numpy as np
import pytest

import survcbps as sc
from survcbps.baselines import (
    BaselineSpec,
    fit_aipw,
    fit_cbps_unpenalized,
    fit_naive_ipw,
    run_baseline,
)
from survcbps.inference import ate_with_ci
from survcbps.solver import FitOptions, fit_pel
from tests.conftest import small_dataset


@pytest.fixture(scope="module")
def arms():
    data = small_dataset(seed=13, n=160, p=3)
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    return data, k1, k0


def test_naive_ipw_basic(arms):
    data, k1, k0 = arms
    res = fit_naive_ipw(data, k1, k0, n_boot=80, seed=5)
    assert np.isfinite(res.ate)
    assert res.ate == pytest.approx(res.mu1 - res.mu0)
    assert res.se > 0
    assert res.ci_low < res.ate < res.ci_high


def test_naive_ipw_bootstrap_deterministic(arms):
    data, k1, k0 = arms
    a = fit_naive_ipw(data, k1, k0, n_boot=60, seed=99)
    b = fit_naive_ipw(data, k1, k0, n_boot=60, seed=99)
    assert a.se == b.se
    assert a.ci_low == b.ci_low
    c = fit_naive_ipw(data, k1, k0, n_boot=60, seed=100)
    assert c.se != a.se  # different resamples
    # the point estimate never depends on the bootstrap seed
    assert c.ate == a.ate


def test_naive_ipw_too_few_resamples_gives_nan_se(arms):
    data, k1, k0 = arms
    res = fit_naive_ipw(data, k1, k0, n_boot=5, seed=1)
    assert np.isnan(res.se)
    assert np.isnan(res.ci_low)
    assert np.isfinite(res.ate)


def test_cbps_unpenalized_equals_tau_zero_path(arms):
    data, k1, k0 = arms
    res = fit_cbps_unpenalized(data, k1, k0)
    fit = fit_pel(data, k1, k0, scad=None, opts=FitOptions())
    ref = ate_with_ci(data, fit, k1, k0)
    assert res.ate == pytest.approx(ref.ate, abs=1e-12)
    assert res.se == pytest.approx(ref.se, abs=1e-12)
    assert res.mu1 == pytest.approx(ref.mu1, abs=1e-12)


def test_cbps_unpenalized_requires_headroom():
    data = small_dataset(seed=2, n=60, p=3)
    sub = sc.Dataset(
        y=data.y[:4], delta=np.array([1, 1, 1, 1]),
        d=np.array([1, 0, 1, 0]), x=data.x[:4],
    )
    k1 = sc.fit_censoring_km(sub, 1)
    k0 = sc.fit_censoring_km(sub, 0)
    wide = sc.Dataset(
        y=sub.y, delta=sub.delta, d=sub.d,
        x=np.hstack([sub.x, sub.x * 2.0, sub.x * 3.0]),
    )
    with pytest.raises(sc.InputError):
        fit_cbps_unpenalized(wide, k1, k0)


def test_aipw_zero_outcome_model_reduces_to_unnormalized_ipw(arms):
    """With m identically 0 the AIPW means are the unnormalized IPW means."""
    data, k1, k0 = arms
    res = fit_aipw(data, k1, k0, n_boot=25, seed=3, outcome_model="zero")
    from survcbps.baselines import _naive_propensity

    pi, _ = _naive_propensity(data.x, data.d.astype(float), 0.01)
    delta = data.delta.astype(float)
    d = data.d.astype(float)
    k1y, k0y = k1.evaluate(data.y), k0.evaluate(data.y)
    ytil = delta * data.y / np.where(d == 1, k1y, k0y)
    mu1 = float(np.mean(d * ytil / pi))
    mu0 = float(np.mean((1 - d) * ytil / (1 - pi)))
    assert res.mu1 == pytest.approx(mu1, rel=1e-12)
    assert res.mu0 == pytest.approx(mu0, rel=1e-12)


def test_aipw_linear_runs_and_is_deterministic(arms):
    data, k1, k0 = arms
    a = fit_aipw(data, k1, k0, n_boot=60, seed=8)
    b = fit_aipw(data, k1, k0, n_boot=60, seed=8)
    assert a.ate == b.ate and a.se == b.se
    assert np.isfinite(a.se)
    with pytest.raises(sc.InputError):
        fit_aipw(data, k1, k0, outcome_model="cubic")


def test_run_baseline_dispatch(arms):
    data, k1, k0 = arms
    spec = BaselineSpec(kind="naive_ipw", options={"n_boot": 40})
    res = run_baseline(spec, data, k1, k0, seed=77)
    ref = fit_naive_ipw(data, k1, k0, n_boot=40, seed=77)
    assert res.ate == ref.ate and res.se == ref.se
    res2 = run_baseline(
        BaselineSpec(kind="cbps_unpenalized"), data, k1, k0,
        n_boot=40, seed=77,
    )
    assert np.isfinite(res2.ate)
    with pytest.raises(sc.InputError):
        BaselineSpec(kind="mystery")


def test_naive_ipw_handles_near_separation():
    rng = np.random.default_rng(55)
    n = 50
    x = rng.standard_normal((n, 1)) * 4.0
    d = (x[:, 0] > 0).astype(int)  # perfectly separated treatment
    d[0] = 1 - d[0]  # one crossover keeps both arms overlapping a little
    t = rng.exponential(2.0, n)
    c = rng.exponential(8.0, n)
    y = np.minimum(t, c)
    delta = (t <= c).astype(int)
    data = sc.Dataset(y=y, delta=delta, d=d, x=x)
    k1 = sc.fit_censoring_km(data, 1)
    k0 = sc.fit_censoring_km(data, 0)
    res = fit_naive_ipw(data, k1, k0, n_boot=30, seed=4)
    assert np.isfinite(res.ate)
    assert np.isfinite(res.mu1) and np.isfinite(res.mu0)
