import warnings

import numpy as np
import pytest

import survcbps as sc
from survcbps.inference import sandwich_covariance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def small_dataset(seed=0, n=60, p=3, censor=True):
    """Hand-rolled logistic/exponential draw used by several unit tests."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.linspace(0.5, -0.5, p)
    d = (rng.random(n) < 1.0 / (1.0 + np.exp(-x @ beta))).astype(int)
    t = rng.exponential(2.0, n) * (1.0 + 0.3 * d)
    if censor:
        c = rng.exponential(5.0, n)
        y = np.minimum(t, c)
        delta = (t <= c).astype(int)
    else:
        y = t
        delta = np.ones(n, dtype=int)
    return sc.Dataset(y=y, delta=delta, d=d, x=x)


@pytest.fixture
def toy_data():
    return small_dataset(seed=3)


@pytest.fixture
def toy_uncensored():
    return small_dataset(seed=5, censor=False)


@pytest.fixture(scope="session")
def p10_study():
    """200 replications of the p = 10, s = 3 design at n = 500.

    Shared between the sandwich calibration test and the acceptance suite
    because the loop costs a few minutes. Collects per-replication point
    estimates, standard errors, interval coverage, and the fitted first
    coefficient with its sandwich standard error whenever it was selected.
    """
    cfg = sc.SimConfig(
        n=500, p=10, beta_nonzero=3, replications=200, seed=2026,
        estimators=("proposed",),
    )
    ta, mc = sc.true_ate(cfg)
    ates, ses, covered = [], [], []
    b1, b1_se = [], []
    n_fail = 0
    for rep in range(cfg.replications):
        data, _ = sc.generate_dataset(cfg, rep)
        k1 = sc.fit_censoring_km(data, 1, floor=cfg.km_floor)
        k0 = sc.fit_censoring_km(data, 0, floor=cfg.km_floor)
        try:
            _, fit = sc.select_tau(data, k1, k0, opts=sc.FitOptions(clip=cfg.clip))
            res = sc.ate_with_ci(data, fit, k1, k0)
        except sc.SurvCbpsError:
            n_fail += 1
            continue
        ates.append(res.ate)
        ses.append(res.se)
        covered.append(res.ci_low <= ta <= res.ci_high)
        if 0 in fit.active_set:
            b1.append(fit.beta_hat[0])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sigma = sandwich_covariance(fit, data, k1, k0)
            pos = list(fit.active_set).index(0)
            b1_se.append(float(np.sqrt(sigma[pos, pos] / data.n)))
    return {
        "config": cfg,
        "true_ate": ta,
        "true_ate_mc_se": mc,
        "ate": np.asarray(ates),
        "se": np.asarray(ses),
        "covered": np.asarray(covered, dtype=bool),
        "beta1": np.asarray(b1),
        "beta1_se": np.asarray(b1_se),
        "n_fail": n_fail,
    }
