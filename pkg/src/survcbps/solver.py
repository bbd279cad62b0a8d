"""Penalized empirical likelihood fitting of the balancing propensity score.

Inner problem (data fixed, coefficients fixed): maximize over the dual
vector lam

    phi(lam) = sum_i log*(1 + lam' g_i),

where log* is the pseudo-logarithm equal to log on [1/n, inf) and extended
below 1/n by the quadratic with matching value and first two derivatives.
phi is globally concave, so a damped Newton iteration converges fast; the
maximizing lam recovers the empirical likelihood weights
w_i = (1/n) / (1 + lam' g_i) on the interior branch.

Outer problem: minimize over beta

    Q(beta) = phi(lam*(beta)) + n * sum_j p(|beta_j|)

with p the SCAD penalty. The EL term is differentiated through the inner
optimum (envelope rule), curvature is approximated by the familiar
n * G' V^{-1} G surrogate, the penalty by its local quadratic majorization,
and steps are accepted only when Q strictly decreases. Coefficients whose
magnitude falls below a hard threshold are snapped to exactly zero, which
is what produces sparse fits.

Covariates are rescaled internally to unit variance so the penalty acts on
comparable coordinates; estimates are mapped back to the original scale.
Columns are not centered: the propensity model has no intercept, and
centering would implicitly add one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .censoring import CensorSurvival
from .data import Dataset
from .errors import FitError, InputError, SelectionError
from .moments import (
    PropensityParams,
    _gmat_arrays,
    _mean_jacobian_arrays,
    _profile_grad_arrays,
)
from .scad import ScadParams, lqa_weight, scad_value


@dataclass(frozen=True)
class ELDualState:
    """Result of one inner dual maximization."""

    lam: np.ndarray
    inner_objective: float
    grad_norm: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FitOptions:
    clip: float = 0.01
    lqa_eps: float = 1e-6
    zero_tol: float = 1e-5
    max_outer: int = 200
    outer_tol: float = 1e-6
    inner_tol: float = 1e-8
    inner_max_iter: int = 100
    standardize: bool = True
    init_ridge: float = 1e-4
    beta_init: np.ndarray | None = None


@dataclass(frozen=True)
class PELFit:
    beta_hat: np.ndarray
    active_set: np.ndarray
    tau: float
    dual: ELDualState
    outer_iterations: int
    objective_trace: np.ndarray
    converged: bool
    clip: float = 0.01

    @property
    def params(self) -> PropensityParams:
        return PropensityParams(beta=self.beta_hat, clip=self.clip)


def _logstar(z, eps):
    z = np.asarray(z, dtype=float)
    lo = z < eps
    safe = np.where(lo, eps, z)
    out = np.log(safe)
    if lo.any():
        zl = z[lo]
        out[lo] = math.log(eps) - 1.5 + 2.0 * zl / eps - zl * zl / (2.0 * eps * eps)
    return out


def _logstar_d1(z, eps):
    z = np.asarray(z, dtype=float)
    lo = z < eps
    safe = np.where(lo, eps, z)
    out = 1.0 / safe
    if lo.any():
        out[lo] = 2.0 / eps - z[lo] / (eps * eps)
    return out


def _logstar_d2(z, eps):
    z = np.asarray(z, dtype=float)
    lo = z < eps
    safe = np.where(lo, eps, z)
    out = -1.0 / (safe * safe)
    if lo.any():
        out[lo] = -1.0 / (eps * eps)
    return out


def solve_inner_dual(
    gmat,
    lambda_init=None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> ELDualState:
    """Damped Newton maximization of the pseudo-log dual objective."""
    g = np.asarray(gmat, dtype=float)
    if g.ndim != 2:
        raise InputError("gmat must be 2-d (rows = observations)")
    if not np.all(np.isfinite(g)):
        raise InputError("gmat must be finite")
    n, m = g.shape
    if n < 1:
        raise InputError("gmat needs at least one row")
    eps = 1.0 / n
    lam = np.zeros(m)
    if lambda_init is not None:
        cand = np.asarray(lambda_init, dtype=float)
        if cand.shape == (m,) and np.all(np.isfinite(cand)):
            # fall back to 0 when the warm start is worse than cold
            if float(np.sum(_logstar(1.0 + g @ cand, eps))) > 0.0:
                lam = cand.copy()
    z = 1.0 + g @ lam
    val = float(np.sum(_logstar(z, eps)))
    grad = g.T @ _logstar_d1(z, eps)
    gnorm = float(np.max(np.abs(grad))) if m else 0.0
    iters = 0
    stalled = False
    for _ in range(max_iter):
        if gnorm <= tol:
            break
        curv = _logstar_d2(z, eps)
        a_mat = -(g.T @ (curv[:, None] * g))
        ridge = 1e-12 * (1.0 + np.trace(a_mat) / m)
        a_mat[np.diag_indices_from(a_mat)] += ridge
        try:
            direction = np.linalg.solve(a_mat, grad)
        except np.linalg.LinAlgError:
            direction = np.linalg.lstsq(a_mat, grad, rcond=None)[0]
        slope = float(grad @ direction)
        if slope <= 0.0:
            direction = grad
            slope = float(grad @ grad)
        # the model improvement for the full step is slope/2; once that is
        # below floating resolution of the objective no line search can
        # certify progress, so the iterate is numerically optimal
        if 0.5 * slope <= 8.0 * np.finfo(float).eps * (1.0 + abs(val)):
            stalled = True
            break
        step = 1.0
        improved = False
        for _ in range(60):
            cand = lam + step * direction
            zc = 1.0 + g @ cand
            vc = float(np.sum(_logstar(zc, eps)))
            if vc >= val + 1e-4 * step * slope:
                lam, z, val = cand, zc, vc
                improved = True
                break
            step *= 0.5
        iters += 1
        if not improved:
            break
        grad = g.T @ _logstar_d1(z, eps)
        gnorm = float(np.max(np.abs(grad)))
    return ELDualState(
        lam=lam,
        inner_objective=val,
        grad_norm=gnorm,
        iterations=iters,
        converged=bool(gnorm <= tol or stalled),
    )


def el_weights(gmat, lam) -> np.ndarray:
    """Empirical likelihood weights implied by a dual vector.

    Equals (1/n) / (1 + lam' g_i) on the logarithmic branch; the pseudo-log
    continuation keeps every weight strictly positive.
    """
    g = np.asarray(gmat, dtype=float)
    n = g.shape[0]
    return _logstar_d1(1.0 + g @ np.asarray(lam, dtype=float), 1.0 / n) / n


class _Workspace:
    """Arrays shared by every objective evaluation inside one fit."""

    def __init__(self, data: Dataset, k1, k0, opts: FitOptions):
        self.n = data.n
        self.p = data.p
        self.dvec = data.d.astype(float)
        self.delta = data.delta.astype(float)
        self.k1y = k1.evaluate(data.y)
        self.k0y = k0.evaluate(data.y)
        self.clip = opts.clip
        if opts.standardize:
            sd = data.x.std(axis=0)
            self.scales = np.where(sd > 0, sd, 1.0)
        else:
            self.scales = np.ones(self.p)
        self.x = data.x / self.scales

    def gmat(self, beta):
        return _gmat_arrays(
            beta, self.clip, self.x, self.dvec, self.delta, self.k1y, self.k0y
        )

    def mean_jac(self, beta):
        return _mean_jacobian_arrays(
            beta, self.clip, self.x, self.dvec, self.delta, self.k1y, self.k0y
        )

    def profile_grad(self, beta, lam, row_scale):
        return _profile_grad_arrays(
            beta, self.clip, self.x, self.dvec, self.delta,
            self.k1y, self.k0y, lam, row_scale,
        )


def _penalty_total(beta, scad, n):
    if scad is None:
        return 0.0
    return n * float(np.sum(scad_value(np.abs(beta), scad)))


def _q_eval(ws: _Workspace, beta, scad, opts: FitOptions, lam_init):
    """(Q, dual state, gmat); Q is +inf when the inner solve fails."""
    gm = ws.gmat(beta)
    state = solve_inner_dual(
        gm, lam_init, tol=opts.inner_tol, max_iter=opts.inner_max_iter
    )
    if not state.converged:
        return math.inf, state, gm
    return state.inner_objective + _penalty_total(beta, scad, ws.n), state, gm


def _ridge_logistic(x, d, ridge, max_iter=50, tol=1e-8):
    """No-intercept logistic regression with an L2 proximal term."""
    n, p = x.shape
    beta = np.zeros(p)
    for _ in range(max_iter):
        prob = expit(x @ beta)
        grad = x.T @ (d - prob) - ridge * beta
        w = prob * (1.0 - prob) + 1e-10
        hess = x.T @ (w[:, None] * x)
        hess[np.diag_indices_from(hess)] += ridge + 1e-10
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta + step
        if np.max(np.abs(step)) <= tol:
            break
    if not np.all(np.isfinite(beta)):
        beta = np.zeros(p)
    return beta


def pel_objective(
    beta,
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
    scad: ScadParams | None,
    clip: float = 0.01,
    lambda_init=None,
) -> float:
    """Q(beta): profiled EL term plus n times the summed penalty.

    Inner non-convergence is propagated as +inf so that callers comparing
    objective values reject such points.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,):
        raise InputError("beta length must equal the number of covariates")
    opts = FitOptions(clip=clip, standardize=False)
    ws = _Workspace(data, k1, k0, opts)
    q, _, _ = _q_eval(ws, beta, scad, opts, lambda_init)
    return q


def fit_pel(
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
    scad: ScadParams | None,
    opts: FitOptions | None = None,
) -> PELFit:
    """Minimize the penalized EL objective; scad=None fits unpenalized."""
    opts = opts or FitOptions()
    ws = _Workspace(data, k1, k0, opts)
    n, p = ws.n, ws.p
    zero_tol = opts.zero_tol if scad is not None else 0.0

    if opts.beta_init is not None:
        beta = np.asarray(opts.beta_init, dtype=float)
        if beta.shape != (p,):
            raise InputError("beta_init length must equal the number of covariates")
        beta = beta * ws.scales
    else:
        beta = _ridge_logistic(ws.x, ws.dvec, opts.init_ridge)

    q_cur, state, gm = _q_eval(ws, beta, scad, opts, None)
    if not math.isfinite(q_cur):
        beta = np.zeros(p)
        q_cur, state, gm = _q_eval(ws, beta, scad, opts, None)
        if not math.isfinite(q_cur):
            raise FitError("inner dual did not converge at the initial point")

    trace = [q_cur]
    converged = False
    outer = 0
    for outer in range(1, opts.max_outer + 1):
        lam = state.lam
        row_scale = _logstar_d1(1.0 + gm @ lam, 1.0 / n)
        grad_el = ws.profile_grad(beta, lam, row_scale)
        jac = ws.mean_jac(beta)
        vhat = gm.T @ gm / n
        vhat[np.diag_indices_from(vhat)] += 1e-10 * (1.0 + np.trace(vhat))
        try:
            sol = np.linalg.solve(vhat, jac)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(vhat, jac, rcond=None)[0]
        h_el = n * (jac.T @ sol)
        h_el = 0.5 * (h_el + h_el.T)
        if scad is not None:
            w_lqa = np.atleast_1d(lqa_weight(beta, scad, opts.lqa_eps))
        else:
            w_lqa = np.zeros(p)
        h_mat = h_el + np.diag(n * w_lqa)
        h_mat[np.diag_indices_from(h_mat)] += 1e-8 * (1.0 + np.trace(h_el) / p)
        grad_m = grad_el + n * w_lqa * beta
        try:
            direction = -np.linalg.solve(h_mat, grad_m)
        except np.linalg.LinAlgError:
            direction = -np.linalg.lstsq(h_mat, grad_m, rcond=None)[0]

        # Coordinates held at zero whose proposed move is below the
        # threshold are pinned there by the rezeroing rule; they cannot
        # contribute descent, so the stationarity test skips them.
        pinned = (beta == 0.0) & (np.abs(direction) < zero_tol)
        decrement = float(-grad_m[~pinned] @ direction[~pinned])
        step = 1.0
        accepted = False
        cand = beta
        for _ in range(40):
            cand = beta + step * direction
            if zero_tol > 0.0:
                cand = np.where(np.abs(cand) < zero_tol, 0.0, cand)
            q_cand, st_cand, gm_cand = _q_eval(ws, cand, scad, opts, lam)
            if q_cand < q_cur - 1e-12 * (1.0 + abs(q_cur)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no further descent; stationary when the model decrement is tiny
            converged = decrement <= 1e-8 * (1.0 + abs(q_cur))
            break
        delta_max = float(np.max(np.abs(cand - beta)))
        beta, q_cur, state, gm = cand, q_cand, st_cand, gm_cand
        trace.append(q_cur)
        if delta_max <= opts.outer_tol:
            converged = True
            break

    beta_orig = beta / ws.scales
    lam_orig = state.lam.copy()
    lam_orig[:p] = lam_orig[:p] / ws.scales
    active = np.flatnonzero(beta_orig != 0.0)
    return PELFit(
        beta_hat=beta_orig,
        active_set=active,
        tau=float(scad.lam) if scad is not None else 0.0,
        dual=replace(state, lam=lam_orig),
        outer_iterations=outer,
        objective_trace=np.asarray(trace),
        converged=converged,
        clip=opts.clip,
    )


def default_tau_grid(n: int, p: int, num: int = 20,
                     lo: float = 0.01, hi: float = 2.0) -> np.ndarray:
    """Log-spaced penalty levels on the sqrt(log p / n) scale."""
    if n < 2 or p < 1:
        raise InputError("need n >= 2 and p >= 1")
    scale = math.sqrt(math.log(max(p, 2)) / n)
    return np.geomspace(lo * scale, hi * scale, num)


def select_tau(
    data: Dataset,
    k1: CensorSurvival,
    k0: CensorSurvival,
    grid=None,
    opts: FitOptions | None = None,
    scad_a: float = 3.7,
):
    """Pick the penalty level by the BIC-type criterion.

    Score: 2 * (EL term at the fit) + |active set| * log n. Candidates are
    visited from the largest tau down with warm starts, so equal scores
    resolve toward the sparser fit and the outcome does not depend on the
    order of the supplied grid.
    """
    opts = opts or FitOptions()
    if grid is None:
        grid = default_tau_grid(data.n, data.p)
    grid = np.sort(np.asarray(grid, dtype=float))[::-1]
    if grid.size == 0 or np.any(grid <= 0):
        raise InputError("tau grid must be nonempty and positive")
    logn = math.log(data.n)
    best = None
    warm = opts.beta_init
    failures = []
    for tau in grid:
        try:
            fit = fit_pel(
                data, k1, k0, ScadParams(lam=float(tau), a=scad_a),
                replace(opts, beta_init=warm),
            )
        except FitError as exc:
            failures.append((float(tau), str(exc)))
            continue
        warm = fit.beta_hat
        score = 2.0 * fit.dual.inner_objective + fit.active_set.size * logn
        if best is None or score < best[0]:
            best = (score, float(tau), fit)
    if best is None:
        raise SelectionError(
            f"every fit on the tau grid failed: {failures!r}"
        )
    return best[1], best[2]
