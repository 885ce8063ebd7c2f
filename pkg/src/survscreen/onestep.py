"""Influence functions and the one-step slope estimator for one predictor.

The target is the marginal slope cov(U, T) / var(U).  The plug-in estimate
regresses the model-predicted response on U; the one-step estimate adds the
empirical mean of the efficient influence function, which splits into an
inverse-weighting part and a censoring-martingale part:

    ipw_i  = (u_i - ubar) * (y_i - ebar) / V  -  c_ue * (u_i - ubar)^2 / V^2
    car_i  = (u_i - ubar) / V * integral of E(u_i, s) against dM_i(s)
    star_i = ipw_i - car_i

with ubar, V the sample mean/variance of U, ebar the sample mean of the
predicted responses, and c_ue their sample covariance with U.  All moments
use divisor n; the algebraic cancellations in the estimator are exact only
with matched divisors.

Two algebraically equivalent forms of the estimator are always computed and
cross-checked: (a) plug-in + mean influence, and (b) the simplified
weighted-response form  mean((U - ubar) Y) / V - mean(car).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .censoring import KaplanMeierFit, _weighted_response, fit_censoring_km, survival_at
from .dataset import Observation, SurvivalDataset
from .errors import DegeneracyError, SurvScreenError
from .residual_life import EPS_VAR, ResidualLifeModel, fit_residual_life_arrays

EPS_SIGMA = 1e-8
DUAL_FORM_TOL = 1e-8

# The 95% normal quantile is used as the literal constant 1.96; other levels
# go through the exact quantile function.
Z_95 = 1.96


def z_value(alpha: float) -> float:
    if alpha == 0.05:
        return Z_95
    return float(norm.ppf(1.0 - alpha / 2.0))


def two_sided_p(z: float) -> float:
    return float(2.0 * norm.sf(abs(z)))


@dataclass(frozen=True)
class NuisanceBundle:
    """Fitted nuisances for one predictor over one declared sample.

    ``km`` is the censoring fit the synthetic responses and martingale terms
    are taken against; it may come from a larger sample than the regression
    moments (``full_km``), which is recorded explicitly.
    """

    k: int
    km: KaplanMeierFit
    y: np.ndarray
    rl: ResidualLifeModel
    u_mean: float
    u_var: float
    e_mean: float
    cov_u_e: float
    sample_size: int
    full_km: bool


def make_bundle(u, x, delta, y, km: KaplanMeierFit, k: int = 0, full_km: bool = False) -> NuisanceBundle:
    """Fit the residual-life model and predictor moments on one sample."""
    u = np.asarray(u, dtype=np.float64)
    rl = fit_residual_life_arrays(x, delta, y, u)
    e_vals = rl.intercepts[0] + rl.slopes[0] * (u - rl.u_centers[0])
    u_mean = float(u.mean())
    u_var = float((u * u).mean() - u_mean * u_mean)
    if u_var < EPS_VAR:
        raise DegeneracyError(f"predictor {k} has sample variance {u_var:.3g} below {EPS_VAR}")
    e_mean = float(e_vals.mean())
    cov_u_e = float((u * e_vals).mean() - u_mean * e_mean)
    return NuisanceBundle(
        k=k, km=km, y=np.asarray(y, dtype=np.float64), rl=rl,
        u_mean=u_mean, u_var=u_var, e_mean=e_mean, cov_u_e=cov_u_e,
        sample_size=len(u), full_km=full_km,
    )


def plugin_slope(bundle: NuisanceBundle) -> float:
    return bundle.cov_u_e / bundle.u_var


def martingale_values(rl: ResidualLifeModel, km: KaplanMeierFit, u, x, delta) -> np.ndarray:
    """Integral of the residual-life prediction against dM, one value per row.

    For row i this is E(u_i, x_i) if censored, minus the sum of
    E(u_i, s) * dLambda(s) over hazard jumps s <= x_i.
    """
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta)
    jt = km.jump_times
    if len(jt) == 0:
        return np.zeros(len(x))
    rows = rl.coefficient_rows(jt)
    a_eff = rl.intercepts - rl.slopes * rl.u_centers
    cum_a = np.concatenate(([0.0], np.cumsum(a_eff[rows] * km.hazard_increments)))
    cum_b = np.concatenate(([0.0], np.cumsum(rl.slopes[rows] * km.hazard_increments)))
    n_jumps = np.searchsorted(jt, x, side="right")
    jump_sum = cum_a[n_jumps] + cum_b[n_jumps] * u
    rx = rl.coefficient_rows(x)
    at_x = (rl.intercepts[rx] - rl.slopes[rx] * rl.u_centers[rx]) + rl.slopes[rx] * u
    return np.where(delta == 0, at_x, 0.0) - jump_sum


def influence_values(bundle: NuisanceBundle, u, x, delta, y):
    """(ipw, car) influence arrays for the given evaluation rows."""
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cu = u - bundle.u_mean
    v = bundle.u_var
    ipw = cu * (y - bundle.e_mean) / v - bundle.cov_u_e * cu * cu / (v * v)
    car = cu / v * martingale_values(bundle.rl, bundle.km, u, x, delta)
    return ipw, car


def if_ipw(u: float, y_i: float, bundle: NuisanceBundle) -> float:
    """Inverse-weighting influence term for one observation."""
    cu = u - bundle.u_mean
    v = bundle.u_var
    return float(cu * (y_i - bundle.e_mean) / v - bundle.cov_u_e * cu * cu / (v * v))


def if_car(obs: Observation, u: float, bundle: NuisanceBundle) -> float:
    """Censoring-martingale influence term for one observation."""
    ipw, car = influence_values(
        bundle, np.array([u]), np.array([obs.x]), np.array([obs.delta]), np.array([0.0])
    )
    return float(car[0])


def if_star(obs: Observation, u: float, y_i: float, bundle: NuisanceBundle) -> float:
    """Efficient influence value: if_ipw - if_car."""
    return if_ipw(u, y_i, bundle) - if_car(obs, u, bundle)


def ksv_slope(data: SurvivalDataset, y, k: int, j: Optional[int] = None) -> float:
    """Weighted-response slope cov(U_k, Y) / var(U_k) over the first j rows."""
    j = data.n if j is None else j
    if j < 2:
        raise SurvScreenError("need at least 2 observations for a slope")
    return slope_of(data.predictors[:j, k], np.asarray(y)[:j])


def slope_of(u: np.ndarray, y: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    um = u.mean()
    var = (u * u).mean() - um * um
    if var <= EPS_VAR:
        raise DegeneracyError(f"predictor variance {var:.3g} at or below {EPS_VAR}")
    return float(((u * y).mean() - um * y.mean()) / var)


@dataclass(frozen=True)
class OneStepResult:
    """One-step slope inference for a single predictor."""

    k: int
    psi_plugin: float
    s_onestep: float
    if_values: np.ndarray
    sigma_hat: float
    ci_low: float
    ci_high: float
    p_value: float
    n_used: int
    alpha: float

    def __post_init__(self):
        self.if_values.flags.writeable = False

    @property
    def statistic(self) -> float:
        """Standardized statistic sqrt(n) * estimate / sigma."""
        return math.sqrt(self.n_used) * self.s_onestep / self.sigma_hat


def one_step(
    data: SurvivalDataset,
    k: int,
    alpha: float = 0.05,
    j: Optional[int] = None,
    km: Optional[KaplanMeierFit] = None,
    y: Optional[np.ndarray] = None,
) -> OneStepResult:
    """One-step estimate for predictor k over the first j rows (default all).

    Both forms of the estimator are computed and must agree; the simplified
    form is returned.  ``km``/``y`` may be passed to share the censoring fit
    and weighted responses across predictors.
    """
    j = data.n if j is None else j
    x = data.x[:j]
    delta = data.delta[:j]
    u = data.predictors[:j, k]
    if km is None:
        km = fit_censoring_km(x, delta)
    if y is None:
        y = _weighted_response(x, delta, survival_at(km, x))
    else:
        y = np.asarray(y, dtype=np.float64)[:j]

    bundle = make_bundle(u, x, delta, y, km, k=k)
    ipw, car = influence_values(bundle, u, x, delta, y)
    if_values = ipw - car
    psi = plugin_slope(bundle)

    form_a = psi + float(if_values.mean())
    cu = u - bundle.u_mean
    form_b = float((cu * y).mean() / bundle.u_var - car.mean())
    if abs(form_a - form_b) > DUAL_FORM_TOL:
        raise SurvScreenError(
            f"one-step forms disagree by {abs(form_a - form_b):.3g} for predictor {k}"
        )

    sigma = math.sqrt(float((if_values * if_values).mean()))
    if sigma < EPS_SIGMA:
        raise DegeneracyError(f"influence second moment below floor for predictor {k}")
    half = z_value(alpha) * sigma / math.sqrt(j)
    p = two_sided_p(math.sqrt(j) * form_b / sigma)
    return OneStepResult(
        k=k, psi_plugin=psi, s_onestep=form_b, if_values=if_values,
        sigma_hat=sigma, ci_low=form_b - half, ci_high=form_b + half,
        p_value=p, n_used=j, alpha=alpha,
    )


@dataclass(frozen=True)
class BonferroniResult:
    """Marginal one-step tests over all predictors with Bonferroni control."""

    results: tuple
    p_values: np.ndarray
    statistics: np.ndarray
    min_p: float
    selected: int
    alpha: float
    reject: bool

    def __post_init__(self):
        self.p_values.flags.writeable = False
        self.statistics.flags.writeable = False

    @property
    def adjusted_p(self) -> float:
        return min(1.0, len(self.p_values) * self.min_p)


def bonferroni_test(data: SurvivalDataset, alpha: float = 0.05) -> BonferroniResult:
    """Test every predictor marginally; reject if min p < alpha / p."""
    km = fit_censoring_km(data.x, data.delta)
    y = _weighted_response(data.x, data.delta, survival_at(km, data.x))
    results = tuple(one_step(data, k, alpha=alpha, km=km, y=y) for k in range(data.p))
    p_values = np.array([r.p_value for r in results])
    statistics = np.array([r.statistic for r in results])
    selected = int(np.argmin(p_values))
    min_p = float(p_values[selected])
    return BonferroniResult(
        results=results, p_values=p_values, statistics=statistics,
        min_p=min_p, selected=selected, alpha=alpha,
        reject=bool(min_p < alpha / data.p),
    )


def oracle_test(data: SurvivalDataset, k: int, alpha: float = 0.05):
    """Single-predictor test with unadjusted normal calibration."""
    result = one_step(data, k, alpha=alpha)
    return result, bool(result.p_value < alpha)


def conservative_variance(
    data: SurvivalDataset,
    k: int,
    m_bound: Optional[float] = None,
    grid_size: int = 101,
) -> float:
    """Upper bound on the influence variance via a grid over the unknown
    covariance between U and the limiting predicted response.

    For each grid value m, the correction term
    (c_ue - m) / V^2 * ((u - ubar)^2 - V) is added to the influence values
    and the sample second moment taken; the maximum over the grid is a valid
    upper bound.  Default half-width is 4 standard deviations of the
    predicted responses.
    """
    if grid_size < 2:
        raise SurvScreenError(f"grid_size must be >= 2, got {grid_size}")
    km = fit_censoring_km(data.x, data.delta)
    y = _weighted_response(data.x, data.delta, survival_at(km, data.x))
    u = data.predictors[:, k]
    bundle = make_bundle(u, data.x, data.delta, y, km, k=k)
    ipw, car = influence_values(bundle, u, data.x, data.delta, y)
    star = ipw - car
    if m_bound is None:
        e_vals = bundle.rl.intercepts[0] + bundle.rl.slopes[0] * (u - bundle.rl.u_centers[0])
        m_bound = 4.0 * float(e_vals.std())
    if m_bound <= 0.0:
        raise SurvScreenError(f"m_bound must be positive, got {m_bound}")
    cu = u - bundle.u_mean
    base = (cu * cu - bundle.u_var) / (bundle.u_var * bundle.u_var)
    best = -np.inf
    for m in np.linspace(-m_bound, m_bound, grid_size):
        vals = star + (bundle.cov_u_e - m) * base
        best = max(best, float((vals * vals).mean()))
    return best
