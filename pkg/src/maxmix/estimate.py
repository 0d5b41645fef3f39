"""Least-squares fit of (theta_X, theta_Y) per lag and the mixing-coefficient criterion DC(a)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .depmeasures import MadogramCurve, flambda_madogram_empirical, flambda_mm_theoretical, uniform_scores
from .simulate import FieldSample
from .spatial import InvalidInput, LagBins

NU_FLOOR = 1e-12


@dataclass(frozen=True)
class NlsConfig:
    """Settings of the theta fit and of the DC(a) selection.

    ``weights`` is ``"equal"`` or ``("quantile", q)``; the latter keeps only
    lags up to the q-quantile of all pair distances. ``margins`` overrides
    the field's margins tag when computing uniform scores (``"empirical"``
    forces rank-based scores).
    """

    lambdas: tuple = (1.0, 3.0)
    lambda_prime: float = 1.5
    a_grid: tuple = tuple(np.round(np.linspace(0, 1, 101), 2))
    weights: object = "equal"
    grid: int = 41
    refine: bool = True
    tol: float = 1e-8
    margins: str | None = None

    def __post_init__(self):
        lams = tuple(float(x) for x in self.lambdas)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "a_grid", tuple(float(x) for x in self.a_grid))
        if len(set(lams)) < 2:
            raise InvalidInput("need at least two distinct fitting lambdas")
        if any(x <= 0 for x in lams) or self.lambda_prime <= 0:
            raise InvalidInput("lambdas must be positive")
        if float(self.lambda_prime) in lams:
            raise InvalidInput("held-out lambda must not be one of the fitting lambdas")
        if not self.a_grid or any(not 0 <= a <= 1 for a in self.a_grid):
            raise InvalidInput("a-grid must be a nonempty subset of [0, 1]")
        w = self.weights
        if isinstance(w, (list, tuple)):
            if len(w) != 2 or w[0] != "quantile" or not 0 < float(w[1]) <= 1:
                raise InvalidInput("weights must be 'equal' or ('quantile', q) with q in (0, 1]")
            object.__setattr__(self, "weights", ("quantile", float(w[1])))
        elif w != "equal":
            raise InvalidInput("weights must be 'equal' or ('quantile', q)")
        if self.grid < 2:
            raise InvalidInput("grid resolution must be at least 2")

    @property
    def all_lambdas(self):
        return self.lambdas + (float(self.lambda_prime),)


STUDY_A_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class ThetaEstimates:
    a: float
    h: np.ndarray
    theta_x: np.ndarray
    theta_y: np.ndarray
    objective: np.ndarray
    count: np.ndarray
    boundary_x: np.ndarray = field(default=None)
    boundary_y: np.ndarray = field(default=None)

    def __post_init__(self):
        eps = 1e-6
        if self.boundary_x is None:
            self.boundary_x = (self.theta_x < 1 + eps) | (self.theta_x > 2 - eps)
        if self.boundary_y is None:
            self.boundary_y = (self.theta_y < 1 + eps) | (self.theta_y > 2 - eps)


@dataclass
class DCResult:
    a_grid: np.ndarray
    dc: np.ndarray
    excluded: np.ndarray
    estimates: list
    a_star: float = field(init=False)
    tie: bool = field(init=False)

    def __post_init__(self):
        finite = np.where(np.isfinite(self.dc), self.dc, np.inf)
        k = int(np.argmin(finite))
        self.a_star = float(self.a_grid[k])
        self.tie = bool(np.sum(finite == finite[k]) > 1)


def q_statistics(field: FieldSample, pair: tuple, lam: float, margins: str | None = None) -> np.ndarray:
    """Q_i = 0.5 |F^lam(Z_i(s_l)) - F^lam(Z_i(s_p))| for every replicate of one site pair."""
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    u = uniform_scores(field, margins)
    i, j = pair
    return 0.5 * np.abs(u[:, i] ** lam - u[:, j] ** lam)


def empirical_curves(field: FieldSample, bins: LagBins, lambdas, margins: str | None = None) -> dict:
    """Binned empirical F^lambda-madograms for each lambda, sharing one set of uniform scores."""
    if len(bins) == 0:
        raise InvalidInput("no lag bins")
    if field.n < 2:
        raise InvalidInput("need at least 2 replications")
    u = uniform_scores(field, margins)
    return {float(l): flambda_madogram_empirical(field, l, bins, scores=u) for l in lambdas}


def _grid(config: NlsConfig):
    g = np.linspace(1.0, 2.0, config.grid)
    # theta_X major, theta_Y minor, so argmin's first hit is the smallest theta_X then theta_Y
    tx, ty = np.meshgrid(g, g, indexing="ij")
    return tx.ravel(), ty.ravel()


def _fit_one(a, lams, nu, x0, free, tol, step=0.025):
    """Nelder-Mead refinement of one bin, projected onto the box [1, 2]^2."""
    def obj(p):
        th = np.clip(p, 1.0, 2.0)
        tx = th[0] if free[0] else x0[0]
        ty = th[-1] if free[1] else x0[1]
        return float(np.sum((nu - flambda_mm_theoretical(a, lams, tx, ty)) ** 2))

    start = np.array([x0[k] for k in (0, 1) if free[k]])
    # unconstrained simplex on the box-projected objective; scipy's bounded variant clips
    # trial points onto the bound and collapses when the start sits there
    simplex = np.tile(start, (len(start) + 1, 1))
    for k in range(len(start)):
        simplex[k + 1, k] += step if start[k] <= 1.5 else -step
    res = optimize.minimize(obj, start, method="Nelder-Mead",
                            options={"xatol": tol, "fatol": 1e-16, "maxiter": 2000,
                                     "initial_simplex": simplex})
    p = np.clip(res.x, 1.0, 2.0)
    out = list(x0)
    it = iter(p)
    for k in (0, 1):
        if free[k]:
            out[k] = float(next(it))
    return out, float(res.fun)


def nls_fit_theta(field: FieldSample | None, a: float, config: NlsConfig, bins: LagBins | None = None,
                  curves: dict | None = None) -> ThetaEstimates:
    """Per-lag least-squares estimate of (theta_X, theta_Y) in [1, 2]^2 for a given a.

    Minimizes sum over lambda in ``config.lambdas`` of
    (nu_hat_lambda(h) - Phi(a, lambda, theta_X, theta_Y))^2, which has the
    same minimizer as the replicate-level criterion (the two differ by a
    term that does not depend on theta). ``curves`` may carry precomputed
    empirical madograms keyed by lambda.
    """
    if not 0 <= a <= 1:
        raise InvalidInput("a must lie in [0, 1]")
    if curves is None:
        if bins is None or field is None:
            raise InvalidInput("need a field and bins, or precomputed curves")
        curves = empirical_curves(field, bins, config.lambdas, config.margins)
    lams = np.array(config.lambdas)
    ref = curves[lams[0]]
    if len(ref) == 0:
        raise InvalidInput("empty lag bins")
    nu = np.vstack([curves[l].value for l in lams])  # (n_lambda, n_bins)
    tx, ty = _grid(config)
    # theta_X drops out of Phi at a = 0 and theta_Y at a = 1; the absent one is pinned to 1
    free = (a > 1e-12, a < 1 - 1e-8)
    if not free[1]:
        tx, ty = np.linspace(1, 2, config.grid), np.ones(config.grid)
    elif not free[0]:
        tx, ty = np.ones(config.grid), np.linspace(1, 2, config.grid)
    phi = np.vstack([flambda_mm_theoretical(a, l, tx, ty) for l in lams])  # (n_lambda, n_grid)
    obj = ((nu[:, :, None] - phi[:, None, :]) ** 2).sum(axis=0)  # (n_bins, n_grid)
    best = np.argmin(obj, axis=1)
    est_x = tx[best].copy()
    est_y = ty[best].copy()
    fval = obj[np.arange(len(best)), best]
    if config.refine:
        for b in range(len(best)):
            p, f = _fit_one(a, lams, nu[:, b], (est_x[b], est_y[b]), free, config.tol,
                            1.0 / (config.grid - 1))
            if f < fval[b]:
                est_x[b], est_y[b], fval[b] = p[0], p[1], f
    return ThetaEstimates(a, ref.h.copy(), est_x, est_y, fval, ref.count.copy())


def lag_weights(h: np.ndarray, config: NlsConfig, pair_h: np.ndarray | None = None) -> np.ndarray:
    if config.weights == "equal":
        return np.ones(len(h))
    q = config.weights[1]
    r = np.quantile(pair_h if pair_h is not None else h, q)
    return (np.asarray(h) <= r).astype(float)


def dc_criterion(field: FieldSample | None, a: float, estimates: ThetaEstimates, config: NlsConfig,
                 bins: LagBins | None = None, curve: MadogramCurve | None = None,
                 weights: np.ndarray | None = None) -> tuple[float, int]:
    """DC(a) = sum_h w(h) [nu_hat_{lambda'}(h) / nu_tilde_{lambda'}(h) - 1]^2.

    nu_tilde plugs the fitted (theta_X, theta_Y) into the max-mixture
    madogram at lambda'. Lags where nu_tilde < 1e-12 are skipped; the
    number skipped is returned alongside the value.
    """
    if abs(estimates.a - a) > 1e-12:
        raise InvalidInput("estimates were fitted with a different a")
    lp = float(config.lambda_prime)
    if lp in config.lambdas:
        raise InvalidInput("held-out lambda must not be a fitting lambda")
    if curve is None:
        if field is None or bins is None:
            raise InvalidInput("need a field and bins, or a precomputed curve")
        curve = flambda_madogram_empirical(field, lp, bins, config.margins)
    if weights is None:
        pair_h = bins.pairs.h if bins is not None else None
        weights = lag_weights(curve.h, config, pair_h)
    nu_t = flambda_mm_theoretical(a, lp, estimates.theta_x, estimates.theta_y)
    keep = (nu_t >= NU_FLOOR) & (weights > 0)
    excluded = int(np.sum((nu_t < NU_FLOOR) & (weights > 0)))
    if not np.any(keep):
        raise InvalidInput("every lag was excluded from DC(a)")
    dc = float(np.sum(weights[keep] * (curve.value[keep] / nu_t[keep] - 1) ** 2))
    return dc, excluded


def select_a(field: FieldSample, config: NlsConfig, bins: LagBins) -> DCResult:
    """Evaluate DC(a) over ``config.a_grid`` and return the curve with its minimizer.

    Ties go to the smallest a (the grid is sorted first).
    """
    grid = np.array(sorted(config.a_grid))
    if len(grid) == 0:
        raise InvalidInput("empty a-grid")
    curves = empirical_curves(field, bins, config.all_lambdas, config.margins)
    cprime = curves[float(config.lambda_prime)]
    weights = lag_weights(cprime.h, config, bins.pairs.h)
    dcs, excl, ests = [], [], []
    for a in grid:
        est = nls_fit_theta(None, float(a), config, curves=curves)
        d, e = dc_criterion(None, float(a), est, config, curve=cprime, weights=weights)
        dcs.append(d)
        excl.append(e)
        ests.append(est)
    return DCResult(grid, np.array(dcs), np.array(excl), ests)


def mse_rel(estimates, truth) -> np.ndarray:
    """Per-lag relative MSE: mean over runs of (theta_hat - theta)^2 / theta.

    ``estimates`` is an (M, n_lags) array of curves; ``truth`` has n_lags values.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.asarray(truth, dtype=float)
    if est.shape[-1] != tru.shape[-1]:
        raise InvalidInput("estimate and truth lags do not align")
    return np.mean((est - tru) ** 2 / tru, axis=0)


def window_average(estimates: ThetaEstimates, h0: float, half_width: float = 10.0,
                   weighting: str = "pairs") -> tuple[float, float]:
    """Average (theta_X, theta_Y) over lags within [h0 - w, h0 + w].

    ``weighting="pairs"`` weights each lag by its pair count, ``"plain"``
    gives equal weight.
    """
    m = np.abs(estimates.h - h0) <= half_width
    if not np.any(m):
        raise InvalidInput(f"no lag within {half_width} of {h0}")
    w = estimates.count[m].astype(float) if weighting == "pairs" else np.ones(m.sum())
    return (float(np.average(estimates.theta_x[m], weights=w)),
            float(np.average(estimates.theta_y[m], weights=w)))


def injectivity_probe(a: float, lambdas=(1.0, 3.0), resolution: int = 61) -> float:
    """Smallest image separation of theta -> (Phi(a, l1, theta), Phi(a, l2, theta)) over a grid.

    Returns min over pairs of grid points at least one grid step apart of
    |Phi(p) - Phi(q)| / |p - q|. A value near 0 signals a possible collision
    of the map on [1, 2]^2. Only the coordinates that enter the map are
    varied when a is 0 or 1.
    """
    g = np.linspace(1, 2, resolution)
    if a >= 1 - 1e-8:
        pts = np.column_stack([g, np.ones_like(g)])
    elif a <= 1e-12:
        pts = np.column_stack([np.ones_like(g), g])
    else:
        tx, ty = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([tx.ravel(), ty.ravel()])
    img = np.column_stack([flambda_mm_theoretical(a, l, pts[:, 0], pts[:, 1]) for l in lambdas])
    best = np.inf
    for k in range(len(pts)):
        d_dom = np.linalg.norm(pts[k + 1:] - pts[k], axis=1)
        d_img = np.linalg.norm(img[k + 1:] - img[k], axis=1)
        if len(d_dom):
            best = min(best, float(np.min(d_img / d_dom)))
    return best
