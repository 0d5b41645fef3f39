"""Per-site marginal models and transforms to unit Frechet margins."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .depmeasures import empirical_cdf
from .spatial import InvalidInput

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class GEV:
    """Generalized extreme value law with location ``mu``, scale ``sigma`` and shape ``xi``."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInput("GEV scale must be positive")

    def _t(self, z):
        s = (np.asarray(z, dtype=float) - self.mu) / self.sigma
        if abs(self.xi) < 1e-10:
            return np.exp(-s)
        with np.errstate(invalid="ignore", divide="ignore"):
            base = 1 + self.xi * s
            return np.where(base > 0, np.abs(base) ** (-1 / self.xi), np.inf if self.xi > 0 else 0.0)

    def cdf(self, z):
        return np.exp(-self._t(z))

    def ppf(self, p):
        y = -np.log(np.asarray(p, dtype=float))
        if abs(self.xi) < 1e-10:
            return self.mu - self.sigma * np.log(y)
        return self.mu + self.sigma * (y ** (-self.xi) - 1) / self.xi

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.ppf(rng.uniform(size=n))


def gev_nll(params, z) -> float:
    """Negative log-likelihood of GEV(mu, sigma, xi); +inf outside the support."""
    mu, sigma, xi = params
    if sigma <= 0:
        return np.inf
    s = (z - mu) / sigma
    if abs(xi) < 1e-8:
        return float(len(z) * np.log(sigma) + np.sum(s) + np.sum(np.exp(-s)))
    base = 1 + xi * s
    if np.any(base <= 0):
        return np.inf
    lb = np.log(base)
    return float(len(z) * np.log(sigma) + (1 + 1 / xi) * np.sum(lb) + np.sum(np.exp(-lb / xi)))


@dataclass(frozen=True)
class GEVFit:
    model: GEV
    nll: float
    n: int
    converged: bool

    def standard_errors(self, z) -> np.ndarray:
        """Standard errors of (mu, sigma, xi) from a central-difference observed information."""
        z = np.asarray(z, dtype=float)
        z = z[np.isfinite(z)]
        p = np.array([self.model.mu, self.model.sigma, self.model.xi])
        step = 1e-4 * np.maximum(np.abs(p), 1e-2)
        H = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                ei = np.eye(3)[i] * step[i]
                ej = np.eye(3)[j] * step[j]
                H[i, j] = (gev_nll(p + ei + ej, z) - gev_nll(p + ei - ej, z)
                           - gev_nll(p - ei + ej, z) + gev_nll(p - ei - ej, z)) / (4 * step[i] * step[j])
        return np.sqrt(np.diag(np.linalg.inv(H)))


def fit_gev_site(series, tol: float = 1e-8, maxiter: int = 20_000) -> GEVFit:
    """Maximum-likelihood GEV fit by Nelder-Mead on the negative log-likelihood.

    Starts from the Gumbel moment estimates of location and scale with
    shape 0.1.
    """
    z = np.asarray(series, dtype=float)
    z = z[np.isfinite(z)]
    if len(z) < 30:
        raise InvalidInput("need at least 30 finite observations for a GEV fit")
    sd = float(np.std(z))
    if sd <= 1e-12 * max(1.0, abs(float(np.mean(z)))):
        raise ArithmeticError("constant series: GEV scale estimate collapses to 0")
    sigma0 = np.sqrt(6) * sd / np.pi
    mu0 = float(np.mean(z)) - EULER_GAMMA * sigma0
    x0 = np.array([mu0, sigma0, 0.1])
    if not np.isfinite(gev_nll(x0, z)):
        x0[2] = 0.0
    res = optimize.minimize(gev_nll, x0, args=(z,), method="Nelder-Mead",
                            options={"xatol": tol, "fatol": tol, "maxiter": maxiter, "maxfev": maxiter,
                                     "adaptive": True})
    # a restart from the optimum cleans up premature simplex collapse
    res = optimize.minimize(gev_nll, res.x, args=(z,), method="Nelder-Mead",
                            options={"xatol": tol, "fatol": tol, "maxiter": maxiter, "maxfev": maxiter,
                                     "adaptive": True})
    mu, sigma, xi = res.x
    if not res.success or not np.isfinite(res.fun):
        raise ArithmeticError(f"GEV fit did not converge: {res.message}")
    if sigma <= 0:
        raise ArithmeticError("GEV scale estimate is not positive")
    return GEVFit(GEV(float(mu), float(sigma), float(xi)), float(res.fun), len(z), bool(res.success))


@dataclass(frozen=True)
class MarginModel:
    """Per-site margin: a fitted GEV or the empirical rank transform (``gev is None``)."""

    gev: GEV | None = None

    @property
    def kind(self):
        return "empirical" if self.gev is None else "gev"


def to_unit_frechet(series, model: MarginModel | None = None) -> np.ndarray:
    """Map a series to unit Frechet margins through z -> -1 / log(G(z)).

    G is the fitted GEV cdf or the empirical cdf rank / (n + 1). GEV cdf
    values at 0 or 1 are clipped to (1/(n+1), n/(n+1)). NaN stays NaN.
    """
    z = np.asarray(series, dtype=float)
    model = model or MarginModel()
    ok = ~np.isnan(z)
    out = np.full(z.shape, np.nan)
    n = int(ok.sum())
    if n == 0:
        return out
    if model.gev is None:
        u = empirical_cdf(z[ok][:, None])[:, 0]
    else:
        u = model.gev.cdf(z[ok])
        lo, hi = 1 / (n + 1), n / (n + 1)
        bad = (u <= 0) | (u >= 1)
        if np.any(bad):
            log.warning("%d value(s) outside the fitted GEV support; clipped", int(bad.sum()))
        u = np.clip(u, lo, hi) if np.any(bad) else u
    out[ok] = -1.0 / np.log(u)
    return out


def transform_field(values: np.ndarray, kind: str = "empirical") -> tuple[np.ndarray, list]:
    """Column-wise unit Frechet transform; returns the matrix and the per-site models."""
    cols, models = [], []
    for j in range(values.shape[1]):
        if kind == "gev":
            m = MarginModel(fit_gev_site(values[:, j]).model)
        elif kind == "empirical":
            m = MarginModel()
        else:
            raise InvalidInput(f"unknown margin model {kind!r}")
        cols.append(to_unit_frechet(values[:, j], m))
        models.append(m)
    return np.column_stack(cols), models
