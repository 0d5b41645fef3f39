"""Conditional exceedance probabilities P[Z(s*) > z | Z(s) > z] for max-mixtures."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .depmeasures import empirical_cdf
from .simulate import inverted_frechet
from .spatial import InvalidInput


@dataclass(frozen=True)
class ConditionalQuery:
    h0: float
    a: float
    theta_x: float
    theta_y: float
    z: float

    def __post_init__(self):
        if not self.h0 > 0:
            raise InvalidInput("separation distance must be positive")
        if not 0 <= self.a <= 1:
            raise InvalidInput("a must lie in [0, 1]")
        for t in (self.theta_x, self.theta_y):
            if not 1 <= t <= 2:
                raise InvalidInput("extremal coefficients must lie in [1, 2]")
        if not self.z > 0:
            raise InvalidInput("threshold z must be positive")

    @classmethod
    def from_quantile(cls, h0, a, theta_x, theta_y, q):
        """Threshold given as a quantile q of the unit Frechet margin."""
        if not 0 < q < 1:
            raise InvalidInput("quantile must lie in (0, 1)")
        return cls(h0, a, theta_x, theta_y, -1.0 / np.log(q))


def conditional_exceedance_mm(a, theta_x=None, theta_y=None, z=None):
    """P[Z(s*) > z | Z(s) > z] for a max-mixture with the given pairwise coefficients.

    Accepts a ``ConditionalQuery`` as the only argument as well. Arrays
    broadcast.
    """
    if isinstance(a, ConditionalQuery):
        q = a
        a, theta_x, theta_y, z = q.a, q.theta_x, q.theta_y, q.z
    a, tx, ty, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, theta_x, theta_y, z)))
    if np.any(z <= 0):
        raise InvalidInput("threshold z must be positive")
    surv = -np.expm1(-1.0 / z)                 # 1 - e^{-1/z}
    surv_y = -np.expm1(-(1 - a) / z)           # 1 - e^{-(1-a)/z}
    num = 2 * surv - 1 + np.exp(-a * tx / z) * (1 - 2 * surv_y + surv_y ** ty)
    p = np.clip(num / surv, 0.0, 1.0)
    return p[()] if p.ndim == 0 else p


def conditional_exceedance_empirical(target, cond, z: float) -> float:
    """#(both > z) / #(cond > z) over jointly observed entries; NaN when cond never exceeds z."""
    t = np.asarray(target, dtype=float)
    c = np.asarray(cond, dtype=float)
    if t.shape != c.shape:
        raise InvalidInput("series must be aligned")
    ok = ~(np.isnan(t) | np.isnan(c))
    ce = (c > z) & ok
    n = int(ce.sum())
    if n == 0:
        warnings.warn("no conditioning exceedance; conditional probability undefined")
        return float("nan")
    return float(np.sum(ce & (t > z)) / n)


def _to_frechet(series):
    """Empirical unit Frechet scale: -1 / log(rank / (n + 1))."""
    u = empirical_cdf(np.asarray(series, dtype=float)[:, None])[:, 0]
    return -1.0 / np.log(u)


def pp_curve(target, cond, a: float, theta_x: float, theta_y: float, q_grid) -> list[dict]:
    """(empirical, model) conditional exceedance pairs for each quantile level q.

    Both series are moved to the empirical unit Frechet scale; the
    threshold z is the empirical q-quantile of the conditioning series on
    that scale.
    """
    q_grid = np.asarray(q_grid, dtype=float)
    if np.any((q_grid <= 0) | (q_grid >= 1)):
        raise InvalidInput("quantile levels must lie in (0, 1)")
    t = np.asarray(target, dtype=float)
    c = np.asarray(cond, dtype=float)
    ok = ~(np.isnan(t) | np.isnan(c))
    ft = _to_frechet(t[ok])
    fc = _to_frechet(c[ok])
    rows = []
    for q in q_grid:
        z = float(np.quantile(fc, q))
        rows.append({
            "q": float(q),
            "z": z,
            "empirical": conditional_exceedance_empirical(ft, fc, z),
            "model": float(conditional_exceedance_mm(a, theta_x, theta_y, z)),
        })
    return rows


def sample_max_stable_pair(theta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws of a bivariate unit Frechet max-stable pair with extremal coefficient theta.

    Uses X_i = max(c U_0, (1 - c) U_i) with c = 2 - theta and U i.i.d. unit
    Frechet, whose exponent function satisfies V(z, z) = theta / z.
    """
    c = 2.0 - theta
    u = 1.0 / rng.exponential(size=(n, 3))
    return np.maximum(c * u[:, :1], (1 - c) * u[:, 1:])


def sample_mm_pair(a: float, theta_x: float, theta_y: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws of max(a X, (1 - a) Y) at two sites, X and inverted-Y independent."""
    x = sample_max_stable_pair(theta_x, n, rng)
    y = inverted_frechet(sample_max_stable_pair(theta_y, n, rng))
    return np.maximum(a * x, (1 - a) * y)
