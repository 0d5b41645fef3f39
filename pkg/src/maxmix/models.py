"""Max-stable families, their inverted counterparts and max-mixtures.

Each family exposes its pairwise extremal coefficient ``theta(h)`` and its
bivariate exponent function ``exponent(h, x1, x2)`` in closed form.
Distances ``h`` may be scalars or arrays; the Smith model also accepts lag
vectors (last axis of length 2) so that anisotropic covariance matrices
are supported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .spatial import InvalidInput


def _nonneg(h):
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or np.any(np.isnan(h)):
        raise InvalidInput("lag distances must be nonnegative")
    return h


def _positive_args(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(x1 <= 0) or np.any(x2 <= 0):
        raise InvalidInput("exponent function arguments must be positive")
    return x1, x2


@dataclass(frozen=True)
class ExponentialCorrelation:
    """rho(h) = exp(-h / range)."""

    range: float

    def __post_init__(self):
        if not self.range > 0:
            raise InvalidInput("correlation range must be positive")

    def __call__(self, h):
        return np.exp(-np.asarray(h, dtype=float) / self.range)


@dataclass(frozen=True)
class PowerVariogram:
    """Variogram 2*gamma(h) = (h / scale)**exponent with exponent in (0, 2]."""

    scale: float
    exponent: float = 2.0

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidInput("variogram scale must be positive")
        if not 0 < self.exponent <= 2:
            raise InvalidInput("variogram exponent must lie in (0, 2]")

    def semivariogram(self, h):
        return 0.5 * (np.asarray(h, dtype=float) / self.scale) ** self.exponent

    __call__ = semivariogram


def _bivariate_log_gaussian_exponent(b, x1, x2):
    """Husler-Reiss type exponent shared by Smith and Brown-Resnick.

    ``b`` is the Mahalanobis distance beta(h) (Smith) or sqrt(2 gamma(h))
    (Brown-Resnick). b == 0 gives complete dependence.
    """
    b, x1, x2 = np.broadcast_arrays(np.asarray(b, float), x1, x2)
    out = np.array(np.maximum(1 / x1, 1 / x2), dtype=float)
    pos = b > 0
    if np.any(pos):
        bb, a1, a2 = b[pos], x1[pos], x2[pos]
        lr = np.log(a2 / a1)
        out[pos] = special.ndtr(bb / 2 + lr / bb) / a1 + special.ndtr(bb / 2 - lr / bb) / a2
    return out[()]


class LagVectors(np.ndarray):
    """Marker subclass: an array whose last axis holds (dx, dy) lag vectors."""


def lag_vectors(v) -> LagVectors:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 2:
        raise InvalidInput("lag vectors need a last axis of length 2")
    return v.view(LagVectors)


@dataclass(frozen=True)
class Smith:
    """Gaussian storm-profile model with 2x2 covariance ``sigma``."""

    sigma: tuple = ((1.0, 0.0), (0.0, 1.0))
    family: str = field(default="smith", init=False)

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (2, 2) or not np.allclose(s, s.T):
            raise InvalidInput("Smith covariance must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(s) <= 0):
            raise InvalidInput("Smith covariance must be positive definite")
        object.__setattr__(self, "sigma", tuple(map(tuple, s.tolist())))

    @classmethod
    def isotropic(cls, scale: float) -> "Smith":
        return cls(((scale ** 2, 0.0), (0.0, scale ** 2)))

    @property
    def matrix(self):
        return np.asarray(self.sigma, dtype=float)

    def beta(self, h):
        """Mahalanobis norm sqrt(h' Sigma^-1 h) of lag vectors or distances."""
        s = self.matrix
        if isinstance(h, LagVectors):
            v = np.asarray(h)
            return np.sqrt(np.einsum("...i,ij,...j->...", v, np.linalg.inv(s), v))
        if not np.isclose(s[0, 1], 0.0) or not np.isclose(s[0, 0], s[1, 1]):
            raise InvalidInput("scalar lags need an isotropic Smith covariance; pass lag_vectors()")
        return _nonneg(h) / math.sqrt(s[0, 0])

    def theta(self, h):
        return 2 * special.ndtr(self.beta(h) / 2)

    def exponent(self, h, x1, x2):
        x1, x2 = _positive_args(x1, x2)
        return _bivariate_log_gaussian_exponent(self.beta(h), x1, x2)

    def params(self):
        return {"family": self.family, "sigma": [list(r) for r in self.sigma]}


def disk_overlap(h, radius: float):
    """Fraction of a disk's area shared with its translate by h."""
    u = np.clip(np.asarray(h, dtype=float) / (2 * radius), 0.0, 1.0)
    return (2 / np.pi) * (np.arccos(u) - u * np.sqrt(1 - u * u))


def linear_overlap(h, radius: float):
    u = np.asarray(h, dtype=float) / (2 * radius)
    return np.where(u <= 1, 1 - u, 0.0)


@dataclass(frozen=True)
class TEG:
    """Truncated extremal Gaussian model with disks of fixed radius.

    ``overlap="disk"`` uses the exact area fraction of two disks at distance
    h, which is what the simulator produces. ``overlap="linear"`` uses the
    one dimensional form (1 - h/2r) on [0, 2r].
    """

    radius: float
    corr: ExponentialCorrelation
    overlap: str = "disk"
    family: str = field(default="teg", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInput("TEG disk radius must be positive")
        if isinstance(self.corr, (int, float)):
            object.__setattr__(self, "corr", ExponentialCorrelation(float(self.corr)))
        if self.overlap not in ("disk", "linear"):
            raise InvalidInput("overlap must be 'disk' or 'linear'")

    def alpha(self, h):
        h = _nonneg(h)
        if self.overlap == "disk":
            return disk_overlap(h, self.radius)
        return linear_overlap(h, self.radius)

    def theta(self, h):
        h = _nonneg(h)
        rho = self.corr(h)
        return 2 - self.alpha(h) * (1 - np.sqrt((1 - rho) / 2))

    def exponent(self, h, x1, x2):
        x1, x2 = _positive_args(x1, x2)
        h = _nonneg(h)
        rho = self.corr(h)
        # 1 - 2 (rho + 1) x1 x2 / (x1 + x2)^2 written without cancellation
        root = np.sqrt(((x1 - x2) ** 2 + 2 * (1 - rho) * x1 * x2) / (x1 + x2) ** 2)
        return (1 / x1 + 1 / x2) * (1 - self.alpha(h) / 2 * (1 - root))

    def params(self):
        return {"family": self.family, "radius": self.radius, "range": self.corr.range,
                "overlap": self.overlap}


@dataclass(frozen=True)
class BrownResnick:
    variogram: PowerVariogram
    family: str = field(default="brown-resnick", init=False)

    def theta(self, h):
        g = self.variogram.semivariogram(_nonneg(h))
        return 2 * special.ndtr(np.sqrt(g / 2))

    def exponent(self, h, x1, x2):
        x1, x2 = _positive_args(x1, x2)
        g = self.variogram.semivariogram(_nonneg(h))
        return _bivariate_log_gaussian_exponent(np.sqrt(2 * g), x1, x2)

    def params(self):
        return {"family": self.family, "scale": self.variogram.scale,
                "exponent": self.variogram.exponent}


def extremal_t_normalizer(df: float) -> float:
    """Constant c with E[c * max(0, T)**df] = 1 for standard Gaussian T."""
    return math.sqrt(math.pi) / (2 ** (df / 2 - 1) * math.gamma((df + 1) / 2))


@dataclass(frozen=True)
class ExtremalT:
    df: float
    corr: ExponentialCorrelation
    family: str = field(default="extremal-t", init=False)

    def __post_init__(self):
        if not self.df >= 1:
            raise InvalidInput("extremal-t degrees of freedom must be >= 1")
        if isinstance(self.corr, (int, float)):
            object.__setattr__(self, "corr", ExponentialCorrelation(float(self.corr)))

    def theta(self, h):
        rho = self.corr(_nonneg(h))
        v = self.df
        return 2 * special.stdtr(v + 1, np.sqrt((v + 1) * (1 - rho) / (1 + rho)))

    def exponent(self, h, x1, x2):
        x1, x2 = _positive_args(x1, x2)
        rho = np.asarray(self.corr(_nonneg(h)), dtype=float)
        v = self.df
        rho, x1, x2 = np.broadcast_arrays(rho, x1, x2)
        out = np.array(np.maximum(1 / x1, 1 / x2), dtype=float)
        ok = rho < 1
        if np.any(ok):
            r, a1, a2 = rho[ok], x1[ok], x2[ok]
            scale = np.sqrt((v + 1) / (1 - r * r))
            out[ok] = (special.stdtr(v + 1, scale * ((a2 / a1) ** (1 / v) - r)) / a1
                       + special.stdtr(v + 1, scale * ((a1 / a2) ** (1 / v) - r)) / a2)
        return out[()]

    def params(self):
        return {"family": self.family, "df": self.df, "range": self.corr.range}


MAX_STABLE_TYPES = (Smith, TEG, BrownResnick, ExtremalT)


def theta_closed_form(spec, h):
    """Pairwise extremal coefficient of a max-stable model at lag h."""
    return spec.theta(h)


def exponent_bivariate(spec, h, x1, x2):
    """Bivariate exponent function V(x1, x2) at lag h."""
    return spec.exponent(h, x1, x2)


@dataclass(frozen=True)
class MaxMixture:
    """Z = max(a X, (1 - a) Y) with X max-stable and Y an inverted max-stable."""

    a: float
    x_spec: object
    y_spec: object

    def __post_init__(self):
        if not 0 <= self.a <= 1:
            raise InvalidInput("mixing coefficient must lie in [0, 1]")
        for s in (self.x_spec, self.y_spec):
            if not isinstance(s, MAX_STABLE_TYPES):
                raise InvalidInput(f"not a max-stable spec: {s!r}")

    def theta_x(self, h):
        return self.x_spec.theta(h)

    def theta_y(self, h):
        return self.y_spec.theta(h)

    def params(self):
        return {"a": self.a, "x": self.x_spec.params(), "y": self.y_spec.params()}


def spec_from_dict(d: dict):
    """Inverse of ``params()``: build a max-stable spec from a plain dict."""
    fam = d.get("family")
    try:
        if fam == "smith":
            if "sigma" in d:
                return Smith(tuple(map(tuple, d["sigma"])))
            return Smith.isotropic(float(d["scale"]))
        if fam == "teg":
            return TEG(float(d["radius"]), ExponentialCorrelation(float(d["range"])),
                       d.get("overlap", "disk"))
        if fam == "brown-resnick":
            return BrownResnick(PowerVariogram(float(d["scale"]), float(d.get("exponent", 2.0))))
        if fam == "extremal-t":
            return ExtremalT(float(d["df"]), ExponentialCorrelation(float(d["range"])))
    except KeyError as exc:
        raise InvalidInput(f"missing parameter {exc} for family {fam!r}") from None
    raise InvalidInput(f"unknown max-stable family {fam!r}")


def mixture_from_dict(d: dict) -> MaxMixture:
    return MaxMixture(float(d["a"]), spec_from_dict(d["x"]), spec_from_dict(d["y"]))


def model_m1(r_x, phi_x, a, r_y, phi_y) -> MaxMixture:
    """TEG max-stable part mixed with an inverted TEG."""
    return MaxMixture(a, TEG(r_x, ExponentialCorrelation(phi_x)), TEG(r_y, ExponentialCorrelation(phi_y)))


def model_m2(phi_x, tau, a, df, phi_y) -> MaxMixture:
    """Brown-Resnick max-stable part mixed with an inverted extremal-t."""
    return MaxMixture(a, BrownResnick(PowerVariogram(phi_x, tau)), ExtremalT(df, ExponentialCorrelation(phi_y)))
