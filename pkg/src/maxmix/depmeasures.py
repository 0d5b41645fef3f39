"""Dependence measures: theoretical and empirical F^lambda-madograms, chi, chi-bar, eta."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.stats import rankdata

from .models import MaxMixture, exponent_bivariate, theta_closed_form
from .simulate import FieldSample
from .spatial import InvalidInput, LagBins, Pairs, sector_of

log = logging.getLogger(__name__)

__all__ = [
    "MadogramCurve", "ThetaCurve", "theta_closed_form", "exponent_bivariate",
    "uniform_scores", "pair_madograms", "flambda_madogram_empirical", "fmadogram_empirical",
    "theta_from_fmadogram", "flambda_ms", "flambda_ims", "flambda_mm_theoretical",
    "flambda_integral_oracle", "chi_chibar_empirical", "chi_mm", "eta_of",
]

# switch to the max-stable limit when 1 - a is below this
A_ONE_TOL = 1e-8
A_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class MadogramCurve:
    lam: float
    h: np.ndarray
    value: np.ndarray
    count: np.ndarray
    kind: str = "empirical"

    def __len__(self):
        return len(self.h)

    def rows(self):
        for h, v, c in zip(self.h, self.value, self.count):
            yield {"lambda": self.lam, "h": float(h), "value": float(v), "count": int(c), "kind": self.kind}


@dataclass(frozen=True)
class ThetaCurve:
    h: np.ndarray
    theta: np.ndarray
    role: str = "theta_X"
    clamped: np.ndarray | None = None


# --------------------------------------------------------------------------
# closed forms

def _check_domain(a, lam, tx, ty):
    a, lam, tx, ty = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, lam, tx, ty)))
    if np.any((a < 0) | (a > 1)):
        raise InvalidInput("a must lie in [0, 1]")
    if np.any(lam <= 0):
        raise InvalidInput("lambda must be positive")
    for t in (tx, ty):
        if np.any((t < 1 - 1e-12) | (t > 2 + 1e-12)):
            raise InvalidInput("extremal coefficients must lie in [1, 2]")
    return a, lam, tx, ty


def _beta(p, q):
    return np.exp(special.gammaln(p) + special.gammaln(q) - special.gammaln(p + q))


def flambda_ms(lam, theta):
    """F^lambda-madogram of a simple max-stable pair with extremal coefficient theta."""
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return lam / (1 + lam) * (theta - 1) / (lam + theta)


def flambda_ims(lam, theta_y):
    """F^lambda-madogram of an inverted max-stable pair."""
    lam = np.asarray(lam, dtype=float)
    ty = np.asarray(theta_y, dtype=float)
    return 1 / (1 + lam) - lam * ty / (lam + ty) * _beta(lam, ty)


def flambda_mm_theoretical(a, lam, theta_x, theta_y):
    """F^lambda-madogram of a max-mixture pair as a function of (a, lambda, theta_X, theta_Y)."""
    a, lam, tx, ty = _check_domain(a, lam, theta_x, theta_y)
    out = np.empty(a.shape)
    one = (1 - a) < A_ONE_TOL
    zero = a < A_ZERO_TOL
    mid = ~(one | zero)
    out[one] = flambda_ms(lam[one], tx[one])
    out[zero] = flambda_ims(lam[zero], ty[zero])
    if np.any(mid):
        a_, l_, x_, y_ = a[mid], lam[mid], tx[mid], ty[mid]
        out[mid] = (l_ / (1 + l_)
                    - 2 * l_ / (a_ * (x_ - 1) + 1 + l_)
                    + l_ / (a_ * x_ + l_)
                    - l_ * y_ / ((1 - a_) * y_ + a_ * x_ + l_) * _beta((a_ * x_ + l_) / (1 - a_), y_))
    return out[()] if out.ndim == 0 else out


def flambda_integral_oracle(a, lam, theta_x, theta_y, epsabs=1e-13, epsrel=1e-12):
    """Same quantity as ``flambda_mm_theoretical`` by quadrature of the CDF of the pair maximum.

    W = max(F^lam(Z1), F^lam(Z2)) has CDF G on [0, 1] and
    nu = E[W] - 1/(1 + lam) = 1 - int_0^1 G - 1/(1 + lam).
    """
    a, lam, tx, ty = (float(v) for v in _check_domain(a, lam, theta_x, theta_y))
    if a >= 1:
        raise InvalidInput("the quadrature oracle needs a < 1")
    p_both = (a * (tx - 1) + 1) / lam
    p_x = a * tx / lam
    p_y = (1 - a) / lam

    def G(z):
        zx = z ** p_x
        return 2 * z ** p_both - zx + zx * (1 - z ** p_y) ** ty

    # t -> t**4 removes the endpoint singularity of z**p for small p
    val, err = integrate.quad(lambda t: 4 * t ** 3 * G(t ** 4), 0.0, 1.0,
                              epsabs=epsabs, epsrel=epsrel, limit=400)
    if not np.isfinite(val) or err > 1e-9:
        raise ArithmeticError(f"quadrature did not converge (error estimate {err:.2e})")
    return 1 - val - 1 / (1 + lam)


def chi_mm(spec: MaxMixture, h):
    """Tail dependence coefficient chi_Z(h) = a * (2 - theta_X(h))."""
    return spec.a * (2 - spec.x_spec.theta(h))


def eta_of(spec_y, h):
    """Coefficient of tail dependence 1 / theta_Y(h) of the inverted process."""
    return 1.0 / spec_y.theta(h)


# --------------------------------------------------------------------------
# empirical estimators

def uniform_scores(field: FieldSample, margins: str | None = None) -> np.ndarray:
    """Uniform scores F(Z) of a field (NaN kept for missing entries).

    ``margins="unit-frechet"`` uses exp(-1/z); anything else uses the
    per-site empirical CDF rank / (n_obs + 1).
    """
    margins = margins or field.margins
    v = field.values
    if margins == "unit-frechet":
        with np.errstate(divide="ignore"):
            return np.exp(-1.0 / v)
    if margins == "uniform":
        return v.copy()
    if margins in ("raw", "empirical"):
        return empirical_cdf(v)
    raise InvalidInput(f"unknown margins tag {margins!r}")


def empirical_cdf(v: np.ndarray) -> np.ndarray:
    """Column-wise rank / (n_obs + 1) with ties averaged; NaN stays NaN."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.nan)
    for j in range(v.shape[1]):
        ok = ~np.isnan(v[:, j])
        nobs = ok.sum()
        if nobs:
            out[ok, j] = rankdata(v[ok, j]) / (nobs + 1)
    return out


def _pair_sums(u: np.ndarray, pairs: Pairs, lam: float):
    """Per-pair sum of 0.5|u_i^lam - u_j^lam| over complete replicates, and the counts."""
    ul = u ** lam
    sums = np.empty(len(pairs))
    counts = np.empty(len(pairs), dtype=int)
    step = max(1, 4_000_000 // max(1, u.shape[0]))
    for s in range(0, len(pairs), step):
        i = pairs.i[s:s + step]
        j = pairs.j[s:s + step]
        d = 0.5 * np.abs(ul[:, i] - ul[:, j])
        ok = ~np.isnan(d)
        sums[s:s + step] = np.where(ok, d, 0.0).sum(axis=0)
        counts[s:s + step] = ok.sum(axis=0)
    return sums, counts


def pair_madograms(field: FieldSample, pairs: Pairs, lam: float = 1.0, margins: str | None = None,
                   scores: np.ndarray | None = None):
    """Point-cloud F^lambda-madogram: one value per pair, plus replicate counts."""
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    if field.n < 2:
        raise InvalidInput("need at least 2 replications")
    u = uniform_scores(field, margins) if scores is None else scores
    sums, counts = _pair_sums(u, pairs, lam)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts, counts


def flambda_madogram_empirical(field: FieldSample, lam: float, bins: LagBins,
                               margins: str | None = None, scores: np.ndarray | None = None
                               ) -> MadogramCurve:
    """Binned F^lambda-madogram: mean of 0.5|F^lam(Z_i(s)) - F^lam(Z_i(s+h))| over bin pairs and replicates.

    ``count`` is the number of pairs in each bin.
    """
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    if field.n < 2:
        raise InvalidInput("need at least 2 replications")
    u = uniform_scores(field, margins) if scores is None else scores
    sums, counts = _pair_sums(u, bins.pairs, lam)
    h, val, cnt = [], [], []
    for lag, m in zip(bins.lags, bins.members):
        tot = counts[m].sum()
        if tot == 0:
            warnings.warn(f"lag bin at h={lag:.4g} has no complete observations; dropped")
            continue
        h.append(lag)
        val.append(sums[m].sum() / tot)
        cnt.append(len(m))
    return MadogramCurve(float(lam), np.array(h), np.array(val), np.array(cnt, dtype=int), "empirical")


def fmadogram_empirical(field: FieldSample, bins: LagBins, margins: str | None = None) -> MadogramCurve:
    return flambda_madogram_empirical(field, 1.0, bins, margins)


def theta_from_fmadogram(nu, return_clamped: bool = False):
    """theta = (1/2 + nu) / (1/2 - nu), clamped to [1, 2]."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu >= 0.5):
        raise InvalidInput("F-madogram values must be below 1/2")
    raw = (0.5 + nu) / (0.5 - nu)
    theta = np.clip(raw, 1.0, 2.0)
    clamped = theta != raw
    if np.any(clamped):
        log.info("theta estimate clamped to [1, 2] at %d lag(s)", int(np.sum(clamped)))
    theta = theta[()] if theta.ndim == 0 else theta
    if return_clamped:
        return theta, (clamped[()] if clamped.ndim == 0 else clamped)
    return theta


def theta_curve(curve: MadogramCurve, role: str = "theta_X") -> ThetaCurve:
    theta, clamped = theta_from_fmadogram(curve.value, return_clamped=True)
    return ThetaCurve(curve.h, np.atleast_1d(theta), role, np.atleast_1d(clamped))


@dataclass(frozen=True)
class ChiCurve:
    h: np.ndarray
    chi: np.ndarray
    chibar: np.ndarray
    count: np.ndarray
    sector: np.ndarray | None = None


def _chi_pair(u, pairs: Pairs, thr: float):
    """Joint and marginal exceedance frequencies per pair over complete replicates."""
    ex = np.where(np.isnan(u), np.nan, (u > thr).astype(float))
    e1 = ex[:, pairs.i]
    e2 = ex[:, pairs.j]
    ok = ~(np.isnan(e1) | np.isnan(e2))
    n = ok.sum(axis=0)
    joint = np.where(ok, e1 * e2, 0.0).sum(axis=0)
    m2 = np.where(ok, e2, 0.0).sum(axis=0)
    m1 = np.where(ok, e1, 0.0).sum(axis=0)
    return joint, m1, m2, n


def chi_chibar_empirical(field: FieldSample, u: float, bins: LagBins | None = None,
                         sectors: int | None = None, pairs: Pairs | None = None) -> ChiCurve:
    """Empirical chi(h, u) and chi-bar(h, u) from per-site empirical ranks.

    Without ``bins`` one value per pair is returned. With ``sectors`` each
    bin is further split by direction (opposite directions folded).
    Undefined values (no exceedance) are NaN.
    """
    if not 0 < u < 1:
        raise InvalidInput("threshold u must lie in (0, 1)")
    pairs = bins.pairs if bins is not None else pairs
    if pairs is None:
        raise InvalidInput("need bins or pairs")
    sc = empirical_cdf(field.values)
    joint, m1, m2, n = _chi_pair(sc, pairs, u)

    def summarize(m):
        J, M2, M1, N = joint[m].sum(), m2[m].sum(), m1[m].sum(), n[m].sum()
        chi = J / M2 if M2 > 0 else np.nan
        pm = 0.5 * (M1 + M2) / N if N else 0.0
        pj = J / N if N else 0.0
        chibar = 2 * np.log(pm) / np.log(pj) - 1 if (pj > 0 and pm > 0 and pj < 1) else np.nan
        return chi, chibar

    if bins is None:
        groups = [(float(pairs.h[k]), np.array([k]), None) for k in range(len(pairs))]
    else:
        groups = []
        sec = sector_of(pairs.azimuth, sectors) if sectors else None
        for lag, m in zip(bins.lags, bins.members):
            if sectors:
                for s in range(1, sectors + 1):
                    mm = m[sec[m] == s]
                    if len(mm):
                        groups.append((float(pairs.h[mm].mean()), mm, s))
            else:
                groups.append((float(lag), m, None))
    h, chi, chib, cnt, secs = [], [], [], [], []
    for lag, m, s in groups:
        c, cb = summarize(m)
        h.append(lag)
        chi.append(c)
        chib.append(cb)
        cnt.append(len(m))
        secs.append(0 if s is None else s)
    return ChiCurve(np.array(h), np.array(chi), np.array(chib), np.array(cnt),
                    np.array(secs) if sectors else None)
