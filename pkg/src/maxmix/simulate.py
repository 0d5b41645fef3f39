"""Samplers for Gaussian fields, max-stable, inverted max-stable and max-mixture fields.

Max-stable fields are drawn from the spectral representation
``X(s) = max_k Q_k(s) / P_k`` with ``P_k`` the points of a unit rate
Poisson process. For the TEG, Brown-Resnick and extremal-t families the
spectral functions are sum-normalized over the sites (each ``Q_k`` is drawn
under the law tilted by ``Q(s_j)`` for a uniformly chosen site j and then
rescaled so its values sum to K). ``Q_k`` is then bounded by K and the
series stops as soon as ``K / P_k`` falls below the smallest running
maximum, which makes the sample exact on the sites. The Smith model uses
storm centres drawn uniformly on a dilated window around the sites.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .models import TEG, BrownResnick, ExponentialCorrelation, ExtremalT, MaxMixture, Smith
from .spatial import InvalidInput, SiteSet

MARGINS = ("unit-frechet", "uniform", "raw")

# replicates are simulated in fixed-size chunks, each with its own RNG stream
CHUNK = 250
_MAX_ROWS = 60_000


@dataclass
class FieldSample:
    """N replications of a field observed at K sites (``values`` is N x K).

    Missing observations are stored as NaN.
    """

    values: np.ndarray
    margins: str = "unit-frechet"
    sites: SiteSet | None = None
    seed: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise InvalidInput("field values must be an (N, K) matrix with N >= 1")
        if self.margins not in MARGINS:
            raise InvalidInput(f"unknown margins tag {self.margins!r}")
        if self.margins == "unit-frechet":
            obs = v[~np.isnan(v)]
            if np.any(obs <= 0) or not np.all(np.isfinite(obs)):
                raise InvalidInput("unit-frechet values must be positive and finite")
        if self.sites is not None and len(self.sites) != v.shape[1]:
            raise InvalidInput("number of columns differs from number of sites")
        self.values = v

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]


def substream(seed, label: str = "", index: int | None = None) -> np.random.SeedSequence:
    """Labelled child seed sequence of a master seed.

    The label is hashed with CRC32, so the derivation is stable across runs
    and platforms.
    """
    if isinstance(seed, np.random.SeedSequence):
        entropy, key = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, key = (0 if seed is None else int(seed)), ()
    if label:
        key = key + (zlib.crc32(label.encode()),)
    if index is not None:
        key = key + (int(index),)
    return np.random.SeedSequence(entropy, spawn_key=key)


def _rng(seed, label="", index=None):
    return np.random.default_rng(substream(seed, label, index))


def _psd_factor(cov: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square-root factor L with L L' = cov.

    Eigenvalues down to ``-tol`` (relative to the largest one when that
    exceeds 1) are clipped to zero; anything more negative is an error.
    """
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -tol * scale:
        raise InvalidInput(f"covariance matrix is indefinite (eigenvalue {w.min():.3g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(sites: SiteSet, corr, n: int, seed=None) -> FieldSample:
    """n i.i.d. zero-mean unit-variance Gaussian fields with correlation ``corr``."""
    if isinstance(corr, (int, float)):
        corr = ExponentialCorrelation(float(corr))
    r = corr(sites.distance_matrix())
    L = _psd_factor(r)
    rng = _rng(seed, "gaussian")
    g = rng.standard_normal((n, len(sites)))
    return FieldSample(g @ L.T, margins="raw", sites=sites, seed=seed)


# --------------------------------------------------------------------------
# Poisson series engine

def _poisson_max(draw, bound: float, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Maxima of ``Q_j(s) / P_j`` over a unit rate Poisson process, for n replicates.

    ``draw(rng, m)`` returns m independent spectral functions as an (m, k)
    array bounded by ``bound``. A replicate stops once ``bound / P`` drops
    below its smallest running maximum; later terms cannot change it.
    """
    x = np.zeros((n, k))
    p = np.zeros(n)
    active = np.arange(n)
    batch = max(8, 2 * k)
    while active.size:
        m = active.size
        b = int(min(batch, max(1, _MAX_ROWS // m)))
        pk = p[active, None] + np.cumsum(rng.exponential(size=(m, b)), axis=1)
        q = draw(rng, m * b).reshape(m, b, k)
        contrib = (q / pk[:, :, None]).max(axis=1)
        xa = np.maximum(x[active], contrib)
        x[active] = xa
        p[active] = pk[:, -1]
        low = xa.min(axis=1)
        done = bound / p[active] < low
        remaining = bound / np.maximum(low[~done], 1e-3) - p[active][~done]
        active = active[~done]
        if remaining.size:
            batch = int(np.clip(np.median(remaining), 8, 4096))
    return x


def _conditional_factors(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-site regression vectors and residual factors of a correlation matrix.

    For site j: T = r[j] * T_j + L[j] @ g gives the Gaussian vector given T_j.
    """
    k = cov.shape[0]
    L = np.empty((k, k, k))
    for j in range(k):
        rj = cov[:, j]
        L[j] = _psd_factor(cov - np.outer(rj, rj))
    return cov.T.copy(), L


def _grouped_matvec(L: np.ndarray, J: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = np.empty_like(g)
    order = np.argsort(J, kind="stable")
    Js = J[order]
    cuts = np.flatnonzero(np.diff(Js)) + 1
    for grp in np.split(order, cuts):
        out[grp] = g[grp] @ L[J[grp[0]]].T
    return out


def _gaussian_power_draw(sites: SiteSet, corr, power: float, radius: float | None):
    """Sum-normalized spectral functions max(0, T)^power (times a disk indicator).

    Under the law tilted at site j, T_j**2 is chi-square with power + 1
    degrees of freedom and the disk centre is uniform on the disk of the
    given radius around s_j.
    """
    coords = sites.coords
    k = len(sites)
    xs, ys = coords[:, 0], coords[:, 1]
    r, L = _conditional_factors(corr(sites.distance_matrix()))

    def draw(rng, m):
        J = rng.integers(k, size=m)
        tj = np.sqrt(rng.chisquare(power + 1, size=m))
        g = rng.standard_normal((m, k))
        t = r[J] * tj[:, None] + _grouped_matvec(L, J, g)
        rows = np.arange(m)
        y = np.maximum(t, 0.0, out=t)
        y /= tj[:, None]
        if power != 1.0:
            y **= power
        if radius is not None:
            u = radius * np.sqrt(rng.uniform(size=m))
            ang = rng.uniform(0, 2 * np.pi, size=m)
            cx = coords[J, 0] + u * np.cos(ang)
            cy = coords[J, 1] + u * np.sin(ang)
            d2 = (xs[None, :] - cx[:, None]) ** 2
            d2 += (ys[None, :] - cy[:, None]) ** 2
            y[d2 > radius * radius] = 0.0
        y[rows, J] = 1.0
        return k * y / y.sum(axis=1, keepdims=True)

    return draw


def _brown_resnick_draw(sites: SiteSet, variogram):
    d = sites.distance_matrix()
    k = len(sites)
    gam = variogram.semivariogram(d)
    L = np.empty((k, k, k))
    for j in range(k):
        c = gam[:, j][:, None] + gam[j, :][None, :] - gam
        L[j] = _psd_factor(c)
    drift = gam.T.copy()

    def draw(rng, m):
        J = rng.integers(k, size=m)
        g = rng.standard_normal((m, k))
        logy = _grouped_matvec(L, J, g) - drift[J]
        logy[np.arange(m), J] = 0.0
        return k * special.softmax(logy, axis=1)

    return draw


def _smith_draw(sites: SiteSet, spec: Smith):
    s = spec.matrix
    scale = float(np.sqrt(np.linalg.eigvalsh(s).max()))
    margin = 4 * scale
    lo = sites.coords.min(axis=0) - margin
    hi = sites.coords.max(axis=0) + margin
    area = float(np.prod(hi - lo))
    si = np.linalg.inv(s)
    peak = 1 / (2 * np.pi * np.sqrt(np.linalg.det(s)))
    coords = sites.coords

    def draw(rng, m):
        w = rng.uniform(lo, hi, size=(m, 2))
        diff = coords[None, :, :] - w[:, None, :]
        qf = np.einsum("mki,ij,mkj->mk", diff, si, diff)
        return area * peak * np.exp(-0.5 * qf)

    window = {"lower": lo.tolist(), "upper": hi.tolist(), "margin": margin}
    return draw, area * peak, window


def _engine(spec, sites: SiteSet):
    k = len(sites)
    if isinstance(spec, Smith):
        draw, bound, window = _smith_draw(sites, spec)
        return draw, bound, {"method": "storm-window", "window": window}
    if isinstance(spec, TEG):
        return _gaussian_power_draw(sites, spec.corr, 1.0, spec.radius), k, {"method": "sum-normalized"}
    if isinstance(spec, ExtremalT):
        return _gaussian_power_draw(sites, spec.corr, spec.df, None), k, {"method": "sum-normalized"}
    if isinstance(spec, BrownResnick):
        return _brown_resnick_draw(sites, spec.variogram), k, {"method": "sum-normalized"}
    raise InvalidInput(f"unsupported max-stable spec {spec!r}")


def simulate_max_stable(spec, sites: SiteSet, n: int, seed=None) -> FieldSample:
    """n independent replications of a simple max-stable field on ``sites``.

    Replicates are generated in chunks of ``CHUNK`` rows; chunk c uses the
    stream ``substream(seed, spec.family, c)`` so any chunk can be
    regenerated on its own.
    """
    if n < 1:
        raise InvalidInput("n must be at least 1")
    draw, bound, info = _engine(spec, sites)
    out = np.empty((n, len(sites)))
    for c, start in enumerate(range(0, n, CHUNK)):
        stop = min(n, start + CHUNK)
        out[start:stop] = _poisson_max(draw, bound, len(sites), stop - start, _rng(seed, spec.family, c))
    meta = {"spec": spec.params(), "sampler": info, "chunk": CHUNK}
    return FieldSample(out, "unit-frechet", sites, seed, meta)


def inverted_frechet(x):
    """y = -1 / log(1 - exp(-1/x)), a decreasing map of unit Frechet onto itself."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidInput("inversion needs positive unit Frechet values")
    t = np.exp(-1.0 / x)
    # log(1 - t) evaluated stably on both ends
    with np.errstate(divide="ignore"):
        log1mt = np.where(t < 0.5, np.log1p(-t), np.log(-np.expm1(-1.0 / x)))
    return -1.0 / log1mt


def invert_max_stable(field: FieldSample) -> FieldSample:
    if field.margins != "unit-frechet":
        raise InvalidInput("inversion needs unit-frechet margins")
    meta = dict(field.meta, inverted=True)
    return FieldSample(inverted_frechet(field.values), "unit-frechet", field.sites, field.seed, meta)


def gaussian_to_ai_frechet(field: FieldSample) -> FieldSample:
    """y = -1 / log(Phi(x)) applied to a standard Gaussian field."""
    with np.errstate(divide="ignore"):
        y = -1.0 / special.log_ndtr(field.values)
    # Phi(x) rounds to 1 for x > ~38; cap instead of returning inf
    y = np.where(np.isfinite(y), y, np.finfo(float).max)
    return FieldSample(y, "unit-frechet", field.sites, field.seed, dict(field.meta, gaussian_ai=True))


def simulate_inverted(spec, sites: SiteSet, n: int, seed=None) -> FieldSample:
    return invert_max_stable(simulate_max_stable(spec, sites, n, seed))


def simulate_max_mixture(spec: MaxMixture, sites: SiteSet, n: int, seed=None) -> FieldSample:
    """Z = max(a X, (1 - a) Y) with independent X and inverted-Y streams.

    X uses ``seed`` directly and Y' uses ``substream(seed, "inverted")``, so
    a = 1 reproduces ``simulate_max_stable(x_spec, sites, n, seed)`` and
    a = 0 reproduces ``simulate_inverted(y_spec, sites, n, substream(seed, "inverted"))``.
    """
    a = spec.a
    meta = {"mixture": spec.params()}
    if a == 1.0:
        x = simulate_max_stable(spec.x_spec, sites, n, seed)
        return FieldSample(x.values, "unit-frechet", sites, seed, dict(x.meta, **meta))
    y = simulate_inverted(spec.y_spec, sites, n, substream(seed, "inverted"))
    if a == 0.0:
        return FieldSample(y.values, "unit-frechet", sites, seed, dict(y.meta, **meta))
    x = simulate_max_stable(spec.x_spec, sites, n, seed)
    z = np.maximum(a * x.values, (1 - a) * y.values)
    meta.update(x_sampler=x.meta["sampler"], y_sampler=y.meta["sampler"])
    return FieldSample(z, "unit-frechet", sites, seed, meta)
