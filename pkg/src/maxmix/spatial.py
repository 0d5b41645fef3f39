"""Site geometry: pairwise lags, distance binning and directional sectors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0

METRICS = ("euclidean", "great-circle-km")


class InvalidInput(ValueError):
    """Raised when user supplied geometry or data violates a precondition."""


@dataclass(frozen=True)
class SiteSet:
    """A set of K >= 2 distinct stations.

    ``coords`` is a (K, 2) array. For ``metric="great-circle-km"`` the
    columns are longitude and latitude in degrees.
    """

    coords: np.ndarray
    metric: str = "euclidean"
    ids: tuple = field(default=())

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise InvalidInput("coordinates must have shape (K, 2)")
        if c.shape[0] < 2:
            raise InvalidInput("a SiteSet needs at least 2 sites")
        if not np.all(np.isfinite(c)):
            raise InvalidInput("coordinates must be finite")
        if self.metric not in METRICS:
            raise InvalidInput(f"unknown metric {self.metric!r}")
        if len(np.unique(c, axis=0)) != len(c):
            raise InvalidInput("duplicated coordinate pair")
        ids = tuple(self.ids) if len(self.ids) else tuple(f"site_{i + 1}" for i in range(len(c)))
        if len(ids) != len(c):
            raise InvalidInput("ids and coordinates differ in length")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.coords.shape[0]

    @classmethod
    def uniform_square(cls, k: int, side: float, rng: np.random.Generator) -> "SiteSet":
        """K sites drawn uniformly on ``[0, side]^2``."""
        return cls(rng.uniform(0.0, side, size=(k, 2)))

    def distance_matrix(self) -> np.ndarray:
        c = self.coords
        if self.metric == "euclidean":
            diff = c[:, None, :] - c[None, :, :]
            return np.hypot(diff[..., 0], diff[..., 1])
        lon = np.radians(c[:, 0])
        lat = np.radians(c[:, 1])
        dlat = lat[:, None] - lat[None, :]
        dlon = lon[:, None] - lon[None, :]
        hav = np.sin(dlat / 2) ** 2 + np.cos(lat[:, None]) * np.cos(lat[None, :]) * np.sin(dlon / 2) ** 2
        d = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))
        np.fill_diagonal(d, 0.0)
        return d


@dataclass(frozen=True)
class PairLag:
    i: int
    j: int
    h: float
    azimuth: float


@dataclass(frozen=True)
class Pairs:
    """All K(K-1)/2 site pairs in array form (i < j)."""

    i: np.ndarray
    j: np.ndarray
    h: np.ndarray
    azimuth: np.ndarray

    def __len__(self):
        return len(self.h)

    def __getitem__(self, k) -> PairLag:
        return PairLag(int(self.i[k]), int(self.j[k]), float(self.h[k]), float(self.azimuth[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def subset(self, mask) -> "Pairs":
        return Pairs(self.i[mask], self.j[mask], self.h[mask], self.azimuth[mask])


def _azimuth(sites: SiteSet, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Direction from site i to site j in (-pi, pi], 0 pointing north, pi/2 east."""
    c = sites.coords
    if sites.metric == "euclidean":
        dx = c[j, 0] - c[i, 0]
        dy = c[j, 1] - c[i, 1]
        az = np.arctan2(dx, dy)
    else:
        lon1, lat1 = np.radians(c[i, 0]), np.radians(c[i, 1])
        lon2, lat2 = np.radians(c[j, 0]), np.radians(c[j, 1])
        dlon = lon2 - lon1
        x = np.sin(dlon) * np.cos(lat2)
        y = np.cos(lat1) * np.sin(lat2) - np.sin(lat1) * np.cos(lat2) * np.cos(dlon)
        az = np.arctan2(x, y)
    # arctan2 returns [-pi, pi]; map -pi onto pi
    return np.where(az <= -np.pi, np.pi, az)


def pairwise_lags(sites: SiteSet) -> Pairs:
    """Every unordered pair of distinct sites with its distance and azimuth."""
    if not isinstance(sites, SiteSet):
        sites = SiteSet(np.asarray(sites, dtype=float))
    if len(sites) < 2:
        raise InvalidInput("need at least 2 sites")
    i, j = np.triu_indices(len(sites), k=1)
    h = sites.distance_matrix()[i, j]
    return Pairs(i, j, h, _azimuth(sites, i, j))


@dataclass(frozen=True)
class LagBins:
    """Disjoint distance bins with their member pairs.

    ``members[b]`` holds indices into the pair arrays of the bins' source
    ``Pairs``; ``lags[b]`` is the mean member distance. Empty bins are not
    stored.
    """

    edges: np.ndarray
    members: tuple
    lags: np.ndarray
    pairs: Pairs

    def __len__(self):
        return len(self.members)

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=int)


def bin_lags(pairs: Pairs, width: float | None = None, edges: Sequence[float] | None = None,
             nbins: int = 15) -> LagBins:
    """Group pairs by distance.

    Bins are closed on the right: ``[0, e1], (e1, e2], ...``. With neither
    ``width`` nor ``edges`` the width defaults to ``max(h) / nbins``.
    """
    h = np.asarray(pairs.h, dtype=float)
    hmax = float(h.max()) if len(h) else 0.0
    if edges is not None:
        e = np.asarray(edges, dtype=float)
        if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
            raise InvalidInput("bin edges must be strictly increasing")
    else:
        if width is None:
            width = hmax / nbins if hmax > 0 else 1.0
        if not width > 0:
            raise InvalidInput("bin width must be positive")
        n = max(1, int(math.ceil(hmax / width - 1e-12)))
        e = width * np.arange(n + 1, dtype=float)
        if e[-1] < hmax:
            e = np.append(e, e[-1] + width)
    # index b such that e[b] < h <= e[b+1]; h == e[0] goes to the first bin
    idx = np.searchsorted(e, h, side="left") - 1
    idx = np.where(h <= e[0], 0, idx)
    keep = (h >= e[0]) & (h <= e[-1])
    members, lags = [], []
    for b in range(len(e) - 1):
        m = np.flatnonzero(keep & (idx == b))
        if len(m):
            members.append(m)
            lags.append(float(h[m].mean()))
    return LagBins(e, tuple(members), np.array(lags), pairs)


def window_bins(pairs: Pairs, centers: Sequence[float], half_width: float = 10.0) -> LagBins:
    """One group per target lag h0 holding the pairs with h in [h0 - w, h0 + w].

    Groups may overlap; this is the averaging window used around a target
    separation distance rather than a partition.
    """
    h = np.asarray(pairs.h)
    members, lags, edges = [], [], []
    for c in centers:
        m = np.flatnonzero((h >= c - half_width) & (h <= c + half_width))
        if len(m):
            members.append(m)
            lags.append(float(h[m].mean()))
            edges.append(c)
    return LagBins(np.array(edges, dtype=float), tuple(members), np.array(lags), pairs)


def sector_of(azimuth, sectors: int = 4):
    """Directional sector (1-based) of a pair azimuth, opposite directions folded.

    With 4 sectors the bounds are (-pi/8, pi/8], (pi/8, 3pi/8],
    (3pi/8, 5pi/8] and (5pi/8, 7pi/8].
    """
    if isinstance(azimuth, PairLag):
        azimuth = azimuth.azimuth
    width = np.pi / sectors
    a = np.asarray(azimuth, dtype=float)
    # fold into (-width/2, pi - width/2]
    folded = np.mod(a + width / 2, np.pi)
    folded = np.where(folded == 0.0, np.pi, folded)
    s = np.ceil(folded / width - 1e-12).astype(int)
    s = np.clip(s, 1, sectors)
    return int(s) if s.ndim == 0 else s
