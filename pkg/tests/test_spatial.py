import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from maxmix.spatial import (
    InvalidInput, Pairs, SiteSet, bin_lags, pairwise_lags, sector_of, window_bins,
)


def test_pythagorean_pair():
    p = pairwise_lags(SiteSet(np.array([[0.0, 0.0], [3.0, 4.0]])))
    assert len(p) == 1
    assert p[0].h == pytest.approx(5.0)
    assert (p[0].i, p[0].j) == (0, 1)


def test_fifty_sites_give_1225_pairs(rng):
    assert len(pairwise_lags(SiteSet.uniform_square(50, 2.0, rng))) == 1225


@pytest.mark.parametrize("coords", [
    [[0, 0], [0, 0]],
    [[0, 0]],
    [[0, 0], [1, np.nan]],
    [[0, 0, 0], [1, 1, 1]],
])
def test_invalid_sites(coords):
    with pytest.raises(InvalidInput):
        SiteSet(np.array(coords, dtype=float))


def test_unknown_metric():
    with pytest.raises(InvalidInput):
        SiteSet(np.eye(2), metric="manhattan")


def test_default_ids():
    assert SiteSet(np.eye(3)[:, :2] + [[0, 0], [0, 0], [2, 2]]).ids == ("site_1", "site_2", "site_3")


def test_great_circle_quarter_meridian():
    s = SiteSet(np.array([[0.0, 0.0], [0.0, 90.0]]), metric="great-circle-km")
    assert pairwise_lags(s).h[0] == pytest.approx(math.pi / 2 * 6371.0, rel=1e-12)


def test_great_circle_one_degree_equator():
    s = SiteSet(np.array([[10.0, 0.0], [11.0, 0.0]]), metric="great-circle-km")
    p = pairwise_lags(s)
    assert p.h[0] == pytest.approx(6371.0 * math.radians(1.0), rel=1e-12)
    assert p.azimuth[0] == pytest.approx(math.pi / 2, abs=1e-9)


def test_planar_azimuth_north_is_zero():
    p = pairwise_lags(SiteSet(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])))
    assert p.azimuth[0] == pytest.approx(0.0)
    assert p.azimuth[1] == pytest.approx(math.pi / 2)


coords_strategy = arrays(np.float64, st.tuples(st.integers(3, 8), st.just(2)),
                         elements=st.floats(-100, 100, allow_nan=False), unique=True)


@settings(max_examples=60, deadline=None)
@given(coords_strategy)
def test_distance_matrix_is_metric(c):
    if len(np.unique(c, axis=0)) != len(c):
        return
    d = SiteSet(c).distance_matrix()
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0)
    off = d[~np.eye(len(c), dtype=bool)]
    assert np.all(off > 0)
    k = len(c)
    for i in range(k):
        assert np.all(d[i][:, None] <= d[i][None, :] + d + 1e-9)


def _pairs(h):
    h = np.asarray(h, dtype=float)
    n = len(h)
    return Pairs(np.zeros(n, int), np.arange(1, n + 1), h, np.zeros(n))


def test_bin_lags_unit_width():
    b = bin_lags(_pairs([1.0, 1.1, 2.9]), width=1.0)
    assert list(b.edges) == [0.0, 1.0, 2.0, 3.0]
    assert list(b.counts) == [1, 1, 1]
    assert b.lags == pytest.approx([1.0, 1.1, 2.9])


def test_bin_lags_constant_distances():
    b = bin_lags(_pairs([0.7] * 5))
    assert len(b) == 1
    assert b.lags[0] == pytest.approx(0.7)
    assert b.counts[0] == 5


def test_bin_lags_drops_empty_bins():
    b = bin_lags(_pairs([0.5, 3.5]), width=1.0)
    assert list(b.counts) == [1, 1]
    assert b.lags == pytest.approx([0.5, 3.5])


@pytest.mark.parametrize("kw", [{"width": 0.0}, {"width": -1.0}, {"edges": [0, 1, 1]}, {"edges": [1]}])
def test_bin_lags_rejects_bad_config(kw):
    with pytest.raises(InvalidInput):
        bin_lags(_pairs([1.0, 2.0]), **kw)


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(1e-3, 50)), st.integers(1, 20))
def test_bins_partition_pairs(h, nbins):
    b = bin_lags(_pairs(h), nbins=nbins)
    members = np.concatenate(b.members)
    assert b.counts.sum() == len(h)
    assert len(np.unique(members)) == len(h)
    for m, lag in zip(b.members, b.lags):
        assert lag == pytest.approx(h[m].mean())


def test_window_bins_groups_around_target():
    w = window_bins(_pairs([5.0, 12.0, 25.0, 40.0]), [15.0], half_width=10.0)
    assert list(w.members[0]) == [0, 1, 2]


@pytest.mark.parametrize("az, sector", [
    (0.0, 1), (math.pi / 2, 3), (math.pi, 1), (-math.pi / 2, 3),
    (math.pi / 4, 2), (3 * math.pi / 4, 4), (-math.pi / 8 + 1e-9, 1), (math.pi / 8, 1),
])
def test_sector_of(az, sector):
    assert sector_of(az) == sector


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi, math.pi, exclude_min=True))
def test_sector_folds_antipodes(az):
    opp = az + math.pi if az <= 0 else az - math.pi
    assert sector_of(az) == sector_of(opp)
