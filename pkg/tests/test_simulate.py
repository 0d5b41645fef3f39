import numpy as np
import pytest
from scipy import stats

from maxmix.depmeasures import fmadogram_empirical, theta_from_fmadogram, chi_chibar_empirical
from maxmix.models import (
    TEG, BrownResnick, ExponentialCorrelation, ExtremalT, MaxMixture, PowerVariogram, Smith, model_m1,
)
from maxmix.simulate import (
    FieldSample, _psd_factor, gaussian_to_ai_frechet, inverted_frechet, invert_max_stable, sample_gaussian,
    simulate_inverted, simulate_max_mixture, simulate_max_stable, substream,
)
from maxmix.spatial import InvalidInput, SiteSet, bin_lags, pairwise_lags

FAMILIES = {
    "smith": Smith.isotropic(0.3),
    "teg": TEG(0.25, ExponentialCorrelation(0.2)),
    "brown-resnick": BrownResnick(PowerVariogram(0.5, 1.5)),
    "extremal-t": ExtremalT(2.0, ExponentialCorrelation(0.5)),
}


def _ks_frechet(x):
    return stats.kstest(x, lambda z: np.exp(-1.0 / z)).pvalue


def test_gaussian_far_sites_uncorrelated():
    sites = SiteSet(np.array([[0.0, 0.0], [1e4, 0.0]]))
    g = sample_gaussian(sites, ExponentialCorrelation(1.0), 10_000, seed=1).values
    assert abs(np.corrcoef(g.T)[0, 1]) < 0.05


def test_gaussian_correlation_and_variance():
    sites = SiteSet(np.array([[0.0, 0.0], [0.5, 0.0], [5.0, 5.0]]))
    g = sample_gaussian(sites, 1.0, 100_000, seed=2).values
    assert np.var(g[:, 0]) == pytest.approx(1.0, rel=0.03)
    assert np.corrcoef(g.T)[0, 1] == pytest.approx(np.exp(-0.5), abs=0.01)


def test_psd_factor_clipping():
    c = np.array([[1.0, 1.0], [1.0, 1.0]]) - np.diag([0.0, 1e-12])
    L = _psd_factor(c)
    assert np.allclose(L @ L.T, c, atol=1e-10)
    with pytest.raises(InvalidInput):
        _psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


@pytest.mark.parametrize("name", FAMILIES)
def test_margins_are_unit_frechet(name):
    sites = SiteSet(np.array([[0.0, 0.0], [0.3, 0.1], [1.0, 1.0]]))
    x = simulate_max_stable(FAMILIES[name], sites, 5000, seed=11)
    assert x.margins == "unit-frechet"
    assert np.all(x.values > 0) and np.all(np.isfinite(x.values))
    for j in range(3):
        assert _ks_frechet(x.values[:, j]) > 0.01


@pytest.mark.parametrize("name", FAMILIES)
def test_determinism(name):
    sites = SiteSet(np.array([[0.0, 0.0], [0.3, 0.1], [1.0, 1.0]]))
    a = simulate_max_stable(FAMILIES[name], sites, 300, seed=5).values
    b = simulate_max_stable(FAMILIES[name], sites, 300, seed=5).values
    c = simulate_max_stable(FAMILIES[name], sites, 300, seed=6).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_chunks_are_prefix_stable():
    sites = SiteSet(np.array([[0.0, 0.0], [0.3, 0.1]]))
    spec = FAMILIES["teg"]
    short = simulate_max_stable(spec, sites, 250, seed=3).values
    long = simulate_max_stable(spec, sites, 600, seed=3).values
    assert np.array_equal(short, long[:250])


def test_teg_independent_beyond_diameter():
    # all pairs farther than 2r = 0.5
    sites = SiteSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]]))
    x = simulate_max_stable(FAMILIES["teg"], sites, 2000, seed=8)
    c = fmadogram_empirical(x, bin_lags(pairwise_lags(sites), nbins=1))
    assert theta_from_fmadogram(c.value[0]) == pytest.approx(2.0, abs=0.05)


def test_sampler_recorded_in_meta():
    sites = SiteSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
    x = simulate_max_stable(FAMILIES["smith"], sites, 10, seed=0)
    assert x.meta["sampler"]["method"] == "storm-window"
    assert x.meta["spec"]["family"] == "smith"


def test_inverted_frechet_map():
    x = np.logspace(-2, 3, 200)
    y = inverted_frechet(x)
    assert np.all(np.diff(y) < 0)
    assert inverted_frechet(np.array([1e8]))[0] < 0.06
    # the map is an involution
    assert np.allclose(inverted_frechet(y), x, rtol=1e-9)
    with pytest.raises(InvalidInput):
        inverted_frechet(np.array([0.0]))


def test_inversion_keeps_margins_and_independence(rng):
    sites = SiteSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
    x = FieldSample(-1 / np.log(rng.uniform(size=(10_000, 2))), sites=sites)
    y = invert_max_stable(x)
    assert _ks_frechet(y.values[:, 0]) > 0.01
    c = chi_chibar_empirical(y, 0.99, pairs=pairwise_lags(sites))
    assert c.chi[0] < 0.03


def test_gaussian_to_ai_frechet():
    sites = SiteSet(np.array([[0.0, 0.0], [0.1, 0.0]]))
    g = FieldSample(np.array([[0.0, 40.0]]), "raw", sites)
    y = gaussian_to_ai_frechet(g).values
    assert y[0, 0] == pytest.approx(-1 / np.log(0.5))
    assert np.isfinite(y[0, 1])
    big = gaussian_to_ai_frechet(sample_gaussian(sites, 1.0, 20_000, seed=4))
    assert _ks_frechet(big.values[:, 0]) > 0.01
    chi = chi_chibar_empirical(big, 0.995, pairs=pairwise_lags(sites)).chi[0]
    chi_mild = chi_chibar_empirical(big, 0.9, pairs=pairwise_lags(sites)).chi[0]
    assert chi < chi_mild


def test_mixture_degenerate_cases():
    sites = SiteSet(np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.4]]))
    m1 = model_m1(0.2, 0.1, 1.0, 0.9, 0.7)
    z = simulate_max_mixture(m1, sites, 200, seed=9).values
    assert np.array_equal(z, simulate_max_stable(m1.x_spec, sites, 200, seed=9).values)
    m0 = model_m1(0.2, 0.1, 0.0, 0.9, 0.7)
    z0 = simulate_max_mixture(m0, sites, 200, seed=9).values
    y = simulate_inverted(m0.y_spec, sites, 200, substream(9, "inverted")).values
    assert np.array_equal(z0, y)


@pytest.mark.parametrize("a", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_mixture_margins(a):
    sites = SiteSet(np.array([[0.0, 0.0], [0.3, 0.0]]))
    z = simulate_max_mixture(model_m1(0.2, 0.1, a, 0.9, 0.7), sites, 5000, seed=12).values
    assert _ks_frechet(z[:, 1]) > 0.01


def test_field_sample_validation():
    with pytest.raises(InvalidInput):
        FieldSample(np.array([[1.0, -1.0]]))
    with pytest.raises(InvalidInput):
        FieldSample(np.ones((2, 2)), margins="gumbel")
    with pytest.raises(InvalidInput):
        FieldSample(np.ones((2, 3)), sites=SiteSet(np.eye(2)))
    f = FieldSample(np.array([[1.0, np.nan]]))
    assert f.n == 1 and f.k == 2


def test_substream_is_stable():
    a = np.random.default_rng(substream(7, "field", 3)).uniform()
    b = np.random.default_rng(substream(7, "field", 3)).uniform()
    c = np.random.default_rng(substream(7, "field", 4)).uniform()
    assert a == b != c


def test_m1_field_madogram_matches_closed_form():
    from maxmix.depmeasures import flambda_madogram_empirical, flambda_mm_theoretical

    spec = model_m1(0.2, 0.1, 0.5, 0.9, 0.7)
    sites = SiteSet(np.array([[0.0, 0.0], [0.1, 0.0], [0.3, 0.0], [0.6, 0.0], [1.2, 0.0]]))
    pairs = pairwise_lags(sites)
    pairs = pairs.subset(pairs.i == 0)
    bins = bin_lags(pairs, edges=[0.0, 0.2, 0.4, 0.8, 1.6])
    n = 6000
    z = simulate_max_mixture(spec, sites, n, seed=21)
    for lam in (1.0, 1.5):
        emp = flambda_madogram_empirical(z, lam, bins, margins="unit-frechet")
        th = flambda_mm_theoretical(0.5, lam, spec.theta_x(emp.h), spec.theta_y(emp.h))
        # Q lies in [0, 1/2]: standard error at most 1 / (4 sqrt n)
        assert np.all(np.abs(emp.value - th) < 4 / (4 * np.sqrt(n))), (lam, emp.value, th)
