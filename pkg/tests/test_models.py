import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from maxmix.models import (
    TEG, BrownResnick, ExponentialCorrelation, ExtremalT, MaxMixture, PowerVariogram, Smith,
    disk_overlap, exponent_bivariate, extremal_t_normalizer, lag_vectors, linear_overlap,
    mixture_from_dict, model_m1, model_m2, spec_from_dict, theta_closed_form,
)
from maxmix.spatial import InvalidInput

FAMILIES = [
    Smith.isotropic(0.3),
    Smith(((0.09, 0.03), (0.03, 0.04))),
    TEG(0.25, ExponentialCorrelation(0.2)),
    TEG(0.25, ExponentialCorrelation(0.2), overlap="linear"),
    BrownResnick(PowerVariogram(0.5, 1.2)),
    ExtremalT(3.0, ExponentialCorrelation(0.4)),
    ExtremalT(1.0, ExponentialCorrelation(1.0)),
]


def _lags(spec, h):
    if isinstance(spec, Smith):
        return lag_vectors(np.column_stack([h * 0.6, h * 0.8]))
    return h


def test_smith_zero_lag_complete_dependence():
    assert theta_closed_form(Smith.isotropic(1.0), 0.0) == pytest.approx(1.0)


def test_smith_mahalanobis():
    s = Smith(((4.0, 0.0), (0.0, 1.0)))
    assert s.beta(lag_vectors([2.0, 0.0])) == pytest.approx(1.0)
    assert s.beta(lag_vectors([0.0, 2.0])) == pytest.approx(2.0)
    with pytest.raises(InvalidInput):
        s.beta(1.0)


def test_teg_beyond_diameter_is_independent():
    for overlap in ("disk", "linear"):
        spec = TEG(0.25, ExponentialCorrelation(0.2), overlap)
        assert np.all(spec.theta(np.array([0.5, 0.7, 3.0])) == 2.0)
        assert exponent_bivariate(spec, 0.6, 1.3, 1.3) == pytest.approx(2 / 1.3)


def test_teg_complete_dependence_limit():
    # rho = 1 and alpha = 1 at h = 0
    spec = TEG(0.25, ExponentialCorrelation(0.2))
    assert exponent_bivariate(spec, 0.0, 0.7, 0.7) == pytest.approx(1 / 0.7)


def test_teg_linear_alpha():
    assert linear_overlap(np.array([0.0, 0.25, 0.5, 0.6]), 0.25) == pytest.approx([1, 0.5, 0, 0])


def test_disk_overlap_matches_lens_area():
    r, h = 1.0, 0.8
    lens = 2 * r * r * math.acos(h / (2 * r)) - h / 2 * math.sqrt(4 * r * r - h * h)
    assert disk_overlap(h, r) == pytest.approx(lens / (math.pi * r * r), rel=1e-12)


def test_brown_resnick_known_value():
    spec = BrownResnick(PowerVariogram(1.5, 2.0))
    assert theta_closed_form(spec, 1.5) == pytest.approx(2 * stats.norm.cdf(0.5), abs=1e-12)
    assert theta_closed_form(spec, 1.5) == pytest.approx(1.3829, abs=1e-4)


def test_extremal_t_theta_formula():
    spec = ExtremalT(2.0, ExponentialCorrelation(0.5))
    rho = math.exp(-1.0 / 0.5)
    expect = 2 * stats.t.cdf(math.sqrt(3 * (1 - rho) / (1 + rho)), df=3)
    assert spec.theta(1.0) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family)
def test_exponent_diagonal_matches_theta(spec):
    h = np.linspace(0.0, 1.2, 25)
    z = 1.7
    lags = _lags(spec, h)
    assert np.allclose(z * exponent_bivariate(spec, lags, z, z), spec.theta(lags), atol=1e-10)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family)
def test_theta_in_unit_interval_shifted(spec):
    th = spec.theta(_lags(spec, np.linspace(0, 10, 200)))
    assert np.all((th >= 1 - 1e-12) & (th <= 2 + 1e-12))


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family)
@settings(max_examples=40, deadline=None)
@given(h=st.floats(0.0, 2.0), x1=st.floats(0.05, 20), x2=st.floats(0.05, 20), t=st.floats(0.1, 10))
def test_exponent_homogeneity(spec, h, x1, x2, t):
    lag = _lags(spec, np.array(h))
    v = exponent_bivariate(spec, lag, x1, x2)
    assert abs(t * exponent_bivariate(spec, lag, t * x1, t * x2) - v) < 1e-12 * max(1.0, abs(v)) * 10


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family)
def test_exponent_margins_and_bounds(spec):
    lag = _lags(spec, np.array(0.3))
    x1, x2 = 0.8, 2.5
    v = exponent_bivariate(spec, lag, x1, x2)
    assert max(1 / x1, 1 / x2) - 1e-12 <= v <= 1 / x1 + 1 / x2 + 1e-12
    assert exponent_bivariate(spec, lag, x1, 1e12) == pytest.approx(1 / x1, rel=1e-6)


def test_extremal_t_normalizer_gives_unit_mean(rng):
    for df in (1.0, 2.5, 4.0):
        c = extremal_t_normalizer(df)
        # E[max(eps, 0)^df] = 2^(df/2 - 1) Gamma((df + 1)/2) / sqrt(pi)
        m = 2 ** (df / 2 - 1) * math.gamma((df + 1) / 2) / math.sqrt(math.pi)
        assert c * m == pytest.approx(1.0, rel=1e-12)
        e = rng.standard_normal(400_000)
        assert np.mean(c * np.maximum(e, 0) ** df) == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("df, rho, x1, x2", [(2.0, 0.3, 1.0, 2.0), (4.0, 0.7, 0.5, 3.0), (1.0, 0.5, 1.5, 1.0)])
def test_extremal_t_exponent_monte_carlo(rng, df, rho, x1, x2):
    """V(x1, x2) = E max(W1/x1, W2/x2) with W = c max(eps, 0)^df, eps bivariate normal."""
    n = 1_000_000
    e1 = rng.standard_normal(n)
    e2 = rho * e1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    c = extremal_t_normalizer(df)
    w = np.maximum(c * np.maximum(e1, 0) ** df / x1, c * np.maximum(e2, 0) ** df / x2)
    phi = -1.0 / math.log(rho)
    spec = ExtremalT(df, ExponentialCorrelation(phi))
    v = exponent_bivariate(spec, 1.0, x1, x2)
    se = w.std() / math.sqrt(n)
    assert abs(w.mean() - v) < 4 * se


def test_teg_exponent_monte_carlo(rng):
    """W(s) = c max(eps(s), 0) 1{|s - X| < r} with X uniform on a box around both disks."""
    n, r, h, phi, x1, x2 = 2_000_000, 0.5, 0.3, 0.4, 0.7, 1.9
    lo, hi = np.array([-r, -r]), np.array([h + r, r])
    area = np.prod(hi - lo)
    c = math.sqrt(2 * math.pi) * area / (math.pi * r * r)
    centre = rng.uniform(lo, hi, size=(n, 2))
    rho = math.exp(-h / phi)
    e1 = rng.standard_normal(n)
    e2 = rho * e1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    in1 = np.hypot(*centre.T) < r
    in2 = np.hypot(centre[:, 0] - h, centre[:, 1]) < r
    w = np.maximum(c * np.maximum(e1, 0) * in1 / x1, c * np.maximum(e2, 0) * in2 / x2)
    v = exponent_bivariate(TEG(r, ExponentialCorrelation(phi)), h, x1, x2)
    assert abs(w.mean() - v) < 4 * w.std() / math.sqrt(n)


@pytest.mark.parametrize("bad", [
    lambda: TEG(0.0, ExponentialCorrelation(1.0)),
    lambda: TEG(1.0, ExponentialCorrelation(1.0), overlap="square"),
    lambda: ExponentialCorrelation(0.0),
    lambda: PowerVariogram(1.0, 2.5),
    lambda: PowerVariogram(-1.0, 1.0),
    lambda: ExtremalT(0.5, ExponentialCorrelation(1.0)),
    lambda: Smith(((1.0, 2.0), (2.0, 1.0))),
    lambda: MaxMixture(1.5, Smith.isotropic(1.0), Smith.isotropic(1.0)),
])
def test_parameter_domains(bad):
    with pytest.raises(InvalidInput):
        bad()


def test_negative_lag_rejected():
    with pytest.raises(InvalidInput):
        theta_closed_form(TEG(0.25, ExponentialCorrelation(0.2)), -0.1)


def test_nonpositive_exponent_args():
    with pytest.raises(InvalidInput):
        exponent_bivariate(BrownResnick(PowerVariogram(1.0)), 1.0, 0.0, 1.0)


@pytest.mark.parametrize("spec", FAMILIES[:1] + FAMILIES[2:], ids=lambda s: s.family)
def test_params_round_trip(spec):
    back = spec_from_dict(spec.params())
    h = np.linspace(0, 2, 9)
    assert np.allclose(back.theta(h), spec.theta(h))


def test_mixture_round_trip():
    m = model_m2(0.1, 2.0, 0.5, 2.0, 1.5)
    back = mixture_from_dict(m.params())
    assert back.a == 0.5
    assert np.allclose(back.theta_y([0.3, 1.0]), m.theta_y([0.3, 1.0]))


def test_m1_parts():
    m = model_m1(0.2, 0.1, 0.5, 0.9, 0.7)
    assert isinstance(m.x_spec, TEG) and isinstance(m.y_spec, TEG)
    assert m.theta_x(0.5) == 2.0
    assert m.theta_y(0.5) < 2.0


def test_unknown_family():
    with pytest.raises(InvalidInput):
        spec_from_dict({"family": "schlather"})
    with pytest.raises(InvalidInput):
        spec_from_dict({"family": "teg", "radius": 1.0})
