import numpy as np
import pytest
from scipy import integrate, stats

from wrdesign.mvn import bvn_cdf, mvn_cdf, tvn_cdf, z_quantile


def test_z_quantile():
    assert z_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-15)
    assert z_quantile(0.9) == pytest.approx(1.2815515655446004, abs=1e-15)
    with pytest.raises(ValueError):
        z_quantile(1.0)


def test_bvn_against_scipy(rng):
    for r in (-0.95, -0.3, 0.0, 0.2, 0.7, 0.99):
        x = rng.normal(scale=2, size=(30, 2))
        ref = stats.multivariate_normal([0, 0], [[1, r], [r, 1]]).cdf(x)
        np.testing.assert_allclose(bvn_cdf(x[:, 0], x[:, 1], r), ref, atol=1e-7)


def test_bvn_special_values():
    # orthant probability 1/4 + arcsin(r) / (2 pi)
    for r in (-0.5, 0.0, 0.6):
        assert bvn_cdf(0.0, 0.0, r) == pytest.approx(0.25 + np.arcsin(r) / (2 * np.pi), abs=1e-12)
    assert bvn_cdf(40.0, 1.0, 0.4) == pytest.approx(stats.norm.cdf(1.0), abs=1e-15)


def _tvn_oracle(h, c):
    """Condition on the first coordinate and integrate with scipy."""
    r12, r13, r23 = c[0, 1], c[0, 2], c[1, 2]
    s2, s3 = np.sqrt(1 - r12**2), np.sqrt(1 - r13**2)
    rho = (r23 - r12 * r13) / (s2 * s3)
    f = lambda z: stats.norm.pdf(z) * bvn_cdf((h[1] - r12 * z) / s2, (h[2] - r13 * z) / s3, rho)
    pts = np.linspace(-12, min(h[0], 12), 60)
    pts = pts[pts < h[0]]
    return integrate.quad(f, -40, h[0], points=pts, epsabs=1e-16, epsrel=1e-12, limit=2000)[0]


def test_tvn_against_conditioning_oracle(rng):
    for trial in range(40):
        if trial % 2:
            a = rng.normal(size=(3, 3))
            s = a @ a.T + 0.05 * np.eye(3)
            d = np.sqrt(np.diag(s))
            c = s / np.outer(d, d)
        else:
            r = np.sin(np.pi * rng.uniform(0, 0.95) / 2)
            c = np.full((3, 3), r)
            np.fill_diagonal(c, 1.0)
        x = rng.normal(scale=2.5, size=(3, 3))
        got = tvn_cdf(x, c)
        for j in range(3):
            assert got[j] == pytest.approx(_tvn_oracle(x[j], c), abs=1e-13)


def test_tvn_tail_mass():
    # mass concentrated in a thin sliver of the first coordinate
    c = np.full((3, 3), 0.98)
    np.fill_diagonal(c, 1.0)
    h = np.array([2.00654695, -4.00785279, 3.47466304])
    assert tvn_cdf(h[None], c)[0] == pytest.approx(_tvn_oracle(h, c), rel=1e-9)


def test_mvn_dimension_dispatch(rng):
    c = np.array([[1, 0.3, 0.2], [0.3, 1, 0.5], [0.2, 0.5, 1]])
    x = rng.normal(size=(5, 3))
    # an infinite limit drops the coordinate
    x_inf = x.copy()
    x_inf[:, 2] = np.inf
    np.testing.assert_allclose(mvn_cdf(x_inf, c), bvn_cdf(x[:, 0], x[:, 1], 0.3), atol=1e-15)
    np.testing.assert_allclose(mvn_cdf(x, np.eye(3)), np.prod(stats.norm.cdf(x), axis=1), rtol=1e-14)


def test_mvn_four_dims_against_scipy(rng):
    a = rng.normal(size=(4, 4))
    s = a @ a.T + np.eye(4)
    d = np.sqrt(np.diag(s))
    c = s / np.outer(d, d)
    x = rng.normal(size=(4, 4))
    ref = stats.multivariate_normal(np.zeros(4), c).cdf(x)
    got = mvn_cdf(x, c)
    np.testing.assert_allclose(got, ref, atol=2e-5)
    # fixed seed: repeat calls agree exactly
    np.testing.assert_array_equal(got, mvn_cdf(x, c))


def test_mvn_shape_mismatch():
    with pytest.raises(ValueError):
        mvn_cdf(np.zeros((2, 3)), np.eye(2))
