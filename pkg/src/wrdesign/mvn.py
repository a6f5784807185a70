"""Normal-distribution helpers: quantiles, bivariate and multivariate CDFs."""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.stats import qmc

from .quadrature import integrate

# Arguments are clipped here; Phi(40) == 1 and Phi(-40) == 0 in double precision.
ZMAX = 40.0

# Seed and accuracy of the randomized quasi-Monte Carlo integrator (d >= 4).
RQMC_SEED = 20240917
RQMC_ABSEPS = 1e-7
RQMC_RANDOMIZATIONS = 8
RQMC_MAX_LOG2 = 17


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(p):
    """Standard normal quantile (scipy's ndtri, accurate to ~1e-15)."""
    return special.ndtri(p)


def z_quantile(p: float) -> float:
    """``Z_p`` such that ``Phi(Z_p) = p``, for ``0 < p < 1``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    return float(special.ndtri(p))


def bvn_cdf(x, y, r):
    """P(X <= x, Y <= y) for standard bivariate normal with correlation ``r``.

    Uses Owen's T-function identity, exact up to the accuracy of
    :func:`scipy.special.owens_t`.
    """
    x, y, r = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(r, float))
    x = np.clip(x, -ZMAX, ZMAX)
    y = np.clip(y, -ZMAX, ZMAX)
    out = np.empty(x.shape)

    indep = r == 0
    out[indep] = special.ndtr(x[indep]) * special.ndtr(y[indep])

    m = ~indep
    if np.any(m):
        h, k, rho = x[m], y[m], r[m]
        # Owen's identity needs h, k away from 0; the nudge moves the result by O(1e-13).
        h = np.where(h == 0, 1e-13, h)
        k = np.where(k == 0, 1e-13, k)
        sq = np.sqrt((1 - rho) * (1 + rho))
        a_h = (k - rho * h) / (h * sq)
        a_k = (h - rho * k) / (k * sq)
        beta = np.where(h * k > 0, 0.0, 0.5)
        val = 0.5 * (special.ndtr(h) + special.ndtr(k)) - special.owens_t(h, a_h) - special.owens_t(k, a_k) - beta
        out[m] = val
    return np.clip(out, 0.0, 1.0)


def _phi2(x, y, r):
    """Standard bivariate normal density."""
    q = (x * x - 2 * r * x * y + y * y) / (1 - r * r)
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(1 - r * r))


def tvn_cdf(upper: np.ndarray, corr: np.ndarray, rtol: float = 1e-12, atol: float = 1e-15) -> np.ndarray:
    """Trivariate normal CDF through Plackett's identity.

    The strongest pair is held fixed while the correlations linking it to the
    remaining coordinate are scaled by ``t`` from 0 to 1. At ``t = 0`` the
    probability factorises into univariate and bivariate CDFs, and its
    derivative in ``t`` needs only bivariate densities and univariate CDFs,
    so the remaining one-dimensional integral is smooth and cheap.
    """
    upper = np.clip(np.atleast_2d(np.asarray(upper, float)), -ZMAX, ZMAX)
    c = np.asarray(corr, float)
    lead, a, b = max([(0, 1, 2), (1, 0, 2), (2, 0, 1)], key=lambda p: abs(c[p[1], p[2]]))
    h = upper[:, [lead, a, b]]
    r12, r13, r23 = c[lead, a], c[lead, b], c[a, b]
    p0 = special.ndtr(h[:, 0]) * bvn_cdf(h[:, 1], h[:, 2], r23)
    if r12 == 0 and r13 == 0:
        return np.clip(p0, 0.0, 1.0)

    def f(t, idx):
        h1, h2, h3 = (h[idx, i][:, None] for i in range(3))
        p12, p13 = t * r12, t * r13
        # d/dr12 term: phi2(h1, h2) * P(Z3 <= h3 | Z1 = h1, Z2 = h2)
        d = 1 - p12**2
        b1, b2 = (p13 - p12 * r23) / d, (r23 - p12 * p13) / d
        s3 = np.sqrt(np.maximum(1 - p13 * b1 - r23 * b2, 1e-300))
        g = r12 * _phi2(h1, h2, p12) * special.ndtr((h3 - b1 * h1 - b2 * h2) / s3)
        d = 1 - p13**2
        c1, c2 = (p12 - p13 * r23) / d, (r23 - p13 * p12) / d
        s2 = np.sqrt(np.maximum(1 - p12 * c1 - r23 * c2, 1e-300))
        return g + r13 * _phi2(h1, h3, p13) * special.ndtr((h2 - c1 * h1 - c2 * h3) / s2)

    n = len(h)
    val, _ = integrate(f, np.zeros(n), np.ones(n), rtol=rtol, atol=atol)
    return np.clip(p0 + val, 0.0, 1.0)


def _genz_estimate(upper: np.ndarray, chol: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Mean of Genz's separation-of-variables integrand over ``points``."""
    m, d = upper.shape
    n = points.shape[0]
    e = np.broadcast_to(special.ndtr(upper[:, :1] / chol[0, 0]), (m, n)).copy()
    f = e.copy()
    ys = np.empty((d - 1, m, n))
    for i in range(1, d):
        ys[i - 1] = special.ndtri(np.clip(points[None, :, i - 1] * e, 1e-300, 1 - 1e-16))
        shift = np.tensordot(chol[i, :i], ys[:i], axes=(0, 0))
        e = special.ndtr((upper[:, i : i + 1] - shift) / chol[i, i])
        f *= e
    return f.mean(axis=1)


def mvn_cdf(upper, corr, abseps: float = RQMC_ABSEPS, seed: int = RQMC_SEED) -> np.ndarray:
    """P(Z <= upper) for Z ~ N(0, corr), evaluated row-wise.

    ``upper`` has shape ``(m, d)``; infinite limits are allowed. Dimensions 1
    to 3 are computed to near machine precision (:func:`bvn_cdf`,
    :func:`tvn_cdf`). Higher dimensions use randomized scrambled-Sobol
    integration with a fixed seed, doubling the point count until three
    standard errors fall below ``abseps`` (or the point budget runs out), so
    repeated calls agree bit for bit.
    """
    upper = np.clip(np.atleast_2d(np.asarray(upper, float)), -ZMAX, ZMAX)
    corr = np.asarray(corr, float)
    m, d = upper.shape
    if corr.shape != (d, d):
        raise ValueError("correlation matrix does not match the number of limits")
    # coordinates at +ZMAX in every row contribute a factor of 1
    live = np.flatnonzero(~np.all(upper >= ZMAX, axis=0))
    if 0 < live.size < d:
        return mvn_cdf(upper[:, live], corr[np.ix_(live, live)], abseps, seed)
    if live.size == 0:
        return np.ones(m)
    if d == 1:
        return special.ndtr(upper[:, 0])
    if d == 2:
        return bvn_cdf(upper[:, 0], upper[:, 1], corr[0, 1])
    if np.array_equal(corr, np.eye(d)):
        return np.prod(special.ndtr(upper), axis=1)
    if d == 3:
        return tvn_cdf(upper, corr)

    chol = np.linalg.cholesky(corr)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=RQMC_RANDOMIZATIONS)
    engines = [qmc.Sobol(d - 1, scramble=True, seed=int(s)) for s in seeds]
    log2 = 10
    sums = np.zeros((RQMC_RANDOMIZATIONS, m))
    count = 0
    while True:
        n_new = 2**log2 - count
        for j, eng in enumerate(engines):
            sums[j] += _genz_estimate(upper, chol, eng.random(n_new)) * n_new
        count += n_new
        est = sums / count
        mean = est.mean(axis=0)
        err = 3 * est.std(axis=0, ddof=1) / np.sqrt(RQMC_RANDOMIZATIONS)
        if np.all(err <= abseps) or log2 >= RQMC_MAX_LOG2:
            return np.clip(mean, 0.0, 1.0)
        log2 += 1
