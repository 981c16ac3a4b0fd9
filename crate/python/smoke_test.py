"""Smoke test for the copula_ca extension module.

Run with `python python/smoke_test.py` (or pytest) after installing the wheel.
Reference values come from numpy/scipy, not from the library itself.
"""

import math

import numpy as np
from scipy import stats

import copula_ca as cc


def clayton_density(u, v, theta):
    s = u ** -theta + v ** -theta - 1.0
    return (1.0 + theta) * (u * v) ** (-theta - 1.0) * s ** (-2.0 - 1.0 / theta)


def test_clayton_density_closed_form():
    c = cc.Copula.clayton(2.0)
    for u, v in [(0.5, 0.5), (0.2, 0.7), (0.9, 0.3)]:
        assert math.isclose(c.density([u, v]), clayton_density(u, v, 2.0), rel_tol=1e-12)
    assert c.family == "clayton" and c.dim == 2 and c.theta == 2.0


def test_gaussian_cdf_matches_scipy():
    r = 0.6
    c = cc.Copula.gaussian_pair(r)
    mvn = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, r], [r, 1.0]])
    for u, v in [(0.3, 0.4), (0.8, 0.55), (0.1, 0.9)]:
        expected = mvn.cdf([stats.norm.ppf(u), stats.norm.ppf(v)])
        assert abs(c.cdf([u, v]) - expected) < 1e-6


def test_kendall_tau_and_ranks_match_scipy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=500)
    y = x + rng.normal(size=500)
    assert math.isclose(cc.kendall_tau(x.tolist(), y.tolist()), stats.kendalltau(x, y)[0], rel_tol=1e-12)
    u = cc.pseudo_observations([x.tolist(), y.tolist()])
    np.testing.assert_allclose(u[0], stats.rankdata(x) / 501.0, rtol=0, atol=1e-15)


def test_fit_recovers_clayton_theta():
    u = cc.Copula.clayton(2.0).sample(10_000, seed=5)
    fitted = cc.fit_copula(cc.pseudo_observations(u), "clayton")
    assert abs(fitted.theta - 2.0) < 0.2
    assert cc.select_family(cc.pseudo_observations(u), ["product", "gaussian", "clayton"]) == "clayton"


def test_gaussian_entropy_oracle():
    r = 0.7
    u = cc.Copula.gaussian_pair(r).sample(10_000, seed=1)
    fitted = cc.fit_copula(cc.pseudo_observations(u), "gaussian")
    assert abs(fitted.entropy(cc.pseudo_observations(u)) - 0.5 * math.log(1 - r * r)) < 0.02
    assert abs(cc.mutual_information(u) + 0.5 * math.log(1 - r * r)) < 0.02


def test_separation_of_independent_laplace_sources():
    model = cc.Copula.product(3)
    sources, mixing, x = cc.synthesize(model, ["laplace"] * 3, 5000, seed=42)
    report = cc.cca_fit(x, seed=42)
    p = np.array(report.demixing) @ np.array(mixing)
    assert cc.amari_index(p.tolist()) < 0.05
    assert report.partition == [[0], [1], [2]]
    assert report.copula_entropy == 0.0
    assert report.divergence - report.mutual_information - report.copula_entropy == 0.0
    s = np.array(report.sources(x))
    np.testing.assert_allclose(np.var(s, axis=1), 1.0, rtol=1e-9)


def test_determinism():
    model = cc.Copula.factorial([[2], [0, 1]], [cc.Copula.product(1), cc.Copula.clayton(1.5)])
    assert [b for b, _ in model.blocks()] == [[0, 1], [2]]
    assert model.blocks()[0][1].family == "clayton"
    a = cc.synthesize(model, ["uniform", "gaussian", "laplace"], 300, seed=9, mixing="identity")
    b = cc.synthesize(model, ["uniform", "gaussian", "laplace"], 300, seed=9, mixing="identity")
    assert a == b
    assert a[0] == a[2]


def test_errors_surface_as_python_exceptions():
    for bad in (lambda: cc.Copula.clayton(-1.0), lambda: cc.fit_copula([[0.5] * 200], "frank")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    sources, _, x = cc.synthesize(cc.Copula.product(3), ["gaussian"] * 3, 2000, seed=3)
    try:
        cc.cca_fit(x, max_iter=1, tol=1e-15)
    except RuntimeError as e:
        assert "converge" in str(e)
    else:
        raise AssertionError("expected RuntimeError")


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok  {t.__name__}")
    print(f"{len(tests)} passed")
