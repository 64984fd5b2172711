import math

import numpy as np
import pytest

import skewfit


def logistic_model(n=200, seed=4):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=n)])
    eta = x @ np.array([0.3, -1.1])
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(float)
    return skewfit.GlmModel(x, y, "logistic", np.zeros(2), np.full(2, 4.0))


def test_version_string():
    assert skewfit.__version__.startswith("0.1.0")


def test_laplace_conjugate_gaussian_is_exact():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 2))
    y = x @ np.array([1.0, -0.5]) + rng.normal(size=40)
    model = skewfit.GlmModel(x, y, "gaussian", np.zeros(2), np.full(2, 4.0))
    la = skewfit.fit_laplace(model)
    prec = x.T @ x + np.eye(2) / 4.0
    np.testing.assert_allclose(la.center, np.linalg.solve(prec, x.T @ y), atol=1e-10)
    np.testing.assert_allclose(la.covariance, np.linalg.inv(prec), atol=1e-12)


def test_skew_weight_pairs_with_mirror():
    model = logistic_model()
    q = skewfit.make_skew(skewfit.fit_laplace(model), model)
    c = q.center
    for t in np.random.default_rng(2).normal(size=(10, 2)):
        theta = c + 0.5 * t
        assert q.weight(theta) + q.weight(2 * c - theta) == pytest.approx(1.0, abs=1e-14)


def test_skew_weight_matches_log_ratio():
    model = logistic_model()
    q = skewfit.make_skew(skewfit.fit_laplace(model), model)
    theta = q.center + np.array([0.2, -0.1])
    delta = model.log_posterior(theta) - model.log_posterior(2 * q.center - theta)
    assert q.weight(theta) == pytest.approx(1 / (1 + math.exp(-delta)), abs=1e-12)


def test_skew_density_integrates_to_one_in_2d():
    model = logistic_model()
    la = skewfit.fit_laplace(model)
    q = skewfit.make_skew(la, model)
    sd = np.sqrt(np.diag(la.covariance))
    lo, hi = la.center - 10 * sd, la.center + 10 * sd
    est = skewfit.divergence("tv", q.log_pdf, la.log_pdf, lo, hi, points=129)
    assert 0.0 < est["value"] < 0.2


def test_sampler_reproducible_and_shaped():
    model = logistic_model()
    q = skewfit.make_skew(skewfit.fit_laplace(model), model)
    a = q.sample(500, seed=9)
    b = q.sample(500, seed=9)
    assert a.shape == (500, 2)
    np.testing.assert_array_equal(a, b)


def test_gaussian_total_variation_closed_form():
    # TV between N(0,1) and N(1,1) is 2 Phi(1/2) - 1.
    lp = lambda t: -0.5 * t[0] ** 2 - 0.5 * math.log(2 * math.pi)
    lq = lambda t: -0.5 * (t[0] - 1) ** 2 - 0.5 * math.log(2 * math.pi)
    est = skewfit.divergence("tv", lp, lq, [-14.0], [15.0], points=4097)
    h = 29.0 / 4096
    # trapezoid error across the |p - q| kink at t = 1/2 is O(h^2)
    assert est["value"] == pytest.approx(math.erf(0.5 / math.sqrt(2)), abs=h * h)


def test_gep_and_gvb_run_on_dataset(source_dir):
    model = skewfit.GlmModel.from_csv(
        str(source_dir / "data" / "substance_use.csv"), "count", "poisson")
    assert model.dim == 16
    gep = skewfit.fit_gep(model)
    gvb = skewfit.fit_gvb(model, iterations=500, seed=3)
    la = skewfit.fit_laplace(model)
    assert np.abs(gep.center - la.center).max() < 0.5
    assert gvb.kind == "gvb"


def test_snp_rejects_high_dimension():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 3))
    model = skewfit.GlmModel(x, (rng.uniform(size=30) < 0.5).astype(float), "logistic",
                             np.zeros(3), np.full(3, 4.0))
    with pytest.raises(Exception):
        skewfit.build_snp(model, skewfit.fit_laplace(model))


def test_verify_conjugate_suite_passes():
    report = skewfit.run_verify(suites=["equality"], conjugate_only=True)
    assert report["passed"]


def test_rate_experiment_single_size():
    curves = skewfit.rate_experiment(sample_sizes=[200], replicates=3, seed=7)
    assert [c["variant"] for c in curves] == ["f1", "q1", "q2"]
    assert all(c["slope_defined"] is False for c in curves)
