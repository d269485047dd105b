"""Negative binomial regression: pmf, likelihood, MLE, Wald, ilr coefficients."""

import warnings

import numpy as np
import pytest
import scipy.stats
from scipy import special

from codareg import (
    CompositionMatrix,
    DesignMatrix,
    DimensionMismatchError,
    DomainError,
    MissingCovarianceError,
    NegBinFit,
    NonConvergenceWarning,
    RankDeficientError,
    backtransform_ilr_coeffs,
    contrast_matrix,
    fit_compositional_linear,
    ilr,
    nb_fit,
    nb_loglik,
    nb_mean_var,
    nb_pmf,
    nb_predict,
    wald,
)
from codareg.logratio import ContrastMatrix
from codareg.nbglm import _eval_loglik

PMF_4_25_03 = 0.10679903078612618      # C(5.5-ish) via 40-digit arithmetic
P_AT_ONE_SIGMA = 0.31731050786291415   # 2 * (1 - Phi(1))


def _simulate(rng, n, beta, r, exposure=None):
    x = rng.standard_normal((n, len(beta) - 1))
    X = DesignMatrix(
        np.column_stack([np.ones(n), x]),
        ["(Intercept)"] + [f"x{j + 1}" for j in range(x.shape[1])],
    )
    if exposure is None:
        exposure = np.ones(n)
    mu = exposure * np.exp(X.values @ np.asarray(beta))
    y = rng.negative_binomial(r, r / (r + mu))
    return X, y, exposure


# -- nb_pmf ---------------------------------------------------------------------

def test_pmf_geometric_special_case():
    assert nb_pmf(0, 1.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert nb_pmf(2, 1.0, 0.5) == pytest.approx(0.125, abs=1e-15)


def test_pmf_fractional_dispersion_frozen_value():
    assert nb_pmf(4, 2.5, 0.3) == pytest.approx(PMF_4_25_03, abs=1e-13)


def test_pmf_scalar_and_array_shapes():
    assert isinstance(nb_pmf(3, 2.0, 0.4), float)
    out = nb_pmf(np.array([0, 1, 2]), 2.0, 0.4)
    assert out.shape == (3,)
    assert out[1] == pytest.approx(nb_pmf(1, 2.0, 0.4), abs=1e-16)


def test_pmf_recurrence():
    # pmf(j+1)/pmf(j) = (j + r)(1 - p)/(j + 1)
    for r, p in [(0.7, 0.2), (1.0, 0.5), (4.5, 0.85)]:
        j = np.arange(0, 40)
        pj = nb_pmf(j, r, p)
        ratio = pj[1:] / pj[:-1]
        expected = (j[:-1] + r) * (1.0 - p) / (j[:-1] + 1.0)
        assert np.allclose(ratio, expected, rtol=1e-12)


def test_pmf_sums_to_one():
    j = np.arange(10001)
    for r in (0.05, 0.5, 2.0, 10.0):
        for p in (0.1, 0.5, 0.9):
            total = float(nb_pmf(j, r, p).sum())
            # upper slack covers float accumulation across 10001 terms
            assert 1.0 - 1e-9 <= total <= 1.0 + 1e-12


def test_pmf_agrees_with_reference_distribution():
    j = np.arange(0, 200)
    for r, p in [(0.3, 0.15), (2.5, 0.3), (12.0, 0.7)]:
        assert np.allclose(nb_pmf(j, r, p), scipy.stats.nbinom.pmf(j, r, p),
                           rtol=1e-12, atol=0.0)


def test_pmf_domain_validation():
    for bad in [(-1, 1.0, 0.5), (1.5, 1.0, 0.5), (2, 0.0, 0.5),
                (2, -1.0, 0.5), (2, 1.0, 0.0), (2, 1.0, 1.0)]:
        with pytest.raises(DomainError):
            nb_pmf(*bad)


# -- nb_mean_var ------------------------------------------------------------------

def test_mean_var_geometric():
    assert nb_mean_var(1.0, 0.5) == (1.0, 2.0)


def test_variance_to_mean_ratio_is_reciprocal_p():
    for r in (0.2, 1.0, 7.0):
        for p in (0.05, 0.4, 0.95):
            mean, var = nb_mean_var(r, p)
            assert var / mean == pytest.approx(1.0 / p, rel=1e-14)
            assert var > mean


def test_mean_var_domain_validation():
    with pytest.raises(DomainError):
        nb_mean_var(0.0, 0.5)
    with pytest.raises(DomainError):
        nb_mean_var(1.0, 1.0)


# -- nb_loglik ---------------------------------------------------------------------

def test_loglik_matches_pmf_summation():
    rng = np.random.default_rng(21)
    X, y, exposure = _simulate(rng, 5, [0.2, -0.4], 1.5)
    exposure = rng.uniform(0.5, 3.0, size=5)
    r, beta = 1.7, np.array([0.2, -0.4])
    mu = exposure * np.exp(X.values @ beta)
    p = r / (r + mu)
    oracle = sum(np.log(nb_pmf(int(yi), r, pi)) for yi, pi in zip(y, p))
    assert nb_loglik(r, beta, X, y, exposure) == pytest.approx(oracle, abs=1e-12)


def test_loglik_single_zero_count_closed_form():
    X = DesignMatrix([[1.0]], ["(Intercept)"])
    r, b0, E = 2.3, -0.7, 4.0
    mu = E * np.exp(b0)
    assert nb_loglik(r, [b0], X, [0], [E]) == pytest.approx(
        r * np.log(r / (r + mu)), abs=1e-14)


def test_loglik_validation():
    X = DesignMatrix([[1.0], [1.0]], ["(Intercept)"])
    with pytest.raises(DimensionMismatchError):
        nb_loglik(1.0, [0.1, 0.2], X, [1, 2], [1.0, 1.0])
    with pytest.raises(DomainError):
        nb_loglik(-1.0, [0.1], X, [1, 2], [1.0, 1.0])
    with pytest.raises(DomainError):
        nb_loglik(1.0, [0.1], X, [1, -2], [1.0, 1.0])
    with pytest.raises(DomainError):
        nb_loglik(1.0, [0.1], X, [1, 2], [1.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        nb_loglik(1.0, [0.1], np.ones((2, 1)), [1, 2], [1.0, 1.0])


def test_loglik_is_finite_for_extreme_predictors():
    X = DesignMatrix([[1.0], [1.0]], ["(Intercept)"])
    assert np.isfinite(nb_loglik(0.5, [300.0], X, [3, 0], [1.0, 1.0]))
    assert np.isfinite(nb_loglik(0.5, [-300.0], X, [3, 0], [1.0, 1.0]))


def test_internal_derivatives_match_finite_differences():
    rng = np.random.default_rng(22)
    X, y, exposure = _simulate(rng, 40, [0.3, -0.5, 0.2], 1.2)
    log_exposure = np.log(exposure)
    theta = np.array([0.4, 0.1, -0.3, 0.25])
    ll, grad, hess = _eval_loglik(theta, X.values, y, log_exposure, order=2)
    h = 1e-6
    for k in range(theta.size):
        plus = theta.copy(); plus[k] += h
        minus = theta.copy(); minus[k] -= h
        fd = (_eval_loglik(plus, X.values, y, log_exposure, order=0)
              - _eval_loglik(minus, X.values, y, log_exposure, order=0)) / (2 * h)
        assert fd == pytest.approx(grad[k], rel=1e-6, abs=1e-8)
        gd = (_eval_loglik(plus, X.values, y, log_exposure, order=1)[1]
              - _eval_loglik(minus, X.values, y, log_exposure, order=1)[1]) / (2 * h)
        assert np.allclose(gd, hess[k], rtol=1e-5, atol=1e-6)


# -- nb_fit -----------------------------------------------------------------------

def test_intercept_only_fit_matches_sample_mean():
    rng = np.random.default_rng(23)
    y = rng.negative_binomial(1.0, 0.4, size=300)
    X = DesignMatrix(np.ones((300, 1)), ["(Intercept)"])
    fit = nb_fit(X, y, np.ones(300))
    assert fit.converged
    assert np.exp(fit.beta[0]) == pytest.approx(y.mean(), abs=1e-8)


def test_fit_recovers_simulation_truth_within_three_se():
    rng = np.random.default_rng(24)
    beta_true = np.array([0.5, -1.0])
    X, y, exposure = _simulate(rng, 5000, beta_true, 2.0)
    fit = nb_fit(X, y, exposure)
    assert fit.converged
    se = np.sqrt(np.diag(fit.cov))
    assert np.all(np.abs(fit.beta - beta_true) < 3.0 * se)
    assert 1.5 < fit.dispersion < 2.6


def test_fitted_point_is_stationary_by_finite_differences():
    rng = np.random.default_rng(25)
    X, y, exposure = _simulate(rng, 200, [0.2, -0.6], 1.5)
    fit = nb_fit(X, y, exposure)
    assert fit.converged
    h = 1e-5
    fd = np.zeros(fit.beta.size + 1)
    hr = h * max(1.0, fit.dispersion)
    fd[0] = (nb_loglik(fit.dispersion + hr, fit.beta, X, y, exposure)
             - nb_loglik(fit.dispersion - hr, fit.beta, X, y, exposure)) / (2 * hr)
    for k in range(fit.beta.size):
        plus = fit.beta.copy(); plus[k] += h
        minus = fit.beta.copy(); minus[k] -= h
        fd[k + 1] = (nb_loglik(fit.dispersion, plus, X, y, exposure)
                     - nb_loglik(fit.dispersion, minus, X, y, exposure)) / (2 * h)
    assert np.max(np.abs(fd)) < 1e-5


def test_scaling_exposure_shifts_only_the_intercept():
    rng = np.random.default_rng(26)
    X, y, exposure = _simulate(rng, 400, [0.1, -0.4], 1.8,
                               exposure=rng.uniform(1.0, 50.0, size=400))
    c = 3.5
    fit1 = nb_fit(X, y, exposure)
    fit2 = nb_fit(X, y, c * exposure)
    assert fit2.beta[0] == pytest.approx(fit1.beta[0] - np.log(c), abs=1e-6)
    assert np.allclose(fit2.beta[1:], fit1.beta[1:], atol=1e-6)
    assert fit2.dispersion == pytest.approx(fit1.dispersion, rel=1e-6)


def test_fit_is_invariant_to_ilr_basis_rotation():
    rng = np.random.default_rng(27)
    n, d = 150, 4
    comps = CompositionMatrix(rng.dirichlet(np.full(d, 0.8), size=n))
    basis1 = contrast_matrix(d)
    Q, _ = np.linalg.qr(rng.standard_normal((d - 1, d - 1)))
    basis2 = ContrastMatrix(Q @ basis1.entries)
    mu = 2.0 * np.exp(0.3 * np.log(comps.values[:, 0]))
    y = rng.negative_binomial(1.5, 1.5 / (1.5 + mu))
    exposure = np.ones(n)

    fits = []
    for basis in (basis1, basis2):
        coords = np.vstack([ilr(comps.row(i), basis).coords for i in range(n)])
        X = DesignMatrix(np.column_stack([np.ones(n), coords]),
                         ["(Intercept)"] + [f"V{k + 1}" for k in range(d - 1)])
        fits.append((nb_fit(X, y, exposure), basis))
    (f1, b1), (f2, b2) = fits
    assert f1.loglik == pytest.approx(f2.loglik, abs=1e-6)
    c1 = backtransform_ilr_coeffs(f1.beta[1:], b1)
    c2 = backtransform_ilr_coeffs(f2.beta[1:], b2)
    assert np.allclose(c1.values, c2.values, atol=1e-6)


def test_fit_rejects_degenerate_inputs():
    X = DesignMatrix(np.column_stack([np.ones(5), np.arange(5.0)]),
                     ["(Intercept)", "x1"])
    with pytest.raises(DomainError):
        nb_fit(X, np.zeros(5, dtype=int), np.ones(5))
    small = DesignMatrix(np.column_stack([np.ones(2), [0.0, 1.0]]),
                         ["(Intercept)", "x1"])
    with pytest.raises(DimensionMismatchError):
        nb_fit(small, [1, 2], np.ones(2))
    rng = np.random.default_rng(28)
    a = rng.standard_normal(20)
    b = rng.standard_normal(20)
    Xc = DesignMatrix(np.column_stack([np.ones(20), a, b, a + b]),
                      ["(Intercept)", "a", "b", "c"])
    with pytest.raises(RankDeficientError):
        nb_fit(Xc, rng.poisson(2.0, size=20), np.ones(20))


def test_underdispersed_data_pushes_dispersion_to_poisson_limit():
    rng = np.random.default_rng(29)
    y = rng.binomial(10, 0.3, size=200)     # var < mean
    X = DesignMatrix(np.column_stack([np.ones(200), rng.standard_normal(200)]),
                     ["(Intercept)", "x1"])
    with pytest.warns(NonConvergenceWarning):
        fit = nb_fit(X, y, np.ones(200))
    assert not fit.converged
    assert fit.dispersion > 1e3
    assert np.all(np.isfinite(fit.beta))


def test_design_matrix_validation():
    with pytest.raises(DomainError):
        DesignMatrix(np.zeros((3, 1)), ["(Intercept)"])
    with pytest.raises(DomainError):
        DesignMatrix(np.column_stack([np.ones(3), np.full(3, 2.0)]),
                     ["(Intercept)", "x1"])
    with pytest.raises(DomainError):
        DesignMatrix(np.column_stack([np.ones(3), [1.0, 2.0, 3.0],
                                      [1.0, 2.0, 3.0]]),
                     ["(Intercept)", "x1", "x2"])
    with pytest.raises(DimensionMismatchError):
        DesignMatrix(np.column_stack([np.ones(3), [1.0, 2.0, 3.0]]),
                     ["(Intercept)", "(Intercept)"])
    X = DesignMatrix(np.column_stack([np.ones(3), [1.0, 2.0, 3.0]]),
                     ["(Intercept)", "x1"])
    with pytest.raises(ValueError):
        X.values[0, 0] = 5.0


# -- nb_predict -------------------------------------------------------------------

def test_predict_scales_linearly_with_exposure():
    rng = np.random.default_rng(30)
    X, y, exposure = _simulate(rng, 100, [0.2, -0.3], 1.5)
    fit = nb_fit(X, y, exposure)
    base = nb_predict(fit, X, exposure)
    assert np.allclose(nb_predict(fit, X, 2.0 * exposure), 2.0 * base, rtol=1e-15)
    assert base == pytest.approx(list(exposure * np.exp(X.values @ fit.beta)))


def test_predict_validates_shapes():
    fit = NegBinFit(beta=[0.5], dispersion=1.0, cov=None, loglik=-1.0,
                    converged=True, n_iterations=1, names=("(Intercept)",))
    X = DesignMatrix(np.column_stack([np.ones(3), [1.0, 2.0, 3.0]]),
                     ["(Intercept)", "x1"])
    with pytest.raises(DimensionMismatchError):
        nb_predict(fit, X, np.ones(3))


# -- wald -------------------------------------------------------------------------

def _manual_fit(beta, cov):
    names = tuple(f"b{k}" for k in range(len(beta)))
    return NegBinFit(beta=beta, dispersion=1.0, cov=cov, loglik=0.0,
                     converged=True, n_iterations=0, names=names)


def test_wald_one_sigma_p_value():
    table = wald(_manual_fit([1.0], [[1.0]]))
    assert table.z_value[0] == 1.0
    assert table.p_value[0] == pytest.approx(P_AT_ONE_SIGMA, abs=1e-15)


def test_wald_zero_estimate():
    table = wald(_manual_fit([0.0], [[4.0]]))
    assert table.z_value[0] == 0.0
    assert table.p_value[0] == 1.0


def test_wald_degenerate_standard_errors():
    table = wald(_manual_fit([0.0, 2.0], [[0.0, 0.0], [0.0, 0.0]]))
    assert table.z_value[0] == 0.0 and table.p_value[0] == 1.0
    assert table.z_value[1] == np.inf and table.p_value[1] == 0.0


def test_wald_requires_covariance():
    fit = NegBinFit(beta=[1.0], dispersion=1.0, cov=None, loglik=0.0,
                    converged=True, n_iterations=0, names=("b0",))
    with pytest.raises(MissingCovarianceError):
        wald(fit)


def test_wald_matches_normal_tail():
    rng = np.random.default_rng(31)
    X, y, exposure = _simulate(rng, 500, [0.3, -0.2], 1.5)
    table = wald(nb_fit(X, y, exposure))
    assert np.allclose(table.p_value,
                       special.erfc(np.abs(table.z_value) / np.sqrt(2.0)))
    df = table.as_dataframe()
    assert list(df.index) == list(table.names)
    assert df.loc[table.names[0], "estimate"] == table.estimate[0]


# -- backtransform_ilr_coeffs --------------------------------------------------------

def test_zero_coefficients_backtransform_to_uniform():
    comp = backtransform_ilr_coeffs(np.zeros(4), contrast_matrix(5))
    assert np.allclose(comp.values, 0.2, atol=1e-15)


def test_backtransform_round_trip():
    rng = np.random.default_rng(32)
    basis = contrast_matrix(6)
    beta = rng.standard_normal(5)
    comp = backtransform_ilr_coeffs(beta, basis)
    assert comp.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(ilr(comp, basis).coords, beta, atol=1e-10)


def test_backtransform_validation():
    with pytest.raises(DimensionMismatchError):
        backtransform_ilr_coeffs(np.zeros(3), contrast_matrix(5))
    with pytest.raises(DomainError):
        backtransform_ilr_coeffs([np.nan, 0.0, 0.0, 0.0], contrast_matrix(5))
    with pytest.raises(DimensionMismatchError):
        backtransform_ilr_coeffs(np.zeros(4), np.eye(4))


# -- fit_compositional_linear ----------------------------------------------------------

def test_constant_response_gives_zero_coordinate_effects():
    rng = np.random.default_rng(33)
    X = CompositionMatrix(rng.dirichlet(np.ones(4), size=30))
    b0, coords, comp = fit_compositional_linear(X, np.full(30, 2.5),
                                                contrast_matrix(4))
    assert b0 == pytest.approx(2.5, abs=1e-10)
    assert np.allclose(coords, 0.0, atol=1e-10)
    assert np.allclose(comp.values, 0.25, atol=1e-9)


def test_noiseless_linear_model_is_recovered():
    rng = np.random.default_rng(34)
    basis = contrast_matrix(5)
    X = CompositionMatrix(rng.dirichlet(np.ones(5), size=40))
    coords = np.vstack([ilr(X.row(i), basis).coords for i in range(40)])
    truth = np.array([0.7, -0.2, 0.5, 0.0])
    y = 1.4 + coords @ truth
    b0, est, comp = fit_compositional_linear(X, y, basis)
    assert b0 == pytest.approx(1.4, abs=1e-8)
    assert np.allclose(est, truth, atol=1e-8)
    assert np.allclose(comp.values,
                       backtransform_ilr_coeffs(truth, basis).values, atol=1e-8)


def test_least_squares_matches_normal_equations():
    rng = np.random.default_rng(35)
    basis = contrast_matrix(4)
    X = CompositionMatrix(rng.dirichlet(np.ones(4), size=50))
    y = rng.standard_normal(50)
    b0, est, _ = fit_compositional_linear(X, y, basis)
    coords = np.vstack([ilr(X.row(i), basis).coords for i in range(50)])
    D = np.column_stack([np.ones(50), coords])
    oracle = np.linalg.solve(D.T @ D, D.T @ y)
    assert b0 == pytest.approx(oracle[0], abs=1e-10)
    assert np.allclose(est, oracle[1:], atol=1e-10)


def test_compositional_linear_validation():
    rng = np.random.default_rng(36)
    X = CompositionMatrix(rng.dirichlet(np.ones(4), size=3))
    with pytest.raises(DimensionMismatchError):
        fit_compositional_linear(X, np.zeros(3), contrast_matrix(4))
    X10 = CompositionMatrix(rng.dirichlet(np.ones(4), size=10))
    with pytest.raises(DimensionMismatchError):
        fit_compositional_linear(X10, np.zeros(3), contrast_matrix(4))
    with pytest.raises(DimensionMismatchError):
        fit_compositional_linear(X10, np.zeros(10), contrast_matrix(5))
