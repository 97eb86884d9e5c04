import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from svridge import (
    Adjacency,
    Dataset,
    FitResult,
    GicReport,
    ModelParams,
    lambda_step_single,
    lambda_tilde,
    load_dataset,
    make_basis,
    mse,
    ridge_edf,
)

pos = st.floats(1e-6, 1e3)
gam = st.floats(1e-6, 1e2)
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(pos, pos, st.floats(0, 1e3), gam, gam, st.integers(1, 4))
def test_lambda_step_is_stationary_and_positive(a, b, r, g1, g2, d):
    x = lambda_step_single(a, b, r, g1, g2, d)
    assert x > 0
    # d/dx of r*x + g1*(d*x^2 - 2*x*(a+b)) - g2*log(x)
    grad = r + 2 * g1 * (d * x - (a + b)) - g2 / x
    scale = r + 2 * g1 * (d * x + a + b) + g2 / x
    assert abs(grad) <= 1e-9 * scale


@given(pos, pos, st.floats(0, 1e3), gam, gam)
def test_lambda_step_symmetric_in_neighbours(a, b, r, g1, g2):
    assert lambda_step_single(a, b, r, g1, g2) == lambda_step_single(b, a, r, g1, g2)


@given(arrays(float, st.integers(2, 12), elements=st.floats(-1e4, 1e4)), gam, gam)
def test_lambda_tilde_always_in_bounds(beta, g1, g2):
    lt = lambda_tilde(beta, g1, g2, derivatives=False)
    assert np.all((lt.values >= 1e-10) & (lt.values <= 1e10))
    assert lt.clamped_mask.shape == beta.shape


@given(arrays(float, st.integers(2, 15), elements=finite))
def test_chain_penalty_identity(lam):
    D = Adjacency.chain(lam.size).laplacian()
    assert np.all(D.sum(1) == 0)
    lhs = lam @ D @ lam
    rhs = np.sum(np.diff(lam) ** 2)
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-6 * (1 + np.sum(lam**2)))


@given(st.integers(2, 5), st.integers(2, 5))
def test_grid_laplacian_is_psd(a, b):
    D = Adjacency.grid((a, b)).laplacian()
    np.testing.assert_array_equal(D, D.T)
    assert np.linalg.eigvalsh(D)[0] > -1e-10


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-8, 3), st.floats(0.01, 10))
def test_edf_between_zero_and_m_and_monotone(seed, loglam, alpha):
    X = np.random.default_rng(seed).normal(size=(12, 4))
    lam = 10.0**loglam
    e1, e2 = ridge_edf(X, lam, alpha), ridge_edf(X, 2 * lam, alpha)
    assert 0 < e2 <= e1 <= 4 + 1e-12


@given(finite, st.floats(0, 1e6))
def test_gic_total_is_sum(a, b):
    rep = GicReport(a, b)
    assert rep.total == a + b


@settings(deadline=None)
@given(arrays(float, st.integers(1, 20), elements=finite), arrays(float, 20, elements=finite))
def test_csv_round_trip(xs, ys):
    ys = ys[: xs.size]
    ds = Dataset(xs, ys)
    back = load_dataset(ds.to_csv())
    np.testing.assert_array_equal(back.xs, ds.xs)
    np.testing.assert_array_equal(back.ys, ds.ys)


@given(arrays(float, 5, elements=st.floats(-3, 3)), st.floats(-2, 2))
def test_mse_of_shifted_truth(beta, c):
    spec = make_basis((0, 1), 5)
    ds = Dataset(np.linspace(0, 1, 11), np.zeros(11))
    fit = FitResult(ModelParams(1.0, beta), 0.1, objective_trace=[0.0], iterations=1)
    curve = spec.evaluate(ds.xs) @ beta
    got = mse(fit, spec, ds, lambda x: curve - c)
    assert math.isclose(got, c * c, rel_tol=1e-9, abs_tol=1e-12)


@given(st.integers(2, 40), st.floats(-5, 5), st.floats(0.1, 5), st.floats(0.25, 4))
def test_basis_centres_span_domain(m, lo, span, scale):
    spec = make_basis((lo, lo + span), m, scale)
    c = spec.centers[:, 0]
    assert c[0] == lo and math.isclose(c[-1], lo + span)
    assume(m > 1)
    assert math.isclose(spec.width, scale * span / (m - 1), rel_tol=1e-12)
