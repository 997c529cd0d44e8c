from __future__ import annotations

from fractions import Fraction

import gmpy2
import numpy as np
import pytest

from xebstat.alltoall import reduced_initial_state, reduced_transfer
from xebstat.model import ModelParams
from xebstat.precision import (
    EigenConvergenceError,
    NumericError,
    PrecisionContext,
    PrecisionError,
    eig_dense,
    format_decimal,
    linear_fit,
    matvec,
    norm_inf,
    qr,
    solve,
    svd,
    svd_truncate,
)


def test_context_validation():
    with pytest.raises(ValueError):
        PrecisionContext(32)
    assert PrecisionContext().mantissa_bits == 256
    assert PrecisionContext(53).fast


def test_mixed_precision_rejected(ctx):
    with PrecisionContext(128).activate():
        other = gmpy2.mpfr(1) / 3
    with pytest.raises(PrecisionError):
        ctx.scalar(other)
    with pytest.raises(PrecisionError):
        PrecisionContext.of(ctx.array([1, 2]), np.array([other], dtype=object))


def test_scalars_carry_context_precision(ctx):
    x = ctx.scalar(Fraction(1, 3))
    assert x.precision == 256
    assert abs(x * 3 - 1) < 2.0**-250


def test_matvec_identity_and_triangular(ctx):
    with ctx.activate():
        assert list(matvec(ctx.eye(3), ctx.array([1, 2, 3]))) == [1, 2, 3]
        assert list(matvec(ctx.array([[1, 1], [0, 1]]), ctx.array([1, 1]))) == [2, 1]
        with pytest.raises(ValueError):
            matvec(ctx.eye(3), ctx.array([1, 2]))


def test_matvec_reduced_transfer_two_sites(ctx):
    p = ModelParams(2, 1, 0, 0, ctx)
    with ctx.activate():
        out = matvec(reduced_transfer(2, p).T_red, reduced_initial_state(2, 2, ctx).p)
        want = [Fraction(4, 5), 0, Fraction(1, 5)]
        assert max(abs(a - ctx.scalar(b)) for a, b in zip(out, want)) < 1e-70


def test_eig_diagonal_and_triangular(ctx):
    with ctx.activate():
        dec = eig_dense(ctx.array([[1, 0, 0], [0, 0.4, 0], [0, 0, 0.1]]), k=2)
        assert [float(x) for x in dec.eigenvalues] == pytest.approx([1, 0.4], abs=1e-70)
        dec = eig_dense(ctx.array([[1, 0.5], [0, 0.5]]))
        assert [float(x) for x in dec.eigenvalues] == pytest.approx([1, 0.5], abs=1e-70)
        w = dec.left_vectors[0]
        assert abs(w[0] - w[1]) < 1e-70


def test_eig_residuals_random_nonsymmetric(ctx):
    rng = np.random.default_rng(3)
    with ctx.activate():
        m = ctx.array(rng.standard_normal((12, 12)))
        dec = eig_dense(m)
        tol = 2.0 ** (-128) * float(norm_inf(m))
        for lam, im, v, w in zip(dec.eigenvalues, dec.imag, dec.right_vectors, dec.left_vectors):
            if im != 0:
                continue
            assert float(norm_inf(m @ v - lam * v)) <= tol
            assert float(norm_inf(w @ m - lam * w)) <= tol
        mods = [abs(complex(float(a), float(b))) for a, b in zip(dec.eigenvalues, dec.imag)]
        assert mods == sorted(mods, reverse=True)
        ref = sorted(np.abs(np.linalg.eigvals(m.astype(float))), reverse=True)
        assert np.allclose(mods, ref, atol=1e-10)


def test_eig_flags_complex_pairs(ctx):
    with ctx.activate():
        rot = ctx.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.5]])
        dec = eig_dense(rot)
        assert dec.is_complex[:2] == [True, True]
        assert not dec.is_complex[2]


def test_eig_leading_sign_convention(ctx):
    with ctx.activate():
        dec = eig_dense(ctx.array([[2, 1], [1, 2]]))
        for v in dec.right_vectors:
            first = next(x for x in v if x != 0)
            assert first > 0


def test_eig_deterministic(ctx):
    rng = np.random.default_rng(0)
    with ctx.activate():
        m = ctx.array(rng.random((8, 8)))
        a, b = eig_dense(m, 3), eig_dense(m.copy(), 3)
    assert [str(x) for x in a.eigenvalues] == [str(x) for x in b.eigenvalues]


def test_eig_reduced_a2a_haar(ctx):
    dec = eig_dense(reduced_transfer(40, ModelParams(2, 1, 0, 0, ctx)).T_red, 3)
    assert float(dec.eigenvalues[0]) == pytest.approx(1, abs=1e-60)
    assert float(dec.eigenvalues[1]) == pytest.approx(1, abs=1e-60)
    assert 0.4 < float(dec.eigenvalues[2]) < 0.45


def test_svd_truncate_threshold_logic(ctx):
    with ctx.activate():
        u, s, v, tail = svd_truncate(ctx.array([[1, 0], [0, 0]]), 0)
        assert len(s) == 1 and tail == 0
        u, s, v, tail = svd_truncate(ctx.array([[3, 0], [0, 4]]), ctx.scalar("8.99"))
        assert len(s) == 2 and tail == 0
        u, s, v, tail = svd_truncate(ctx.array([[3, 0], [0, 4]]), 9)
        assert len(s) == 1 and s[0] == 4 and tail == 9
    with pytest.raises(ValueError):
        svd_truncate(ctx.eye(2), -1)


def test_svd_random_reconstruction_and_orthogonality(ctx):
    rng = np.random.default_rng(11)
    with ctx.activate():
        m = ctx.array(rng.standard_normal((8, 8)))
        u, s, v, tail = svd_truncate(m, ctx.scalar("1e-50"))
        rec = (u * s) @ v.T
        assert float(norm_inf(rec - m)) <= 1e-24
        tol = 2.0**-128
        assert float(norm_inf(u.T @ u - ctx.eye(len(s)))) <= tol
        assert float(norm_inf(v.T @ v - ctx.eye(len(s)))) <= tol
        assert all(a >= b for a, b in zip(s, s[1:])) and s[-1] >= 0


def test_svd_rank_deficient(ctx):
    with ctx.activate():
        col = ctx.array([[1], [2], [3]])
        m = col @ ctx.array([[1, 1, 0]])
        u, s, v = svd(m)
        assert s[1] < 1e-70 and s[2] < 1e-70
        assert float(norm_inf(u.T @ u - ctx.eye(3))) < 1e-70


def test_linear_fit_examples(ctx):
    with ctx.activate():
        slope, icpt = linear_fit(ctx.array([0, 1]), ctx.array([1, 2]))
        assert (slope, icpt) == (1, 1)
        slope, _ = linear_fit(ctx.array([0, 1, 2]), ctx.array([5, 5, 5]))
        assert slope == 0
    with pytest.raises(ValueError):
        linear_fit([1.0, 1.0], [0.0, 1.0])


def test_qr_and_solve(ctx):
    rng = np.random.default_rng(5)
    with ctx.activate():
        a = ctx.array(rng.standard_normal((5, 5)))
        q, r = qr(a)
        assert float(norm_inf(q @ r - a)) < 1e-70
        assert all(r[i, i] >= 0 for i in range(5))
        b = ctx.array(rng.standard_normal(5))
        x = solve(a, b)
        assert float(norm_inf(a @ x - b)) < 1e-70
        with pytest.raises(NumericError):
            solve(ctx.array([[1, 2], [2, 4]]), ctx.array([1, 1]))


def test_format_decimal_is_deterministic(ctx):
    x = ctx.scalar(Fraction(1, 3))
    assert format_decimal(x, 20) == format_decimal(ctx.scalar(Fraction(1, 3)), 20)
    assert format_decimal(x, 20) == "3.3333333333333333333e-01"


def test_fast_mode_uses_float64(fast):
    assert fast.array([1, 2]).dtype == np.float64
    dec = eig_dense(fast.array([[1, 0.5], [0, 0.5]]))
    assert dec.eigenvalues[0] == pytest.approx(1)


def test_eigen_error_type_is_numeric():
    assert issubclass(EigenConvergenceError, NumericError)
