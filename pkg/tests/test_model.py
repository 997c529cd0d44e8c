from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from oracles import depolarizing_kraus, perfect_matchings, run_circuit
from xebstat.gates import CanonicalGate, fsim_unitary, invariants_from_canonical, parse_gate, stat_params_from_invariants
from xebstat.model import (
    DENSE_ORACLE_LIMIT,
    DenseState,
    ModelError,
    ModelParams,
    contract_dense,
    dense_a2a_transfer,
    dense_basis_state,
    dense_evolve,
    dense_initial_state,
    dense_layer,
    dense_layer_matrix,
    dense_spectrum_and_couplings,
    brickwork_pairing,
    initial_site_weights,
    make_observables,
    noise_only_S_decay,
    observable_pair,
    product_vector,
    single_site_N,
    two_site_M,
)
from xebstat.noise import OutOfScopeError
from xebstat.precision import PrecisionContext

FAST = PrecisionContext(53)


def params(ctx, a, b, g=0, q=2) -> ModelParams:
    return ModelParams(q, ctx.scalar(a), ctx.scalar(b), ctx.scalar(g), ctx)


def assert_matrix(ctx, m, want, tol=1e-70):
    with ctx.activate():
        for i, row in enumerate(want):
            for j, x in enumerate(row):
                assert abs(m[i, j] - ctx.scalar(x)) <= tol, (i, j)


# ----- update matrices ------------------------------------------------------


def test_two_site_M_examples(ctx):
    f = Fraction
    assert_matrix(ctx, two_site_M(params(ctx, 1, 0)), [[1, f(4, 5), f(4, 5), 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, f(1, 5), f(1, 5), 1]])
    assert_matrix(ctx, two_site_M(params(ctx, 0, 1)), [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
    assert_matrix(ctx, two_site_M(params(ctx, 0, 0)), np.eye(4).astype(int).tolist())


def test_single_site_N(ctx):
    assert_matrix(ctx, single_site_N(0, ctx), [[1, 0], [0, 1]])
    assert_matrix(ctx, single_site_N(1, ctx), [[1, 1], [0, 0]])
    assert_matrix(ctx, single_site_N(ctx.scalar("0.04"), ctx), [[1, Fraction(1, 25)], [0, Fraction(24, 25)]])
    with pytest.raises(ModelError):
        single_site_N(ctx.scalar("1.5"), ctx)


def random_region_params(rng, ctx, gamma=0):
    while True:
        a = rng.uniform(0, 10 / 9)
        b = rng.uniform(-a / 5, 1 - 4 * a / 5)
        if b + a / 5 <= (b + a / 2) ** 2:
            return params(ctx, a, b, gamma)


def test_column_stochastic_and_vacua(ctx):
    rng = np.random.default_rng(2)
    s_pair = observable_pair("fidelity_S", 2, ctx)
    with ctx.activate():
        s2 = np.kron(s_pair, s_pair)
        for _ in range(20):
            p = random_region_params(rng, ctx, rng.uniform(0, 1))
            g = np.kron(single_site_N(p.gamma, ctx), single_site_N(p.gamma, ctx)) @ two_site_M(p)
            assert max(abs(sum(g[:, j]) - 1) for j in range(4)) < 1e-70
            m = two_site_M(p.with_gamma(0))
            assert max(abs(x) for x in (s2 @ m - s2)) < 1e-70
            assert m[0, 0] == 1 and m[3, 3] == 1
            assert all(m[i, 0] == 0 for i in (1, 2, 3)) and all(m[i, 3] == 0 for i in (0, 1, 2))


# ----- initial state and contractions ---------------------------------------


def test_initial_state(ctx):
    w = initial_site_weights(2, ctx)
    assert tuple(w) == (ctx.scalar(Fraction(2, 3)), ctx.scalar(Fraction(1, 3)))
    s = dense_initial_state(4, 2, ctx)
    with ctx.activate():
        assert abs(contract_dense(s, observable_pair("fidelity_S", 2, ctx)) - 1) < 1e-70
        assert abs(contract_dense(s, observable_pair("trace", 2, ctx)) - 1) < 1e-70


def _obs(state, ctx, q=2):
    n = state.n_sites
    with ctx.activate():
        F = contract_dense(state, observable_pair("fidelity_S", q, ctx))
        X = contract_dense(state, observable_pair("xeb_P", q, ctx))
        t = contract_dense(state, observable_pair("trace", q, ctx))
    return make_observables(q, n, t, F, X, X, X, ctx)


def test_vacuum_contractions(ctx):
    n = 6
    vac = dense_basis_state(n, 2, [0] * n, ctx)
    o = _obs(vac, ctx)
    with ctx.activate():
        assert abs(o.F - ctx.scalar(Fraction(1, 2**n))) < 1e-70 and o.chi == 0
        s_vac = dense_basis_state(n, 2, [1] * n, ctx)
        h = DenseState(n, 2, (2**n * vac.weights + s_vac.weights) / (2**n + 1))
        assert abs(_obs(h, ctx).F - 1) < 1e-70


def test_two_site_initial_chi(ctx):
    o = _obs(dense_initial_state(2, 2, ctx), ctx)
    with ctx.activate():
        assert abs(o.F - 1) < 1e-70 and abs(o.chi - ctx.scalar(Fraction(7, 9))) < 1e-70


def test_dense_layer_examples(ctx):
    s = dense_initial_state(2, 2, ctx)
    assert all(dense_layer(s, [(0, 1)], params(ctx, 0, 0)).weights == s.weights)
    out = dense_layer(s, [(0, 1)], params(ctx, 1, 0)).weights
    with ctx.activate():
        want = [Fraction(4, 5), 0, 0, Fraction(1, 5)]
        assert max(abs(a - ctx.scalar(b)) for a, b in zip(out, want)) < 1e-70
    with pytest.raises(ModelError):
        dense_layer(dense_initial_state(4, 2, ctx), [(0, 1), (1, 2)], params(ctx, 1, 0))


def test_trace_preserved_random(ctx):
    rng = np.random.default_rng(4)
    s = dense_initial_state(6, 2, ctx)
    one = observable_pair("trace", 2, ctx)
    for d in range(6):
        s = dense_layer(s, brickwork_pairing(6, d), random_region_params(rng, ctx, rng.uniform(0, 1)))
        with ctx.activate():
            assert abs(contract_dense(s, one) - 1) < 1e-70


def test_layer_matrix_matches_layer(ctx):
    p = params(ctx, "0.7", "0.1", "0.05")
    s = dense_initial_state(4, 2, ctx)
    for parity in (0, 1):
        m = dense_layer_matrix(4, brickwork_pairing(4, parity), p)
        a = dense_layer(s, brickwork_pairing(4, parity), p).weights
        with ctx.activate():
            assert max(abs(x - y) for x, y in zip(m @ s.weights, a)) < 1e-70


def test_oracle_limit(ctx):
    with pytest.raises(ModelError):
        dense_initial_state(DENSE_ORACLE_LIMIT + 2, 2, ctx)
    with pytest.raises(ModelError):
        dense_initial_state(3, 2, ctx)


def test_non_unital_two_copy_rejected(ctx):
    bad = ctx.array([[Fraction(99, 100), Fraction(1, 10)], [Fraction(1, 100), Fraction(9, 10)]])
    with pytest.raises(OutOfScopeError):
        dense_evolve(2, params(ctx, 1, 0, "0.1"), 2, [brickwork_pairing(2, 0)], z_noise=bad)


# ----- first-principles oracle ---------------------------------------------


def _oracle_gate(spec):
    if spec == "haar":
        return None
    if spec == "cnot":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if spec == "iswap":
        return np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)
    th, ph = 1.2, 0.4
    c, s = np.cos(th), np.sin(th)
    return np.array([[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, np.exp(-1j * ph)]])


MODEL_SPEC = {"haar": "haar", "cnot": "cnot", "iswap": "iswap", "fsim": "fsim:1.2:0.4"}


def _compare(n, spec, pnoise, oracle_layers, model_kwargs, a2a):
    depth = len(oracle_layers)
    gate = _oracle_gate(spec)
    kraus = depolarizing_kraus(pnoise)
    one = run_circuit(n, oracle_layers, gate, kraus, (0,), a2a)
    two = run_circuit(n, oracle_layers, gate, kraus, (0, 1), a2a)
    info = parse_gate(MODEL_SPEC[spec], FAST)
    p = ModelParams.build(info.params, pnoise, FAST)
    g2 = 2 * pnoise - pnoise**2
    z_noise = FAST.array([[1, g2], [0, 1 - g2]])
    if a2a:
        tr = dense_evolve(n, p, depth, z_noise=z_noise, layer_matrix=dense_a2a_transfer(n, p))
    else:
        tr = dense_evolve(n, p, depth, z_noise=z_noise, **model_kwargs)
    for d in range(depth + 1):
        assert tr.F[d] == pytest.approx(one[d][0], abs=1e-12)
        assert tr.X[d] == pytest.approx(one[d][1], abs=1e-12)
        assert tr.Z[d] == pytest.approx(two[d][1], abs=1e-12)


@pytest.mark.parametrize("spec", ["haar", "cnot", "iswap", "fsim"])
@pytest.mark.parametrize("n", [2, 4])
def test_brickwork_matches_two_copy_oracle(spec, n):
    layers = [[(i, i + 1) for i in range(d % 2, n - 1, 2)] for d in range(4)]
    _compare(n, spec, 0.07, layers, {"pairings": [brickwork_pairing(n, 0), brickwork_pairing(n, 1)]}, False)


@pytest.mark.parametrize("spec", ["haar", "iswap"])
def test_all_to_all_matches_two_copy_oracle(spec):
    n = 4
    _compare(n, spec, 0.05, [perfect_matchings(n)] * 3, {}, True)


def test_model_without_noise_keeps_fidelity():
    tr = dense_evolve(4, params(FAST, 1, 0), 6, [brickwork_pairing(4, 0), brickwork_pairing(4, 1)])
    assert all(f == pytest.approx(1, abs=1e-14) for f in tr.F)
    assert all(x == pytest.approx(1, abs=1e-14) for x in tr.chi_B)


# ----- spectra ---------------------------------------------------------------


def test_noiseless_spectrum_two_vacua(ctx):
    n = 4
    t = dense_a2a_transfer(n, params(ctx, 1, 0))
    sp = dense_spectrum_and_couplings(t, n, 2, 3)
    with ctx.activate():
        assert abs(sp.eigenvalues[0] - 1) < 1e-60 and abs(sp.eigenvalues[1] - 1) < 1e-60
        assert sp.eigenvalues[2] < 1 - 1e-3
        vac = {0, 2**n - 1}
        for v in sp.right_vectors[:2]:
            # the two unit eigenvectors live on span{|I>, |S>}
            assert max(abs(v[i]) for i in range(2**n) if i not in vac) < 1e-60


def test_noisy_spectrum_unique_fixed_point(ctx):
    n = 4
    t = dense_a2a_transfer(n, params(ctx, 1, 0, "0.05"))
    sp = dense_spectrum_and_couplings(t, n, 2, 2)
    with ctx.activate():
        assert abs(sp.eigenvalues[0] - 1) < 1e-60 and sp.eigenvalues[1] < 1 - 1e-3
        w = sp.left_vectors[0]
        assert max(abs(x / w[0] - 1) for x in w) < 1e-60


def test_low_weight_fidelity_coupling_decreases_with_n():
    # at gamma = 0 <S| is a left fixed vector, so every non-vacuum c^F vanishes;
    # the low-weight coupling appears with noise and shrinks with N
    vals = []
    for n in (4, 6, 8):
        t = dense_a2a_transfer(n, params(FAST, 1, 0, 2.0 / n / 0.75))
        sp = dense_spectrum_and_couplings(t, n, 2, 4)
        idx = next(i for i, lab in enumerate(sp.labels) if lab == "low" and i > 0)
        vals.append(abs(sp.c_F[idx]))
    assert vals[0] > vals[1] > vals[2] > 0
    t = dense_a2a_transfer(4, params(FAST, 1, 0))
    sp = dense_spectrum_and_couplings(t, 4, 2, 4)
    assert all(abs(c) < 1e-12 for c in sp.c_F[2:])


def test_coupling_reconstruction_of_observables(ctx):
    n = 4
    p = params(ctx, "0.9", "0.05", "0.03")
    with ctx.activate():
        t = dense_layer_matrix(n, brickwork_pairing(n, 1), p) @ dense_layer_matrix(n, brickwork_pairing(n, 0), p)
    sp = dense_spectrum_and_couplings(t, n, 2, 2**n)
    tr = dense_evolve(n, p, 20, [brickwork_pairing(n, 0), brickwork_pairing(n, 1)])
    tol = 2.0 ** (-256 / 4)
    with ctx.activate():
        for d in range(0, 11):
            f_rec = sum(c * lam**d for c, lam, cx in zip(sp.c_F, sp.eigenvalues, sp.is_complex) if not cx)
            chi_rec = sum(c * lam**d for c, lam, cx in zip(sp.c_chi, sp.eigenvalues, sp.is_complex) if not cx)
            assert abs(f_rec - tr.F[2 * d]) <= tol
            assert abs(chi_rec - tr.chi[2 * d]) <= tol


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_noise_only_S_decay(ctx, n):
    with ctx.activate():
        g = ctx.scalar("0.13")
        eps = g * (1 - ctx.scalar(Fraction(1, 4)))
        assert abs(noise_only_S_decay(n, 2, g, ctx) - (1 - eps) ** n) < 1e-70


def test_product_vector_order(ctx):
    v = product_vector([ctx.array([1, 2]), ctx.array([3, 5])])
    assert list(v) == [3, 5, 6, 10]
