from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xebstat.gates import (
    CanonicalGate,
    GateInvariants,
    GateSpecError,
    GateStatParams,
    entangling_power,
    fsim_params,
    fsim_unitary,
    gao_basis,
    haar_lookalike_gate,
    haar_params,
    invariants_from_canonical,
    invariants_from_unitary,
    parse_gate,
    pe_canonical,
    pe_params,
    region_check,
    stat_params_from_invariants,
    swap_compose,
)

TOL = 1e-60


def close(a, b, tol=TOL):
    return abs(float(a - b) if not isinstance(b, float) else float(a) - b) <= tol


def frac(ctx, n, d=1):
    return ctx.scalar(Fraction(n, d))


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)


def random_su2(rng) -> np.ndarray:
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


@pytest.mark.parametrize(
    "angles, g1, g2",
    [((1, 0, 0), 0, 1), ((1, 1, 1), 1, -3), ((0, 0, 0), 1, 3)],
    ids=["cnot", "swap", "identity"],
)
def test_invariants_from_canonical_table(ctx, angles, g1, g2):
    with ctx.activate():
        g = CanonicalGate(*(a * ctx.pi / 2 for a in angles))
        inv = invariants_from_canonical(g, ctx)
        assert close(inv.abs_g1, frac(ctx, g1)) and close(inv.g2, frac(ctx, g2))


def test_invariants_from_unitary_named(ctx):
    inv = invariants_from_unitary(CNOT, ctx)
    assert close(inv.abs_g1, frac(ctx, 0), 1e-30) and close(inv.g2, frac(ctx, 1), 1e-30)
    inv = invariants_from_unitary(ISWAP, ctx)
    assert close(inv.abs_g1, frac(ctx, 0), 1e-30) and close(inv.g2, frac(ctx, -1), 1e-30)


def test_invariants_local_dressing_cnot(fast):
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b, c, d = (random_su2(rng) for _ in range(4))
        u = np.kron(a, b) @ CNOT @ np.kron(c, d)
        inv = invariants_from_unitary(u, fast)
        assert inv.abs_g1 == pytest.approx(0, abs=1e-12)
        assert inv.g2 == pytest.approx(1, abs=1e-12)


def test_unitary_matches_canonical_high_precision(ctx):
    with ctx.activate():
        g = CanonicalGate(ctx.scalar("0.3"), ctx.scalar("-1.1"), ctx.scalar("0.7"))
        a = invariants_from_canonical(g, ctx)
        b = invariants_from_unitary(g.unitary(ctx), ctx)
        assert close(a.abs_g1, b.abs_g1, 2.0**-128) and close(a.g2, b.g2, 2.0**-128)


def test_non_unitary_rejected(fast):
    with pytest.raises(GateSpecError):
        invariants_from_unitary(2 * np.eye(4), fast)
    with pytest.raises(GateSpecError):
        invariants_from_unitary(np.eye(3), fast)


def test_stat_params_from_invariants(ctx):
    p = haar_params(2, ctx)
    assert (p.alpha, p.beta) == (1, 0)
    cnot = stat_params_from_invariants(GateInvariants(frac(ctx, 0), frac(ctx, 1)), ctx)
    assert close(cnot.alpha, frac(ctx, 10, 9)) and close(cnot.beta, frac(ctx, -2, 9))
    isw = stat_params_from_invariants(GateInvariants(frac(ctx, 0), frac(ctx, -1)), ctx)
    assert close(isw.alpha, frac(ctx, 10, 9)) and close(isw.beta, frac(ctx, 1, 9))


@pytest.mark.parametrize("phi", ["0", "0.4", "1.3", "2.9"])
def test_fsim_special_lines(ctx, phi):
    with ctx.activate():
        ph = ctx.scalar(phi)
        c = ctx.cos(ph)
        up = fsim_params(ctx.pi / 2, ph, ctx)
        assert close(up.alpha, 5 * (1 + c) / 9) and close(up.beta, (5 - 4 * c) / 9)
        lo = fsim_params(0, ph, ctx)
        assert close(lo.alpha, 5 * (1 - c) / 9) and close(lo.beta, -(1 - c) / 9)


def test_fsim_pi6_value(ctx):
    with ctx.activate():
        p = fsim_params(ctx.pi / 2, ctx.pi / 6, ctx)
        s3 = ctx.sqrt(3)
        assert close(p.alpha, 5 * (1 + s3 / 2) / 9) and close(p.beta, (5 - 2 * s3) / 9)
    # rounded reference values: alpha 1.03668, beta 0.17066
    assert float(p.alpha) == pytest.approx(1.036681, abs=1e-6)
    assert float(p.beta) == pytest.approx(0.170655, abs=1e-6)


def test_fsim_params_match_unitary_invariants(ctx):
    with ctx.activate():
        th, ph = ctx.scalar("1.2"), ctx.scalar("0.4")
        a = fsim_params(th, ph, ctx)
        b = stat_params_from_invariants(invariants_from_unitary(fsim_unitary(th, ph, ctx), ctx), ctx)
        assert close(a.alpha, b.alpha, 1e-30) and close(a.beta, b.beta, 1e-30)


def test_pe_params(ctx):
    with ctx.activate():
        p0 = pe_params(0, ctx)
        assert close(p0.alpha, frac(ctx, 10, 9)) and close(p0.beta, frac(ctx, 1, 9))
        p4 = pe_params(ctx.pi / 4, ctx)
        assert close(p4.beta, frac(ctx, -2, 9))
        for phi in ("0.1", "0.7", "2.0"):
            g = pe_canonical(ctx.scalar(phi), ctx)
            assert close(invariants_from_canonical(g, ctx).abs_g1, frac(ctx, 0))
            via = stat_params_from_invariants(invariants_from_canonical(g, ctx), ctx)
            assert close(via.beta, pe_params(ctx.scalar(phi), ctx).beta)


def test_swap_compose(ctx):
    h = swap_compose(haar_params(2, ctx))
    assert (h.alpha, h.beta) == (1, 0)
    ident = swap_compose(GateStatParams(frac(ctx, 0), frac(ctx, 0)))
    assert (ident.alpha, ident.beta) == (0, 1)
    with ctx.activate():
        ph = ctx.scalar("0.9")
        lo = fsim_params(0, ph, ctx)
        up = fsim_params(ctx.pi / 2, ph, ctx)
        sw = swap_compose(lo)
        assert close(sw.beta, (5 + 4 * ctx.cos(ph)) / 9)
        # the swapped lower line lands on the upper line at phi' = pi - phi
        up2 = fsim_params(ctx.pi / 2, ctx.pi - ph, ctx)
        assert close(sw.alpha, up2.alpha) and close(sw.beta, up2.beta)
        assert up.alpha != sw.alpha or up.beta != sw.beta or ph == ctx.pi / 2


def test_region_examples(ctx):
    r = region_check(GateStatParams(frac(ctx, 10, 9), frac(ctx, 1, 9)))
    assert r.status == "on_boundary" and "upper" in r.active
    with ctx.activate():
        c = ctx.cos(ctx.scalar("0.8"))
        r = region_check(GateStatParams(5 * (1 - c) / 9, -(1 - c) / 9))
    assert r.status == "on_boundary" and "lower" in r.active
    r = region_check(GateStatParams(frac(ctx, 1), ctx.scalar("0.5")))
    assert r.status == "outside" and "upper" in r.active
    assert region_check(haar_params(2, ctx)).status == "interior"


def test_gao_basis(ctx):
    g = gao_basis(haar_params(2, ctx))
    assert close(g.R, frac(ctx, 3, 5)) and close(g.D, frac(ctx, 4, 5)) and g.eta == 3
    g = gao_basis(GateStatParams(frac(ctx, 0), frac(ctx, 1)))
    assert g.R == 0 and g.D == 1
    g = gao_basis(GateStatParams(frac(ctx, 10, 9), frac(ctx, -2, 9)))
    assert close(g.R, frac(ctx, 2, 3)) and close(g.D, frac(ctx, 2, 3))


def test_haar_lookalike(ctx):
    g = haar_lookalike_gate(ctx)
    inv = invariants_from_canonical(g, ctx)
    p = stat_params_from_invariants(inv, ctx)
    assert close(p.alpha, frac(ctx, 1), 1e-12) and close(p.beta, frac(ctx, 0), 1e-12)
    assert close(inv.abs_g1, frac(ctx, 1, 10), 1e-12)
    assert region_check(p).status == "interior"
    with ctx.activate():
        c2 = -ctx.atan(ctx.sqrt(frac(ctx, 2, 3))) / 2
        assert close(g.c1, ctx.pi / 4) and close(g.c2, c2) and close(g.c3, ctx.pi / 2 + c2)


angle = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle)
def test_random_canonical_gates_in_region(c1, c2, c3):
    inv = invariants_from_canonical(CanonicalGate(c1, c2, c3), _fast())
    assert inv.g2**2 - 3 * (4 * inv.abs_g1 - 1) >= -1e-12
    p = stat_params_from_invariants(inv, _fast())
    assert region_check(p).status != "outside"
    assert entangling_power(p) == pytest.approx(2 * (1 - inv.abs_g1) / 9, abs=1e-15)
    back = swap_compose(swap_compose(p))
    assert (back.alpha, back.beta) == pytest.approx((p.alpha, p.beta), abs=1e-15)


def _fast():
    from xebstat.precision import PrecisionContext

    return PrecisionContext(53)


@pytest.mark.parametrize(
    "spec, alpha, beta",
    [
        ("cnot", Fraction(10, 9), Fraction(-2, 9)),
        ("swap", 0, 1),
        ("iswap", Fraction(10, 9), Fraction(1, 9)),
        ("cz", Fraction(10, 9), Fraction(-2, 9)),
        ("identity", 0, 0),
        ("haar", 1, 0),
        ("pe:0", Fraction(10, 9), Fraction(1, 9)),
        ("fsim:pi/2:0", Fraction(10, 9), Fraction(1, 9)),
        ("canonical:pi/2:0:0", Fraction(10, 9), Fraction(-2, 9)),
    ],
)
def test_parse_gate_registry(ctx, spec, alpha, beta):
    info = parse_gate(spec, ctx)
    assert close(info.params.alpha, ctx.scalar(alpha)) and close(info.params.beta, ctx.scalar(beta))


def test_parse_gate_file(tmp_path, ctx):
    path = tmp_path / "iswap.txt"
    path.write_text("".join(f"{float(z.real)!r} {float(z.imag)!r}\n" for z in ISWAP.reshape(-1)))
    info = parse_gate(f"file:{path}", ctx)
    assert close(info.params.alpha, frac(ctx, 10, 9), 1e-30) and close(info.params.beta, frac(ctx, 1, 9), 1e-30)
    (tmp_path / "bad.txt").write_text("1 0\n")
    with pytest.raises(GateSpecError):
        parse_gate(f"file:{tmp_path / 'bad.txt'}", ctx)


@pytest.mark.parametrize("spec", ["nope", "fsim:1", "pe", "canonical:1:2", "fsim:x:1"])
def test_parse_gate_errors(ctx, spec):
    with pytest.raises(GateSpecError):
        parse_gate(spec, ctx)


def test_parse_gate_q_restriction(ctx):
    assert parse_gate("haar", ctx, q=3).params.alpha == 1
    with pytest.raises(GateSpecError):
        parse_gate("cnot", ctx, q=3)
