"""All-to-all engine on Hamming-weight sectors.

With uniformly random perfect matchings in every layer, p(sigma) stays
permutation symmetric and only the sector weights p_S (S = number of SWAP
sites) matter. The layer transfer then reduces to an (N+1) x (N+1) matrix
T = N_red(gamma) M_red(alpha), which does not depend on beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import (
    DecayTrace,
    ModelError,
    ModelParams,
    SpectrumResult,
    check_noise_matrix,
    excess_covectors,
    make_observables,
    single_site_N,
    spectral_analysis,
)
from .precision import PrecisionContext, linear_fit


@dataclass
class ReducedTransfer:
    n: int
    q: int
    alpha: object
    gamma: object
    M_red: np.ndarray
    N_red: np.ndarray
    T_red: np.ndarray


@dataclass
class ReducedState:
    n: int
    q: int
    p: np.ndarray


def _check_n(n: int) -> None:
    if n < 2 or n % 2:
        raise ModelError(f"number of sites must be even and >= 2, got {n}")


def _multinomial(*ks: int) -> int:
    out, tot = 1, 0
    for k in ks:
        tot += k
        out *= math.comb(tot, k)
    return out


def reduced_gate_matrix(n: int, q: int, alpha, ctx: PrecisionContext) -> np.ndarray:
    """M_red[S', S] from the multinomial sum over gate types and their outcomes.

    Of the N/2 gates, n0 act on (0,0) pairs, n1 on mixed pairs and n2 on
    (1,1) pairs. A mixed pair ends as (0,0) with weight q^2 alpha/(q^2+1),
    stays mixed with weight 1 - alpha (both orientations together, which is
    why beta drops out) or becomes (1,1) with weight alpha/(q^2+1).
    """
    _check_n(n)
    half = n // 2
    with ctx.activate():
        a = ctx.coerce(alpha)
        q2 = q * q
        w_a = q2 * a / (q2 + 1)  # mixed -> 00
        w_b = 1 - a  # mixed -> mixed (hopping and staying combined)
        w_c = a / (q2 + 1)  # mixed -> 11
        pa = [w_a**k for k in range(half + 1)]
        pb = [w_b**k for k in range(half + 1)]
        pc = [w_c**k for k in range(half + 1)]
        m = ctx.zeros((n + 1, n + 1))
        for s in range(n + 1):
            col = [ctx.scalar(0)] * (n + 1)
            for n2 in range(s // 2 + 1):
                n1 = s - 2 * n2
                n0 = half - n1 - n2
                if n0 < 0:
                    continue
                # 2^{n1}: order within mixed pairs; multinomial: which gates are of each type
                pre = (2**n1) * _multinomial(n0, n1, n2)
                for ia in range(n1 + 1):
                    for ib in range(n1 - ia + 1):
                        ic = n1 - ia - ib
                        coef = pre * _multinomial(ia, ib, ic)
                        col[ib + 2 * ic + 2 * n2] += coef * (pa[ia] * pb[ib] * pc[ic])
            norm = math.comb(n, s)
            for sp in range(n + 1):
                m[sp, s] = col[sp] / norm
        return m


def reduced_noise_matrix(n: int, gamma, ctx: PrecisionContext) -> np.ndarray:
    """N_red[S', S] = C(S, S') (1-gamma)^S' gamma^(S-S')."""
    with ctx.activate():
        g = ctx.coerce(gamma)
        if g < 0 or g > 1:
            raise ModelError(f"gamma must lie in [0, 1], got {float(g):.6g}")
        keep = [(1 - g) ** k for k in range(n + 1)]
        lose = [g**k for k in range(n + 1)]
        out = ctx.zeros((n + 1, n + 1))
        for s in range(n + 1):
            for sp in range(s + 1):
                out[sp, s] = math.comb(s, sp) * keep[sp] * lose[s - sp]
        return out


def reduced_transfer(n: int, p: ModelParams, gamma=None) -> ReducedTransfer:
    """T_red = N_red M_red; ``gamma`` overrides ``p.gamma`` (e.g. gamma2 for collision runs)."""
    ctx = p.ctx
    g = p.gamma if gamma is None else gamma
    m = reduced_gate_matrix(n, p.q, p.alpha, ctx)
    nr = reduced_noise_matrix(n, g, ctx)
    with ctx.activate():
        t = nr @ m if g != 0 else m.copy()
    return ReducedTransfer(n, p.q, p.alpha, g, m, nr, t)


def reduced_initial_state(n: int, q: int, ctx: PrecisionContext) -> ReducedState:
    """Binomial sector weights of the product state (q/(q+1), 1/(q+1))^N."""
    _check_n(n)
    vals = [Fraction(math.comb(n, s) * q ** (n - s), (q + 1) ** n) for s in range(n + 1)]
    return ReducedState(n, q, ctx.array(vals))


def reduced_functional(n: int, pair: Sequence, ctx: PrecisionContext) -> np.ndarray:
    """Product covector (w0, w1)^N on sectors: w0^(N-S) w1^S."""
    with ctx.activate():
        w0, w1 = pair
        return np.array([w0 ** (n - s) * w1**s for s in range(n + 1)], dtype=object if not ctx.fast else float)


def reduced_observable_vectors(n: int, q: int, ctx: PrecisionContext):
    """(trace, P, S) sector covectors; F = sum p_S q^(2S-N), X = sum p_S q^(S-N)."""
    with ctx.activate():
        one = ctx.scalar(1)
        inv_q = one / q
        return (
            reduced_functional(n, (one, one), ctx),
            reduced_functional(n, (inv_q, one), ctx),
            reduced_functional(n, (inv_q, ctx.scalar(q)), ctx),
        )


def evolve(n: int, p: ModelParams, depth: int, z_noise: np.ndarray | None = None) -> DecayTrace:
    """Evolve the sector weights for ``depth`` layers and record all observables.

    A gamma=0 run gives the reference collision probability for chi_B; the Z
    column comes from a run with the two-copy noise matrix ``z_noise``
    (default: same gamma), which must have delta2 = 0.
    """
    ctx = p.ctx
    q = p.q
    if z_noise is None:
        z_noise = single_site_N(p.gamma, ctx)
    check_noise_matrix(z_noise)
    t = reduced_transfer(n, p).T_red
    t0 = reduced_transfer(n, p, ctx.scalar(0)).T_red
    tz = reduced_transfer(n, p, z_noise[0, 1]).T_red
    vt, vp, vs = reduced_observable_vectors(n, q, ctx)
    ex_chi, ex_f = excess_covectors(np.arange(n + 1), q, ctx)
    s = s0 = sz = reduced_initial_state(n, q, ctx).p
    obs = []
    with ctx.activate():
        for d in range(depth + 1):
            if d:
                s, s0, sz = t @ s, t0 @ s0, tz @ sz
            obs.append(
                make_observables(
                    q, n, vt @ s, vs @ s, vp @ s, vp @ sz, vp @ s0, ctx, chi=ex_chi @ s, f=ex_f @ s, chi_ref=ex_chi @ s0
                )
            )
    return DecayTrace.from_observables(obs, ctx)


def reduced_spectrum(tr: ReducedTransfer, k: int) -> SpectrumResult:
    """Leading eigenpairs of T_red with couplings to F and chi and sector labels."""
    n, q = tr.n, tr.q
    if not 0 < k <= n + 1:
        raise ModelError(f"k must be in [1, {n + 1}]")
    ctx = PrecisionContext.of(tr.T_red)
    vt, vp, vs = reduced_observable_vectors(n, q, ctx)
    with ctx.activate():
        chi = ctx.scalar(q) ** n * vp - vt
    rho0 = reduced_initial_state(n, q, ctx).p
    return spectral_analysis(tr.T_red, k, rho0, vs, chi, np.arange(n + 1), n)


def gap_eigenvalue(n: int, q: int, alpha, ctx: PrecisionContext):
    """Lambda_g(N) at gamma = 0: the third eigenvalue after the two vacua.

    At gamma = 0 the sectors S = 0 and S = N are absorbing, so the columns 0
    and N of T are unit vectors and the remaining spectrum is that of the
    interior block; the full k=3 decomposition is used nevertheless so the
    vacua are checked too.
    """
    p = ModelParams(q, ctx.coerce(alpha), ctx.scalar(0), ctx.scalar(0), ctx)
    spec = reduced_spectrum(reduced_transfer(n, p), 3)
    one = ctx.scalar(1)
    tol = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits // 2)))
    with ctx.activate():
        if abs(spec.eigenvalues[0] - one) > tol or abs(spec.eigenvalues[1] - one) > tol:
            raise ModelError("gamma=0 transfer matrix lacks the two unit eigenvalues")
    return spec.eigenvalues[2]


def predicted_gap(alpha, q: int, ctx: PrecisionContext):
    """Lambda_g(infinity) = (1 - alpha) + 2 alpha/(q^2 + 1)."""
    with ctx.activate():
        a = ctx.coerce(alpha)
        return (1 - a) + 2 * a / (q * q + 1)


@dataclass
class GapFit:
    alpha: object
    n_list: list[int]
    gaps: list
    slope: object
    intercept: object
    max_residual: object


def gap_extrapolation(alpha, q: int, n_list: Sequence[int], ctx: PrecisionContext) -> GapFit:
    """Fit Lambda_g(N) linearly in 1/N and return the N -> infinity intercept."""
    if len(set(n_list)) < 3:
        raise ModelError("gap extrapolation needs at least three distinct N")
    gaps = [gap_eigenvalue(n, q, alpha, ctx) for n in n_list]
    with ctx.activate():
        xs = [ctx.scalar(Fraction(1, n)) for n in n_list]
        slope, intercept = linear_fit(ctx.array(xs), ctx.array(gaps))
        resid = max(abs(g - (intercept + slope * x)) for g, x in zip(gaps, xs))
    return GapFit(alpha, list(n_list), gaps, slope, intercept, resid)


def critical_point(alpha, q: int, ctx: PrecisionContext, mode: str = "analytic", n_list: Sequence[int] = (20, 40, 60, 80, 100)):
    """(eps N)_c = -ln Lambda_g, analytic or from the extrapolated spectrum."""
    if mode == "analytic":
        lam = predicted_gap(alpha, q, ctx)
    elif mode == "numeric":
        lam = gap_extrapolation(alpha, q, n_list, ctx).intercept
    else:
        raise ModelError(f"unknown mode {mode!r}")
    if lam <= 0:
        raise ModelError("Lambda_g <= 0: critical point undefined")
    return -ctx.log(lam)


# ---------------------------------------------------------------------------
# kink (eigenvalue crossing) location
# ---------------------------------------------------------------------------


@dataclass
class Branches:
    eps_n: object
    lambda_g: object  # leading low-weight eigenvalue below 1
    lambda_v: object  # leading extensive-weight eigenvalue below 1
    lambda_1: object  # subleading eigenvalue


def spectral_branches(n: int, q: int, alpha, eps_n, ctx: PrecisionContext, k: int = 7) -> Branches:
    from .noise import gamma_from_epsilon

    with ctx.activate():
        eps = ctx.coerce(eps_n) / n
        gamma = gamma_from_epsilon(eps, q, ctx)
        p = ModelParams(q, ctx.coerce(alpha), ctx.scalar(0), gamma, ctx)
        spec = reduced_spectrum(reduced_transfer(n, p), min(k, n + 1))
        one = ctx.scalar(1)
        tol = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits // 2)))
        lam_g = lam_v = None
        sub = []
        for lam, lab, cplx in zip(spec.eigenvalues, spec.labels, spec.is_complex):
            if cplx or abs(lam - one) <= tol:
                continue
            sub.append(lam)
            if lab == "low" and lam_g is None:
                lam_g = lam
            if lab == "extensive" and lam_v is None:
                lam_v = lam
        return Branches(eps_n, lam_g, lam_v, sub[0] if sub else None)


def kink_locator(n: int, q: int, alpha, eps_grid: Sequence, ctx: PrecisionContext, bisect_steps: int = 30):
    """eps N at which the extensive branch Lambda_v crosses the low-weight branch Lambda_g.

    The grid brackets the sign change of Lambda_v - Lambda_g; bisection then
    refines the crossing.
    """

    def diff(x):
        b = spectral_branches(n, q, alpha, x, ctx)
        if b.lambda_g is None or b.lambda_v is None:
            raise ModelError(f"could not identify both spectral branches at eps N = {float(x):.4g}")
        return b.lambda_v - b.lambda_g

    with ctx.activate():
        grid = [ctx.coerce(x) for x in eps_grid]
        vals = [diff(x) for x in grid]
        for (x0, v0), (x1, v1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
            if v0 > 0 >= v1:
                lo, hi = x0, x1
                for _ in range(bisect_steps):
                    mid = (lo + hi) / 2
                    if diff(mid) > 0:
                        lo = mid
                    else:
                        hi = mid
                return (lo + hi) / 2
    raise ModelError("no eigenvalue crossing inside the eps N grid")
