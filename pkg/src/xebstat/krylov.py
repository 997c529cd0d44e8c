"""Arnoldi iteration with MPS basis vectors for the 1D brickwork transfer matrix.

The transfer operator is one period (even layer followed by odd layer, each
with its noise sublayer). The two noiseless vacua |I> and |S> are exact fixed
points at gamma = 0 and are locked as the first two basis vectors, so the
remaining Ritz values approximate the spectrum on the complementary quotient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gates import GateSpecError
from .model import ModelError, ModelParams, brickwork_pairing, dense_layer_matrix
from .mps import (
    DEFAULT_BOND_CAP,
    X_GAUGE,
    MpsState,
    add,
    compress,
    inner,
    layer_gate,
    product_mps,
    scale,
    tebd_layer,
)
from .precision import EigenConvergenceError, NumericError, PrecisionContext, eig_dense, norm_inf, solve


# Krylov vectors need a looser budget than TEBD: bonds grow with every MPS sum
KRYLOV_TRUNC = {True: 1e-16, False: 1e-30}


@dataclass(frozen=True)
class KrylovConfig:
    """Arnoldi settings. ``subspace_dim`` counts the two locked vacua."""

    subspace_dim: int = 24
    start_delta: float = 1e-3
    max_restarts: int = 0
    residual_tol: float = 1e-8
    n_eigs: int = 3
    trunc: float | None = None
    max_bond: int = DEFAULT_BOND_CAP
    orth_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.subspace_dim < self.n_eigs + 2:
            raise ModelError("subspace_dim must be >= n_eigs + 2")
        if self.start_delta <= 0:
            raise ModelError("start_delta must be positive")


@dataclass
class KrylovResult:
    """Ritz values of the period map, with per-layer square roots (modulus convention)."""

    per_period: list  # (re, im) pairs, descending modulus, vacua first
    per_layer: list
    residuals: list
    steps: int
    converged: bool
    max_bond: int
    discarded: object
    history: list = field(default_factory=list)

    @property
    def gap_per_period(self):
        if len(self.per_period) <= 2:
            return None
        re, im = self.per_period[2]
        return (re * re + im * im) ** 0.5 if im != 0 else abs(re)

    @property
    def gap_per_layer(self):
        return self.per_layer[2] if len(self.per_layer) > 2 else None


def _period(st: MpsState, gates: tuple) -> MpsState:
    p, g_even, g_odd = gates
    return tebd_layer(tebd_layer(st, 0, p, gate=g_even), 1, p, gate=g_odd)


def _norm(st: MpsState, ctx: PrecisionContext):
    with ctx.activate():
        val = inner(st, st)
        return ctx.sqrt(val) if val > 0 else ctx.scalar(0)


def _subtract(w: MpsState, basis: list[MpsState], coeffs: list, ctx: PrecisionContext) -> MpsState:
    for v, h in zip(basis, coeffs):
        if h != 0:
            w = compress(add(w, v, 1, -h))
    return w


def _ritz(h: np.ndarray, ctx: PrecisionContext) -> list[tuple]:
    dec = eig_dense(h, check=False)
    with ctx.activate():
        return [(ctx.coerce(re), ctx.coerce(im)) for re, im in zip(dec.eigenvalues, dec.imag)]


def _modulus(z, ctx: PrecisionContext):
    with ctx.activate():
        return ctx.sqrt(z[0] * z[0] + z[1] * z[1])


def _complex_ritz_tail(block: np.ndarray, lam: tuple, ctx: PrecisionContext):
    """|y_last| of the unit Ritz vector for a complex Ritz value ``a + ib``.

    Uses inverse iteration on the real embedding [[H - a, b], [-b, H - a]],
    whose null space holds (Re y, Im y).
    """
    m = block.shape[0]
    a, b = lam
    with ctx.activate():
        # shift off the exact eigenvalue so the embedded system stays solvable
        off = (norm_inf(block) + abs(b)) * ctx.eps * 64
        emb = ctx.zeros((2 * m, 2 * m))
        eye = ctx.eye(m)
        emb[:m, :m] = block - (a + off) * eye
        emb[m:, m:] = block - (a + off) * eye
        emb[:m, m:] = b * eye
        emb[m:, :m] = -b * eye
        x = ctx.ones(2 * m)
        for _ in range(3):
            x = solve(emb, x)
            x = x / ctx.sqrt(x @ x)
        return ctx.sqrt(x[m - 1] * x[m - 1] + x[2 * m - 1] * x[2 * m - 1])


def krylov_leading_eigs(n: int, p: ModelParams, cfg: KrylovConfig = KrylovConfig()) -> KrylovResult:
    """Leading eigenvalues of the brickwork period map by Arnoldi with locked vacua.

    Orthogonalization is classical Gram-Schmidt applied twice (CGS2); each
    MPS linear combination is recompressed at the truncation budget. The
    iteration stops when the leading non-vacuum Ritz value has a residual
    estimate ``|h_{j+1,j} y_j|`` below ``residual_tol`` or the subspace is full.
    """
    if p.gamma != 0:
        # vacuum locking needs exact fixed points
        raise ModelError("krylov_leading_eigs locks the gamma=0 vacua; pass gamma=0")
    ctx = p.ctx
    q = p.q
    if cfg.trunc is None:
        cfg = replace(cfg, trunc=KRYLOV_TRUNC[ctx.fast])
    gates = (p, layer_gate(p, gauge=X_GAUGE), layer_gate(p, gauge=X_GAUGE))
    with ctx.activate():
        one, zero = ctx.scalar(1), ctx.scalar(0)
        vac_i = product_mps([ctx.array([1, 0])] * n, q, ctx, cfg.trunc, cfg.max_bond, X_GAUGE)
        vac_s = product_mps([ctx.array([0, 1])] * n, q, ctx, cfg.trunc, cfg.max_bond, X_GAUGE)
        vac_s = scale(vac_s, one / _norm(vac_s, ctx))
        start = product_mps([ctx.array([1, ctx.coerce(cfg.start_delta)])] * n, q, ctx, cfg.trunc, cfg.max_bond, X_GAUGE)
        basis = [vac_i, vac_s]
        c = [inner(v, start) for v in basis]
        start = _subtract(start, basis, c, ctx)
        nrm = _norm(start, ctx)
        basis.append(scale(start, one / nrm))

        k = cfg.subspace_dim
        h = ctx.zeros((k + 1, k))
        h[0, 0] = one
        h[1, 1] = one
        history: list = []
        residuals: list = []
        converged = False
        steps = 0
        ritz: list = []
        max_bond = 1
        discarded = zero
        for j in range(2, k):
            w = _period(basis[j], gates)
            c1 = [inner(v, w) for v in basis]
            w = _subtract(w, basis, c1, ctx)
            c2 = [inner(v, w) for v in basis]
            w = _subtract(w, basis, c2, ctx)
            for i in range(len(basis)):
                h[i, j] = c1[i] + c2[i]
            beta = _norm(w, ctx)
            h[j + 1, j] = beta
            max_bond = max(max_bond, w.max_bond_dim)
            discarded = max(discarded, w.discarded)
            steps = j - 1
            # Ritz values on the quotient block (rows/cols 2..j)
            block = h[2 : j + 1, 2 : j + 1]
            dec = eig_dense(block, check=False)
            vals = [(ctx.coerce(re), ctx.coerce(im)) for re, im in zip(dec.eigenvalues, dec.imag)]
            lead = vals[0]
            history.append(lead)
            # residual estimate of the leading Ritz pair
            if dec.right_vectors and dec.right_vectors[0] is not None:
                y = dec.right_vectors[0]
                res = abs(beta * y[-1])
            else:
                res = abs(beta) * _complex_ritz_tail(block, lead, ctx)
            residuals.append(res)
            ritz = vals
            if beta == 0 or res < ctx.coerce(cfg.residual_tol):
                converged = True
                break
            w = scale(w, one / beta)
            # loss of orthogonality check against the locked vacua
            drift = max(abs(inner(v, w)) for v in basis)
            if drift > ctx.coerce(cfg.orth_tol):
                raise EigenConvergenceError(f"Krylov basis lost orthogonality (overlap {float(drift):.3g}) at step {steps}")
            basis.append(w)
        if not ritz:
            raise EigenConvergenceError("Krylov subspace too small")
        per_period = [(one, zero), (one, zero)] + ritz
        per_layer = [ctx.sqrt(_modulus(z, ctx)) for z in per_period]
    return KrylovResult(per_period, per_layer, residuals, steps, converged, max_bond, discarded, history)


def dense_period_matrix(n: int, p: ModelParams) -> np.ndarray:
    """Dense 2^N period map (odd layer after even layer), for validation at small N."""
    with p.ctx.activate():
        even = dense_layer_matrix(n, brickwork_pairing(n, 0), p)
        odd = dense_layer_matrix(n, brickwork_pairing(n, 1), p)
        return odd @ even


# ---------------------------------------------------------------------------
# critical sweep along boundary lines of the gate region
# ---------------------------------------------------------------------------

LINES = ("upper", "lower", "pe")


def line_point(line: str, t, ctx: PrecisionContext) -> tuple:
    """(alpha, beta) on a boundary line; ``t`` is alpha for upper/lower and beta for the PE line."""
    with ctx.activate():
        t = ctx.coerce(t)
        if line == "upper":  # fSim(pi/2, phi) family
            return t, 1 - 4 * t / 5
        if line == "lower":  # fSim(0, phi) family
            return t, -t / 5
        if line == "pe":  # perfect entanglers
            return ctx.scalar(10) / 9, t
    raise GateSpecError(f"unknown line {line!r}; choose from {LINES}")


@dataclass
class SweepRow:
    alpha: object
    beta: object
    lambda_g: object  # per layer
    eps_n_c: object
    error: str = ""


@dataclass
class SweepResult:
    line: str
    rows: list[SweepRow]
    monotone: bool


def critical_sweep_1d(line: str, grid: Sequence, n: int, q: int, ctx: PrecisionContext, cfg: KrylovConfig = KrylovConfig()) -> SweepResult:
    """-ln Lambda_g (per layer) at gamma = 0 along a boundary line; failures are recorded per point."""
    rows: list[SweepRow] = []
    for t in grid:
        alpha, beta = line_point(line, t, ctx)
        try:
            res = krylov_leading_eigs(n, ModelParams(q, alpha, beta, ctx.scalar(0), ctx), cfg)
            lam = res.gap_per_layer
            with ctx.activate():
                rows.append(SweepRow(alpha, beta, lam, -ctx.log(lam) if lam and lam > 0 else None))
        except (NumericError, ModelError) as exc:
            rows.append(SweepRow(alpha, beta, None, None, str(exc)))
    ok = [r.eps_n_c for r in rows if r.eps_n_c is not None]
    key = [r.alpha if line != "pe" else r.beta for r in rows if r.eps_n_c is not None]
    pairs = sorted(zip(key, ok), key=lambda kv: kv[0])
    monotone = all(b[1] >= a[1] - 1e-6 for a, b in zip(pairs, pairs[1:]))
    return SweepResult(line, rows, monotone)


