"""Matrix-product-state engine for the 1D brickwork geometry.

The configuration distribution p(sigma) is held as an MPS with site tensors of
shape (left bond, 2, right bond). Layers are applied gate by gate (TEBD) in a
mixed-canonical gauge, so the discarded squared singular values after each
two-site update bound the 2-norm error of that step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import (
    DecayTrace,
    ModelError,
    ModelParams,
    check_noise_matrix,
    initial_site_weights,
    make_observables,
    observable_pair,
    single_site_N,
    two_site_M,
)
from .precision import NumericError, PrecisionContext, qr, svd_truncate

DEFAULT_TRUNC = {True: 1e-24, False: 1e-30}
DEFAULT_BOND_CAP = 256


class BondCapError(NumericError):
    """Raised when the truncation budget would need a bond larger than the cap."""

    def __init__(self, bond: int, needed: int, cap: int):
        super().__init__(f"bond {bond} needs dimension {needed} > cap {cap} at the requested truncation budget")
        self.bond = bond
        self.needed = needed
        self.cap = cap


@dataclass(frozen=True)
class BrickworkSpec:
    """Open-boundary brickwork: even layers pair (0,1),(2,3),..., odd layers (1,2),(3,4),...."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ModelError(f"number of sites must be even and >= 2, got {self.n}")

    def pairing(self, parity: int) -> list[tuple[int, int]]:
        return [(i, i + 1) for i in range(parity % 2, self.n - 1, 2)]


@dataclass
class MpsState:
    n: int
    q: int
    tensors: list
    ctx: PrecisionContext
    trunc: float = 1e-30
    max_bond: int = DEFAULT_BOND_CAP
    discarded: object = 0.0
    center: int | None = None  # orthogonality center, None if unknown
    gauge: int = 0  # stored tensors hold p(sigma) * q^(gauge * S)

    def copy(self) -> "MpsState":
        return replace(self, tensors=[t.copy() for t in self.tensors])

    @property
    def bonds(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max([1] + self.bonds)


def gauge_diag(q: int, gauge: int, ctx: PrecisionContext) -> np.ndarray:
    with ctx.activate():
        return ctx.array([1, q**gauge])


def product_mps(
    site_vectors: Sequence[np.ndarray],
    q: int,
    ctx: PrecisionContext,
    trunc=None,
    max_bond: int = DEFAULT_BOND_CAP,
    gauge: int = 0,
) -> MpsState:
    """Product state from per-site weights given in the natural (gauge 0) basis."""
    trunc = DEFAULT_TRUNC[ctx.fast] if trunc is None else trunc
    dg = gauge_diag(q, gauge, ctx)
    with ctx.activate():
        tensors = [(np.asarray(v) * dg).reshape(1, 2, 1) for v in site_vectors]
        return MpsState(len(tensors), q, tensors, ctx, trunc, max_bond, ctx.scalar(0), None, gauge)


def initial_mps(n: int, q: int, ctx: PrecisionContext, trunc=None, max_bond: int = DEFAULT_BOND_CAP, gauge: int = 0) -> MpsState:
    BrickworkSpec(n)
    with ctx.activate():
        w = initial_site_weights(q, ctx)
    return product_mps([w] * n, q, ctx, trunc, max_bond, gauge)


# ---------------------------------------------------------------------------
# gauge moves
# ---------------------------------------------------------------------------


def _shift_right(st: MpsState, i: int) -> None:
    """QR site i so it becomes left-orthonormal; push R into site i+1."""
    a = st.tensors[i]
    dl, _, dr = a.shape
    qm, r = qr(a.reshape(dl * 2, dr))
    st.tensors[i] = qm.reshape(dl, 2, qm.shape[1])
    st.tensors[i + 1] = np.tensordot(r, st.tensors[i + 1], axes=(1, 0))


def _shift_left(st: MpsState, i: int) -> None:
    """LQ on site i so it becomes right-orthonormal; push L into site i-1."""
    a = st.tensors[i]
    dl, _, dr = a.shape
    qm, r = qr(a.reshape(dl, 2 * dr).T)
    st.tensors[i] = qm.T.reshape(qm.shape[1], 2, dr)
    st.tensors[i - 1] = np.tensordot(st.tensors[i - 1], r.T, axes=(2, 0))


def move_center(st: MpsState, target: int) -> None:
    with st.ctx.activate():
        if st.center is None:
            for i in range(st.n - 1, 0, -1):
                _shift_left(st, i)
            st.center = 0
        while st.center < target:
            _shift_right(st, st.center)
            st.center += 1
        while st.center > target:
            _shift_left(st, st.center)
            st.center -= 1


def _split(st: MpsState, i: int, theta: np.ndarray) -> None:
    """SVD-split a (Dl, 2, 2, Dr) block over sites i, i+1; center ends on i+1."""
    ctx = st.ctx
    dl, _, _, dr = theta.shape
    m = theta.reshape(dl * 2, 2 * dr)
    with ctx.activate():
        total = np.sum(m * m)
        budget = ctx.coerce(st.trunc) * total
        u, s, v, tail = svd_truncate(m, budget)
        rank = len(s)
        if rank > st.max_bond:
            raise BondCapError(i, rank, st.max_bond)
        st.tensors[i] = u.reshape(dl, 2, rank)
        st.tensors[i + 1] = (s[:, None] * v.T).reshape(rank, 2, dr)
        if total != 0:
            st.discarded = st.discarded + tail / total
    st.center = i + 1


def apply_two_site(st: MpsState, i: int, gate: np.ndarray) -> None:
    """Apply a 4x4 operator (basis index 2*sigma_i + sigma_{i+1}) to sites i, i+1."""
    move_center(st, i)
    with st.ctx.activate():
        a, b = st.tensors[i], st.tensors[i + 1]
        theta = np.tensordot(a, b, axes=(2, 0))  # (Dl, 2, 2, Dr)
        dl, dr = theta.shape[0], theta.shape[3]
        t = theta.transpose(1, 2, 0, 3).reshape(4, dl * dr)
        t = (gate @ t).reshape(2, 2, dl, dr).transpose(2, 0, 1, 3)
    _split(st, i, t)


def layer_gate(p: ModelParams, noise: np.ndarray | None = None, gauge: int = 0) -> np.ndarray:
    """Combined update (N x N) M for one gated pair, conjugated into the given gauge."""
    ctx = p.ctx
    with ctx.activate():
        nm = single_site_N(p.gamma, ctx) if noise is None else noise
        check_noise_matrix(nm)
        g = np.kron(nm, nm) @ two_site_M(p)
        dg = gauge_diag(p.q, gauge, ctx)
        d2 = np.kron(dg, dg)
        return d2[:, None] * g / d2[None, :]


def tebd_layer(st: MpsState, parity: int, p: ModelParams, noise: np.ndarray | None = None, gate: np.ndarray | None = None) -> MpsState:
    """Apply one brickwork layer to a copy of ``st``; edge sites are idle on odd layers.

    A precomputed ``gate`` must already be in the gauge of ``st``.
    """
    out = st.copy()
    g = layer_gate(p, noise, st.gauge) if gate is None else gate
    for i, _ in BrickworkSpec(st.n).pairing(parity):
        apply_two_site(out, i, g)
    return out


# ---------------------------------------------------------------------------
# contractions
# ---------------------------------------------------------------------------


def contract_product(st: MpsState, pair) -> object:
    """<(w0, w1)^{(x)N} | p> with the covector given in the natural basis."""
    ctx = st.ctx
    with ctx.activate():
        w = ctx.array(list(pair)) / gauge_diag(st.q, st.gauge, ctx)
        env = None
        for a in st.tensors:
            m = w[0] * a[:, 0, :] + w[1] * a[:, 1, :]
            env = m if env is None else env @ m
        return env[0, 0]


def contract_excess(st: MpsState, a_pair, b_pair) -> object:
    """<a^{(x)N} - b^{(x)N} | p> without forming the difference.

    Telescoping a^N - b^N = sum_k a^{<k} (a - b)_k b^{>k} keeps every covector
    nonnegative when a >= b entrywise.
    """
    ctx = st.ctx
    with ctx.activate():
        dg = gauge_diag(st.q, st.gauge, ctx)
        a = ctx.array(list(a_pair))
        b = ctx.array(list(b_pair))
        d = (a - b) / dg
        a = a / dg
        b = b / dg
        env_a = env_s = None
        for t in st.tensors:
            ma = a[0] * t[:, 0, :] + a[1] * t[:, 1, :]
            mb = b[0] * t[:, 0, :] + b[1] * t[:, 1, :]
            md = d[0] * t[:, 0, :] + d[1] * t[:, 1, :]
            if env_a is None:
                env_a, env_s = ma, md
            else:
                env_s = env_s @ mb + env_a @ md
                env_a = env_a @ ma
        return env_s[0, 0]


def inner(x: MpsState, y: MpsState) -> object:
    """Euclidean inner product sum_sigma x(sigma) y(sigma)."""
    ctx = x.ctx
    with ctx.activate():
        env = None
        for a, b in zip(x.tensors, y.tensors):
            if env is None:
                env = np.tensordot(a, b, axes=((0, 1), (0, 1)))
            else:
                tmp = np.tensordot(env, a, axes=(0, 0))  # (Dy, 2, Dr_a)
                env = np.tensordot(tmp, b, axes=((0, 1), (0, 1)))
        return env[0, 0]


def observables_1d(st_f: MpsState, st_x: MpsState, st_ref: MpsState, st_z: MpsState):
    """Observables from the noisy state (two gauges), the gamma=0 reference and the two-copy-noise state.

    F and f are read from ``st_f`` (gauge 2, whose norm follows q^N F); chi,
    trace and X from ``st_x`` (gauge 1, balanced between the two vacua).
    """
    ctx, q, n = st_f.ctx, st_f.q, st_f.n
    pf, pp, pt = (observable_pair(k, q, ctx) for k in ("fidelity_S", "xeb_P", "trace"))
    with ctx.activate():
        one = ctx.array([1, 1])
        ap = ctx.array([1, q])
        af = ctx.array([1, q * q])
    return make_observables(
        q,
        n,
        contract_product(st_x, pt),
        contract_product(st_f, pf),
        contract_product(st_x, pp),
        contract_product(st_z, pp),
        contract_product(st_ref, pp),
        ctx,
        chi=contract_excess(st_x, ap, one),
        f=contract_excess(st_f, af, one),
        chi_ref=contract_excess(st_ref, ap, one),
    )


F_GAUGE = 2
X_GAUGE = 1


def evolve_1d(
    n: int,
    p: ModelParams,
    depth: int,
    z_noise: np.ndarray | None = None,
    trunc=None,
    max_bond: int = DEFAULT_BOND_CAP,
) -> DecayTrace:
    """Brickwork evolution starting with an even layer.

    The noisy state is carried in two gauges, next to a gamma=0 reference and
    (when ``z_noise`` is given) a two-copy-noise state. The discarded column
    reports the larger accumulated weight of the two noisy copies.
    """
    ctx = p.ctx
    noiseless = p.with_gamma(0)
    gf = layer_gate(p, gauge=F_GAUGE)
    gx = layer_gate(p, gauge=X_GAUGE)
    g0 = layer_gate(noiseless, gauge=X_GAUGE)
    gz = layer_gate(p, z_noise, gauge=X_GAUGE) if z_noise is not None else gx
    sf = initial_mps(n, p.q, ctx, trunc, max_bond, F_GAUGE)
    sx = initial_mps(n, p.q, ctx, trunc, max_bond, X_GAUGE)
    s0 = sx.copy()
    sz = sx.copy()
    obs = [observables_1d(sf, sx, s0, sz)]
    with ctx.activate():
        disc = [max(sf.discarded, sx.discarded)]
    for d in range(depth):
        par = d % 2
        sf = tebd_layer(sf, par, p, gate=gf)
        sx = tebd_layer(sx, par, p, gate=gx)
        s0 = tebd_layer(s0, par, noiseless, gate=g0)
        sz = tebd_layer(sz, par, p, gate=gz) if z_noise is not None else sx
        obs.append(observables_1d(sf, sx, s0, sz))
        with ctx.activate():
            disc.append(max(sf.discarded, sx.discarded))
    return DecayTrace.from_observables(obs, ctx, disc)


# ---------------------------------------------------------------------------
# linear combinations
# ---------------------------------------------------------------------------


def scale(st: MpsState, c) -> MpsState:
    out = st.copy()
    with st.ctx.activate():
        k = out.center if out.center is not None else 0
        out.tensors[k] = out.tensors[k] * c
    return out


def add(x: MpsState, y: MpsState, cx=1, cy=1) -> MpsState:
    """cx*x + cy*y by direct-sum embedding (uncompressed)."""
    ctx = x.ctx
    n = x.n
    if y.n != n or y.gauge != x.gauge:
        raise ModelError("add needs states with equal length and gauge")
    tensors = []
    with ctx.activate():
        for i, (a, b) in enumerate(zip(x.tensors, y.tensors)):
            if i == 0:
                a = a * ctx.coerce(cx)
                b = b * ctx.coerce(cy)
            dla, _, dra = a.shape
            dlb, _, drb = b.shape
            if n == 1:
                t = a + b
            elif i == 0:
                t = ctx.zeros((1, 2, dra + drb))
                t[:, :, :dra] = a
                t[:, :, dra:] = b
            elif i == n - 1:
                t = ctx.zeros((dla + dlb, 2, 1))
                t[:dla] = a
                t[dla:] = b
            else:
                t = ctx.zeros((dla + dlb, 2, dra + drb))
                t[:dla, :, :dra] = a
                t[dla:, :, dra:] = b
            tensors.append(t)
    return MpsState(n, x.q, tensors, ctx, x.trunc, x.max_bond, x.discarded, None, x.gauge)


def compress(st: MpsState) -> MpsState:
    """Canonicalize, then truncate every bond with the relative SVD budget."""
    out = st.copy()
    out.center = None
    move_center(out, out.n - 1)  # left-canonical, center on last site
    ctx = out.ctx
    with ctx.activate():
        total = np.sum(out.tensors[-1] * out.tensors[-1])
        budget = ctx.coerce(out.trunc) * total
        for i in range(out.n - 1, 0, -1):
            a = out.tensors[i]
            dl, _, dr = a.shape
            u, s, v, tail = svd_truncate(a.reshape(dl, 2 * dr), budget / (out.n - 1))
            if len(s) > out.max_bond:
                raise BondCapError(i - 1, len(s), out.max_bond)
            out.tensors[i] = v.T.reshape(len(s), 2, dr)
            out.tensors[i - 1] = np.tensordot(out.tensors[i - 1], u * s[None, :], axes=(2, 0))
            if total != 0:
                out.discarded = out.discarded + tail / total
        out.center = 0
    return out


def to_dense(st: MpsState) -> np.ndarray:
    """Full 2^N vector of p(sigma) in the natural basis (site 0 is the most significant bit)."""
    ctx = st.ctx
    with ctx.activate():
        inv = 1 / gauge_diag(st.q, st.gauge, ctx)
        v = (st.tensors[0] * inv[None, :, None]).reshape(2, -1)
        for a in st.tensors[1:]:
            v = np.tensordot(v, a * inv[None, :, None], axes=(1, 0)).reshape(-1, a.shape[2])
        return v.reshape(-1)
