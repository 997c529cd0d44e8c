"""The two-copy statistical model: site basis, update matrices, observables.

Per-site labels sigma in {0, 1} stand for the two-copy operators I/q^2 and
SWAP/q. A configuration distribution p(sigma) is evolved by layers of two-site
gate updates M(alpha, beta) followed by single-site noise updates N(gamma).
The dense (2^N) representation here is the brute-force reference for the
reduced and MPS engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .gates import GateStatParams
from .noise import NoiseStatParams, OutOfScopeError
from .precision import PrecisionContext, eig_dense

DENSE_ORACLE_LIMIT = 10

OBSERVABLE_KINDS = ("trace", "xeb_P", "fidelity_S")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Gate parameters (alpha, beta), noise rate gamma and qudit dimension."""

    q: int
    alpha: object
    beta: object
    gamma: object
    ctx: PrecisionContext = field(default_factory=PrecisionContext)

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ModelError("q must be >= 2")
        if self.gamma < 0 or self.gamma > 1:
            raise ModelError(f"gamma must lie in [0, 1], got {float(self.gamma):.6g}")

    @classmethod
    def build(cls, gate: GateStatParams, gamma, ctx: PrecisionContext, q: int | None = None) -> "ModelParams":
        q = gate.q if q is None else q
        with ctx.activate():
            return cls(q, ctx.coerce(gate.alpha), ctx.coerce(gate.beta), ctx.coerce(gamma), ctx)

    def with_gamma(self, gamma) -> "ModelParams":
        with self.ctx.activate():
            return ModelParams(self.q, self.alpha, self.beta, self.ctx.coerce(gamma), self.ctx)


def two_site_M(p: ModelParams) -> np.ndarray:
    """Gate update in the ordered basis {00, 01, 10, 11}."""
    ctx = p.ctx
    with ctx.activate():
        q2 = p.q * p.q
        a, b = p.alpha, p.beta
        up = a * q2 / (q2 + 1)
        down = a / (q2 + 1)
        diag = 1 - a - b
        return ctx.array(
            [
                [1, up, up, 0],
                [0, diag, b, 0],
                [0, b, diag, 0],
                [0, down, down, 1],
            ]
        )


def single_site_N(gamma, ctx: PrecisionContext) -> np.ndarray:
    with ctx.activate():
        g = ctx.coerce(gamma)
        if g < 0 or g > 1:
            raise ModelError(f"gamma must lie in [0, 1], got {float(g):.6g}")
        return ctx.array([[1, g], [0, 1 - g]])


def check_noise_matrix(nm: np.ndarray) -> None:
    """Reject two-copy noise with delta2 != 0 (non-unital dynamics are not modeled)."""
    if nm[1, 0] != 0:
        raise OutOfScopeError("non-unital two-copy evolution (delta2 != 0) is out of scope")


def noise_matrices(noise: NoiseStatParams, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """(one-copy N(gamma1), two-copy N2(gamma2, delta2)) in the given context."""
    with ctx.activate():
        n1 = single_site_N(noise.gamma1, ctx)
        d2 = ctx.coerce(noise.delta2)
        g2 = ctx.coerce(noise.gamma2)
        n2 = ctx.array([[1 - d2, g2], [d2, 1 - g2]])
    return n1, n2


def initial_site_weights(q: int, ctx: PrecisionContext) -> np.ndarray:
    """Haar single-qudit average of |0><0| x |0><0|: (q/(q+1), 1/(q+1))."""
    return ctx.array([Fraction(q, q + 1), Fraction(1, q + 1)])


def observable_pair(kind: str, q: int, ctx: PrecisionContext) -> np.ndarray:
    if kind == "trace":
        return ctx.array([1, 1])
    if kind == "xeb_P":
        return ctx.array([Fraction(1, q), 1])
    if kind == "fidelity_S":
        return ctx.array([Fraction(1, q), q])
    raise ModelError(f"unknown observable {kind!r}")


# ---------------------------------------------------------------------------
# dense 2^N representation (site i is tensor axis i)
# ---------------------------------------------------------------------------


@dataclass
class DenseState:
    n_sites: int
    q: int
    weights: np.ndarray  # length 2^N

    def tensor(self) -> np.ndarray:
        return self.weights.reshape((2,) * self.n_sites)


def _check_sites(n: int) -> None:
    if n < 2 or n % 2:
        raise ModelError(f"number of sites must be even and >= 2, got {n}")


def product_vector(pairs: Sequence[np.ndarray]) -> np.ndarray:
    out = pairs[0]
    for p in pairs[1:]:
        out = np.kron(out, p)
    return out


def dense_initial_state(n: int, q: int, ctx: PrecisionContext) -> DenseState:
    _check_sites(n)
    if n > DENSE_ORACLE_LIMIT:
        raise ModelError(f"dense representation limited to N <= {DENSE_ORACLE_LIMIT}")
    with ctx.activate():
        return DenseState(n, q, product_vector([initial_site_weights(q, ctx)] * n))


def dense_basis_state(n: int, q: int, sigma: Sequence[int], ctx: PrecisionContext) -> DenseState:
    w = ctx.zeros(2**n)
    w[int("".join(str(s) for s in sigma), 2)] = ctx.scalar(1)
    return DenseState(n, q, w)


def contract_dense(state: DenseState, pair: np.ndarray):
    """<(w0, w1)^{(x)N} | p>."""
    ctx = PrecisionContext.of(state.weights)
    with ctx.activate():
        w = state.weights
        for _ in range(state.n_sites):
            w = pair @ w.reshape(2, -1)
        return w[0] if np.ndim(w) else w


def _apply_site_ops(t: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    moved = np.moveaxis(t, axes, range(k))
    shp = moved.shape
    out = (op @ moved.reshape(2**k, -1)).reshape(shp)
    return np.moveaxis(out, range(k), axes)


def check_pairing(n: int, pairing: Sequence[tuple[int, int]]) -> None:
    seen: set[int] = set()
    for i, j in pairing:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"invalid pair ({i}, {j}) for N={n}")
        if i in seen or j in seen:
            raise ModelError(f"overlapping pairs in pairing {list(pairing)}")
        seen.update((i, j))


def dense_layer(state: DenseState, pairing: Sequence[tuple[int, int]], p: ModelParams, noise: np.ndarray | None = None) -> DenseState:
    """One layer: M on every pair, then the noise update on every site touched by a gate."""
    check_pairing(state.n_sites, pairing)
    ctx = p.ctx
    with ctx.activate():
        nm = single_site_N(p.gamma, ctx) if noise is None else noise
        check_noise_matrix(nm)
        g = np.kron(nm, nm) @ two_site_M(p)
        t = state.tensor()
        for i, j in pairing:
            t = _apply_site_ops(t, g, (i, j))
        return DenseState(state.n_sites, state.q, t.reshape(-1))


def a2a_pairings(n: int) -> list[list[tuple[int, int]]]:
    """All (n-1)!! perfect matchings of n sites."""

    def rec(sites):
        if not sites:
            yield []
            return
        a = sites[0]
        for k in range(1, len(sites)):
            b = sites[k]
            rest = sites[1:k] + sites[k + 1 :]
            for m in rec(rest):
                yield [(a, b)] + m

    return list(rec(list(range(n))))


def brickwork_pairing(n: int, parity: int) -> list[tuple[int, int]]:
    """Even layers pair (0,1),(2,3),...; odd layers pair (1,2),(3,4),... (open chain)."""
    start = parity % 2
    return [(i, i + 1) for i in range(start, n - 1, 2)]


def dense_layer_matrix(n: int, pairing: Sequence[tuple[int, int]], p: ModelParams, noise: np.ndarray | None = None) -> np.ndarray:
    """2^N x 2^N transfer matrix of one layer (gates and noise on touched sites)."""
    check_pairing(n, pairing)
    ctx = p.ctx
    with ctx.activate():
        nm = single_site_N(p.gamma, ctx) if noise is None else noise
        check_noise_matrix(nm)
        g = np.kron(nm, nm) @ two_site_M(p)
        touched = {s for pr in pairing for s in pr}
        order = [s for pr in pairing for s in pr] + [s for s in range(n) if s not in touched]
        blocks = [g] * len(pairing) + [ctx.eye(2)] * (n - 2 * len(pairing))
        k = blocks[0]
        for b in blocks[1:]:
            k = np.kron(k, b)
        # index of each natural-order configuration inside the permuted kron order
        idx = np.arange(2**n).reshape((2,) * n).transpose(order).reshape(-1)
        inv = np.empty_like(idx)
        inv[idx] = np.arange(2**n)
        return k[np.ix_(inv, inv)]


def dense_a2a_transfer(n: int, p: ModelParams, noise: np.ndarray | None = None) -> np.ndarray:
    """Average of the layer transfer over all perfect matchings (uniform random pairing)."""
    mats = [dense_layer_matrix(n, m, p, noise) for m in a2a_pairings(n)]
    ctx = p.ctx
    with ctx.activate():
        tot = mats[0]
        for m in mats[1:]:
            tot = tot + m
        return tot / len(mats)


def hamming_weights(n: int) -> np.ndarray:
    return np.array([bin(i).count("1") for i in range(2**n)])


def project_to_sectors(t: np.ndarray, n: int) -> np.ndarray:
    """Reduced matrix R[S', S] = sum_{|s'|=S'} T[s', s] for any s with |s| = S.

    Exact for permutation-symmetric T; the representative s is the first
    configuration of weight S.
    """
    ctx = PrecisionContext.of(t)
    hw = hamming_weights(n)
    out = ctx.zeros((n + 1, n + 1))
    with ctx.activate():
        for s in range(n + 1):
            col = t[:, int(np.argmax(hw == s))]
            for sp in range(n + 1):
                out[sp, s] = sum(col[hw == sp], ctx.scalar(0))
    return out


# ---------------------------------------------------------------------------
# observables and traces
# ---------------------------------------------------------------------------


@dataclass
class Observables:
    F: object
    X: object
    chi: object
    chi_B: object
    Z: object
    f: object
    trace: object


def make_observables(q: int, n: int, trace, F, X, Z, Z_ref, ctx: PrecisionContext, chi=None, f=None, chi_ref=None) -> Observables:
    """Assemble observables; ``chi``, ``f`` and ``chi_ref`` may be passed when contracted directly.

    Direct contractions with q^S - 1 and q^(2S) - 1 avoid the cancellation
    in q^N X - 1 once chi falls below the working precision.
    """
    with ctx.activate():
        qn = ctx.scalar(q) ** n
        chi = qn * X - 1 if chi is None else chi
        f = qn * F - 1 if f is None else f
        denom = qn * Z_ref - 1 if chi_ref is None else chi_ref
        chi_b = chi / denom if denom != 0 else ctx.scalar("nan")
        return Observables(F=F, X=X, chi=chi, chi_B=chi_b, Z=Z, f=f, trace=trace)


def excess_covectors(weights: np.ndarray, q: int, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """Covectors q^S - 1 (for chi) and q^(2S) - 1 (for f), exact integers per Hamming weight S."""
    return (
        ctx.array([q ** int(s) - 1 for s in weights]),
        ctx.array([q ** (2 * int(s)) - 1 for s in weights]),
    )


@dataclass
class DecayTrace:
    """Per-depth observables. ``dlnchi[d] = ln(chi(d+1)/chi(d))``, ``None`` where undefined."""

    depths: list[int]
    F: list
    X: list
    chi: list
    chi_B: list
    Z: list
    f: list
    trace: list
    dlnchi: list
    discarded: list = field(default_factory=list)
    note: str = ""

    @classmethod
    def from_observables(cls, obs: list[Observables], ctx: PrecisionContext, discarded: list | None = None) -> "DecayTrace":
        dl: list = []
        note = ""
        with ctx.activate():
            for d in range(len(obs)):
                if d + 1 >= len(obs):
                    dl.append(None)
                    continue
                a, b = obs[d].chi, obs[d + 1].chi
                if a > 0 and b > 0:
                    dl.append(ctx.log(b / a))
                else:
                    dl.append(None)
                    note = "chi <= 0 encountered; decay rate truncated"
        return cls(
            depths=list(range(len(obs))),
            F=[o.F for o in obs],
            X=[o.X for o in obs],
            chi=[o.chi for o in obs],
            chi_B=[o.chi_B for o in obs],
            Z=[o.Z for o in obs],
            f=[o.f for o in obs],
            trace=[o.trace for o in obs],
            dlnchi=dl,
            discarded=list(discarded or []),
            note=note,
        )

    def plateau(self, rel_tol: float = 1e-4, window: int = 5):
        """First value of dlnchi after which ``window`` consecutive layers vary by < rel_tol."""
        vals = [v for v in self.dlnchi if v is not None]
        for i in range(len(vals) - window + 1):
            seg = vals[i : i + window]
            ref = seg[-1]
            if ref != 0 and all(abs(v - ref) <= rel_tol * abs(ref) for v in seg):
                return seg[-1]
        return None

    def last_dlnchi(self):
        vals = [v for v in self.dlnchi if v is not None]
        return vals[-1] if vals else None


def dense_evolve(
    n: int,
    p: ModelParams,
    depth: int,
    pairings: Sequence[Sequence[tuple[int, int]]] | None = None,
    z_noise: np.ndarray | None = None,
    layer_matrix: np.ndarray | None = None,
) -> DecayTrace:
    """Dense evolution for ``depth`` layers.

    Either cycle through explicit ``pairings`` (1D brickwork) or apply a fixed
    ``layer_matrix`` built with the corresponding gamma (all-to-all average).
    Runs in parallel: the noisy state, a gamma=0 reference (for chi_B), and a
    two-copy-noise state with ``z_noise`` (collision probability Z).
    """
    ctx = p.ctx
    q = p.q
    noiseless = p.with_gamma(0)
    z_noise = single_site_N(p.gamma, ctx) if z_noise is None else z_noise
    check_noise_matrix(z_noise)
    pf, pp, pt = (observable_pair(k, q, ctx) for k in ("fidelity_S", "xeb_P", "trace"))
    ex_chi, ex_f = excess_covectors(hamming_weights(n), q, ctx)
    s = dense_initial_state(n, q, ctx)
    s0 = s
    sz = s
    obs = []
    with ctx.activate():
        if layer_matrix is not None:
            t_noisy = layer_matrix
            t_zero = dense_a2a_transfer(n, noiseless)
            t_z = dense_a2a_transfer(n, p, z_noise)
        for d in range(depth + 1):
            if d > 0:
                if layer_matrix is not None:
                    s = DenseState(n, q, t_noisy @ s.weights)
                    s0 = DenseState(n, q, t_zero @ s0.weights)
                    sz = DenseState(n, q, t_z @ sz.weights)
                else:
                    pr = pairings[(d - 1) % len(pairings)]
                    s = dense_layer(s, pr, p)
                    s0 = dense_layer(s0, pr, noiseless)
                    sz = dense_layer(sz, pr, p, z_noise)
            obs.append(
                make_observables(
                    q,
                    n,
                    contract_dense(s, pt),
                    contract_dense(s, pf),
                    contract_dense(s, pp),
                    contract_dense(sz, pp),
                    contract_dense(s0, pp),
                    ctx,
                    chi=ex_chi @ s.weights,
                    f=ex_f @ s.weights,
                    chi_ref=ex_chi @ s0.weights,
                )
            )
    return DecayTrace.from_observables(obs, ctx)


# ---------------------------------------------------------------------------
# spectra and coupling constants
# ---------------------------------------------------------------------------


@dataclass
class SpectrumResult:
    """Leading eigenpairs with sector labels and coupling constants c^F_a, c^chi_a."""

    eigenvalues: list
    imag: list
    is_complex: list[bool]
    labels: list[str]
    mean_weight: list
    c_F: list
    c_chi: list
    right_vectors: list = field(repr=False, default_factory=list)
    left_vectors: list = field(repr=False, default_factory=list)
    per_layer: list | None = None

    def real_leading(self):
        return [lam for lam, c in zip(self.eigenvalues, self.is_complex) if not c]

    def gap_eigenvalue(self, label: str = "low"):
        """Largest eigenvalue < 1 (per the stored convention) carrying ``label``."""
        vals = self.per_layer if self.per_layer is not None else self.eigenvalues
        one = vals[0] * 0 + 1
        tol = 2 ** -40
        for lam, lab, cplx in zip(vals, self.labels, self.is_complex):
            if not cplx and lab == label and abs(lam - one) > tol:
                return lam
        return None


def sector_label(v: np.ndarray, w: np.ndarray, weights: np.ndarray, n: int) -> tuple[str, object]:
    """Label an eigenpair by its mean Hamming weight under the density |v_i w_i|.

    The biorthogonal density sums to one in exact arithmetic and, unlike |v|
    alone, is not dominated by the compensating weight that every
    trace-free right vector carries near S = 0.
    """
    dens = np.array([abs(a * b) for a, b in zip(v, w)], dtype=object)
    tot = sum(dens)
    if tot == 0:
        return "low", 0
    mean = sum(dens * weights) / tot
    return ("extensive" if mean > n / 2 else "low"), mean


def spectral_analysis(
    t: np.ndarray,
    k: int,
    rho0: np.ndarray,
    obs_F: np.ndarray,
    obs_chi: np.ndarray,
    weights: np.ndarray,
    n: int,
) -> SpectrumResult:
    """Eigendecomposition of ``t`` and couplings c^O_a = <O|v_a><w_a|rho0>/<w_a|v_a>."""
    dec = eig_dense(t, k)
    ctx = PrecisionContext.of(t)
    labels, means, cf, cx = [], [], [], []
    with ctx.activate():
        for v, w in zip(dec.right_vectors, dec.left_vectors):
            if v is None:
                labels.append("complex")
                means.append(None)
                cf.append(None)
                cx.append(None)
                continue
            lab, mean = sector_label(v, w, weights, n)
            labels.append(lab)
            means.append(mean)
            proj = (w @ rho0) / (w @ v)
            cf.append((obs_F @ v) * proj)
            cx.append((obs_chi @ v) * proj)
    return SpectrumResult(
        dec.eigenvalues, dec.imag, dec.is_complex, labels, means, cf, cx, dec.right_vectors, dec.left_vectors
    )


def dense_functionals(n: int, q: int, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """Dense <F| and <chi| = q^N <P| - <1| row vectors."""
    with ctx.activate():
        f = product_vector([observable_pair("fidelity_S", q, ctx)] * n)
        p = product_vector([observable_pair("xeb_P", q, ctx)] * n)
        one = product_vector([observable_pair("trace", q, ctx)] * n)
        return f, ctx.scalar(q) ** n * p - one


def dense_spectrum_and_couplings(t: np.ndarray, n: int, q: int, k: int) -> SpectrumResult:
    if n > DENSE_ORACLE_LIMIT:
        raise ModelError(f"dense spectra limited to N <= {DENSE_ORACLE_LIMIT}")
    ctx = PrecisionContext.of(t)
    f, chi = dense_functionals(n, q, ctx)
    rho0 = dense_initial_state(n, q, ctx).weights
    return spectral_analysis(t, k, rho0, f, chi, hamming_weights(n), n)


def noise_only_S_decay(n: int, q: int, gamma, ctx: PrecisionContext):
    """<S|T|S>/<S|S> for a layer of pure noise, which equals (1 - epsilon)^N.

    The ket |S> is the all-SWAP configuration and the bra is the fidelity
    functional, both in the dense 2^N basis.
    """
    with ctx.activate():
        mat = single_site_N(gamma, ctx)
        for _ in range(n - 1):
            mat = np.kron(mat, single_site_N(gamma, ctx))
        ket = ctx.zeros(2**n)
        ket[-1] = ctx.scalar(1)
        bra = product_vector([observable_pair("fidelity_S", q, ctx)] * n)
        return (bra @ (mat @ ket)) / (bra @ ket)


def white_noise_coefficient(F, q: int, n: int, ctx: PrecisionContext):
    """a(d) = (q^N F - 1)/(q^{2N} - 1), a diagnostic of the global white-noise form."""
    with ctx.activate():
        qn = ctx.scalar(q) ** n
        return (qn * F - 1) / (qn * qn - 1)


def binom(n: int, k: int) -> int:
    return math.comb(n, k)
