"""Single-qudit noise channels and their statistical-model parameters.

The two-copy model sees a channel only through a handful of traces against
SWAP: Y1 (noise on one copy), Y2 (noise on both copies) and the nonunitality
mu. From these follow the SWAP-decay rates gamma1 (one-copy, used for the
fidelity and XEB) and gamma2, delta2 (two-copy, used for the collision
probability).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
import numpy as np

from .precision import PrecisionContext

_DEFAULT = PrecisionContext()


class NoiseSpecError(ValueError):
    """Malformed noise specification or invalid channel."""


class OutOfScopeError(Exception):
    """Request outside the modeled physics (CLI exit code 4)."""


@dataclass(frozen=True)
class KrausChannel:
    q: int
    kraus_ops: tuple  # of q x q complex arrays (complex128 or object/mpc)

    def __post_init__(self) -> None:
        if self.q < 2:
            raise NoiseSpecError("qudit dimension must be >= 2")
        for k in self.kraus_ops:
            if np.shape(k) != (self.q, self.q):
                raise NoiseSpecError(f"Kraus operator has shape {np.shape(k)}, expected {(self.q, self.q)}")
        if not self.kraus_ops:
            raise NoiseSpecError("channel needs at least one Kraus operator")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum((k @ rho @ k.conj().T for k in self.kraus_ops[1:]), self.kraus_ops[0] @ rho @ self.kraus_ops[0].conj().T)


@dataclass(frozen=True)
class NoiseStatParams:
    q: int
    r: object
    u: object
    mu: object
    y1: object
    y2: object
    gamma1: object
    gamma2: object
    delta2: object
    epsilon: object

    @property
    def unital(self) -> bool:
        return self.delta2 == 0


def _cplx(x, ctx: PrecisionContext):
    if ctx.fast:
        return complex(x)
    with ctx.activate():
        if isinstance(x, type(gmpy2.mpc(0))):
            return gmpy2.mpc(x)
        if isinstance(x, (complex, np.complexfloating)):
            return gmpy2.mpc(ctx.coerce(x.real), ctx.coerce(x.imag))
        return gmpy2.mpc(ctx.coerce(x), 0)


def _carray(values, ctx: PrecisionContext) -> np.ndarray:
    raw = np.array(values, dtype=object)
    if ctx.fast:
        return raw.astype(complex)
    out = np.empty(raw.shape, dtype=object)
    for idx, v in np.ndenumerate(raw):
        out[idx] = _cplx(v, ctx)
    return out


def _trace(a):
    return sum(a[i, i] for i in range(1, a.shape[0])) + a[0, 0]


def _real(z, ctx: PrecisionContext):
    return float(z.real) if ctx.fast else ctx.coerce(z.real)


def swap_operator(q: int, ctx: PrecisionContext = _DEFAULT) -> np.ndarray:
    s = [[0] * (q * q) for _ in range(q * q)]
    for i in range(q):
        for j in range(q):
            s[i * q + j][j * q + i] = 1
    return _carray(s, ctx)


def check_completeness(ch: KrausChannel, ctx: PrecisionContext = _DEFAULT, tol: float = 1e-12) -> None:
    with ctx.activate():
        acc = sum((k.conj().T @ k for k in ch.kraus_ops[1:]), ch.kraus_ops[0].conj().T @ ch.kraus_ops[0])
        dev = max(abs(acc[i, j] - (1 if i == j else 0)) for i in range(ch.q) for j in range(ch.q))
    if dev > tol:
        raise NoiseSpecError(f"Kraus operators are not trace preserving (max |sum K^dag K - I| = {float(dev):.3g})")


def one_copy_swap_trace(ch: KrausChannel, op: np.ndarray, ctx: PrecisionContext = _DEFAULT):
    """Tr(N1(op) SWAP) with the channel acting on the first copy only."""
    q = ch.q
    eye = _carray(np.eye(q), ctx)
    swap = swap_operator(q, ctx)
    with ctx.activate():
        out = sum(np.kron(k, eye) @ op @ np.kron(k, eye).conj().T for k in ch.kraus_ops)
        return _trace(out @ swap)


def stat_params_from_kraus(ch: KrausChannel, ctx: PrecisionContext = _DEFAULT) -> NoiseStatParams:
    """Noise parameters from explicit two-copy contractions of the Kraus operators."""
    check_completeness(ch, ctx)
    q = ch.q
    swap = swap_operator(q, ctx)
    with ctx.activate():
        y1 = _real(one_copy_swap_trace(ch, swap, ctx), ctx)
        n2 = sum(
            np.kron(ka, kb) @ swap @ np.kron(ka, kb).conj().T for ka in ch.kraus_ops for kb in ch.kraus_ops
        )
        y2 = _real(_trace(n2 @ swap), ctx)
        rho = ch.apply(_carray(np.eye(q), ctx) / q)
        tol = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits // 2)))
        unital = max(abs(rho[i, j] - (Fraction(1, q) if i == j else 0)) for i in range(q) for j in range(q)) <= tol
        # exact zero for unital channels; the trace formula would leave rounding residue
        mu = ctx.scalar(0) if unital else q * q * _real(_trace(rho @ rho), ctx) - q
        return params_from_traces(q, y1, y2, mu, ctx)


def params_from_traces(q: int, y1, y2, mu, ctx: PrecisionContext = _DEFAULT) -> NoiseStatParams:
    with ctx.activate():
        y1, y2, mu = ctx.coerce(y1), ctx.coerce(y2), ctx.coerce(mu)
        r = (q * q - y1) / (q * (q + 1))
        u = (y2 + mu - 1) / (q * q - 1)
        gamma1 = q * r / (q - 1)
        gamma2 = 1 - u + mu / (q * q - 1)
        delta2 = mu / (q * (q * q - 1))
        epsilon = (1 - ctx.scalar(Fraction(1, q * q))) * gamma1
        return NoiseStatParams(q, r, u, mu, y1, y2, gamma1, gamma2, delta2, epsilon)


def one_copy_update(p: NoiseStatParams) -> np.ndarray:
    """[[1, gamma1], [0, 1 - gamma1]] in the {I/q^2, SWAP/q} basis."""
    ctx = PrecisionContext.of(p.gamma1)
    with ctx.activate():
        return ctx.array([[1, p.gamma1], [0, 1 - p.gamma1]])


def two_copy_update(p: NoiseStatParams) -> np.ndarray:
    ctx = PrecisionContext.of(p.gamma2)
    with ctx.activate():
        return ctx.array([[1 - p.delta2, p.gamma2], [p.delta2, 1 - p.gamma2]])


def gamma_from_epsilon(epsilon, q: int, ctx: PrecisionContext = _DEFAULT):
    """gamma = epsilon / (1 - q^-2)."""
    with ctx.activate():
        eps = ctx.coerce(epsilon) if not isinstance(epsilon, Fraction) else ctx.scalar(epsilon)
        top = 1 - ctx.scalar(Fraction(1, q * q))
        if eps < 0 or eps > top:
            raise NoiseSpecError(f"epsilon must lie in [0, {float(top):.6g}] for q={q}, got {float(eps):.6g}")
        return eps / top


# ---------------------------------------------------------------------------
# named channels
# ---------------------------------------------------------------------------


def identity_channel(q: int = 2, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    return KrausChannel(q, (_carray(np.eye(q), ctx),))


def weyl_operators(q: int, ctx: PrecisionContext = _DEFAULT) -> list[np.ndarray]:
    """The q^2 clock-and-shift operators X^a Z^b (Pauli group for q=2)."""
    with ctx.activate():
        if ctx.fast:
            omega = [complex(math.cos(2 * math.pi * k / q), math.sin(2 * math.pi * k / q)) for k in range(q)]
        else:
            ang = [2 * ctx.pi * k / q for k in range(q)]
            omega = [gmpy2.mpc(ctx.cos(a), ctx.sin(a)) for a in ang]
        ops = []
        for a in range(q):
            for b in range(q):
                m = [[0] * q for _ in range(q)]
                for j in range(q):
                    m[(j + a) % q][j] = omega[(b * j) % q]
                ops.append(_carray(m, ctx))
        return ops


def depolarizing(p, q: int = 2, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    """rho -> (1-p) rho + p I/q. For q=2: Kraus sqrt(1-3p/4) I and sqrt(p/4) sigma_{x,y,z}."""
    with ctx.activate():
        p = _prob(p, ctx, hi=Fraction(q * q, q * q - 1))
        w0 = ctx.sqrt(1 - p * (q * q - 1) / (q * q))
        w = ctx.sqrt(p / (q * q))
        ops = weyl_operators(q, ctx)
        return KrausChannel(q, tuple([ops[0] * w0] + [k * w for k in ops[1:]]))


def dephasing(p, q: int = 2, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    """rho -> (1-p) rho + p diag(rho)."""
    with ctx.activate():
        p = _prob(p, ctx)
        ops = [_carray(np.eye(q), ctx) * ctx.sqrt(1 - p)]
        for k in range(q):
            proj = np.zeros((q, q))
            proj[k, k] = 1
            ops.append(_carray(proj, ctx) * ctx.sqrt(p))
        return KrausChannel(q, tuple(ops))


def amplitude_damping(eta, q: int = 2, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    """Qubit amplitude damping with decay probability ``eta``."""
    if q != 2:
        raise NoiseSpecError("amplitude damping is defined for q=2 only")
    with ctx.activate():
        eta = _prob(eta, ctx)
        k0 = _carray([[1, 0], [0, ctx.sqrt(1 - eta)]], ctx)
        k1 = _carray([[0, ctx.sqrt(eta)], [0, 0]], ctx)
        return KrausChannel(2, (k0, k1))


def _prob(p, ctx: PrecisionContext, hi=1):
    p = ctx.scalar(p) if not isinstance(p, type(gmpy2.mpfr(0))) else ctx.coerce(p)
    if p < 0 or p > ctx.scalar(hi):
        raise NoiseSpecError(f"probability parameter {float(p):.6g} outside [0, {float(hi):.6g}]")
    return p


def read_kraus_file(path: str | Path, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    """Kraus operators as blocks of q^2 lines ``re im`` (row-major), blocks separated by blank lines."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise NoiseSpecError(f"cannot read Kraus file {path}: {exc}") from exc
    blocks, cur = [], []
    for line in text.splitlines() + [""]:
        s = line.strip()
        if s.startswith("#"):
            continue
        if not s:
            if cur:
                blocks.append(cur)
                cur = []
            continue
        parts = s.split()
        if len(parts) != 2:
            raise NoiseSpecError(f"Kraus file line {line!r} must be 're im'")
        cur.append(parts)
    if not blocks:
        raise NoiseSpecError(f"Kraus file {path} contains no operators")
    n = len(blocks[0])
    q = math.isqrt(n)
    if q * q != n or q < 2 or any(len(b) != n for b in blocks):
        raise NoiseSpecError("every Kraus block must have the same square number (q^2) of lines")
    ops = []
    with ctx.activate():
        for b in blocks:
            try:
                vals = [[ctx.scalar(re), ctx.scalar(im)] for re, im in b]
            except ValueError as exc:
                raise NoiseSpecError(f"bad number in Kraus file: {exc}") from exc
            if ctx.fast:
                arr = np.array([complex(re, im) for re, im in vals]).reshape(q, q)
            else:
                arr = np.array([gmpy2.mpc(re, im) for re, im in vals], dtype=object).reshape(q, q)
            ops.append(arr)
    return KrausChannel(q, tuple(ops))


_LEAKAGE = {"leak", "leakage", "erasure"}


def parse_noise(spec: str, q: int = 2, ctx: PrecisionContext = _DEFAULT) -> KrausChannel:
    """Resolve ``ident``, ``depol:p``, ``dephase:p``, ``ampdamp:eta`` or ``kraus:<file>``."""
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    if name in _LEAKAGE:
        raise OutOfScopeError("leakage channels are not modeled")
    try:
        if name in ("ident", "identity", "none"):
            if arg:
                raise NoiseSpecError("ident takes no argument")
            return identity_channel(q, ctx)
        if not arg:
            raise NoiseSpecError(f"noise {name!r} needs an argument")
        if name == "depol":
            return depolarizing(arg, q, ctx)
        if name == "dephase":
            return dephasing(arg, q, ctx)
        if name == "ampdamp":
            return amplitude_damping(arg, q, ctx)
        if name == "kraus":
            ch = read_kraus_file(arg, ctx)
            if ch.q != q:
                raise NoiseSpecError(f"Kraus file is for q={ch.q}, run uses q={q}")
            return ch
    except ValueError as exc:
        if isinstance(exc, NoiseSpecError):
            raise
        raise NoiseSpecError(f"bad noise parameter in {spec!r}: {exc}") from exc
    raise NoiseSpecError(f"unknown noise channel {spec!r}")


def depolarizing_params(gamma, q: int = 2, ctx: PrecisionContext = _DEFAULT) -> NoiseStatParams:
    """Parameters of the depolarizing channel whose gamma1 equals ``gamma``.

    Used when only an error rate (epsilon N) is given: depolarizing noise of
    strength p has gamma1 = p for every q.
    """
    return stat_params_from_kraus(depolarizing(gamma, q, ctx), ctx)
