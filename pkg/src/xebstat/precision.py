"""Arbitrary-precision scalars and a small dense linear-algebra kernel.

Two numeric modes share one code path:

* ``mantissa_bits == 53``: plain ``float64`` numpy arrays (the fast mode).
* ``mantissa_bits > 53``: numpy ``object`` arrays holding ``gmpy2.mpfr``
  values, all rounded to exactly ``mantissa_bits``.

Every public routine infers the mode from its array arguments, refuses to mix
precisions, and runs inside the matching ``gmpy2`` context.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import gmpy2
import numpy as np
import scipy.linalg

FAST_BITS = 53
DEFAULT_BITS = 256


class NumericError(ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class PrecisionError(NumericError):
    """Raised when values of different precision are combined."""


class EigenConvergenceError(NumericError):
    pass


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision, in binary digits of mantissa."""

    mantissa_bits: int = DEFAULT_BITS

    def __post_init__(self) -> None:
        if not isinstance(self.mantissa_bits, (int, np.integer)) or self.mantissa_bits < FAST_BITS:
            raise ValueError(f"mantissa_bits must be an integer >= {FAST_BITS}, got {self.mantissa_bits!r}")

    @property
    def fast(self) -> bool:
        return self.mantissa_bits == FAST_BITS

    @property
    def eps(self):
        return self.scalar(Fraction(1, 2 ** (self.mantissa_bits - 1)))

    @property
    def dtype(self):
        return np.float64 if self.fast else object

    @property
    def decimal_digits(self) -> int:
        return math.ceil(self.mantissa_bits * math.log10(2)) + 1

    @classmethod
    def of(cls, *arrays) -> "PrecisionContext":
        """Infer the context of one or more arrays or scalars; reject mixtures."""
        bits = None
        for a in arrays:
            b = _bits_of(a)
            if b is None:
                continue
            if bits is not None and b != bits:
                raise PrecisionError(f"mixed precision: {bits} and {b} bits")
            bits = b
        return cls(DEFAULT_BITS if bits is None else bits)

    @contextlib.contextmanager
    def activate(self) -> Iterator["PrecisionContext"]:
        if self.fast:
            yield self
            return
        with gmpy2.context(gmpy2.get_context(), precision=self.mantissa_bits):
            yield self

    # ----- construction -------------------------------------------------
    def scalar(self, x):
        """Round ``x`` (int, float, str, Fraction or same-precision mpfr) into this context."""
        if self.fast:
            if isinstance(x, gmpy2.mpfr(0).__class__) and x.precision != FAST_BITS:
                raise PrecisionError(f"mpfr with {x.precision} bits used in 53-bit context")
            return float(x)
        if isinstance(x, type(gmpy2.mpfr(0))):
            if x.precision != self.mantissa_bits:
                raise PrecisionError(f"mpfr with {x.precision} bits used in {self.mantissa_bits}-bit context")
            return x
        with self.activate():
            if isinstance(x, Fraction):
                return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
            if isinstance(x, (float, np.floating)):
                return gmpy2.mpfr(float(x))
            if isinstance(x, (int, np.integer)):
                return gmpy2.mpfr(int(x))
            return gmpy2.mpfr(x)

    def coerce(self, x):
        """Explicitly re-round any real scalar (including other-precision mpfr)."""
        if self.fast:
            return float(x)
        with self.activate():
            return gmpy2.mpfr(x) if not isinstance(x, Fraction) else self.scalar(x)

    def array(self, values) -> np.ndarray:
        if self.fast:
            out = np.array(values, dtype=np.float64)
        else:
            raw = np.array(values, dtype=object)
            out = np.empty(raw.shape, dtype=object)
            flat_in = raw.reshape(-1)
            flat_out = out.reshape(-1)
            for i, v in enumerate(flat_in):
                flat_out[i] = self.scalar(v)
        if not self.is_finite(out):
            raise ValueError("array entries must be finite")
        return out

    def zeros(self, shape) -> np.ndarray:
        if self.fast:
            return np.zeros(shape, dtype=np.float64)
        z = self.scalar(0)
        out = np.empty(shape, dtype=object)
        out.fill(z)
        return out

    def ones(self, shape) -> np.ndarray:
        if self.fast:
            return np.ones(shape, dtype=np.float64)
        out = np.empty(shape, dtype=object)
        out.fill(self.scalar(1))
        return out

    def eye(self, n: int) -> np.ndarray:
        out = self.zeros((n, n))
        one = self.scalar(1)
        for i in range(n):
            out[i, i] = one
        return out

    def to_float(self, a) -> np.ndarray | float:
        if np.ndim(a) == 0:
            return float(a)
        return np.asarray(a, dtype=object).astype(np.float64) if not self.fast else np.asarray(a, dtype=np.float64)

    def check(self, a) -> None:
        """Raise :class:`PrecisionError` unless every entry of ``a`` belongs to this context."""
        b = _bits_of(a, full=True)
        if b is not None and b != self.mantissa_bits:
            raise PrecisionError(f"expected {self.mantissa_bits}-bit values, got {b}-bit")

    def is_finite(self, a) -> bool:
        if self.fast:
            return bool(np.all(np.isfinite(a)))
        return all(gmpy2.is_finite(v) for v in np.asarray(a, dtype=object).reshape(-1))

    # ----- elementary functions ----------------------------------------
    def _f(self, name, x):
        if self.fast:
            return getattr(math, name)(float(x))
        with self.activate():
            return getattr(gmpy2, name)(self.scalar(x))

    def sqrt(self, x):
        return self._f("sqrt", x)

    def exp(self, x):
        return self._f("exp", x)

    def log(self, x):
        return self._f("log", x)

    def cos(self, x):
        return self._f("cos", x)

    def sin(self, x):
        return self._f("sin", x)

    def atan(self, x):
        return self._f("atan", x)

    @property
    def pi(self):
        if self.fast:
            return math.pi
        with self.activate():
            return gmpy2.const_pi()

    def format(self, x) -> str:
        return format_decimal(x, self.decimal_digits)


_MPFR = type(gmpy2.mpfr(0))
_MPC = type(gmpy2.mpc(0))


def _bits_of(a, full: bool = False):
    """Precision of a scalar/array, ``None`` for plain Python ints or empty input."""
    if isinstance(a, _MPFR):
        return a.precision
    if isinstance(a, _MPC):
        return a.precision[0]
    if isinstance(a, (float, np.floating)):
        return FAST_BITS
    if isinstance(a, np.ndarray):
        if a.dtype != object:
            return FAST_BITS if a.dtype.kind in "fc" else None
        flat = a.reshape(-1)
        if flat.size == 0:
            return None
        items = flat if full else (flat[0], flat[-1])
        bits = None
        for v in items:
            b = _bits_of(v)
            if b is None:
                continue
            if bits is not None and b != bits:
                raise PrecisionError(f"array mixes {bits}-bit and {b}-bit values")
            bits = b
        return bits
    return None


def format_decimal(x, digits: int) -> str:
    """Deterministic scientific notation with ``digits`` significant digits."""
    if isinstance(x, _MPFR):
        if gmpy2.is_nan(x):
            return "nan"
        if gmpy2.is_infinite(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            return "0." + "0" * (digits - 1) + "e+00"
        mant, exp, _ = x.digits(10, digits)
        sign = ""
        if mant.startswith("-"):
            sign, mant = "-", mant[1:]
        return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+03d}"
    return f"{float(x):.{digits - 1}e}"


# ---------------------------------------------------------------------------
# basic products
# ---------------------------------------------------------------------------


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product in the shared precision of ``m`` and ``v``."""
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.ndim != 1:
        raise ValueError("matvec expects a 2-D matrix and a 1-D vector")
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape} @ {v.shape}")
    ctx = PrecisionContext.of(m, v)
    ctx.check(m)
    ctx.check(v)
    with ctx.activate():
        return m @ v


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    ctx = PrecisionContext.of(a, b)
    with ctx.activate():
        return a @ b


def dot(a: np.ndarray, b: np.ndarray):
    ctx = PrecisionContext.of(a, b)
    with ctx.activate():
        return a @ b


def norm_inf(a: np.ndarray):
    """Max-row-sum norm for matrices, max-abs for vectors."""
    a = np.asarray(a)
    if a.ndim == 1:
        return max(abs(x) for x in a) if a.size else 0
    return max(sum(abs(x) for x in row) for row in a)


def _house(x: np.ndarray, ctx: PrecisionContext):
    """Householder vector ``v`` and ``beta`` with ``(I - beta v v^T) x = -sign(x0)|x| e0``."""
    nrm2 = x @ x
    v = x.copy()
    if nrm2 == 0:
        return v, ctx.scalar(0)
    nrm = ctx.sqrt(nrm2)
    alpha = -nrm if x[0] >= 0 else nrm
    v[0] = v[0] - alpha
    vv = v @ v
    if vv == 0:
        return v, ctx.scalar(0)
    return v, 2 / vv


def qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``a = Q R`` with ``diag(R) >= 0``."""
    a = np.asarray(a)
    ctx = PrecisionContext.of(a)
    m, n = a.shape
    k = min(m, n)
    if ctx.fast:
        q, r = np.linalg.qr(a, mode="reduced")
    else:
        with ctx.activate():
            r = a.copy()
            refl = []
            for j in range(k):
                v, beta = _house(r[j:, j].copy(), ctx)
                if beta != 0:
                    r[j:, j:] = r[j:, j:] - beta * np.outer(v, v @ r[j:, j:])
                r[j + 1 :, j] = ctx.scalar(0)
                refl.append((v, beta))
            q = ctx.zeros((m, k))
            one = ctx.scalar(1)
            for j in range(k):
                q[j, j] = one
            for j in reversed(range(k)):
                v, beta = refl[j]
                if beta != 0:
                    q[j:, :] = q[j:, :] - beta * np.outer(v, v @ q[j:, :])
            r = r[:k, :]
    with ctx.activate():
        for j in range(k):
            if r[j, j] < 0:
                r[j, :] = -r[j, :]
                q[:, j] = -q[:, j]
    return q, r


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` by LU with partial pivoting."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError("solve expects a square matrix and a conforming right-hand side")
    ctx = PrecisionContext.of(a, b)
    if ctx.fast:
        return np.linalg.solve(a, b)
    n = a.shape[0]
    with ctx.activate():
        lu = a.copy()
        x = b.copy()
        for k in range(n):
            p = k + max(range(n - k), key=lambda i: abs(lu[k + i, k]))
            if lu[p, k] == 0:
                raise NumericError("singular matrix in solve")
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                x[[k, p]] = x[[p, k]]
            piv = lu[k, k]
            for i in range(k + 1, n):
                f = lu[i, k] / piv
                if f != 0:
                    lu[i, k:] = lu[i, k:] - f * lu[k, k:]
                    x[i] = x[i] - f * x[k]
        for k in reversed(range(n)):
            if k + 1 < n:
                x[k] = x[k] - lu[k, k + 1 :] @ x[k + 1 :]
            x[k] = x[k] / lu[k, k]
    return x


# ---------------------------------------------------------------------------
# nonsymmetric eigensolver
# ---------------------------------------------------------------------------


@dataclass
class EigenDecomposition:
    """Leading eigenpairs of a real square matrix.

    ``eigenvalues`` holds real parts; ``imag`` the imaginary parts, with
    ``is_complex`` flagging members of complex-conjugate pairs (their vector
    slots are ``None``). Right vectors have unit 2-norm and a positive first
    nonzero component; left vectors are scaled so that ``w . v = 1``.
    """

    eigenvalues: list
    imag: list
    is_complex: list[bool]
    right_vectors: list
    left_vectors: list
    mantissa_bits: int = DEFAULT_BITS
    all_eigenvalues: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def real_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.is_complex) if not c]


class _Hessenberg:
    """Householder reduction ``H = Q^T A Q`` keeping the reflectors."""

    def __init__(self, a: np.ndarray, ctx: PrecisionContext):
        self.ctx = ctx
        n = a.shape[0]
        self.n = n
        if ctx.fast:
            h, q = scipy.linalg.hessenberg(a, calc_q=True)
            self.h = h
            self._q = q
            self.reflectors = None
            return
        h = a.copy()
        refl = []
        zero = ctx.scalar(0)
        for k in range(n - 2):
            v, beta = _house(h[k + 1 :, k].copy(), ctx)
            if beta != 0:
                h[k + 1 :, k:] = h[k + 1 :, k:] - beta * np.outer(v, v @ h[k + 1 :, k:])
                h[:, k + 1 :] = h[:, k + 1 :] - beta * np.outer(h[:, k + 1 :] @ v, v)
            h[k + 2 :, k] = zero
            refl.append((k, v, beta))
        self.h = h
        self.reflectors = refl
        self._q = None

    def apply_q(self, y: np.ndarray) -> np.ndarray:
        if self._q is not None:
            return self._q @ y
        x = y.copy()
        for k, v, beta in reversed(self.reflectors):
            if beta != 0:
                x[k + 1 :] = x[k + 1 :] - beta * v * (v @ x[k + 1 :])
        return x


def _eig2(a, b, c, d, ctx):
    """Eigenvalues of [[a, b], [c, d]] as ((re, im), (re, im))."""
    half_tr = (a + d) / 2
    p = (a - d) / 2
    disc = p * p + b * c
    if disc >= 0:
        r = ctx.sqrt(disc)
        l1 = half_tr + r if p >= 0 else half_tr - r
        det = a * d - b * c
        l2 = det / l1 if l1 != 0 else half_tr - (r if p >= 0 else -r)
        return (l1, ctx.scalar(0)), (l2, ctx.scalar(0))
    r = ctx.sqrt(-disc)
    return (half_tr, r), (half_tr, -r)


def _francis_step(b: np.ndarray, ctx: PrecisionContext, exceptional: bool) -> None:
    """One implicit double-shift QR sweep on the unreduced Hessenberg block ``b`` (in place)."""
    m = b.shape[0]
    zero = ctx.scalar(0)
    if exceptional:
        w = abs(b[m - 1, m - 2]) + abs(b[m - 2, m - 3])
        s = ctx.scalar(Fraction(3, 2)) * w + b[m - 1, m - 1]
        t = w * w
    else:
        s = b[m - 2, m - 2] + b[m - 1, m - 1]
        t = b[m - 2, m - 2] * b[m - 1, m - 1] - b[m - 2, m - 1] * b[m - 1, m - 2]
    x = b[0, 0] * b[0, 0] + b[0, 1] * b[1, 0] - s * b[0, 0] + t
    y = b[1, 0] * (b[0, 0] + b[1, 1] - s)
    z = b[1, 0] * b[2, 1]
    for k in range(m - 2):
        v, beta = _house(np.array([x, y, z], dtype=b.dtype), ctx)
        q = max(0, k - 1)
        if beta != 0:
            b[k : k + 3, q:] = b[k : k + 3, q:] - beta * np.outer(v, v @ b[k : k + 3, q:])
            r = min(k + 4, m)
            b[:r, k : k + 3] = b[:r, k : k + 3] - beta * np.outer(b[:r, k : k + 3] @ v, v)
        if k > 0:
            b[k + 1, k - 1] = zero
            b[k + 2, k - 1] = zero
        x = b[k + 1, k]
        y = b[k + 2, k]
        if k < m - 3:
            z = b[k + 3, k]
    v, beta = _house(np.array([x, y], dtype=b.dtype), ctx)
    if beta != 0:
        b[m - 2 :, m - 3 :] = b[m - 2 :, m - 3 :] - beta * np.outer(v, v @ b[m - 2 :, m - 3 :])
        b[:, m - 2 :] = b[:, m - 2 :] - beta * np.outer(b[:, m - 2 :] @ v, v)
    b[m - 1, m - 3] = zero


def _hqr(h: np.ndarray, ctx: PrecisionContext, max_iter_per_eig: int = 60) -> list[tuple]:
    """All eigenvalues of an upper Hessenberg matrix as (re, im) pairs."""
    h = h.copy()
    n = h.shape[0]
    eps = ctx.eps
    zero = ctx.scalar(0)
    hnorm = max((abs(x) for x in h.reshape(-1)), default=zero)
    if hnorm == 0:
        return [(zero, zero)] * n
    out: list[tuple | None] = [None] * n
    hi = n - 1
    its = 0
    while hi >= 0:
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if s == 0:
                s = hnorm
            if abs(h[lo, lo - 1]) <= eps * s:
                h[lo, lo - 1] = zero
                break
            lo -= 1
        if lo == hi:
            out[hi] = (h[hi, hi], zero)
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            e1, e2 = _eig2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi], ctx)
            out[hi - 1], out[hi] = e1, e2
            hi -= 2
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise EigenConvergenceError(f"QR iteration did not converge for block [{lo}, {hi}]")
        block = h[lo : hi + 1, lo : hi + 1].copy()
        _francis_step(block, ctx, exceptional=(its % 11 == 10))
        h[lo : hi + 1, lo : hi + 1] = block
    return out  # type: ignore[return-value]


class _HessLU:
    """LU of an upper Hessenberg ``H - lam I`` with adjacent-row pivoting."""

    def __init__(self, h: np.ndarray, lam, ctx: PrecisionContext, tiny):
        n = h.shape[0]
        u = h.copy()
        for i in range(n):
            u[i, i] = u[i, i] - lam
        swaps = []
        mults = []
        for k in range(n - 1):
            swap = abs(u[k + 1, k]) > abs(u[k, k])
            if swap:
                u[[k, k + 1], k:] = u[[k + 1, k], k:]
            piv = u[k, k]
            if piv == 0:
                piv = tiny
                u[k, k] = piv
            f = u[k + 1, k] / piv
            if f != 0:
                u[k + 1, k:] = u[k + 1, k:] - f * u[k, k:]
            swaps.append(swap)
            mults.append(f)
        if u[n - 1, n - 1] == 0:
            u[n - 1, n - 1] = tiny
        for k in range(n):
            if abs(u[k, k]) < tiny:
                u[k, k] = tiny if u[k, k] >= 0 else -tiny
        self.u, self.swaps, self.mults, self.n = u, swaps, mults, n

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = b.copy()
        for k in range(self.n - 1):
            if self.swaps[k]:
                x[k], x[k + 1] = x[k + 1], x[k]
            x[k + 1] = x[k + 1] - self.mults[k] * x[k]
        u = self.u
        for k in reversed(range(self.n)):
            if k + 1 < self.n:
                x[k] = x[k] - u[k, k + 1 :] @ x[k + 1 :]
            x[k] = x[k] / u[k, k]
        return x

    def solve_transposed(self, c: np.ndarray) -> np.ndarray:
        u = self.u
        z = c.copy()
        for k in range(self.n):
            if k > 0:
                z[k] = z[k] - u[:k, k] @ z[:k]
            z[k] = z[k] / u[k, k]
        for k in reversed(range(self.n - 1)):
            z[k] = z[k] - self.mults[k] * z[k + 1]
            if self.swaps[k]:
                z[k], z[k + 1] = z[k + 1], z[k]
        return z


def _start_vectors(n: int, count: int, ctx: PrecisionContext) -> list[np.ndarray]:
    # fixed, RNG-free, linearly independent start vectors
    out = []
    for j in range(count):
        out.append(ctx.array([Fraction(1, 1 + ((i * (2 * j + 3) + j) % (n + 7))) for i in range(n)]))
    return out


def _normalize(v: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    nrm = ctx.sqrt(v @ v)
    return v / nrm


def _inverse_iteration(lu: _HessLU, start: np.ndarray, ctx, transposed: bool, steps: int = 3):
    x = _normalize(start, ctx)
    for _ in range(steps):
        y = lu.solve_transposed(x) if transposed else lu.solve(x)
        x = _normalize(y, ctx)
    return x


def _column_echelon(v: np.ndarray, ctx: PrecisionContext, tol) -> np.ndarray:
    """Canonical basis of span(columns of v): reduced column-echelon form by first pivot rows."""
    v = v.copy()
    n, m = v.shape
    col = 0
    for row in range(n):
        if col == m:
            break
        scale = max(abs(x) for x in v[row, col:])
        if scale <= tol:
            continue
        p = col + max(range(m - col), key=lambda j: abs(v[row, col + j]))
        if p != col:
            v[:, [col, p]] = v[:, [p, col]]
        v[:, col] = v[:, col] / v[row, col]
        for j in range(m):
            if j != col and v[row, j] != 0:
                v[:, j] = v[:, j] - v[row, j] * v[:, col]
        col += 1
    if col < m:
        raise EigenConvergenceError("defective eigenvalue cluster (eigenvectors are not independent)")
    return v


def _canonical_sign(v: np.ndarray, tol) -> np.ndarray:
    for x in v:
        if abs(x) > tol:
            return -v if x < 0 else v
    return v


def eig_dense(m: np.ndarray, k: int | None = None, *, check: bool = True) -> EigenDecomposition:
    """Leading ``k`` eigenpairs of a real square matrix, sorted by descending modulus.

    Hessenberg reduction followed by implicit double-shift QR for the
    eigenvalues; right and left vectors by inverse iteration on the Hessenberg
    form. Degenerate real clusters get a canonical (column-echelon) right basis
    and a biorthogonal left basis. In 53-bit mode the Hessenberg form and the
    eigenvalues come from LAPACK.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("eig_dense expects a square matrix")
    n = m.shape[0]
    k = n if k is None else k
    if not 0 < k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    ctx = PrecisionContext.of(m)
    ctx.check(m)
    with ctx.activate():
        hess = _Hessenberg(m, ctx)
        if ctx.fast:
            raw = scipy.linalg.eigvals(hess.h)
            vals = [(float(z.real), float(z.imag)) for z in raw]
        else:
            vals = _hqr(hess.h, ctx)
        mnorm = norm_inf(m)
        scale = mnorm if mnorm != 0 else ctx.scalar(1)
        half_eps = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits // 2)))
        cluster_tol = half_eps * scale * 16
        zero = ctx.scalar(0)
        # snap tiny imaginary parts (LAPACK noise) to real
        vals = [(re, im if abs(im) > cluster_tol else zero) for re, im in vals]
        mods = [ctx.sqrt(re * re + im * im) if im != 0 else abs(re) for re, im in vals]
        order = sorted(range(n), key=lambda i: (-mods[i], -vals[i][0], -vals[i][1]))
        vals = [vals[i] for i in order]

        # group real eigenvalues into clusters of (numerically) equal values
        groups: list[list[int]] = []
        for i, (re, im) in enumerate(vals):
            if im == 0 and groups:
                j0 = groups[-1][0]
                if vals[j0][1] == 0 and abs(vals[j0][0] - re) <= cluster_tol:
                    groups[-1].append(i)
                    continue
            groups.append([i])

        eigenvalues, imag, flags, rights, lefts = [], [], [], [], []
        tiny = ctx.eps * scale
        vec_tol = half_eps
        for g in groups:
            if len(eigenvalues) >= k:
                break
            re, im = vals[g[0]]
            if im != 0:
                for i in g:
                    eigenvalues.append(vals[i][0])
                    imag.append(vals[i][1])
                    flags.append(True)
                    rights.append(None)
                    lefts.append(None)
                continue
            lam = sum((vals[i][0] for i in g), zero) / len(g)
            lu = _HessLU(hess.h, lam, ctx, tiny)
            starts = _start_vectors(n, len(g), ctx)
            ys = [_inverse_iteration(lu, s, ctx, transposed=False) for s in starts]
            zs = [_inverse_iteration(lu, s, ctx, transposed=True) for s in starts]
            v = np.empty((n, len(g)), dtype=m.dtype)
            w = np.empty((n, len(g)), dtype=m.dtype)
            for j in range(len(g)):
                v[:, j] = hess.apply_q(ys[j])
                w[:, j] = hess.apply_q(zs[j])
            if len(g) > 1:
                v = _column_echelon(v, ctx, vec_tol * max(abs(x) for x in v.reshape(-1)))
            for j in range(len(g)):
                col = _canonical_sign(_normalize(v[:, j], ctx), vec_tol)
                v[:, j] = col
            gram = v.T @ w
            w = w @ np.linalg.inv(gram) if ctx.fast else _right_divide(w, gram, ctx)
            for j, i in enumerate(g):
                eigenvalues.append(vals[i][0])
                imag.append(zero)
                flags.append(False)
                rights.append(v[:, j].copy())
                lefts.append(w[:, j].copy())
        eigenvalues, imag, flags = eigenvalues[:k], imag[:k], flags[:k]
        rights, lefts = rights[:k], lefts[:k]
        result = EigenDecomposition(
            eigenvalues, imag, flags, rights, lefts, ctx.mantissa_bits, all_eigenvalues=vals
        )
        if check:
            _check_residuals(m, result, ctx, scale)
    return result


def _right_divide(w: np.ndarray, g: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """``w @ inv(g)`` via solves against ``g^T``."""
    return solve(g.T, w.T).T


def _check_residuals(m, dec: EigenDecomposition, ctx, scale) -> None:
    tol = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits // 2))) * scale
    for lam, v, w in zip(dec.eigenvalues, dec.right_vectors, dec.left_vectors):
        if v is None:
            continue
        rv = norm_inf(m @ v - lam * v)
        lw = norm_inf(w @ m - lam * w) / max(norm_inf(w), ctx.scalar(1))
        if rv > tol or lw > tol:
            raise EigenConvergenceError(
                f"eigenpair residual too large for eigenvalue {float(lam):.6g}: right {float(rv):.3g}, left {float(lw):.3g}"
            )


# ---------------------------------------------------------------------------
# singular value decomposition
# ---------------------------------------------------------------------------


def _jacobi_columns(bt: np.ndarray, vt: np.ndarray, ctx: PrecisionContext, max_sweeps: int = 60) -> None:
    """One-sided (Hestenes) Jacobi: orthogonalize the rows of ``bt`` in place, rotating ``vt`` alongside."""
    n = bt.shape[0]
    tol = ctx.scalar(Fraction(1, 2 ** (ctx.mantissa_bits - 6)))
    one = ctx.scalar(1)
    for _ in range(max_sweeps):
        norms = [bt[i] @ bt[i] for i in range(n)]
        # columns at the rounding floor of the largest one are numerically zero
        floor = max(norms) * tol * tol if n else 0
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                a, b = norms[i], norms[j]
                if a <= floor or b <= floor:
                    continue
                g = bt[i] @ bt[j]
                if g == 0 or g * g <= tol * tol * a * b:
                    continue
                rotated = True
                zeta = (b - a) / (2 * g)
                t = one / (abs(zeta) + ctx.sqrt(one + zeta * zeta))
                if zeta < 0:
                    t = -t
                c = one / ctx.sqrt(one + t * t)
                s = c * t
                bi, bj = bt[i].copy(), bt[j]
                bt[i] = c * bi - s * bj
                bt[j] = s * bi + c * bj
                vi, vj = vt[i].copy(), vt[j]
                vt[i] = c * vi - s * vj
                vt[j] = s * vi + c * vj
                norms[i] = a - t * g
                norms[j] = b + t * g
        if not rotated:
            return
    raise NumericError("one-sided Jacobi SVD did not converge")


def svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``m = U diag(S) V^T``; singular values nonnegative and descending.

    Above 53 bits this is a one-sided Jacobi iteration, preconditioned by the
    right singular vectors of the float64 copy (re-orthonormalized at full
    precision, so the final factors stay orthogonal to working precision).
    """
    m = np.asarray(m)
    ctx = PrecisionContext.of(m)
    if m.ndim != 2:
        raise ValueError("svd expects a matrix")
    rows, cols = m.shape
    if ctx.fast:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        return u, s, vt.T
    if rows < cols:
        u, s, v = svd(m.T)
        return v, s, u
    ctx.check(m)
    with ctx.activate():
        fm = m.astype(np.float64)
        if np.all(np.isfinite(fm)) and np.any(fm):
            _, _, vt0 = np.linalg.svd(fm, full_matrices=True)
            q, _ = qr(ctx.array(vt0.T))
        else:
            q = ctx.eye(cols)
        bt = (m @ q).T.copy()
        vt = q.T.copy()
        _jacobi_columns(bt, vt, ctx)
        sig = [ctx.sqrt(bt[i] @ bt[i]) for i in range(cols)]
        # values at the rounding floor carry no direction; complete them instead
        floor = max(sig) * ctx.eps * cols
        sig = [x if x > floor else ctx.scalar(0) for x in sig]
        order = sorted(range(cols), key=lambda i: -sig[i])
        s = np.array([sig[i] for i in order], dtype=object)
        u = ctx.zeros((rows, cols))
        v = ctx.zeros((cols, cols))
        for new, old in enumerate(order):
            v[:, new] = vt[old]
            if sig[old] != 0:
                u[:, new] = bt[old] / sig[old]
        _complete_orthonormal(u, s, ctx)
    return u, s, v


def _complete_orthonormal(u: np.ndarray, s: np.ndarray, ctx: PrecisionContext) -> None:
    """Fill columns of ``u`` that belong to zero singular values with orthonormal completions."""
    rows, cols = u.shape
    filled = [j for j in range(cols) if s[j] != 0]
    for j in range(cols):
        if s[j] != 0:
            continue
        for e in range(rows):
            cand = ctx.zeros(rows)
            cand[e] = ctx.scalar(1)
            for _ in range(2):
                for f in filled:
                    cand = cand - (u[:, f] @ cand) * u[:, f]
            nrm = ctx.sqrt(cand @ cand)
            if nrm > ctx.scalar(Fraction(1, 4)):
                u[:, j] = cand / nrm
                filled.append(j)
                break


def svd_truncate(m: np.ndarray, budget) -> tuple[np.ndarray, np.ndarray, np.ndarray, object]:
    """Lowest-rank SVD factorization whose discarded squared singular values sum to ``<= budget``.

    Returns ``(U, S, V, discarded_weight)`` with ``m ~= U diag(S) V^T``. At
    least one singular triple is always kept.
    """
    if budget < 0:
        raise ValueError("truncation budget must be nonnegative")
    u, s, v = svd(m)
    ctx = PrecisionContext.of(np.asarray(m))
    with ctx.activate():
        budget = ctx.coerce(budget)
        tail = ctx.scalar(0)
        rank = len(s)
        # drop from the smallest singular value upward while the tail fits
        while rank > 1:
            cand = tail + s[rank - 1] * s[rank - 1]
            if cand > budget:
                break
            tail = cand
            rank -= 1
    return u[:, :rank], s[:rank], v[:, :rank], tail


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------


def linear_fit(xs: Sequence, ys: Sequence) -> tuple:
    """Ordinary least-squares line through ``(xs, ys)``; returns ``(slope, intercept)``."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have equal length")
    xs_a = np.asarray(xs)
    ys_a = np.asarray(ys)
    ctx = PrecisionContext.of(xs_a, ys_a)
    with ctx.activate():
        xs_a = ctx.array(list(xs))
        ys_a = ctx.array(list(ys))
        if len(xs_a) < 2:
            raise ValueError("linear_fit needs at least two points")
        n = len(xs_a)
        xbar = sum(xs_a, ctx.scalar(0)) / n
        ybar = sum(ys_a, ctx.scalar(0)) / n
        dx = xs_a - xbar
        sxx = dx @ dx
        if sxx == 0:
            raise ValueError("linear_fit needs at least two distinct x values")
        slope = (dx @ (ys_a - ybar)) / sxx
        intercept = ybar - slope * xbar
    return slope, intercept
