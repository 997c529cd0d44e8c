"""Two-qubit gate invariants and their statistical-model parameters.

A fixed two-qubit gate dressed with Haar-random single-qubit gates enters the
two-copy model only through two numbers, alpha (entangling) and beta
(swapping). They follow from the Makhlin invariants |G1| and G2, which are
local invariants of the gate and can be read off either from canonical
(Cartan) angles or from any 4x4 unitary via the magic basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
import numpy as np

from .precision import PrecisionContext

_DEFAULT = PrecisionContext()

# magic (Bell-like) basis, columns scaled by sqrt(2) -- the 1/sqrt(2) is applied on use
_MAGIC = (
    (1, 0, 0, 1j),
    (0, 1j, 1, 0),
    (0, 1j, -1, 0),
    (1, 0, 0, -1j),
)


class GateSpecError(ValueError):
    """Malformed or unsupported gate specification."""


@dataclass(frozen=True)
class CanonicalGate:
    """Canonical angles (c1, c2, c3) of a two-qubit gate, in radians."""

    c1: object
    c2: object
    c3: object
    q: int = 2

    def unitary(self, ctx: PrecisionContext = _DEFAULT) -> np.ndarray:
        """The 4x4 complex matrix of the canonical gate."""
        with ctx.activate():
            c1, c2, c3 = (ctx.coerce(c) for c in (self.c1, self.c2, self.c3))
            cm = (c1 - c2) / 2
            cp = (c1 + c2) / 2
            ph = _cexp(c3, ctx)
            cos_m, sin_m = ctx.cos(cm), ctx.sin(cm)
            cos_p, sin_p = ctx.cos(cp), ctx.sin(cp)
            mi = _cplx(0, -1, ctx)
            z = _cplx(0, 0, ctx)
            u = np.array(
                [
                    [_cplx(cos_m, 0, ctx), z, z, mi * sin_m],
                    [z, cos_p * ph, mi * sin_p * ph, z],
                    [z, mi * sin_p * ph, cos_p * ph, z],
                    [mi * sin_m, z, z, _cplx(cos_m, 0, ctx)],
                ],
                dtype=object if not ctx.fast else complex,
            )
        return u


@dataclass(frozen=True)
class GateInvariants:
    abs_g1: object
    g2: object


@dataclass(frozen=True)
class GateStatParams:
    """Statistical-model gate parameters; ``haar`` marks the Haar-average point."""

    alpha: object
    beta: object
    q: int = 2
    haar: bool = False


@dataclass(frozen=True)
class GaoBasisParams:
    D: object
    R: object
    eta: object


@dataclass(frozen=True)
class RegionClass:
    """Result of :func:`region_check`: ``status`` plus the saturated constraint names."""

    status: str
    active: tuple[str, ...] = ()


def _cplx(re, im, ctx: PrecisionContext):
    if ctx.fast:
        return complex(float(re), float(im))
    with ctx.activate():
        return gmpy2.mpc(ctx.coerce(re), ctx.coerce(im))


def _cexp(theta, ctx: PrecisionContext):
    return _cplx(ctx.cos(theta), ctx.sin(theta), ctx)


def _q2(q: int) -> None:
    if q != 2:
        raise GateSpecError("gate invariants are only defined for qubits (q=2)")


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def invariants_from_canonical(g: CanonicalGate, ctx: PrecisionContext = _DEFAULT) -> GateInvariants:
    _q2(g.q)
    with ctx.activate():
        x, y, z = (ctx.cos(2 * ctx.coerce(c)) for c in (g.c1, g.c2, g.c3))
        abs_g1 = (1 + x * y + y * z + z * x) / 4
        return GateInvariants(abs(abs_g1), x + y + z)


def _det(a: np.ndarray):
    """Determinant by Gaussian elimination with partial pivoting (works on mpc arrays)."""
    a = a.copy()
    n = a.shape[0]
    det = a[0, 0] * 0 + 1
    for k in range(n):
        p = k + max(range(n - k), key=lambda i: abs(a[k + i, k]))
        if a[p, k] == 0:
            return a[0, 0] * 0
        if p != k:
            a[[k, p]] = a[[p, k]]
            det = -det
        det = det * a[k, k]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] = a[i, k:] - f * a[k, k:]
    return det


def check_unitary(u: np.ndarray, ctx: PrecisionContext = _DEFAULT, tol: float = 1e-12) -> None:
    u = np.asarray(u)
    if u.shape != (4, 4):
        raise GateSpecError(f"expected a 4x4 matrix, got shape {u.shape}")
    with ctx.activate():
        g = u.conj().T @ u
        dev = max(abs(g[i, j] - (1 if i == j else 0)) for i in range(4) for j in range(4))
    if dev > tol:
        raise GateSpecError(f"matrix is not unitary (max |U^dag U - I| = {float(dev):.3g})")


def invariants_from_unitary(u: np.ndarray, ctx: PrecisionContext = _DEFAULT) -> GateInvariants:
    """Makhlin invariants via the magic basis.

    With ``U_B = Q^dag U Q`` and ``m = U_B^T U_B``: ``G1 = tr(m)^2 / (16 det U)``
    and ``G2 = (tr(m)^2 - tr(m^2)) / (4 det U)``.
    """
    u = np.asarray(u)
    with ctx.activate():
        if ctx.fast:
            u = u.astype(complex)
        else:
            u = np.array([[_as_mpc(x, ctx) for x in row] for row in u], dtype=object)
        check_unitary(u, ctx)
        half = ctx.sqrt(ctx.scalar(Fraction(1, 2)))
        qm = np.array([[_cplx(v.real, v.imag, ctx) * half for v in row] for row in _MAGIC], dtype=u.dtype)
        ub = qm.conj().T @ u @ qm
        m = ub.T @ ub
        tr = sum((m[i, i] for i in range(4)), _cplx(0, 0, ctx))
        tr2 = sum(((m @ m)[i, i] for i in range(4)), _cplx(0, 0, ctx))
        det = _det(u)
        g1 = tr * tr / (16 * det)
        g2 = (tr * tr - tr2) / (4 * det)
        g2_re = g2.real
        if abs(g2.imag) > 1e-9:
            raise GateSpecError("G2 has a nonzero imaginary part; input is not a valid two-qubit unitary")
        abs_g1 = abs(g1)
        if ctx.fast:
            abs_g1, g2_re = float(abs_g1), float(g2_re)
        else:
            abs_g1 = ctx.coerce(abs_g1)
            g2_re = ctx.coerce(g2_re)
        return GateInvariants(abs_g1, g2_re)


def _as_mpc(x, ctx: PrecisionContext):
    if isinstance(x, type(gmpy2.mpc(0))):
        return gmpy2.mpc(x)
    if isinstance(x, (complex, np.complexfloating)):
        return _cplx(x.real, x.imag, ctx)
    return _cplx(x, 0, ctx)


# ---------------------------------------------------------------------------
# statistical-model parameters
# ---------------------------------------------------------------------------


def haar_params(q: int = 2, ctx: PrecisionContext = _DEFAULT) -> GateStatParams:
    """Haar-average two-qudit gate: (alpha, beta) = (1, 0) for every q."""
    return GateStatParams(ctx.scalar(1), ctx.scalar(0), q, haar=True)


def stat_params_from_invariants(inv: GateInvariants, ctx: PrecisionContext = _DEFAULT) -> GateStatParams:
    with ctx.activate():
        g1 = ctx.coerce(inv.abs_g1)
        g2 = ctx.coerce(inv.g2)
        alpha = 10 * (1 - g1) / 9
        beta = -ctx.scalar(Fraction(1, 18)) - g2 / 6 + 5 * g1 / 9
        return GateStatParams(alpha, beta, 2)


def fsim_invariants(theta, phi, ctx: PrecisionContext = _DEFAULT) -> GateInvariants:
    with ctx.activate():
        c2t, cp = ctx.cos(2 * ctx.coerce(theta)), ctx.cos(ctx.coerce(phi))
        return GateInvariants((1 + c2t * c2t + 2 * c2t * cp) / 4, 2 * c2t + cp)


def fsim_params(theta, phi, ctx: PrecisionContext = _DEFAULT) -> GateStatParams:
    with ctx.activate():
        theta, phi = ctx.coerce(theta), ctx.coerce(phi)
        c4t, c2t, cp = ctx.cos(4 * theta), ctx.cos(2 * theta), ctx.cos(phi)
        alpha = 5 * (5 - c4t - 4 * c2t * cp) / 36
        beta = (11 + 5 * c4t - 24 * c2t + 20 * c2t * cp - 12 * cp) / 72
        return GateStatParams(alpha, beta, 2)


def fsim_unitary(theta, phi, ctx: PrecisionContext = _DEFAULT) -> np.ndarray:
    with ctx.activate():
        theta, phi = ctx.coerce(theta), ctx.coerce(phi)
        c, s = ctx.cos(theta), ctx.sin(theta)
        one, z = _cplx(1, 0, ctx), _cplx(0, 0, ctx)
        rows = [
            [one, z, z, z],
            [z, _cplx(c, 0, ctx), _cplx(0, -s, ctx), z],
            [z, _cplx(0, -s, ctx), _cplx(c, 0, ctx), z],
            [z, z, z, _cexp(-phi, ctx)],
        ]
        return np.array(rows, dtype=complex if ctx.fast else object)


def pe_canonical(phi, ctx: PrecisionContext = _DEFAULT) -> CanonicalGate:
    with ctx.activate():
        phi = ctx.coerce(phi)
        return CanonicalGate(ctx.pi / 2, 2 * phi - ctx.pi / 2, ctx.scalar(0))


def pe_params(phi, ctx: PrecisionContext = _DEFAULT) -> GateStatParams:
    with ctx.activate():
        c4 = ctx.cos(4 * ctx.coerce(phi))
        return GateStatParams(ctx.scalar(Fraction(10, 9)), (3 * c4 - 1) / 18, 2)


def pe_invariants(phi, ctx: PrecisionContext = _DEFAULT) -> GateInvariants:
    with ctx.activate():
        return GateInvariants(ctx.scalar(0), -ctx.cos(4 * ctx.coerce(phi)))


def swap_compose(p: GateStatParams) -> GateStatParams:
    """Parameters of the gate followed by a SWAP: beta -> 1 - alpha - beta."""
    ctx = PrecisionContext.of(p.alpha, p.beta)
    with ctx.activate():
        return GateStatParams(p.alpha, 1 - p.alpha - p.beta, p.q, haar=p.haar)


def entangling_power(p: GateStatParams):
    """e_p = 2(1-|G1|)/9, which equals alpha/5."""
    ctx = PrecisionContext.of(p.alpha)
    with ctx.activate():
        return p.alpha / 5


REGION_CONSTRAINTS = ("alpha_min", "alpha_max", "lower", "upper", "curve")


def region_check(p: GateStatParams, tol: float = 1e-12) -> RegionClass:
    """Classify (alpha, beta) against the single-gate region (q=2).

    Besides the three constraints bounding beta, the entangling-power bound
    0 <= alpha <= 10/9 is evaluated too.
    """
    ctx = PrecisionContext.of(p.alpha, p.beta)
    with ctx.activate():
        a, b = ctx.coerce(p.alpha), ctx.coerce(p.beta)
        # slack >= 0 inside; each is a constraint "expression >= 0"
        slack = {
            "alpha_min": a,
            "alpha_max": ctx.scalar(Fraction(10, 9)) - a,
            "lower": b + a / 5,
            "upper": 1 - 4 * a / 5 - b,
            "curve": (b + a / 2) ** 2 - (b + a / 5),
        }
    if any(s < -tol for s in slack.values()):
        return RegionClass("outside", tuple(k for k in REGION_CONSTRAINTS if slack[k] < -tol))
    active = tuple(k for k in REGION_CONSTRAINTS if abs(slack[k]) <= tol)
    return RegionClass("on_boundary" if active else "interior", active)


def gao_basis(p: GateStatParams) -> GaoBasisParams:
    ctx = PrecisionContext.of(p.alpha, p.beta)
    with ctx.activate():
        q2 = p.q * p.q
        return GaoBasisParams(
            D=p.alpha * q2 / (q2 + 1) + p.beta,
            R=p.alpha * (q2 - 1) / (q2 + 1),
            eta=ctx.scalar(q2 - 1),
        )


def haar_lookalike_gate(ctx: PrecisionContext = _DEFAULT) -> CanonicalGate:
    """A fixed gate whose dressed ensemble has the Haar update rule (alpha, beta) = (1, 0)."""
    with ctx.activate():
        c2 = -ctx.atan(ctx.sqrt(ctx.scalar(Fraction(2, 3)))) / 2
        return CanonicalGate(ctx.pi / 4, c2, ctx.pi / 2 + c2)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateInfo:
    """Everything ``gate-info`` reports for a gate spec."""

    spec: str
    params: GateStatParams
    invariants: GateInvariants | None = None
    canonical: CanonicalGate | None = None


def _parse_angle(text: str, ctx: PrecisionContext):
    text = text.strip()
    try:
        if "pi" in text:
            # small grammar: [k*]pi[/m] with k, m decimal
            num, _, den = text.partition("/")
            coef = num.replace("pi", "").rstrip("*").strip()
            val = ctx.pi * (ctx.scalar(coef) if coef not in ("", "+", "-") else ctx.scalar(-1 if coef == "-" else 1))
            return val / ctx.scalar(den) if den else val
        return ctx.scalar(text)
    except (ValueError, TypeError) as exc:
        raise GateSpecError(f"bad angle {text!r}") from exc


def read_unitary_file(path: str | Path, ctx: PrecisionContext = _DEFAULT) -> np.ndarray:
    """Read 16 lines ``re im`` (row-major) into a 4x4 complex matrix."""
    try:
        lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise GateSpecError(f"cannot read gate file {path}: {exc}") from exc
    if len(lines) != 16 or any(len(ln) != 2 for ln in lines):
        raise GateSpecError(f"gate file {path} must contain 16 lines of 're im'")
    try:
        vals = [_cplx(ctx.scalar(re), ctx.scalar(im), ctx) for re, im in lines]
    except ValueError as exc:
        raise GateSpecError(f"gate file {path}: {exc}") from exc
    return np.array(vals, dtype=complex if ctx.fast else object).reshape(4, 4)


def parse_gate(spec: str, ctx: PrecisionContext = _DEFAULT, q: int = 2) -> GateInfo:
    """Resolve a gate registry string into statistical-model parameters."""
    name, *args = spec.strip().split(":")
    name = name.lower()
    nargs = {"haar": 0, "cnot": 0, "swap": 0, "iswap": 0, "cz": 0, "identity": 0, "fsim": 2, "pe": 1, "canonical": 3, "file": 1}
    if name not in nargs:
        if Path(spec).is_file():
            name, args = "file", [spec]
        else:
            raise GateSpecError(f"unknown gate {spec!r}")
    if name == "file" and len(args) > 1:
        args = [":".join(args)]
    if len(args) != nargs[name]:
        raise GateSpecError(f"gate {name!r} takes {nargs[name]} argument(s), got {len(args)}")
    if name == "haar":
        return GateInfo(spec, haar_params(q, ctx))
    if q != 2:
        raise GateSpecError(f"gate {spec!r} is only defined for q=2 (only 'haar' supports q={q})")
    with ctx.activate():
        half_pi = ctx.pi / 2
        zero = ctx.scalar(0)
        canon = {
            "cnot": CanonicalGate(half_pi, zero, zero),
            "swap": CanonicalGate(half_pi, half_pi, half_pi),
            "iswap": CanonicalGate(half_pi, half_pi, zero),
            "identity": CanonicalGate(zero, zero, zero),
        }
        if name in canon:
            g = canon[name]
            inv = invariants_from_canonical(g, ctx)
            return GateInfo(spec, stat_params_from_invariants(inv, ctx), inv, g)
        if name == "cz":
            return GateInfo(spec, fsim_params(zero, ctx.pi, ctx), fsim_invariants(zero, ctx.pi, ctx))
        if name == "fsim":
            th, ph = (_parse_angle(a, ctx) for a in args)
            return GateInfo(spec, fsim_params(th, ph, ctx), fsim_invariants(th, ph, ctx))
        if name == "pe":
            ph = _parse_angle(args[0], ctx)
            return GateInfo(spec, pe_params(ph, ctx), pe_invariants(ph, ctx), pe_canonical(ph, ctx))
        if name == "canonical":
            g = CanonicalGate(*(_parse_angle(a, ctx) for a in args))
            inv = invariants_from_canonical(g, ctx)
            return GateInfo(spec, stat_params_from_invariants(inv, ctx), inv, g)
        u = read_unitary_file(args[0], ctx)
        inv = invariants_from_unitary(u, ctx)
        return GateInfo(spec, stat_params_from_invariants(inv, ctx), inv)
