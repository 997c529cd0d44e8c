"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure (including a
failed oracle check), 4 out-of-scope request.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import alltoall, krylov, model, mps
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .gates import GateSpecError, gao_basis, parse_gate, region_check
from .model import ModelError, ModelParams
from .noise import (
    NoiseSpecError,
    OutOfScopeError,
    depolarizing_params,
    gamma_from_epsilon,
    parse_noise,
    stat_params_from_kraus,
)
from .precision import NumericError, PrecisionContext, format_decimal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SCOPE = 0, 2, 3, 4

SUBCOMMANDS = ("gate-info", "noise-info", "evolve", "spectrum", "critical", "oracle-check", "sweep")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _cell(x, digits: int) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (str, int, np.integer)):
        return str(x)
    return format_decimal(x, digits)


def render_table(cfg: RunConfig, command: str, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    digits = cfg.context().decimal_digits
    cells = [[_cell(x, digits) for x in row] for row in rows]
    if cfg.format == "json":
        doc = {
            "command": command,
            "config_sha256": cfg.digest(),
            "precision_bits": cfg.bits,
            "columns": list(columns),
            "rows": cells,
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# command={command} config_sha256={cfg.digest()} precision_bits={cfg.bits}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(cells)
    return buf.getvalue()


def render_object(cfg: RunConfig, command: str, obj: dict) -> str:
    digits = cfg.context().decimal_digits
    doc = {"command": command, "config_sha256": cfg.digest(), "precision_bits": cfg.bits}
    for k, v in obj.items():
        if isinstance(v, (bool, np.bool_)):
            doc[k] = bool(v)
        elif isinstance(v, (dict, list)) or v is None:
            doc[k] = v
        else:
            doc[k] = _cell(v, digits)
    return json.dumps(doc, indent=2) + "\n"


def emit(cfg: RunConfig, text: str) -> None:
    if cfg.out in ("", "-"):
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------


def model_setup(cfg: RunConfig, ctx: PrecisionContext):
    """ModelParams, the two-copy noise matrix and the noise summary for a run."""
    q, n = cfg.qudit_dim, cfg.sites
    gate = parse_gate(cfg.gate, ctx, q).params
    with ctx.activate():
        if cfg.noise:
            ns = stat_params_from_kraus(parse_noise(cfg.noise, q, ctx), ctx)
        else:
            eps = ctx.coerce(cfg.eps_n or "0") / n
            ns = depolarizing_params(gamma_from_epsilon(eps, q, ctx), q, ctx)
        _, n2 = model.noise_matrices(ns, ctx)
        model.check_noise_matrix(n2)
        p = ModelParams.build(gate, ns.gamma1, ctx, q)
    return p, n2, ns


def _trunc(cfg: RunConfig, ctx: PrecisionContext):
    return ctx.coerce(cfg.trunc) if cfg.trunc else mps.DEFAULT_TRUNC[ctx.fast]


def _krylov_cfg(cfg: RunConfig, ctx: PrecisionContext) -> krylov.KrylovConfig:
    return krylov.KrylovConfig(
        subspace_dim=cfg.krylov_dim,
        trunc=float(cfg.trunc) if cfg.trunc else None,
        max_bond=cfg.bond_cap,
        residual_tol=1e-8 if not ctx.fast else 1e-7,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gate_info(cfg: RunConfig) -> str:
    ctx = cfg.context()
    info = parse_gate(cfg.gate, ctx, cfg.qudit_dim)
    p = info.params
    out: dict = {"gate": cfg.gate}
    if info.canonical is not None:
        c = info.canonical
        out["c_angles"] = [_cell(x, ctx.decimal_digits) for x in (c.c1, c.c2, c.c3)]
    inv = info.invariants
    out["abs_G1"] = inv.abs_g1 if inv is not None else None
    out["G2"] = inv.g2 if inv is not None else None
    gb = gao_basis(p)
    out.update(alpha=p.alpha, beta=p.beta, D=gb.D, R=gb.R, eta=gb.eta)
    if p.q == 2:
        reg = region_check(p)
        out["region"] = {"status": reg.status, "active": list(reg.active)}
    return render_object(cfg, "gate-info", out)


def cmd_noise_info(cfg: RunConfig) -> str:
    ctx = cfg.context()
    ns = stat_params_from_kraus(parse_noise(cfg.noise or "ident", cfg.qudit_dim, ctx), ctx)
    out = {k: getattr(ns, k) for k in ("r", "u", "mu", "y1", "y2", "gamma1", "gamma2", "delta2", "epsilon")}
    out["unital"] = ns.unital
    return render_object(cfg, "noise-info", out)


EVOLVE_COLUMNS = ["d", "F", "chi", "chi_B", "Z", "f", "dlnchi"]


def run_evolve(cfg: RunConfig, ctx: PrecisionContext) -> model.DecayTrace:
    p, n2, _ = model_setup(cfg, ctx)
    if cfg.geometry == "a2a":
        return alltoall.evolve(cfg.sites, p, cfg.depth, z_noise=n2)
    return mps.evolve_1d(cfg.sites, p, cfg.depth, z_noise=n2, trunc=_trunc(cfg, ctx), max_bond=cfg.bond_cap)


def cmd_evolve(cfg: RunConfig) -> str:
    ctx = cfg.context()
    tr = run_evolve(cfg, ctx)
    cols = list(EVOLVE_COLUMNS)
    rows = []
    for d in tr.depths:
        row = [d, tr.F[d], tr.chi[d], tr.chi_B[d], tr.Z[d], tr.f[d], tr.dlnchi[d]]
        if cfg.geometry == "1d":
            row.append(tr.discarded[d])
        rows.append(row)
    if cfg.geometry == "1d":
        cols.append("discarded")
    return render_table(cfg, "evolve", cols, rows)


def cmd_spectrum(cfg: RunConfig) -> str:
    ctx = cfg.context()
    p, _, _ = model_setup(cfg, ctx)
    n, q = cfg.sites, cfg.qudit_dim
    if cfg.geometry == "a2a":
        spec = alltoall.reduced_spectrum(alltoall.reduced_transfer(n, p), min(cfg.k, n + 1))
        rows = [
            [i, lam, im, lab, cf, cc]
            for i, (lam, im, lab, cf, cc) in enumerate(zip(spec.eigenvalues, spec.imag, spec.labels, spec.c_F, spec.c_chi))
        ]
        return render_table(cfg, "spectrum", ["index", "Lambda", "Lambda_imag", "sector_label", "c_F", "c_chi"], rows)
    cols = ["index", "Lambda", "Lambda_imag", "Lambda_layer", "sector_label", "c_F", "c_chi"]
    if n <= model.DENSE_ORACLE_LIMIT:
        spec = model.dense_spectrum_and_couplings(krylov.dense_period_matrix(n, p), n, q, min(cfg.k, 2**n))
        with ctx.activate():
            rows = [
                [i, lam, im, ctx.sqrt(ctx.sqrt(lam * lam + im * im)), lab, cf, cc]
                for i, (lam, im, lab, cf, cc) in enumerate(zip(spec.eigenvalues, spec.imag, spec.labels, spec.c_F, spec.c_chi))
            ]
        return render_table(cfg, "spectrum", cols, rows)
    res = krylov.krylov_leading_eigs(n, p, _krylov_cfg(cfg, ctx))
    rows = []
    for i, ((re, im), lay) in enumerate(zip(res.per_period[: cfg.k], res.per_layer)):
        rows.append([i, re, im, lay, "vacuum" if i < 2 else "ritz", None, None])
    return render_table(cfg, "spectrum", cols, rows)


def _default_grid(line: str, ctx: PrecisionContext) -> list:
    with ctx.activate():
        if line == "pe":
            lo, hi = ctx.scalar(-2) / 9, ctx.scalar(1) / 9
        else:
            lo, hi = ctx.scalar(1) / 9, ctx.scalar(10) / 9
        return [lo + (hi - lo) * i / 4 for i in range(5)]


def cmd_critical(cfg: RunConfig) -> str:
    ctx = cfg.context()
    q, n = cfg.qudit_dim, cfg.sites
    cols = ["alpha", "beta", "lambda_g", "epsN_c", "method"]
    rows = []
    if cfg.line == "haar":
        g = parse_gate(cfg.gate, ctx, q).params
        points = [(ctx.coerce(g.alpha), ctx.coerce(g.beta))]
    else:
        grid = [ctx.coerce(x) for x in cfg.grid_values()] or _default_grid(cfg.line, ctx)
        line = "upper" if cfg.line == "analytic" else cfg.line
        points = [krylov.line_point(line, t, ctx) for t in grid]
    with ctx.activate():
        for a, b in points:
            if cfg.geometry == "a2a":
                if cfg.line in ("analytic", "haar"):
                    lam, method = alltoall.predicted_gap(a, q, ctx), "analytic"
                else:
                    lam, method = alltoall.gap_extrapolation(a, q, (20, 40, 60, 80, 100), ctx).intercept, "extrapolated"
            else:
                try:
                    res = krylov.krylov_leading_eigs(n, ModelParams(q, a, b, ctx.scalar(0), ctx), _krylov_cfg(cfg, ctx))
                    lam, method = res.gap_per_layer, "krylov"
                except NumericError as exc:
                    rows.append([a, b, None, None, f"failed: {exc}"])
                    continue
            rows.append([a, b, lam, -ctx.log(lam) if lam > 0 else None, method])
    return render_table(cfg, "critical", cols, rows)


def cmd_sweep(cfg: RunConfig) -> str:
    ctx = cfg.context()
    grid = cfg.grid_values()
    if not grid:
        raise ConfigError("sweep needs a grid of eps_n values (--grid 0.2,0.4,...)")
    cols = ["eps_n", "lambda_1", "lambda_g", "lambda_v", "white_noise", "dlnchi_plateau"]
    rows = []
    alpha = parse_gate(cfg.gate, ctx, cfg.qudit_dim).params.alpha
    for x in grid:
        sub = replace(cfg, noise="", eps_n=x)
        tr = run_evolve(sub, ctx)
        plateau = tr.plateau()
        with ctx.activate():
            white = (1 - ctx.coerce(x) / cfg.sites) ** cfg.sites
            if cfg.geometry == "a2a":
                br = alltoall.spectral_branches(cfg.sites, cfg.qudit_dim, alpha, x, ctx, k=cfg.k)
                rows.append([ctx.coerce(x), br.lambda_1, br.lambda_g, br.lambda_v, white, plateau])
            else:
                rows.append([ctx.coerce(x), None, None, None, white, plateau])
    return render_table(cfg, "sweep", cols, rows)


def _max_dev(a: Sequence, b: Sequence, ctx: PrecisionContext):
    with ctx.activate():
        return max((abs(x - y) for x, y in zip(a, b)), default=ctx.scalar(0))


def oracle_checks(cfg: RunConfig) -> list[tuple[str, object, float]]:
    """(name, max deviation, tolerance) triples for the configured system (N <= 10)."""
    ctx = cfg.context()
    n = cfg.sites
    if n > model.DENSE_ORACLE_LIMIT:
        raise ConfigError(f"oracle-check needs sites <= {model.DENSE_ORACLE_LIMIT}")
    p, n2, _ = model_setup(cfg, ctx)
    depth = min(cfg.depth, 20)
    fast = ctx.fast
    out = []
    keys = ("F", "chi", "chi_B", "Z", "f", "trace")
    with ctx.activate():
        if cfg.geometry == "a2a":
            red = alltoall.reduced_transfer(n, p).T_red
            dense = model.project_to_sectors(model.dense_a2a_transfer(n, p), n)
            out.append(("a2a_transfer", np.max(np.abs(red - dense)), 1e-12 if fast else 1e-25))
            tr_r = alltoall.evolve(n, p, depth, z_noise=n2)
            tr_d = model.dense_evolve(n, p, depth, z_noise=n2, layer_matrix=model.dense_a2a_transfer(n, p))
            dev = max(_max_dev(getattr(tr_r, k), getattr(tr_d, k), ctx) for k in keys)
            out.append(("a2a_observables", dev, 1e-12 if fast else 1e-25))
            ref = alltoall.evolve(n, p.with_gamma(0), depth)
        else:
            pr = [model.brickwork_pairing(n, 0), model.brickwork_pairing(n, 1)]
            tr_m = mps.evolve_1d(n, p, depth, z_noise=n2, trunc=_trunc(cfg, ctx), max_bond=cfg.bond_cap)
            tr_d = model.dense_evolve(n, p, depth, pairings=pr, z_noise=n2)
            dev = max(_max_dev(getattr(tr_m, k), getattr(tr_d, k), ctx) for k in keys)
            out.append(("mps_vs_dense", dev, 1e-8 if fast else 1e-12))
            ref = mps.evolve_1d(n, p.with_gamma(0), depth, trunc=_trunc(cfg, ctx), max_bond=cfg.bond_cap)
        drift = max(abs(f - 1) for f in ref.F)
        out.append(("gamma0_F_drift", drift, 1e-12 if fast else 1e-30))
    return out


def cmd_oracle_check(cfg: RunConfig) -> tuple[str, bool]:
    checks = oracle_checks(cfg)
    rows = [[name, dev, f"{tol:g}", bool(dev <= tol)] for name, dev, tol in checks]
    ok = all(r[3] for r in rows)
    return render_table(cfg, "oracle-check", ["check", "max_deviation", "tolerance", "pass"], rows), ok


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xebstat", description="Two-copy statistical model of noisy random circuits.")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key = value configuration file; flags override it")
    ap.add_argument("--geometry", choices=("a2a", "1d"))
    ap.add_argument("--sites", type=int)
    ap.add_argument("--qudit-dim", type=int)
    ap.add_argument("--gate")
    ap.add_argument("--noise")
    ap.add_argument("--eps-n")
    ap.add_argument("--depth", type=int)
    ap.add_argument("--precision-bits", type=int)
    ap.add_argument("--trunc")
    ap.add_argument("--bond-cap", type=int)
    ap.add_argument("--krylov-dim", type=int)
    ap.add_argument("--k", type=int, help="number of eigenvalues to report")
    ap.add_argument("--line", help="haar (use --gate), upper, lower, pe or analytic")
    ap.add_argument("--grid", help="comma-separated grid (alpha, beta or eps_n depending on command)")
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--mode", choices=("fast", "accurate"))
    ap.add_argument("--dump-config", action="store_true", help="print the canonical configuration and exit")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.command in ("gate-info", "noise-info") and args.format is None:
        cfg = replace(cfg, format="json")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "dump_config") and v is not None}
    return apply_overrides(cfg, flags).validate()


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.canonical())
            return EXIT_OK
        if args.command == "oracle-check":
            text, ok = cmd_oracle_check(cfg)
            emit(cfg, text)
            return EXIT_OK if ok else EXIT_NUMERIC
        handler = {
            "gate-info": cmd_gate_info,
            "noise-info": cmd_noise_info,
            "evolve": cmd_evolve,
            "spectrum": cmd_spectrum,
            "critical": cmd_critical,
            "sweep": cmd_sweep,
        }[args.command]
        emit(cfg, handler(cfg))
        return EXIT_OK
    except OutOfScopeError as exc:
        print(f"out of scope: {exc}", file=sys.stderr)
        return EXIT_SCOPE
    except (ConfigError, GateSpecError, NoiseSpecError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
