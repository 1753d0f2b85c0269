"""Command-line front end.

Commands: ``price``, ``converge``, ``check``, ``counterexample``,
``skorohod-dist``.  Experiments are described by flat config files (see
:mod:`pathfunc.config`); every command honors ``--seed`` and ``--workers``
overrides, and the ``PATHFUNC_WORKERS`` environment variable overrides the
configured worker count.  Exit codes: 0 ok, 1 runtime error, 2 diagnostic
failure, 64 config error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import estimator, oracles
from .config import RunConfig, parse_config
from .errors import ConfigError, PathfuncError
from .functionals import (FunctionalSpec, constant_payoff, custom_terminal,
                          discrete_barrier_call, up_and_in_call)
from .models import (SdeModel, bessel3, constant_vol_params, gbm,
                     inverse_bessel3, stoch_vol)
from .paths import StepPath
from .schemes import SCHEME_KINDS, SchemeConfig, check_local_consistency
from .skorohod import skorohod_distance_approx

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_DIAGNOSTIC = 2
EXIT_CONFIG = 64


def build_model(cfg: RunConfig) -> SdeModel:
    kind = cfg.get("model", "kind")
    if kind == "gbm":
        return gbm(cfg.get("model", "r"), cfg.require("model", "sigma"),
                   cfg.require("model", "x0"))
    if kind == "stoch_vol":
        params = constant_vol_params(
            r=cfg.get("model", "r"),
            sigma=cfg.require("model", "sigma"),
            x0=cfg.require("model", "x0"),
            rho=cfg.get("model", "rho"),
            y0=cfg.get("model", "y0"),
        )
        return stoch_vol(params)
    if kind == "bessel3":
        return bessel3(cfg.require("model", "x0"))
    if kind == "inverse_bessel3":
        return inverse_bessel3(cfg.get("model", "z0"))
    raise ConfigError(f"unknown model kind {kind!r}", key="model.kind")


def build_scheme(cfg: RunConfig) -> tuple[SchemeConfig, str | None]:
    kind = cfg.get("scheme", "kind")
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"unknown scheme kind {kind!r}", key="scheme.kind")
    h = cfg.require("scheme", "h")
    cap = cfg.get("scheme", "cap")
    cap_rule = None
    if cap == "1/h":
        cap_rule = "reciprocal"
        cap = 1.0 / h
    return SchemeConfig(kind=kind, h=h, cap=cap), cap_rule


def build_spec(cfg: RunConfig) -> FunctionalSpec:
    payoff = cfg.get("functional", "payoff")
    r = cfg.get("model", "r")
    coord = cfg.get("functional", "coordinate")
    if payoff == "up_in_call":
        return up_and_in_call(cfg.require("functional", "strike"),
                              cfg.require("functional", "barrier_level"), r,
                              m=cfg.get("functional", "m"), coordinate=coord)
    if payoff == "discrete_barrier_call":
        return discrete_barrier_call(cfg.require("functional", "strike"),
                                     cfg.require("functional", "barrier_level"), r,
                                     m=cfg.require("functional", "m"),
                                     coordinate=coord)
    if payoff in ("terminal_identity", "terminal_call", "terminal_put"):
        return custom_terminal(payoff.split("_", 1)[1],
                               strike=cfg.get("functional", "strike"), r=r,
                               coordinate=coord)
    if payoff == "constant":
        return constant_payoff(cfg.get("functional", "strike"))
    raise ConfigError(f"unknown payoff kind {payoff!r}", key="functional.payoff")


def resolve_workers(cfg: RunConfig, override) -> int:
    if override is not None:
        return int(override)
    env = os.environ.get("PATHFUNC_WORKERS")
    if env is not None:
        return int(env)
    w = cfg.get("run", "workers")
    if w is not None:
        return int(w)
    return os.cpu_count() or 1


def _emit(cfg: RunConfig, lines) -> None:
    path = cfg.get("output", "path")
    text = "\n".join(lines) + "\n"
    if path in ("-", "", None):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _estimate_lines(cfg: RunConfig, rows, header=True) -> list:
    """rows: list of Estimate; CSV or aligned table per output.format."""
    timing = cfg.get("run", "timing")
    if cfg.get("output", "format") == "csv":
        out = [rows[0].csv_header()] if header else []
        out += [e.csv_row(timing=timing) for e in rows]
        return out
    out = [f"{'h':>12} {'mean':>12} {'stderr':>12} {'ci_lo':>12} "
           f"{'ci_hi':>12} {'n':>8} {'elapsed':>9}"]
    for e in rows:
        t = f"{e.elapsed:9.3f}" if timing else f"{0.0:9.3f}"
        out.append(f"{e.h:12.6g} {e.mean:12.6f} {e.stderr:12.6f} "
                   f"{e.ci95[0]:12.6f} {e.ci95[1]:12.6f} {e.n_paths:8d} {t}")
    return out


def _ui_gate(cfg, model, scheme, cap_rule, spec, seed) -> tuple[bool, list]:
    """Run the uniform-integrability diagnostic a linear payoff requires."""
    if spec.growth.kind == "bounded" or cfg.get("run", "allow_linear"):
        return True, []
    rep = estimator.ui_diagnostic(model, scheme, spec, [scheme.h],
                                  n_paths=cfg.get("ui", "n_paths"), seed=seed,
                                  tail_tol=cfg.get("ui", "tail_tol"),
                                  cap_rule=cap_rule)
    lines = [f"ui diagnostic: {'pass' if rep.passed else 'FAIL'} "
             f"(sup second moment {rep.sup_second_moment:.4g})"]
    return rep.passed, lines


def cmd_price(args) -> int:
    cfg = parse_config(args.config)
    model = build_model(cfg)
    scheme, cap_rule = build_scheme(cfg)
    spec = build_spec(cfg)
    seed = args.seed if args.seed is not None else cfg.get("run", "seed")
    workers = resolve_workers(cfg, args.workers)
    ok, lines = _ui_gate(cfg, model, scheme, cap_rule, spec, seed)
    if not ok:
        _emit(cfg, lines + ["refusing to price a linear-growth payoff whose "
                            "tails do not vanish; set run.allow_linear = true "
                            "to override"])
        return EXIT_DIAGNOSTIC
    est = estimator.estimate(model, scheme, spec, cfg.require("run", "n_paths"),
                             seed, workers=workers, ui_override=True)
    _emit(cfg, lines + _estimate_lines(cfg, [est]))
    return EXIT_OK


def _auto_oracle(cfg: RunConfig, model, spec) -> tuple[float | None, str]:
    mode = cfg.get("run", "oracle")
    if mode == "none":
        return None, ""
    if mode == "auto":
        if spec.label == "up_in_call" and model.label == "gbm":
            v = oracles.up_and_in_call_price(
                cfg.require("model", "x0"), cfg.require("functional", "strike"),
                cfg.require("functional", "barrier_level"),
                cfg.get("model", "r"), cfg.require("model", "sigma"))
            return v, "reflection-principle closed form"
        return None, ""
    return float(mode), "user supplied"


def cmd_converge(args) -> int:
    cfg = parse_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("run", "seed")
    workers = resolve_workers(cfg, args.workers)
    h_grid = cfg.require("run", "h_grid")
    if cfg.get("model", "kind") == "tangency":
        return _converge_tangency(cfg, h_grid)
    model = build_model(cfg)
    spec = build_spec(cfg)
    scheme_kind = cfg.get("scheme", "kind")
    oracle, note = _auto_oracle(cfg, model, spec)
    rep = estimator.convergence_study(model, scheme_kind, spec, h_grid,
                                      cfg.require("run", "n_paths"), seed,
                                      oracle=oracle, oracle_note=note,
                                      workers=workers)
    lines = _estimate_lines(cfg, [e for _, e in rep.rows])
    if oracle is not None:
        lines.append(f"oracle = {oracle:.10g} ({note})")
        lines.append("errors: " + ", ".join(f"{e:.6g}" for e in rep.errors))
        if rep.trend_slope is not None:
            lines.append(f"trend slope (log err vs log h) = {rep.trend_slope:.3f}")
        lines.append(f"non_convergence_flag = {rep.non_convergence_flag}")
    _emit(cfg, lines)
    return EXIT_OK


def _converge_tangency(cfg: RunConfig, h_grid) -> int:
    # deterministic pseudo-scheme: the grazing parabola shifted down by h
    rep = estimator.counterexample_tangency(h_values=tuple(h_grid))
    lines = [f"{'h':>12} {'exit_time':>12} {'target':>12}"]
    for h in h_grid:
        lines.append(f"{h:12.6g} {rep.tau_h[h]:12.6f} {rep.tau:12.6f}")
    lines.append("non_convergence_flag = True  (tangency: exit times stay at 1)")
    _emit(cfg, lines)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = parse_config(args.config)
    model = build_model(cfg)
    scheme, cap_rule = build_scheme(cfg)
    spec = build_spec(cfg)
    seed = args.seed if args.seed is not None else cfg.get("run", "seed")
    kinds_key = cfg.get("check", "kinds")
    if kinds_key == "config":
        kinds = [scheme.kind]
    elif kinds_key == "all":
        kinds = list(SCHEME_KINDS)
    else:
        kinds = [k.strip() for k in kinds_key.split(",") if k.strip()]
    probes = [(y, t) for y in cfg.get("check", "probes_y")
              for t in cfg.get("check", "probes_t")]
    lines = []
    failed = False
    for kind in kinds:
        rep = check_local_consistency(
            model, SchemeConfig(kind=kind, h=scheme.h, cap=scheme.cap), probes,
            n_draws=cfg.get("check", "n_draws"), seed=seed,
            c_const=cfg.get("check", "c_const"))
        lines.append(f"scheme {kind}: {'pass' if rep.passed else 'FAIL'}")
        for r in rep.rows:
            if r.note:
                lines.append(f"  probe y={r.y:g} t={r.t:g}: ERROR {r.note}")
            else:
                lines.append(
                    f"  probe y={r.y:g} t={r.t:g} [{r.method}]: "
                    f"r1={r.r1:.3e} (tol {r.tol1:.3e}) r2={r.r2:.3e} "
                    f"(tol {r.tol2:.3e}) dt/h={r.dt_ratio:.4g} "
                    f"{'ok' if r.passed else 'FAIL'}")
        failed |= not rep.passed
    h_grid = cfg.get("run", "h_grid") or [scheme.h]
    ui = estimator.ui_diagnostic(model, scheme, spec, h_grid,
                                 n_paths=cfg.get("ui", "n_paths"), seed=seed,
                                 tail_tol=cfg.get("ui", "tail_tol"),
                                 cap_rule=cap_rule)
    if ui.skipped:
        lines.append("ui diagnostic: skipped (bounded payoff)")
    else:
        lines.append(f"ui diagnostic: {'pass' if ui.passed else 'FAIL'} "
                     f"(tail tol {ui.tail_tol:g}, "
                     f"sup second moment {ui.sup_second_moment:.4g})")
        for h, cap, tails, m2 in ui.rows:
            cap_s = "none" if cap is None else f"{cap:g}"
            lines.append(f"  h={h:g} cap={cap_s}: tail@{ui.cutoffs[-1]:g} = "
                         f"{tails[-1]:.4g}, E[X^2] = {m2:.4g}")
    failed |= not ui.passed
    _emit(cfg, lines)
    return EXIT_DIAGNOSTIC if failed else EXIT_OK


def cmd_counterexample(args) -> int:
    name = args.name
    seed = args.seed if args.seed is not None else 0
    lines = []
    if name == "tangency":
        rep = estimator.counterexample_tangency()
        lines.append(f"exit time of the grazing path: {rep.tau}")
        for h, th in rep.tau_h.items():
            lines.append(f"  shifted down by h={h:g}: exit time {th}")
        lines.append(f"classification of the grazing path: {rep.c_class}")
        ok = rep.passed
    elif name == "bessel":
        rep = estimator.counterexample_bessel(seed=seed, n_paths=args.paths or 200000)
        lines.append(f"{'h':>12} {'cap':>10} {'capped_mean':>12} {'stderr':>10}")
        for h, cap, mean, se in rep.rows:
            lines.append(f"{h:12.6g} {cap:10.4g} {mean:12.6f} {se:10.6f}")
        lines.append(f"oracle E[Z(1)] = {rep.oracle:.6f} ({rep.oracle_note})")
        lines.append(f"capped mean within 3 stderr of 1: {rep.capped_mean_near_start}")
        lines.append(f"oracle below 1 by more than 5 stderr: {rep.gap_significant}")
        ok = rep.passed
    elif name == "strong":
        rep = estimator.counterexample_strong(seed=seed,
                                              n_rep=args.paths or 200)
        lines.append(f"{'N':>8} {'sqrt(N)*sup_err':>16} {'sqrt(2 log N)':>14}")
        for N, scaled, ref in rep.rows:
            lines.append(f"{N:8d} {scaled:16.4f} {ref:14.4f}")
        lines.append(f"strictly increasing: {rep.strictly_increasing}")
        ok = rep.passed
    else:
        raise ConfigError(f"unknown counterexample {name!r}", key="name")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_DIAGNOSTIC


def _read_path_csv(path: str) -> StepPath:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#") or line.lower().startswith("t,"):
                continue
            t_s, v_s = line.split(",")[:2]
            rows.append((float(t_s), float(v_s)))
    rows.sort()
    return StepPath(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))


def cmd_skorohod_dist(args) -> int:
    x = _read_path_csv(args.path_a)
    y = _read_path_csv(args.path_b)
    d = skorohod_distance_approx(x, y, budget=args.budget)
    sys.stdout.write(f"{d:.17g}\n")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathfunc",
                                description="Monte Carlo engine for "
                                            "path-dependent functionals")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="override run.workers")

    sp = sub.add_parser("price", help="estimate the functional once")
    sp.add_argument("config")
    add_common(sp)
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("converge", help="estimate across run.h_grid")
    sp.add_argument("config")
    add_common(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("check", help="local consistency + uniform "
                                      "integrability diagnostics")
    sp.add_argument("config")
    add_common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("counterexample", help="run a named counter-example")
    sp.add_argument("name", choices=["tangency", "bessel", "strong"])
    sp.add_argument("--paths", type=int, default=None)
    add_common(sp)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("skorohod-dist",
                        help="approximate Skorohod distance of two CSV paths")
    sp.add_argument("path_a")
    sp.add_argument("path_b")
    sp.add_argument("--budget", type=int, default=6)
    sp.set_defaults(func=cmd_skorohod_dist)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return EXIT_CONFIG
    except FileNotFoundError as e:
        sys.stderr.write(f"config error: {e}\n")
        return EXIT_CONFIG
    except PathfuncError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
