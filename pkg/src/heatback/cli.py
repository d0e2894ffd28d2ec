"""Batch CLI: forward runs, reconstructions, constants, sweeps, oracle checks.

Exit codes: 0 success, 1 configuration or usage error, 2 a certified
inequality failed at runtime (a hard failure CI can distinguish from misuse).
All outputs are CSV with a header row and 17-significant-digit floats.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

import numpy as np

from .control import ControlSetup, control_mode_bank, verify_control_bounds
from .errors import BoundViolation, ConfigError
from .fd import FDGrid, fd_evolve, oracle_gap
from .filtering import global_backward
from .harness import (
    ExperimentConfig,
    build_chain,
    inject_noise,
    load_config,
    pipeline_config,
    rows_to_csv,
    run_sweep,
)
from .observability import ObservabilityConstants
from .pipeline import local_reconstruct, observation_weights, select_epsilon
from .spectral import evolve, gram_subdomain, simpson_weights, synthesize_initial


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.16e}"
    return "" if x is None else str(x)


def _csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\r\n".join(lines) + "\r\n"


def _field_csv(field) -> str:
    rows = [
        (i + 1, float(lam), float(a))
        for i, (lam, a) in enumerate(zip(field.basis.eigenvalues, field.coeffs))
    ]
    return _csv(("i", "lambda_i", "a_i"), rows)


def _read_observation(path: str):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read observation {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed observation CSV {path!r}: {exc}") from exc
    if data.shape[1] != 2:
        raise ConfigError("observation CSV must have columns x,value")
    return data[:, 0], data[:, 1]


def _even(n: int) -> int:
    return n + n % 2


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "modes", None) is not None:
        modes = args.modes
        updates["modes"] = modes
        updates["bank"] = min(cfg.bank, modes)
        updates["grid"] = max(cfg.grid, _even(16 * modes))
        span = (cfg.omega_b - cfg.omega_a) / cfg.length
        updates["obs_grid"] = max(cfg.obs_grid, _even(int(16 * modes * span) + 1))
    return replace(cfg, **updates) if updates else cfg


def _synthetic_truth(cfg: ExperimentConfig):
    basis = cfg.basis()
    profile = cfg.profile_obj()
    u0 = synthesize_initial(basis, cfg.decay, cfg.seed)
    return basis, profile, u0


def _first_delta_abs(cfg: ExperimentConfig, l2: float) -> float:
    if cfg.delta is not None:
        return cfg.delta
    if not cfg.delta_list:
        raise ConfigError("need a nonempty delta_list or an absolute delta key")
    return cfg.delta_list[0] * l2


def _cmd_forward(cfg: ExperimentConfig, args) -> int:
    basis, profile, u0 = _synthetic_truth(cfg)
    uT = evolve(u0, 0.0, cfg.T, profile)
    _write(args.out, _field_csv(uT))
    if args.emit_observation:
        xs = cfg.omega_grid()
        weights = observation_weights(xs, cfg.subdomain(), basis)
        delta_abs = _first_delta_abs(cfg, u0.l2())
        noisy = inject_noise(uT.evaluate(xs), delta_abs, [cfg.seed, 0, 1], weights)
        _write(args.emit_observation, _csv(("x", "value"), list(zip(xs, noisy))))
    return 0


def _priors_for_external(cfg: ExperimentConfig):
    if cfg.prior_l2 is None or cfg.prior_h01 is None or cfg.delta is None:
        raise ConfigError(
            "external observations need prior_l2, prior_h01 and delta keys in the config"
        )
    return cfg.prior_l2, cfg.prior_h01, cfg.delta


def _cmd_global_backward(cfg: ExperimentConfig, args) -> int:
    basis = cfg.basis()
    profile = cfg.profile_obj()
    if args.observation:
        xs, values = _read_observation(args.observation)
        l2, h01, delta_abs = _priors_for_external(cfg)
        u0 = None
    else:
        basis, profile, u0 = _synthetic_truth(cfg)
        l2, h01 = u0.l2(), u0.h01()
        delta_abs = _first_delta_abs(cfg, l2)
        xs = cfg.full_grid()
        weights = simpson_weights(xs.size, xs[1] - xs[0])
        values = inject_noise(
            evolve(u0, 0.0, cfg.T, profile).evaluate(xs), delta_abs, [cfg.seed, 0, 0], weights
        )
    g, sel = global_backward(xs, values, basis, cfg.T, profile, delta_abs, l2, h01)
    _write(args.out, _field_csv(g))
    error = None if u0 is None else (u0 - g).l2()
    if args.report:
        _write(
            args.report,
            _csv(
                ("delta", "epsilon", "effective_delta", "alpha", "bound", "error"),
                [(delta_abs, None, sel.effective_delta, sel.alpha, sel.bound, error)],
            ),
        )
    if error is not None and error > sel.bound:
        raise BoundViolation(f"reconstruction error {error} exceeds certified bound {sel.bound}")
    return 0


def _cmd_local_backward(cfg: ExperimentConfig, args) -> int:
    if args.observation:
        xs, values = _read_observation(args.observation)
        l2, h01, delta_abs = _priors_for_external(cfg)
        u0 = None
        basis = cfg.basis()
    else:
        basis, profile, u0 = _synthetic_truth(cfg)
        l2, h01 = u0.l2(), u0.h01()
        delta_abs = _first_delta_abs(cfg, l2)
        xs = cfg.omega_grid()
        weights = observation_weights(xs, cfg.subdomain(), basis)
        values = inject_noise(
            evolve(u0, 0.0, cfg.T, cfg.profile_obj()).evaluate(xs),
            delta_abs,
            [cfg.seed, 0, 1],
            weights,
        )
    pcfg = pipeline_config(cfg, l2, h01)
    report = local_reconstruct(xs, values, delta_abs, pcfg)
    if u0 is not None:
        report = replace(report, actual_error=(u0 - report.g).l2())
    _write(args.out, _field_csv(report.g))
    error = report.actual_error
    if args.report:
        _write(
            args.report,
            _csv(
                ("delta", "epsilon", "effective_delta", "alpha", "bound", "error"),
                [(delta_abs, report.epsilon, report.claimed_delta, report.alpha,
                  report.bound, error)],
            ),
        )
    if not (report.consistency_ok and report.k_consistent):
        raise BoundViolation(
            f"transfer certificate failed: certified {report.certified_delta} vs "
            f"claimed {report.claimed_delta}, bank weight {report.k_used} vs chain "
            f"{report.k_chain}"
        )
    if error is not None and error > report.bound:
        raise BoundViolation(f"reconstruction error {error} exceeds certified bound {report.bound}")
    return 0


def _cmd_control(cfg: ExperimentConfig, args) -> int:
    basis, profile, u0 = _synthetic_truth(cfg)
    sub = cfg.subdomain()
    gram = gram_subdomain(sub, basis)
    chain = build_chain(cfg)
    delta_abs = _first_delta_abs(cfg, u0.l2())
    eps = select_epsilon(delta_abs, cfg.T, chain.c3, chain.c4, u0.l2())
    setup = ControlSetup.from_chain(basis, cfg.T, profile, sub, gram, eps, chain)
    bank = control_mode_bank(setup, cfg.bank, method="cg")
    rows = []
    for i, sol in enumerate(bank, start=1):
        cert = verify_control_bounds(setup, sol, np.eye(basis.size)[i - 1])
        rows.append((i, sol.h_norm_omega, cert.psi_norm, cert.psi_ok, cert.h_ok, sol.cg_iters))
    _write(args.out, _csv(("i", "h_norm", "psi_norm", "eps_bound_ok", "h_bound_ok", "cg_iters"), rows))
    return 0


def _constants_rows(chain: ObservabilityConstants):
    rows = []
    for f in fields(chain):
        rows.append((f.name, getattr(chain, f.name)))
    return rows


def _cmd_constants(cfg: ExperimentConfig, args) -> int:
    chain = build_chain(cfg)
    rows = _constants_rows(chain)
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {_fmt(value) if value is not None else 'n/a'}")
    if args.out:
        _write(args.out, _csv(("name", "value"), rows))
    return 0


def _cmd_sweep(cfg: ExperimentConfig, args) -> int:
    rows = run_sweep(cfg, parallel=args.parallel)
    _write(args.out or cfg.out, rows_to_csv(rows))
    bad = [row for row in rows if row["bound_ok"] is False]
    if bad:
        raise BoundViolation(
            f"{len(bad)} sweep rows violate certified inequalities "
            f"(first: method={bad[0]['method']}, delta={bad[0]['delta']})"
        )
    return 0


def _cmd_oracle_check(cfg: ExperimentConfig, args) -> int:
    basis, profile, u0 = _synthetic_truth(cfg)
    grid = FDGrid(cfg.domain(), 2000)
    rows = []
    worst = 0.0
    for t in (cfg.T / 5.0, cfg.T):
        spectral = evolve(u0, 0.0, t, profile)
        fd_vals = fd_evolve(grid, grid.sample(u0), profile, t, 2000)
        gap = oracle_gap(grid, spectral, fd_vals)
        tol = 1e-4 * u0.l2()
        rows.append((cfg.profile, t, gap, tol, gap <= tol))
        worst = max(worst, gap / tol)
    text = _csv(("profile", "t", "gap", "tol", "ok"), rows)
    _write(args.out, text)
    if args.out is not None:
        sys.stdout.write(text)
    if worst > 1.0:
        raise BoundViolation("finite-difference oracle disagrees with the spectral propagator")
    return 0


_COMMANDS = {
    "forward": _cmd_forward,
    "global-backward": _cmd_global_backward,
    "control": _cmd_control,
    "local-backward": _cmd_local_backward,
    "constants": _cmd_constants,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatback",
        description="Backward reconstruction for the 1D heat equation with "
        "time-dependent diffusivity.",
    )
    sub = parser.add_subparsers(dest="command")

    def common(p, needs_out=False):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", required=needs_out, default=None, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--modes", type=int, default=None, help="override the truncation order")

    p = sub.add_parser("forward", help="evolve a synthetic initial state and emit its modes")
    common(p)
    p.add_argument("--emit-observation", default=None, help="also write noisy subdomain samples")

    p = sub.add_parser("global-backward", help="reconstruct from full-domain data at time T")
    common(p)
    p.add_argument("--observation", default=None, help="observation CSV (x,value); synthetic if absent")
    p.add_argument("--report", default=None, help="one-row report CSV path")

    p = sub.add_parser("control", help="solve the impulse-control bank and emit certificates")
    common(p, needs_out=True)

    p = sub.add_parser("local-backward", help="reconstruct from subdomain data at time T")
    common(p)
    p.add_argument("--observation", default=None, help="observation CSV (x,value); synthetic if absent")
    p.add_argument("--report", default=None, help="one-row report CSV path")

    p = sub.add_parser("constants", help="print the observability constant chain")
    common(p)

    p = sub.add_parser("sweep", help="noise-level sweep over all methods")
    common(p)
    p.add_argument("--parallel", type=int, default=1, help="worker threads for sweep cells")

    p = sub.add_parser("oracle-check", help="cross-validate the propagator against finite differences")
    common(p)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; reserve 2 for falsified mathematics
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return _COMMANDS[args.command](cfg, args)
    except BoundViolation as exc:
        print(f"certified inequality violated: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
