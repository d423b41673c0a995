"""Command-line surface: frequency planning, simulation, estimation,
scenario runs and figure tables. All outputs are CSV, to --out or stdout.

Exit codes: 0 success, 2 config error, 3 plan rejected, 4 estimation
failed, 5 I/O error. Failures print `error category=<name>: <detail>` on
stderr.
"""

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, EstimationError, PlanRejection
from .estimator import estimate_temperature
from .figures import FIGURE_IDS, generate_figure
from .scenarios import (emit_csv, load_scenario, nominal_coil_phase,
                        plan_frequencies, result_csv_lines, run_scenario,
                        self_calibrate)
from .signal_chain import NoiseModel, apply_noise, simulate_clean_channels


def _write_lines(lines, out):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x):
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _cmd_plan_freq(args):
    plan = plan_frequencies(args.f_high, args.f_low, args.sample_rate,
                            args.mains if args.mains > 0 else None)
    header = "f_high_hz,f_low_hz,f_base_hz,f_plus_hz,f_minus_hz,sample_rate_hz"
    row = ",".join(_fmt(v) for v in (plan.f_high, plan.f_low, plan.f_base,
                                     plan.f_plus, plan.f_minus,
                                     plan.sample_rate))
    _write_lines([header, row], args.out)
    return 0


def _prepared(args):
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.mode:
        cfg = replace(cfg, mode=args.mode)
    return cfg


def _cmd_simulate(args):
    cfg = _prepared(args)
    t_sample = args.temperature if args.temperature else cfg.program.t_start
    channels, ref_amp = simulate_clean_channels(
        cfg.field_config(), cfg.particle, t_sample, cfg.chain(),
        cfg.ambient.ambient(t_sample))
    channels = apply_noise(channels, NoiseModel(cfg.snr_db, cfg.seed), ref_amp)
    t = channels.diff_background.times
    lines = ["t_s,diff_background_v,diff_sample_v,ref_a_v"]
    for i in range(t.size):
        lines.append(",".join(_fmt(float(v)) for v in
                              (t[i], channels.diff_background.samples[i],
                               channels.diff_sample.samples[i],
                               channels.ref_a.samples[i])))
    _write_lines(lines, args.out)
    return 0


def _cmd_estimate(args):
    cfg = _prepared(args)
    t_sample = args.temperature if args.temperature else cfg.program.t_start
    cal = self_calibrate(cfg)
    channels, ref_amp = simulate_clean_channels(
        cfg.field_config(), cfg.particle, t_sample, cfg.chain(),
        cfg.ambient.ambient(t_sample))
    channels = apply_noise(channels, NoiseModel(cfg.snr_db, cfg.seed), ref_amp)
    est = estimate_temperature(channels, cfg.plan, cfg.amplifier, cal,
                               cfg.mode, phi_o=cfg.phi_o,
                               ref_frequency=cfg.ref_frequency(),
                               nominal_coil_phase=nominal_coil_phase(cfg))
    if not est.valid:
        raise EstimationError(est.error)
    header = "t_true_k,t_est_k,tau_est_s,phi_h_rad,phi_plus_rad,phi_minus_rad"
    row = ",".join(_fmt(v) for v in (t_sample, est.t_est, est.tau_est,
                                     est.phi_h, est.phi_plus, est.phi_minus))
    _write_lines([header, row], args.out)
    return 0


def _cmd_scenario(args):
    if args.action != "run":
        raise ConfigError(f"unknown scenario action {args.action!r}")
    cfg = _prepared(args)
    if args.trials is not None:
        cfg = replace(cfg, program=replace(cfg.program, n_points=args.trials))
    result = run_scenario(cfg)
    if args.out:
        emit_csv(result, args.out)
    else:
        _write_lines(result_csv_lines(result), None)
    return 0


def _cmd_figure(args):
    table = generate_figure(args.figure_id, seed=args.seed or 0,
                            trials=args.trials or 200)
    if args.out:
        table.write_csv(args.out)
    else:
        lines = [",".join(table.header)]
        lines += [",".join(_fmt(v) for v in row) for row in table.rows]
        lines += [f"# {k}={v}" for k, v in table.meta.items()]
        _write_lines(lines, None)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mnpthermo",
        description="Mixing-frequency nanoparticle thermometry simulator "
                    "and estimator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan-freq", help="validate a two-tone frequency plan")
    p.add_argument("f_high", type=int)
    p.add_argument("f_low", type=int)
    p.add_argument("--sample-rate", type=int, default=500000)
    p.add_argument("--mains", type=int, default=50,
                   help="mains frequency to avoid; 0 disables")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plan_freq)

    for name, fn in (("simulate", _cmd_simulate),
                     ("estimate", _cmd_estimate)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--temperature", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=("mixing", "single"))
        p.add_argument("--out")
        p.set_defaults(func=fn)

    p = sub.add_parser("scenario", help="run a configured experiment")
    p.add_argument("action", choices=("run",))
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="override the point count")
    p.add_argument("--mode", choices=("mixing", "single"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("figure", help="emit a figure-reproduction table")
    p.add_argument("figure_id", choices=FIGURE_IDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_figure)
    return parser


_EXIT_CATEGORIES = (
    (PlanRejection, "plan-rejected", 3),
    (ConfigError, "config", 2),
    (EstimationError, "estimation", 4),
    (OSError, "io", 5),
    (ValueError, "config", 2),
)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    # make --config available uniformly for _prepared
    if not hasattr(args, "config"):
        args.config = None
    try:
        return args.func(args)
    except tuple(t for t, _, _ in _EXIT_CATEGORIES) as exc:
        for exc_type, category, code in _EXIT_CATEGORIES:
            if isinstance(exc, exc_type):
                print(f"error category={category}: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
