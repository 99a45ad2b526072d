"""Command-line front end: sweeps, one-shot estimation, panel
generation, and self-validation.

Exit codes: 0 success, 1 estimation/config/runtime error, 2 bad usage.
Angles cross this boundary in degrees and are converted on entry.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, phase_model, selfcheck, waveform
from .estimator import EstimatorError, estimate
from .profiles import PROFILES, frames_in_window, get_profile
from .scenario import InfeasibleScenarioError, sample_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bidop",
        description="Bistatic Doppler estimation from multipath CIR phases",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a Monte Carlo sweep")
    p_sweep.add_argument("--config", required=True, help="TOML sweep config")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--seed", type=int, default=None,
                         help="override the config's base seed")
    p_sweep.add_argument("--trials", type=int, default=None,
                         help="override the config's trial count")
    p_sweep.add_argument("--profile", choices=sorted(PROFILES),
                         help="restrict the sweep to one profile")
    p_sweep.add_argument("--waveform", action="store_true",
                         help="synthesize panels through the waveform chain")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="process-pool size (default: sequential)")

    p_est = sub.add_parser("estimate", help="estimate theta from a panel CSV")
    p_est.add_argument("panel", help="panel CSV path, or - for stdin")
    p_est.add_argument("--profile", choices=sorted(PROFILES), default=None,
                       help="override the wavelength recorded in the panel")
    p_est.add_argument("--static-rx", action="store_true",
                       help="use the static-receiver baseline")

    p_gen = sub.add_parser("gen-panel", help="generate one panel CSV")
    p_gen.add_argument("--profile", choices=sorted(PROFILES), required=True)
    p_gen.add_argument("--out", default="-", help="output path, - for stdout")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n-static", type=int, default=2)
    p_gen.add_argument("--window-ms", type=float, default=16.0)
    p_gen.add_argument("--snr-db", type=float, default=5.0,
                       help="CIR-peak SNR; inf for noiseless")
    p_gen.add_argument("--sigma-aoa-deg", type=float, default=5.0)
    p_gen.add_argument("--waveform", action="store_true",
                       help="synthesize through the waveform chain")

    p_val = sub.add_parser("validate", help="run the fast self-check suite")
    p_val.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_sweep(args) -> int:
    config = experiments.load_sweep_config(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.trials is not None:
        config = replace(config, n_trials=args.trials)
    if args.profile is not None:
        if args.profile not in config.profile_ids:
            print(f"error: profile {args.profile!r} not in config "
                  f"{config.profile_ids}", file=sys.stderr)
            return 1
        config = replace(config, profile_ids=(args.profile,))
    if args.waveform:
        config = replace(config, use_waveform=True)
    if args.workers is not None:
        config = replace(config, workers=args.workers)

    result = experiments.run_sweep(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "records.csv", "w") as fh:
        experiments.write_records_csv(result.records, fh)
    with open(out_dir / "summaries.json", "w") as fh:
        experiments.write_summaries_json(result, fh)
    print(f"wrote {len(result.records)} records "
          f"({len(result.failures)} failures) to {out_dir}")
    return 0


def _cmd_estimate(args) -> int:
    if args.panel == "-":
        panel, meta = phase_model.read_panel_csv(sys.stdin)
    else:
        with open(args.panel) as fh:
            panel, meta = phase_model.read_panel_csv(fh)
    if args.profile is not None:
        profile = get_profile(args.profile)
    else:
        profile_id = meta.get("profile")
        if not isinstance(profile_id, str):
            print("error: panel lacks a '# profile:' line; pass --profile",
                  file=sys.stderr)
            return 1
        profile = get_profile(profile_id)
    est = estimate(panel, profile, static_rx=args.static_rx)
    print(json.dumps({
        "f_d_target": est.f_d_target,
        "eta": est.eta,
        "v_rx": est.v_rx,
        "residual_norm": est.residual_norm,
        "converged": est.converged,
        "branch": est.branch,
    }))
    return 0


def _cmd_gen_panel(args) -> int:
    profile = get_profile(args.profile)
    rng = np.random.default_rng(args.seed)
    scenario = sample_scenario(profile, args.n_static, rng)
    K = frames_in_window(profile, args.window_ms)
    sigma_aoa = math.radians(args.sigma_aoa_deg)
    synth = (waveform.synthesize_panel_waveform if args.waveform
             else phase_model.synthesize_panel)
    panel = synth(scenario, profile, K, args.snr_db, sigma_aoa, rng)
    if args.out == "-":
        phase_model.write_panel_csv(panel, sys.stdout, profile)
    else:
        with open(args.out, "w") as fh:
            phase_model.write_panel_csv(panel, fh, profile)
    return 0


def _cmd_validate(args) -> int:
    failures = selfcheck.run_all(seed=args.seed, report=print)
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "sweep": _cmd_sweep,
        "estimate": _cmd_estimate,
        "gen-panel": _cmd_gen_panel,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (EstimatorError, InfeasibleScenarioError,
            waveform.PanelRejectedError, experiments.SweepFailureError,
            ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
