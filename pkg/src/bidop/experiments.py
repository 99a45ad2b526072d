"""Monte Carlo harness: parameter sweeps, error statistics, persistence.

Each trial samples a scenario, synthesizes a phase panel (phase-domain
by default, full waveform chain on request), runs the estimator, and
records normalized errors eps_x = |x - x_hat| / |x| for the target
Doppler, heading, and speed. Config SNR values are per received sample
before the pilot's processing gain, so the phase noise reaching the
estimator reflects the correlation/DFT gain of each profile's waveform.
Sweeps are reproducible: trial seeds are derived from the base seed and
the (profile, axis value, trial) cell coordinates, so cells are
independent of each other and of ordering.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimator, phase_model, waveform
from .profiles import CarrierProfile, frames_in_window, get_profile, scale_period
from .scenario import InfeasibleScenarioError, sample_scenario

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SWEEP_AXES = ("n_static", "window_ms", "snr_db", "sigma_aoa_deg", "T_scale")

DEFAULT_FIXED = {
    "n_static": 2,
    "window_ms": 16.0,
    "snr_db": 5.0,
    "sigma_aoa_deg": 5.0,
}

DEFAULT_TRIALS = 2000
PAPER_TRIALS = 10_000
MAX_FAILURE_FRACTION = 0.01

RECORD_FIELDS = ("profile", "axis", "axis_value", "trial", "eps_fd",
                 "eps_eta", "eps_v", "converged", "nls_micros")


class SweepFailureError(RuntimeError):
    """More than the tolerated fraction of trials failed."""


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: an axis, its values, and everything held fixed.

    fixed holds the non-swept parameters (n_static, window_ms, snr_db,
    sigma_aoa_deg); omitted keys take the defaults SNR=5 dB,
    sigma_aoa=5 deg, window=16 ms, S=2. snr_db is the per-received-
    sample SNR before the pilot's processing gain; run_trial maps it to
    the CIR-peak SNR the synthesizers expect. A noiseless override is
    snr_db=inf together with sigma_aoa_deg=0.
    """

    profile_ids: tuple[str, ...]
    sweep_axis: str
    axis_values: tuple
    fixed: dict = field(default_factory=dict)
    n_trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    static_rx: bool = False
    use_waveform: bool = False
    workers: int | None = None

    def resolved_fixed(self) -> dict:
        out = dict(DEFAULT_FIXED)
        out.update(self.fixed)
        unknown = set(out) - set(DEFAULT_FIXED)
        if unknown:
            raise ValueError(f"unknown fixed parameters {sorted(unknown)}")
        return out


@dataclass(frozen=True)
class Record:
    """One trial's outcome. eps_* are |true - est| / |true|, except
    that a zero true value falls back to the absolute error."""

    profile: str
    axis: str
    axis_value: float
    trial: int
    eps_fd: float
    eps_eta: float
    eps_v: float
    converged: bool
    nls_micros: float


@dataclass(frozen=True)
class SweepResult:
    """records: per-trial rows in canonical (profile, value, trial)
    order; summaries: per-cell boxplot statistics; failures: skipped
    trials with reasons (kept out of records)."""

    records: tuple[Record, ...]
    summaries: dict
    failures: tuple[dict, ...]


def trial_seed(base_seed: int, profile_id: str, axis: str, value,
               trial: int) -> int:
    """Deterministic per-trial seed: base_seed XOR the first 8 bytes of
    sha256("{profile}|{axis}={value}|trial={t}") with the axis value
    canonicalized through repr(float(value))."""
    tag = f"{profile_id}|{axis}={float(value)!r}|trial={trial}"
    digest = hashlib.sha256(tag.encode()).digest()
    return (int.from_bytes(digest[:8], "little") ^ base_seed) % 2**64


def _relative_error(true: float, est: float) -> float:
    if true != 0.0:
        return abs(true - est) / abs(true)
    return abs(est)


def _cell_profile(profile_id: str, axis: str, value) -> CarrierProfile:
    profile = get_profile(profile_id)
    if axis == "T_scale":
        profile = scale_period(profile, float(value))
    return profile


def run_trial(profile_id: str, axis: str, value, trial: int,
              config: SweepConfig) -> Record:
    """Run one seeded trial and score it against the scenario truth.

    Raises estimator/scenario/waveform errors through to the caller
    (run_sweep records them as failures).
    """
    fixed = config.resolved_fixed()
    params = dict(fixed)
    if axis != "T_scale":
        params[axis] = value
    profile = _cell_profile(profile_id, axis, value)
    K = frames_in_window(profile, float(params["window_ms"]))
    # Config snr_db is per received sample; the synthesizers take the
    # CIR-peak SNR, so apply the pilot's processing gain here.
    snr_db = waveform.peak_snr_db(profile, float(params["snr_db"]))
    sigma_aoa = math.radians(float(params["sigma_aoa_deg"]))
    n_static = int(params["n_static"])

    rng = np.random.default_rng(
        trial_seed(config.base_seed, profile_id, axis, value, trial))
    scenario = sample_scenario(profile, n_static, rng,
                               static_rx=config.static_rx)
    synth = (waveform.synthesize_panel_waveform if config.use_waveform
             else phase_model.synthesize_panel)
    panel = synth(scenario, profile, K, snr_db, sigma_aoa, rng)
    est = estimator.estimate(panel, profile, static_rx=config.static_rx)
    return Record(
        profile=profile_id,
        axis=axis,
        axis_value=float(value),
        trial=trial,
        eps_fd=_relative_error(scenario.f_d_target, est.f_d_target),
        eps_eta=_relative_error(scenario.eta, est.eta),
        eps_v=_relative_error(scenario.v_rx, est.v_rx),
        converged=est.converged,
        nls_micros=est.nls_seconds * 1e6,
    )


def _run_spec(spec) -> tuple:
    """Worker entry: returns ('ok', record) or ('fail', info)."""
    profile_id, axis, value, trial, config = spec
    try:
        return "ok", run_trial(profile_id, axis, value, trial, config)
    except (estimator.EstimatorError, InfeasibleScenarioError,
            waveform.PanelRejectedError) as exc:
        return "fail", {
            "profile": profile_id,
            "axis": axis,
            "axis_value": float(value),
            "trial": trial,
            "reason": f"{type(exc).__name__}: {exc}",
        }


def run_sweep(config: SweepConfig) -> SweepResult:
    """Run every (profile, axis value, trial) cell of the sweep.

    Trials run independently (optionally in a process pool); results
    are sorted into canonical order before summarizing so worker
    scheduling never affects the output. More than 1% failed trials
    overall raises SweepFailureError.
    """
    if config.sweep_axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {config.sweep_axis!r}")
    if config.n_trials < 1:
        raise ValueError("n_trials must be positive")
    config.resolved_fixed()
    for profile_id in config.profile_ids:
        get_profile(profile_id)

    specs = [(p, config.sweep_axis, v, t, config)
             for p in config.profile_ids
             for v in config.axis_values
             for t in range(config.n_trials)]
    if config.workers and config.workers > 1 and len(specs) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(_run_spec, specs,
                                     chunksize=max(1, len(specs) // (8 * config.workers))))
    else:
        outcomes = [_run_spec(s) for s in specs]

    records = [r for kind, r in outcomes if kind == "ok"]
    failures = [r for kind, r in outcomes if kind == "fail"]
    if len(failures) > MAX_FAILURE_FRACTION * len(specs):
        raise SweepFailureError(
            f"{len(failures)}/{len(specs)} trials failed (> "
            f"{MAX_FAILURE_FRACTION:.0%}); first: {failures[0]['reason']}")

    value_order = {float(v): i for i, v in enumerate(config.axis_values)}
    profile_order = {p: i for i, p in enumerate(config.profile_ids)}
    records.sort(key=lambda r: (profile_order[r.profile],
                                value_order[r.axis_value], r.trial))
    failures.sort(key=lambda f: (profile_order[f["profile"]],
                                 value_order[f["axis_value"]], f["trial"]))
    return SweepResult(
        records=tuple(records),
        summaries=summarize(records),
        failures=tuple(failures),
    )


def t_sensitivity(profile_id: str, t_values_ms, config: SweepConfig) -> SweepResult:
    """Frame-period sweep: t_values_ms are absolute periods in ms,
    converted to multiplicative scales on the profile's baseline T
    (values beyond the ambiguity bound alias on purpose)."""
    base_t_ms = get_profile(profile_id).T * 1e3
    scales = tuple(t_ms / base_t_ms for t_ms in t_values_ms)
    cfg = replace(config, profile_ids=(profile_id,), sweep_axis="T_scale",
                  axis_values=scales)
    return run_sweep(cfg)


def box_stats(values) -> dict:
    """Boxplot statistics: median and quartiles via linear-interpolation
    quantiles, whiskers at 1.5 IQR clipped to the data range."""
    x = np.asarray(sorted(values), dtype=float)
    if len(x) == 0:
        raise ValueError("empty cell")
    q25, median, q75 = np.quantile(x, [0.25, 0.5, 0.75])
    iqr = q75 - q25
    lo = float(x[x >= q25 - 1.5 * iqr][0])
    hi = float(x[x <= q75 + 1.5 * iqr][-1])
    return {"median": float(median), "q25": float(q25), "q75": float(q75),
            "whisker_lo": lo, "whisker_hi": hi, "n": int(len(x))}


def summarize(records) -> dict:
    """Per-cell summaries over (profile, axis_value): boxplot stats for
    each error metric plus a convergence count. Per-trial wall times
    stay in the records (they are not reproducible byte-for-byte)."""
    cells: dict[tuple, list[Record]] = {}
    for rec in records:
        cells.setdefault((rec.profile, rec.axis, rec.axis_value), []).append(rec)
    out = []
    for (profile, axis, value), recs in cells.items():
        out.append({
            "profile": profile,
            "axis": axis,
            "axis_value": value,
            "n": len(recs),
            "eps_fd": box_stats([r.eps_fd for r in recs]),
            "eps_eta": box_stats([r.eps_eta for r in recs]),
            "eps_v": box_stats([r.eps_v for r in recs]),
            "n_converged": sum(r.converged for r in recs),
        })
    return {"cells": out}


def write_records_csv(records, fp) -> None:
    """Records CSV with the canonical header; floats via repr so the
    file is byte-stable and lossless."""
    fp.write(",".join(RECORD_FIELDS) + "\n")
    for r in records:
        fp.write(f"{r.profile},{r.axis},{r.axis_value!r},{r.trial},"
                 f"{r.eps_fd!r},{r.eps_eta!r},{r.eps_v!r},"
                 f"{int(r.converged)},{r.nls_micros!r}\n")


def read_records_csv(fp) -> list[Record]:
    header = fp.readline().strip().split(",")
    if header != list(RECORD_FIELDS):
        raise ValueError(f"unexpected records header {header!r}")
    records = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        p = line.split(",")
        records.append(Record(
            profile=p[0], axis=p[1], axis_value=float(p[2]), trial=int(p[3]),
            eps_fd=float(p[4]), eps_eta=float(p[5]), eps_v=float(p[6]),
            converged=bool(int(p[7])), nls_micros=float(p[8])))
    return records


def write_summaries_json(result: SweepResult, fp) -> None:
    """Summaries plus failures as deterministic (sorted-key) JSON."""
    payload = dict(result.summaries)
    payload["failures"] = list(result.failures)
    json.dump(payload, fp, indent=2, sort_keys=True)
    fp.write("\n")


def load_sweep_config(path) -> SweepConfig:
    """Load a sweep config from a TOML file.

    Layout: a [sweep] table with profiles, axis, values, and optional
    trials/base_seed/static_rx/use_waveform/workers keys, plus an
    optional [fixed] table overriding the defaults. Angles are degrees.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    try:
        sweep = raw["sweep"]
        profile_ids = tuple(sweep["profiles"])
        sweep_axis = sweep["axis"]
        axis_values = tuple(sweep["values"])
    except KeyError as exc:
        raise ValueError(f"config missing required key: {exc}") from None
    return SweepConfig(
        profile_ids=profile_ids,
        sweep_axis=sweep_axis,
        axis_values=axis_values,
        fixed=dict(raw.get("fixed", {})),
        n_trials=int(sweep.get("trials", DEFAULT_TRIALS)),
        base_seed=int(sweep.get("base_seed", 0)),
        static_rx=bool(sweep.get("static_rx", False)),
        use_waveform=bool(sweep.get("use_waveform", False)),
        workers=sweep.get("workers"),
    )
