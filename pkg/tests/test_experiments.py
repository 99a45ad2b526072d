"""Sweep harness: seeding, determinism, statistics, serialization."""

import io
import json
import math

import numpy as np
import pytest

from bidop.estimator import estimate
from bidop.experiments import (DEFAULT_FIXED, Record, SweepConfig,
                               SweepFailureError, box_stats,
                               load_sweep_config, read_records_csv,
                               run_sweep, run_trial, summarize, t_sensitivity,
                               trial_seed, write_records_csv,
                               write_summaries_json)
from bidop.phase_model import synthesize_panel
from bidop.profiles import frames_in_window, get_profile
from bidop.scenario import sample_scenario
from bidop.waveform import peak_snr_db

NOISELESS = {"snr_db": math.inf, "sigma_aoa_deg": 0.0}


def _tiny_config(**kwargs):
    base = dict(profile_ids=("60ghz",), sweep_axis="n_static",
                axis_values=(2,), fixed={}, n_trials=3, base_seed=7)
    base.update(kwargs)
    return SweepConfig(**base)


def _cell(result, profile, value):
    for cell in result.summaries["cells"]:
        if cell["profile"] == profile and \
                math.isclose(cell["axis_value"], value, rel_tol=1e-9):
            return cell
    raise KeyError((profile, value))


def test_trial_seed_canonicalizes_values():
    a = trial_seed(5, "60ghz", "n_static", 2, 0)
    b = trial_seed(5, "60ghz", "n_static", 2.0, 0)
    assert a == b
    assert 0 <= a < 2 ** 64


def test_trial_seed_distinct_across_cells():
    seeds = {
        trial_seed(5, pid, axis, value, trial)
        for pid in ("60ghz", "28ghz")
        for axis in ("n_static", "snr_db")
        for value in (2, 4)
        for trial in range(50)
    }
    assert len(seeds) == 2 * 2 * 2 * 50


def test_trial_seed_base_seed_mixes():
    assert trial_seed(1, "60ghz", "n_static", 2, 0) \
        != trial_seed(2, "60ghz", "n_static", 2, 0)


def test_run_trial_noiseless_is_exact():
    config = _tiny_config(fixed=dict(NOISELESS))
    record = run_trial("60ghz", "n_static", 2, 0, config)
    assert record.eps_fd < 1e-8
    assert record.eps_eta < 1e-8
    assert record.eps_v < 1e-8
    assert record.converged
    assert record.nls_micros >= 0.0


def test_run_trial_axis_override():
    config = _tiny_config(sweep_axis="window_ms", axis_values=(4.0,),
                          fixed=dict(NOISELESS))
    record = run_trial("60ghz", "window_ms", 4.0, 1, config)
    assert record.axis == "window_ms"
    assert record.axis_value == 4.0
    assert record.eps_fd < 1e-8


def test_run_trial_maps_sample_snr_through_processing_gain():
    config = _tiny_config(fixed={"snr_db": 5.0})
    record = run_trial("60ghz", "n_static", 2, 0, config)

    profile = get_profile("60ghz")
    rng = np.random.default_rng(trial_seed(7, "60ghz", "n_static", 2, 0))
    scen = sample_scenario(profile, 2, rng)
    K = frames_in_window(profile, 16.0)
    panel = synthesize_panel(scen, profile, K, peak_snr_db(profile, 5.0),
                             math.radians(5.0), rng)
    est = estimate(panel, profile)
    expected = abs(scen.f_d_target - est.f_d_target) / abs(scen.f_d_target)
    assert record.eps_fd == expected


def test_run_sweep_canonical_order_and_determinism():
    config = _tiny_config(axis_values=(2, 3), n_trials=4,
                          fixed={"snr_db": 10.0})
    a = run_sweep(config)
    b = run_sweep(config)
    keys = [(r.profile, r.axis_value, r.trial) for r in a.records]
    assert keys == sorted(keys, key=lambda k: (0, k[1], k[2]))
    assert len(a.records) == 8
    for ra, rb in zip(a.records, b.records):
        assert (ra.eps_fd, ra.eps_eta, ra.eps_v) \
            == (rb.eps_fd, rb.eps_eta, rb.eps_v)
        assert ra.converged == rb.converged
    assert a.summaries == b.summaries


def test_run_sweep_workers_match_sequential():
    config = _tiny_config(axis_values=(2, 4), n_trials=3)
    seq = run_sweep(config)
    par = run_sweep(_tiny_config(axis_values=(2, 4), n_trials=3, workers=2))
    assert seq.summaries == par.summaries
    for ra, rb in zip(seq.records, par.records):
        assert (ra.profile, ra.axis_value, ra.trial) \
            == (rb.profile, rb.axis_value, rb.trial)
        assert (ra.eps_fd, ra.eps_eta, ra.eps_v) \
            == (rb.eps_fd, rb.eps_eta, rb.eps_v)


def test_run_sweep_failure_fraction():
    # -35 dB per sample stays below the detection gate even after the
    # Golay processing gain: every panel rejected
    config = _tiny_config(fixed={"snr_db": -35.0, "window_ms": 2.0},
                          n_trials=5, use_waveform=True)
    with pytest.raises(SweepFailureError):
        run_sweep(config)


def test_box_stats_values():
    stats = box_stats([1.0, 2.0, 3.0, 4.0, 5.0])
    assert stats["median"] == 3.0
    assert stats["q25"] == 2.0
    assert stats["q75"] == 4.0
    assert stats["whisker_lo"] == 1.0
    assert stats["whisker_hi"] == 5.0
    assert stats["n"] == 5


def test_box_stats_single_value():
    stats = box_stats([2.5])
    assert stats["median"] == 2.5
    assert stats["q25"] == 2.5
    assert stats["whisker_lo"] == 2.5
    assert stats["whisker_hi"] == 2.5


def test_box_stats_whiskers_clip_to_data():
    values = list(np.linspace(0.0, 1.0, 99)) + [50.0]
    stats = box_stats(values)
    # the outlier is beyond q75 + 1.5 IQR: whiskers stay at the data
    assert stats["whisker_hi"] < 50.0
    assert stats["whisker_lo"] >= min(values)


def test_box_stats_median_statistical():
    rng = np.random.default_rng(33)
    stats = box_stats(rng.normal(0.0, 1.0, 10_000))
    assert abs(stats["median"]) < 0.03
    assert stats["q25"] == pytest.approx(-0.6745, abs=0.05)


def test_summarize_layout():
    records = [
        Record(profile="60ghz", axis="n_static", axis_value=2.0, trial=t,
               eps_fd=0.01 * (t + 1), eps_eta=0.02, eps_v=0.03,
               converged=True, nls_micros=50.0)
        for t in range(5)
    ]
    summary = summarize(records)
    (cell,) = summary["cells"]
    assert cell["profile"] == "60ghz"
    assert cell["axis"] == "n_static"
    assert cell["eps_fd"]["median"] == 0.03
    assert cell["eps_eta"]["median"] == 0.02
    assert cell["n_converged"] == 5
    # wall times stay out of the summaries (not byte-reproducible)
    assert "nls_micros" not in json.dumps(summary)


def test_records_csv_roundtrip():
    config = _tiny_config(fixed={"snr_db": 10.0})
    result = run_sweep(config)
    buf = io.StringIO()
    write_records_csv(result.records, buf)
    buf.seek(0)
    loaded = read_records_csv(buf)
    assert len(loaded) == len(result.records)
    for ra, rb in zip(result.records, loaded):
        assert ra == rb


def test_summaries_json_deterministic():
    config = _tiny_config(axis_values=(2, 3), n_trials=4)
    texts = []
    for _ in range(2):
        result = run_sweep(config)
        buf = io.StringIO()
        write_summaries_json(result, buf)
        texts.append(buf.getvalue())
    assert texts[0] == texts[1]
    parsed = json.loads(texts[0])
    assert "cells" in parsed
    assert parsed["failures"] == []


def test_summaries_rebuild_from_csv():
    # the JSON statistics are a pure function of the records file
    config = _tiny_config(n_trials=6, fixed={"snr_db": 0.0})
    result = run_sweep(config)
    buf = io.StringIO()
    write_records_csv(result.records, buf)
    buf.seek(0)
    assert summarize(read_records_csv(buf)) == result.summaries


def test_t_sensitivity_scales_period():
    config = _tiny_config(n_trials=2, fixed=dict(NOISELESS))
    result = t_sensitivity("28ghz", [0.178, 0.356], config)
    assert all(cell["axis"] == "T_scale"
               for cell in result.summaries["cells"])
    # at the base period the noiseless estimate stays exact
    assert _cell(result, "28ghz", 1.0)["eps_fd"]["median"] < 1e-8
    assert _cell(result, "28ghz", 0.356 / 0.178)["n"] == 2


def test_resolved_fixed_rejects_unknown_keys():
    config = _tiny_config(fixed={"snr": 5.0})
    with pytest.raises(ValueError):
        config.resolved_fixed()
    assert _tiny_config().resolved_fixed() == DEFAULT_FIXED


def test_run_sweep_rejects_unknown_axis():
    config = _tiny_config(sweep_axis="bandwidth")
    with pytest.raises(ValueError):
        run_sweep(config)


def test_load_sweep_config(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(
        "[sweep]\n"
        'profiles = ["60ghz", "5ghz"]\n'
        'axis = "snr_db"\n'
        "values = [0.0, 5.0]\n"
        "trials = 11\n"
        "base_seed = 99\n"
        "static_rx = true\n"
        "[fixed]\n"
        "sigma_aoa_deg = 1.0\n"
    )
    config = load_sweep_config(path)
    assert config.profile_ids == ("60ghz", "5ghz")
    assert config.sweep_axis == "snr_db"
    assert config.axis_values == (0.0, 5.0)
    assert config.n_trials == 11
    assert config.base_seed == 99
    assert config.static_rx is True
    assert config.resolved_fixed()["sigma_aoa_deg"] == 1.0
    assert config.resolved_fixed()["snr_db"] == 5.0


def test_load_shipped_presets():
    import pathlib

    configs = sorted(pathlib.Path(__file__).parent.parent.joinpath(
        "configs").glob("*.toml"))
    assert len(configs) >= 4
    for path in configs:
        config = load_sweep_config(path)
        assert config.n_trials >= 1
        assert len(config.axis_values) >= 1


def test_load_sweep_config_noiseless_override(tmp_path):
    path = tmp_path / "noiseless.toml"
    path.write_text(
        "[sweep]\n"
        'profiles = ["60ghz"]\n'
        'axis = "n_static"\n'
        "values = [2]\n"
        "trials = 1\n"
        "[fixed]\n"
        "snr_db = inf\n"
        "sigma_aoa_deg = 0.0\n"
    )
    config = load_sweep_config(path)
    result = run_sweep(config)
    assert result.records[0].eps_fd < 1e-8
