"""Scenario sampling invariants and ground-truth angle identities."""

import math

import numpy as np
import pytest

import bidop.scenario as scenario_mod
from bidop.profiles import get_profile
from bidop.scenario import (ANGLE_MARGIN, InfeasibleScenarioError,
                            bistatic_angles, path_delays, path_frequencies,
                            rx_doppler, sample_scenario)
from bidop.wrapping import wrap_pi

from _helpers import manual_scenario

TWO_PI = 2.0 * math.pi


def _check_invariants(scn, profile):
    side = profile.area_side
    for pos in (scn.rx_pos, scn.target_pos, *scn.static_pos):
        assert np.all(pos >= 0.0) and np.all(pos <= side)
    assert np.linalg.norm(scn.rx_pos - scn.tx_pos) >= 1.0
    assert profile.v_min <= scn.v_rx <= profile.v_max
    assert 0.0 <= scn.eta < TWO_PI
    assert profile.f_min <= abs(scn.f_d_target) <= profile.f_max

    aoas = scn.all_aoas()
    assert aoas[0] == 0.0
    non_los = aoas[1:]
    assert np.min(np.abs(wrap_pi(non_los))) >= ANGLE_MARGIN
    gaps = np.abs(wrap_pi(aoas[:, None] - aoas[None, :]))
    iu = np.triu_indices(len(aoas), k=1)
    assert np.min(gaps[iu]) >= ANGLE_MARGIN
    assert np.min(np.abs(wrap_pi(non_los - 2.0 * scn.eta))) >= ANGLE_MARGIN

    delays = path_delays(scn)
    assert delays[0] == 0.0
    dgap = np.abs(delays[:, None] - delays[None, :])
    assert np.min(dgap[np.triu_indices(len(delays), k=1)]) \
        >= 1.5 / profile.bandwidth


def test_sample_scenario_invariants_seed7():
    profile = get_profile("60ghz")
    scn = sample_scenario(profile, 2, np.random.default_rng(7))
    assert scn.n_static == 2
    _check_invariants(scn, profile)


def test_sample_scenario_many_seeds():
    for pid in ("60ghz", "28ghz", "5ghz"):
        profile = get_profile(pid)
        rng = np.random.default_rng(100)
        for _ in range(50):
            _check_invariants(sample_scenario(profile, 3, rng), profile)


def test_sample_scenario_deterministic():
    profile = get_profile("28ghz")
    a = sample_scenario(profile, 4, np.random.default_rng(17))
    b = sample_scenario(profile, 4, np.random.default_rng(17))
    assert np.array_equal(a.rx_pos, b.rx_pos)
    assert np.array_equal(a.target_pos, b.target_pos)
    assert np.array_equal(a.static_pos, b.static_pos)
    assert (a.v_rx, a.eta, a.f_d_target) == (b.v_rx, b.eta, b.f_d_target)
    assert np.array_equal(a.aoa_static, b.aoa_static)


def test_sample_scenario_degenerate_doppler_interval():
    from dataclasses import replace

    profile = replace(get_profile("60ghz"), f_min=100.0, f_max=100.0)
    scn = sample_scenario(profile, 2, np.random.default_rng(21))
    assert abs(scn.f_d_target) == 100.0


def test_sample_scenario_eight_statics_margins():
    profile = get_profile("28ghz")
    scn = sample_scenario(profile, 8, np.random.default_rng(3))
    assert scn.n_static == 8
    _check_invariants(scn, profile)
    assert len(np.unique(scn.aoa_static)) == 8


def test_sample_scenario_static_rx():
    scn = sample_scenario(get_profile("5ghz"), 2,
                          np.random.default_rng(9), static_rx=True)
    assert scn.v_rx == 0.0
    assert abs(scn.f_d_target) >= 100.0


def test_sample_scenario_needs_two_statics():
    with pytest.raises(ValueError):
        sample_scenario(get_profile("60ghz"), 1, np.random.default_rng(0))


def test_sample_scenario_retry_exhaustion(monkeypatch):
    # an impossible pairwise margin forces all 1000 draws to fail
    monkeypatch.setattr(scenario_mod, "ANGLE_MARGIN", math.pi / 2.0)
    with pytest.raises(InfeasibleScenarioError):
        sample_scenario(get_profile("60ghz"), 4, np.random.default_rng(0))


def test_bistatic_angle_identity_seed11():
    # cos(xi_i) = cos(alpha_i - eta) for every path
    for pid in ("60ghz", "28ghz", "5ghz"):
        rng = np.random.default_rng(11)
        for _ in range(20):
            scn = sample_scenario(get_profile(pid), 3, rng)
            alphas, xis = bistatic_angles(scn)
            assert np.max(np.abs(np.cos(xis)
                                 - np.cos(alphas - scn.eta))) < 1e-12


def test_bistatic_angles_match_stored_aoas():
    scn = sample_scenario(get_profile("60ghz"), 5, np.random.default_rng(13))
    alphas, _ = bistatic_angles(scn)
    assert np.allclose(alphas, scn.all_aoas(), atol=1e-12)


def test_bistatic_angles_heading_zero():
    # eta = 0: the elongation angle equals the AoA for every path
    scn = manual_scenario(tx=(0, 0), rx=(5, 0), target=(2, 3),
                          statics=[(1, -2), (4, 4)], v_rx=2.0, eta=0.0,
                          f_d=300.0)
    alphas, xis = bistatic_angles(scn)
    assert np.max(np.abs(np.cos(xis) - np.cos(alphas))) < 1e-12


def test_scatterer_along_heading():
    # pick eta equal to a static path's AoA: that path has xi = 0
    scn = manual_scenario(tx=(0, 0), rx=(5, 0), target=(2, 3),
                          statics=[(1, -2), (4, 4)], v_rx=2.0, eta=0.0,
                          f_d=300.0)
    from dataclasses import replace

    eta = float(scn.aoa_static[0])
    scn = replace(scn, eta=eta)
    alphas, xis = bistatic_angles(scn)
    assert math.cos(xis[2]) == pytest.approx(1.0, abs=1e-12)
    assert rx_doppler(scn, 2, 0.005) == pytest.approx(scn.v_rx / 0.005,
                                                      rel=1e-12)


def test_rx_doppler_trivials():
    scn = manual_scenario(tx=(0, 0), rx=(5, 0), target=(2, 3),
                          statics=[(1, -2), (4, 4)], v_rx=0.0, eta=1.0,
                          f_d=250.0)
    for i in range(4):
        assert rx_doppler(scn, i, 0.01) == 0.0

    # perpendicular heading kills the LoS Doppler
    from dataclasses import replace

    scn = replace(scn, v_rx=5.0, eta=math.pi / 2.0)
    assert abs(rx_doppler(scn, 0, 0.005)) < 1e-12

    # heading along the LoS gives the full v/lambda on the LoS path
    scn = replace(scn, eta=0.0)
    assert rx_doppler(scn, 0, 0.005) == pytest.approx(1000.0, rel=1e-12)


def test_rx_doppler_bounded():
    rng = np.random.default_rng(31)
    profile = get_profile("5ghz")
    for _ in range(25):
        scn = sample_scenario(profile, 3, rng)
        bound = scn.v_rx / profile.wavelength + 1e-9
        for i in range(scn.n_static + 2):
            assert abs(rx_doppler(scn, i, profile.wavelength)) <= bound


def test_path_frequencies_layout():
    profile = get_profile("60ghz")
    scn = sample_scenario(profile, 3, np.random.default_rng(41))
    freqs = path_frequencies(scn, profile.wavelength)
    assert len(freqs) == scn.n_static + 2
    assert freqs[0] == pytest.approx(rx_doppler(scn, 0, profile.wavelength))
    assert freqs[1] == pytest.approx(
        scn.f_d_target + rx_doppler(scn, 1, profile.wavelength))
    for i in range(2, 5):
        assert freqs[i] == pytest.approx(
            rx_doppler(scn, i, profile.wavelength))


def test_path_delays_positive_excess():
    scn = sample_scenario(get_profile("28ghz"), 4, np.random.default_rng(51))
    delays = path_delays(scn)
    assert delays[0] == 0.0
    assert np.all(delays[1:] > 0.0)
