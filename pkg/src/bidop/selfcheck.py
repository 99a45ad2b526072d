"""Fast self-validation suite behind `bidop validate`.

Runs seconds-scale spot checks of the core invariants (exact nuisance
cancellation, closed-form/NLS round trips, Jacobian correctness, Golay
complementarity, waveform round trip, panel serialization) and reports
one pass/fail line each. The full statistical studies live in the test
suite, not here.
"""

from __future__ import annotations

import io
import math
from dataclasses import replace

import numpy as np

from . import estimator, phase_model, waveform
from .profiles import get_profile
from .scenario import bistatic_angles, sample_scenario
from .wrapping import wrap_pi


def _random_case(profile_id: str, rng, n_static: int = 2):
    """A scenario with its exact AoAs and true theta, margins enforced."""
    profile = get_profile(profile_id)
    scenario = sample_scenario(profile, n_static, rng)
    aoas = scenario.all_aoas()[1:]
    theta = (scenario.f_d_target, scenario.eta, scenario.v_rx)
    return profile, scenario, aoas, theta


def _diff_from_theta(theta, aoas, profile):
    bar = estimator.g_model(theta, aoas, profile.wavelength, profile.T)
    return estimator.DiffSeries(delta=bar[None, :], delta_bar=bar,
                                T=profile.T, aoas=np.asarray(aoas))


def check_exact_cancellation(seed: int) -> None:
    """Noiseless estimates are bit-identical across nuisance draws."""
    rng = np.random.default_rng(seed)
    for _ in range(20):
        profile, scenario, _, _ = _random_case("60ghz", rng)
        big = replace(profile, sigma_cfo=10 * profile.sigma_cfo)
        outs = []
        for nu_seed in (1, 2):
            nu = phase_model.synthesize_nuisance(
                big, 96, rng=np.random.default_rng(nu_seed))
            panel = phase_model.synthesize_panel(
                scenario, profile, 96, None, 0.0,
                np.random.default_rng(7), nuisance=nu)
            outs.append(estimator.estimate(panel, profile))
        assert outs[0].f_d_target == outs[1].f_d_target
        assert outs[0].eta == outs[1].eta
        assert outs[0].v_rx == outs[1].v_rx


def check_closed_form_roundtrip(seed: int) -> None:
    """closed_form inverts g_model to 1e-9 relative on clean inputs."""
    rng = np.random.default_rng(seed)
    for _ in range(50):
        profile, _, aoas, theta = _random_case("28ghz", rng)
        diff = _diff_from_theta(theta, aoas, profile)
        est = estimator.closed_form(diff, profile.wavelength)
        for true, got in zip(theta, (est.f_d_target, est.eta, est.v_rx)):
            assert abs(true - got) <= 1e-9 * max(1.0, abs(true))


def check_nls_roundtrip(seed: int) -> None:
    """Perturbed init converges back to the true theta within 1e-8."""
    rng = np.random.default_rng(seed)
    for _ in range(50):
        profile, _, aoas, theta = _random_case("60ghz", rng)
        diff = _diff_from_theta(theta, aoas, profile)
        init = estimator.ThetaEstimate(
            f_d_target=theta[0] + 10.0, eta=theta[1] + 0.05,
            v_rx=theta[2] + 0.1, residual_norm=math.inf)
        est = estimator.nls_refine(diff, init, profile.wavelength)
        for true, got in zip(theta, (est.f_d_target, est.eta, est.v_rx)):
            assert abs(true - got) <= 1e-8 * max(1.0, abs(true))


def check_jacobian(seed: int) -> None:
    """Analytic Jacobian matches central differences to 1e-6."""
    rng = np.random.default_rng(seed)
    h = 1e-6
    for _ in range(20):
        profile, _, aoas, theta = _random_case("5ghz", rng)
        jac = estimator.g_jacobian(theta, aoas, profile.wavelength, profile.T)
        for j in range(3):
            up = list(theta)
            dn = list(theta)
            up[j] += h
            dn[j] -= h
            fd = (estimator.g_model(up, aoas, profile.wavelength, profile.T)
                  - estimator.g_model(dn, aoas, profile.wavelength,
                                      profile.T)) / (2 * h)
            scale = max(1.0, float(np.max(np.abs(jac[:, j]))))
            assert np.max(np.abs(fd - jac[:, j])) <= 1e-6 * scale


def check_golay(seed: int) -> None:
    """Complementary autocorrelations sum to 2 L delta, all lengths."""
    length = 8
    while length <= 128:
        a, b = waveform.golay_pair(length)
        auto = (np.correlate(a, a, "full") + np.correlate(b, b, "full"))
        expect = np.zeros(2 * length - 1)
        expect[length - 1] = 2 * length
        assert np.allclose(auto, expect, atol=1e-12)
        length *= 2


def check_waveform_roundtrip(seed: int) -> None:
    """Noiseless on-grid taps recovered to 1e-6 by the CIR estimator."""
    rng = np.random.default_rng(seed)
    for profile_id in ("60ghz", "28ghz", "5ghz"):
        profile = get_profile(profile_id)
        pilot = waveform.make_pilot(profile, rng)
        gains = [0.9 * np.exp(0.3j), 0.4 * np.exp(-1.1j)]
        bins = [0, 37]
        chan = waveform.TapChannel(
            taps=tuple((b / pilot.sample_rate, g, 0.0)
                       for b, g in zip(bins, gains)),
            noise_var=0.0)
        received = waveform.propagate(pilot, chan, 0, profile.T)
        cir = waveform.estimate_cir(received, pilot)
        for b, g in zip(bins, gains):
            assert abs(cir[b] - g) <= 1e-6 * abs(g)


def check_panel_io(seed: int) -> None:
    """Panel CSV round trip preserves phases, AoAs, and the truth."""
    rng = np.random.default_rng(seed)
    profile, scenario, _, _ = _random_case("28ghz", rng)
    panel = phase_model.synthesize_panel(scenario, profile, 16, 10.0,
                                         math.radians(5), rng)
    buf = io.StringIO(phase_model.panel_to_csv_text(panel, profile))
    back, meta = phase_model.read_panel_csv(buf)
    assert np.array_equal(back.phases, panel.phases)
    assert np.array_equal(back.aoa_meas, panel.aoa_meas)
    assert back.true_theta == panel.true_theta
    assert meta["profile"] == "28ghz"


def check_wrap_containment(seed: int) -> None:
    """Noiseless differences stay in (-pi, pi] under the T bound."""
    rng = np.random.default_rng(seed)
    for profile_id in ("60ghz", "28ghz", "5ghz"):
        profile, scenario, _, _ = _random_case(profile_id, rng)
        panel = phase_model.synthesize_panel(scenario, profile, 32, None,
                                             0.0, rng)
        diff = estimator.difference_and_average(
            estimator.cancel_offsets(panel), panel.T)
        assert np.all(diff.delta > -math.pi)
        assert np.all(diff.delta <= math.pi)
        assert np.allclose(wrap_pi(diff.delta), diff.delta)


CHECKS = (
    ("exact-cancellation", check_exact_cancellation),
    ("closed-form-roundtrip", check_closed_form_roundtrip),
    ("nls-roundtrip", check_nls_roundtrip),
    ("jacobian", check_jacobian),
    ("golay-complementarity", check_golay),
    ("waveform-roundtrip", check_waveform_roundtrip),
    ("panel-io", check_panel_io),
    ("wrap-containment", check_wrap_containment),
)


def run_all(seed: int = 0, report=None) -> int:
    """Run every check; report one line each; return the failure count."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn(seed)
            status = "PASS"
        except AssertionError as exc:
            failures += 1
            status = f"FAIL ({exc})" if str(exc) else "FAIL"
        except Exception as exc:
            failures += 1
            status = f"FAIL ({type(exc).__name__}: {exc})"
        if report is not None:
            report(f"{status:4s}  {name}" if status == "PASS"
                   else f"{status}  {name}")
    return failures
