"""Signal-level ground-truth path: pilot transmission, CIR re-estimation.

Transmits a known pilot (complementary Golay pair for single-carrier,
one BPSK OFDM symbol otherwise) through a discrete multipath tap channel
with AWGN, re-estimates the CIR per frame, and reads per-path peak
phases, producing PhasePanels that validate the phase-domain noise
mapping sigma_w = 1/sqrt(2 SNR).

Conventions: pilots have unit average per-sample power, and the AWGN
variance for a requested post-processing SNR is noise_var = G / SNR_lin
with processing gain G = 2 L_g (Golay) or N_sc (OFDM), so a unit tap's
CIR peak carries exactly SNR_lin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phase_model import NuisanceTrace, PhasePanel, synthesize_nuisance
from .profiles import CarrierProfile
from .scenario import Scenario, path_delays, path_frequencies
from .wrapping import TWO_PI, wrap_2pi

GOLAY_LENGTH = 128
GOLAY_GUARD = 512
OFDM_CP_FRACTION = 0.25
SINC_HALF_TAPS = 4
KAISER_BETA = 8.6
DETECTION_RATIO = 3.0


class PanelRejectedError(Exception):
    """A path's CIR peak fell below the detection threshold."""


@dataclass(frozen=True)
class PilotWaveform:
    """Known pilot sequence and the metadata needed to invert it.

    Attributes:
        kind: "golay_sc" or "ofdm_bpsk".
        samples: complex baseband pilot, unit average power.
        sample_rate: Hz (the profile bandwidth, up to subcarrier
            rounding for OFDM where it is n_subcarriers * spacing).
        golay_pair: (a, b) complementary pair for golay_sc, else None.
        pilot_symbols: per-subcarrier BPSK values for ofdm_bpsk.
        n_subcarriers: subcarrier count (0 for golay_sc).
        cir_length: delay bins produced by estimate_cir.
    """

    kind: str
    samples: np.ndarray
    sample_rate: float
    golay_pair: tuple[np.ndarray, np.ndarray] | None
    pilot_symbols: np.ndarray | None
    n_subcarriers: int
    cir_length: int


@dataclass(frozen=True)
class TapChannel:
    """Discrete multipath channel: (delay s, complex gain, doppler Hz)
    triples sorted by delay, per-sample AWGN variance, timing offset."""

    taps: tuple[tuple[float, complex, float], ...]
    noise_var: float
    to: float = 0.0


def golay_pair(length: int) -> tuple[np.ndarray, np.ndarray]:
    """Recursive complementary Golay pair of the given power-of-two
    length; autocorr(a) + autocorr(b) = 2*length*delta exactly."""
    if length < 1 or length & (length - 1):
        raise ValueError("Golay length must be a power of two")
    a = np.array([1.0 + 0j])
    b = np.array([1.0 + 0j])
    while len(a) < length:
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return a, b


def make_pilot(profile: CarrierProfile, rng: np.random.Generator) -> PilotWaveform:
    """Build the pilot for a profile's waveform kind.

    golay_sc: [a, guard, b, guard] with L_g = 128 and guard zeros long
    enough for the largest simulated excess delay. ofdm_bpsk: one OFDM
    symbol, N_sc = round(B / spacing) BPSK pilots drawn from rng, cyclic
    prefix 25% of the symbol.
    """
    if profile.waveform_kind == "golay_sc":
        a, b = golay_pair(GOLAY_LENGTH)
        guard = np.zeros(GOLAY_GUARD, dtype=complex)
        samples = np.concatenate([a, guard, b, guard])
        return PilotWaveform(
            kind="golay_sc",
            samples=samples,
            sample_rate=profile.bandwidth,
            golay_pair=(a, b),
            pilot_symbols=None,
            n_subcarriers=0,
            cir_length=GOLAY_GUARD,
        )
    if profile.waveform_kind == "ofdm_bpsk":
        if not profile.subcarrier_spacing:
            raise ValueError("ofdm_bpsk requires a subcarrier spacing")
        n_sc = round(profile.bandwidth / profile.subcarrier_spacing)
        symbols = rng.choice([-1.0, 1.0], n_sc)
        body = np.fft.ifft(symbols) * math.sqrt(n_sc)
        n_cp = round(OFDM_CP_FRACTION * n_sc)
        samples = np.concatenate([body[-n_cp:], body])
        return PilotWaveform(
            kind="ofdm_bpsk",
            samples=samples,
            sample_rate=n_sc * profile.subcarrier_spacing,
            golay_pair=None,
            pilot_symbols=symbols,
            n_subcarriers=n_sc,
            cir_length=n_cp,
        )
    raise ValueError(f"unknown waveform kind {profile.waveform_kind!r}")


def _delay_kernel(frac: float) -> np.ndarray:
    """Kaiser-windowed sinc interpolation kernel for a fractional delay
    frac in (0, 1), 8 taps spanning offsets -3..4, unit DC gain."""
    offsets = np.arange(-SINC_HALF_TAPS + 1, SINC_HALF_TAPS + 1, dtype=float)
    kernel = np.sinc(offsets - frac) * np.kaiser(2 * SINC_HALF_TAPS, KAISER_BETA)
    return kernel / kernel.sum()


def _add_delayed(buf: np.ndarray, samples: np.ndarray, delay_bins: float,
                 gain: complex) -> None:
    """Accumulate gain * samples delayed by delay_bins into buf.

    Integer delays shift exactly; fractional delays use the windowed
    sinc. Spill past either end of buf is clipped (the guard/CP sizing
    in propagate keeps observable content inside).
    """
    if delay_bins < 0:
        raise ValueError("negative tap delay")
    n0 = int(math.floor(delay_bins))
    frac = delay_bins - n0
    if frac == 0.0:
        n = min(len(samples), len(buf) - n0)
        if n > 0:
            buf[n0:n0 + n] += gain * samples[:n]
        return
    kernel = _delay_kernel(frac)
    contrib = np.convolve(samples, kernel)
    start = n0 - (SINC_HALF_TAPS - 1)
    lo = max(0, -start)
    hi = min(len(contrib), len(buf) - start)
    if hi > lo:
        buf[start + lo:start + hi] += gain * contrib[lo:hi]


def propagate(
    pilot: PilotWaveform,
    chan: TapChannel,
    k: int,
    T: float,
    rng: np.random.Generator | None = None,
    common_phase: float = 0.0,
) -> np.ndarray:
    """Received samples of frame k: each tap contributes the pilot
    delayed by (tau_m + to) and rotated by its Doppler phase
    2 pi f_m k T plus the frame-common offset, plus AWGN of variance
    noise_var (skipped when 0)."""
    out = np.zeros(len(pilot.samples), dtype=complex)
    margin = 2 * SINC_HALF_TAPS
    for delay, gain, doppler in chan.taps:
        bins = (delay + chan.to) * pilot.sample_rate
        if bins > pilot.cir_length - margin:
            raise ValueError(
                f"tap delay {bins:.1f} bins beyond the CIR window "
                f"({pilot.cir_length} bins)")
        phase = TWO_PI * doppler * k * T + common_phase
        rot = gain * complex(math.cos(phase), math.sin(phase))
        _add_delayed(out, pilot.samples, bins, rot)
    if chan.noise_var > 0.0:
        if rng is None:
            raise ValueError("noise_var > 0 requires an rng")
        scale = math.sqrt(chan.noise_var / 2.0)
        out += scale * (rng.standard_normal(len(out))
                        + 1j * rng.standard_normal(len(out)))
    return out


def estimate_cir(received: np.ndarray, pilot: PilotWaveform) -> np.ndarray:
    """Estimate the discrete CIR from one received frame.

    golay_sc: complementary cross-correlation with both sequences,
    summed and scaled by 1/(2 L_g) so a unit tap gives a unit peak; the
    per-bin noise variance is noise_var/(2 L_g). ofdm_bpsk: CP removal,
    per-subcarrier least-squares division by the pilots, inverse DFT;
    truncated to the CP length; per-bin noise variance noise_var/N_sc.
    """
    if len(received) != len(pilot.samples):
        raise ValueError("received length does not match the pilot")
    if pilot.kind == "golay_sc":
        a, b = pilot.golay_pair
        l_g = len(a)
        l_cir = pilot.cir_length
        seg_a = received[:l_g + l_cir]
        seg_b = received[l_g + GOLAY_GUARD:l_g + GOLAY_GUARD + l_g + l_cir]
        corr_a = np.correlate(seg_a, a, mode="full")[l_g - 1:l_g - 1 + l_cir]
        corr_b = np.correlate(seg_b, b, mode="full")[l_g - 1:l_g - 1 + l_cir]
        return (corr_a + corr_b) / (2.0 * l_g)
    n_sc = pilot.n_subcarriers
    n_cp = pilot.cir_length
    body = received[n_cp:n_cp + n_sc]
    cfr = np.fft.fft(body) / (pilot.pilot_symbols * math.sqrt(n_sc))
    return np.fft.ifft(cfr)[:n_cp]


def extract_path_phases(
    cirs: np.ndarray,
    expected_bins: np.ndarray,
    detection_ratio: float = DETECTION_RATIO,
) -> np.ndarray:
    """Per-frame path phases read from CIR peaks at known delays.

    Path delays are constant within a processing window, so each
    path's peak bin is chosen once, within +-1 of the expected bin, by
    the window-averaged bin energy; phases are then that bin's, per
    frame, wrapped to [0, 2pi). (Per-frame re-selection would hop bins
    at low SNR and inflate the extracted phase noise.) Detection also
    integrates over the window: a path whose mean peak energy falls
    below detection_ratio times the off-path noise energy is
    undetectable and rejects the whole panel.

    Args:
        cirs: (K, L) per-frame CIR matrix.
        expected_bins: integer delay bins, pairwise >= 2 apart.

    Raises:
        ValueError: bins out of range or closer than 2 bins.
        PanelRejectedError: some path undetectable over the window.
    """
    cirs = np.atleast_2d(cirs)
    bins = np.asarray(expected_bins, dtype=int)
    l_cir = cirs.shape[1]
    if np.any(bins < 0) or np.any(bins >= l_cir - 1):
        raise ValueError("expected delay bin outside the CIR window")
    if len(bins) > 1 and np.min(np.abs(np.subtract.outer(bins, bins)
                                       + np.eye(len(bins)) * l_cir)) < 2:
        raise ValueError("expected delay bins collide (need >= 2 bins apart)")

    off = np.ones(l_cir, dtype=bool)
    for b in bins:
        off[max(0, b - 2):b + 3] = False
    noise_energy = (float(np.mean(np.abs(cirs[:, off]) ** 2))
                    if off.any() else 0.0)

    phases = np.empty((cirs.shape[0], len(bins)))
    for i, b in enumerate(bins):
        lo = max(0, b - 1)
        window = cirs[:, lo:b + 2]
        sel = int(np.argmax(np.mean(np.abs(window) ** 2, axis=0)))
        peaks = window[:, sel]
        peak_energy = float(np.mean(np.abs(peaks) ** 2))
        if peak_energy < detection_ratio * noise_energy:
            raise PanelRejectedError(
                f"path {i} undetectable over the window "
                f"(peak energy {peak_energy:.3g}, "
                f"noise floor {noise_energy:.3g})")
        phases[:, i] = wrap_2pi(np.arctan2(peaks.imag, peaks.real))
    return phases


def processing_gain(pilot: PilotWaveform) -> float:
    """Correlation/DFT gain from per-sample SNR to CIR-peak SNR."""
    if pilot.kind == "golay_sc":
        return 2.0 * GOLAY_LENGTH
    return float(pilot.n_subcarriers)


def peak_snr_db(profile: CarrierProfile, snr_db: float) -> float:
    """CIR-peak SNR (dB) for a per-received-sample SNR under the
    profile's pilot: snr_db plus the processing gain in dB. This is the
    mapping the sweep harness uses, since reported SNR values refer to
    the received samples while the extracted peak phases carry the
    post-gain noise."""
    if profile.waveform_kind == "golay_sc":
        gain = 2.0 * GOLAY_LENGTH
    else:
        if not profile.subcarrier_spacing:
            raise ValueError("ofdm_bpsk requires a subcarrier spacing")
        gain = float(round(profile.bandwidth / profile.subcarrier_spacing))
    return snr_db + 10.0 * math.log10(gain)


def scenario_to_taps(
    scenario: Scenario,
    profile: CarrierProfile,
    gain_angles: np.ndarray,
    noise_var: float,
) -> TapChannel:
    """Tap channel for a scenario: LoS-aligned excess delays, total
    per-path Doppler slopes, and geometric amplitudes 1/(d_tx d_rx)
    normalized to a unit LoS tap, with the given reflection phases."""
    delays = path_delays(scenario)
    freqs = path_frequencies(scenario, profile.wavelength)
    points = np.vstack([scenario.target_pos[None, :],
                        scenario.static_pos.reshape(-1, 2)])
    d_tx = np.linalg.norm(points - scenario.tx_pos[None, :], axis=1)
    d_rx = np.linalg.norm(scenario.rx_pos[None, :] - points, axis=1)
    d_los = float(np.linalg.norm(scenario.rx_pos - scenario.tx_pos))
    amps = np.concatenate(([1.0], d_los / (d_tx * d_rx)))
    gains = amps * np.exp(1j * gain_angles)
    taps = tuple((float(d), complex(g), float(f))
                 for d, g, f in zip(delays, gains, freqs))
    return TapChannel(taps=taps, noise_var=noise_var)


def synthesize_panel_waveform(
    scenario: Scenario,
    profile: CarrierProfile,
    K: int,
    snr_db: float | None,
    sigma_aoa: float,
    rng: np.random.Generator,
    nuisance: NuisanceTrace | None = None,
) -> PhasePanel:
    """PhasePanel produced through the full signal chain.

    Per frame: propagate the pilot through the scenario's tap channel
    (with the frame's common clock offset), re-estimate the CIR, and
    read the per-path peak phases. snr_db is the post-processing-gain
    CIR-peak SNR of the unit LoS tap; AoA measurement and averaging
    match the phase-domain synthesizer. Draw order: nuisance (when not
    supplied), pilot, gain angles, per-frame channel noise, AoA noise.

    Raises:
        PanelRejectedError: some path undetectable at some frame.
    """
    if K < 2:
        raise ValueError("need at least 2 frames")
    if nuisance is None:
        nuisance = synthesize_nuisance(profile, K, rng=rng)
    if len(nuisance.combined) != K:
        raise ValueError("nuisance trace length does not match K")
    pilot = make_pilot(profile, rng)
    n_paths = scenario.n_static + 2
    gain_angles = rng.uniform(0.0, TWO_PI, n_paths)
    if snr_db is None or math.isinf(snr_db):
        noise_var = 0.0
    else:
        noise_var = processing_gain(pilot) / 10.0 ** (snr_db / 10.0)
    chan = scenario_to_taps(scenario, profile, gain_angles, noise_var)

    cirs = np.empty((K, pilot.cir_length), dtype=complex)
    for k in range(K):
        received = propagate(pilot, chan, k, profile.T, rng,
                             common_phase=float(nuisance.combined[k]))
        cirs[k] = estimate_cir(received, pilot)
    bins = np.round(path_delays(scenario) * pilot.sample_rate).astype(int)
    phases = extract_path_phases(cirs, bins)

    true_aoas = scenario.all_aoas()[1:]
    if sigma_aoa > 0.0:
        aoa_err = rng.normal(0.0, sigma_aoa, (K, n_paths - 1)).mean(axis=0)
        aoa_meas = true_aoas + aoa_err
    else:
        aoa_meas = true_aoas.copy()

    return PhasePanel(
        K=K,
        T=profile.T,
        phases=phases,
        aoa_meas=aoa_meas,
        true_theta=(scenario.f_d_target, scenario.eta, scenario.v_rx),
        path_gains=np.asarray([g for _, g, _ in chan.taps]),
    )
