"""Built-in carrier profiles for the 60/28/5 GHz evaluation bands.

Each profile bundles the carrier, bandwidth, channel-estimation period,
speed/Doppler ranges, mobility-area side and CFO std used by the
simulator; the wavelength is always derived exactly from c/f_c.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

SPEED_OF_LIGHT = 299792458.0

GOLAY_SC = "golay_sc"
OFDM_BPSK = "ofdm_bpsk"


@dataclass(frozen=True)
class CarrierProfile:
    """Radio and mobility parameters for one evaluation band.

    Attributes:
        profile_id: short identifier used in configs and result files.
        f_c: carrier frequency (Hz).
        wavelength: carrier wavelength (m), exactly c / f_c.
        bandwidth: sounding bandwidth B (Hz); the CIR bin is 1/B s.
        subcarrier_spacing: OFDM spacing (Hz), None for single-carrier.
        T: channel-estimation (frame) period (s).
        f_max: largest RX/target Doppler magnitude (Hz), v_max/wavelength.
        f_min: smallest target Doppler magnitude (Hz).
        v_max: largest RX speed (m/s).
        v_min: smallest RX speed (m/s).
        area_side: side s of the square mobility area (m).
        sigma_cfo: per-frame CFO standard deviation (Hz).
        waveform_kind: "golay_sc" or "ofdm_bpsk".
    """

    profile_id: str
    f_c: float
    wavelength: float
    bandwidth: float
    subcarrier_spacing: float | None
    T: float
    f_max: float
    f_min: float
    v_max: float
    v_min: float
    area_side: float
    sigma_cfo: float
    waveform_kind: str


def _make_profile(profile_id, f_c, bandwidth, subcarrier_spacing, T, f_min,
                  v_max, v_min, area_side, sigma_cfo, waveform_kind):
    wavelength = SPEED_OF_LIGHT / f_c
    return CarrierProfile(
        profile_id=profile_id,
        f_c=f_c,
        wavelength=wavelength,
        bandwidth=bandwidth,
        subcarrier_spacing=subcarrier_spacing,
        T=T,
        f_max=v_max / wavelength,
        f_min=f_min,
        v_max=v_max,
        v_min=v_min,
        area_side=area_side,
        sigma_cfo=sigma_cfo,
        waveform_kind=waveform_kind,
    )


# T must stay strictly below 1/(6 f_max). At 5 GHz that bound is
# 0.49966 ms, so the nominal 0.5 ms period is floored to 0.4996 ms.
PROFILES = {
    "60ghz": _make_profile(
        "60ghz", 60e9, 1.76e9, None, 0.166e-3,
        f_min=100.0, v_max=5.0, v_min=0.5, area_side=20.0,
        sigma_cfo=0.22e6, waveform_kind=GOLAY_SC,
    ),
    "28ghz": _make_profile(
        "28ghz", 28e9, 0.4e9, 120e3, 0.178e-3,
        f_min=100.0, v_max=10.0, v_min=0.5, area_side=50.0,
        sigma_cfo=0.12e6, waveform_kind=OFDM_BPSK,
    ),
    "5ghz": _make_profile(
        "5ghz", 5e9, 0.16e9, 78.125e3, 0.4996e-3,
        f_min=100.0, v_max=20.0, v_min=0.5, area_side=100.0,
        sigma_cfo=0.02e6, waveform_kind=OFDM_BPSK,
    ),
}

PROFILE_IDS = tuple(PROFILES)


def get_profile(profile_id: str) -> CarrierProfile:
    """Look up a built-in profile by id ("60ghz", "28ghz", "5ghz")."""
    try:
        return PROFILES[profile_id.lower()]
    except KeyError:
        raise KeyError(
            f"unknown profile {profile_id!r}; choose from {sorted(PROFILES)}"
        ) from None


def validate_profile(profile: CarrierProfile) -> None:
    """Check the profile invariants; raises ValueError on violation.

    Scaled copies from :func:`scale_period` may legitimately violate the
    ambiguity bound and are not validated.
    """
    if profile.wavelength != SPEED_OF_LIGHT / profile.f_c:
        raise ValueError("wavelength must equal c / f_c exactly")
    if not profile.T < 1.0 / (6.0 * profile.f_max):
        raise ValueError("frame period violates T < 1/(6 f_max)")
    if not (0.0 < profile.f_min <= profile.f_max):
        raise ValueError("need 0 < f_min <= f_max")
    if not (0.0 < profile.v_min <= profile.v_max):
        raise ValueError("need 0 < v_min <= v_max")
    if profile.bandwidth <= 0 or profile.area_side <= 0:
        raise ValueError("bandwidth and area_side must be positive")
    if profile.waveform_kind == OFDM_BPSK and not profile.subcarrier_spacing:
        raise ValueError("ofdm_bpsk profiles need a subcarrier spacing")


def scale_period(profile: CarrierProfile, scale: float) -> CarrierProfile:
    """Return a copy with the frame period multiplied by `scale`.

    Used by the T-sensitivity study; scales beyond the ambiguity bound
    are allowed on purpose (that regime is the point of the study).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    return replace(profile, T=profile.T * scale)


def frames_in_window(profile: CarrierProfile, window_ms: float) -> int:
    """Number of frames K = round(window / T) for a window in ms."""
    k = round(window_ms * 1e-3 / profile.T)
    if k < 2:
        raise ValueError(
            f"window {window_ms} ms holds fewer than 2 frames at T={profile.T}"
        )
    return k
