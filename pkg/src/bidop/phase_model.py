"""Forward model for the K-frame mod-2pi multipath phase observations.

Synthesizes per-path phases phi_i[k] = Psi_o(kT) + ang(A_i) + 2pi k T f_i
+ w_i[k] observed modulo 2pi, where Psi_o collects the CFO/PO clock
nuisances common to all paths, f_i the per-path Doppler slopes, and w_i
SNR-controlled phase noise. Also produces the window-averaged noisy AoA
measurements consumed by the estimator.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .profiles import CarrierProfile
from .scenario import Scenario, path_frequencies
from .wrapping import TWO_PI, add_phases_wrapped, quantize_phase, wrap_2pi

DEFAULT_SIGMA_PO = math.pi / 2.0


@dataclass(frozen=True)
class NuisanceTrace:
    """Per-frame clock nuisances of one processing window.

    Attributes:
        cfo: residual CFO f_o(kT) per frame (Hz), length K.
        po: phase offset psi_o(kT) per frame (rad), length K.
        combined: Psi_o(kT) = psi_o(kT) + 2pi f_o(kT) kT (rad), length K.
        T: frame period (s) used to build `combined`.
    """

    cfo: np.ndarray
    po: np.ndarray
    combined: np.ndarray
    T: float


@dataclass(frozen=True)
class PhasePanel:
    """K x (S+2) matrix of wrapped phase observations plus noisy AoAs.

    Attributes:
        K: frame count.
        T: frame period (s).
        phases: (K, S+2) wrapped phases in [0, 2pi), columns ordered
            [LoS, target, static_1..static_S].
        aoa_meas: measured AoAs (rad), length S+1, [target, statics];
            the LoS AoA is the 0 reference and is not stored.
        true_theta: ground-truth (f_d_target, eta, v_rx) for scoring,
            or None for panels loaded without embedded truth.
        path_gains: per-path complex coefficients A_i used in synthesis.
    """

    K: int
    T: float
    phases: np.ndarray
    aoa_meas: np.ndarray
    true_theta: tuple[float, float, float] | None
    path_gains: np.ndarray


def phase_noise_std(snr_db: float | None) -> float:
    """Phase-error std (rad) of a complex observation at the given SNR.

    Small-angle result for a unit-amplitude sample in white noise:
    sigma_w = 1/sqrt(2 * SNR_linear). None or +inf means noiseless.
    """
    if snr_db is None or math.isinf(snr_db):
        return 0.0
    return 1.0 / math.sqrt(2.0 * 10.0 ** (snr_db / 10.0))


def synthesize_nuisance(
    profile: CarrierProfile,
    K: int,
    sigma_po: float = DEFAULT_SIGMA_PO,
    rng: np.random.Generator | None = None,
) -> NuisanceTrace:
    """Draw per-frame i.i.d. CFO and PO traces and their combined offset.

    Args:
        profile: provides the CFO std sigma_cfo (Hz).
        K: frame count, >= 2.
        sigma_po: phase-offset std (rad); defaults to pi/2.
        rng: seeded generator; draws cfo then po.

    Returns:
        NuisanceTrace with combined[k] = po[k] + 2pi * cfo[k] * k * T.
    """
    if K < 2:
        raise ValueError("need at least 2 frames")
    if rng is None:
        rng = np.random.default_rng()
    cfo = rng.normal(0.0, profile.sigma_cfo, K) if profile.sigma_cfo > 0 \
        else np.zeros(K)
    po = rng.normal(0.0, sigma_po, K) if sigma_po > 0 else np.zeros(K)
    k = np.arange(K, dtype=float)
    combined = po + TWO_PI * cfo * k * profile.T
    return NuisanceTrace(cfo=cfo, po=po, combined=combined, T=profile.T)


def synthesize_panel(
    scenario: Scenario,
    profile: CarrierProfile,
    K: int,
    snr_db: float | None,
    sigma_aoa: float,
    rng: np.random.Generator,
    nuisance: NuisanceTrace | None = None,
    sigma_po: float = DEFAULT_SIGMA_PO,
) -> PhasePanel:
    """Synthesize the wrapped phase panel for one processing window.

    Per-path deterministic phases ang(A_i) + 2pi k T f_i (+ phase noise)
    are wrapped and snapped to a dyadic grid before the equally snapped
    common offset Psi_o is folded in, so LoS-referenced differences of
    the output cancel Psi_o bit-exactly in the noiseless case.

    The AoA of each path is measured once per frame with additive
    N(0, sigma_aoa^2) error and averaged over the window; `aoa_meas`
    stores the window averages.

    Draw order (part of the reproducibility contract): nuisance (only
    when not supplied), path gain angles, phase noise, AoA noise.

    Args:
        scenario: geometry/motion ground truth.
        profile: carrier profile (wavelength, T, sigma_cfo).
        K: frame count, >= 2.
        snr_db: per-observation SNR in dB; None or +inf disables phase
            noise (sigma_w = 1/sqrt(2*10^(snr_db/10)) otherwise).
        sigma_aoa: per-frame AoA measurement std (rad).
        rng: seeded generator.
        nuisance: optional externally drawn NuisanceTrace (length K).
        sigma_po: PO std forwarded to synthesize_nuisance when drawing.

    Returns:
        PhasePanel with phases in [0, 2pi).
    """
    if K < 2:
        raise ValueError("need at least 2 frames")
    if nuisance is None:
        nuisance = synthesize_nuisance(profile, K, sigma_po, rng)
    if len(nuisance.combined) != K:
        raise ValueError("nuisance trace length does not match K")

    n_paths = scenario.n_static + 2
    freqs = path_frequencies(scenario, profile.wavelength)
    gain_angles = rng.uniform(0.0, TWO_PI, n_paths)
    sigma_w = phase_noise_std(snr_db)
    k = np.arange(K, dtype=float)[:, None]
    det = gain_angles[None, :] + TWO_PI * k * profile.T * freqs[None, :]
    if sigma_w > 0.0:
        det = det + rng.normal(0.0, sigma_w, (K, n_paths))
    base = quantize_phase(wrap_2pi(det))
    psi = quantize_phase(wrap_2pi(nuisance.combined))
    phases = add_phases_wrapped(base, psi[:, None])

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
        path_gains=np.exp(1j * gain_angles),
    )


# ---------------------------------------------------------------------------
# panel serialization (columnar CSV: k, path_id, phase, aoa)

_PANEL_MAGIC = "# bidop panel v1"


def write_panel_csv(panel: PhasePanel, fp, profile: CarrierProfile) -> None:
    """Write a panel to a text stream in the columnar k,path_id,phase,aoa
    format, with metadata and ground truth embedded as '#' comments.

    path_id 0 is the LoS reference, 1 the target, 2.. the statics.
    """
    n_paths = panel.phases.shape[1]
    fp.write(_PANEL_MAGIC + "\n")
    fp.write(f"# profile: {profile.profile_id}\n")
    fp.write(f"# T: {panel.T!r}\n")
    fp.write(f"# wavelength: {profile.wavelength!r}\n")
    if panel.true_theta is not None:
        fp.write(f"# true_f_d_target: {panel.true_theta[0]!r}\n")
        fp.write(f"# true_eta: {panel.true_theta[1]!r}\n")
        fp.write(f"# true_v_rx: {panel.true_theta[2]!r}\n")
    fp.write("k,path_id,phase,aoa\n")
    for k in range(panel.K):
        for i in range(n_paths):
            aoa = 0.0 if i == 0 else float(panel.aoa_meas[i - 1])
            fp.write(f"{k},{i},{float(panel.phases[k, i])!r},{aoa!r}\n")


def read_panel_csv(fp) -> tuple[PhasePanel, dict]:
    """Read a panel written by :func:`write_panel_csv`.

    Returns:
        (panel, meta): meta maps comment keys (profile, T, wavelength,
        true_*) to parsed values; unknown comment keys are kept verbatim.

    Raises:
        ValueError: malformed header, rows, or an incomplete panel.
    """
    meta: dict = {}
    header = None
    rows = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if ":" in body:
                key, _, val = body.partition(":")
                key, val = key.strip(), val.strip()
                try:
                    meta[key] = float(val)
                except ValueError:
                    meta[key] = val
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if header != ["k", "path_id", "phase", "aoa"]:
                raise ValueError(f"unexpected panel header {header!r}")
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"malformed panel row {line!r}")
        rows.append((int(parts[0]), int(parts[1]),
                     float(parts[2]), float(parts[3])))
    if header is None or not rows:
        raise ValueError("panel file has no data rows")
    if "T" not in meta:
        raise ValueError("panel file lacks the '# T:' metadata line")

    ks = sorted({r[0] for r in rows})
    paths = sorted({r[1] for r in rows})
    K, P = len(ks), len(paths)
    if ks != list(range(K)) or paths != list(range(P)):
        raise ValueError("panel rows do not form a dense k x path grid")
    if len(rows) != K * P:
        raise ValueError("panel rows are missing or duplicated")
    phases = np.empty((K, P))
    aoa_meas = np.zeros(P - 1)
    for k, i, phase, aoa in rows:
        phases[k, i] = phase
        if i > 0:
            aoa_meas[i - 1] = aoa

    truth_keys = ("true_f_d_target", "true_eta", "true_v_rx")
    true_theta = None
    if all(key in meta for key in truth_keys):
        true_theta = tuple(float(meta[key]) for key in truth_keys)
    panel = PhasePanel(
        K=K,
        T=float(meta["T"]),
        phases=phases,
        aoa_meas=aoa_meas,
        true_theta=true_theta,
        path_gains=np.ones(P, dtype=complex),
    )
    return panel, meta


def panel_to_csv_text(panel: PhasePanel, profile: CarrierProfile) -> str:
    """Serialize a panel to a CSV string (convenience wrapper)."""
    buf = io.StringIO()
    write_panel_csv(panel, buf, profile)
    return buf.getvalue()
