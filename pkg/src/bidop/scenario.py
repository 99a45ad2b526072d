"""Randomized 2-D bistatic geometries and their ground-truth angles.

The TX sits at the origin of an s x s area, the RX is placed uniformly
at >= 1 m from it, and the target plus S static scatterers are uniform
in the box. All AoAs are referenced to the LoS direction at the RX, and
per-path elongation angles xi satisfy cos(xi_i) = cos(alpha_i - eta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import CarrierProfile
from .wrapping import TWO_PI, wrap_2pi, wrap_pi

# margin (rad) kept around the closed-form degeneracy surfaces
# alpha = 0, alpha_i = alpha_j and alpha = 2*eta when sampling
ANGLE_MARGIN = math.radians(2.0)
# minimum pairwise path-delay separation in CIR bins (1/B each)
MIN_DELAY_SEP_BINS = 1.5
# rejection-sampling budget
N_RETRY = 1000
# RX keeps at least this distance (m) from the TX
MIN_TX_RX_DIST = 1.0
# scatterers keep at least this distance (m) from TX and RX
MIN_SCATTER_DIST = 0.1


class InfeasibleScenarioError(RuntimeError):
    """Raised when no valid geometry is found within the retry budget."""


@dataclass(frozen=True)
class Scenario:
    """Ground-truth geometry and motion for one processing window.

    Attributes:
        tx_pos, rx_pos: TX/RX coordinates (m).
        target_pos: moving-target coordinates (m).
        static_pos: (S, 2) static-scatterer coordinates (m).
        v_rx: RX speed (m/s), >= 0.
        eta: RX heading measured from the LoS elongation (rad, [0, 2pi)).
        f_d_target: bistatic Doppler of the target (Hz), either sign.
        aoa_los: LoS AoA, 0 by construction.
        aoa_target: target-path AoA (rad, [0, 2pi)).
        aoa_static: per-scatterer AoAs (rad, [0, 2pi)).
    """

    tx_pos: np.ndarray
    rx_pos: np.ndarray
    target_pos: np.ndarray
    static_pos: np.ndarray
    v_rx: float
    eta: float
    f_d_target: float
    aoa_los: float = 0.0
    aoa_target: float = field(default=0.0)
    aoa_static: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_static(self) -> int:
        return len(self.static_pos)

    def all_aoas(self) -> np.ndarray:
        """AoAs in path order [LoS, target, static_1..static_S]."""
        return np.concatenate(([self.aoa_los, self.aoa_target],
                               self.aoa_static))


def _arrival_angles(rx_pos, points):
    """Polar angles of the arrival elongations u_i = (rx - p)/|rx - p|."""
    u = rx_pos[None, :] - points
    return np.arctan2(u[:, 1], u[:, 0])


def _path_delays(tx_pos, rx_pos, points):
    """Excess path delays (s) relative to the LoS, per scatter point."""
    c = 299792458.0
    d_los = float(np.linalg.norm(rx_pos - tx_pos))
    d = (np.linalg.norm(points - tx_pos[None, :], axis=1)
         + np.linalg.norm(rx_pos[None, :] - points, axis=1))
    return (d - d_los) / c


def sample_scenario(
    profile: CarrierProfile,
    n_static: int,
    rng: np.random.Generator,
    static_rx: bool = False,
) -> Scenario:
    """Draw a random scenario satisfying all geometric feasibility rules.

    Per attempt the draws are, in order: RX position, target position,
    static positions, v_rx, eta, Doppler sign, Doppler magnitude. The
    whole attempt is rejected (and redrawn) unless:

    * the RX is >= 1 m from the TX and scatterers are >= 0.1 m from both;
    * every non-LoS AoA is >= 2 degrees away from 0 (condition i);
    * all path AoAs are pairwise >= 2 degrees apart (condition ii);
    * every non-LoS AoA is >= 2 degrees away from 2*eta (condition iii);
    * pairwise path delays (LoS included) differ by >= 1.5/B s, so the
      paths are resolvable in a CIR of bin width 1/B.

    Args:
        profile: carrier profile providing speed/Doppler ranges and area.
        n_static: number S of static scatterers, >= 2.
        rng: seeded random generator; the draw order above is part of
            the reproducibility contract.
        static_rx: freeze the RX (v_rx = 0, used by the baseline study).

    Returns:
        A Scenario with all invariants satisfied.

    Raises:
        InfeasibleScenarioError: no feasible draw in 1000 attempts.
        ValueError: n_static < 2.
    """
    if n_static < 2:
        raise ValueError("closed-form initialization needs n_static >= 2")
    side = profile.area_side
    tx_pos = np.zeros(2)
    min_delay_sep = MIN_DELAY_SEP_BINS / profile.bandwidth

    for _ in range(N_RETRY):
        rx_pos = rng.uniform(0.0, side, 2)
        target_pos = rng.uniform(0.0, side, 2)
        static_pos = rng.uniform(0.0, side, (n_static, 2))
        v_rx = rng.uniform(profile.v_min, profile.v_max)
        eta = rng.uniform(0.0, TWO_PI)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        f_d_target = sign * rng.uniform(profile.f_min, profile.f_max)
        if static_rx:
            v_rx = 0.0

        if np.linalg.norm(rx_pos - tx_pos) < MIN_TX_RX_DIST:
            continue
        points = np.vstack([target_pos, static_pos])
        d_tx = np.linalg.norm(points - tx_pos[None, :], axis=1)
        d_rx = np.linalg.norm(rx_pos[None, :] - points, axis=1)
        if np.min(d_tx) < MIN_SCATTER_DIST or np.min(d_rx) < MIN_SCATTER_DIST:
            continue

        phi_los = math.atan2(rx_pos[1] - tx_pos[1], rx_pos[0] - tx_pos[0])
        aoas = wrap_2pi(_arrival_angles(rx_pos, points) - phi_los)
        # conditions (i)-(iii) with margin, LoS AoA being 0
        if np.min(np.abs(wrap_pi(aoas))) < ANGLE_MARGIN:
            continue
        full = np.concatenate(([0.0], aoas))
        pair_gap = np.abs(wrap_pi(full[:, None] - full[None, :]))
        iu = np.triu_indices(len(full), k=1)
        if np.min(pair_gap[iu]) < ANGLE_MARGIN:
            continue
        if np.min(np.abs(wrap_pi(aoas - 2.0 * eta))) < ANGLE_MARGIN:
            continue

        delays = np.concatenate(([0.0], _path_delays(tx_pos, rx_pos, points)))
        gap = np.abs(delays[:, None] - delays[None, :])
        if np.min(gap[np.triu_indices(len(delays), k=1)]) < min_delay_sep:
            continue

        return Scenario(
            tx_pos=tx_pos,
            rx_pos=rx_pos,
            target_pos=target_pos,
            static_pos=static_pos,
            v_rx=float(v_rx),
            eta=float(eta),
            f_d_target=float(f_d_target),
            aoa_target=float(aoas[0]),
            aoa_static=aoas[1:],
        )

    raise InfeasibleScenarioError(
        f"no feasible geometry for {profile.profile_id} with S={n_static} "
        f"after {N_RETRY} draws"
    )


def bistatic_angles(scenario: Scenario):
    """Per-path (alpha_i, xi_i) computed independently from coordinates.

    alpha_i is the angle at the RX between the LoS arrival direction and
    the path-i arrival direction; xi_i is the angle between the path-i
    arrival elongation and the RX velocity vector. Both are in [0, 2pi),
    ordered [LoS, target, static_1..static_S], and satisfy
    cos(xi_i) = cos(alpha_i - eta) to 1e-12.

    Returns:
        (alphas, xis): two float arrays of length S + 2.
    """
    points = np.vstack([scenario.target_pos[None, :].reshape(1, 2),
                        scenario.static_pos.reshape(-1, 2)])
    # LoS arrival elongation points from TX through RX
    phi_los = math.atan2(scenario.rx_pos[1] - scenario.tx_pos[1],
                         scenario.rx_pos[0] - scenario.tx_pos[0])
    phi = np.concatenate(
        ([phi_los], _arrival_angles(scenario.rx_pos, points))
    )
    alphas = wrap_2pi(phi - phi_los)
    phi_v = phi_los + scenario.eta
    xis = wrap_2pi(phi_v - phi)
    return alphas, xis


def rx_doppler(scenario: Scenario, index: int, wavelength: float) -> float:
    """RX-motion Doppler v_rx * cos(xi_i) / wavelength for path `index`.

    Path indices follow the panel column order: 0 = LoS, 1 = target,
    2.. = statics.
    """
    _, xis = bistatic_angles(scenario)
    return scenario.v_rx * math.cos(xis[index]) / wavelength


def path_frequencies(scenario: Scenario, wavelength: float) -> np.ndarray:
    """Total per-path frequency slopes f_i (Hz), panel column order.

    f_LoS = v cos(eta)/lambda, f_t = f_D,t + v cos(xi_t)/lambda,
    f_s = v cos(xi_s)/lambda.
    """
    _, xis = bistatic_angles(scenario)
    freqs = scenario.v_rx * np.cos(xis) / wavelength
    freqs[1] += scenario.f_d_target
    return freqs


def path_delays(scenario: Scenario) -> np.ndarray:
    """Excess path delays (s) relative to the LoS, panel column order
    (the LoS entry is 0: panels are delay-aligned by construction)."""
    points = np.vstack([scenario.target_pos[None, :],
                        scenario.static_pos.reshape(-1, 2)])
    excess = _path_delays(scenario.tx_pos, scenario.rx_pos, points)
    return np.concatenate(([0.0], excess))
