"""Doppler estimation pipeline from LoS-referenced multipath phases.

Stages: cancel the common clock offsets against the LoS column, take
wrapped first-order frame differences and average them over the window,
then invert the averaged differences for theta = (f_d_target, eta, v_rx)
with a two-static-path closed form refined by Levenberg-Marquardt NLS.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .phase_model import PhasePanel
from .profiles import CarrierProfile
from .wrapping import TWO_PI, wrap_2pi, wrap_pi

EPS_DEN = 1e-9
LM_LAMBDA0 = 1e-3
LM_GRAD_TOL = 1e-10
LM_STEP_TOL = 1e-12
LM_MAX_ITER = 200
MAX_PAIRS = 20

BRANCH_STATIC = -1


class EstimatorError(Exception):
    """Base class for estimation failures."""


class DegeneratePairError(EstimatorError):
    """The chosen static pair sits on a singularity of the closed form."""


class BranchInconsistencyError(EstimatorError):
    """Neither closed-form branch yields a non-negative speed."""


class EstimationInfeasibleError(EstimatorError):
    """No usable static pair (or non-finite residuals) for this panel."""


@dataclass(frozen=True)
class DiffSeries:
    """Wrapped first-order phase differences and their time average.

    Attributes:
        delta: (K-1, S+1) wrapped differences in (-pi, pi], columns
            [target, static_1..static_S].
        delta_bar: length-(S+1) time average of `delta`.
        T: frame period (s).
        aoas: measured AoAs (rad) in the same column order, or None
            when the series was built without AoA measurements.
    """

    delta: np.ndarray
    delta_bar: np.ndarray
    T: float
    aoas: np.ndarray | None


@dataclass(frozen=True)
class ThetaEstimate:
    """Estimated theta = (f_d_target, eta, v_rx) with solve diagnostics.

    Attributes:
        f_d_target: target bistatic Doppler shift (Hz).
        eta: RX heading relative to the LoS direction (rad, [0, 2pi)).
        v_rx: RX speed (m/s, >= 0).
        residual_norm: ||delta_bar - g(theta)||_2 (rad).
        n_iterations: NLS iterations spent (0 for closed form).
        init: closed-form theta used to start NLS, None if not refined.
        branch: arctan branch selected by the closed form (0 for the
            principal value, 1 for +pi, BRANCH_STATIC for the static-RX
            baseline).
        converged: NLS convergence flag (True for direct solves).
        nls_seconds: wall time of the solve stage (diagnostic only).
    """

    f_d_target: float
    eta: float
    v_rx: float
    residual_norm: float
    n_iterations: int = 0
    init: tuple[float, float, float] | None = None
    branch: int = 0
    converged: bool = True
    nls_seconds: float = 0.0


def cancel_offsets(panel: PhasePanel) -> np.ndarray:
    """Subtract the LoS phase column, removing the common clock offsets.

    Returns the (K, S+1) matrix wrap(phi_i[k] - phi_LoS[k]) in [0, 2pi)
    for the non-LoS columns. In the noiseless model the result is
    bit-identical across nuisance realizations: panel phases live on a
    dyadic lattice where the subtraction and the single +-2pi fold are
    exact, so the common offset cancels without rounding residue.
    """
    phases = panel.phases
    if phases.shape[1] < 2:
        raise ValueError("panel has no non-LoS paths")
    return wrap_2pi(phases[:, 1:] - phases[:, :1])


def difference_and_average(
    cancelled: np.ndarray,
    T: float,
    aoas: np.ndarray | None = None,
) -> DiffSeries:
    """First-order frame differences re-wrapped into (-pi, pi], averaged.

    The raw difference of two [0, 2pi) phases lies in (-2pi, 2pi); a
    single +-2pi correction maps it into (-pi, pi], which is alias-free
    whenever T < 1/(6 f_max). Out-of-regime inputs alias silently (the
    frame-period sensitivity experiment relies on this).

    Args:
        cancelled: (K, S+1) LoS-referenced phases from cancel_offsets.
        T: frame period (s).
        aoas: measured AoAs in matching column order, if available.
    """
    if cancelled.shape[0] < 2:
        raise ValueError("need at least 2 frames to difference")
    delta = wrap_pi(cancelled[1:] - cancelled[:-1])
    return DiffSeries(
        delta=delta,
        delta_bar=delta.mean(axis=0),
        T=float(T),
        aoas=None if aoas is None else np.asarray(aoas, dtype=float),
    )


def g_model(theta, aoas: np.ndarray, wavelength: float, T: float) -> np.ndarray:
    """Predicted averaged differences for theta = (f_d, eta, v_rx).

    Entry 0 (target): 2 pi T (f_d + v/lambda (cos(alpha_t - eta) - cos eta)).
    Entry s (static): 2 pi T v/lambda (cos(alpha_s - eta) - cos eta).
    """
    f_d, eta, v = float(theta[0]), float(theta[1]), float(theta[2])
    scale = TWO_PI * T
    geom = np.cos(np.asarray(aoas, dtype=float) - eta) - math.cos(eta)
    out = scale * (v / wavelength) * geom
    out[0] += scale * f_d
    return out


def g_jacobian(theta, aoas: np.ndarray, wavelength: float, T: float) -> np.ndarray:
    """Analytic (S+1) x 3 Jacobian of g_model in (f_d, eta, v_rx)."""
    _, eta, v = float(theta[0]), float(theta[1]), float(theta[2])
    aoas = np.asarray(aoas, dtype=float)
    scale = TWO_PI * T
    n = len(aoas)
    jac = np.zeros((n, 3))
    jac[0, 0] = scale
    jac[:, 1] = scale * (v / wavelength) * (np.sin(aoas - eta) + math.sin(eta))
    jac[:, 2] = (scale / wavelength) * (np.cos(aoas - eta) - math.cos(eta))
    return jac


def _require_aoas(diff: DiffSeries) -> np.ndarray:
    if diff.aoas is None:
        raise ValueError("DiffSeries carries no AoAs; build it with aoas=")
    return diff.aoas


def closed_form(
    diff: DiffSeries,
    wavelength: float,
    pair: tuple[int, int] = (1, 2),
) -> ThetaEstimate:
    """Direct theta inversion from the target and two static paths.

    eta is the arctan of two bilinear forms in the pair's averaged
    differences; the arctan's pi ambiguity is resolved by evaluating
    both branches, back-substituting each for v, and keeping the branch
    with v >= 0 and the smaller full residual ||delta_bar - g(theta)||.
    f_d then follows from the target difference with the pair-1 path
    supplying the velocity term.

    Args:
        diff: averaged differences with AoAs attached.
        wavelength: carrier wavelength (m).
        pair: indices of the two static paths in diff columns (>= 1).

    Raises:
        DegeneratePairError: arctan is 0/0 (e.g. v_rx = 0) or the
            back-substitution denominator is below EPS_DEN.
        BranchInconsistencyError: no branch yields a finite v >= 0.
    """
    aoas = _require_aoas(diff)
    p, q = pair
    if p == q or min(p, q) < 1 or max(p, q) >= len(diff.delta_bar):
        raise ValueError(f"invalid static pair {pair!r}")
    d_t = diff.delta_bar[0]
    d1, d2 = diff.delta_bar[p], diff.delta_bar[q]
    a1, a2 = aoas[p], aoas[q]
    a_t = aoas[0]
    scale = TWO_PI * diff.T

    num = d2 * (math.cos(a1) - 1.0) - d1 * (math.cos(a2) - 1.0)
    den = d1 * math.sin(a2) - d2 * math.sin(a1)
    if math.hypot(num, den) < EPS_DEN:
        raise DegeneratePairError(
            f"pair {pair!r}: arctan argument is 0/0 (|num|={abs(num):.3g}, "
            f"|den|={abs(den):.3g})")
    eta_raw = math.atan2(num, den)

    candidates = []
    for branch in (0, 1):
        eta = wrap_2pi(eta_raw + branch * math.pi)
        cd1 = math.cos(a1 - eta) - math.cos(eta)
        if abs(cd1) < EPS_DEN:
            continue
        v = wavelength * d1 / (scale * cd1)
        f_d = (d_t - d1 * (math.cos(a_t - eta) - math.cos(eta)) / cd1) / scale
        theta = (f_d, eta, v)
        res = float(np.linalg.norm(
            diff.delta_bar - g_model(theta, aoas, wavelength, diff.T)))
        candidates.append((branch, theta, res))
    if not candidates:
        raise DegeneratePairError(
            f"pair {pair!r}: back-substitution denominator below {EPS_DEN}")

    feasible = [c for c in candidates
                if c[1][2] >= 0.0 and all(map(math.isfinite, c[1]))]
    if not feasible:
        raise BranchInconsistencyError(
            f"pair {pair!r}: both arctan branches give v_rx < 0 or NaN")
    branch, theta, res = min(feasible, key=lambda c: c[2])
    return ThetaEstimate(
        f_d_target=theta[0],
        eta=theta[1],
        v_rx=theta[2],
        residual_norm=res,
        branch=branch,
    )


def nls_refine(
    diff: DiffSeries,
    init: ThetaEstimate,
    wavelength: float,
) -> ThetaEstimate:
    """Levenberg-Marquardt refinement of theta from a closed-form start.

    Minimizes ||delta_bar - g(theta)||^2 with analytic Jacobian and
    multiplicative damping on diag(J^T J): lambda starts at 1e-3, x10 on
    a rejected step, /10 on an accepted one. Iteration runs in scaled
    parameters u = (2 pi T f_d, eta, 2 pi T v / lambda) whose Jacobian
    columns are O(1), so the stopping tolerances are scale-free:
    converged when the gradient norm drops below 1e-10 or the step norm
    below 1e-12, within 200 iterations; otherwise the best iterate is
    returned with converged=False. The result is canonicalized to
    v_rx >= 0 and eta in [0, 2pi) (the model is invariant under
    (eta+pi, -v)).

    Raises:
        EstimationInfeasibleError: non-finite residual at the start.
    """
    aoas = _require_aoas(diff)
    target = diff.delta_bar
    scale = np.array([TWO_PI * diff.T, 1.0, TWO_PI * diff.T / wavelength])
    u = scale * np.array([init.f_d_target, init.eta, init.v_rx], dtype=float)

    def residual(u_vec):
        return target - g_model(u_vec / scale, aoas, wavelength, diff.T)

    r = residual(u)
    if not np.all(np.isfinite(r)) or not np.all(np.isfinite(u)):
        raise EstimationInfeasibleError(
            "non-finite residual at NLS start (degenerate AoAs?)")
    cost = float(r @ r)
    lam = LM_LAMBDA0
    converged = False
    n_it = 0
    for n_it in range(1, LM_MAX_ITER + 1):
        jac = g_jacobian(u / scale, aoas, wavelength, diff.T) / scale[None, :]
        grad = jac.T @ r
        if np.linalg.norm(grad) < LM_GRAD_TOL:
            converged = True
            break
        jtj = jac.T @ jac
        damp = np.diag(np.clip(np.diag(jtj), 1e-30, None))
        try:
            step = np.linalg.solve(jtj + lam * damp, grad)
        except np.linalg.LinAlgError:
            lam = min(lam * 10.0, 1e12)
            continue
        if np.linalg.norm(step) < LM_STEP_TOL:
            converged = True
            break
        trial = u + step
        r_trial = residual(trial)
        cost_trial = float(r_trial @ r_trial)
        if np.isfinite(cost_trial) and cost_trial < cost:
            u, r, cost = trial, r_trial, cost_trial
            lam = max(lam / 10.0, 1e-15)
        else:
            lam = min(lam * 10.0, 1e12)

    # undamped polish: the stopping rule can fire one step early along
    # weakly determined directions; accept only strict cost decreases
    for _ in range(3):
        jac = g_jacobian(u / scale, aoas, wavelength, diff.T) / scale[None, :]
        try:
            step = np.linalg.solve(jac.T @ jac, jac.T @ r)
        except np.linalg.LinAlgError:
            break
        trial = u + step
        r_trial = residual(trial)
        cost_trial = float(r_trial @ r_trial)
        if not np.isfinite(cost_trial) or cost_trial >= cost:
            break
        u, r, cost = trial, r_trial, cost_trial

    f_d, eta, v = u / scale
    if v < 0.0:
        v = -v
        eta = eta + math.pi
    eta = float(wrap_2pi(eta))
    theta_out = (float(f_d), eta, float(v))
    res = float(np.linalg.norm(
        target - g_model(theta_out, aoas, wavelength, diff.T)))
    return ThetaEstimate(
        f_d_target=theta_out[0],
        eta=theta_out[1],
        v_rx=theta_out[2],
        residual_norm=res,
        n_iterations=n_it,
        init=(init.f_d_target, init.eta, init.v_rx),
        branch=init.branch,
        converged=converged,
    )


def _static_pairs(n_static: int) -> list[tuple[int, int]]:
    """All static-pair index tuples, capped at MAX_PAIRS by a fixed-seed
    shuffle so pair selection stays deterministic for large S."""
    pairs = list(itertools.combinations(range(1, n_static + 1), 2))
    if len(pairs) > MAX_PAIRS:
        order = np.random.default_rng(0).permutation(len(pairs))
        pairs = [pairs[i] for i in order[:MAX_PAIRS]]
    return pairs


def estimate(
    panel: PhasePanel,
    profile: CarrierProfile,
    static_rx: bool = False,
) -> ThetaEstimate:
    """Full pipeline: cancellation, differencing, closed form, NLS.

    The closed form runs over candidate static pairs (all C(S,2), capped
    at MAX_PAIRS) and the best-residual init seeds the NLS. With
    static_rx=True the motion terms are skipped and f_d comes directly
    from the averaged target difference (v_rx = 0, eta reported as 0).

    Raises:
        EstimationInfeasibleError: every static pair is degenerate.
    """
    cancelled = cancel_offsets(panel)
    diff = difference_and_average(cancelled, panel.T, panel.aoa_meas)
    t0 = time.perf_counter()
    if static_rx:
        f_d = float(diff.delta_bar[0]) / (TWO_PI * diff.T)
        theta = (f_d, 0.0, 0.0)
        res = float(np.linalg.norm(
            diff.delta_bar - g_model(theta, diff.aoas, profile.wavelength,
                                     diff.T)))
        return ThetaEstimate(
            f_d_target=f_d,
            eta=0.0,
            v_rx=0.0,
            residual_norm=res,
            branch=BRANCH_STATIC,
            nls_seconds=time.perf_counter() - t0,
        )

    n_static = len(diff.delta_bar) - 1
    if n_static < 2:
        raise EstimationInfeasibleError("need at least 2 static paths")
    best: ThetaEstimate | None = None
    for pair in _static_pairs(n_static):
        try:
            cand = closed_form(diff, profile.wavelength, pair)
        except (DegeneratePairError, BranchInconsistencyError):
            continue
        if best is None or cand.residual_norm < best.residual_norm:
            best = cand
    if best is None:
        raise EstimationInfeasibleError(
            "all static pairs degenerate for the closed form")
    refined = nls_refine(diff, best, profile.wavelength)
    return replace(refined, nls_seconds=time.perf_counter() - t0)


def static_baseline(panel: PhasePanel) -> float:
    """Target Doppler for a static RX: f_d = mean target difference
    over 2 pi T. Uses only the target column, so AoA errors and the
    static paths never enter."""
    cancelled = cancel_offsets(panel)
    diff = difference_and_average(cancelled, panel.T)
    return float(diff.delta_bar[0]) / (TWO_PI * diff.T)
