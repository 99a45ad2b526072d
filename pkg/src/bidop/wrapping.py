"""Mod-2pi phase arithmetic with exact-cancellation guarantees.

Phases synthesized on a dyadic grid (spacing 2^-48 rad) stay on a 53-bit
lattice through wrapping, LoS subtraction and (-pi, pi] re-wrapping, so
common additive offsets cancel bit-exactly in float64.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Dyadic quantization grid for synthesized phases. 2^-48 rad (~3.6e-15)
# keeps sums of two wrapped phases under 2^52 grid units, hence exact.
PHASE_GRID = 2.0**48


def wrap_2pi(x):
    """Wrap phase(s) into [0, 2pi).

    Exact (no rounding) when the input lies on the synthesis lattice and
    within (-2pi, 2pi); the result is clamped so it is never exactly 2pi.
    """
    r = np.mod(x, TWO_PI)
    # float rounding can return exactly 2pi for tiny negative inputs
    r = np.where(r >= TWO_PI, 0.0, r)
    if np.ndim(x) == 0:
        return float(r)
    return r


def wrap_pi(x):
    """Wrap phase difference(s) into (-pi, pi].

    For inputs in (-2pi, 2pi) this is a single conditional +/-2pi shift,
    which is exact on the synthesis lattice (Sterbenz subtraction).
    """
    r = np.asarray(x, dtype=float)
    r = np.where(r > math.pi, r - TWO_PI, r)
    r = np.where(r <= -math.pi, r + TWO_PI, r)
    out_of_range = np.abs(r) > math.pi
    if np.any(out_of_range):
        # general inputs: reduce first, then shift
        r = np.where(out_of_range, wrap_2pi(r), r)
        r = np.where(r > math.pi, r - TWO_PI, r)
    if np.ndim(x) == 0:
        return float(r)
    return r


def quantize_phase(x):
    """Snap wrapped phase(s) in [0, 2pi) to the 2^-48 rad dyadic grid.

    The scaling by a power of two and the division back are exact; only
    the rounding to integer loses (at most 2^-49 rad of) information.
    """
    q = np.round(np.asarray(x, dtype=float) * PHASE_GRID) / PHASE_GRID
    # the topmost grid point can round up to >= 2pi; fold it back exactly
    q = np.where(q >= TWO_PI, q - TWO_PI, q)
    if np.ndim(x) == 0:
        return float(q)
    return q


def add_phases_wrapped(a, b):
    """Add two grid-quantized phases in [0, 2pi) and wrap, exactly.

    Both operands must come from :func:`quantize_phase`. Their sum is
    below 2^52 grid units so the addition is exact, and the single
    conditional -2pi fold lands on the 2^-50 lattice without rounding.
    """
    s = np.asarray(a, dtype=float) + np.asarray(b, dtype=float)
    s = np.where(s >= TWO_PI, s - TWO_PI, s)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(s)
    return s
