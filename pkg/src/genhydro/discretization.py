"""Periodic stencils shared by both 1D solvers and the harness.

Unknowns are point values at ``x_i = i dx``.  The convective part uses the
conservative finite-difference form with local Lax-Friedrichs (Rusanov)
splitting; ``order=1`` is exactly the first-order Rusanov scheme.
"""
from __future__ import annotations

import numpy as np

GHOST = 3


def _extend(a, g=GHOST):
    return np.concatenate([a[-g:], a, a[:g]], axis=0)


def _stencil(ext, n, offset):
    """Values ``a[i + offset]`` for ``i = 0..n-1`` from a ghost-extended array."""
    start = GHOST + offset
    return ext[start:start + n]


def _linear5_left(s):
    # s[k] holds a[i + k - 2], k = 0..4
    return (2 * s[0] - 13 * s[1] + 47 * s[2] + 27 * s[3] - 3 * s[4]) / 60.0


def _weno5_left(s, eps=1e-6):
    b0 = 13 / 12 * (s[0] - 2 * s[1] + s[2])**2 + 0.25 * (s[0] - 4 * s[1] + 3 * s[2])**2
    b1 = 13 / 12 * (s[1] - 2 * s[2] + s[3])**2 + 0.25 * (s[1] - s[3])**2
    b2 = 13 / 12 * (s[2] - 2 * s[3] + s[4])**2 + 0.25 * (3 * s[2] - 4 * s[3] + s[4])**2
    a0 = 0.1 / (eps + b0)**2
    a1 = 0.6 / (eps + b1)**2
    a2 = 0.3 / (eps + b2)**2
    p0 = (2 * s[0] - 7 * s[1] + 11 * s[2]) / 6
    p1 = (-s[1] + 5 * s[2] + 2 * s[3]) / 6
    p2 = (2 * s[2] + 5 * s[3] - s[4]) / 6
    return (a0 * p0 + a1 * p1 + a2 * p2) / (a0 + a1 + a2)


def interface_speeds(speed, order: int):
    """Rusanov dissipation speed at each interface ``i+1/2`` (max over the stencil)."""
    if order == 1:
        return np.maximum(speed, np.roll(speed, -1))
    ext = _extend(speed)
    n = speed.shape[0]
    return np.max(np.stack([_stencil(ext, n, k) for k in range(-2, 4)]), axis=0)


def flux_divergence(H, U, speed, dx: float, order: int = 5, limiter: bool = False):
    """``(h_{i+1/2} - h_{i-1/2}) / dx`` for the split flux ``f^+- = (H +- a U)/2``.

    ``H`` and ``U`` have shape ``(N, k)``; ``speed`` is the per-point
    spectral radius of ``dH/dU``.
    """
    n = U.shape[0]
    a = interface_speeds(speed, order)[:, None]
    if order == 1:
        Hn = np.roll(H, -1, axis=0)
        Un = np.roll(U, -1, axis=0)
        h = 0.5 * (H + Hn) - 0.5 * a * (Un - U)
    elif order == 5:
        He, Ue = _extend(H), _extend(U)
        recon = _weno5_left if limiter else _linear5_left
        plus = [0.5 * (_stencil(He, n, k) + a * _stencil(Ue, n, k)) for k in range(-2, 3)]
        minus = [0.5 * (_stencil(He, n, k) - a * _stencil(Ue, n, k)) for k in range(3, -2, -1)]
        h = recon(plus) + recon(minus)
    else:
        raise ValueError(f"order must be 1 or 5, got {order}")
    return (h - np.roll(h, 1, axis=0)) / dx


def ddx(a, dx: float):
    """Fourth-order central first derivative on a periodic grid (axis 0)."""
    return (np.roll(a, 2, axis=0) - 8 * np.roll(a, 1, axis=0)
            + 8 * np.roll(a, -1, axis=0) - np.roll(a, -2, axis=0)) / (12 * dx)


def d2dx2(a, dx: float):
    """Fourth-order central second derivative on a periodic grid (axis 0)."""
    return (-np.roll(a, 2, axis=0) + 16 * np.roll(a, 1, axis=0) - 30 * a
            + 16 * np.roll(a, -1, axis=0) - np.roll(a, -2, axis=0)) / (12 * dx * dx)


def pairwise_sum(a) -> float:
    """Fixed-order pairwise reduction along axis 0 (bitwise reproducible)."""
    a = np.asarray(a, dtype=float)
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:])], axis=0)
        a = a[0::2] + a[1::2]
    return a[0] if a.shape[0] else 0.0
