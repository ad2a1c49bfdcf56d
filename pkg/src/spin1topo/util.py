"""Small numeric helpers shared across modules."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap angle(s) to the principal interval (-pi, pi].

    Works elementwise on arrays.  The right-closed convention means
    wrap_angle(pi) == pi and wrap_angle(-pi) == pi, so values straddling
    the branch cut compare equal instead of differing by 2*pi.
    """
    a = np.asarray(a, dtype=float)
    wrapped = a - TWO_PI * np.floor((a + np.pi) / TWO_PI)
    # floor puts the result in [-pi, pi); fold the open edge onto +pi
    wrapped = np.where(wrapped <= -np.pi + 0.0, wrapped + TWO_PI, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def circular_distance(a, b):
    """Shortest angular distance |a - b| on the circle, in [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def assert_hermitian(m: np.ndarray, tol: float = 1e-10, what: str = "operator"):
    """Raise NotHermitian when m deviates from its adjoint beyond tol."""
    from .errors import NotHermitian

    dev = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))))
    if dev > tol:
        raise NotHermitian(f"{what} deviates from Hermitian by {dev:.3e} (tol {tol:.1e})")


def trapezoid_closed(values: np.ndarray, taus: np.ndarray) -> float:
    """Trapezoid rule over a closed track sampled at taus (endpoint included).

    values[0] and values[-1] are the same physical point; the caller is
    responsible for any unwrapping so the track is continuous.
    """
    return float(np.trapezoid(values, taus))
