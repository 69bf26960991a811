"""Symmetric second-order tensors stored as six components.

Component order is ``(xx, yy, zz, xy, xz, yz)``. These are true tensor
components (not engineering shears), so contractions weight the three
off-diagonal entries twice. All functions broadcast over leading axes, which
is how the finite-element layer evaluates whole batches of quadrature points.

The uniaxial (1D) reduction stores "tensors" as arrays with a single trailing
component; :func:`dev` and :func:`ddot` accept that layout as well.
"""

from __future__ import annotations

import numpy as np

COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")
WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
_DIAG = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def identity() -> np.ndarray:
    return _DIAG.copy()


def zeros(*lead: int) -> np.ndarray:
    return np.zeros((*lead, 6))


def from_components(xx=0.0, yy=0.0, zz=0.0, xy=0.0, xz=0.0, yz=0.0) -> np.ndarray:
    return np.array([xx, yy, zz, xy, xz, yz], dtype=float)


def to_matrix(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    m = np.empty((*t.shape[:-1], 3, 3))
    m[..., 0, 0], m[..., 1, 1], m[..., 2, 2] = t[..., 0], t[..., 1], t[..., 2]
    m[..., 0, 1] = m[..., 1, 0] = t[..., 3]
    m[..., 0, 2] = m[..., 2, 0] = t[..., 4]
    m[..., 1, 2] = m[..., 2, 1] = t[..., 5]
    return m


def from_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + np.swapaxes(m, -1, -2))
    return np.stack(
        [sym[..., 0, 0], sym[..., 1, 1], sym[..., 2, 2], sym[..., 0, 1], sym[..., 0, 2], sym[..., 1, 2]],
        axis=-1,
    )


def trace(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape[-1] == 1:
        return t[..., 0]
    return t[..., 0] + t[..., 1] + t[..., 2]


def dev(t: np.ndarray) -> np.ndarray:
    """Deviatoric part ``t - tr(t)/3 I``; the identity for 1D scalars."""
    t = np.asarray(t, dtype=float)
    if t.shape[-1] == 1:
        return t.copy()
    return t - (trace(t) / 3.0)[..., None] * _DIAG


def ddot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full contraction ``a : b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] == 1:
        return (a * b)[..., 0]
    return np.sum(WEIGHTS * a * b, axis=-1)


def norm(t: np.ndarray) -> np.ndarray:
    """Euclidean (Frobenius) norm, off-diagonals counted twice."""
    return np.sqrt(ddot(t, t))


def macaulay(x):
    """Return ``(<x>_+, <x>_-)`` so that ``plus + minus == x``."""
    x = np.asarray(x, dtype=float)
    plus = np.maximum(x, 0.0)
    minus = np.minimum(x, 0.0)
    if plus.ndim == 0:
        return float(plus), float(minus)
    return plus, minus


def unit(t: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Normalize ``t``; tensors with norm <= floor map to zero."""
    t = np.asarray(t, dtype=float)
    n = norm(t)
    safe = np.where(n > floor, n, 1.0)
    out = t / safe[..., None]
    return np.where((n > floor)[..., None], out, 0.0)


def plane_strain(exx, eyy, exy) -> np.ndarray:
    """Total strain tensor for plane strain (zz = xz = yz = 0)."""
    exx = np.asarray(exx, dtype=float)
    out = np.zeros((*exx.shape, 6))
    out[..., 0] = exx
    out[..., 1] = eyy
    out[..., 3] = exy
    return out
