"""Deterministic dense linear algebra for small SPD matrices.

Everything here fixes an explicit convention (Cholesky frames, ascending
eigenvalues, eigenvector sign rule) so that repeated runs are bit-identical.
All routines are batched over arbitrary leading axes.
"""

from __future__ import annotations

import numpy as np

from .exceptions import SpdError

__all__ = [
    "check_symmetric",
    "cholesky_lower",
    "is_spd",
    "cholesky_frame",
    "spd_eigh",
    "spd_sqrt",
    "spd_inv_sqrt",
]


def check_symmetric(a, tol=1e-12, what="matrix"):
    a = np.asarray(a, dtype=float)
    dev = np.abs(a - np.swapaxes(a, -1, -2)).max()
    if dev > tol * (1.0 + np.abs(a).max()):
        raise ValueError(f"{what} is not symmetric (deviation {dev:.3e})")
    return a


def cholesky_lower(g):
    """Lower Cholesky factor, reporting the first failing pivot on non-SPD input."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    L = np.zeros_like(g)
    for j in range(n):
        d = g[..., j, j] - np.einsum("...k,...k->...", L[..., j, :j], L[..., j, :j])
        if np.any(d <= 0.0):
            raise SpdError(
                f"matrix is not positive definite: Cholesky pivot {j} is "
                f"{np.min(d):.6e}",
                pivot=j,
            )
        L[..., j, j] = np.sqrt(d)
        if j + 1 < n:
            s = g[..., j + 1 :, j] - np.einsum(
                "...ik,...k->...i", L[..., j + 1 :, :j], L[..., j, :j]
            )
            L[..., j + 1 :, j] = s / L[..., j, j][..., None]
    return L


def is_spd(g):
    try:
        cholesky_lower(check_symmetric(g))
    except (SpdError, ValueError):
        return False
    return True


def _solve_lower(L, b):
    # forward substitution, batched; b has shape batch+(n, m)
    n = L.shape[-1]
    x = np.zeros_like(b)
    for i in range(n):
        acc = b[..., i, :] - np.einsum("...k,...km->...m", L[..., i, :i], x[..., :i, :])
        x[..., i, :] = acc / L[..., i, i][..., None]
    return x


def cholesky_frame(g):
    """Columns of the result E are a g-orthonormal basis: E^T g E = I.

    E is the inverse transpose of the lower Cholesky factor, which makes the
    construction deterministic and scale-equivariant (frame of s*g equals
    s**-0.5 times the frame of g).
    """
    g = check_symmetric(g, what="metric value")
    L = cholesky_lower(g)
    eye = np.broadcast_to(np.eye(g.shape[-1]), g.shape).copy()
    return np.swapaxes(_solve_lower(L, eye), -1, -2)


def spd_eigh(b):
    """Symmetric eigendecomposition with fixed conventions.

    Ascending eigenvalues; each eigenvector's sign is chosen so that its
    first component of magnitude above 1e-12*|v|_max is positive.
    """
    b = check_symmetric(b)
    w, v = np.linalg.eigh(b)
    mag = np.abs(v)
    significant = mag > 1e-12 * mag.max(axis=-2, keepdims=True)
    first = np.argmax(significant, axis=-2)
    lead = np.take_along_axis(v, first[..., None, :], axis=-2)[..., 0, :]
    v = v * np.where(lead < 0.0, -1.0, 1.0)[..., None, :]
    return w, v


def _spd_power(b, p):
    w, v = spd_eigh(b)
    if np.any(w <= 0.0):
        raise SpdError(
            f"matrix is not positive definite: smallest eigenvalue {w.min():.6e}"
        )
    return np.einsum("...ik,...k,...jk->...ij", v, w**p, v)


def spd_sqrt(b):
    """Unique SPD square root."""
    return _spd_power(b, 0.5)


def spd_inv_sqrt(b):
    """Unique SPD inverse square root R, with R @ b @ R = I."""
    return _spd_power(b, -0.5)
