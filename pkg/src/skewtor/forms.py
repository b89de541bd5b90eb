"""Differential operators on forms and symmetric tensors.

The induced differential and codifferential of a connection are

    d_conn w = sum_i e_i^flat wedge (nabla_{e_i} w),
    d*_conn w = -sum_i e_i . (nabla_{e_i} w),

which for the Levi-Civita connection reduce to the ordinary d and d*.  The
defect 4-form sigma_T is defined through d_nabla T - d T = -2 sigma_T.
Forms are stored in coordinate components; the wedge/contraction kernels work
on raw jet-coefficient arrays (batch first, slots next, derivative last).
"""

from __future__ import annotations

import math
from itertools import permutations
from string import ascii_lowercase

import numpy as np

from .charts import lower_torsion
from .curvature import PointData, covariant_derivative_3form, to_frame

__all__ = [
    "alternate",
    "exterior_derivative",
    "covariant_exterior",
    "sigma_t",
    "divergence_sym",
    "einstein_tensor_nabla",
    "form_inner",
]


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cycle = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cycle += 1
        if cycle % 2 == 0:
            sign = -sign
    return sign


def alternate(a, degree, nbatch):
    """Antisymmetrize the `degree` axes starting right after the batch axes."""
    if degree <= 1:
        return a
    out = np.zeros_like(a)
    tail = list(range(nbatch + degree, a.ndim))
    for perm in permutations(range(degree)):
        axes = list(range(nbatch)) + [nbatch + p for p in perm] + tail
        out += _perm_sign(perm) * np.transpose(a, axes)
    return out / math.factorial(degree)


def _covariant_derivative_form(conn, w, dw, degree, nbatch):
    # (nabla_a w)_{c1..cp}: leading tensor axis a, then the p form slots
    nab = np.moveaxis(dw, -1, nbatch)
    letters = ascii_lowercase[:degree]
    for s in range(degree):
        slots = letters[:s] + "e" + letters[s + 1 :]
        nab = nab - np.einsum(
            f"...ez{letters[s]},...{slots}->...z{letters}", conn, w
        )
    return nab


def exterior_derivative(w, dw, degree, nbatch=1):
    """Coordinate exterior derivative of a p-form (Christoffel-free)."""
    c = np.moveaxis(dw, -1, nbatch)
    return (degree + 1) * alternate(c, degree + 1, nbatch)


def _d_from_connection(conn, w, dw, degree, nbatch):
    nab = _covariant_derivative_form(conn, w, dw, degree, nbatch)
    return (degree + 1) * alternate(nab, degree + 1, nbatch)


def _dstar_from_connection(ginv, conn, w, dw, degree, nbatch):
    nab = _covariant_derivative_form(conn, w, dw, degree, nbatch)
    rest = ascii_lowercase[2 : degree + 1]
    return -np.einsum(f"...ab,...ab{rest}->...{rest}", ginv, nab)


def covariant_exterior(metric, torsion, omega, x):
    """(d_nabla w, d*_nabla w, d w, d* w) at `x` for a FormField `omega`.

    Degree overflow (p+1 > n) simply produces the zero array of the formal
    shape, which the antisymmetrization yields automatically.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pd = PointData(metric, torsion, x)
    w, dw = omega.jets(x)[:2]
    p = omega.degree
    d_nabla = _d_from_connection(pd.conn_torsion, w, dw, p, 1)
    dstar_nabla = _dstar_from_connection(pd.ginv, pd.conn_torsion, w, dw, p, 1)
    d_lc = exterior_derivative(w, dw, p, 1)
    dstar_lc = _dstar_from_connection(pd.ginv, pd.gamma, w, dw, p, 1)
    return d_nabla, dstar_nabla, d_lc, dstar_lc


def sigma_t(metric, torsion, x):
    """The 4-form sigma_T = -1/2 (d_nabla T - d T) of the lowered torsion."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pd = PointData(metric, torsion, x)
    w, dw = pd.tlow, pd.dtlow
    d_nabla = _d_from_connection(pd.conn_torsion, w, dw, 3, 1)
    d_lc = exterior_derivative(w, dw, 3, 1)
    return -0.5 * (d_nabla - d_lc)


def divergence_sym(metric, f, x):
    """Divergence of a symmetric 2-tensor field, with the leading minus:

    Div(F)(X) = -sum_i (nabla^g_{e_i} F)(e_i, X).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pd = PointData(metric, None, x)
    fv, dfv = f.jets(x)[:2]
    nab = (
        np.moveaxis(dfv, -1, 1)
        - np.einsum("...eab,...ec->...abc", pd.gamma, fv)
        - np.einsum("...eac,...be->...abc", pd.gamma, fv)
    )
    return -np.einsum("...ab,...abc->...c", pd.ginv, nab)


def divergence_sym_values(pd, gv, dgv):
    """Divergence from raw value/derivative arrays of a symmetric tensor."""
    nab = (
        np.moveaxis(dgv, -1, 1)
        - np.einsum("...eab,...ec->...abc", pd.gamma, gv)
        - np.einsum("...eac,...be->...abc", pd.gamma, gv)
    )
    return -np.einsum("...ab,...abc->...c", pd.ginv, nab)


def einstein_tensor_nabla(metric, torsion, x):
    """The Einstein tensor G = -Ric_S + (Scal_nabla/2) g and its divergence.

    Both come out of one order-3 jet evaluation, so the divergence is exact
    (no stencils).  G is returned in coordinates.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pd = PointData(metric, torsion, x, order=3)
    g_tensor = pd.einstein_tensor
    div = divergence_sym_values(pd, g_tensor, pd.d_einstein_tensor)
    return g_tensor, div


def form_inner(ginv, a, b, degree):
    """Pointwise inner product of p-forms with the 1/p! normalization."""
    letters = ascii_lowercase[:degree]
    upper = ascii_lowercase[degree : 2 * degree]
    gis = ",".join(f"...{letters[s]}{upper[s]}" for s in range(degree))
    expr = f"{gis},...{letters},...{upper}->..."
    return np.einsum(expr, *([ginv] * degree), a, b) / math.factorial(degree)
