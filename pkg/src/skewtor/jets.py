"""Forward-mode jet scalars: exact value/gradient/Hessian arithmetic.

Every tensor field in this package is evaluated through `Jet2` scalars, so
first and second coordinate derivatives of the metric (and hence Christoffel
symbols and curvature) are exact to machine precision rather than finite
differenced.  Coefficient arrays carry an arbitrary leading batch shape,
which lets one jet hold a whole lattice of evaluation points; all arithmetic
is numpy-vectorized over that batch.

An optional third-order coefficient block rides along when a consumer needs
one more derivative (the divergence of curvature-level quantities does).
The second-order layout stays the default everywhere else.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet2",
    "coordinate_jets",
    "compose",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "jet_mat_inverse",
    "jet_det",
    "stack_jets",
]


def _outer_gh(g, h):
    # g_a h_bc + g_b h_ac + g_c h_ab  (the symmetric gradient/Hessian pairing)
    return (
        g[..., :, None, None] * h[..., None, :, :]
        + g[..., None, :, None] * h[..., :, None, :]
        + g[..., None, None, :] * h[..., :, :, None]
    )


class Jet2:
    """Truncated Taylor coefficients of a scalar: value, gradient, Hessian.

    `val` has the batch shape B, `grad` B+(n,), `hess` B+(n,n) and the
    optional `third` B+(n,n,n).  Hessians (and third blocks) are exactly
    symmetric because every formula below is written in symmetric form.
    Instances are immutable by convention; operations return new jets.
    """

    __slots__ = ("val", "grad", "hess", "third")

    def __init__(self, val, grad, hess, third=None):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)
        self.third = None if third is None else np.asarray(third, dtype=float)

    @property
    def nvars(self):
        return self.grad.shape[-1]

    @property
    def order(self):
        return 2 if self.third is None else 3

    @classmethod
    def constant(cls, value, nvars, order=2, batch=()):
        value = np.broadcast_to(np.asarray(value, dtype=float), batch)
        shape = value.shape
        n = nvars
        third = np.zeros(shape + (n, n, n)) if order >= 3 else None
        return cls(value, np.zeros(shape + (n,)), np.zeros(shape + (n, n)), third)

    def _coerce(self, other):
        if isinstance(other, Jet2):
            if other.nvars != self.nvars:
                raise ValueError(
                    f"jet coordinate dimension mismatch: {self.nvars} vs {other.nvars}"
                )
            if (other.third is None) != (self.third is None):
                raise ValueError("jet order mismatch (second- vs third-order)")
            return other
        return Jet2.constant(other, self.nvars, self.order, np.shape(other))

    # ---- ring operations ----

    def __add__(self, other):
        o = self._coerce(other)
        t = None if self.third is None else self.third + o.third
        return Jet2(self.val + o.val, self.grad + o.grad, self.hess + o.hess, t)

    __radd__ = __add__

    def __neg__(self):
        t = None if self.third is None else -self.third
        return Jet2(-self.val, -self.grad, -self.hess, t)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        v = self.val * o.val
        g = self.val[..., None] * o.grad + o.val[..., None] * self.grad
        h = (
            self.val[..., None, None] * o.hess
            + o.val[..., None, None] * self.hess
            + self.grad[..., :, None] * o.grad[..., None, :]
            + o.grad[..., :, None] * self.grad[..., None, :]
        )
        t = None
        if self.third is not None:
            t = (
                self.val[..., None, None, None] * o.third
                + o.val[..., None, None, None] * self.third
                + _outer_gh(self.grad, o.hess)
                + _outer_gh(o.grad, self.hess)
            )
        return Jet2(v, g, h, t)

    __rmul__ = __mul__

    def _chain(self, f0, f1, f2, f3=None):
        # univariate chain rule through order 3 (Faa di Bruno)
        g = f1[..., None] * self.grad
        gg = self.grad[..., :, None] * self.grad[..., None, :]
        h = f1[..., None, None] * self.hess + f2[..., None, None] * gg
        t = None
        if self.third is not None:
            t = (
                f3[..., None, None, None]
                * gg[..., :, :, None]
                * self.grad[..., None, None, :]
                + f2[..., None, None, None] * _outer_gh(self.grad, self.hess)
                + f1[..., None, None, None] * self.third
            )
        return Jet2(f0, g, h, t)

    def reciprocal(self):
        if np.any(self.val == 0.0):
            raise ZeroDivisionError("division by jet with zero value")
        v = 1.0 / self.val
        return self._chain(v, -(v**2), 2.0 * v**3, -6.0 * v**4)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, p):
        if not np.isscalar(p):
            raise TypeError("jet exponent must be a scalar")
        v = self.val
        return self._chain(
            v**p,
            p * v ** (p - 1),
            p * (p - 1) * v ** (p - 2),
            p * (p - 1) * (p - 2) * v ** (p - 3),
        )

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s, -c)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c, s)

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e, e)

    def log(self):
        v = self.val
        return self._chain(np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def sqrt(self):
        s = np.sqrt(self.val)
        return self._chain(s, 0.5 / s, -0.25 / s**3, 0.375 / s**5)

    def __repr__(self):
        return f"Jet2(val={self.val!r}, order={self.order})"


def coordinate_jets(x, order=2):
    """Seed jets for the chart coordinates at points `x` of shape (..., n)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    batch = x.shape[:-1]
    out = []
    for i in range(n):
        g = np.zeros(batch + (n,))
        g[..., i] = 1.0
        h = np.zeros(batch + (n, n))
        t = np.zeros(batch + (n, n, n)) if order >= 3 else None
        out.append(Jet2(x[..., i].copy(), g, h, t))
    return out


def compose(fn, x, order=2):
    """Evaluate `fn` on coordinate jets seeded at `x` (exact derivatives)."""
    return fn(coordinate_jets(x, order))


def _lift(fn_jet, fn_np):
    def wrapped(x):
        return fn_jet(x) if isinstance(x, Jet2) else fn_np(x)

    return wrapped


sin = _lift(Jet2.sin, np.sin)
cos = _lift(Jet2.cos, np.cos)
exp = _lift(Jet2.exp, np.exp)
log = _lift(Jet2.log, np.log)
sqrt = _lift(Jet2.sqrt, np.sqrt)


def _as_jet_matrix(entries):
    rows = [list(r) for r in entries]
    template = next(
        (e for r in rows for e in r if isinstance(e, Jet2)), None
    )
    if template is None:
        raise TypeError("matrix contains no jets")
    return [
        [e if isinstance(e, Jet2) else template._coerce(e) for e in r] for r in rows
    ], template


def jet_mat_inverse(entries):
    """Invert a small SPD-valued jet matrix by Gauss-Jordan without pivoting.

    Intended for metric matrices (SPD at every batch point), where pivoting
    is unnecessary; a zero pivot value raises.
    """
    a, template = _as_jet_matrix(entries)
    n = len(a)
    eye = [
        [Jet2.constant(1.0 if i == j else 0.0, template.nvars, template.order)
         for j in range(n)]
        for i in range(n)
    ]
    a = [row[:] for row in a]
    for k in range(n):
        piv = a[k][k].reciprocal()
        a[k] = [piv * e for e in a[k]]
        eye[k] = [piv * e for e in eye[k]]
        for i in range(n):
            if i == k:
                continue
            f = a[i][k]
            a[i] = [a[i][j] - f * a[k][j] for j in range(n)]
            eye[i] = [eye[i][j] - f * eye[k][j] for j in range(n)]
    return eye


def jet_det(entries):
    """Determinant of a small SPD-valued jet matrix (pivot product)."""
    a, template = _as_jet_matrix(entries)
    n = len(a)
    a = [row[:] for row in a]
    det = Jet2.constant(1.0, template.nvars, template.order)
    for k in range(n):
        det = det * a[k][k]
        piv = a[k][k].reciprocal()
        for i in range(k + 1, n):
            f = a[i][k] * piv
            a[i] = [a[i][j] - f * a[k][j] for j in range(n)]
    return det


def _restack(block, rank, nbatch):
    # move the leading `rank` tensor axes behind the batch axes
    return np.moveaxis(block, range(rank), range(nbatch, nbatch + rank))


def stack_jets(entries, order=None):
    """Pack a nested structure of jets into raw coefficient arrays.

    Returns (val, d1, d2) or (val, d1, d2, d3) with layout
    batch + tensor_axes (+ derivative axes last).  Plain numbers inside the
    structure are treated as constants.
    """
    arr = np.asarray(entries, dtype=object)
    tshape = arr.shape
    flat = list(arr.ravel())
    template = next((e for e in flat if isinstance(e, Jet2)), None)
    if template is None:
        raise TypeError("no jets to stack")
    if order is None:
        order = template.order
    flat = [
        e if isinstance(e, Jet2) else template._coerce(e) for e in flat
    ]
    n = template.nvars
    batch = template.val.shape
    rank = len(tshape)
    nb = len(batch)

    def collect(attr, extra):
        out = np.empty(tshape + batch + extra)
        for idx, e in zip(np.ndindex(*tshape) if tshape else [()], flat):
            out[idx] = np.broadcast_to(getattr(e, attr), batch + extra)
        return _restack(out, rank, nb)

    val = collect("val", ())
    d1 = collect("grad", (n,))
    d2 = collect("hess", (n, n))
    if order >= 3:
        return val, d1, d2, collect("third", (n, n, n))
    return val, d1, d2
