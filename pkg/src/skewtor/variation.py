"""First variation of metric-dependent quantities along curves g + t*h.

Analytic rates implemented here:

    volume element:   (1/2) tr_g h
    torsion norm:     -(1/6) (S, h)_g          (the (2,1) torsion held fixed)
    scalar curvature: Lap_g(tr_g h) + Div_g(Div_g h) - (Ric^g, h)_g

with the divergence of a symmetric tensor carrying a leading minus,
Div(F)(X) = -sum_i (nabla_{e_i} F)(e_i, X), and the Laplacian fixed as
Lap = d* d (nonnegative spectrum).  Each rate has an independent
finite-difference cross-check driver: central differences in t with
Richardson extrapolation, re-running the full evaluation pipeline at the
shifted metrics, so the analytic formulas are never tested against
themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import PointData
from .exceptions import SpdError
from .linalg import cholesky_frame, cholesky_lower, spd_inv_sqrt, spd_sqrt

__all__ = [
    "sym_inner",
    "isometry_pair",
    "frame_curve_rate",
    "volume_element_rate",
    "torsion_norm_rate",
    "scalar_g_rate",
    "scalar_nabla_rate",
    "functional_gradient",
    "MetricCurve",
    "richardson_rate",
    "VariationReport",
    "fd_report",
    "FD_STEPS",
]

FD_STEPS = (1e-3, 5e-4, 2.5e-4)


def sym_inner(ginv, a, b):
    """Full inner product of symmetric 2-tensors, (a, b)_g = a_ij b_ij in frames."""
    return np.einsum("...ac,...bd,...ab,...cd->...", ginv, ginv, a, b)


# ---------------------------------------------------------------------------
# pointwise linear algebra of the metric curve


def isometry_pair(a, b):
    """The endomorphism B with b(u, v) = a(Bu, v), and the isometry d = B^(-1/2).

    d maps (V, a) isometrically onto (V, b): a(X, Y) = b(dX, dY).
    Both matrices are a-self-adjoint; they are computed through the SPD
    square roots of a to keep the conjugation explicit and deterministic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cholesky_lower(a)
    cholesky_lower(b)
    big_b = np.linalg.solve(a, b)
    a_half = spd_sqrt(a)
    a_ihalf = spd_inv_sqrt(a)
    m = a_ihalf @ b @ a_ihalf
    d = a_ihalf @ spd_inv_sqrt(m) @ a_half
    return big_b, d


def frame_curve_rate(g, h):
    """Rate of the frame isometry along g + t*h at t = 0.

    Returns (-H/2, Edot) where h(u, v) = g(Hu, v) and Edot holds the frame
    vector rates edot_i = -(1/2) sum_j h(e_i, e_j) e_j as columns.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    big_h = np.linalg.solve(g, h)
    frame = cholesky_frame(g)
    h_frame = frame.T @ h @ frame
    edot = -0.5 * frame @ h_frame
    return -0.5 * big_h, edot


# ---------------------------------------------------------------------------
# pointwise analytic rates (PointData + direction jets)


def volume_element_rate(pd, hjets):
    return 0.5 * np.einsum("...ab,...ab->...", pd.ginv, hjets[0])


def torsion_norm_rate(pd, hjets):
    return -sym_inner(pd.ginv, pd.s_coord, hjets[0]) / 6.0


def scalar_g_rate(pd, hjets):
    h, dh, d2h = hjets[:3]
    gi, dgi, d2gi = pd.ginv, pd.dginv, pd.d2ginv
    gamma, dgamma = pd.gamma, pd.dgamma

    # f = tr_g h and its first two derivatives
    df = np.einsum("...abm,...ab->...m", dgi, h) + np.einsum(
        "...ab,...abm->...m", gi, dh
    )
    d2f = (
        np.einsum("...abmp,...ab->...mp", d2gi, h)
        + np.einsum("...abm,...abp->...mp", dgi, dh)
        + np.einsum("...abp,...abm->...mp", dgi, dh)
        + np.einsum("...ab,...abmp->...mp", gi, d2h)
    )
    lap_f = -np.einsum(
        "...mp,...mp->...", gi, d2f - np.einsum("...cmp,...c->...mp", gamma, df)
    )

    # beta = Div_g h and its derivative
    nab = (
        np.moveaxis(dh, -1, 1)
        - np.einsum("...eab,...ec->...abc", gamma, h)
        - np.einsum("...eac,...be->...abc", gamma, h)
    )
    dnab = (
        np.moveaxis(d2h, -2, 1)
        - np.einsum("...eabm,...ec->...abcm", dgamma, h)
        - np.einsum("...eab,...ecm->...abcm", gamma, dh)
        - np.einsum("...eacm,...be->...abcm", dgamma, h)
        - np.einsum("...eac,...bem->...abcm", gamma, dh)
    )
    beta = -np.einsum("...ab,...abc->...c", gi, nab)
    dbeta = -(
        np.einsum("...abm,...abc->...cm", dgi, nab)
        + np.einsum("...ab,...abcm->...cm", gi, dnab)
    )
    div_div = -np.einsum(
        "...cd,...cd->...",
        gi,
        np.einsum("...dc->...cd", dbeta)
        - np.einsum("...ecd,...e->...cd", gamma, beta),
    )

    ric_h = sym_inner(gi, pd.ric_g, h)
    return lap_f + div_div - ric_h


def scalar_nabla_rate(pd, hjets):
    return scalar_g_rate(pd, hjets) - 1.5 * torsion_norm_rate(pd, hjets)


class FunctionalGradient:
    """Metric-direction Euler-Lagrange density of the total-scalar functional.

    For L(g, T) = int (Scal_nabla - 2*lam) dV the density is G - lam*g, with
    G = -Ric_S + (Scal_nabla/2) g, so that
    d/dt L(g + t*h)|_0 = int (G - lam*g, h)_g dV.  `values` returns the
    coordinate components at a batch of points.
    """

    def __init__(self, metric, torsion, lam):
        self.metric = metric
        self.torsion = torsion
        self.lam = float(lam)

    def values(self, x):
        pd = PointData(self.metric, self.torsion, x)
        return pd.einstein_tensor - self.lam * pd.g

    def values_from_data(self, pd):
        return pd.einstein_tensor - self.lam * pd.g


def functional_gradient(metric, torsion, lam):
    return FunctionalGradient(metric, torsion, lam)


# ---------------------------------------------------------------------------
# finite-difference drivers


def richardson_rate(sample, steps=FD_STEPS):
    """Richardson-extrapolated central difference rate at t = 0.

    `sample(t)` evaluates the quantity at parameter t; `steps` must halve.
    """
    steps = tuple(steps)
    for a, b in zip(steps, steps[1:]):
        if not np.isclose(a, 2.0 * b):
            raise ValueError("Richardson steps must halve")
    diffs = [(sample(t) - sample(-t)) / (2.0 * t) for t in steps]
    level = 1
    while len(diffs) > 1:
        factor = 4.0**level
        diffs = [
            (factor * fine - coarse) / (factor - 1.0)
            for coarse, fine in zip(diffs, diffs[1:])
        ]
        level += 1
    return diffs[0]


@dataclass
class VariationReport:
    """Analytic vs finite-difference rate with residuals.

    `rel_residual` is |analytic - fd| / (1 + |analytic|).
    """

    quantity: str
    analytic: float
    fd: float
    abs_residual: float
    rel_residual: float
    steps: tuple

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "analytic": self.analytic,
            "fd": self.fd,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "steps": list(self.steps),
        }


def fd_report(quantity, analytic, sample, steps=FD_STEPS):
    fd = richardson_rate(sample, steps)
    analytic = np.asarray(analytic, dtype=float)
    absr = np.abs(analytic - fd)
    return VariationReport(
        quantity=quantity,
        analytic=analytic if analytic.ndim else float(analytic),
        fd=fd if np.ndim(fd) else float(fd),
        abs_residual=absr if absr.ndim else float(absr),
        rel_residual=(absr / (1.0 + np.abs(analytic)))
        if absr.ndim
        else float(absr / (1.0 + abs(analytic))),
        steps=tuple(steps),
    )


class MetricCurve:
    """The curve g + t*h with a certified SPD parameter interval.

    epsilon is half the largest dyadic t for which Cholesky succeeds at all
    certification nodes for both signs; finite-difference steps are clamped
    below epsilon/10.
    """

    def __init__(self, metric, direction, epsilon):
        self.metric = metric
        self.direction = direction
        self.epsilon = float(epsilon)

    @classmethod
    def certified(cls, metric, direction, nodes, t_start=1.0):
        t = float(t_start)
        while t > 1e-8:
            try:
                for s in (t, -t):
                    cholesky_lower(metric.shifted(direction, s).values(nodes))
                break
            except (SpdError, ValueError):
                t *= 0.5
        else:
            raise SpdError("no SPD neighborhood found along the metric curve")
        return cls(metric, direction, 0.5 * t)

    def at(self, t):
        if abs(t) > self.epsilon:
            raise ValueError(f"|t|={abs(t)} exceeds certified epsilon {self.epsilon}")
        return self.metric.shifted(self.direction, t)

    def fd_steps(self, steps=FD_STEPS):
        cap = self.epsilon / 10.0
        scale = 1.0
        while steps[0] * scale > cap:
            scale *= 0.5
        return tuple(s * scale for s in steps)
