"""Coordinate charts and the tensor fields living on them.

Fields are closures over chart coordinates: an evaluator receives the
coordinates as jets and returns components built from jet arithmetic, so
exact first and second (optionally third) derivatives come out of a single
evaluation.  Evaluators must be pure; concurrent evaluation at distinct
points is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, SpdError, TorsionError
from .jets import Jet2, coordinate_jets, stack_jets
from .linalg import cholesky_frame, cholesky_lower, check_symmetric

__all__ = [
    "Chart",
    "MetricField",
    "TorsionField",
    "SymTensorField",
    "FormField",
    "FramePoint",
    "evaluate_metric_jet",
    "orthonormal_frame",
    "validate_torsion",
    "lower_torsion",
    "TorsionCheck",
]

ANTISYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Chart:
    """A single coordinate box with per-axis periodicity flags.

    Totally skew torsion needs a 3-form, hence dimension >= 3.
    `measure_scale` multiplies the coordinate volume form when the chart is
    meant to carry extra normalization (1.0 for every built-in geometry).
    """

    box: tuple
    periodic: tuple
    measure_scale: float = 1.0

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError(f"chart dimension must be >= 3, got {self.dim}")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate coordinate interval ({lo}, {hi})")
        if len(self.periodic) != self.dim:
            raise ValueError("periodic flags must match the dimension")

    @property
    def dim(self):
        return len(self.box)

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(x.shape[0], dtype=bool)
        for a, (lo, hi) in enumerate(self.box):
            if self.periodic[a]:
                continue
            ok &= (x[:, a] > lo) & (x[:, a] < hi)
        return ok

    def require_inside(self, x):
        ok = self.contains(x)
        if not ok.all():
            bad = np.atleast_2d(np.asarray(x, float))[~ok][0]
            raise DomainError(f"point {bad.tolist()} outside chart box {self.box}")

    def random_points(self, rng, count, margin=0.05):
        """Uniform interior points; bounded axes keep `margin` off each end."""
        pts = np.empty((count, self.dim))
        for a, (lo, hi) in enumerate(self.box):
            pad = 0.0 if self.periodic[a] else margin * (hi - lo)
            pts[:, a] = rng.uniform(lo + pad, hi - pad, size=count)
        return pts


class _JetField:
    def __init__(self, chart, evaluator):
        self.chart = chart
        self.evaluator = evaluator

    def _eval(self, x, order):
        x = np.asarray(x, dtype=float)
        self.chart.require_inside(x)
        coords = coordinate_jets(x, order)
        return self.evaluator(coords)


class MetricField(_JetField):
    """Riemannian metric, SPD at every sampled point."""

    def jets(self, x, order=2):
        entries = self._eval(x, order)
        out = stack_jets(entries, order=order)
        g = check_symmetric(out[0], what="metric value")
        cholesky_lower(g)  # raises SpdError when not positive definite
        return out

    def values(self, x):
        return self.jets(x, order=2)[0]

    def shifted(self, h, t):
        """The metric g + t*h as a new field (h a SymTensorField)."""

        def evaluator(coords):
            a = np.asarray(self.evaluator(coords), dtype=object)
            b = np.asarray(h.evaluator(coords), dtype=object)
            return a + t * b

        return MetricField(self.chart, evaluator)


class SymTensorField(_JetField):
    """Symmetric (0,2) tensor field, e.g. a metric variation direction."""

    def jets(self, x, order=2):
        out = stack_jets(self._eval(x, order), order=order)
        check_symmetric(out[0], what="symmetric tensor value")
        return out

    def values(self, x):
        return self.jets(x, order=2)[0]


class TorsionField(_JetField):
    """Vector-valued torsion stored with (2,1) valence: components T^k_ij.

    The (2,1) tensor is the object held fixed along metric variations; the
    3-form is derived by lowering with the companion base metric.  Evaluators
    return T[k][i][j] antisymmetric in (i, j).
    """

    def __init__(self, chart, evaluator, base_metric):
        super().__init__(chart, evaluator)
        self.base_metric = base_metric

    def jets(self, x, order=2):
        return stack_jets(self._eval(x, order), order=order)

    def values(self, x):
        return self.jets(x, order=2)[0]

    @staticmethod
    def zero(chart, base_metric):
        n = chart.dim

        def evaluator(coords):
            zero = coords[0] * 0.0
            return [[[zero for _ in range(n)] for _ in range(n)] for _ in range(n)]

        return TorsionField(chart, evaluator, base_metric)


class FormField(_JetField):
    """Differential p-form with fully antisymmetric coordinate components."""

    def __init__(self, chart, degree, evaluator):
        super().__init__(chart, evaluator)
        self.degree = degree

    def jets(self, x, order=2):
        out = stack_jets(self._eval(x, order), order=order)
        _check_antisymmetric(out[0], self.degree)
        return out

    def values(self, x):
        return self.jets(x, order=2)[0]


def _check_antisymmetric(a, degree, tol=ANTISYMMETRY_TOL):
    nb = a.ndim - degree
    for s in range(degree - 1):
        swapped = np.swapaxes(a, nb + s, nb + s + 1)
        dev = np.abs(a + swapped).max() if a.size else 0.0
        if dev > tol:
            raise TorsionError(
                f"components not antisymmetric in slots ({s},{s+1}): "
                f"deviation {dev:.3e}"
            )


@dataclass(frozen=True)
class FramePoint:
    """A point together with a g-orthonormal frame (columns of E)."""

    point: np.ndarray
    frame: np.ndarray


def evaluate_metric_jet(metric, x, order=2):
    """Metric components with exact coordinate derivatives at `x`.

    Returns (g, dg, d2g) with derivative axes appended last:
    dg[..., i, j, m] = d_m g_ij and d2g[..., i, j, m, p] = d_m d_p g_ij.
    """
    return metric.jets(x, order)


def orthonormal_frame(metric, x):
    """Deterministic Cholesky frame at `x`: E^T g E = I."""
    g = metric.values(x)
    return FramePoint(np.asarray(x, dtype=float), cholesky_frame(g))


def lower_torsion(gjets, tjets):
    """Lower the last index of T^k_ij with the metric: T_ijk = g_kl T^l_ij.

    Operates on raw jet coefficient arrays and propagates every derivative
    order present (Leibniz on the stacked coefficients).
    """
    g, dg, d2g = gjets[:3]
    t, dt, d2t = tjets[:3]
    low = np.einsum("...kl,...lij->...ijk", g, t)
    dlow = np.einsum("...klm,...lij->...ijkm", dg, t) + np.einsum(
        "...kl,...lijm->...ijkm", g, dt
    )
    d2low = (
        np.einsum("...klmp,...lij->...ijkmp", d2g, t)
        + np.einsum("...klm,...lijp->...ijkmp", dg, dt)
        + np.einsum("...klp,...lijm->...ijkmp", dg, dt)
        + np.einsum("...kl,...lijmp->...ijkmp", g, d2t)
    )
    if len(gjets) > 3:
        d3g, d3t = gjets[3], tjets[3]
        d3low = (
            np.einsum("...klmpq,...lij->...ijkmpq", d3g, t)
            + np.einsum("...klmp,...lijq->...ijkmpq", d2g, dt)
            + np.einsum("...klmq,...lijp->...ijkmpq", d2g, dt)
            + np.einsum("...klpq,...lijm->...ijkmpq", d2g, dt)
            + np.einsum("...klm,...lijpq->...ijkmpq", dg, d2t)
            + np.einsum("...klp,...lijmq->...ijkmpq", dg, d2t)
            + np.einsum("...klq,...lijmp->...ijkmpq", dg, d2t)
            + np.einsum("...kl,...lijmpq->...ijkmpq", g, d3t)
        )
        return low, dlow, d2low, d3low
    return low, dlow, d2low


@dataclass
class TorsionCheck:
    passed: bool
    max_deviation: float
    failing_points: list = field(default_factory=list)


def validate_torsion(metric, torsion, points, tol=ANTISYMMETRY_TOL):
    """Check that the lowered torsion is a 3-form at the sample points.

    Antisymmetry in (i, j) comes with the (2,1) storage; the nontrivial part
    is antisymmetry across the index lowered with the companion metric.
    Returns a report instead of raising, listing offending points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g = metric.jets(points)
    t = torsion.jets(points)
    low = lower_torsion(g, t)[0]
    dev = np.zeros(points.shape[0])
    for s in range(2):
        swapped = np.swapaxes(low, 1 + s, 2 + s)
        dev = np.maximum(dev, np.abs(low + swapped).reshape(points.shape[0], -1).max(axis=1))
    bad = dev > tol
    return TorsionCheck(
        passed=not bad.any(),
        max_deviation=float(dev.max()) if dev.size else 0.0,
        failing_points=[points[i].tolist() for i in np.nonzero(bad)[0]],
    )
