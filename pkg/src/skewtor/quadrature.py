"""Integration against the Riemannian volume element on compact charts.

Tensor-product grids: periodic axes get the uniform (trapezoid) rule, which
is spectrally accurate for smooth periodic integrands; bounded axes get
Gauss-Legendre nodes, strictly interior so chart-degenerate loci (measure
zero) are never touched.  Summation runs in fixed node order through
math.fsum, so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .curvature import PointData
from .exceptions import HypothesisError
from .variation import (
    scalar_nabla_rate,
    volume_element_rate,
)

__all__ = [
    "QuadratureGrid",
    "build_grid",
    "integrate",
    "volume",
    "volume_rate",
    "fd_volume_rate",
    "TheoremReport",
    "theorem_check",
    "MAX_NODES",
]

MAX_NODES = 2_000_000

EINSTEIN_CERT_TOL = 1e-8
SCAL_CONSTANCY_TOL = 1e-6


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product nodes/weights on a chart."""

    chart: object
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    axis_rules: tuple

    def __len__(self):
        return self.nodes.shape[0]


def _axis_rule(lo, hi, periodic, order):
    if periodic:
        nodes = lo + (hi - lo) * np.arange(order) / order
        weights = np.full(order, (hi - lo) / order)
        return nodes, weights, "uniform"
    x, w = leggauss(order)
    nodes = lo + (hi - lo) * (x + 1.0) / 2.0
    weights = w * (hi - lo) / 2.0
    return nodes, weights, "gauss-legendre"


def build_grid(chart, order):
    """Deterministic tensor-product grid with order**dim nodes."""
    if order < 4:
        raise ValueError(f"grid order must be >= 4, got {order}")
    if order**chart.dim > MAX_NODES:
        raise ValueError(
            f"grid of {order}**{chart.dim} nodes exceeds {MAX_NODES}; "
            "lower the order"
        )
    axes, weights_1d, rules = [], [], []
    for (lo, hi), per in zip(chart.box, chart.periodic):
        nodes, w, rule = _axis_rule(lo, hi, per, order)
        axes.append(nodes)
        weights_1d.append(w)
        rules.append(rule)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*weights_1d, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for w in wmesh:
        weights = weights * w.ravel()
    return QuadratureGrid(chart, nodes, weights, order, tuple(rules))


def _fsum(values):
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def integrate(metric, values, grid):
    """Integral of a scalar (values at the grid nodes, or a callable) w.r.t. dV_g."""
    if callable(values):
        values = values(grid.nodes)
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values)))
        raise ValueError(
            f"non-finite integrand sample at node {grid.nodes[bad].tolist()}"
        )
    dens = np.sqrt(np.linalg.det(metric.values(grid.nodes)))
    return grid.chart.measure_scale * _fsum(grid.weights * values * dens)


def volume(metric, grid):
    return integrate(metric, np.ones(len(grid)), grid)


def volume_rate(metric, direction, grid, data=None):
    """d/dt Vol(g + t*h) at t = 0, which is (1/2) int tr_g h dV."""
    pd = data if data is not None else PointData(metric, None, grid.nodes)
    rate = volume_element_rate(pd, direction.jets(grid.nodes))
    return grid.chart.measure_scale * _fsum(grid.weights * rate * pd.sqrt_det_g)


def fd_volume_rate(metric, direction, grid, steps=(1e-3, 5e-4, 2.5e-4)):
    from .variation import richardson_rate

    def sample(t):
        return volume(metric.shifted(direction, t), grid)

    return richardson_rate(sample, steps)


@dataclass
class TheoremReport:
    """Both sides of the integrated first-variation identity.

    lhs = int d/dt Scal_nabla dV, rhs = -(2 Scal_nabla / n) d/dt Vol;
    residual = |lhs - rhs| / (1 + |rhs|).
    """

    lhs: float
    rhs: float
    residual: float
    scal_nabla: float
    vol_rate: float
    nodes: int
    einstein_deficit: float
    scal_nabla_std: float

    def to_dict(self):
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "scal_nabla": self.scal_nabla,
            "vol_rate": self.vol_rate,
            "nodes": self.nodes,
            "diagnostics": {
                "einstein_deficit": self.einstein_deficit,
                "scal_nabla_std": self.scal_nabla_std,
            },
        }


def theorem_check(metric, torsion, direction, grid, data=None):
    """Check the volume/scalar-curvature variation identity on one direction.

    Hypotheses are enforced, not assumed: the geometry must certify as
    Einstein for the torsion connection (pointwise deficit below 1e-8 in the
    orthonormal frame) and Scal_nabla must be constant across nodes (relative
    standard deviation below 1e-6); violations raise HypothesisError naming
    the failed hypothesis.
    """
    pd = data if data is not None else PointData(metric, torsion, grid.nodes)
    deficit = float(pd.einstein_deficit.max())
    if deficit > EINSTEIN_CERT_TOL:
        raise HypothesisError(
            "geometry is not Einstein for the torsion connection: "
            f"max |Ric_S - (Scal/n) g| = {deficit:.3e} exceeds {EINSTEIN_CERT_TOL}"
        )
    scal = pd.scal_nabla
    mean = float(scal.mean())
    std = float(scal.std())
    if std > SCAL_CONSTANCY_TOL * (1.0 + abs(mean)):
        raise HypothesisError(
            f"Scal_nabla is not constant: std {std:.3e} over the grid "
            f"(mean {mean:.6e})"
        )
    hjets = direction.jets(grid.nodes)
    dens = grid.weights * pd.sqrt_det_g * grid.chart.measure_scale
    lhs = _fsum(dens * scalar_nabla_rate(pd, hjets))
    vrate = _fsum(dens * volume_element_rate(pd, hjets))
    n = metric.chart.dim
    rhs = -(2.0 * mean / n) * vrate
    return TheoremReport(
        lhs=lhs,
        rhs=rhs,
        residual=abs(lhs - rhs) / (1.0 + abs(rhs)),
        scal_nabla=mean,
        vol_rate=vrate,
        nodes=len(grid),
        einstein_deficit=deficit,
        scal_nabla_std=std,
    )
