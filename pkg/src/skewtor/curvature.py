"""Curvature of the metric connection with totally skew torsion.

The connection is the Levi-Civita one shifted by half the torsion,
nabla = nabla^g + T/2, with curvature convention

    R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z,
    R(X, Y, Z, W) = g(R(X, Y)Z, W).

The Ricci tensor is contracted as Ric(X, Y) = sum_i R(X, e_i, e_i, Y) over a
g-orthonormal frame; that exact index placement differs between textbooks and
is load-bearing here.  Every report is assembled twice: once by contracting
the full curvature and once through

    Ric = Ric^g - S/4 - (d*T)/2,

and the two routes must agree -- this is the module's strongest self-test.

All heavy lifting happens on raw jet-coefficient arrays (batch axes first,
tensor indices next, derivative axes last), so a whole lattice of points is
one einsum pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .charts import TorsionField, lower_torsion
from .exceptions import CrossCheckError
from .linalg import cholesky_frame

__all__ = [
    "PointData",
    "CurvatureReport",
    "point_data",
    "christoffel",
    "connection_with_torsion",
    "curvature_tensor",
    "s_tensor",
    "torsion_norm",
    "curvature_report",
    "einstein_deficit",
    "RICCI_ROUTE_TOL",
]

RICCI_ROUTE_TOL = 1e-9


# ---------------------------------------------------------------------------
# raw-array kernels (shared with the invariant Lie-algebra engine)


def christoffel_arrays(ginv, dg):
    # Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
    A = (
        np.einsum("...jli->...lij", dg)
        + np.einsum("...ilj->...lij", dg)
        - np.einsum("...ijl->...lij", dg)
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, A)


def christoffel_derivative(ginv, dginv, dg, d2g):
    A = (
        np.einsum("...jli->...lij", dg)
        + np.einsum("...ilj->...lij", dg)
        - np.einsum("...ijl->...lij", dg)
    )
    dA = (
        np.einsum("...jlim->...lijm", d2g)
        + np.einsum("...iljm->...lijm", d2g)
        - np.einsum("...ijlm->...lijm", d2g)
    )
    return 0.5 * (
        np.einsum("...klm,...lij->...kijm", dginv, A)
        + np.einsum("...kl,...lijm->...kijm", ginv, dA)
    )


def christoffel_second_derivative(ginv, dginv, d2ginv, dg, d2g, d3g):
    A = (
        np.einsum("...jli->...lij", dg)
        + np.einsum("...ilj->...lij", dg)
        - np.einsum("...ijl->...lij", dg)
    )
    dA = (
        np.einsum("...jlim->...lijm", d2g)
        + np.einsum("...iljm->...lijm", d2g)
        - np.einsum("...ijlm->...lijm", d2g)
    )
    d2A = (
        np.einsum("...jlimp->...lijmp", d3g)
        + np.einsum("...iljmp->...lijmp", d3g)
        - np.einsum("...ijlmp->...lijmp", d3g)
    )
    return 0.5 * (
        np.einsum("...klmp,...lij->...kijmp", d2ginv, A)
        + np.einsum("...klm,...lijp->...kijmp", dginv, dA)
        + np.einsum("...klp,...lijm->...kijmp", dginv, dA)
        + np.einsum("...kl,...lijmp->...kijmp", ginv, d2A)
    )


def inverse_metric_derivatives(ginv, dg, d2g=None):
    dginv = -np.einsum("...ab,...bcm,...cd->...adm", ginv, dg, ginv)
    if d2g is None:
        return dginv
    d2ginv = -(
        np.einsum("...abm,...bcp,...cd->...admp", dginv, dg, ginv)
        + np.einsum("...ab,...bcmp,...cd->...admp", ginv, d2g, ginv)
        + np.einsum("...ab,...bcp,...cdm->...admp", ginv, dg, dginv)
    )
    return dginv, d2ginv


def riemann_up(conn, dconn=None, bracket=None):
    """R^l_ijk from connection coefficients.

    `dconn` supplies the coordinate-derivative terms (chart engine);
    `bracket` supplies the -c^m_ij conn^l_mk term when frame vector fields
    have nonvanishing brackets (invariant engine).
    """
    R = np.einsum("...lim,...mjk->...lijk", conn, conn) - np.einsum(
        "...ljm,...mik->...lijk", conn, conn
    )
    if dconn is not None:
        R = R + np.einsum("...ljki->...lijk", dconn) - np.einsum(
            "...likj->...lijk", dconn
        )
    if bracket is not None:
        R = R - np.einsum("...mij,...lmk->...lijk", bracket, conn)
    return R


def riemann_up_derivative(conn, dconn, d2conn):
    return (
        np.einsum("...ljkim->...lijkm", d2conn)
        - np.einsum("...likjm->...lijkm", d2conn)
        + np.einsum("...liem,...ejk->...lijkm", dconn, conn)
        + np.einsum("...lie,...ejkm->...lijkm", conn, dconn)
        - np.einsum("...ljem,...eik->...lijkm", dconn, conn)
        - np.einsum("...lje,...eikm->...lijkm", conn, dconn)
    )


def lower_riemann(g, r_up):
    return np.einsum("...lm,...mijk->...ijkl", g, r_up)


def ricci_contraction(ginv, r_down):
    # Ric(X, Y) = sum_i R(X, e_i, e_i, Y)
    return np.einsum("...cd,...acdb->...ab", ginv, r_down)


def s_tensor_arrays(ginv, tlow):
    return np.einsum("...ce,...df,...cad,...ebf->...ab", ginv, ginv, tlow, tlow)


def torsion_norm_sq_arrays(ginv, tlow):
    return (
        np.einsum("...ad,...be,...cf,...abc,...def->...", ginv, ginv, ginv, tlow, tlow)
        / 6.0
    )


def covariant_derivative_3form(conn, tlow, dtlow):
    # (nabla_a T)_mbc for the connection with coefficients `conn`
    return (
        np.einsum("...mbca->...ambc", dtlow)
        - np.einsum("...eam,...ebc->...ambc", conn, tlow)
        - np.einsum("...eab,...mec->...ambc", conn, tlow)
        - np.einsum("...eac,...mbe->...ambc", conn, tlow)
    )


def codifferential_3form(ginv, conn, tlow, dtlow):
    nab = covariant_derivative_3form(conn, tlow, dtlow)
    return -np.einsum("...am,...ambc->...bc", ginv, nab)


def to_frame(E, tensor, rank=2):
    if rank == 2:
        return np.einsum("...ai,...bj,...ab->...ij", E, E, tensor)
    if rank == 4:
        return np.einsum(
            "...ai,...bj,...ck,...dl,...abcd->...ijkl", E, E, E, E, tensor
        )
    raise ValueError(f"unsupported rank {rank}")


# ---------------------------------------------------------------------------
# per-point lattice cache


class PointData:
    """Cached curvature data for a lattice of chart points.

    The metric-dependent quantities are computed once (lazily) and reused by
    the variation and quadrature layers, which evaluate many cheap direction
    fields against the same lattice.  Order 3 carries one extra derivative of
    everything needed to differentiate the Einstein tensor exactly.
    """

    def __init__(self, metric, torsion, x, order=2):
        self.metric = metric
        self.torsion = (
            torsion
            if torsion is not None
            else TorsionField.zero(metric.chart, metric)
        )
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.order = order
        self.n = metric.chart.dim

    @cached_property
    def gjets(self):
        return self.metric.jets(self.x, self.order)

    @cached_property
    def tjets(self):
        return self.torsion.jets(self.x, self.order)

    @property
    def g(self):
        return self.gjets[0]

    @property
    def dg(self):
        return self.gjets[1]

    @property
    def d2g(self):
        return self.gjets[2]

    @cached_property
    def ginv(self):
        return np.linalg.inv(self.g)

    @cached_property
    def _dginvs(self):
        return inverse_metric_derivatives(self.ginv, self.dg, self.d2g)

    @property
    def dginv(self):
        return self._dginvs[0]

    @property
    def d2ginv(self):
        return self._dginvs[1]

    @cached_property
    def frame(self):
        return cholesky_frame(self.g)

    @cached_property
    def sqrt_det_g(self):
        return np.sqrt(np.linalg.det(self.g))

    @cached_property
    def gamma(self):
        return christoffel_arrays(self.ginv, self.dg)

    @cached_property
    def dgamma(self):
        return christoffel_derivative(self.ginv, self.dginv, self.dg, self.d2g)

    @cached_property
    def d2gamma(self):
        if self.order < 3:
            raise ValueError("second connection derivatives need order-3 jets")
        return christoffel_second_derivative(
            self.ginv, self.dginv, self.d2ginv, self.dg, self.d2g, self.gjets[3]
        )

    @property
    def tup(self):
        return self.tjets[0]

    @property
    def dtup(self):
        return self.tjets[1]

    @cached_property
    def _tlow_jets(self):
        return lower_torsion(self.gjets, self.tjets)

    @property
    def tlow(self):
        return self._tlow_jets[0]

    @property
    def dtlow(self):
        return self._tlow_jets[1]

    @cached_property
    def conn_torsion(self):
        return self.gamma + 0.5 * self.tup

    @cached_property
    def dconn_torsion(self):
        return self.dgamma + 0.5 * self.dtup

    @cached_property
    def riemann_nabla(self):
        r_up = riemann_up(self.conn_torsion, self.dconn_torsion)
        return lower_riemann(self.g, r_up)

    @cached_property
    def riemann_lc(self):
        return lower_riemann(self.g, riemann_up(self.gamma, self.dgamma))

    @cached_property
    def ric_g(self):
        return ricci_contraction(self.ginv, self.riemann_lc)

    @cached_property
    def ric_nabla(self):
        """Route (a): contraction of the full curvature of nabla."""
        return ricci_contraction(self.ginv, self.riemann_nabla)

    @cached_property
    def s_coord(self):
        return s_tensor_arrays(self.ginv, self.tlow)

    @cached_property
    def dstar_t(self):
        return codifferential_3form(self.ginv, self.gamma, self.tlow, self.dtlow)

    @cached_property
    def ric_nabla_relation(self):
        """Route (b): Ric^g - S/4 - (d*T)/2."""
        return self.ric_g - 0.25 * self.s_coord - 0.5 * self.dstar_t

    @cached_property
    def scal_g(self):
        return np.einsum("...ab,...ab->...", self.ginv, self.ric_g)

    @cached_property
    def torsion_norm_sq(self):
        return torsion_norm_sq_arrays(self.ginv, self.tlow)

    @cached_property
    def scal_nabla(self):
        return np.einsum("...ab,...ab->...", self.ginv, self.ric_nabla)

    # -- frame components ---------------------------------------------------

    @cached_property
    def ric_nabla_frame(self):
        return to_frame(self.frame, self.ric_nabla)

    @cached_property
    def ric_s_frame(self):
        r = self.ric_nabla_frame
        return 0.5 * (r + np.swapaxes(r, -1, -2))

    @cached_property
    def ric_a_frame(self):
        r = self.ric_nabla_frame
        return 0.5 * (r - np.swapaxes(r, -1, -2))

    @cached_property
    def ric_g_frame(self):
        return to_frame(self.frame, self.ric_g)

    @cached_property
    def s_frame(self):
        return to_frame(self.frame, self.s_coord)

    @cached_property
    def route_disagreement(self):
        diff = to_frame(self.frame, self.ric_nabla - self.ric_nabla_relation)
        return np.sqrt(np.einsum("...ij,...ij->...", diff, diff))

    @cached_property
    def einstein_deficit(self):
        n = self.n
        dev = self.ric_s_frame - (self.scal_nabla / n)[..., None, None] * np.eye(n)
        return np.sqrt(np.einsum("...ij,...ij->...", dev, dev))

    # -- order-3 extension: derivative of the Einstein tensor ---------------

    @cached_property
    def d_ric_g(self):
        dr_up = riemann_up_derivative(self.gamma, self.dgamma, self.d2gamma)
        r_up = riemann_up(self.gamma, self.dgamma)
        dr_down = np.einsum("...lmq,...mijk->...ijklq", self.dg, r_up) + np.einsum(
            "...lm,...mijkq->...ijklq", self.g, dr_up
        )
        return np.einsum("...cdq,...acdb->...abq", self.dginv, self.riemann_lc) + (
            np.einsum("...cd,...acdbq->...abq", self.ginv, dr_down)
        )

    @cached_property
    def d_s_coord(self):
        gi, dgi = self.ginv, self.dginv
        t, dt = self.tlow, self.dtlow
        return (
            np.einsum("...ceq,...df,...cad,...ebf->...abq", dgi, gi, t, t)
            + np.einsum("...ce,...dfq,...cad,...ebf->...abq", gi, dgi, t, t)
            + np.einsum("...ce,...df,...cadq,...ebf->...abq", gi, gi, dt, t)
            + np.einsum("...ce,...df,...cad,...ebfq->...abq", gi, gi, t, dt)
        )

    @cached_property
    def d_scal_g(self):
        return np.einsum("...abq,...ab->...q", self.dginv, self.ric_g) + np.einsum(
            "...ab,...abq->...q", self.ginv, self.d_ric_g
        )

    @cached_property
    def d_torsion_norm_sq(self):
        gi, dgi = self.ginv, self.dginv
        t, dt = self.tlow, self.dtlow
        return (
            3.0 * np.einsum("...adq,...be,...cf,...abc,...def->...q", dgi, gi, gi, t, t)
            + 2.0 * np.einsum("...ad,...be,...cf,...abcq,...def->...q", gi, gi, gi, dt, t)
        ) / 6.0

    @cached_property
    def einstein_tensor(self):
        """G = -Ric_S + (Scal_nabla/2) g, built from the symmetric route."""
        ric_s = self.ric_g - 0.25 * self.s_coord
        scal_nabla = self.scal_g - 1.5 * self.torsion_norm_sq
        return -ric_s + 0.5 * scal_nabla[..., None, None] * self.g

    @cached_property
    def d_einstein_tensor(self):
        d_ric_s = self.d_ric_g - 0.25 * self.d_s_coord
        scal_nabla = self.scal_g - 1.5 * self.torsion_norm_sq
        d_scal_nabla = self.d_scal_g - 1.5 * self.d_torsion_norm_sq
        return (
            -d_ric_s
            + 0.5 * d_scal_nabla[..., None, None, :] * self.g[..., None]
            + 0.5 * scal_nabla[..., None, None, None] * self.dg
        )


def point_data(metric, torsion, x, order=2):
    return PointData(metric, torsion, x, order)


# ---------------------------------------------------------------------------
# operation surface


def christoffel(metric, x):
    pd = PointData(metric, None, x)
    return pd.gamma[0] if np.asarray(x).ndim == 1 else pd.gamma


def connection_with_torsion(metric, torsion, x):
    pd = PointData(metric, torsion, x)
    out = pd.conn_torsion
    return out[0] if np.asarray(x).ndim == 1 else out


def curvature_tensor(metric, torsion, x):
    """Full curvature R_ijkl in coordinates and in the orthonormal frame."""
    pd = PointData(metric, torsion, x)
    coord = pd.riemann_nabla
    frame = to_frame(pd.frame, coord, rank=4)
    if np.asarray(x).ndim == 1:
        return coord[0], frame[0]
    return coord, frame


def s_tensor(metric, torsion, x):
    pd = PointData(metric, torsion, x)
    out = pd.s_coord
    return out[0] if np.asarray(x).ndim == 1 else out


def torsion_norm(metric, torsion, x):
    pd = PointData(metric, torsion, x)
    out = pd.torsion_norm_sq
    return out[0] if np.asarray(x).ndim == 1 else out


@dataclass
class CurvatureReport:
    """Per-point record of the full curvature stack (frame components)."""

    point: np.ndarray
    gamma: np.ndarray
    gamma_torsion: np.ndarray
    r_nabla_coord: np.ndarray
    r_nabla_frame: np.ndarray
    ric_nabla: np.ndarray
    ric_s: np.ndarray
    ric_a: np.ndarray
    ric_g: np.ndarray
    s: np.ndarray
    scal_g: float
    scal_nabla: float
    torsion_norm_sq: float

    def to_dict(self):
        out = {}
        for name in (
            "point gamma gamma_torsion r_nabla_coord r_nabla_frame ric_nabla "
            "ric_s ric_a ric_g s".split()
        ):
            out[name] = np.asarray(getattr(self, name)).tolist()
        out["scal_g"] = float(self.scal_g)
        out["scal_nabla"] = float(self.scal_nabla)
        out["torsion_norm_sq"] = float(self.torsion_norm_sq)
        return out


def reports_from_data(pd, route_tol=RICCI_ROUTE_TOL):
    """Build one report per lattice point, cross-checking both Ricci routes."""
    bad = pd.route_disagreement > route_tol
    if np.any(bad):
        i = int(np.argmax(pd.route_disagreement))
        raise CrossCheckError(
            "Ricci routes disagree: contraction vs relation differ by "
            f"{pd.route_disagreement[i]:.3e} at point {pd.x[i].tolist()}",
            first=pd.ric_nabla[i],
            second=pd.ric_nabla_relation[i],
        )
    frame4 = to_frame(pd.frame, pd.riemann_nabla, rank=4)
    reports = []
    for i in range(pd.x.shape[0]):
        reports.append(
            CurvatureReport(
                point=pd.x[i],
                gamma=pd.gamma[i],
                gamma_torsion=pd.conn_torsion[i],
                r_nabla_coord=pd.riemann_nabla[i],
                r_nabla_frame=frame4[i],
                ric_nabla=pd.ric_nabla_frame[i],
                ric_s=pd.ric_s_frame[i],
                ric_a=pd.ric_a_frame[i],
                ric_g=pd.ric_g_frame[i],
                s=pd.s_frame[i],
                scal_g=float(pd.scal_g[i]),
                scal_nabla=float(pd.scal_nabla[i]),
                torsion_norm_sq=float(pd.torsion_norm_sq[i]),
            )
        )
    return reports


def curvature_report(metric, torsion, x):
    pd = PointData(metric, torsion, x)
    reports = reports_from_data(pd)
    return reports[0] if np.asarray(x).ndim == 1 else reports


def einstein_deficit(metric, torsion, x):
    """Frobenius deficit of Ric_S - (Scal_nabla/n) g in the orthonormal frame."""
    pd = PointData(metric, torsion, x)
    out = pd.einstein_deficit
    return out[0] if np.asarray(x).ndim == 1 else out
