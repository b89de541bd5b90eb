"""Curvature of left-invariant structures and the Einstein-structure solver.

For a Lie algebra with structure constants c^k_ij and an invariant metric,
the Koszul formula closes algebraically:

    g(nabla_{e_i} e_j, e_k) = 1/2 ( g([e_i,e_j],e_k) - g([e_j,e_k],e_i)
                                    + g([e_k,e_i],e_j) ),

and the whole curvature stack reduces to constant-coefficient contractions,
so no chart is involved.  The same einsum kernels run on plain floats and on
jet-valued entries, which is how the Gauss-Newton solver gets exact
Jacobians of its residual map (forward-mode jets over the parameters).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import (
    CurvatureReport,
    codifferential_3form,
    covariant_derivative_3form,
    lower_riemann,
    ricci_contraction,
    riemann_up,
    s_tensor_arrays,
    to_frame,
    torsion_norm_sq_arrays,
)
from .exceptions import CrossCheckError, SpdError
from .jets import Jet2, coordinate_jets, jet_det, jet_mat_inverse, stack_jets
from .linalg import cholesky_frame, cholesky_lower

__all__ = [
    "LieAlgebraData",
    "InvariantStructure",
    "SolverConfig",
    "SolverResult",
    "Parametrization",
    "koszul_levi_civita",
    "invariant_report",
    "einstein_residual",
    "solve_einstein",
    "solve_campaign",
    "distinct_solutions",
    "continuation",
    "cross_validate",
    "su2_algebra",
    "abelian_algebra",
    "su2xr_algebra",
    "su2_diag_vol",
    "su2xr_family",
]

JACOBI_TOL = 1e-12


def _antisymmetrize_pairs(c):
    return 0.5 * (c - np.swapaxes(c, -1, -2))


@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants c[k, i, j] with [e_i, e_j] = c^k_ij e_k."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if np.abs(c + np.swapaxes(c, -1, -2)).max() > JACOBI_TOL:
            raise ValueError("structure constants must be antisymmetric in (i, j)")
        jac = (
            np.einsum("mij,lmk->lijk", c, c)
            + np.einsum("mjk,lmi->lijk", c, c)
            + np.einsum("mki,lmj->lijk", c, c)
        )
        dev = np.abs(jac).max()
        if dev > JACOBI_TOL:
            raise ValueError(f"Jacobi identity violated (deviation {dev:.3e})")

    @property
    def dim(self):
        return self.c.shape[0]

    @classmethod
    def from_triples(cls, n, triples):
        """Build from entries [i, j, k, value] meaning c^k_ij = value."""
        c = np.zeros((n, n, n))
        for i, j, k, v in triples:
            c[int(k), int(i), int(j)] = v
            c[int(k), int(j), int(i)] = -v
        return cls(c)


@dataclass(frozen=True)
class InvariantStructure:
    """An invariant metric and fully antisymmetric torsion on the algebra."""

    metric: np.ndarray
    torsion: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.metric, dtype=float)
        t = np.asarray(self.torsion, dtype=float)
        object.__setattr__(self, "metric", g)
        object.__setattr__(self, "torsion", t)
        cholesky_lower(g)
        for s in range(2):
            if np.abs(t + np.swapaxes(t, s, s + 1)).max() > 1e-10:
                raise ValueError("invariant torsion must be fully antisymmetric")


def _inv(a):
    if a.dtype == object:
        return np.array(jet_mat_inverse([list(row) for row in a]), dtype=object)
    return np.linalg.inv(a)


def _det(a):
    if a.dtype == object:
        return jet_det([list(row) for row in a])
    return np.linalg.det(a)


def koszul_levi_civita(algebra, g):
    """Connection coefficients Lam^l_ij of the Levi-Civita connection."""
    c = algebra.c
    g = np.asarray(g)
    k = 0.5 * (
        np.einsum("mij,mk->ijk", c, g)
        - np.einsum("mjk,mi->ijk", c, g)
        + np.einsum("mki,mj->ijk", c, g)
    )
    return np.einsum("lk,ijk->lij", _inv(g), k)


def _engine(algebra, g, tlow):
    """All curvature quantities, dtype-generic (floats or parameter jets)."""
    c = algebra.c
    g = np.asarray(g)
    tlow = np.asarray(tlow)
    ginv = _inv(g)
    lam = koszul_levi_civita(algebra, g)
    tup = np.einsum("kl,ijl->kij", ginv, tlow)
    conn = lam + 0.5 * tup
    r_nabla = lower_riemann(g, riemann_up(conn, bracket=c))
    r_lc = lower_riemann(g, riemann_up(lam, bracket=c))
    ric_nabla = ricci_contraction(ginv, r_nabla)
    ric_g = ricci_contraction(ginv, r_lc)
    s = s_tensor_arrays(ginv, tlow)
    tnsq = torsion_norm_sq_arrays(ginv, tlow)
    scal_g = np.einsum("ab,ab->", ginv, ric_g)
    scal_nabla = np.einsum("ab,ab->", ginv, ric_nabla)
    return {
        "ginv": ginv,
        "lam": lam,
        "conn": conn,
        "r_nabla": r_nabla,
        "r_lc": r_lc,
        "ric_nabla": ric_nabla,
        "ric_g": ric_g,
        "s": s,
        "tnsq": tnsq,
        "scal_g": scal_g,
        "scal_nabla": scal_nabla,
    }


def invariant_report(algebra, g, tlow, route_tol=1e-9):
    """CurvatureReport for an invariant structure (no chart involved).

    Cross-checks the contracted Ricci against Ric^g - S/4 - (d*T)/2 exactly
    as the chart engine does.
    """
    g = np.asarray(g, dtype=float)
    tlow = np.asarray(tlow, dtype=float)
    e = _engine(algebra, g, tlow)
    zero_dt = np.zeros(tlow.shape + (algebra.dim,))
    dstar = codifferential_3form(e["ginv"], e["lam"], tlow, zero_dt)
    relation = e["ric_g"] - 0.25 * e["s"] - 0.5 * dstar
    frame = cholesky_frame(g)
    gap = to_frame(frame, e["ric_nabla"] - relation)
    gap_norm = float(np.sqrt((gap * gap).sum()))
    if gap_norm > route_tol:
        raise CrossCheckError(
            f"invariant Ricci routes disagree by {gap_norm:.3e}",
            first=e["ric_nabla"],
            second=relation,
        )
    ricf = to_frame(frame, e["ric_nabla"])
    return CurvatureReport(
        point=None,
        gamma=e["lam"],
        gamma_torsion=e["conn"],
        r_nabla_coord=e["r_nabla"],
        r_nabla_frame=to_frame(frame, e["r_nabla"], rank=4),
        ric_nabla=ricf,
        ric_s=0.5 * (ricf + ricf.T),
        ric_a=0.5 * (ricf - ricf.T),
        ric_g=to_frame(frame, e["ric_g"]),
        s=to_frame(frame, e["s"]),
        scal_g=float(e["scal_g"]),
        scal_nabla=float(e["scal_nabla"]),
        torsion_norm_sq=float(e["tnsq"]),
    )


def parallel_torsion_deficit(algebra, g, tlow):
    """Max |nabla T| for the torsion connection; ~0 means parallel torsion."""
    e = _engine(algebra, g, tlow)
    zero_dt = np.zeros(tlow.shape + (algebra.dim,))
    nab = covariant_derivative_3form(e["conn"], tlow, zero_dt)
    return float(np.abs(nab).max())


def einstein_residual(algebra, g, tlow):
    """Frobenius norm of Ric_S - (Scal_nabla/n) g in the orthonormal frame."""
    g = np.asarray(g, dtype=float)
    e = _engine(algebra, g, np.asarray(tlow, dtype=float))
    n = algebra.dim
    frame = cholesky_frame(g)
    ricf = to_frame(frame, e["ric_nabla"])
    ric_s = 0.5 * (ricf + ricf.T)
    dev = ric_s - (e["scal_nabla"] / n) * np.eye(n)
    return float(np.sqrt((dev * dev).sum()))


# ---------------------------------------------------------------------------
# Gauss-Newton solver


@dataclass
class Parametrization:
    """Maps a parameter vector to an invariant structure.

    `build(theta)` must be written in scalar arithmetic only (+,-,*,/,sqrt),
    so it evaluates on both floats and jets; it returns nested lists
    (g_entries, t_entries).  When `unit_det` is set, the residual gains a
    det(g) - 1 row to fix the overall scale.
    """

    name: str
    dim: int
    build: callable
    unit_det: bool = True


@dataclass
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 60
    max_rejections: int = 40
    armijo: float = 1e-4
    min_step: float = 1e-14


@dataclass
class SolverResult:
    params: np.ndarray
    metric: np.ndarray
    torsion: np.ndarray
    residual: float
    einstein_residual: float
    iterations: int
    converged: bool
    scal_nabla: float
    torsion_norm_sq: float
    message: str = ""

    def to_dict(self):
        return {
            "params": np.asarray(self.params).tolist(),
            "metric": np.asarray(self.metric).tolist(),
            "torsion": np.asarray(self.torsion).tolist(),
            "residual": self.residual,
            "einstein_residual": self.einstein_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "scal_nabla": self.scal_nabla,
            "torsion_norm_sq": self.torsion_norm_sq,
            "message": self.message,
        }


def _residual_vector(algebra, parametrization, theta_entries):
    g_entries, t_entries = parametrization.build(theta_entries)
    g = np.asarray(g_entries, dtype=object)
    tlow = np.asarray(t_entries, dtype=object)
    n = algebra.dim
    e = _engine(algebra, g, tlow)
    ric_s = 0.5 * (e["ric_nabla"] + e["ric_nabla"].T)
    dev = ric_s - (e["scal_nabla"] / n) * np.asarray(g)
    rows = [dev[i][j] for i in range(n) for j in range(i, n)]
    if parametrization.unit_det:
        rows.append(_det(g) - 1.0)
    return rows


def _residual_floats(algebra, parametrization, theta):
    rows = _residual_vector(
        algebra, parametrization, [float(v) for v in theta]
    )
    return np.array([float(r) for r in rows])


def _residual_jets(algebra, parametrization, theta):
    jets = coordinate_jets(np.asarray(theta, dtype=float))
    rows = _residual_vector(algebra, parametrization, jets)
    r = np.array([row.val if isinstance(row, Jet2) else float(row) for row in rows])
    jac = np.array(
        [
            row.grad
            if isinstance(row, Jet2)
            else np.zeros(len(theta))
            for row in rows
        ]
    )
    return r, jac


def _structure_floats(parametrization, theta):
    g_entries, t_entries = parametrization.build([float(v) for v in theta])
    g = np.asarray(g_entries, dtype=float)
    t = np.asarray(t_entries, dtype=float)
    return g, t


def solve_einstein(algebra, parametrization, seed, config=None):
    """Gauss-Newton with backtracking on the stacked Einstein residual.

    Non-convergence is reported honestly in the result; the final structure
    is always re-certified through the independent `einstein_residual` path,
    never trusted from the optimizer's own bookkeeping.
    """
    config = config or SolverConfig()
    theta = np.asarray(seed, dtype=float).copy()
    rejections = 0
    message = ""
    converged = False
    it = 0

    def objective(t):
        try:
            g, _ = _structure_floats(parametrization, t)
            cholesky_lower(g)
        except (SpdError, ValueError):
            return None
        return 0.5 * float(np.sum(_residual_floats(algebra, parametrization, t) ** 2))

    f0 = objective(theta)
    if f0 is None:
        raise SpdError("seed parameters give a non-SPD metric")
    for it in range(1, config.max_iter + 1):
        r, jac = _residual_jets(algebra, parametrization, theta)
        rnorm = float(np.linalg.norm(r))
        if rnorm < config.tol:
            converged = True
            it -= 1
            break
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        grad = jac.T @ r
        descent = float(grad @ step)
        if not np.isfinite(step).all() or descent >= 0.0:
            message = "singular Jacobian with no descent direction"
            break
        alpha = 1.0
        f0 = 0.5 * rnorm**2
        accepted = False
        while alpha >= config.min_step:
            trial = objective(theta + alpha * step)
            if trial is None:
                rejections += 1
                if rejections > config.max_rejections:
                    raise SpdError(
                        "parametrization left the SPD cone more than "
                        f"{config.max_rejections} times"
                    )
            elif trial <= f0 + config.armijo * alpha * descent:
                theta = theta + alpha * step
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            message = "line search stalled"
            break
    else:
        message = "iteration limit reached"

    g, t = _structure_floats(parametrization, theta)
    rfinal = float(np.linalg.norm(_residual_floats(algebra, parametrization, theta)))
    if converged and rfinal >= config.tol:
        converged = False
        message = "final residual re-check failed"
    e = _engine(algebra, g, t)
    return SolverResult(
        params=theta,
        metric=g,
        torsion=t,
        residual=rfinal,
        einstein_residual=einstein_residual(algebra, g, t),
        iterations=it,
        converged=converged,
        scal_nabla=float(e["scal_nabla"]),
        torsion_norm_sq=float(e["tnsq"]),
        message=message,
    )


def solve_campaign(algebra, parametrization, seeds, config=None, pool=None):
    """Solve from many seeds; per-seed failures are recorded, not raised."""
    def run(seed):
        try:
            return solve_einstein(algebra, parametrization, seed, config)
        except Exception as exc:  # honest per-seed error record
            return SolverResult(
                params=np.asarray(seed, dtype=float),
                metric=np.zeros((algebra.dim, algebra.dim)),
                torsion=np.zeros((algebra.dim,) * 3),
                residual=float("nan"),
                einstein_residual=float("nan"),
                iterations=0,
                converged=False,
                scal_nabla=float("nan"),
                torsion_norm_sq=float("nan"),
                message=f"error: {exc}",
            )

    if pool is None:
        return [run(s) for s in seeds]
    return list(pool.map(run, seeds))


def distinct_solutions(results, tol=1e-6):
    """Converged parameter vectors, deduplicated at `tol` in parameter space."""
    out = []
    for res in results:
        if not res.converged:
            continue
        if all(np.linalg.norm(res.params - o.params) > tol for o in out):
            out.append(res)
    return out


def continuation(algebra, family, values, seed, config=None):
    """One-parameter continuation: solve family(a) for each a, warm-starting."""
    out = []
    theta = np.asarray(seed, dtype=float)
    for a in values:
        res = solve_einstein(algebra, family(a), theta, config)
        out.append((float(a), res))
        if res.converged:
            theta = res.params
    return out


# ---------------------------------------------------------------------------
# chart <-> algebra cross-validation


def _invariants_from_report(rep):
    return {
        "scal_g": rep.scal_g,
        "scal_nabla": rep.scal_nabla,
        "torsion_norm_sq": rep.torsion_norm_sq,
        "trace_s": float(np.trace(rep.s)),
        "ric_s_spectrum": np.linalg.eigvalsh(rep.ric_s),
        "ric_g_spectrum": np.linalg.eigvalsh(rep.ric_g),
        "s_spectrum": np.linalg.eigvalsh(rep.s),
        "ric_a_norm": float(np.linalg.norm(rep.ric_a)),
        "r_nabla_norm": float(np.linalg.norm(rep.r_nabla_frame.ravel())),
    }


def cross_validate(metric, torsion, points, algebra, g_alg, tlow_alg, tol=1e-8):
    """Compare the chart engine against the algebraic engine.

    The two engines use different orthonormal frames (Cholesky in chart
    coordinates vs the algebra basis), so the comparison runs over the
    frame-invariant content of the reports: scalars, symmetric-tensor
    spectra and invariant norms.  Raises CrossCheckError naming the worst
    field when any residual exceeds `tol`; returns the residual table.
    """
    from .curvature import curvature_report

    ref = _invariants_from_report(invariant_report(algebra, g_alg, tlow_alg))
    reports = curvature_report(metric, torsion, np.atleast_2d(points))
    table = {}
    for name, ref_val in ref.items():
        worst = 0.0
        for rep in reports:
            val = _invariants_from_report(rep)[name]
            worst = max(worst, float(np.abs(np.asarray(val) - ref_val).max()))
        table[name] = worst
    worst_field = max(table, key=table.get)
    if table[worst_field] > tol:
        raise CrossCheckError(
            f"chart vs algebraic engines disagree on {worst_field}: "
            f"{table[worst_field]:.3e} > {tol}",
            first=worst_field,
            second=table,
        )
    return table


# ---------------------------------------------------------------------------
# stock algebras and parametrizations


def su2_algebra(scale=1.0):
    """su(2) with [e_i, e_j] = scale * eps_ijk e_k."""
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[k, i, j] = scale
        c[k, j, i] = -scale
    return LieAlgebraData(c)


def abelian_algebra(n):
    return LieAlgebraData(np.zeros((n, n, n)))


def su2xr_algebra(scale=1.0):
    """su(2) + R: the product algebra hosting the S^3 x S^1 families."""
    c = np.zeros((4, 4, 4))
    c[:3, :3, :3] = su2_algebra(scale).c
    return LieAlgebraData(c)


def _eps3():
    e = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        e[i, j, k] = e[j, k, i] = e[k, i, j] = 1.0
        e[j, i, k] = e[i, k, j] = e[k, j, i] = -1.0
    return e


def su2_diag_vol():
    """theta = (a, b, lam): g = diag(a, b, b), T = lam * vol_g on su(2)."""
    eps = _eps3()

    def build(theta):
        a, b, lam = theta
        zero = 0.0 * a
        g = [[a, zero, zero], [zero, b, zero], [zero, zero, b]]
        sdet = (a * b * b) ** 0.5 if not isinstance(a, Jet2) else (a * b * b).sqrt()
        t = [[[lam * sdet * eps[i, j, k] for k in range(3)] for j in range(3)]
             for i in range(3)]
        return g, t

    return Parametrization(name="su2_diag_vol", dim=3, build=build, unit_det=True)


def su2xr_family(a):
    """theta = (lam,): g = diag(a, a, a, 1), T = lam e^123 on su(2) + R."""
    eps = _eps3()

    def build(theta):
        (lam,) = theta
        zero = 0.0 * lam
        g = [[zero + (a if i == j and i < 3 else (1.0 if i == j else 0.0))
              for j in range(4)] for i in range(4)]
        t = [[[lam * eps[i, j, k] if max(i, j, k) < 3 else zero
               for k in range(4)] for j in range(4)] for i in range(4)]
        return g, t

    return Parametrization(name=f"su2xr(a={a})", dim=1, build=build, unit_det=False)
