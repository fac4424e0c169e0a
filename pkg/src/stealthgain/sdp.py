"""Single-block LMI programs and their solver.

A problem here is::

    minimize    c' s
    subject to  M0 + sum_i s_i M_i + U' P V + V' P U  <=  0   (negative semidefinite)
                s_i >= lb_i

over real scalars ``s`` and a symmetric matrix ``P``.  The symmetric
variable is eliminated into the constraint through a basis of symmetric
matrices and the result is handed to the primal-dual interior-point cone
solver of :mod:`cvxopt`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

__all__ = ["Status", "SdpProblem", "SdpSolution", "SolveOptions", "solve", "sym_basis_count"]


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SdpProblem:
    """Linear objective over named scalars, one affine LMI, scalar lower bounds.

    Parameters
    ----------
    scalar_names : tuple of str
        Names of the scalar decision variables, in order.
    objective : ndarray
        Objective coefficients, one per scalar.
    lower_bounds : ndarray
        Lower bound of each scalar (``-inf`` for none).
    constant : ndarray
        Constant symmetric term ``M0`` of side ``q``.
    scalar_coeffs : tuple of ndarray
        Symmetric coefficient ``M_i`` of each scalar.
    p_left, p_right : ndarray
        ``U`` and ``V``, both ``n x q``; ``P`` enters as ``U'PV + V'PU``.
    """

    scalar_names: tuple[str, ...]
    objective: np.ndarray
    lower_bounds: np.ndarray
    constant: np.ndarray
    scalar_coeffs: tuple[np.ndarray, ...]
    p_left: np.ndarray
    p_right: np.ndarray

    def __post_init__(self):
        q = self.constant.shape[0]
        k = len(self.scalar_names)
        if self.constant.shape != (q, q) or not np.allclose(self.constant, self.constant.T, atol=1e-12):
            raise ValueError("constant term must be square and symmetric")
        if len(self.scalar_coeffs) != k or np.shape(self.objective) != (k,) or np.shape(self.lower_bounds) != (k,):
            raise ValueError("objective, bounds and coefficients must have one entry per scalar")
        for name, M in zip(self.scalar_names, self.scalar_coeffs):
            if M.shape != (q, q) or not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"coefficient of {name!r} must be symmetric of side {q}")
        if self.p_left.shape != self.p_right.shape or self.p_left.shape[1:] != (q,):
            raise ValueError(f"P multipliers must both be n x {q}")

    @property
    def side(self) -> int:
        return self.constant.shape[0]

    @property
    def matrix_var_dim(self) -> int:
        return self.p_left.shape[0]

    def lmi_value(self, scalars, P=None) -> np.ndarray:
        """Evaluate the LMI left-hand side at a point."""
        s = np.asarray(scalars, dtype=float)
        out = self.constant.copy()
        for si, M in zip(s, self.scalar_coeffs):
            out += si * M
        n = self.matrix_var_dim
        if n:
            P = np.zeros((n, n)) if P is None else np.asarray(P, dtype=float)
            T = self.p_left.T @ P @ self.p_right
            out += T + T.T
        return 0.5 * (out + out.T)

    def max_eig(self, scalars, P=None) -> float:
        return float(np.linalg.eigvalsh(self.lmi_value(scalars, P))[-1])


@dataclass
class SolveOptions:
    feastol: float = 1e-8
    reltol: float = 1e-7
    abstol: float = 1e-9
    max_iters: int = 200
    # the LMI is tightened to <= -margin*I so the returned point is feasible, not merely near-feasible
    margin: float = 1e-9
    eig_tol: float = 1e-7
    gap_tol: float = 1e-6


@dataclass
class SdpSolution:
    status: Status
    objective_value: float
    scalar_values: dict[str, float]
    matrix_value: np.ndarray
    max_lmi_eigenvalue: float
    relative_gap: float
    solve_time: float
    iterations: int = 0
    message: str = ""
    certificate: np.ndarray | None = field(default=None, repr=False)

    @property
    def scalars(self) -> np.ndarray:
        return np.array(list(self.scalar_values.values()))


def sym_basis_count(n: int) -> int:
    return n * (n + 1) // 2


def _p_columns(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``vec(U'E V + V'E U)`` for every upper-triangular basis matrix ``E``."""
    n, q = U.shape
    iu, ju = np.triu_indices(n)
    # U'E_ij V with E_ij = e_i e_j' + e_j e_i' (single entry on the diagonal)
    T = np.einsum("ka,kb->kab", U[iu], V[ju])
    off = iu != ju
    T[off] += np.einsum("ka,kb->kab", U[ju[off]], V[iu[off]])
    T += T.transpose(0, 2, 1)
    return T.reshape(len(iu), q * q).T


def _unvech(x: np.ndarray, n: int) -> np.ndarray:
    P = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    P[iu, ju] = x
    P[ju, iu] = x
    return P


def solve(problem: SdpProblem, options: SolveOptions | None = None) -> SdpSolution:
    """Solve ``problem``; infeasibility is reported in the status, never raised."""
    opts = options or SolveOptions()
    t0 = time.perf_counter()
    k = len(problem.scalar_names)
    n = problem.matrix_var_dim
    q = problem.side
    npv = sym_basis_count(n)

    G = np.empty((q * q, k + npv))
    for i, M in enumerate(problem.scalar_coeffs):
        G[:, i] = M.reshape(-1)
    if npv:
        G[:, k:] = _p_columns(problem.p_left, problem.p_right)
    h = -(problem.constant + opts.margin * np.eye(q)).reshape(-1)

    bounded = np.isfinite(problem.lower_bounds)
    Gl = np.zeros((int(bounded.sum()), k + npv))
    Gl[np.arange(Gl.shape[0]), np.flatnonzero(bounded)] = -1.0
    hl = -problem.lower_bounds[bounded]
    c = np.concatenate([problem.objective, np.zeros(npv)])

    cvx_opts = {
        "show_progress": False,
        "feastol": opts.feastol,
        "reltol": opts.reltol,
        "abstol": opts.abstol,
        "maxiters": opts.max_iters,
    }
    kwargs = {}
    if Gl.shape[0]:
        kwargs = {"Gl": cvx_matrix(Gl), "hl": cvx_matrix(hl)}
    try:
        res = cvx_solvers.sdp(cvx_matrix(c), Gs=[cvx_matrix(G)], hs=[cvx_matrix(h.reshape(q, q))],
                              options=cvx_opts, **kwargs)
    except (ArithmeticError, ValueError) as exc:
        return SdpSolution(Status.NUMERICAL_FAILURE, float("nan"), {nm: float("nan") for nm in problem.scalar_names},
                           np.full((n, n), np.nan), float("nan"), float("nan"),
                           time.perf_counter() - t0, message=f"solver error: {exc}")
    elapsed = time.perf_counter() - t0
    raw = res["status"]
    iters = int(res.get("iterations", 0) or 0)

    if raw == "primal infeasible" or (
        raw == "unknown" and res.get("residual as primal infeasibility certificate") is not None
        and res["residual as primal infeasibility certificate"] <= opts.feastol * 10
        and res["x"] is None
    ):
        Z = np.array(res["zs"][0]) if res.get("zs") else None
        return SdpSolution(Status.INFEASIBLE, float("inf"), {nm: float("nan") for nm in problem.scalar_names},
                           np.full((n, n), np.nan), float("nan"), float("nan"), elapsed, iters,
                           message="dual ray Z >= 0 with <Z, M0> > 0 and <Z, M_i> = 0 separates the LMI set",
                           certificate=Z)
    if raw == "dual infeasible":
        return SdpSolution(Status.UNBOUNDED, float("-inf"), {nm: float("nan") for nm in problem.scalar_names},
                           np.full((n, n), np.nan), float("nan"), float("nan"), elapsed, iters,
                           message="objective unbounded below")
    if res["x"] is None:
        return SdpSolution(Status.NUMERICAL_FAILURE, float("nan"), {nm: float("nan") for nm in problem.scalar_names},
                           np.full((n, n), np.nan), float("nan"), float("nan"), elapsed, iters,
                           message=f"solver returned {raw!r} without a point")

    x = np.array(res["x"]).ravel()
    s = np.maximum(x[:k], problem.lower_bounds)
    P = _unvech(x[k:], n)
    lam = problem.max_eig(s, P)
    obj = float(problem.objective @ s)
    pobj = res["primal objective"]
    dobj = res["dual objective"]
    gap = abs(pobj - dobj) if pobj is not None and dobj is not None else float("inf")
    rel_gap = gap / (1.0 + abs(obj))
    ok = lam <= opts.eig_tol and rel_gap <= opts.gap_tol
    status = Status.OPTIMAL if ok else Status.NUMERICAL_FAILURE
    msg = "" if raw == "optimal" else f"solver status {raw!r}"
    if not ok:
        msg = (msg + "; " if msg else "") + f"max eig {lam:.3g}, relative gap {rel_gap:.3g}"
    return SdpSolution(
        status=status,
        objective_value=obj,
        scalar_values={nm: float(v) for nm, v in zip(problem.scalar_names, s)},
        matrix_value=P,
        max_lmi_eigenvalue=lam,
        relative_gap=rel_gap,
        solve_time=elapsed,
        iterations=iters,
        message=msg,
    )
