"""Worst-case stealthy-attack impact metrics.

``solve_oog`` needs both subsystem models and returns the exact metric;
``solve_proxy`` replaces the uncertain subsystem by an energy-gain bound
and returns an upper bound on it; ``gamma_u_model`` computes that bound
(the squared H-infinity norm) when a model happens to be available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sdp import SdpProblem, SdpSolution, SolveOptions, Status, solve
from .sysmodel import (
    AggregatedSystem,
    AttackBudget,
    CertainSubsystem,
    StabilityError,
    UncertainSubsystem,
    WellPosednessError,
    aggregate,
    is_hurwitz,
    well_posed,
)

__all__ = [
    "EPS",
    "MetricResult",
    "UpperBoundReport",
    "build_oog_lmi",
    "build_proxy_lmi",
    "build_gamma_u_lmi",
    "solve_oog",
    "solve_proxy",
    "gamma_u_model",
    "verify_upper_bound",
]

# strict positivity of the multipliers, realized as a lower bound
EPS = 1e-9

UNBOUNDED = "Unbounded"


@dataclass
class MetricResult:
    """Outcome of one metric computation.

    ``value`` is ``inf`` and ``status`` is ``"Unbounded"`` when the dual
    program is infeasible; ``solver_status`` keeps the raw solver verdict.
    """

    value: float
    gamma: float
    psi: float | None
    theta: float | None
    certificate: np.ndarray
    status: str
    solve_time: float
    solver_status: str = ""
    max_lmi_eigenvalue: float = float("nan")
    message: str = ""
    problem: SdpProblem | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL.value

    @property
    def unbounded(self) -> bool:
        return self.status == UNBOUNDED

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            x = float(x)
            return x if np.isfinite(x) else ("inf" if x > 0 else "nan" if np.isnan(x) else "-inf")

        return {
            "value": num(self.value),
            "gamma": num(self.gamma),
            "psi": num(self.psi),
            "theta": num(self.theta),
            "status": self.status,
            "solver_status": self.solver_status,
            "max_lmi_eigenvalue": num(self.max_lmi_eigenvalue),
            "certificate": np.asarray(self.certificate).tolist(),
        }


def _outer(*blocks) -> np.ndarray:
    M = np.hstack(blocks)
    return M.T @ M


def _selector(sizes: list[int], which: int) -> np.ndarray:
    """``blkdiag(0, .., I, .., 0)`` with the identity on block ``which``."""
    q = sum(sizes)
    out = np.zeros((q, q))
    start = sum(sizes[:which])
    out[start:start + sizes[which], start:start + sizes[which]] = np.eye(sizes[which])
    return out


def build_oog_lmi(agg: AggregatedSystem, budget: AttackBudget | None = None) -> SdpProblem:
    """Dissipation LMI over the aggregated state ``(x_c, x_u)`` and the attack.

    ``[[A'P + PA, PF], [F'P, 0]] - gamma Mr'Mr - psi blkdiag(0, I) + Mp'Mp <= 0``
    with ``Mr = [Cr, Fr]`` and ``Mp = [Cp, Fp]``.
    """
    if not is_hurwitz(agg.A_bar):
        raise StabilityError("aggregated closed loop A_bar is not Hurwitz")
    n, m = agg.n_states, agg.m_a
    budget = budget or AttackBudget(1.0, 1.0)
    return SdpProblem(
        scalar_names=("gamma", "psi"),
        objective=np.array([budget.delta, budget.energy]),
        lower_bounds=np.array([EPS, EPS]),
        constant=_outer(agg.Cp_bar, agg.Fp_bar),
        scalar_coeffs=(-_outer(agg.Cr_bar, agg.Fr_bar), -_selector([n, m], 1)),
        p_left=np.hstack([np.eye(n), np.zeros((n, m))]),
        p_right=np.hstack([agg.A_bar, agg.F_bar]),
    )


def build_proxy_lmi(sc: CertainSubsystem, gamma_u: float, budget: AttackBudget | None = None) -> SdpProblem:
    """Dissipation LMI over ``(x_c, u_u, a)`` with the gain bound on ``u_u``.

    The uncertain subsystem enters only through ``theta (gamma_u |u_c|^2 - |u_u|^2)``.
    """
    if gamma_u < 0 or not np.isfinite(gamma_u):
        raise ValueError(f"gamma_u: must be finite and nonnegative, got {gamma_u}")
    if not is_hurwitz(sc.A_c):
        raise StabilityError("A_c is not Hurwitz")
    n, mu, ma = sc.n_states, sc.m_u, sc.m_a
    sizes = [n, mu, ma]
    budget = budget or AttackBudget(1.0, 1.0)
    theta_coeff = -_selector(sizes, 1) + gamma_u * _outer(sc.C_c, sc.D_c, sc.F_c)
    return SdpProblem(
        scalar_names=("gamma", "psi", "theta"),
        objective=np.array([budget.delta, budget.energy, 0.0]),
        lower_bounds=np.array([EPS, EPS, EPS]),
        constant=_outer(sc.C_p, sc.D_p, sc.F_p),
        scalar_coeffs=(-_outer(sc.C_r, sc.D_r, sc.F_r), -_selector(sizes, 2), theta_coeff),
        p_left=np.hstack([np.eye(n), np.zeros((n, mu + ma))]),
        p_right=np.hstack([sc.A_c, sc.B_c, sc.F_x]),
    )


def build_gamma_u_lmi(su: UncertainSubsystem) -> SdpProblem:
    """Bounded-real LMI ``[[A'P + PA, PB], [B'P, -g I]] + [C, D]'[C, D] <= 0``."""
    if not is_hurwitz(su.A_u):
        raise StabilityError("A_u is not Hurwitz")
    n, m = su.n_states, su.plant.n_inputs
    return SdpProblem(
        scalar_names=("gamma_u",),
        objective=np.array([1.0]),
        lower_bounds=np.array([EPS]),
        constant=_outer(su.C_u, su.D_u),
        scalar_coeffs=(-_selector([n, m], 1),),
        p_left=np.hstack([np.eye(n), np.zeros((n, m))]),
        p_right=np.hstack([su.A_u, su.B_u]),
    )


def _to_result(sol: SdpSolution, problem: SdpProblem, kind: str) -> MetricResult:
    raw = sol.status.value
    if sol.status is Status.INFEASIBLE:
        status, value = UNBOUNDED, float("inf")
    elif sol.status is Status.OPTIMAL:
        status, value = raw, sol.objective_value
    else:
        status, value = raw, float("nan")
    sv = sol.scalar_values
    if kind == "gamma_u":
        gamma, psi, theta = sv["gamma_u"], None, None
    else:
        gamma, psi, theta = sv["gamma"], sv["psi"], sv.get("theta")
    return MetricResult(
        value=value,
        gamma=gamma,
        psi=psi,
        theta=theta,
        certificate=sol.matrix_value,
        status=status,
        solve_time=sol.solve_time,
        solver_status=raw,
        max_lmi_eigenvalue=sol.max_lmi_eigenvalue,
        message=sol.message,
        problem=problem,
    )


def solve_oog(sc: CertainSubsystem, su: UncertainSubsystem, budget: AttackBudget,
              options: SolveOptions | None = None) -> MetricResult:
    """Exact worst-case impact with both subsystem models known."""
    if not well_posed(sc, su):
        raise WellPosednessError("the interconnection is ill-posed")
    agg = aggregate(sc, su)
    problem = build_oog_lmi(agg, budget)
    return _to_result(solve(problem, options), problem, "oog")


def solve_proxy(sc: CertainSubsystem, gamma_u: float, budget: AttackBudget,
                options: SolveOptions | None = None) -> MetricResult:
    """Worst-case impact over every uncertain subsystem with energy gain at most ``gamma_u``."""
    problem = build_proxy_lmi(sc, gamma_u, budget)
    return _to_result(solve(problem, options), problem, "proxy")


def gamma_u_model(su: UncertainSubsystem, options: SolveOptions | None = None) -> MetricResult:
    problem = build_gamma_u_lmi(su)
    return _to_result(solve(problem, options), problem, "gamma_u")


@dataclass
class UpperBoundReport:
    Q: float
    Q_hat: float
    gap: float
    holds: bool
    gamma_u: float
    status_full: str
    status_proxy: str
    message: str = ""

    def to_dict(self) -> dict:
        def num(x):
            return x if np.isfinite(x) else str(x)

        return {"Q": num(self.Q), "Q_hat": num(self.Q_hat), "gap": num(self.gap), "holds": self.holds,
                "gamma_u": num(self.gamma_u), "status_full": self.status_full,
                "status_proxy": self.status_proxy, "message": self.message}


def verify_upper_bound(sc: CertainSubsystem, su: UncertainSubsystem, budget: AttackBudget,
                       gamma_u: float | None = None, options: SolveOptions | None = None) -> UpperBoundReport:
    """Compare the exact metric against its proxy; failures are recorded, not raised."""
    try:
        if gamma_u is None:
            g = gamma_u_model(su, options)
            if not g.optimal:
                return UpperBoundReport(float("nan"), float("nan"), float("nan"), False, float("nan"),
                                        "", "", f"gamma_u solve failed: {g.status}")
            gamma_u = g.value
        full = solve_oog(sc, su, budget, options)
        proxy = solve_proxy(sc, gamma_u, budget, options)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return UpperBoundReport(float("nan"), float("nan"), float("nan"), False,
                                float("nan") if gamma_u is None else gamma_u, "", "", str(exc))
    Q, Qh = full.value, proxy.value
    if proxy.unbounded:
        holds, gap = True, float("inf")
    elif full.optimal and proxy.optimal:
        holds = Q <= Qh * (1 + 1e-6) + 1e-9
        gap = (Qh - Q) / max(Q, 1e-12)
    else:
        holds, gap = False, float("nan")
    return UpperBoundReport(Q, Qh, gap, bool(holds), gamma_u, full.status, proxy.status)
