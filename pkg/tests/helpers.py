"""Test systems and small independent reference computations."""

from __future__ import annotations

import numpy as np

from stealthgain.sysmodel import CertainSubsystem, StateSpace, UncertainSubsystem

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE: list[tuple[str, bool, str]] = []


def resonant_plant(zeta: float = 0.1) -> StateSpace:
    """``1 / (s^2 + 2 zeta s + 1)``."""
    return StateSpace([[0.0, 1.0], [-1.0, -2 * zeta]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])


def first_order() -> StateSpace:
    """``1 / (s + 1)``."""
    return StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])


def resonant_peak(zeta: float) -> float:
    return 1.0 / (4 * zeta**2 * (1 - zeta**2))


def small_uncertain() -> UncertainSubsystem:
    return UncertainSubsystem(StateSpace([[-2.0]], [[1.0]], [[1.0]], [[0.0]]))


def feedthrough_only() -> CertainSubsystem:
    """``y_p = a`` and ``y_r = a``; the state is stable and decoupled from both outputs."""
    return CertainSubsystem.from_partial([[-1.0]], m_u=1, m_a=1, p_p=1, p_r=1, p_c=1,
                                         F_x=[[1.0]], F_p=[[1.0]], F_r=[[1.0]])


def residual_free() -> CertainSubsystem:
    """``y_p = a`` with ``y_r = 0``."""
    return CertainSubsystem.from_partial([[-1.0]], m_u=1, m_a=1, p_p=1, p_r=1, p_c=1,
                                         F_x=[[1.0]], F_p=[[1.0]], C_c=[[1.0]], B_c=[[0.5]])


def performance_free() -> CertainSubsystem:
    """``y_p = 0`` while the attack drives the state, the residual and the interconnection."""
    return CertainSubsystem.from_partial([[-1.0]], m_u=1, m_a=1, p_p=1, p_r=1, p_c=1,
                                         B_c=[[0.3]], F_x=[[1.0]], C_r=[[1.0]], F_r=[[0.5]], C_c=[[1.0]])


def simulate_coupled(sc: CertainSubsystem, su: UncertainSubsystem, a: np.ndarray, dt: float) -> np.ndarray:
    """RK4 of the two subsystems side by side, exchanging ``u_c`` and ``u_u`` at every stage.

    Needs ``D_c = D_u = 0`` so the interconnection signals depend on states only.
    The attack is linearly interpolated between samples.  Returns ``y_p``.
    """
    assert not sc.D_c.any() and not su.D_u.any()
    a = np.asarray(a, dtype=float).reshape(len(a), -1)

    def rhs(xc, xu, ak):
        uu = su.C_u @ xu
        uc = sc.C_c @ xc + sc.F_c @ ak
        return sc.A_c @ xc + sc.B_c @ uu + sc.F_x @ ak, su.A_u @ xu + su.B_u @ uc

    def yp(xc, xu, ak):
        return sc.C_p @ xc + sc.D_p @ (su.C_u @ xu) + sc.F_p @ ak

    xc, xu = np.zeros(sc.n_states), np.zeros(su.n_states)
    out = np.empty((len(a), sc.p_p))
    out[0] = yp(xc, xu, a[0])
    for k in range(len(a) - 1):
        a0, a1 = a[k], a[k + 1]
        am = 0.5 * (a0 + a1)
        k1 = rhs(xc, xu, a0)
        k2 = rhs(xc + 0.5 * dt * k1[0], xu + 0.5 * dt * k1[1], am)
        k3 = rhs(xc + 0.5 * dt * k2[0], xu + 0.5 * dt * k2[1], am)
        k4 = rhs(xc + dt * k3[0], xu + dt * k3[1], a1)
        xc = xc + dt * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
        xu = xu + dt * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
        out[k + 1] = yp(xc, xu, a1)
    return out
