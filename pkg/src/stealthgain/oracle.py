"""Brute-force frequency-domain cross-checks of the LMI metrics.

For a Hurwitz realization the dissipation LMIs are feasible exactly when
the matching Hermitian frequency-domain inequality holds at every
frequency, infinity included.  This module samples that inequality on a
frequency grid and searches multipliers on logarithmic grids, so it shares
no code path with the SDP solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sysmodel import (
    AggregatedSystem,
    AttackBudget,
    CertainSubsystem,
    StateSpace,
    UncertainSubsystem,
    aggregate,
    freq_response_batch,
)

__all__ = [
    "FrequencyGrid",
    "MultiplierGridSpec",
    "default_grid",
    "oog_feasible_freq",
    "oog_oracle",
    "proxy_feasible_freq",
    "proxy_oracle",
    "hinf_sweep",
]

FEAS_TOL = 1e-9
MULTIPLIER_FLOOR = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Increasing frequencies starting at 0 and ending with ``inf``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("frequency grid needs at least 0 and inf")
        if pts[0] != 0.0 or not np.isinf(pts[-1]):
            raise ValueError("frequency grid must start at 0 and end with inf")
        if np.any(np.diff(pts[:-1]) <= 0) or not np.isfinite(pts[:-1]).all():
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def finite(self) -> np.ndarray:
        return self.points[:-1]


def default_grid(*state_matrices, n_points: int = 2000, lo: float = 1e-3, hi: float = 1e3) -> FrequencyGrid:
    """Log grid plus every ``|Im lambda|`` of the given state matrices, 0 and inf."""
    extra = [np.abs(np.linalg.eigvals(A).imag) for A in state_matrices if np.size(A)]
    pts = np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), n_points), *extra])
    pts = np.unique(pts[pts >= 0])
    return FrequencyGrid(np.append(pts, np.inf))


@dataclass(frozen=True)
class MultiplierGridSpec:
    """Log-spaced multiplier axes plus a local pattern refinement.

    After the coarse scan, each round lays a ``(2*span+1)``-point grid per
    axis around the incumbent, spaced by ``10**step - 1`` relative to it.  The incumbent moves
    whenever the round improves on it; otherwise the step is halved.  This
    follows the thin valleys the feasible boundary forms when one
    multiplier is near zero.
    """

    lo: float = 1e-4
    hi: float = 1e6
    points: int = 60
    span: int = 3
    band: int = 5
    max_rounds: int = 80
    min_step: float = 1e-4  # decades

    def axis(self) -> np.ndarray:
        return np.logspace(np.log10(self.lo), np.log10(self.hi), self.points)

    def local_axis(self, center: float, step: float) -> np.ndarray:
        # linear stencil with relative spacing 10**step - 1, so multipliers can reach ~0
        pts = center * (1.0 + (10.0 ** step - 1.0) * np.arange(-self.span, self.span + 1))
        # jumps toward zero let the search leave a multiplier that should vanish
        drops = center * 10.0 ** -np.array([2.0, 4.0, 8.0])
        band = center * np.logspace(-1.0, 1.0, 2 * self.band + 1)
        return np.unique(np.concatenate([[MULTIPLIER_FLOOR], drops, band, pts[pts > 0]]))


def _refine(evaluate, found, spec: MultiplierGridSpec):
    """Pattern search from the coarse incumbent; ``found = (value, *multipliers)``."""
    step = np.log10(spec.hi / spec.lo) / (spec.points - 1)
    for _ in range(spec.max_rounds):
        if step < spec.min_step:
            break
        cand = evaluate(*(spec.local_axis(v, step) for v in found[1:]))
        if cand is not None and cand[0] < found[0] * (1 - 1e-12):
            found = cand
        else:
            step /= 2
    return found


def _gram(G: np.ndarray) -> np.ndarray:
    """``G^H G`` for a stack of matrices."""
    return np.einsum("kij,kil->kjl", G.conj(), G)


def _max_eig_herm(M: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of each Hermitian matrix in a ``(..., m, m)`` stack."""
    m = M.shape[-1]
    if m == 1:
        return M[..., 0, 0].real
    if m == 2:
        a, d = M[..., 0, 0].real, M[..., 1, 1].real
        b = M[..., 0, 1]
        return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return np.linalg.eigvalsh(M)[..., -1]


def _aggregated_grams(agg: AggregatedSystem, grid: FrequencyGrid):
    Gp = freq_response_batch(agg.performance_system(), grid.points)
    Gr = freq_response_batch(agg.residual_system(), grid.points)
    return _gram(Gp), _gram(Gr)


def _psi_floor(Kp: np.ndarray, Kr: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """``max_w lambda_max(Kp - gamma Kr)`` for each gamma.

    ``psi`` enters as ``-psi I`` so the oog condition reduces exactly to
    ``psi >= floor(gamma)``.
    """
    out = np.empty(gammas.size)
    for i, g in enumerate(gammas):
        out[i] = _max_eig_herm(Kp - g * Kr).max()
    return out


def oog_feasible_freq(agg: AggregatedSystem, gamma: float, psi: float, grid: FrequencyGrid) -> bool:
    Kp, Kr = _aggregated_grams(agg, grid)
    lam = _max_eig_herm(Kp - gamma * Kr - psi * np.eye(Kp.shape[-1]))
    return bool(lam.max() <= FEAS_TOL)


def _pick(values: np.ndarray, feasible: np.ndarray, coords: list[np.ndarray]):
    """Lowest objective among feasible points; ties broken lexicographically on the multipliers."""
    if not feasible.any():
        return None
    v = np.where(feasible, values, np.inf)
    best = v.min()
    idx = np.flatnonzero(v.ravel() == best)
    keyed = sorted(idx, key=lambda j: tuple(c.ravel()[j] for c in coords))
    j = keyed[0]
    return (float(best),) + tuple(float(c.ravel()[j]) for c in coords)


def oog_oracle(sc: CertainSubsystem, su: UncertainSubsystem, budget: AttackBudget,
               grid: FrequencyGrid | None = None, spec: MultiplierGridSpec | None = None) -> float:
    """Grid-search ``min gamma*delta + psi*E`` over frequency-feasible multipliers."""
    agg = aggregate(sc, su)
    grid = grid or default_grid(agg.A_bar)
    spec = spec or MultiplierGridSpec()
    Kp, Kr = _aggregated_grams(agg, grid)

    def evaluate(gammas, psis):
        floor = _psi_floor(Kp, Kr, gammas)
        G, S = np.meshgrid(gammas, psis, indexing="ij")
        feas = S >= floor[:, None] - FEAS_TOL
        return _pick(G * budget.delta + S * budget.energy, feas, [G, S])

    axis = spec.axis()
    found = evaluate(axis, axis)
    if found is None:
        return float("inf")
    return float(_refine(evaluate, found, spec)[0])


def _certain_grams(sc: CertainSubsystem, grid: FrequencyGrid):
    T = freq_response_batch(sc.transfer_system(), grid.points)
    pp, pr = sc.p_p, sc.p_r
    return _gram(T[:, :pp]), _gram(T[:, pp:pp + pr]), _gram(T[:, pp + pr:])


def _proxy_matrix(Kp, Kr, Kc, m_u, gamma_u, gamma, psi, theta):
    m = Kp.shape[-1]
    sel_u = np.zeros((m, m))
    sel_u[:m_u, :m_u] = np.eye(m_u)
    sel_a = np.eye(m) - sel_u
    return Kp + theta * gamma_u * Kc - gamma * Kr - theta * sel_u - psi * sel_a


def proxy_feasible_freq(sc: CertainSubsystem, gamma_u: float, gamma: float, psi: float, theta: float,
                        grid: FrequencyGrid) -> bool:
    Kp, Kr, Kc = _certain_grams(sc, grid)
    lam = _max_eig_herm(_proxy_matrix(Kp, Kr, Kc, sc.m_u, gamma_u, gamma, psi, theta))
    return bool(lam.max() <= FEAS_TOL)


def proxy_oracle(sc: CertainSubsystem, gamma_u: float, budget: AttackBudget,
                 grid: FrequencyGrid | None = None, spec: MultiplierGridSpec | None = None) -> float:
    """Grid-search ``min gamma*delta + psi*E`` over ``(gamma, psi, theta)``.

    Feasibility is monotone in ``psi`` (it enters through ``-psi`` on a PSD
    selector), so along each ``psi`` axis the first feasible index is found
    by bisection; the result equals an exhaustive scan of the same grid.
    """
    grid = grid or default_grid(sc.A_c)
    spec = spec or MultiplierGridSpec()
    Kp, Kr, Kc = _certain_grams(sc, grid)
    m_u = sc.m_u

    def first_feasible(gamma, theta, psis):
        def ok(j):
            lam = _max_eig_herm(_proxy_matrix(Kp, Kr, Kc, m_u, gamma_u, gamma, psis[j], theta))
            return lam.max() <= FEAS_TOL

        if not ok(len(psis) - 1):
            return None
        lo, hi = -1, len(psis) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def evaluate(gammas, psis, thetas):
        best = None
        for g in gammas:
            for t in thetas:
                j = first_feasible(g, t, psis)
                if j is None:
                    continue
                val = g * budget.delta + psis[j] * budget.energy
                key = (val, g, psis[j], t)
                if best is None or key < best:
                    best = key
        return best

    axis = spec.axis()
    found = evaluate(axis, axis, axis)
    if found is None:
        return float("inf")
    return float(_refine(evaluate, found, spec)[0])


def hinf_sweep(plant: StateSpace | UncertainSubsystem, grid: FrequencyGrid | None = None,
               refine_points: int = 401) -> float:
    """Squared peak singular value of the frequency response (the energy-gain bound)."""
    if isinstance(plant, UncertainSubsystem):
        plant = plant.plant
    grid = grid or default_grid(plant.A)

    def peak(omegas):
        H = freq_response_batch(plant, omegas)
        return np.linalg.svd(H, compute_uv=False)[:, 0] ** 2 if H.size else np.zeros(len(omegas))

    vals = peak(grid.points)
    k = int(np.argmax(vals))
    best = float(vals[k])
    finite = grid.finite
    if k < finite.size and finite.size > 1:
        lo = finite[max(k - 1, 0)]
        hi = finite[min(k + 1, finite.size - 1)]
        best = max(best, float(peak(np.linspace(lo, hi, refine_points)).max()))
    return best
