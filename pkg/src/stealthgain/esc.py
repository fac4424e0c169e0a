"""LTI simulation and extremum-seeking estimation of an energy gain.

The estimator only probes the plant: it feeds ``u_c`` in and reads
``u_u`` out through :class:`PlantProbe`, never touching the realization.
The probe frequency is steered by a sinusoidal dither, a high-pass filter
on the running energy ratio and a demodulating low-pass filter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .sysmodel import StabilityError, StateSpace, is_hurwitz

__all__ = ["rk4_step_matrices", "simulate_lti", "PlantProbe", "EscParams", "EscTrace", "es_run"]


def rk4_step_matrices(A: np.ndarray, B: np.ndarray, dt: float):
    """Matrices of one classic RK4 step for ``x' = Ax + Bu``.

    With ``u`` linear over the step (``u0`` at the start, ``um`` at the
    midpoint, ``u1`` at the end) the step is
    ``x+ = Phi x + G0 u0 + Gm um + G1 u1``.
    """
    hA = dt * A
    hB = dt * B
    hA2 = hA @ hA
    Phi = np.eye(A.shape[0]) + hA + hA2 / 2 + hA2 @ hA / 6 + hA2 @ hA2 / 24
    # stages k1 = hA x + hB u0, k2 = hA(x + k1/2) + hB um, k3 = hA(x + k2/2) + hB um,
    # k4 = hA(x + k3) + hB u1, tracked for one nonzero input sample at a time
    half = hA / 2
    k1_0 = hB
    k2_0 = half @ k1_0
    k3_0 = half @ k2_0
    k4_0 = hA @ k3_0
    G0 = (k1_0 + 2 * k2_0 + 2 * k3_0 + k4_0) / 6
    k2_m = hB
    k3_m = half @ k2_m + hB
    k4_m = hA @ k3_m
    Gm = (2 * k2_m + 2 * k3_m + k4_m) / 6
    G1 = hB / 6
    return Phi, G0, Gm, G1


def simulate_lti(plant: StateSpace, u, dt: float) -> np.ndarray:
    """Fixed-step RK4 response from ``x(0) = 0``.

    ``u`` has one row per sample (or is 1-D for single-input plants); the
    input is linearly interpolated between samples.  Returns outputs at the
    sample instants, shaped like ``u``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    flat = u.ndim == 1
    U = u.reshape(len(u), -1)
    if U.shape[1] != plant.n_inputs:
        raise ValueError(f"input has {U.shape[1]} channels, plant expects {plant.n_inputs}")
    Y = U @ plant.D.T
    n = plant.n_states
    if n:
        Phi, G0, Gm, G1 = rk4_step_matrices(plant.A, plant.B, dt)
        x = np.zeros(n)
        X = np.empty((len(U), n))
        X[0] = x
        for k in range(len(U) - 1):
            um = 0.5 * (U[k] + U[k + 1])
            x = Phi @ x + G0 @ U[k] + Gm @ um + G1 @ U[k + 1]
            X[k + 1] = x
        Y = Y + X @ plant.C.T
    if flat and plant.n_outputs == 1:
        return Y[:, 0]
    return Y


class PlantProbe:
    """Opaque single-input single-output plant: push input samples, read output samples."""

    def __init__(self, plant: StateSpace, dt: float):
        if plant.n_inputs != 1 or plant.n_outputs != 1:
            raise ValueError("extremum seeking needs a single-input single-output plant")
        self._n = plant.n_states
        self._d = float(plant.D[0, 0])
        if self._n:
            Phi, G0, Gm, G1 = rk4_step_matrices(plant.A, plant.B, dt)
            self._phi = Phi
            self._g = np.column_stack([G0[:, 0], Gm[:, 0], G1[:, 0]])
            self._c = plant.C[0].copy()
        self._x = np.zeros(self._n)

    def output(self, u: float) -> float:
        return float(self._c @ self._x) + self._d * u if self._n else self._d * u

    def advance(self, u0: float, um: float, u1: float) -> float:
        """Advance one step with the input at start, middle and end; return the new output."""
        if self._n:
            self._x = self._phi @ self._x + self._g @ (u0, um, u1)
        return self.output(u1)


@dataclass
class EscParams:
    """Extremum-seeking settings.

    The defaults target lightly damped plants with resonances near 1
    rad/time.  The dither is slower than the resonance envelope
    (``omega_p`` well below the modal decay rate) so the plant answers it
    quasi-statically, the low-pass cutoff sits an order below ``omega_p`` to
    reject the ripple that the growing cumulative ratio leaves after the
    high-pass, and the long horizon dilutes the pre-convergence part of the
    cumulative energy ratio.
    """

    omega_base: float = 0.7
    alpha_p: float = 0.02
    omega_p: float = 0.02
    phi_p: float = 0.0
    omega_h: float = 0.05
    omega_l: float = 0.002
    k_gain: float = 2.0
    dt: float = 0.04
    horizon: float = 60000.0
    warmup: float = 1000.0
    denom_guard: float = 1e-9
    # "integrated": u_c = sin(int_0^t omega_u); "literal": u_c = sin(t * omega_u(t))
    phase: str = "integrated"
    # None for the cumulative energy ratio, else the forgetting time constant
    window: float | None = None

    def validate(self) -> None:
        for f in ("omega_base", "alpha_p", "omega_p", "omega_h", "omega_l", "dt", "horizon", "denom_guard"):
            v = getattr(self, f)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{f}: must be positive, got {v}")
        if self.k_gain < 0:
            raise ValueError(f"k_gain: must be nonnegative, got {self.k_gain}")
        if self.warmup < 0:
            raise ValueError(f"warmup: must be nonnegative, got {self.warmup}")
        fastest = max(4 * self.omega_base, self.omega_p)
        if not self.dt < 2 * math.pi / (50 * fastest):
            raise ValueError(f"dt: {self.dt} gives fewer than 50 steps per period of {fastest:g} rad/time")
        if self.warmup < 5 * 2 * math.pi / self.omega_base:
            raise ValueError(f"warmup: {self.warmup} is shorter than 5 base periods")
        if self.phase not in ("integrated", "literal"):
            raise ValueError(f"phase: expected 'integrated' or 'literal', got {self.phase!r}")
        if self.window is not None and not self.window > 0:
            raise ValueError(f"window: must be positive or null, got {self.window}")

    @classmethod
    def from_dict(cls, doc: dict) -> "EscParams":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown ES parameters: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = ("t", "omega_u", "gamma_tilde", "eta", "xi", "zeta", "u_c", "u_u", "E_uc", "E_uu")


@dataclass
class EscTrace:
    t: np.ndarray
    omega_u: np.ndarray
    gamma_tilde: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    u_c: np.ndarray
    u_u: np.ndarray
    E_uc: np.ndarray
    E_uu: np.ndarray

    @property
    def final_estimate(self) -> float:
        return float(self.gamma_tilde[-1])

    @property
    def final_frequency(self) -> float:
        return float(self.omega_u[-1])

    def to_csv(self, path: str | Path, every: int = 1) -> None:
        cols = [getattr(self, c)[::every] for c in CSV_COLUMNS]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in zip(*cols):
                w.writerow([f"{v:.10g}" for v in row])


def es_run(plant: StateSpace, params: EscParams | None = None) -> EscTrace:
    """Run the extremum-seeking estimator against ``plant`` over ``[0, horizon]``."""
    p = params or EscParams()
    p.validate()
    if not is_hurwitz(plant.A):
        raise StabilityError("plant must be Hurwitz")
    probe = PlantProbe(plant, p.dt)
    h = p.dt
    steps = int(round(p.horizon / h))
    t_arr = np.arange(steps + 1) * h

    rec = {c: np.empty(steps + 1) for c in CSV_COLUMNS}
    rec["t"] = t_arr

    a_p, w_p, ph_p = p.alpha_p, p.omega_p, p.phi_p
    w_h, w_l, k = p.omega_h, p.omega_l, p.k_gain
    guard = p.denom_guard
    literal = p.phase == "literal"
    decay = math.exp(-h / p.window) if p.window else 1.0

    def chi(t):
        return a_p * math.sin(w_p * t + ph_p)

    eta = xi = zeta = 0.0
    E_c = E_u = 0.0
    phase = 0.0
    w0 = p.omega_base + chi(0.0)
    uc = math.sin(0.0 * w0) if literal else math.sin(phase)
    uu = probe.output(uc)
    g = 0.0

    def store(i, t, w, g):
        rec["omega_u"][i] = w
        rec["gamma_tilde"][i] = g
        rec["eta"][i] = eta
        rec["xi"][i] = xi
        rec["zeta"][i] = zeta
        rec["u_c"][i] = uc
        rec["u_u"][i] = uu
        rec["E_uc"][i] = E_c
        rec["E_uu"][i] = E_u

    store(0, 0.0, w0, g)
    for i in range(steps):
        t = t_arr[i]
        tm, t1 = t + 0.5 * h, t + h
        # the seeking state is held over one plant step
        wm = p.omega_base + chi(tm) + zeta
        w1 = p.omega_base + chi(t1) + zeta
        w0 = p.omega_base + chi(t) + zeta
        if literal:
            um, u1 = math.sin(tm * wm), math.sin(t1 * w1)
        else:
            um = math.sin(phase + h * (5 * w0 + 8 * wm - w1) / 24)
            phase += h * (w0 + 4 * wm + w1) / 6
            u1 = math.sin(phase)
        uu1 = probe.advance(uc, um, u1)
        # trapezoidal energies, optionally discounted
        E_c = decay * E_c + 0.5 * h * (decay * uc * uc + u1 * u1)
        E_u = decay * E_u + 0.5 * h * (decay * uu * uu + uu1 * uu1)
        g1 = E_u / max(E_c, guard)

        # RK4 on (eta, xi, zeta) with gamma_tilde linear over the step
        adapt = k if t1 > p.warmup else 0.0
        gm = 0.5 * (g + g1)

        def f(e, x, gt, c):
            return w_h * (gt - e), w_l * ((gt - e) * c - x), adapt * x

        c0, cm, c1 = chi(t), chi(tm), chi(t1)
        a1 = f(eta, xi, g, c0)
        a2 = f(eta + 0.5 * h * a1[0], xi + 0.5 * h * a1[1], gm, cm)
        a3 = f(eta + 0.5 * h * a2[0], xi + 0.5 * h * a2[1], gm, cm)
        a4 = f(eta + h * a3[0], xi + h * a3[1], g1, c1)
        eta += h * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0]) / 6
        xi += h * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1]) / 6
        zeta += h * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2]) / 6

        uc, uu, g = u1, uu1, g1
        store(i + 1, t1, p.omega_base + c1 + zeta, g)

    return EscTrace(**rec)
