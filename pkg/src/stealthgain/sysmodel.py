"""State-space data model for the certain/uncertain interconnection.

The certain subsystem is driven by the uncertain subsystem output ``u_u``
and the attack ``a``; it emits the performance output ``y_p``, the
detector residual ``y_r`` and the interconnection signal ``u_c`` fed back
into the uncertain subsystem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DimensionError",
    "WellPosednessError",
    "StabilityError",
    "StateSpace",
    "CertainSubsystem",
    "UncertainSubsystem",
    "AggregatedSystem",
    "AttackBudget",
    "well_posed",
    "loop_matrix",
    "aggregate",
    "is_hurwitz",
    "freq_response",
    "freq_response_batch",
    "random_stable_matrix",
    "random_pair",
    "load_system",
    "dump_system",
    "system_to_dict",
    "system_from_dict",
]

RCOND_MIN = 1e-12
HURWITZ_MARGIN = -1e-9


class DimensionError(ValueError):
    """Matrix shapes do not fit together."""


class WellPosednessError(ValueError):
    """The algebraic loop between the two subsystems is singular."""


class StabilityError(ValueError):
    """A state matrix required to be Hurwitz is not."""


def _as_matrix(value, name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # a flat list is read as a single row
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D matrix, got {arr.ndim}-D")
    if arr.size == 0:
        r = rows if rows is not None else arr.shape[0]
        c = cols if cols is not None else arr.shape[1]
        arr = np.zeros((r, c))
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name}: expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name}: expected {cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


def _shape(value) -> tuple[int, int]:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return (1, 1)
    if arr.ndim == 1:
        return (1, arr.size) if arr.size else (0, 0)
    return arr.shape[0], arr.shape[1]


@dataclass(frozen=True)
class StateSpace:
    """Continuous-time LTI realization ``x' = Ax + Bu, y = Cx + Du``.

    ``n = 0`` is allowed and describes the static map ``y = D u``; in that
    case leave ``A``, ``B``, ``C`` as ``None``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __init__(self, A=None, B=None, C=None, D=None):
        A_ = np.zeros((0, 0)) if A is None else np.array(A, dtype=float)
        if A_.ndim == 0:
            A_ = A_.reshape(1, 1)
        n = A_.shape[0] if A_.size else 0
        if D is None:
            raise DimensionError("D: feedthrough matrix is required")
        D_ = _as_matrix(D, "D")
        p, m = D_.shape
        object.__setattr__(self, "A", _as_matrix(A_, "A", n, n))
        object.__setattr__(self, "B", _as_matrix(np.zeros((n, m)) if B is None else B, "B", n, m))
        object.__setattr__(self, "C", _as_matrix(np.zeros((p, n)) if C is None else C, "C", p, n))
        object.__setattr__(self, "D", D_)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @classmethod
    def static(cls, gain) -> "StateSpace":
        return cls(D=gain)


_CERTAIN_KEYS = ("A_c", "B_c", "F_x", "C_p", "D_p", "F_p", "C_r", "D_r", "F_r", "C_c", "D_c", "F_c")
_UNCERTAIN_KEYS = ("A_u", "B_u", "C_u", "D_u")


@dataclass(frozen=True)
class CertainSubsystem:
    """The fully modelled subsystem.

    ::

        x_c' = A_c x_c + B_c u_u + F_x a
        y_p  = C_p x_c + D_p u_u + F_p a
        y_r  = C_r x_c + D_r u_u + F_r a
        u_c  = C_c x_c + D_c u_u + F_c a
    """

    A_c: np.ndarray
    B_c: np.ndarray
    F_x: np.ndarray
    C_p: np.ndarray
    D_p: np.ndarray
    F_p: np.ndarray
    C_r: np.ndarray
    D_r: np.ndarray
    F_r: np.ndarray
    C_c: np.ndarray
    D_c: np.ndarray
    F_c: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A_c, "A_c")
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError(f"A_c: must be square, got {A.shape}")
        object.__setattr__(self, "A_c", A)
        # with n_c = 0 the channel widths are only visible in the feedthroughs
        m_u = _shape(self.B_c)[1] if n else _shape(self.D_p)[1]
        m_a = _shape(self.F_x)[1] if n else _shape(self.F_p)[1]
        object.__setattr__(self, "B_c", _as_matrix(self.B_c, "B_c", n, m_u))
        object.__setattr__(self, "F_x", _as_matrix(self.F_x, "F_x", n, m_a))
        for tag in ("p", "r", "c"):
            C = getattr(self, f"C_{tag}")
            p = _shape(C)[0] if n else _shape(getattr(self, f"D_{tag}"))[0]
            object.__setattr__(self, f"C_{tag}", _as_matrix(C, f"C_{tag}", p, n))
            object.__setattr__(self, f"D_{tag}", _as_matrix(getattr(self, f"D_{tag}"), f"D_{tag}", p, m_u))
            object.__setattr__(self, f"F_{tag}", _as_matrix(getattr(self, f"F_{tag}"), f"F_{tag}", p, m_a))
        if m_a == 0:
            raise DimensionError("F_x: the attack channel must have at least one input")

    @property
    def n_states(self) -> int:
        return self.A_c.shape[0]

    @property
    def m_u(self) -> int:
        return self.B_c.shape[1]

    @property
    def m_a(self) -> int:
        return self.F_x.shape[1]

    @property
    def p_p(self) -> int:
        return self.C_p.shape[0]

    @property
    def p_r(self) -> int:
        return self.C_r.shape[0]

    @property
    def p_c(self) -> int:
        return self.C_c.shape[0]

    def transfer_system(self) -> StateSpace:
        """Realization from stacked ``(u_u, a)`` to stacked ``(y_p, y_r, u_c)``."""
        return StateSpace(
            self.A_c,
            np.hstack([self.B_c, self.F_x]),
            np.vstack([self.C_p, self.C_r, self.C_c]),
            np.block([[self.D_p, self.F_p], [self.D_r, self.F_r], [self.D_c, self.F_c]]),
        )

    @classmethod
    def from_partial(cls, A_c, *, m_u: int, m_a: int, p_p: int, p_r: int, p_c: int, **mats) -> "CertainSubsystem":
        """Build from the matrices that are given, zero-filling the rest."""
        A = np.asarray(A_c, dtype=float)
        n = int(np.sqrt(A.size))
        shapes = {"A_c": (n, n), "B_c": (n, m_u), "F_x": (n, m_a)}
        for t, p in (("p", p_p), ("r", p_r), ("c", p_c)):
            shapes.update({f"C_{t}": (p, n), f"D_{t}": (p, m_u), f"F_{t}": (p, m_a)})
        mats["A_c"] = A
        unknown = set(mats) - set(shapes)
        if unknown:
            raise TypeError(f"unknown matrices {sorted(unknown)}")
        return cls(**{k: np.zeros(shp) if mats.get(k) is None else np.asarray(mats[k], dtype=float).reshape(shp)
                      for k, shp in shapes.items()})

    def replace(self, **changes) -> "CertainSubsystem":
        data = {k: getattr(self, k) for k in _CERTAIN_KEYS}
        data.update(changes)
        return CertainSubsystem(**data)


@dataclass(frozen=True)
class UncertainSubsystem:
    """Subsystem mapping ``u_c`` to ``u_u``; only its I/O data is observable in practice."""

    plant: StateSpace

    @property
    def n_states(self) -> int:
        return self.plant.n_states

    @property
    def A_u(self) -> np.ndarray:
        return self.plant.A

    @property
    def B_u(self) -> np.ndarray:
        return self.plant.B

    @property
    def C_u(self) -> np.ndarray:
        return self.plant.C

    @property
    def D_u(self) -> np.ndarray:
        return self.plant.D


@dataclass(frozen=True)
class AggregatedSystem:
    """Closed loop of the two subsystems seen from the attack input.

    The state is ``(x_c, x_u)``; ``D_bar`` is the inverse of the algebraic
    loop matrix acting on the stacked interconnection signals ``(u_c, u_u)``.
    """

    A_bar: np.ndarray
    F_bar: np.ndarray
    Cr_bar: np.ndarray
    Fr_bar: np.ndarray
    Cp_bar: np.ndarray
    Fp_bar: np.ndarray
    D_bar: np.ndarray

    @property
    def n_states(self) -> int:
        return self.A_bar.shape[0]

    @property
    def m_a(self) -> int:
        return self.F_bar.shape[1]

    def performance_system(self) -> StateSpace:
        return StateSpace(self.A_bar, self.F_bar, self.Cp_bar, self.Fp_bar)

    def residual_system(self) -> StateSpace:
        return StateSpace(self.A_bar, self.F_bar, self.Cr_bar, self.Fr_bar)


@dataclass(frozen=True)
class AttackBudget:
    """Alarm threshold on residual energy and bound on attack energy."""

    delta: float
    energy: float

    def __post_init__(self):
        for name in ("delta", "energy"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"budget.{name}: must be a positive finite number, got {v}")
            object.__setattr__(self, name, v)


def _check_pair(sc: CertainSubsystem, su: UncertainSubsystem) -> None:
    if su.plant.n_inputs != sc.p_c:
        raise DimensionError(
            f"uncertain subsystem has {su.plant.n_inputs} inputs but u_c has dimension {sc.p_c}")
    if su.plant.n_outputs != sc.m_u:
        raise DimensionError(
            f"uncertain subsystem has {su.plant.n_outputs} outputs but u_u has dimension {sc.m_u}")


def loop_matrix(sc: CertainSubsystem, su: UncertainSubsystem) -> np.ndarray:
    """``I - [[0, D_c], [D_u, 0]]`` on the stacked signals ``(u_c, u_u)``."""
    _check_pair(sc, su)
    p_c, m_u = sc.p_c, sc.m_u
    K = np.zeros((p_c + m_u, p_c + m_u))
    K[:p_c, p_c:] = sc.D_c
    K[p_c:, :p_c] = su.D_u
    return np.eye(p_c + m_u) - K


def well_posed(sc: CertainSubsystem, su: UncertainSubsystem) -> bool:
    """True iff the algebraic loop has a well-conditioned inverse."""
    L = loop_matrix(sc, su)
    if L.size == 0:
        return True
    return 1.0 / np.linalg.cond(L, 1) > RCOND_MIN


def aggregate(sc: CertainSubsystem, su: UncertainSubsystem) -> AggregatedSystem:
    """Close the loop between the subsystems, leaving the attack as the only input."""
    if not well_posed(sc, su):
        raise WellPosednessError("I - [[0, D_c], [D_u, 0]] is singular; the interconnection is ill-posed")
    L = loop_matrix(sc, su)
    D_bar = np.linalg.solve(L, np.eye(L.shape[0]))
    n_c, n_u = sc.n_states, su.n_states
    p_c, m_u = sc.p_c, sc.m_u

    Bx = np.zeros((n_c + n_u, p_c + m_u))
    Bx[:n_c, p_c:] = sc.B_c
    Bx[n_c:, :p_c] = su.B_u
    Cx = np.zeros((p_c + m_u, n_c + n_u))
    Cx[:p_c, :n_c] = sc.C_c
    Cx[p_c:, n_c:] = su.C_u
    Fa = np.vstack([sc.F_c, np.zeros((m_u, sc.m_a))])

    A0 = np.zeros((n_c + n_u, n_c + n_u))
    A0[:n_c, :n_c] = sc.A_c
    A0[n_c:, n_c:] = su.A_u
    F0 = np.vstack([sc.F_x, np.zeros((n_u, sc.m_a))])

    # signals (u_c, u_u) = D_bar (Cx x + Fa a)
    sig_x = D_bar @ Cx
    sig_a = D_bar @ Fa

    def out(C, D, F):
        Cw = np.zeros((C.shape[0], p_c + m_u))
        Cw[:, p_c:] = D
        return np.hstack([C, np.zeros((C.shape[0], n_u))]) + Cw @ sig_x, F + Cw @ sig_a

    Cr_bar, Fr_bar = out(sc.C_r, sc.D_r, sc.F_r)
    Cp_bar, Fp_bar = out(sc.C_p, sc.D_p, sc.F_p)
    return AggregatedSystem(
        A_bar=A0 + Bx @ sig_x,
        F_bar=F0 + Bx @ sig_a,
        Cr_bar=Cr_bar,
        Fr_bar=Fr_bar,
        Cp_bar=Cp_bar,
        Fp_bar=Fp_bar,
        D_bar=D_bar,
    )


def is_hurwitz(A) -> bool:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return True
    return bool(np.all(np.linalg.eigvals(A).real < HURWITZ_MARGIN))


def freq_response(sys: StateSpace, omega: float) -> np.ndarray:
    """``C (j omega I - A)^{-1} B + D``; ``omega = inf`` gives ``D``."""
    return freq_response_batch(sys, np.array([omega]))[0]


def freq_response_batch(sys: StateSpace, omegas) -> np.ndarray:
    """Frequency response at many points, shape ``(len(omegas), p, m)``."""
    omegas = np.asarray(omegas, dtype=float).ravel()
    p, m, n = sys.n_outputs, sys.n_inputs, sys.n_states
    out = np.empty((omegas.size, p, m), dtype=complex)
    out[:] = sys.D
    finite = np.isfinite(omegas)
    if n == 0 or not finite.any():
        return out
    w = omegas[finite]
    # batched resolvent solve; eigendecomposition is avoided so defective A is fine
    M = 1j * w[:, None, None] * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (w.size, n, m)))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular resolvent: A has an eigenvalue on the imaginary axis") from exc
    out[finite] += sys.C @ X
    return out


def random_stable_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    M = rng.standard_normal((n, n))
    if n == 0:
        return M
    return M - (np.linalg.norm(M, 2) + 0.5) * np.eye(n)


def random_pair(
    rng: np.random.Generator,
    n_c: int = 3,
    n_u: int = 2,
    m_u: int = 1,
    m_a: int = 1,
    p_p: int = 1,
    p_r: int = 1,
    p_c: int = 1,
    feedthrough: bool = True,
    require_stable_loop: bool = True,
    max_tries: int = 200,
) -> tuple[CertainSubsystem, UncertainSubsystem]:
    """Draw a random interconnected pair with Hurwitz subsystems.

    State matrices are ``M - (||M|| + 0.5) I`` with ``M`` standard normal;
    everything else is standard normal scaled by ``1/sqrt(dim)``.  Draws are
    repeated until the pair is well posed and (optionally) the closed loop
    is Hurwitz.
    """
    for _ in range(max_tries):
        def g(r, c):
            return rng.standard_normal((r, c)) / np.sqrt(max(r, c, 1))

        def d(r, c):
            return g(r, c) if feedthrough else np.zeros((r, c))

        sc = CertainSubsystem(
            random_stable_matrix(n_c, rng), g(n_c, m_u), g(n_c, m_a),
            g(p_p, n_c), d(p_p, m_u), d(p_p, m_a),
            g(p_r, n_c), d(p_r, m_u), d(p_r, m_a),
            g(p_c, n_c), d(p_c, m_u), d(p_c, m_a),
        )
        su = UncertainSubsystem(StateSpace(random_stable_matrix(n_u, rng), g(n_u, p_c), g(m_u, n_u), d(m_u, p_c)))
        if not well_posed(sc, su):
            continue
        if require_stable_loop and not is_hurwitz(aggregate(sc, su).A_bar):
            continue
        return sc, su
    raise RuntimeError("could not draw a well-posed stable pair")


# -- JSON system files -------------------------------------------------------

def _tolist(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def system_to_dict(sc: CertainSubsystem | None = None, su: UncertainSubsystem | None = None,
                   budget: AttackBudget | None = None) -> dict:
    doc: dict = {}
    if sc is not None:
        doc["certain"] = {k: _tolist(getattr(sc, k)) for k in _CERTAIN_KEYS}
        # empty matrices lose their shape in nested lists
        doc["certain"]["dims"] = {"n_c": sc.n_states, "m_u": sc.m_u, "m_a": sc.m_a,
                                  "p_p": sc.p_p, "p_r": sc.p_r, "p_c": sc.p_c}
    if su is not None:
        doc["uncertain"] = {k: _tolist(getattr(su, k)) for k in _UNCERTAIN_KEYS}
        doc["uncertain"]["dims"] = {"n_u": su.n_states, "inputs": su.plant.n_inputs,
                                    "outputs": su.plant.n_outputs}
    if budget is not None:
        doc["budget"] = {"delta": budget.delta, "energy": budget.energy}
    return doc


def _matrix_field(block: dict, key: str, where: str, shape: tuple[int, int] | None) -> np.ndarray:
    if key not in block:
        raise DimensionError(f"{where}.{key}: missing")
    raw = block[key]
    if not isinstance(raw, list) or any(not isinstance(r, list) for r in raw):
        if isinstance(raw, (int, float)) and shape in (None, (1, 1)):
            return np.array([[float(raw)]])
        raise DimensionError(f"{where}.{key}: must be a row-major nested list")
    widths = {len(r) for r in raw}
    if len(widths) > 1:
        raise DimensionError(f"{where}.{key}: ragged rows {sorted(widths)}")
    arr = np.array(raw, dtype=float).reshape(len(raw), widths.pop() if widths else 0)
    if arr.size == 0 and shape is not None:
        arr = np.zeros(shape)
    if shape is not None and arr.shape != shape:
        raise DimensionError(f"{where}.{key}: expected shape {shape}, got {arr.shape}")
    return arr


def system_from_dict(doc: dict) -> tuple[CertainSubsystem | None, UncertainSubsystem | None, AttackBudget | None]:
    sc = su = budget = None
    if "certain" in doc:
        blk = doc["certain"]
        dims = blk.get("dims")
        if dims is not None:
            n, mu, ma = dims["n_c"], dims["m_u"], dims["m_a"]
            rows = {"p": dims["p_p"], "r": dims["p_r"], "c": dims["p_c"]}
            shapes = {"A_c": (n, n), "B_c": (n, mu), "F_x": (n, ma)}
            for t, p in rows.items():
                shapes.update({f"C_{t}": (p, n), f"D_{t}": (p, mu), f"F_{t}": (p, ma)})
        else:
            shapes = {}
        mats = {k: _matrix_field(blk, k, "certain", shapes.get(k)) for k in _CERTAIN_KEYS}
        try:
            sc = CertainSubsystem(**mats)
        except DimensionError as exc:
            raise DimensionError(f"certain.{exc}") from None
    if "uncertain" in doc:
        blk = doc["uncertain"]
        dims = blk.get("dims")
        shapes = {}
        if dims is not None:
            n, m, p = dims["n_u"], dims["inputs"], dims["outputs"]
            shapes = {"A_u": (n, n), "B_u": (n, m), "C_u": (p, n), "D_u": (p, m)}
        mats = {k: _matrix_field(blk, k, "uncertain", shapes.get(k)) for k in _UNCERTAIN_KEYS}
        try:
            su = UncertainSubsystem(StateSpace(mats["A_u"], mats["B_u"], mats["C_u"], mats["D_u"]))
        except DimensionError as exc:
            raise DimensionError(f"uncertain.{exc}") from None
    if sc is not None and su is not None:
        _check_pair(sc, su)
    if "budget" in doc and doc["budget"] is not None:
        b = doc["budget"]
        try:
            budget = AttackBudget(float(b["delta"]), float(b["energy"]))
        except KeyError as exc:
            raise ValueError(f"budget.{exc.args[0]}: missing") from None
    return sc, su, budget


def load_system(path: str | Path):
    """Read a system file; returns ``(certain, uncertain, budget)`` with ``None`` for absent blocks."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise DimensionError(f"{path}: top level must be a JSON object")
    return system_from_dict(doc)


def dump_system(path: str | Path, sc=None, su=None, budget=None, extra: dict | None = None) -> None:
    doc = system_to_dict(sc, su, budget)
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
