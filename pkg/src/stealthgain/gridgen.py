"""Synthetic power networks with linearized swing dynamics.

Every bus obeys ``m th'' = -d th' - sum_j b_ij (th - th_j) - g th + a``.
The buses are split into a certain block and an uncertain block; the two
blocks exchange boundary angles and tie-line torques, which keeps both
interconnection feedthroughs at zero.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .sysmodel import CertainSubsystem, StateSpace, UncertainSubsystem, system_from_dict, system_to_dict

__all__ = ["GridSpec", "default_spec", "edges", "stiffness_matrix", "build_partitioned_system",
           "make_scenarios", "spec_to_dict", "spec_from_dict", "dump_grid", "load_grid"]

TOPOLOGIES = ("ring", "random-geometric")


@dataclass(frozen=True)
class GridSpec:
    """Network description with the certain/uncertain split and attack/monitor buses.

    ``inertia``, ``damping`` and ``ground_susceptance`` are either one value
    for all buses or one value per bus.  ``ground_susceptance = None`` means
    ``0.1`` times the mean line susceptance.  For the ring, every line has
    susceptance ``line_susceptance``; for the random-geometric graph it is
    ``line_susceptance`` times the inverse length, normalized to unit mean.
    """

    n_buses: int
    certain_buses: tuple[int, ...]
    uncertain_buses: tuple[int, ...]
    attack_buses: tuple[int, ...]
    monitor_buses: tuple[int, ...]
    topology: str = "ring"
    radius: float = 0.35
    seed: int = 0
    inertia: float | tuple[float, ...] = 1.0
    damping: float | tuple[float, ...] = 0.8
    line_susceptance: float = 1.0
    ground_susceptance: float | tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("certain_buses", "uncertain_buses", "attack_buses", "monitor_buses"):
            object.__setattr__(self, name, tuple(sorted(int(i) for i in getattr(self, name))))
        for name in ("inertia", "damping", "ground_susceptance"):
            v = getattr(self, name)
            if v is not None and not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(x) for x in v))
        self.validate()

    def validate(self) -> None:
        n = self.n_buses
        if n < 2:
            raise ValueError(f"n_buses: need at least 2, got {n}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology: expected one of {TOPOLOGIES}, got {self.topology!r}")
        cert, unc = set(self.certain_buses), set(self.uncertain_buses)
        if cert & unc:
            raise ValueError(f"certain_buses/uncertain_buses: overlap {sorted(cert & unc)}")
        if cert | unc != set(range(n)):
            raise ValueError("certain_buses/uncertain_buses: must cover buses 0..n_buses-1")
        if not cert or not unc:
            raise ValueError("certain_buses/uncertain_buses: both blocks must be nonempty")
        for name in ("attack_buses", "monitor_buses"):
            s = set(getattr(self, name))
            if not s:
                raise ValueError(f"{name}: must be nonempty")
            if not s <= cert:
                raise ValueError(f"{name}: {sorted(s - cert)} are not certain buses")
        for name in ("inertia", "damping"):
            v = self.per_bus(name)
            if np.any(v <= 0):
                raise ValueError(f"{name}: must be positive")
        if not self.line_susceptance > 0:
            raise ValueError("line_susceptance: must be positive")
        if self.topology == "random-geometric" and not self.radius > 0:
            raise ValueError("radius: must be positive")
        g = self.ground()
        if np.any(g < 0):
            raise ValueError("ground_susceptance: must be nonnegative")
        for block, name in ((self.certain_buses, "certain"), (self.uncertain_buses, "uncertain")):
            if not np.any(g[list(block)] > 0):
                raise ValueError(f"ground_susceptance: the {name} block has no grounded bus")
        if not tie_lines(self):
            raise ValueError("certain_buses/uncertain_buses: no line crosses the partition")

    def per_bus(self, name: str) -> np.ndarray:
        v = getattr(self, name)
        arr = np.full(self.n_buses, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)
        if arr.shape != (self.n_buses,):
            raise ValueError(f"{name}: expected {self.n_buses} values, got {arr.size}")
        return arr

    def ground(self) -> np.ndarray:
        if self.ground_susceptance is None:
            b = [w for _, _, w in edges(self)]
            return np.full(self.n_buses, 0.1 * float(np.mean(b)))
        return self.per_bus("ground_susceptance")

    def with_sets(self, attack_buses=None, monitor_buses=None) -> "GridSpec":
        return replace(
            self,
            attack_buses=self.attack_buses if attack_buses is None else tuple(attack_buses),
            monitor_buses=self.monitor_buses if monitor_buses is None else tuple(monitor_buses),
        )


def default_spec(n_certain: int = 20, n_uncertain: int = 10, topology: str = "ring", seed: int = 0,
                 attack_buses=(0, 1), monitor_buses=(2, 3)) -> GridSpec:
    """Desk-scale default: a ring whose first ``n_certain`` buses form the certain block."""
    n = n_certain + n_uncertain
    return GridSpec(
        n_buses=n,
        certain_buses=tuple(range(n_certain)),
        uncertain_buses=tuple(range(n_certain, n)),
        attack_buses=tuple(attack_buses),
        monitor_buses=tuple(monitor_buses),
        topology=topology,
        seed=seed,
    )


def _geometric_edges(spec: GridSpec) -> list[tuple[int, int, float]]:
    rng = np.random.default_rng(spec.seed)
    pts = rng.random((spec.n_buses, 2))
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    n = spec.n_buses
    pairs = {(i, j) for i in range(n) for j in range(i + 1, n) if dist[i, j] < spec.radius}
    # join components through their closest pair so the network is connected
    comp = list(range(n))

    def find(i):
        while comp[i] != i:
            comp[i] = comp[comp[i]]
            i = comp[i]
        return i

    for i, j in pairs:
        comp[find(i)] = find(j)
    while len({find(i) for i in range(n)}) > 1:
        best = None
        for i in range(n):
            for j in range(i + 1, n):
                if find(i) != find(j) and (best is None or dist[i, j] < dist[best]):
                    best = (i, j)
        pairs.add(best)
        comp[find(best[0])] = find(best[1])
    pairs = sorted(pairs)
    inv = np.array([1.0 / max(dist[i, j], 1e-9) for i, j in pairs])
    inv *= spec.line_susceptance / inv.mean()
    return [(i, j, float(w)) for (i, j), w in zip(pairs, inv)]


def edges(spec: GridSpec) -> list[tuple[int, int, float]]:
    """Lines as ``(i, j, b_ij)`` with ``i < j``, sorted."""
    if spec.topology == "ring":
        n = spec.n_buses
        pairs = sorted({tuple(sorted((i, (i + 1) % n))) for i in range(n)})
        return [(i, j, spec.line_susceptance) for i, j in pairs]
    return _geometric_edges(spec)


def tie_lines(spec: GridSpec) -> list[tuple[int, int, float]]:
    """Lines with one end in each block, oriented as ``(certain, uncertain, b)``."""
    cert = set(spec.certain_buses)
    out = []
    for i, j, b in edges(spec):
        if (i in cert) != (j in cert):
            out.append((i, j, b) if i in cert else (j, i, b))
    return sorted(out)


def stiffness_matrix(spec: GridSpec) -> np.ndarray:
    """Grounded Laplacian ``L + diag(g)`` of the whole network."""
    K = np.diag(spec.ground().copy())
    for i, j, b in edges(spec):
        K[i, i] += b
        K[j, j] += b
        K[i, j] -= b
        K[j, i] -= b
    return K


def _swing_block(K: np.ndarray, m: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = len(m)
    return np.block([[np.zeros((n, n)), np.eye(n)], [-K / m[:, None], -np.diag(d / m)]])


def build_partitioned_system(spec: GridSpec) -> tuple[CertainSubsystem, UncertainSubsystem]:
    """Certain and uncertain subsystems of the partitioned swing network.

    Each block's state is its stacked angles followed by its frequencies.
    ``u_c`` holds the angles of certain buses on a tie-line; ``u_u`` holds,
    for each of those buses, the torque ``sum_j b_ij th_j`` from its
    uncertain neighbours.  The attack drives frequencies of attack buses,
    the performance output is every certain frequency, and the residual is
    angle and frequency of every monitor bus.
    """
    K = stiffness_matrix(spec)
    m, d = spec.per_bus("inertia"), spec.per_bus("damping")
    cert, unc = list(spec.certain_buses), list(spec.uncertain_buses)
    ci = {b: k for k, b in enumerate(cert)}
    ui = {b: k for k, b in enumerate(unc)}
    nc, nu = len(cert), len(unc)
    ties = tie_lines(spec)
    boundary = sorted({i for i, _, _ in ties})
    bi = {b: k for k, b in enumerate(boundary)}
    nb = len(boundary)

    A_c = _swing_block(K[np.ix_(cert, cert)], m[cert], d[cert])
    A_u = _swing_block(K[np.ix_(unc, unc)], m[unc], d[unc])

    B_c = np.zeros((2 * nc, nb))
    C_c = np.zeros((nb, 2 * nc))
    for b in boundary:
        B_c[nc + ci[b], bi[b]] = 1.0 / m[b]
        C_c[bi[b], ci[b]] = 1.0
    B_u = np.zeros((2 * nu, nb))
    C_u = np.zeros((nb, 2 * nu))
    for i, j, b in ties:
        B_u[nu + ui[j], bi[i]] += b / m[j]
        C_u[bi[i], ui[j]] += b

    F_x = np.zeros((2 * nc, len(spec.attack_buses)))
    for k, b in enumerate(spec.attack_buses):
        F_x[nc + ci[b], k] = 1.0 / m[b]
    C_p = np.hstack([np.zeros((nc, nc)), np.eye(nc)])
    C_r = np.zeros((2 * len(spec.monitor_buses), 2 * nc))
    for k, b in enumerate(spec.monitor_buses):
        C_r[2 * k, ci[b]] = 1.0
        C_r[2 * k + 1, nc + ci[b]] = 1.0

    sc = CertainSubsystem.from_partial(
        A_c, m_u=nb, m_a=len(spec.attack_buses), p_p=nc, p_r=C_r.shape[0], p_c=nb,
        B_c=B_c, F_x=F_x, C_p=C_p, C_r=C_r, C_c=C_c,
    )
    su = UncertainSubsystem(StateSpace(A_u, B_u, C_u, np.zeros((nb, nb))))
    return sc, su


def make_scenarios(spec_base: GridSpec, n_attack: int, n_monitor: int, n_cases: int,
                   seed: int = 0) -> list[GridSpec]:
    """Seeded attack sets over fixed monitors.

    The monitors are drawn once; each case then draws its attack buses
    uniformly without replacement from the certain block.
    """
    cert = np.array(spec_base.certain_buses)
    if n_attack < 1 or n_attack > cert.size:
        raise ValueError(f"n_attack: need 1..{cert.size}, got {n_attack}")
    if n_monitor < 1 or n_monitor > cert.size:
        raise ValueError(f"n_monitor: need 1..{cert.size}, got {n_monitor}")
    if n_cases < 1:
        raise ValueError(f"n_cases: must be positive, got {n_cases}")
    rng = np.random.default_rng(seed)
    monitors = tuple(int(b) for b in np.sort(rng.choice(cert, n_monitor, replace=False)))
    out = []
    for _ in range(n_cases):
        attack = tuple(int(b) for b in np.sort(rng.choice(cert, n_attack, replace=False)))
        out.append(spec_base.with_sets(attack, monitors))
    return out


def spec_to_dict(spec: GridSpec) -> dict:
    doc = asdict(spec)
    for k, v in doc.items():
        if isinstance(v, tuple):
            doc[k] = list(v)
    return doc


def spec_from_dict(doc: dict) -> GridSpec:
    try:
        return GridSpec(**doc)
    except TypeError as exc:
        raise ValueError(f"grid: {exc}") from None


def dump_grid(path: str | Path, spec: GridSpec, budget=None) -> None:
    """Write the partitioned system in the system-file format plus a ``grid`` block."""
    sc, su = build_partitioned_system(spec)
    doc = system_to_dict(sc, su, budget)
    doc["grid"] = spec_to_dict(spec)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_grid(path: str | Path):
    """Read a file written by :func:`dump_grid`; returns ``(spec, certain, uncertain, budget)``."""
    with open(path) as fh:
        doc = json.load(fh)
    if "grid" not in doc:
        raise ValueError(f"{path}: no grid block")
    spec = spec_from_dict(doc["grid"])
    sc, su, budget = system_from_dict(doc)
    return spec, sc, su, budget
