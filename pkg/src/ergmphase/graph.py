"""Graphs, sufficient statistics and parameterizations of the random graph
model with edge and concurrent-vertex terms.

The model assigns ``Pr(Y=y) ~ exp(theta_e * t_e(y) + theta_c * t_c(y))`` where
``t_e`` counts edges and ``t_c`` counts vertices of degree at least two.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Natural parameters ``(theta_e, theta_c)``."""

    theta_e: float
    theta_c: float

    def __post_init__(self):
        if not (math.isfinite(self.theta_e) and math.isfinite(self.theta_c)):
            raise ValueError(f"parameters must be finite, got {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_e, self.theta_c])

    def to_physical(self) -> PhysicalParams:
        return theta_to_physical(self)


@dataclass(frozen=True)
class PhysicalParams:
    """Edge temperature and concurrency energy.

    Energies are in edge units (``phi_e = 1``) and ``k_B = 1``.
    """

    temperature: float
    phi_c: float

    def __post_init__(self):
        if self.temperature == 0 or not math.isfinite(self.temperature):
            raise ValueError("temperature must be finite and nonzero")
        if not math.isfinite(self.phi_c):
            raise ValueError("phi_c must be finite")

    def to_theta(self) -> ModelParams:
        return physical_to_theta(self)


def theta_to_physical(p: ModelParams) -> PhysicalParams:
    if p.theta_e == 0:
        raise ValueError("theta_e = 0 is the infinite-temperature limit; no finite temperature")
    return PhysicalParams(temperature=-1.0 / p.theta_e, phi_c=p.theta_c / p.theta_e)


def physical_to_theta(pp: PhysicalParams) -> ModelParams:
    return ModelParams(theta_e=-1.0 / pp.temperature, theta_c=-pp.phi_c / pp.temperature)


def as_theta(params: ModelParams | PhysicalParams) -> ModelParams:
    if isinstance(params, PhysicalParams):
        return params.to_theta()
    return params


class DyadGroup(enum.Enum):
    II_IC_CC = "II/IC/CC"
    PI_PC = "PI/PC"
    PP = "PP"


class DyadClass(enum.IntEnum):
    """Endpoint classes of a dyad with the focal edge absent.

    Integer values are the codes used by the compiled samplers.
    """

    II = 0
    IC = 1
    CC = 2
    PI = 3
    PC = 4
    PP = 5

    @property
    def group(self) -> DyadGroup:
        if self in (DyadClass.II, DyadClass.IC, DyadClass.CC):
            return DyadGroup.II_IC_CC
        if self in (DyadClass.PI, DyadClass.PC):
            return DyadGroup.PI_PC
        return DyadGroup.PP

    @property
    def n_pendants(self) -> int:
        return {DyadClass.PI: 1, DyadClass.PC: 1, DyadClass.PP: 2}.get(self, 0)

    @classmethod
    def from_degrees(cls, di: int, dj: int) -> DyadClass:
        return cls(dyad_class_code(di, dj))


# (kind_i, kind_j) -> code, with kind 0 = isolate, 1 = pendant, 2 = concurrent
_CLASS_TABLE = np.array(
    [
        [0, 3, 1],
        [3, 5, 4],
        [1, 4, 2],
    ],
    dtype=np.int64,
)


def dyad_class_code(di: int, dj: int) -> int:
    return int(_CLASS_TABLE[min(di, 2), min(dj, 2)])


class Graph:
    """Simple undirected graph on ``n`` labeled vertices.

    Degrees, ``t_e`` and ``t_c`` are cached and kept current by
    :meth:`toggle`; :meth:`recount` recomputes them from scratch.
    """

    def __init__(self, n: int):
        if n < 1:
            raise GraphError(f"graph order must be positive, got {n}")
        self.n = int(n)
        self.adj = np.zeros((n, n), dtype=np.uint8)
        self.degree = np.zeros(n, dtype=np.int64)
        self.t_e = 0
        self.t_c = 0

    @classmethod
    def from_edges(cls, n: int, edges) -> Graph:
        g = cls(n)
        for i, j in edges:
            if g.has_edge(i, j):
                raise GraphError(f"duplicate edge ({i}, {j})")
            g.toggle(i, j)
        return g

    @classmethod
    def from_adjacency(cls, adj) -> Graph:
        adj = np.asarray(adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency matrix must be square")
        if np.any(np.diag(adj)) or np.any(adj != adj.T):
            raise GraphError("adjacency matrix must be symmetric with empty diagonal")
        g = cls(adj.shape[0])
        g.adj[:] = adj != 0
        g.recount()
        return g

    def copy(self) -> Graph:
        g = Graph.__new__(Graph)
        g.n = self.n
        g.adj = self.adj.copy()
        g.degree = self.degree.copy()
        g.t_e = self.t_e
        g.t_c = self.t_c
        return g

    def _check_dyad(self, i: int, j: int):
        if i == j:
            raise GraphError(f"self-loop requested at vertex {i}")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise GraphError(f"dyad ({i}, {j}) out of range for n={self.n}")

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def toggle(self, i: int, j: int) -> bool:
        """Flip dyad ``(i, j)``; returns True if the edge is now present."""
        self._check_dyad(i, j)
        if self.adj[i, j]:
            self.adj[i, j] = self.adj[j, i] = 0
            for v in (i, j):
                self.degree[v] -= 1
                if self.degree[v] == 1:
                    self.t_c -= 1
            self.t_e -= 1
            return False
        self.adj[i, j] = self.adj[j, i] = 1
        for v in (i, j):
            self.degree[v] += 1
            if self.degree[v] == 2:
                self.t_c += 1
        self.t_e += 1
        return True

    def recount(self):
        self.degree = self.adj.sum(axis=1).astype(np.int64)
        self.t_e = int(self.degree.sum() // 2)
        self.t_c = int(np.count_nonzero(self.degree > 1))

    def stats(self) -> tuple[int, int]:
        return self.t_e, self.t_c

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adj))
        return list(zip(i.tolist(), j.tolist()))

    @property
    def order_parameter(self) -> float:
        return 1.0 - self.t_c / self.n

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.adj, other.adj)

    def __repr__(self):
        return f"Graph(n={self.n}, t_e={self.t_e}, t_c={self.t_c})"


def order_parameter(g: Graph) -> float:
    """Fraction of non-concurrent vertices, ``1 - t_c / N``."""
    return g.order_parameter


def toggle_edge(g: Graph, i: int, j: int) -> Graph:
    """Flip ``(i, j)`` in place and return ``g``; copy first to keep the original."""
    g.toggle(i, j)
    return g


def _degrees_without(g: Graph, i: int, j: int) -> tuple[int, int]:
    g._check_dyad(i, j)
    present = int(g.adj[i, j])
    return int(g.degree[i]) - present, int(g.degree[j]) - present


def change_score(g: Graph, i: int, j: int) -> tuple[int, int]:
    """``t(y+_ij) - t(y-_ij)`` as ``(delta_t_e, delta_t_c)``."""
    di, dj = _degrees_without(g, i, j)
    return 1, int(di == 1) + int(dj == 1)


def classify_dyad(g: Graph, i: int, j: int) -> DyadClass:
    """Class of dyad ``(i, j)`` from endpoint degrees with the edge forced absent."""
    di, dj = _degrees_without(g, i, j)
    return DyadClass.from_degrees(di, dj)


def conditional_tie_logodds(p: ModelParams | PhysicalParams, c: DyadClass) -> float:
    p = as_theta(p)
    return p.theta_e + c.n_pendants * p.theta_c


def conditional_tie_prob(p: ModelParams | PhysicalParams, c: DyadClass) -> float:
    return float(expit(conditional_tie_logodds(p, c)))


def bernoulli_bounds(p: ModelParams | PhysicalParams) -> tuple[float, float]:
    """Bounds on the marginal tie probability implied by the change scores.

    For ``theta_c <= 0`` the lower bound comes from a dyad joining two
    pendants and the upper from a dyad with no pendant endpoint. For
    ``theta_c > 0`` (pendant avoidance) the roles swap, so the returned pair
    is always ``(min, max)``.
    """
    p = as_theta(p)
    a = float(expit(p.theta_e + 2 * p.theta_c))
    b = float(expit(p.theta_e))
    return (a, b) if a <= b else (b, a)


def read_edgelist(path) -> Graph:
    """Read the ``N <n>`` header plus ``i j`` lines format."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("N "):
        raise GraphError(f"{path}: missing 'N <n>' header")
    n = int(lines[0].split()[1])
    edges = []
    for ln in lines[1:]:
        i, j = (int(x) for x in ln.split())
        if not i < j:
            raise GraphError(f"{path}: edge line '{ln}' must satisfy i < j")
        edges.append((i, j))
    return Graph.from_edges(n, edges)


def format_edgelist(g: Graph) -> str:
    out = [f"N {g.n}"]
    out += [f"{i} {j}" for i, j in g.edges()]
    return "\n".join(out) + "\n"


def write_edgelist(g: Graph, path):
    Path(path).write_text(format_edgelist(g))
