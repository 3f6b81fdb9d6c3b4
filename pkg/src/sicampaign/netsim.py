"""Configuration-model graphs and discrete-time Monte Carlo SI spreading."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .degree_model import DegreeDistribution, GroupPartition, partition_equal_mass
from .dynamics import ControlSchedule, ModelParams


@dataclass(frozen=True)
class Graph:
    """Multigraph stored as CSR neighbor lists (self-loops and parallel edges kept).

    ``sampled_degree`` is the degree drawn from the distribution;
    ``degree`` is the realized neighbor-list length, which is one lower for the
    node that held a discarded odd half-edge.
    """

    indptr: np.ndarray
    indices: np.ndarray
    sampled_degree: np.ndarray
    degree_class: np.ndarray
    group: np.ndarray
    n_edges: int

    @property
    def n_nodes(self) -> int:
        return self.sampled_degree.size

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """Sparse matrix whose entry ``(a, b)`` counts the ``a``-``b`` edge endpoints."""
        data = np.ones(self.indices.size, dtype=np.int32)
        A = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n_nodes, self.n_nodes))
        A.sum_duplicates()
        return A

    def edge_list(self) -> np.ndarray:
        """Each edge once, as ``(n_edges, 2)`` rows."""
        src = np.repeat(np.arange(self.n_nodes), self.degree)
        dst = self.indices
        keep = src < dst
        loops = src == dst
        # each self-loop appears twice in its own list
        loop_rows = np.flatnonzero(loops)[::2]
        return np.concatenate([np.column_stack([src[keep], dst[keep]]), np.column_stack([src[loop_rows], dst[loop_rows]])])


def sample_configuration_model(dist: DegreeDistribution, n_nodes: int, seed, partition: GroupPartition | None = None) -> Graph:
    """Draw i.i.d. degrees and pair half-edges uniformly at random.

    A leftover half-edge (odd total) is dropped.
    """
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    rng = np.random.default_rng(seed)
    degrees = rng.choice(dist.degrees, size=n_nodes, p=dist.pmf)
    stubs = np.repeat(np.arange(n_nodes), degrees)
    rng.shuffle(stubs)
    if stubs.size % 2:
        stubs = stubs[:-1]
    pairs = stubs.reshape(-1, 2)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_nodes), out=indptr[1:])
    cls = degrees - dist.k_min
    if partition is None:
        partition = partition_equal_mass(dist, 1)
    group = np.asarray(partition.class_group)[cls]
    return Graph(indptr, dst, degrees, cls, group, n_edges=pairs.shape[0])


def export_edge_list(path, graph: Graph) -> None:
    from .io import atomic_write_text

    edges = graph.edge_list()
    atomic_write_text(path, "".join(f"{a} {b}\n" for a, b in edges))


@dataclass(frozen=True)
class SimResult:
    t: np.ndarray
    total: np.ndarray
    per_class: np.ndarray


def _sim_steps(schedule: ControlSchedule, dt: float | None):
    grid_dt = schedule.dt
    dt = grid_dt if dt is None else float(dt)
    if dt <= 0 or dt > grid_dt * (1 + 1e-12):
        raise ValueError(f"time step {dt} must lie in (0, {grid_dt}]")
    ratio = grid_dt / dt
    sub = int(round(ratio))
    if abs(ratio - sub) > 1e-9:
        raise ValueError("time step must divide the schedule grid spacing")
    return sub, grid_dt / sub


def simulate_si(graph: Graph, params: ModelParams, schedule: ControlSchedule, dt: float | None = None, seed=None) -> SimResult:
    """One Monte Carlo SI run on ``graph``.

    Every step, each infected node in group ``m`` is an active spreader with
    probability ``alpha * (1 + v_m)``; a susceptible node is infected by each
    active neighbor independently with probability ``beta(t) dt`` and recruited
    directly with probability ``u_m dt``. Controls hold their left grid value.
    """
    sub, h = _sim_steps(schedule, dt)
    n_steps = schedule.n_intervals * sub
    if params.profile.peak * h > 1 or params.u_max * h > 1:
        raise ValueError("time step too large: per-step probabilities exceed 1")
    if params.alpha * (1 + schedule.v.max()) > 1 + 1e-12:
        raise ValueError("spreader probability alpha * (1 + v) exceeds 1")
    rng = np.random.default_rng(seed)
    A = graph.adjacency()
    grp = graph.group
    n_cls = int(graph.degree_class.max()) + 1
    class_size = np.bincount(graph.degree_class, minlength=n_cls).astype(float)

    infected = rng.random(graph.n_nodes) < params.i0
    t = np.arange(n_steps + 1) * h
    total = np.empty(n_steps + 1)
    per_class = np.empty((n_steps + 1, n_cls))

    def record(j):
        total[j] = infected.mean()
        with np.errstate(invalid="ignore", divide="ignore"):
            per_class[j] = np.bincount(graph.degree_class, weights=infected, minlength=n_cls) / class_size

    record(0)
    for j in range(n_steps):
        n = j // sub
        beta = float(params.beta(t[j]))
        u = schedule.u[n]
        v = schedule.v[n]
        active = infected & (rng.random(graph.n_nodes) < params.alpha * (1.0 + v)[grp])
        n_active = A @ active.astype(np.int32)
        p_escape = (1.0 - beta * h) ** n_active * (1.0 - u[grp] * h)
        flips = ~infected & (rng.random(graph.n_nodes) >= p_escape)
        infected |= flips
        record(j + 1)
    return SimResult(t, total, per_class)


@dataclass(frozen=True)
class EnsembleResult:
    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    runs: np.ndarray


def ensemble(dist: DegreeDistribution, n_nodes: int, params: ModelParams, schedule: ControlSchedule,
             n_runs: int, seed, dt: float | None = None, partition: GroupPartition | None = None,
             workers: int = 1) -> EnsembleResult:
    """Average ``n_runs`` independent runs, each on a freshly sampled graph.

    Run ``r`` draws its graph and its dynamics from children of
    ``SeedSequence(seed)``, so results do not depend on ``workers``.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    children = np.random.SeedSequence(seed).spawn(n_runs)

    def one(child):
        g_seed, s_seed = child.spawn(2)
        graph = sample_configuration_model(dist, n_nodes, g_seed, partition)
        return simulate_si(graph, params, schedule, dt, s_seed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(c) for c in children]
    runs = np.stack([r.total for r in results])
    return EnsembleResult(results[0].t, runs.mean(axis=0), runs.std(axis=0), runs)


def export_ensemble_csv(path, result: EnsembleResult, mean_field=None) -> None:
    """CSV with columns ``t, mean_i, std_i, meanfield_i``."""
    from .io import atomic_csv

    mf = np.full_like(result.mean, np.nan) if mean_field is None else np.interp(result.t, *mean_field)
    atomic_csv(path, ["t", "mean_i", "std_i", "meanfield_i"], zip(result.t, result.mean, result.std, mf))
