"""Degree distributions, neighbor/excess transforms and control-group partitions.

Degrees are dense-indexed from ``k_min`` to ``k_max``; entry ``j`` of every
per-class vector refers to degree ``k_min + j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.stats import poisson

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability mass over the degree classes ``k_min..k_max``."""

    k_min: int
    k_max: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if self.k_min < 0 or self.k_max < self.k_min:
            raise ValueError(f"invalid degree range [{self.k_min}, {self.k_max}]")
        if pmf.shape != (self.k_max - self.k_min + 1,):
            raise ValueError("pmf length must equal the number of degree classes")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ValueError("pmf entries must be finite and nonnegative")
        if abs(pmf.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"pmf sums to {pmf.sum()!r}, expected 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def n_classes(self) -> int:
        return self.pmf.size

    @property
    def mean_degree(self) -> float:
        return float(self.degrees @ self.pmf)

    def prob(self, k: int) -> float:
        if k < self.k_min or k > self.k_max:
            return 0.0
        return float(self.pmf[k - self.k_min])


@dataclass(frozen=True)
class NeighborDistributions:
    """Neighbor degree distribution ``r`` and excess degree distribution ``q``.

    Both are indexed like the parent distribution, i.e. ``r[j]`` and ``q[j]``
    belong to degree ``k_min + j``.
    """

    degrees: np.ndarray
    r: np.ndarray
    q: np.ndarray
    mean_degree: float


@dataclass(frozen=True)
class GroupPartition:
    """Contiguous grouping of degree classes into ``M`` control groups.

    ``boundaries`` holds ``k~_0 < k~_1 < ... < k~_M`` with ``k~_0 = k_min - 1``
    and ``k~_M = k_max``; group ``m`` (0-based) spans degrees
    ``boundaries[m] + 1 .. boundaries[m + 1]``.
    """

    boundaries: tuple[int, ...]
    masses: np.ndarray
    group_mean_degrees: np.ndarray
    class_group: np.ndarray = field(repr=False)

    @property
    def n_groups(self) -> int:
        return len(self.boundaries) - 1

    def group_degrees(self, m: int) -> range:
        return range(self.boundaries[m] + 1, self.boundaries[m + 1] + 1)


def make_truncated_poisson(lam: float, k_min: int, k_max: int) -> DegreeDistribution:
    """Poisson(``lam``) restricted to ``[k_min, k_max]`` and renormalized."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if k_min < 0 or k_max < k_min:
        raise ValueError(f"empty degree range [{k_min}, {k_max}]")
    k = np.arange(k_min, k_max + 1)
    # log-space keeps tails away from underflow for large k_max
    logp = poisson.logpmf(k, lam)
    p = np.exp(logp - logp.max())
    return DegreeDistribution(k_min, k_max, p / p.sum())


def make_power_law(gamma: float, k_min: int, k_max: int) -> DegreeDistribution:
    """Power law ``p_k = c k^-gamma`` on ``[k_min, k_max]``, normalized by direct summation."""
    if k_min < 1 or k_max < k_min:
        raise ValueError(f"empty or invalid degree range [{k_min}, {k_max}]")
    k = np.arange(k_min, k_max + 1, dtype=float)
    p = k ** (-float(gamma))
    return DegreeDistribution(k_min, k_max, p / p.sum())


def derive_neighbor_distributions(dist: DegreeDistribution) -> NeighborDistributions:
    k = dist.degrees
    kbar = float(k @ dist.pmf)
    if kbar <= 0:
        raise ValueError("distribution has all mass at degree 0; neighbors are undefined")
    r = k * dist.pmf / kbar
    q = np.zeros_like(r)
    q[:-1] = r[1:]  # q_k = r_{k+1}; q at k_max is exactly zero
    r.setflags(write=False)
    q.setflags(write=False)
    return NeighborDistributions(degrees=k, r=r, q=q, mean_degree=kbar)


def _build_partition(dist: DegreeDistribution, boundaries) -> GroupPartition:
    b = tuple(int(x) for x in boundaries)
    if b[0] != dist.k_min - 1 or b[-1] != dist.k_max:
        raise ValueError(f"boundaries must run from {dist.k_min - 1} to {dist.k_max}, got {b}")
    if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
        raise ValueError(f"boundaries must be strictly increasing, got {b}")
    k = dist.degrees
    class_group = np.searchsorted(np.asarray(b[1:]), k, side="left")
    n_groups = len(b) - 1
    masses = np.bincount(class_group, weights=dist.pmf, minlength=n_groups)
    weighted = np.bincount(class_group, weights=k * dist.pmf, minlength=n_groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = weighted / masses
    class_group.setflags(write=False)
    masses.setflags(write=False)
    means.setflags(write=False)
    return GroupPartition(
        boundaries=b, masses=masses, group_mean_degrees=means, class_group=class_group
    )


def partition_from_boundaries(dist: DegreeDistribution, boundaries) -> GroupPartition:
    """Partition with explicitly given boundaries ``k~_0 .. k~_M``."""
    return _build_partition(dist, boundaries)


def partition_equal_mass(dist: DegreeDistribution, M: int) -> GroupPartition:
    """Split the degree classes into ``M`` contiguous groups of roughly equal mass.

    Boundaries are placed sequentially: ``k~_m`` is the degree whose cumulative
    mass is closest to ``m / M``, subject to every group keeping at least one
    class. Ties go to the smaller degree.
    """
    n_nonempty = int(np.count_nonzero(dist.pmf > 0))
    if M < 1 or M > n_nonempty:
        raise ValueError(f"cannot split {n_nonempty} nonempty classes into {M} groups")
    n = dist.n_classes
    # cum[j] = mass of the first j classes
    cum = np.concatenate(([0.0], np.cumsum(dist.pmf)))
    cut = [0]
    for m in range(1, M):
        lo = cut[-1] + 1
        hi = n - (M - m)
        j = lo + int(np.argmin(np.abs(cum[lo : hi + 1] - m / M)))
        cut.append(j)
    cut.append(n)
    boundaries = [dist.k_min - 1 + j for j in cut]
    part = _build_partition(dist, boundaries)
    if np.any(part.masses <= 0):
        raise ValueError("equal-mass split produced an empty group")
    return part


def group_mean_degrees(dist: DegreeDistribution, part: GroupPartition) -> np.ndarray:
    """Mass-weighted mean degree within each group."""
    if part.boundaries[0] != dist.k_min - 1 or part.boundaries[-1] != dist.k_max:
        raise ValueError("partition does not match the distribution's degree range")
    k = dist.degrees
    masses = np.bincount(part.class_group, weights=dist.pmf, minlength=part.n_groups)
    if np.any(masses <= 0):
        raise ValueError("group with zero mass has no mean degree")
    weighted = np.bincount(part.class_group, weights=k * dist.pmf, minlength=part.n_groups)
    return weighted / masses


def distribution_from_spec(spec: Mapping) -> DegreeDistribution:
    """Build a distribution from a config mapping.

    Accepts ``{kind: "poisson", lambda, k_min, k_max}`` or
    ``{kind: "power_law", gamma, k_min, k_max}``. The shorthand names
    ``"ER"``, ``"PL2"`` and ``"PL3"`` select the three reference networks.
    """
    if isinstance(spec, str):
        return named_network(spec)
    kind = spec.get("kind")
    try:
        if kind == "poisson":
            return make_truncated_poisson(float(spec["lambda"]), int(spec["k_min"]), int(spec["k_max"]))
        if kind == "power_law":
            return make_power_law(float(spec["gamma"]), int(spec["k_min"]), int(spec["k_max"]))
    except KeyError as exc:
        raise ValueError(f"network spec of kind {kind!r} is missing {exc.args[0]!r}") from None
    if kind in NAMED_NETWORKS:
        return named_network(kind)
    raise ValueError(f"unknown network kind {kind!r}")


NAMED_NETWORKS = {
    "ER": {"kind": "poisson", "lambda": 23.60, "k_min": 1, "k_max": 60},
    "PL2": {"kind": "power_law", "gamma": 2.0, "k_min": 6, "k_max": 300},
    "PL3": {"kind": "power_law", "gamma": 3.0, "k_min": 13, "k_max": 300},
}


def named_network(name: str) -> DegreeDistribution:
    try:
        return distribution_from_spec(NAMED_NETWORKS[name])
    except KeyError:
        raise ValueError(f"unknown network {name!r}; expected one of {sorted(NAMED_NETWORKS)}") from None


def export_distribution_csv(dist: DegreeDistribution, pmf_path, cdf_path) -> None:
    """Write the pmf and cumulative pmf as ``degree,probability`` CSV files."""
    from .io import atomic_csv

    k = dist.degrees
    atomic_csv(pmf_path, ["degree", "probability"], zip(k, dist.pmf))
    atomic_csv(cdf_path, ["degree", "probability"], zip(k, np.cumsum(dist.pmf)))
