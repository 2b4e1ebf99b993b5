"""Behavioral profiles: truncated SVD of association matrices and similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import kernels

DEFAULT_RANK = 1
CACHE_HEADER = "# profilecast-profiles v1"


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray  # days x k
    s: np.ndarray  # k, non-increasing
    v: np.ndarray  # locations x k

    @property
    def rank(self) -> int:
        """Numerical rank among the kept singular values."""
        if self.s.size == 0 or self.s[0] == 0.0:
            return 0
        tol = self.s[0] * max(self.u.shape[0], self.v.shape[0]) * 1e-12
        return int(np.count_nonzero(self.s > tol))


@dataclass(frozen=True, eq=False)
class BehavioralProfile:
    vectors: np.ndarray  # k x locations, unit rows
    weights: np.ndarray  # k, sums to 1

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BehavioralProfile):
            return NotImplemented
        return np.array_equal(self.vectors, other.vectors) and np.array_equal(self.weights, other.weights)

    __hash__ = None


TargetProfile = BehavioralProfile


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    # largest-magnitude entry of each v column made positive (first one on ties)
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] *= -1.0
            u[:, j] *= -1.0


def _complete_columns(q: np.ndarray, good: np.ndarray) -> None:
    """Replace the columns of ``q`` not flagged ``good`` by an orthonormal completion."""
    m = q.shape[0]
    basis = [q[:, j] for j in range(q.shape[1]) if good[j]]
    candidates = iter(np.eye(m))
    for j in range(q.shape[1]):
        if good[j]:
            continue
        for e in candidates:
            w = e.copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            norm = np.linalg.norm(w)
            if norm > 1e-6:
                q[:, j] = w / norm
                basis.append(q[:, j])
                break


def svd(matrix, k: int) -> SvdResult:
    """Top-``k`` singular triplets via one-sided Jacobi.

    Accepts an :class:`~profilecast.trace.AssociationMatrix` or a plain 2-D
    array. Raises :class:`ProfileError` for an all-zero matrix.
    """
    a = np.asarray(getattr(matrix, "cells", matrix), dtype=np.float64)
    if a.ndim != 2:
        raise ProfileError("expected a 2-D matrix")
    m, n = a.shape
    if not 1 <= k <= min(m, n):
        raise ProfileError(f"rank k={k} outside [1, {min(m, n)}]")
    if not np.any(a):
        raise ProfileError("zero profile")
    transposed = m < n
    work = np.ascontiguousarray(a.T if transposed else a)
    left, sv, right = kernels.jacobi_svd(work, kernels.JACOBI_TOL, kernels.JACOBI_MAX_SWEEPS)
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    left = left[:, order]
    right = np.ascontiguousarray(right[:, order])
    good = sv > sv[0] * max(m, n) * 1e-14
    u_full = np.zeros_like(left)
    u_full[:, good] = left[:, good] / sv[good]
    _complete_columns(u_full, good)
    sv = np.where(good, sv, 0.0)
    if transposed:
        u_full, right = right, u_full
    u_full = np.ascontiguousarray(u_full[:, :k])
    v = np.ascontiguousarray(right[:, :k])
    _fix_signs(u_full, v)
    return SvdResult(u=u_full, s=sv[:k].copy(), v=v)


def build_profile(result: SvdResult, k: int) -> BehavioralProfile:
    if k < 1 or k > result.s.shape[0]:
        raise ProfileError(f"k={k} exceeds the {result.s.shape[0]} computed singular values")
    if result.rank < k:
        raise ProfileError(f"matrix has rank {result.rank} < requested k={k}")
    s = result.s[:k]
    return BehavioralProfile(vectors=result.v[:, :k].T.copy(), weights=s / s.sum())


def profile_from_matrix(matrix, k: int = DEFAULT_RANK) -> BehavioralProfile:
    return build_profile(svd(matrix, k), k)


EPS = float(np.finfo(float).eps)
SNAP_ULPS = 64


def similarity(x: BehavioralProfile, y: BehavioralProfile) -> float:
    """Weighted absolute inner product of the two singular-vector sets.

    Summed with ``math.fsum`` so the result is independent of argument order.
    Unit singular vectors only have unit norm to within rounding, so a total
    within ``SNAP_ULPS`` ulps of one is reported as exactly one.
    """
    if x.dim != y.dim:
        raise ProfileError(f"profile dimension mismatch: {x.dim} vs {y.dim}")
    dots = np.abs(x.vectors @ y.vectors.T)
    terms = (x.weights[:, None] * y.weights[None, :]) * dots
    total = math.fsum(terms.ravel().tolist())
    if total >= 1.0 - SNAP_ULPS * EPS:
        return 1.0
    return total


class ProfileSet:
    """Stacked profiles of a node population for vectorised similarity."""

    def __init__(self, profiles: dict[int, BehavioralProfile]):
        if not profiles:
            raise ProfileError("empty profile set")
        self.nodes = sorted(profiles)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.profiles = profiles
        k = max(p.rank for p in profiles.values())
        dim = next(iter(profiles.values())).dim
        self.vectors = np.zeros((len(self.nodes), k, dim))
        self.weights = np.zeros((len(self.nodes), k))
        for i, node in enumerate(self.nodes):
            p = profiles[node]
            if p.dim != dim:
                raise ProfileError("profiles disagree on location dimension")
            self.vectors[i, : p.rank] = p.vectors
            self.weights[i, : p.rank] = p.weights

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, node: int) -> BehavioralProfile:
        return self.profiles[node]

    def similarity_to(self, target: BehavioralProfile) -> np.ndarray:
        """Similarity of every node (in ``self.nodes`` order) to ``target``."""
        if target.dim != self.vectors.shape[2]:
            raise ProfileError("target dimension mismatch")
        sims = kernels.similarity_to_target(
            self.vectors, self.weights, np.ascontiguousarray(target.vectors), target.weights
        )
        return np.where(sims >= 1.0 - SNAP_ULPS * EPS, 1.0, sims)


def build_profiles(matrices: dict, k: int = DEFAULT_RANK, skip_degenerate: bool = True) -> ProfileSet:
    profiles = {}
    for node, m in matrices.items():
        try:
            profiles[node] = profile_from_matrix(m, k)
        except ProfileError:
            if not skip_degenerate:
                raise
    return ProfileSet(profiles)


def _orthonormalize(vectors: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(vectors.T)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q.T.copy()


def generate_target_profile(
    profiles: ProfileSet | dict[int, BehavioralProfile],
    mode: str = "anchor",
    seed: int | np.random.Generator = 0,
    noise: float = 0.1,
) -> tuple[BehavioralProfile, int | None]:
    """Random packet target built around a uniformly chosen anchor node."""
    nodes = sorted(profiles.nodes if isinstance(profiles, ProfileSet) else profiles)
    if not nodes:
        raise ProfileError("empty profile set")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    anchor = nodes[int(rng.integers(len(nodes)))]
    base = profiles[anchor]
    if mode == "anchor":
        return base, anchor
    if mode != "perturbed":
        raise ProfileError(f"unknown target mode {mode!r}")
    if noise == 0:
        return base, anchor
    vecs = base.vectors + noise * rng.standard_normal(base.vectors.shape)
    vecs = _orthonormalize(vecs)
    for row in vecs:
        if row[int(np.argmax(np.abs(row)))] < 0:
            row *= -1.0
    return BehavioralProfile(vectors=vecs, weights=base.weights.copy()), anchor


# --------------------------------------------------------------------------
# profile cache
# --------------------------------------------------------------------------


def dump_profiles(profiles: dict[int, BehavioralProfile], stream: TextIO) -> None:
    stream.write(CACHE_HEADER + "\n")
    for node in sorted(profiles):
        p = profiles[node]
        fields = [str(node), str(p.rank), str(p.dim)]
        fields += [repr(float(w)) for w in p.weights]
        fields += [repr(float(x)) for x in p.vectors.ravel()]
        stream.write(",".join(fields) + "\n")


def load_profiles(stream: TextIO) -> dict[int, BehavioralProfile]:
    header = stream.readline().strip()
    if header != CACHE_HEADER:
        raise ProfileError(f"unsupported profile cache header {header!r}")
    out = {}
    for lineno, line in enumerate(stream, start=2):
        if not line.strip():
            continue
        f = line.strip().split(",")
        node, k, dim = int(f[0]), int(f[1]), int(f[2])
        if len(f) != 3 + k + k * dim:
            raise ProfileError(f"bad field count at line {lineno}")
        w = np.array([float(x) for x in f[3 : 3 + k]])
        v = np.array([float(x) for x in f[3 + k :]]).reshape(k, dim)
        out[node] = BehavioralProfile(vectors=v, weights=w)
    return out
