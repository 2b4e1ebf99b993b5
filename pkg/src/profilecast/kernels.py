"""Hot numeric kernels, each in a numba-compiled and a pure-numpy flavour.

The public names (``jacobi_svd``, ``similarity_to_target``,
``overlap_pairs``, ``accumulate_association``) dispatch on the backend picked
in :mod:`profilecast._accel`. The ``*_nb`` and ``*_np`` variants stay importable
so tests and the benchmark can run both side by side.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 80


# --------------------------------------------------------------------------
# one-sided (Hestenes) Jacobi SVD
# --------------------------------------------------------------------------


@njit(cache=True)
def jacobi_svd_nb(a, tol, max_sweeps):
    m, n = a.shape
    u = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += u[i, p] * u[i, p]
                    beta += u[i, q] * u[i, q]
                    gamma += u[i, p] * u[i, q]
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    up = u[i, p]
                    uq = u[i, q]
                    u[i, p] = c * up - s * uq
                    u[i, q] = s * up + c * uq
                for i in range(n):
                    vp = v[i, p]
                    vq = v[i, q]
                    v[i, p] = c * vp - s * vq
                    v[i, q] = s * vp + c * vq
        if not rotated:
            break
    sv = np.zeros(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += u[i, j] * u[i, j]
        sv[j] = math.sqrt(acc)
    return u, sv, v


def jacobi_svd_np(a, tol, max_sweeps):
    m, n = a.shape
    u = np.array(a, dtype=np.float64, copy=True)
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up = u[:, p]
                uq = u[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                u[:, [p, q]] = np.column_stack((c * up - s * uq, s * up + c * uq))
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            break
    sv = np.sqrt(np.einsum("ij,ij->j", u, u))
    return u, sv, v


# --------------------------------------------------------------------------
# weighted absolute inner-product similarity, one target against many nodes
# --------------------------------------------------------------------------


@njit(cache=True)
def similarity_to_target_nb(vectors, weights, t_vectors, t_weights):
    n_nodes, k, dim = vectors.shape
    kt = t_vectors.shape[0]
    out = np.zeros(n_nodes)
    for n in range(n_nodes):
        total = 0.0
        for i in range(k):
            wi = weights[n, i]
            if wi == 0.0:
                continue
            for j in range(kt):
                dot = 0.0
                for d in range(dim):
                    dot += vectors[n, i, d] * t_vectors[j, d]
                total += wi * t_weights[j] * abs(dot)
        out[n] = total
    return out


def similarity_to_target_np(vectors, weights, t_vectors, t_weights):
    dots = np.abs(np.einsum("nkd,jd->nkj", vectors, t_vectors))
    return np.einsum("nk,nkj,j->n", weights, dots, t_weights)


# --------------------------------------------------------------------------
# interval overlap sweep at one location
# --------------------------------------------------------------------------


@njit(cache=True)
def overlap_pairs_nb(nodes, starts, ends):
    # inputs sorted by start; returns index pairs (i, j), i < j, that overlap
    n = starts.shape[0]
    count = 0
    for i in range(n):
        j = i + 1
        while j < n and starts[j] < ends[i]:
            if nodes[j] != nodes[i] and min(ends[i], ends[j]) > starts[j]:
                count += 1
            j += 1
    left = np.empty(count, dtype=np.int64)
    right = np.empty(count, dtype=np.int64)
    c = 0
    for i in range(n):
        j = i + 1
        while j < n and starts[j] < ends[i]:
            if nodes[j] != nodes[i] and min(ends[i], ends[j]) > starts[j]:
                left[c] = i
                right[c] = j
                c += 1
            j += 1
    return left, right


def overlap_pairs_np(nodes, starts, ends):
    n = starts.shape[0]
    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    stop = np.searchsorted(starts, ends, side="left")
    counts = np.maximum(stop - np.arange(n) - 1, 0)
    left = np.repeat(np.arange(n, dtype=np.int64), counts)
    offsets = np.arange(left.shape[0]) - np.repeat(np.cumsum(counts) - counts, counts)
    right = left + 1 + offsets
    keep = (nodes[left] != nodes[right]) & (np.minimum(ends[left], ends[right]) > starts[right])
    return left[keep], right[keep].astype(np.int64)


# --------------------------------------------------------------------------
# association-matrix accumulation with midnight splitting
# --------------------------------------------------------------------------


@njit(cache=True)
def accumulate_association_nb(locations, starts, ends, day_length, out):
    for r in range(starts.shape[0]):
        cur = starts[r]
        stop = ends[r]
        loc = locations[r]
        while cur < stop:
            day = int(cur // day_length)
            boundary = (day + 1) * day_length
            seg_end = stop if stop < boundary else boundary
            out[day, loc] += (seg_end - cur) / day_length
            cur = seg_end
    return out


def accumulate_association_np(locations, starts, ends, day_length, out):
    d0 = np.floor_divide(starts, day_length).astype(np.int64)
    # last second of the interval decides the final day it touches
    d1 = np.floor_divide(np.nextafter(ends, -np.inf), day_length).astype(np.int64)
    same = d0 == d1
    np.add.at(out, (d0[same], locations[same]), (ends[same] - starts[same]) / day_length)
    for r in np.flatnonzero(~same):
        cur = starts[r]
        while cur < ends[r]:
            day = int(cur // day_length)
            seg_end = min(ends[r], (day + 1) * day_length)
            out[day, locations[r]] += (seg_end - cur) / day_length
            cur = seg_end
    return out


if HAVE_NUMBA:
    jacobi_svd = jacobi_svd_nb
    similarity_to_target = similarity_to_target_nb
    overlap_pairs = overlap_pairs_nb
    accumulate_association = accumulate_association_nb
else:
    jacobi_svd = jacobi_svd_np
    similarity_to_target = similarity_to_target_np
    overlap_pairs = overlap_pairs_np
    accumulate_association = accumulate_association_np
