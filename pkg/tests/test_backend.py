import os
import subprocess
import sys

import numpy as np

from profilecast import kernels

SCRIPT = """
import sys
from profilecast import backend
from profilecast.config import RunConfig
from profilecast.experiment import run_replica
from profilecast.metrics import write_csv
cfg = RunConfig().update({"trace.nodes": 30, "trace.days": 5, "packets.count": 20, "p1": 0.4})
print(backend())
write_csv(run_replica(cfg).rows, sys.stdout)
"""


def _run(no_numba):
    env = dict(os.environ)
    env.pop("PROFILECAST_NO_NUMBA", None)
    if no_numba:
        env["PROFILECAST_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    name, csv_text = res.stdout.split("\n", 1)
    return name, csv_text


def test_env_flag_selects_numpy_and_results_agree():
    fast_name, fast = _run(False)
    slow_name, slow = _run(True)
    assert slow_name == "numpy"
    assert fast_name in ("numba", "numpy")
    assert fast == slow


def test_kernel_twins_agree():
    rng = np.random.default_rng(0)
    for shape in [(28, 10), (10, 3), (5, 5)]:
        a = rng.random(shape)
        u1, s1, v1 = kernels.jacobi_svd_nb(a, kernels.JACOBI_TOL, kernels.JACOBI_MAX_SWEEPS)
        u2, s2, v2 = kernels.jacobi_svd_np(a, kernels.JACOBI_TOL, kernels.JACOBI_MAX_SWEEPS)
        np.testing.assert_allclose(np.sort(s1), np.sort(s2), atol=1e-12)
        np.testing.assert_allclose(u1 @ v1.T, u2 @ v2.T, atol=1e-10)

    vec = rng.standard_normal((50, 3, 10))
    w = rng.random((50, 3))
    tv, tw = rng.standard_normal((2, 10)), rng.random(2)
    np.testing.assert_allclose(kernels.similarity_to_target_nb(vec, w, tv, tw),
                               kernels.similarity_to_target_np(vec, w, tv, tw), atol=1e-12)

    starts = np.sort(rng.integers(0, 5000, 300)).astype(np.int64)
    ends = starts + rng.integers(1, 400, 300)
    who = rng.integers(0, 20, 300).astype(np.int64)
    for x, y in zip(kernels.overlap_pairs_nb(who, starts, ends), kernels.overlap_pairs_np(who, starts, ends)):
        np.testing.assert_array_equal(x, y)

    locs = rng.integers(0, 4, 300).astype(np.int64)
    o1, o2 = np.zeros((3, 4)), np.zeros((3, 4))
    kernels.accumulate_association_nb(locs, starts.astype(float), ends.astype(float), 2000.0, o1)
    kernels.accumulate_association_np(locs, starts.astype(float), ends.astype(float), 2000.0, o2)
    np.testing.assert_allclose(o1, o2, atol=1e-12)
