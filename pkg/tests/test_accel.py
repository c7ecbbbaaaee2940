import os
import subprocess
import sys

import numpy as np
import pytest

from flatgp import accel


class TestPaths:
    def test_pairwise_matches_reference(self, rng):
        X = rng.normal(size=(20, 3))
        got = accel.pairwise_sq_dists(X)
        ref = accel._np_pairwise_sq_dists(X)
        np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-15)
        assert np.array_equal(got, got.T)
        assert not np.diag(got).any()

    def test_cross_matches_reference(self, rng):
        A, B = rng.normal(size=(7, 2)), rng.normal(size=(11, 2))
        np.testing.assert_allclose(
            accel.cross_sq_dists(A, B), accel._np_cross_sq_dists(A, B), rtol=1e-13
        )

    def test_dist_power_matches_reference(self, rng):
        X = rng.normal(size=(15, 2))
        np.testing.assert_allclose(
            accel.pairwise_dist_power(X, 3.0),
            accel._np_pairwise_dist_power(X, 3.0),
            rtol=1e-12,
        )

    def test_one_dim_input_promoted(self):
        D = accel.pairwise_dist_power(np.array([0.0, 1.0, 3.0]), 1.0)
        np.testing.assert_allclose(D, [[0, 1, 3], [1, 0, 2], [3, 2, 0]])


@pytest.mark.skipif(not accel.using_numba(), reason="numba not active in this env")
def test_env_flag_selects_numpy_fallback():
    code = (
        "from flatgp import accel\n"
        "import numpy as np\n"
        "assert not accel.using_numba()\n"
        "D = accel.pairwise_dist_power(np.array([0.0, 2.0]), 3.0)\n"
        "assert D[0, 1] == 8.0\n"
        "print('fallback-ok')\n"
    )
    env = dict(os.environ, FLATGP_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    assert "fallback-ok" in out.stdout
