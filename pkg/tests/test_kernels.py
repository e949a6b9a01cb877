import subprocess
import sys

import numpy as np
import pytest

from cardiagent import kernels
from cardiagent.kernels import numpy_impl


def _have_numba():
    try:
        from cardiagent.kernels import numba_impl  # noqa: F401
        return True
    except ImportError:
        return False


class TestDirectedMinDists:
    def test_numpy_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        src = rng.random((40, 3)) * 20
        dst = rng.random((55, 3)) * 20
        got = numpy_impl.directed_min_dists(src, dst)
        brute = np.sqrt(((src[:, None] - dst[None]) ** 2).sum(-1)).min(1)
        assert np.allclose(got, brute, atol=1e-12)

    @pytest.mark.skipif(not _have_numba(), reason="numba unavailable")
    def test_backend_parity(self):
        from cardiagent.kernels import numba_impl
        rng = np.random.default_rng(1)
        src = rng.random((30, 3)) * 10
        dst = rng.random((25, 3)) * 10
        a = numpy_impl.directed_min_dists(src, dst)
        b = numba_impl.directed_min_dists(src, dst)
        assert np.allclose(a, b, atol=1e-12)

    def test_chunking_consistent(self):
        rng = np.random.default_rng(2)
        src = rng.random((3000, 3))
        dst = rng.random((1500, 3))
        got = numpy_impl.directed_min_dists(src, dst)
        sub = numpy_impl.directed_min_dists(src[:10], dst)
        assert np.allclose(got[:10], sub)


class TestFirstRayRun:
    def _ring(self, size=61, inner=10.0, outer=18.0):
        c = (size - 1) / 2.0
        rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
        r = np.hypot(rows - c, cols - c)
        return (r >= inner) & (r < outer), c

    def test_annulus_thickness(self):
        mask, c = self._ring()
        angles = np.deg2rad(np.arange(0.0, 360.0, 15.0))
        runs = numpy_impl.first_ray_run(mask, c, c, 1.0, 1.0, angles, 0.2, 100.0)
        thickness = runs[:, 1] - runs[:, 0]
        assert np.all(runs[:, 0] >= 0)
        # voxelized circle boundary is up to one voxel off on diagonals
        assert np.all(np.abs(thickness - 8.0) <= 1.0)
        assert np.mean(thickness) == pytest.approx(8.0, abs=0.2)

    def test_miss_returns_negative(self):
        mask = np.zeros((21, 21), dtype=bool)
        mask[10, 15:18] = True  # only along +col
        angles = np.array([0.0, np.pi])
        runs = numpy_impl.first_ray_run(mask, 10.0, 10.0, 1.0, 1.0, angles, 0.25, 40.0)
        assert runs[0, 0] >= 0
        assert runs[1, 0] == -1.0 and runs[1, 1] == -1.0

    @pytest.mark.skipif(not _have_numba(), reason="numba unavailable")
    def test_backend_parity(self):
        from cardiagent.kernels import numba_impl
        mask, c = self._ring()
        angles = np.deg2rad(np.arange(0.0, 360.0, 1.0))
        a = numpy_impl.first_ray_run(mask, c, c, 1.0, 1.3, angles, 0.2, 120.0)
        b = numba_impl.first_ray_run(mask, c, c, 1.0, 1.3, angles, 0.2, 120.0)
        assert np.array_equal(a, b)


class TestBackendSelection:
    def test_active_backend_named(self):
        assert kernels.BACKEND in ("numba", "numpy")

    def test_env_flag_forces_numpy(self):
        code = ("import os; os.environ['CARDIAGENT_FORCE_NUMPY']='1'; "
                "from cardiagent import kernels; print(kernels.BACKEND)")
        out = subprocess.run([sys.executable, "-c", code],
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"
