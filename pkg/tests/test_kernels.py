import os
import subprocess
import sys

import numpy as np

from xlafdm import kernels
from xlafdm.seeding import generator, seed_sequence


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.compiled_kernels is not None:
        assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, XLAFDM_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from xlafdm import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_python_primal_history():
    h = np.eye(3, dtype=complex)
    rows = np.array([1, 0, 2], dtype=np.int64)
    m, n, hist = kernels.python_kernels.kaczmarz_primal(h, rows, 0, 0.0, 0.0, np.eye(3)[0])
    assert np.allclose(m, np.eye(3)[0]) and np.allclose(n, np.eye(3)[0])
    assert np.allclose(hist, [1.0, 0.0, 0.0])


def test_seed_substreams():
    a = generator(5, "x", 2).random(4)
    assert np.array_equal(a, generator(5, "x", 2).random(4))
    assert not np.array_equal(a, generator(5, "x", 3).random(4))
    nested = np.random.default_rng(seed_sequence(seed_sequence(5, "x"), 2)).random(4)
    assert np.array_equal(a, nested)
