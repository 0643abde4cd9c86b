import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlafdm import kernels
from xlafdm.precoding import (
    Algorithm,
    PrecodeConfig,
    PrecodingError,
    RankDeficientError,
    flops_model,
    kaczmarz_matrix,
    power_normalize,
    precode,
    rka_precode,
    rzf_precode,
    rzf_solve,
    swor_rka_precode,
    swor_rows,
)
from xlafdm.seeding import generator

# share of 100 paired trials in which SwoR-rKA ended at or below uniform rKA,
# measured on the fixture instance at T = 24 before freezing the threshold
SWOR_PILOT_SHARE = 0.97
SWOR_THRESHOLD = 0.60


def cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@pytest.fixture
def h64():
    return cgauss(generator(11, "channel"), (64, 8))


def test_config_validation():
    with pytest.raises(ValueError):
        PrecodeConfig(xi=-1)
    with pytest.raises(ValueError):
        PrecodeConfig(iterations=0)
    with pytest.raises(ValueError):
        PrecodeConfig(power_budget=0)
    assert PrecodeConfig(xi=0.3).step_coefficients == (0.3, 0.3)
    assert PrecodeConfig(xi=0.3, literal_step=True).step_coefficients == (1.0, 0.0)


def test_rzf_examples():
    res = rzf_precode(np.eye(1), PrecodeConfig())
    assert np.allclose(res.matrix, np.eye(1)) and res.beta == 1.0
    q, _ = np.linalg.qr(cgauss(np.random.default_rng(0), (16, 4)))
    res = rzf_precode(q, PrecodeConfig(power_budget=3.0))
    assert np.allclose(res.matrix, res.beta * q, atol=1e-12)


def test_rzf_matches_dense_solve(h64):
    xi = 0.1
    x = np.linalg.solve(h64.conj().T @ h64 + xi * np.eye(8), np.eye(8))
    g_ref, _ = power_normalize(h64 @ x, 1.0)
    res = rzf_precode(h64, PrecodeConfig(xi=xi))
    assert np.max(np.abs(res.matrix - g_ref)) < 1e-10


def test_rank_deficient():
    h = np.ones((8, 3), dtype=complex)
    with pytest.raises(RankDeficientError):
        rzf_precode(h, PrecodeConfig())
    assert np.all(np.isfinite(rzf_solve(h, 0.5)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_zf_property(k, seed):
    rng = np.random.default_rng(seed)
    h = cgauss(rng, (8 * k + 8, k))
    if np.linalg.cond(h) >= 100:
        return
    res = rzf_precode(h, PrecodeConfig(xi=0.0))
    assert np.linalg.norm(h.conj().T @ (res.matrix / res.beta) - np.eye(k)) < 1e-8 * math.sqrt(k)


def test_rka_identity_channel():
    h = np.eye(4, dtype=complex)
    rows = np.array([2, 0, 0, 3, 1, 0], dtype=np.int64)
    col = rka_precode(h, 0, PrecodeConfig(iterations=6), None, rows=rows, reference=np.eye(4)[:, 0])
    assert np.array_equal(col.column, np.eye(4)[:, 0])
    assert col.residual_history[0] == 1.0 and np.all(col.residual_history[1:] == 0)


def test_rka_single_step(h64):
    xi = 0.2
    r, k = 3, 3
    col = rka_precode(h64, k, PrecodeConfig(xi=xi, iterations=1), None, rows=np.array([r]))
    eta = 1.0 / (np.vdot(h64[:, r], h64[:, r]).real + xi)
    assert np.allclose(col.column, eta * h64[:, r], atol=1e-15)
    col = rka_precode(h64, 0, PrecodeConfig(xi=xi, iterations=1), None, rows=np.array([r]))
    assert np.all(col.column == 0)


def test_rka_converges(h64):
    xi = 0.1
    ref = rzf_solve(h64, xi)
    errs = []
    for seed in range(20):
        k = seed % 8
        col = rka_precode(h64, k, PrecodeConfig(xi=xi, iterations=2000), generator(12, seed))
        errs.append(np.linalg.norm(col.column - ref[:, k]) / np.linalg.norm(ref[:, k]))
    assert np.median(errs) < 1e-2


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.floats(0.0, 2.0), st.integers(0, 2**32 - 1))
def test_fixed_point_stationary(k, xi, seed):
    rng = np.random.default_rng(seed)
    h = cgauss(rng, (4 * k + 4, k))
    target = int(rng.integers(k))
    n_star = np.linalg.solve(h.conj().T @ h + xi * np.eye(k), np.eye(k)[:, target])
    m_star = h @ n_star
    # one more pass from the fixed point leaves every row's step at zero
    for r in range(k):
        eta = (float(r == target) - np.vdot(h[:, r], m_star) - xi * n_star[r]) / (np.vdot(h[:, r], h[:, r]).real + xi)
        assert abs(eta) < 1e-9


def test_swor_examples():
    h = np.eye(5, dtype=complex)
    rows = swor_rows(np.random.default_rng(0), np.ones(5), 5, 0.0)
    assert sorted(rows) == list(range(5))
    col = swor_rka_precode(h, 2, PrecodeConfig(iterations=5), np.random.default_rng(0))
    assert np.allclose(col.column, np.eye(5)[:, 2])
    h1 = cgauss(np.random.default_rng(1), (6, 1))
    cfg = PrecodeConfig(xi=0.1, iterations=7)
    a = rka_precode(h1, 0, cfg, np.random.default_rng(2))
    b = swor_rka_precode(h1, 0, cfg, np.random.default_rng(3))
    assert np.allclose(a.column, b.column)


def test_swor_sweeps_without_replacement():
    norms = np.array([1.0, 0.0, 2.0, 3.0])
    rows = swor_rows(np.random.default_rng(4), norms, 10, 0.1)
    assert 1 not in rows
    assert sorted(rows[:3]) == [0, 2, 3] and sorted(rows[3:6]) == [0, 2, 3]
    with pytest.raises(PrecodingError):
        swor_rows(np.random.default_rng(0), np.zeros(3), 4, 0.0)


def test_swor_beats_uniform(h64):
    xi, steps = 0.1, 24
    ref = rzf_solve(h64, xi)
    wins = 0
    for s in range(100):
        k = s % 8
        cfg = PrecodeConfig(xi=xi, iterations=steps)
        u = rka_precode(h64, k, cfg, generator(11, "u", s), reference=ref[:, k]).residual_history[-1]
        w = swor_rka_precode(h64, k, cfg, generator(11, "w", s), reference=ref[:, k]).residual_history[-1]
        wins += w <= u
    assert wins / 100 >= SWOR_THRESHOLD
    assert abs(wins / 100 - SWOR_PILOT_SHARE) < 0.05


def test_zero_rows_skipped():
    h = cgauss(np.random.default_rng(5), (8, 3))
    h[:, 1] = 0
    col = rka_precode(h, 0, PrecodeConfig(iterations=50), np.random.default_rng(0))
    assert 1 not in col.rows
    with pytest.raises(PrecodingError):
        rka_precode(np.zeros((4, 2)), 0, PrecodeConfig(), np.random.default_rng(0))


def test_power_normalize_examples():
    g = np.full((2, 2), 0.5 + 0j)
    out, beta = power_normalize(g, 1.0)
    assert beta == 1.0
    _, beta2 = power_normalize(2 * g, 1.0)
    assert beta2 == 0.5
    g = cgauss(np.random.default_rng(6), (8, 4))
    out, _ = power_normalize(g, 2.0)
    assert abs(np.sum(np.abs(out) ** 2) - 2.0) < 1e-12
    with pytest.raises(PrecodingError):
        power_normalize(np.zeros((2, 2)), 1.0)


def test_flops_model():
    for n, s in ((8, 1), (64, 4)):
        assert flops_model(Algorithm.RKA, n, s, 32, 64, 200) == 12800 * n * n * s
        assert flops_model(Algorithm.SWOR_RKA, n, s, 32, 64, 200) == 16896 * n * n * s
        assert flops_model(Algorithm.ZF, n, s, 1, 1, 200) == 2 * n * n * s
    with pytest.raises(ValueError):
        flops_model(Algorithm.ZF, 0, 1, 1, 1, 1)


def test_matrix_forms_agree(h64):
    cfg = PrecodeConfig(xi=0.05, iterations=150)
    dual = kaczmarz_matrix(h64, cfg, 3, form="dual")
    primal = kaczmarz_matrix(h64, cfg, 3, form="primal")
    assert np.allclose(dual.matrix, primal.matrix, atol=1e-12)
    assert dual.flops == flops_model(Algorithm.RKA, 1, 1, 8, 64, 150)
    with pytest.raises(ValueError):
        kaczmarz_matrix(h64, cfg, 3, form="other")


def test_precode_dispatch(h64):
    cfg = PrecodeConfig(xi=0.5, iterations=4000, power_budget=2.0)
    zf = precode(Algorithm.ZF, h64, cfg)
    assert np.allclose(h64.conj().T @ zf.matrix / zf.beta, np.eye(8), atol=1e-10)
    rka = precode(Algorithm.RKA, h64, cfg, seed=1)
    ref = rzf_precode(h64, cfg).matrix
    assert np.linalg.norm(rka.matrix - ref) < 1e-6 * np.linalg.norm(ref)
    assert abs(np.sum(np.abs(rka.matrix) ** 2) - 2.0) < 1e-12
    swor = precode("swor_rka", h64, cfg, seed=1)
    assert swor.flops == flops_model(Algorithm.SWOR_RKA, 1, 1, 8, 64, 4000)


def test_literal_step_differs(h64):
    cfg = PrecodeConfig(xi=0.5, iterations=3000, literal_step=True)
    lit = kaczmarz_matrix(h64, cfg, 0)
    ref = rzf_precode(h64, PrecodeConfig(xi=0.5)).matrix
    assert np.linalg.norm(lit.matrix - ref) > 1e-3 * np.linalg.norm(ref)


def test_argmax_robustness():
    from xlafdm.afdm import AfdmParams
    from xlafdm.metrics import sinr
    from xlafdm.precoding import precode_subarrays
    from xlafdm.xl_array import CorrelationSpec, PathConfig, SubarrayLayout, gen_xl_channel, received_decomposition

    ch = gen_xl_channel(SubarrayLayout(8, 1, 4), AfdmParams.for_doppler(8, 1), CorrelationSpec(0.2, 1.0), PathConfig(2, 2, 1, True), 13)
    cfg = PrecodeConfig(xi=0.1, iterations=6400, power_budget=8.0)

    def best(results):
        recs = received_decomposition(ch, [r.matrix for r in results], 0.1)
        return int(np.argmax([sinr(r) for r in recs]))

    rzf = best([rzf_precode(ch.subarray_matrix(0).conj().T, cfg)])
    hits = sum(best(precode_subarrays(ch, Algorithm.RKA, cfg, seed)) == rzf for seed in range(20))
    assert hits / 20 >= 0.95


@pytest.mark.skipif(kernels.compiled_kernels is None, reason="compiled kernels not built")
@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.integers(1, 40), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_backends_agree(k, length, xi, seed):
    rng = np.random.default_rng(seed)
    h = cgauss(rng, (length, k))
    rows = rng.integers(0, k, size=60).astype(np.int64)
    target = int(rng.integers(k))
    ref = cgauss(rng, length)
    hrows = np.ascontiguousarray(h.T)
    a = kernels.compiled_kernels.kaczmarz_primal(hrows, rows, target, xi, xi, ref)
    b = kernels.python_kernels.kaczmarz_primal(hrows, rows, target, xi, xi, ref)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-12)
    gram = h.conj().T @ h
    seqs = rng.integers(0, k, size=(k, 60)).astype(np.int64)
    targets = np.arange(k, dtype=np.int64)
    da = kernels.compiled_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi)
    db = kernels.python_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi)
    assert np.allclose(da, db, rtol=1e-10, atol=1e-12)
