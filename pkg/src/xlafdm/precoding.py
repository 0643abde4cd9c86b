"""Linear precoders for one subarray: direct ZF/RZF and randomized Kaczmarz.

Conventions: ``H`` is ``L x K`` with one column ``h_r`` per equivalent channel
(user stream), so a precoded stream reaches receiver r as ``h_r^H x``. The RZF
precoder is ``beta * H (H^H H + xi I)^-1``; xi = 0 gives ZF.

The Kaczmarz precoders solve the augmented system ``[H^H, sqrt(xi) I] [m; n'] = e_k``
row by row. Its minimum-norm solution has ``m = H (H^H H + xi I)^-1 e_k``, column
k of the unnormalized RZF precoder, so the iterate converges to it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .seeding import generator, seed_sequence


class PrecodingError(ValueError):
    pass


class RankDeficientError(PrecodingError):
    pass


class Sampling(enum.Enum):
    UNIFORM = "uniform"
    NORM_WEIGHTED_WITHOUT_REPLACEMENT = "norm_weighted_without_replacement"


class Algorithm(enum.Enum):
    ZF = "zf"
    RKA = "rka"
    SWOR_RKA = "swor_rka"


@dataclass(frozen=True)
class PrecodeConfig:
    """xi: regularization; iterations: Kaczmarz steps per column.

    ``literal_step`` switches to the step printed with the original algorithm
    listing, which drops xi from the denominator and uses n[r] unscaled. Its
    fixed point is not the RZF solution; it is kept for comparison only.
    """

    xi: float = 0.0
    iterations: int = 200
    sampling: Sampling = Sampling.UNIFORM
    power_budget: float = 1.0
    symbol_power: float = 1.0
    literal_step: bool = False

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError(f"xi must be non-negative, got {self.xi}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations}")
        if self.power_budget <= 0 or self.symbol_power <= 0:
            raise ValueError("power_budget and symbol_power must be positive")

    @property
    def step_coefficients(self) -> tuple[float, float]:
        """(gamma, delta) of eta = (e - <h, m> - gamma n[r]) / (||h||^2 + delta)."""
        if self.literal_step:
            return 1.0, 0.0
        return self.xi, self.xi


@dataclass
class PrecodeResult:
    matrix: np.ndarray
    beta: float
    flops: int
    residual_history: np.ndarray | None = field(default=None, repr=False)


@dataclass
class KaczmarzColumn:
    column: np.ndarray
    dual: np.ndarray
    rows: np.ndarray = field(repr=False)
    residual_history: np.ndarray | None = field(default=None, repr=False)


def flops_model(alg: Algorithm, n: int, s: int, k_s: int, n_ts: int, t_s: int) -> int:
    """Complex-operation counts per precoder computation.

    ZF:       N^2 S * 2 K_s^2 N_ts
    rKA:      N^2 S * N_ts T_s
    SwoR-rKA: N^2 S * (N_ts T_s + 2 N_ts K_s)
    """
    alg = Algorithm(alg)
    for name, v in (("n", n), ("s", s), ("k_s", k_s), ("n_ts", n_ts), ("t_s", t_s)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    scale = n * n * s
    if alg is Algorithm.ZF:
        return scale * 2 * k_s * k_s * n_ts
    if alg is Algorithm.RKA:
        return scale * n_ts * t_s
    return scale * (n_ts * t_s + 2 * n_ts * k_s)


def power_normalize(g_raw: np.ndarray, power_budget: float, symbol_power: float = 1.0):
    """Scale so that ||G||_F^2 * symbol_power == power_budget. Returns (G, beta)."""
    energy = float(np.sum(np.abs(g_raw) ** 2))
    if energy == 0.0:
        raise PrecodingError("cannot normalize an all-zero precoder")
    beta = float(np.sqrt(power_budget / (symbol_power * energy)))
    return beta * g_raw, beta


def _as_channel(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError(f"channel must be a matrix, got shape {h.shape}")
    return h


def rzf_solve(h: np.ndarray, xi: float, gram: np.ndarray | None = None) -> np.ndarray:
    """Unnormalized H (H^H H + xi I)^-1 via a Cholesky solve.

    ``gram`` may supply a precomputed H^H H.
    """
    h = _as_channel(h)
    k = h.shape[1]
    if gram is None:
        gram = h.conj().T @ h
    if xi:
        gram = gram + xi * np.eye(k)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(f"normal matrix is singular (xi = {xi})") from exc
    d = np.abs(np.diagonal(factor[0]))
    if d.min() <= 1e-7 * d.max():
        raise RankDeficientError(f"normal matrix is numerically singular (xi = {xi})")
    return h @ scipy.linalg.cho_solve(factor, np.eye(k, dtype=np.complex128), check_finite=False)


def rzf_precode(h, cfg: PrecodeConfig, gram: np.ndarray | None = None) -> PrecodeResult:
    h = _as_channel(h)
    g, beta = power_normalize(rzf_solve(h, cfg.xi, gram), cfg.power_budget, cfg.symbol_power)
    rows, cols = h.shape
    return PrecodeResult(g, beta, flops_model(Algorithm.ZF, 1, 1, cols, rows, 1))


def _row_norms(h: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(h) ** 2, axis=0)


def _valid_rows(norms: np.ndarray) -> np.ndarray:
    valid = np.flatnonzero(norms > 0)
    if valid.size == 0:
        raise PrecodingError("every channel row is zero")
    return valid


def uniform_rows(rng: np.random.Generator, norms: np.ndarray, steps: int) -> np.ndarray:
    """Rows drawn uniformly, with replacement, among the nonzero ones."""
    valid = _valid_rows(norms)
    return valid[rng.integers(0, valid.size, size=steps)].astype(np.int64)


def swor_rows(rng: np.random.Generator, norms: np.ndarray, steps: int, xi: float) -> np.ndarray:
    """Sweeps of norm-weighted sampling without replacement.

    Each sweep draws every nonzero row once, in an order sampled with
    probability proportional to ||h_r||^2 + xi; the last sweep is truncated.
    """
    valid = _valid_rows(norms)
    weights = norms[valid] + xi
    p = weights / weights.sum()
    out = []
    total = 0
    while total < steps:
        sweep = rng.choice(valid, size=valid.size, replace=False, p=p)
        out.append(sweep)
        total += sweep.size
    return np.concatenate(out)[:steps].astype(np.int64)


def draw_rows(rng: np.random.Generator, norms: np.ndarray, cfg: PrecodeConfig) -> np.ndarray:
    if cfg.sampling is Sampling.UNIFORM:
        return uniform_rows(rng, norms, cfg.iterations)
    return swor_rows(rng, norms, cfg.iterations, cfg.xi)


def rka_precode(
    h,
    k: int,
    cfg: PrecodeConfig,
    rng: np.random.Generator,
    *,
    rows=None,
    reference: np.ndarray | None = None,
) -> KaczmarzColumn:
    """Unnormalized column k of the RZF precoder by randomized Kaczmarz.

    State m (length L) and n (length K) start at zero; each step picks a row r
    and applies the regularized projection. ``rows`` overrides the random row
    sequence; ``reference`` records ||m_t - reference|| after every step.
    """
    h = _as_channel(h)
    n_cols = h.shape[1]
    if not 0 <= k < n_cols:
        raise IndexError(f"target {k} out of range for {n_cols} users")
    norms = _row_norms(h)
    if rows is None:
        rows = draw_rows(rng, norms, cfg)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= n_cols):
        raise IndexError("row index out of range")
    gamma, delta = cfg.step_coefficients
    hrows = np.ascontiguousarray(h.T)
    m, n, hist = kernels.kaczmarz_primal(hrows, rows, k, gamma, delta, reference)
    return KaczmarzColumn(m, n, rows, hist)


def swor_rka_precode(h, k: int, cfg: PrecodeConfig, rng: np.random.Generator, **kw) -> KaczmarzColumn:
    """Kaczmarz column with norm-weighted sampling without replacement per sweep."""
    cfg = PrecodeConfig(
        xi=cfg.xi,
        iterations=cfg.iterations,
        sampling=Sampling.NORM_WEIGHTED_WITHOUT_REPLACEMENT,
        power_budget=cfg.power_budget,
        symbol_power=cfg.symbol_power,
        literal_step=cfg.literal_step,
    )
    return rka_precode(h, k, cfg, rng, **kw)


def kaczmarz_matrix(h, cfg: PrecodeConfig, seed, *, form: str = "dual", gram: np.ndarray | None = None) -> PrecodeResult:
    """All K columns, each from its own substream ``(seed, column)``, then normalized.

    ``form="dual"`` tracks only the K-vector n against the Gram matrix and forms
    m = H n at the end; ``form="primal"`` runs the length-L iteration per column.
    Both follow the same row sequences. ``gram`` may supply a precomputed H^H H.
    """
    h = _as_channel(h)
    rows_l, n_cols = h.shape
    norms = np.real(np.diagonal(gram)).copy() if gram is not None else _row_norms(h)
    seqs = np.stack([draw_rows(generator(seed, c), norms, cfg) for c in range(n_cols)])
    gamma, delta = cfg.step_coefficients
    if form == "dual":
        if gram is None:
            gram = h.conj().T @ h
        n = kernels.kaczmarz_dual(gram, np.arange(n_cols, dtype=np.int64), seqs, gamma, delta)
        g_raw = h @ n.T
    elif form == "primal":
        hrows = np.ascontiguousarray(h.T)
        g_raw = np.column_stack(
            [kernels.kaczmarz_primal(hrows, seqs[c], c, gamma, delta)[0] for c in range(n_cols)]
        )
    else:
        raise ValueError(f"unknown form {form!r}")
    g, beta = power_normalize(g_raw, cfg.power_budget, cfg.symbol_power)
    alg = Algorithm.RKA if cfg.sampling is Sampling.UNIFORM else Algorithm.SWOR_RKA
    return PrecodeResult(g, beta, flops_model(alg, 1, 1, n_cols, rows_l, cfg.iterations))


def precode(alg: Algorithm, h, cfg: PrecodeConfig, seed=0, gram: np.ndarray | None = None) -> PrecodeResult:
    """Dispatch: ZF ignores cfg.xi and uses xi = 0; the Kaczmarz variants use cfg.xi."""
    alg = Algorithm(alg)
    if alg is Algorithm.ZF:
        return rzf_precode(h, PrecodeConfig(0.0, cfg.iterations, cfg.sampling, cfg.power_budget, cfg.symbol_power), gram)
    sampling = Sampling.UNIFORM if alg is Algorithm.RKA else Sampling.NORM_WEIGHTED_WITHOUT_REPLACEMENT
    cfg = PrecodeConfig(cfg.xi, cfg.iterations, sampling, cfg.power_budget, cfg.symbol_power, cfg.literal_step)
    return kaczmarz_matrix(h, cfg, seed, gram=gram)


def precode_subarrays(channel, alg: Algorithm, cfg: PrecodeConfig, seed=0) -> list[PrecodeResult]:
    """One precoder per subarray, each from the rows of the users that subarray serves."""
    gram = getattr(channel, "serving_gram", None)
    return [
        precode(alg, channel.subarray_matrix(s).conj().T, cfg, seed_sequence(seed, s), None if gram is None else gram(s))
        for s in range(channel.layout.n_sub)
    ]
