"""Discrete affine Fourier transform (DAFT) and AFDM modulation.

The DAFT matrix is ``A = L(c1)^H F^H L(c2)^H`` where ``L(c) = diag(exp(-j 2 pi c n^2))``
and ``F`` is the unitary DFT. With ``c1 = c2 = 0`` it reduces to the unitary
inverse DFT, which is how the OFDM baseline is obtained.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class AfdmParams:
    """Chirp-carrier count and the two chirp rates of the DAFT."""

    n_carriers: int
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if int(self.n_carriers) != self.n_carriers or self.n_carriers < 2:
            raise ValueError(f"n_carriers must be an integer >= 2, got {self.n_carriers}")
        if not (math.isfinite(self.c1) and math.isfinite(self.c2)):
            raise ValueError("chirp rates c1, c2 must be finite")

    @classmethod
    def ofdm(cls, n_carriers: int) -> "AfdmParams":
        return cls(n_carriers, 0.0, 0.0)

    @classmethod
    def for_doppler(cls, n_carriers: int, alpha_max: int, c2: float | None = None) -> "AfdmParams":
        """AFDM parameters with the default chirp rates for a given maximum integer Doppler."""
        if c2 is None:
            c2 = default_c2(n_carriers)
        return cls(n_carriers, default_c1(alpha_max, n_carriers), c2)

    @property
    def is_ofdm(self) -> bool:
        return self.c1 == 0.0 and self.c2 == 0.0


class Domain(enum.Enum):
    DAFT = "daft"
    TIME = "time"


@dataclass(frozen=True)
class DaftFrame:
    """One length-N frame, tagged with the domain it lives in."""

    values: np.ndarray
    domain: Domain

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 1:
            raise ValueError("frame values must be a vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


def default_c1(alpha_max: int, n_carriers: int) -> float:
    """Smallest chirp rate that keeps integer-Doppler paths apart: (2*alpha_max + 1) / (2N)."""
    if alpha_max < 0 or int(alpha_max) != alpha_max:
        raise ValueError(f"alpha_max must be a non-negative integer, got {alpha_max}")
    if 2 * alpha_max + 1 > n_carriers:
        raise ValueError(f"2*alpha_max + 1 = {2 * alpha_max + 1} exceeds N = {n_carriers}")
    return (2 * alpha_max + 1) / (2 * n_carriers)


def default_c2(n_carriers: int) -> float:
    return 1.0 / (2.0 * n_carriers**2 * math.pi)


def chirp_diagonal(c: float, n: int) -> np.ndarray:
    """Diagonal of L(c): exp(-j 2 pi c k^2) for k = 0..n-1."""
    k = np.arange(n, dtype=np.float64)
    # only c*k^2 mod 1 matters; reducing first keeps the phase accurate for large n
    phase = np.mod(c * k * k, 1.0)
    return np.exp(-2j * np.pi * phase)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix with entries exp(-j 2 pi m k / n) / sqrt(n)."""
    k = np.arange(n)
    mk = np.mod(np.outer(k, k), n)
    return np.exp(-2j * np.pi * mk / n) / math.sqrt(n)


@lru_cache(maxsize=32)
def _daft_matrix_cached(n: int, c1: float, c2: float) -> np.ndarray:
    l1h = np.conj(chirp_diagonal(c1, n))
    l2h = np.conj(chirp_diagonal(c2, n))
    a = l1h[:, None] * dft_matrix(n).conj().T * l2h[None, :]
    a.setflags(write=False)
    return a


def daft_matrix(params: AfdmParams) -> np.ndarray:
    """The N x N modulation matrix A (read-only, cached per parameter set)."""
    return _daft_matrix_cached(params.n_carriers, float(params.c1), float(params.c2))


def _check_frame(params: AfdmParams, frame: DaftFrame, domain: Domain) -> None:
    if frame.domain is not domain:
        raise ValueError(f"expected a {domain.value}-domain frame, got {frame.domain.value}")
    if len(frame) != params.n_carriers:
        raise ValueError(f"frame length {len(frame)} does not match N = {params.n_carriers}")


def modulate(params: AfdmParams, symbols: DaftFrame) -> DaftFrame:
    """DAFT-domain symbols to time-domain samples, s = A x."""
    _check_frame(params, symbols, Domain.DAFT)
    return DaftFrame(daft_matrix(params) @ symbols.values, Domain.TIME)


def demodulate(params: AfdmParams, samples: DaftFrame) -> DaftFrame:
    """Time-domain samples back to the DAFT domain, x = A^H s."""
    _check_frame(params, samples, Domain.TIME)
    return DaftFrame(daft_matrix(params).conj().T @ samples.values, Domain.DAFT)


def cpp_phase(params: AfdmParams, n: np.ndarray | int) -> np.ndarray:
    """Phase applied to s[n + N] when it is wrapped to the prefix position n < 0."""
    big_n = params.n_carriers
    n = np.asarray(n, dtype=np.float64)
    phase = np.mod(params.c1 * (big_n * big_n + 2.0 * big_n * n), 1.0)
    return np.exp(-2j * np.pi * phase)


def cpp_extend(params: AfdmParams, samples: DaftFrame, l_max: int) -> np.ndarray:
    """Prepend an l_max-sample chirp-periodic prefix.

    Output index i holds s[i - l_max]; prefix samples follow
    s[n] = s[n + N] * exp(-j 2 pi c1 (N^2 + 2 N n)) for n = -l_max..-1.
    With c1 = 0 this is an ordinary cyclic prefix.
    """
    _check_frame(params, samples, Domain.TIME)
    big_n = params.n_carriers
    if l_max < 0 or l_max >= big_n:
        raise ValueError(f"l_max must satisfy 0 <= l_max < N = {big_n}, got {l_max}")
    s = samples.values
    if l_max == 0:
        return s.copy()
    n = np.arange(-l_max, 0)
    prefix = s[n + big_n] * cpp_phase(params, n)
    return np.concatenate([prefix, s])
