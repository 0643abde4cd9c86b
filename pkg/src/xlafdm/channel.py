"""Delay-Doppler paths and their DAFT-domain effective channel.

A path with integer delay ``l``, Doppler ``v = alpha + beta`` and gain ``h`` acts on
the time-domain samples as ``r[n] = h exp(-j 2 pi v n / N) s[n - l]`` with the
chirp-periodic prefix supplying ``s[n - l]`` for ``n < l``. In the DAFT domain this
becomes the closed-form matrix built by :func:`path_matrix`;
:func:`time_domain_oracle` builds the same matrix the slow way for cross-checking.

Two conventions were pinned against the oracle:

* the c2 term of the chirp phase is ``2 pi c2 (m'^2 - m^2)``, i.e. it carries the
  same factor N as the c1 term once written over ``2 pi / N``;
* the Doppler phase has a negative sign so that the path lands on DAFT index
  ``ind = (alpha + 2 N c1 l) mod N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .afdm import AfdmParams, cpp_phase, daft_matrix

SINGULARITY_TOL = 1e-9


@dataclass(frozen=True)
class DelayDopplerPath:
    delay: int
    doppler_int: int
    doppler_frac: float = 0.0
    gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if int(self.delay) != self.delay or self.delay < 0:
            raise ValueError(f"delay must be a non-negative integer, got {self.delay}")
        if int(self.doppler_int) != self.doppler_int:
            raise ValueError(f"doppler_int must be an integer, got {self.doppler_int}")
        if not -0.5 < self.doppler_frac <= 0.5:
            raise ValueError(f"doppler_frac must lie in (-1/2, 1/2], got {self.doppler_frac}")

    @property
    def doppler(self) -> float:
        return self.doppler_int + self.doppler_frac


@dataclass(frozen=True)
class PathSet:
    paths: tuple[DelayDopplerPath, ...]
    l_max: int
    v_max: float

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ValueError("a PathSet needs at least one path")
        for p in self.paths:
            if p.delay > self.l_max:
                raise ValueError(f"path delay {p.delay} exceeds l_max = {self.l_max}")
            if abs(p.doppler) > self.v_max + 1e-12:
                raise ValueError(f"path Doppler {p.doppler} exceeds v_max = {self.v_max}")

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=np.complex128)


def chirp_phase(params: AfdmParams, l, m, m_prime):
    """Unit-modulus phase exp(j 2pi/N (N c1 l^2 - m' l + N c2 (m'^2 - m^2))).

    Broadcasts over array arguments.
    """
    big_n = params.n_carriers
    l = np.asarray(l, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    mp = np.asarray(m_prime, dtype=np.float64)
    # each term reduced mod 1 separately; the products can be large
    phase = (
        np.mod(params.c1 * l * l, 1.0)
        - np.mod(mp * l, big_n) / big_n
        + np.mod(params.c2 * (mp * mp - m * m), 1.0)
    )
    return np.exp(2j * np.pi * phase)


def doppler_index(params: AfdmParams, path: DelayDopplerPath) -> float:
    """ind = (alpha + 2 N c1 l) mod N; real-valued when 2 N c1 l is not an integer."""
    big_n = params.n_carriers
    return math.fmod(path.doppler_int + 2.0 * big_n * params.c1 * path.delay, big_n) % big_n


def dirichlet_sum(theta, n: int):
    """sum_{k=0}^{n-1} exp(-j 2 pi k theta / n) = (e^{-j2pi theta} - 1) / (e^{-j2pi theta/n} - 1).

    Evaluated as sin(pi theta) / sin(pi theta / n) * exp(-j pi theta (n-1)/n) after
    reducing theta into [-n/2, n/2); integer theta gives exactly 0, or n at the
    removable singularity theta = 0 (mod n).
    """
    theta = np.asarray(theta, dtype=np.float64)
    t = np.mod(theta + n / 2.0, n) - n / 2.0
    k = np.rint(t)
    f = t - k
    near_int = np.abs(f) < SINGULARITY_TOL
    at_zero = near_int & (k == 0)
    safe_t = np.where(near_int, 0.5, t)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    ratio = sign * np.sin(np.pi * np.where(near_int, 0.5, f)) / np.sin(np.pi * safe_t / n)
    value = ratio * np.exp(-1j * np.pi * safe_t * (n - 1) / n)
    value = np.where(near_int, 0.0, value)
    value = np.where(at_zero, float(n), value)
    return value.astype(np.complex128)


def spread_kernel(params: AfdmParams, path: DelayDopplerPath, m, m_prime):
    """Doppler-spread kernel with theta = m + ind - m' + beta."""
    theta = (
        np.asarray(m, dtype=np.float64)
        - np.asarray(m_prime, dtype=np.float64)
        + doppler_index(params, path)
        + path.doppler_frac
    )
    return dirichlet_sum(theta, params.n_carriers)


def path_matrix(params: AfdmParams, path: DelayDopplerPath) -> np.ndarray:
    """N x N DAFT-domain response of one unit-gain path.

    Entry [m, m'] = chirp_phase(l, m, m') * spread_kernel(m, m') / N.
    """
    big_n = params.n_carriers
    idx = np.arange(big_n)
    m, mp = idx[:, None], idx[None, :]
    return chirp_phase(params, path.delay, m, mp) * spread_kernel(params, path, m, mp) / big_n


def path_matrices(params: AfdmParams, paths: PathSet | Sequence[DelayDopplerPath]) -> np.ndarray:
    """Stack of path matrices, shape (P, N, N)."""
    return np.stack([path_matrix(params, p) for p in paths])


def _gains_for(paths, gains) -> np.ndarray:
    if gains is None:
        return np.array([p.gain for p in paths], dtype=np.complex128)
    gains = np.asarray(gains, dtype=np.complex128).ravel()
    if gains.shape[0] != len(paths):
        raise ValueError(f"got {gains.shape[0]} gains for {len(paths)} paths")
    return gains


def link_matrix(params: AfdmParams, paths: PathSet, gains=None) -> np.ndarray:
    """Sum of gain-weighted path matrices for one antenna pair.

    ``gains`` overrides the gains stored on the paths.
    """
    g = _gains_for(paths, gains)
    return np.tensordot(g, path_matrices(params, paths), axes=1)


def time_domain_matrix(params: AfdmParams, paths: PathSet | Sequence[DelayDopplerPath], gains=None) -> np.ndarray:
    """Linear time-varying channel acting on one CPP-protected frame (prefix removed)."""
    big_n = params.n_carriers
    g = _gains_for(paths, gains)
    h_t = np.zeros((big_n, big_n), dtype=np.complex128)
    n = np.arange(big_n)
    for gain, p in zip(g, paths):
        if p.delay >= big_n:
            raise ValueError(f"delay {p.delay} must be smaller than N = {big_n}")
        value = gain * np.exp(-2j * np.pi * p.doppler * n / big_n)
        wrapped = n < p.delay
        value[wrapped] *= cpp_phase(params, n[wrapped] - p.delay)
        h_t[n, (n - p.delay) % big_n] += value
    return h_t


def time_domain_oracle(params: AfdmParams, paths: PathSet | Sequence[DelayDopplerPath], gains=None) -> np.ndarray:
    """A^H H_t A, built sample-by-sample in the time domain."""
    big_n = params.n_carriers
    if len(paths) == 0:
        return np.zeros((big_n, big_n), dtype=np.complex128)
    a = daft_matrix(params)
    return a.conj().T @ time_domain_matrix(params, paths, gains) @ a


@dataclass(frozen=True)
class BlockChannel:
    """Grid of N x N DAFT-domain blocks, ``blocks[r, t]`` linking transmit t to receive r."""

    blocks: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=np.complex128)
        if b.ndim != 4 or b.shape[2] != b.shape[3]:
            raise ValueError(f"blocks must have shape (Nr, Nt, N, N), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def dims(self) -> tuple[int, int, int]:
        n_r, n_t, n, _ = self.blocks.shape
        return n, n_r, n_t

    def flatten(self) -> np.ndarray:
        n, n_r, n_t = self.dims
        return self.blocks.transpose(0, 2, 1, 3).reshape(n_r * n, n_t * n)


def assemble_mimo(links) -> BlockChannel:
    """Arrange a rectangular grid (list of rows) of N x N link matrices into a BlockChannel."""
    rows = [list(r) for r in links]
    if not rows or not rows[0]:
        raise ValueError("empty link grid")
    n_t = len(rows[0])
    if any(len(r) != n_t for r in rows):
        raise ValueError("ragged link grid")
    shapes = {np.shape(b) for r in rows for b in r}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent block shapes {sorted(shapes)}")
    return BlockChannel(np.array(rows, dtype=np.complex128))


def apply_channel(ch: BlockChannel, x, noise) -> np.ndarray:
    """y = H x + w for the stacked per-antenna DAFT-domain vectors."""
    n, n_r, n_t = ch.dims
    x = np.asarray(x, dtype=np.complex128)
    noise = np.asarray(noise, dtype=np.complex128)
    if x.shape[0] != n * n_t:
        raise ValueError(f"x has length {x.shape[0]}, expected {n * n_t}")
    if noise.shape[0] != n * n_r:
        raise ValueError(f"noise has length {noise.shape[0]}, expected {n * n_r}")
    y = np.einsum("rtmk,tk...->rm...", ch.blocks, x.reshape((n_t, n) + x.shape[1:]))
    return y.reshape((n_r * n,) + x.shape[1:]) + noise


def gen_paths(
    rng: np.random.Generator,
    n_paths: int,
    l_max: int,
    alpha_max: int,
    fractional: bool = False,
) -> PathSet:
    """Random delay-Doppler profile with unit total average power.

    Path 0 has zero delay; the rest have delays uniform on {0..l_max}. Integer
    Doppler is uniform on [-alpha_max, alpha_max], the fractional part uniform on
    (-1/2, 1/2] when ``fractional`` is set. Gains are CN(0, 1/P).
    """
    if n_paths < 1:
        raise ValueError(f"need at least one path, got {n_paths}")
    if l_max < 0 or alpha_max < 0:
        raise ValueError("l_max and alpha_max must be non-negative")
    delays = rng.integers(0, l_max + 1, size=n_paths)
    delays[0] = 0
    alphas = rng.integers(-alpha_max, alpha_max + 1, size=n_paths)
    if fractional:
        betas = 0.5 - rng.random(n_paths)
    else:
        betas = np.zeros(n_paths)
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) * math.sqrt(0.5 / n_paths)
    v_max = alpha_max + (0.5 if fractional else 0.0)
    paths = tuple(
        DelayDopplerPath(int(d), int(a), float(b), complex(g))
        for d, a, b, g in zip(delays, alphas, betas, gains)
    )
    return PathSet(paths, l_max, v_max)
