"""Subarray-partitioned XL-MIMO layout and non-stationary per-user channels.

User k's channel to subarray s is an ``N*N_k x N*N_ts`` DAFT-domain matrix whose
antenna-t column block is ``w_t * B_t``: ``B_t`` is an AFDM link matrix built from
the user's delay-Doppler profile with fresh per-antenna gains, and
``w = sqrt(N_ts) * Theta^(1/2) z`` carries the spatial correlation and the
visibility region, ``Theta = D^(1/2) R D^(1/2)``.

Channels are kept in factored form (path matrices, gains, weights) so that
products with precoders never need the dense blocks; :meth:`XlChannel.block`
materializes them on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .afdm import AfdmParams
from .channel import gen_paths, path_matrices
from .seeding import generator


@dataclass(frozen=True)
class SubarrayLayout:
    n_tx: int
    n_sub: int
    n_users: int
    n_rx_per_user: int = 1

    def __post_init__(self):
        for name in ("n_tx", "n_sub", "n_users", "n_rx_per_user"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.n_tx % self.n_sub:
            raise ValueError(f"n_sub = {self.n_sub} does not divide n_tx = {self.n_tx}")
        if self.n_users % self.n_sub:
            raise ValueError(f"n_sub = {self.n_sub} does not divide n_users = {self.n_users}")
        if self.users_per_sub > self.ants_per_sub:
            raise ValueError(
                f"{self.users_per_sub} users per subarray exceed {self.ants_per_sub} antennas per subarray"
            )

    @property
    def ants_per_sub(self) -> int:
        return self.n_tx // self.n_sub

    @property
    def users_per_sub(self) -> int:
        return self.n_users // self.n_sub

    def serving_subarray(self, k: int) -> int:
        if not 0 <= k < self.n_users:
            raise IndexError(f"user {k} out of range for {self.n_users} users")
        return k // self.users_per_sub

    def users_of(self, s: int) -> range:
        if not 0 <= s < self.n_sub:
            raise IndexError(f"subarray {s} out of range for {self.n_sub} subarrays")
        return range(s * self.users_per_sub, (s + 1) * self.users_per_sub)


@dataclass(frozen=True)
class CorrelationSpec:
    corr_coef: float = 0.0
    visibility_fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.corr_coef < 1.0:
            raise ValueError(f"corr_coef must lie in [0, 1), got {self.corr_coef}")
        if not 0.0 < self.visibility_fraction <= 1.0:
            raise ValueError(f"visibility_fraction must lie in (0, 1], got {self.visibility_fraction}")


@dataclass(frozen=True)
class PathConfig:
    n_paths: int = 4
    l_max: int = 4
    alpha_max: int = 2
    fractional: bool = True


def exp_correlation(coef: float, n: int) -> np.ndarray:
    idx = np.arange(n)
    return coef ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def visibility_mask(spec: CorrelationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Diagonal 0/1 matrix with a contiguous (wrapping) run of visible antennas."""
    if n < 1:
        raise ValueError("n must be positive")
    count = min(n, math.ceil(spec.visibility_fraction * n - 1e-9))
    offset = int(rng.integers(n))
    diag = np.zeros(n)
    diag[(offset + np.arange(count)) % n] = 1.0
    return np.diag(diag)


def corr_matrix(spec: CorrelationSpec, n: int, rng: np.random.Generator):
    """Return (R, D, Theta) with Theta = D^(1/2) R D^(1/2)."""
    r = exp_correlation(spec.corr_coef, n)
    d = visibility_mask(spec, n, rng)
    sd = np.sqrt(np.diag(d))
    theta = sd[:, None] * r * sd[None, :]
    return r, d, theta


def psd_sqrt(theta: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    All-zero rows (invisible antennas) stay exactly zero: the root is taken on
    the support only.
    """
    theta = np.asarray(theta)
    out = np.zeros(theta.shape, dtype=np.result_type(theta.dtype, np.float64))
    support = np.flatnonzero(np.any(theta != 0, axis=1))
    if support.size == 0:
        return out
    sub = theta[np.ix_(support, support)]
    vals, vecs = np.linalg.eigh(sub)
    if vals.min() < -1e-12 * max(1.0, abs(vals.max())):
        raise ValueError(f"matrix is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    out[np.ix_(support, support)] = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return out


def antenna_weights(theta: np.ndarray, z: np.ndarray) -> np.ndarray:
    """w = sqrt(N_ts) Theta^(1/2) z."""
    n = theta.shape[0]
    return math.sqrt(n) * psd_sqrt(theta) @ z


@dataclass(frozen=True, eq=False)
class XlChannel:
    """Per-(user, subarray) DAFT-domain channels in factored form.

    path_mats[k]   (P, N, N) unit-gain path matrices of user k
    gains          (K, N_k, S, N_ts, P) per-antenna path gains
    weights        (K, N_k, S, N_ts) correlated antenna weights w_t
    """

    layout: SubarrayLayout
    afdm: AfdmParams
    path_mats: tuple = field(repr=False)
    gains: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        lay = self.layout
        k, nk, s, nts = lay.n_users, lay.n_rx_per_user, lay.n_sub, lay.ants_per_sub
        if len(self.path_mats) != k:
            raise ValueError(f"need path matrices for {k} users, got {len(self.path_mats)}")
        if self.weights.shape != (k, nk, s, nts):
            raise ValueError(f"weights shape {self.weights.shape} != {(k, nk, s, nts)}")
        if self.gains.shape[:4] != (k, nk, s, nts):
            raise ValueError(f"gains shape {self.gains.shape} inconsistent with layout")

    @property
    def n(self) -> int:
        return self.afdm.n_carriers

    @property
    def rows_per_user(self) -> int:
        return self.n * self.layout.n_rx_per_user

    @property
    def cols_per_sub(self) -> int:
        return self.n * self.layout.ants_per_sub

    def _coef(self, k: int, s: int) -> np.ndarray:
        # (N_k, N_ts, P): w_t * g_{t,i}
        return self.weights[k, :, s, :, None] * self.gains[k, :, s]

    def block(self, k: int, s: int) -> np.ndarray:
        """Dense channel of user k from subarray s, shape (N*N_k, N*N_ts)."""
        n, nts = self.n, self.layout.ants_per_sub
        coef = self._coef(k, s)
        pm = self.path_mats[k]
        # [a, m, t, n'] = sum_i coef[a, t, i] P_i[m, n']
        b = np.einsum("ati,imn->amtn", coef, pm)
        return b.reshape(self.rows_per_user, nts * n)

    def user_channel(self, k: int) -> np.ndarray:
        """Full channel of user k across all subarrays (column blocks in subarray order)."""
        return np.hstack([self.block(k, s) for s in range(self.layout.n_sub)])

    def subarray_matrix(self, s: int, users=None) -> np.ndarray:
        """Rows of the listed users (default: those served by s) for subarray s."""
        if users is not None:
            return np.vstack([self.block(k, s) for k in users])
        key = ("serving", s)
        if key not in self._cache:
            m = np.vstack([self.block(k, s) for k in self.layout.users_of(s)])
            m.setflags(write=False)
            self._cache[key] = m
        return self._cache[key]

    def serving_gram(self, s: int) -> np.ndarray:
        """H^H H for H = subarray_matrix(s)^H, i.e. the Gram matrix of the served rows."""
        key = ("gram", s)
        if key not in self._cache:
            rows = self.subarray_matrix(s)
            g = rows @ rows.conj().T
            g.setflags(write=False)
            self._cache[key] = g
        return self._cache[key]

    def apply(self, k: int, s: int, x: np.ndarray) -> np.ndarray:
        """block(k, s) @ x without forming the block; x has N*N_ts rows."""
        n, nts = self.n, self.layout.ants_per_sub
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[0] != nts * n:
            raise ValueError(f"x has {x.shape[0]} rows, expected {nts * n}")
        vec = x.ndim == 1
        xr = x.reshape(nts, n * (1 if vec else x.shape[1]))
        coef = self._coef(k, s)
        pm = self.path_mats[k]
        p = pm.shape[0]
        out = []
        for a in range(self.layout.n_rx_per_user):
            # combine antennas per path, then one N x N product per path
            z = (coef[a].T @ xr).reshape(p, n, -1)
            out.append(np.matmul(pm, z).sum(axis=0))
        y = np.vstack(out)
        return y[:, 0] if vec else y


def gen_xl_channel(
    layout: SubarrayLayout,
    afdm: AfdmParams,
    spec: CorrelationSpec,
    path_cfg: PathConfig,
    seed,
) -> XlChannel:
    """Draw a non-stationary XL-MIMO channel.

    Every random quantity comes from a substream keyed by (user, ...) or
    (user, subarray, rx antenna, ...), so the draws do not depend on ``afdm``:
    the same seed gives the same physical channel for AFDM and for OFDM.
    """
    n = afdm.n_carriers
    if path_cfg.l_max >= n:
        raise ValueError(f"l_max = {path_cfg.l_max} must be smaller than N = {n}")
    k_users, nk, n_sub, nts = layout.n_users, layout.n_rx_per_user, layout.n_sub, layout.ants_per_sub
    p = path_cfg.n_paths
    path_mats = []
    gains = np.empty((k_users, nk, n_sub, nts, p), dtype=np.complex128)
    weights = np.empty((k_users, nk, n_sub, nts), dtype=np.complex128)
    for k in range(k_users):
        profile = gen_paths(generator(seed, "paths", k), p, path_cfg.l_max, path_cfg.alpha_max, path_cfg.fractional)
        path_mats.append(path_matrices(afdm, profile))
        for s in range(n_sub):
            _, _, theta = corr_matrix(spec, nts, generator(seed, "visibility", k, s))
            root = psd_sqrt(theta)
            for a in range(nk):
                rng = generator(seed, "small-scale", k, s, a)
                z = (rng.standard_normal(nts) + 1j * rng.standard_normal(nts)) * math.sqrt(0.5 / nts)
                weights[k, a, s] = math.sqrt(nts) * root @ z
                gains[k, a, s] = (
                    rng.standard_normal((nts, p)) + 1j * rng.standard_normal((nts, p))
                ) * math.sqrt(0.5 / p)
    return XlChannel(layout, afdm, tuple(path_mats), gains, weights)


@dataclass(frozen=True)
class PowerRecord:
    """Per-sample received powers of one user."""

    desired: float
    intra: float
    inter: float
    noise: float

    @property
    def total(self) -> float:
        return self.desired + self.intra + self.inter + self.noise


def effective_products(channel: XlChannel, precoders) -> list[list[np.ndarray]]:
    """E[k][s] = block(k, s) @ precoders[s] for all users and subarrays."""
    lay = channel.layout
    if len(precoders) != lay.n_sub:
        raise ValueError(f"need {lay.n_sub} precoders, got {len(precoders)}")
    return [[channel.apply(k, s, precoders[s]) for s in range(lay.n_sub)] for k in range(lay.n_users)]


def received_decomposition(channel: XlChannel, precoders, noise_var: float, symbol_power: float = 1.0):
    """Desired / intra-subarray / inter-subarray / noise power for every user.

    ``precoders[s]`` has one column per stream of the users served by s, grouped
    user by user (N*N_k columns each). Powers are per received DAFT-domain sample:
    desired is the mean squared diagonal of the user's own effective block (one
    scalar gain per stream), intra is every other contribution from the serving
    subarray (other users and the user's own cross-stream leakage), inter is
    everything arriving from the other subarrays.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    lay = channel.layout
    rows = channel.rows_per_user
    out = []
    prods = effective_products(channel, precoders)
    for k in range(lay.n_users):
        j = lay.serving_subarray(k)
        local = k - j * lay.users_per_sub
        e_j = prods[k][j]
        own = e_j[:, local * rows : (local + 1) * rows]
        diag_pow = float(np.sum(np.abs(np.diagonal(own)) ** 2))
        desired = diag_pow
        intra = float(np.sum(np.abs(e_j) ** 2)) - diag_pow
        inter = sum(float(np.sum(np.abs(prods[k][s]) ** 2)) for s in range(lay.n_sub) if s != j)
        out.append(
            PowerRecord(
                desired=symbol_power * desired / rows,
                intra=symbol_power * max(intra, 0.0) / rows,
                inter=symbol_power * inter / rows,
                noise=float(noise_var),
            )
        )
    return out
