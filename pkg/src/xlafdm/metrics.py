"""SINR, sum-rate, Gray-coded QAM, AWGN and Monte Carlo BER for the downlink.

SNR convention: ``snr = P / sigma^2`` with P the per-sample transmit power of one
subarray and sigma^2 the noise variance per received DAFT-domain sample. A
subarray therefore spends ``P * N`` per frame of N samples.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .afdm import AfdmParams
from .precoding import Algorithm, PrecodeConfig, PrecodeResult, precode_subarrays
from .seeding import generator, seed_sequence
from .xl_array import (
    CorrelationSpec,
    PathConfig,
    PowerRecord,
    SubarrayLayout,
    XlChannel,
    gen_xl_channel,
)


class Modulation(enum.Enum):
    QAM4 = 4
    QAM16 = 16
    QAM64 = 64

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.value))


@dataclass(frozen=True)
class ModulationSpec:
    order: Modulation = Modulation.QAM4
    symbol_power: float = 1.0


@dataclass(frozen=True)
class UserMetrics:
    sinr: float
    rate: float
    ber: float | None = None
    bits: int = 0

    @classmethod
    def from_sinr(cls, sinr_value: float) -> "UserMetrics":
        return cls(sinr_value, math.log2(1.0 + sinr_value))


def sinr(record: PowerRecord) -> float:
    if record.noise <= 0:
        raise ValueError(f"noise power must be positive, got {record.noise}")
    return record.desired / (record.intra + record.inter + record.noise)


def sum_rate(metrics) -> float:
    """Sum of log2(1 + SINR) over users; accepts UserMetrics or bare SINR values."""
    total = 0.0
    for m in metrics:
        s = m.sinr if isinstance(m, UserMetrics) else float(m)
        total += math.log2(1.0 + s)
    return total


def snr_to_noise_var(snr_db: float, power_budget: float) -> float:
    return power_budget / 10.0 ** (snr_db / 10.0)


# -- Gray-coded square QAM ---------------------------------------------------
# Each symbol carries 2b bits: the first b select the in-phase level, the last b
# the quadrature level. Per axis, Gray code g maps to level index i (gray(i) = g)
# and amplitude (L - 1 - 2i), so the all-zero pattern sits on the (+, +) corner:
# for QAM4, bits 00 -> (+1 + 1j) / sqrt(2).


def _gray(i):
    return i ^ (i >> 1)


def _axis_levels(bits_per_axis: int) -> int:
    return 1 << bits_per_axis


def _scale(order: Modulation) -> float:
    return math.sqrt(3.0 / (2.0 * (order.value - 1)))


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return (values[..., None] >> shifts) & 1


def qam_map(bits, spec: ModulationSpec = ModulationSpec()) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    bps = spec.order.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"{bits.size} bits is not a multiple of {bps} bits per symbol")
    half = bps // 2
    levels = _axis_levels(half)
    inverse_gray = np.empty(levels, dtype=np.int64)
    inverse_gray[_gray(np.arange(levels))] = np.arange(levels)
    groups = bits.reshape(-1, bps)
    i_idx = inverse_gray[_bits_to_int(groups[:, :half])]
    q_idx = inverse_gray[_bits_to_int(groups[:, half:])]
    amp = math.sqrt(spec.symbol_power) * _scale(spec.order)
    return amp * ((levels - 1 - 2 * i_idx) + 1j * (levels - 1 - 2 * q_idx))


def qam_demap(symbols, spec: ModulationSpec = ModulationSpec()) -> np.ndarray:
    """Minimum-distance hard decisions back to bits."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    half = spec.order.bits_per_symbol // 2
    levels = _axis_levels(half)
    amp = math.sqrt(spec.symbol_power) * _scale(spec.order)

    def axis(x):
        idx = np.clip(np.rint(((levels - 1) - x / amp) / 2.0), 0, levels - 1).astype(np.int64)
        return _int_to_bits(_gray(idx), half)

    return np.concatenate([axis(symbols.real), axis(symbols.imag)], axis=1).ravel()


def awgn(rng: np.random.Generator, length, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise, ``variance`` per element."""
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    shape = (length,) if np.isscalar(length) else tuple(length)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(variance / 2.0)


def qam4_ber_theory(ebn0_db: float) -> float:
    """Q(sqrt(2 Eb/N0))."""
    from scipy.special import erfc

    return 0.5 * float(erfc(math.sqrt(10.0 ** (ebn0_db / 10.0))))


# -- link simulation ---------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one coherence block.

    ``power_budget`` is the per-sample transmit power P of each subarray.
    ``xi`` of None means xi = 1/snr for the Kaczmarz precoders.
    """

    layout: SubarrayLayout = SubarrayLayout(64, 4, 8, 1)
    afdm: AfdmParams = AfdmParams(64)
    correlation: CorrelationSpec = CorrelationSpec()
    paths: PathConfig = PathConfig()
    precoder: Algorithm = Algorithm.ZF
    iterations: int = 200
    xi: float | None = None
    modulation: ModulationSpec = ModulationSpec()
    power_budget: float = 1.0
    frames: int = 8

    def precode_config(self, snr_db: float) -> PrecodeConfig:
        xi = 10.0 ** (-snr_db / 10.0) if self.xi is None else self.xi
        return PrecodeConfig(
            xi=xi,
            iterations=self.iterations,
            power_budget=self.power_budget * self.afdm.n_carriers,
            symbol_power=self.modulation.symbol_power,
        )


@dataclass
class BerCount:
    bit_errors: int = 0
    bits_sent: int = 0
    per_user_errors: np.ndarray | None = field(default=None, repr=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else float("nan")

    def __iadd__(self, other: "BerCount"):
        self.bit_errors += other.bit_errors
        self.bits_sent += other.bits_sent
        return self


def stream_gains(channel: XlChannel, precoders) -> list[np.ndarray]:
    """Known effective complex gain of every stream: diag(h_k^j^H F_jk)."""
    lay = channel.layout
    rows = channel.rows_per_user
    out = []
    for k in range(lay.n_users):
        j = lay.serving_subarray(k)
        local = k - j * lay.users_per_sub
        block = channel.subarray_matrix(j)[local * rows : (local + 1) * rows]
        f = precoders[j][:, local * rows : (local + 1) * rows]
        out.append(np.einsum("ij,ji->i", block, f))
    return out


def draw_bits(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    """Bits for one block, shape (K, N*N_k*frames*bits_per_symbol)."""
    lay = scenario.layout
    per_user = scenario.afdm.n_carriers * lay.n_rx_per_user * scenario.frames
    return rng.integers(0, 2, size=(lay.n_users, per_user * scenario.modulation.order.bits_per_symbol))


def transmit_block(
    channel: XlChannel,
    precoders,
    scenario: Scenario,
    bits: np.ndarray,
    unit_noise: np.ndarray,
    noise_var: float,
) -> BerCount:
    """Send ``bits`` through the precoded channel and count decision errors.

    ``unit_noise`` has unit variance per element, shape (K, N*N_k, frames); it is
    scaled by sqrt(noise_var) so noise can be shared across SNR points.
    """
    lay = channel.layout
    rows = channel.rows_per_user
    frames = scenario.frames
    spec = scenario.modulation
    symbols = [qam_map(b, spec).reshape(rows, frames) for b in bits]
    received = [np.sqrt(noise_var) * unit_noise[k] for k in range(lay.n_users)]
    for s in range(lay.n_sub):
        users = lay.users_of(s)
        x_s = precoders[s] @ np.vstack([symbols[k] for k in users])
        for k in range(lay.n_users):
            received[k] = received[k] + channel.apply(k, s, x_s)
    gains = stream_gains(channel, precoders)
    errors = np.empty(lay.n_users, dtype=np.int64)
    for k in range(lay.n_users):
        g = gains[k]
        safe = np.where(g == 0, 1.0, g)
        eq = received[k] / safe[:, None]
        # a zero gain carries no information; its decisions are made on noise alone
        eq = np.where((g == 0)[:, None], received[k], eq)
        errors[k] = int(np.count_nonzero(qam_demap(eq, spec) != bits[k]))
    return BerCount(int(errors.sum()), int(bits.size), errors)


def ber_trial(
    scenario: Scenario,
    snr_db: float,
    seed,
    channel: XlChannel | None = None,
    precoders=None,
) -> BerCount:
    """One coherence block: channel, precoders, QAM data, AWGN, scalar equalization, decisions.

    ``channel`` and ``precoders`` (list of matrices, one per subarray) may be
    supplied to override the random draws.
    """
    if channel is None:
        channel = gen_xl_channel(
            scenario.layout, scenario.afdm, scenario.correlation, scenario.paths, seed_sequence(seed, "channel")
        )
    if precoders is None:
        results = precode_subarrays(channel, scenario.precoder, scenario.precode_config(snr_db), seed_sequence(seed, "precoder"))
        precoders = [r.matrix for r in results]
    rng = generator(seed, "data")
    bits = draw_bits(rng, scenario)
    noise = awgn(rng, (scenario.layout.n_users, channel.rows_per_user, scenario.frames), 1.0)
    return transmit_block(channel, precoders, scenario, bits, noise, snr_to_noise_var(snr_db, scenario.power_budget))


def user_metrics(records) -> list[UserMetrics]:
    return [UserMetrics.from_sinr(sinr(r)) for r in records]


def precoder_matrices(results: list[PrecodeResult]) -> list[np.ndarray]:
    return [r.matrix for r in results]
