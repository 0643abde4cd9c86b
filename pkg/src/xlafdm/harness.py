"""Experiment configuration, orchestration and CSV output.

Config files are UTF-8, one ``key = value`` per line, ``#`` starts a comment.
Every key is optional; see ``CONFIG_KEYS`` for types and defaults. List-valued
keys (``precoder``, ``waveform``, ``snr_grid``) take comma-separated values.

Seeding: trial t of an experiment draws everything from substreams of
``(seed, t)``. The physical channel, the data bits and the unit-variance noise
of a trial are shared by every waveform, precoder and SNR point, so curves are
compared on common random numbers, and adding trials never changes earlier ones.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Callable

from .afdm import AfdmParams, default_c1, default_c2
from .metrics import (
    BerCount,
    Modulation,
    ModulationSpec,
    Scenario,
    awgn,
    draw_bits,
    sinr,
    snr_to_noise_var,
    sum_rate,
    transmit_block,
)
from .precoding import Algorithm, flops_model, precode_subarrays
from .seeding import generator, seed_sequence
from .xl_array import CorrelationSpec, PathConfig, SubarrayLayout, gen_xl_channel, received_decomposition


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


class Waveform(enum.Enum):
    AFDM = "afdm"
    OFDM = "ofdm"


class Metric(enum.Enum):
    SUM_RATE = "sum_rate"
    BER = "ber"
    FLOPS = "flops"


# -- value parsers -------------------------------------------------------------


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _auto_float(text: str):
    return None if text.lower() == "auto" else _float(text)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _enum_list(kind) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        items = [t.strip().lower() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(kind(t) for t in items)

    return parse


def _float_list(text: str) -> tuple:
    return tuple(_float(t) for t in text.split(",") if t.strip())


def _word(text: str) -> str:
    if not text or any(c in text for c in ',"\n\r'):
        raise ValueError("must be non-empty without commas or quotes")
    return text


@dataclass(frozen=True)
class KeySpec:
    parse: Callable[[str], object]
    default: object
    help: str


CONFIG_KEYS: dict[str, KeySpec] = {
    "experiment_id": KeySpec(_word, "custom", "label copied into every CSV row"),
    "n_carriers": KeySpec(_int, 64, "chirp carriers per frame (N)"),
    "n_tx": KeySpec(_int, 64, "transmit antennas (N_t)"),
    "subarrays": KeySpec(_int, 4, "subarrays (S); must divide n_tx and users"),
    "users": KeySpec(_int, 8, "single-stream-group users (K)"),
    "rx_per_user": KeySpec(_int, 1, "receive antennas per user (N_k)"),
    "c1": KeySpec(_auto_float, None, "chirp rate 1; auto = (2 alpha_max + 1) / (2N)"),
    "c2": KeySpec(_auto_float, None, "chirp rate 2; auto = 1 / (2 N^2 pi)"),
    "paths": KeySpec(_int, 4, "delay-Doppler paths per user (P)"),
    "l_max": KeySpec(_int, 4, "maximum delay in samples"),
    "alpha_max": KeySpec(_int, 2, "maximum integer Doppler"),
    "fractional_doppler": KeySpec(_bool, True, "draw fractional Doppler in (-1/2, 1/2]"),
    "corr_coef": KeySpec(_float, 0.0, "exponential spatial correlation base, [0, 1)"),
    "visibility": KeySpec(_float, 1.0, "visible fraction of each subarray per user, (0, 1]"),
    "precoder": KeySpec(_enum_list(Algorithm), (Algorithm.ZF, Algorithm.RKA), "zf, rka, swor_rka"),
    "waveform": KeySpec(_enum_list(Waveform), (Waveform.AFDM, Waveform.OFDM), "afdm, ofdm"),
    "iterations": KeySpec(_int, 200, "Kaczmarz steps per precoder column (T)"),
    "xi": KeySpec(_auto_float, None, "Kaczmarz regularization; auto = 1/snr"),
    "snr_min": KeySpec(_float, -10.0, "first SNR point in dB"),
    "snr_max": KeySpec(_float, 30.0, "last SNR point in dB (inclusive)"),
    "snr_step": KeySpec(_float, 5.0, "SNR spacing in dB"),
    "snr_grid": KeySpec(_float_list, None, "explicit SNR list in dB; overrides snr_min/max/step"),
    "trials": KeySpec(_int, 200, "independent coherence blocks per SNR point"),
    "seed": KeySpec(_int, 0, "master seed, 0 <= seed < 2^64"),
    "metric": KeySpec(lambda t: Metric(t.lower()), Metric.SUM_RATE, "sum_rate, ber or flops"),
    "modulation": KeySpec(lambda t: Modulation[t.upper()], Modulation.QAM4, "qam4, qam16, qam64"),
    "power_budget": KeySpec(_float, 1.0, "per-sample transmit power of each subarray"),
    "frames": KeySpec(_int, 8, "AFDM frames sent per coherence block (BER)"),
}


def snr_range(lo: float, hi: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise ValueError("snr_step must be positive")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 10) for i in range(max(count, 0)))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str = "custom"
    n_carriers: int = 64
    n_tx: int = 64
    subarrays: int = 4
    users: int = 8
    rx_per_user: int = 1
    c1: float | None = None
    c2: float | None = None
    paths: int = 4
    l_max: int = 4
    alpha_max: int = 2
    fractional_doppler: bool = True
    corr_coef: float = 0.0
    visibility: float = 1.0
    precoders: tuple = (Algorithm.ZF, Algorithm.RKA)
    waveforms: tuple = (Waveform.AFDM, Waveform.OFDM)
    iterations: int = 200
    xi: float | None = None
    snr_grid: tuple = snr_range(-10.0, 30.0, 5.0)
    trials: int = 200
    seed: int = 0
    metric: Metric = Metric.SUM_RATE
    modulation: Modulation = Modulation.QAM4
    power_budget: float = 1.0
    frames: int = 8

    def __post_init__(self):
        object.__setattr__(self, "precoders", tuple(Algorithm(p) for p in self.precoders))
        object.__setattr__(self, "waveforms", tuple(Waveform(w) for w in self.waveforms))
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError naming the offending keys."""
        pos = {
            "n_carriers": self.n_carriers, "n_tx": self.n_tx, "subarrays": self.subarrays,
            "users": self.users, "rx_per_user": self.rx_per_user, "paths": self.paths,
            "iterations": self.iterations, "trials": self.trials, "frames": self.frames,
        }
        for key, v in pos.items():
            if v < 1:
                raise ConfigError(f"{key} = {v} must be positive", key)
        if self.n_carriers < 2:
            raise ConfigError(f"n_carriers = {self.n_carriers} must be at least 2", "n_carriers")
        if self.n_tx % self.subarrays:
            raise ConfigError(f"subarrays = {self.subarrays} does not divide n_tx = {self.n_tx}", "subarrays", "n_tx")
        if self.users % self.subarrays:
            raise ConfigError(f"subarrays = {self.subarrays} does not divide users = {self.users}", "subarrays", "users")
        if self.users // self.subarrays > self.n_tx // self.subarrays:
            raise ConfigError(
                f"users per subarray ({self.users // self.subarrays}) exceed antennas per subarray "
                f"({self.n_tx // self.subarrays})",
                "users", "n_tx",
            )
        if not 0 <= self.l_max < self.n_carriers:
            raise ConfigError(f"l_max = {self.l_max} must satisfy 0 <= l_max < n_carriers = {self.n_carriers}", "l_max")
        if self.alpha_max < 0 or 2 * self.alpha_max + 1 > self.n_carriers:
            raise ConfigError(f"alpha_max = {self.alpha_max} needs 0 <= 2 alpha_max + 1 <= n_carriers", "alpha_max")
        if not 0.0 <= self.corr_coef < 1.0:
            raise ConfigError(f"corr_coef = {self.corr_coef} must lie in [0, 1)", "corr_coef")
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigError(f"visibility = {self.visibility} must lie in (0, 1]", "visibility")
        if self.xi is not None and self.xi < 0:
            raise ConfigError(f"xi = {self.xi} must be non-negative", "xi")
        if self.power_budget <= 0:
            raise ConfigError(f"power_budget = {self.power_budget} must be positive", "power_budget")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed = {self.seed} must be an unsigned 64-bit integer", "seed")
        if not self.snr_grid:
            raise ConfigError("the SNR grid is empty", "snr_grid")
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ConfigError("the SNR grid must be strictly increasing", "snr_grid")
        if not self.precoders or not self.waveforms:
            raise ConfigError("precoder and waveform lists must be non-empty", "precoder")

    @property
    def layout(self) -> SubarrayLayout:
        return SubarrayLayout(self.n_tx, self.subarrays, self.users, self.rx_per_user)

    def afdm_params(self, waveform: Waveform) -> AfdmParams:
        if Waveform(waveform) is Waveform.OFDM:
            params = AfdmParams.ofdm(self.n_carriers)
            assert params.c1 == 0.0 and params.c2 == 0.0
            return params
        c1 = default_c1(self.alpha_max, self.n_carriers) if self.c1 is None else self.c1
        c2 = default_c2(self.n_carriers) if self.c2 is None else self.c2
        return AfdmParams(self.n_carriers, c1, c2)

    def scenario(self, waveform: Waveform, precoder: Algorithm) -> Scenario:
        return Scenario(
            layout=self.layout,
            afdm=self.afdm_params(waveform),
            correlation=CorrelationSpec(self.corr_coef, self.visibility),
            paths=PathConfig(self.paths, self.l_max, self.alpha_max, self.fractional_doppler),
            precoder=Algorithm(precoder),
            iterations=self.iterations,
            xi=self.xi,
            modulation=ModulationSpec(self.modulation),
            power_budget=self.power_budget,
            frames=self.frames,
        )


def _config_error(message: str, *keys, lines: dict | None = None) -> ConfigError:
    if lines:
        where = sorted({lines[k] for k in keys if k in lines})
        if where:
            message = f"line {', '.join(map(str, where))}: {message}"
    return ConfigError(message)


_FIELD_FOR_KEY = {"precoder": "precoders", "waveform": "waveforms"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` text into a validated ExperimentConfig."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = CONFIG_KEYS[key].parse(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}: {exc}") from None
        lines[key] = lineno
    return build_config(values, lines)


def build_config(values: dict, lines: dict | None = None) -> ExperimentConfig:
    """ExperimentConfig from parsed key values; missing keys take their defaults."""
    kwargs = {}
    for key, spec in CONFIG_KEYS.items():
        if key in ("snr_min", "snr_max", "snr_step", "snr_grid"):
            continue
        kwargs[_FIELD_FOR_KEY.get(key, key)] = values.get(key, spec.default)
    if values.get("snr_grid") is not None:
        if lines is not None:
            lines.setdefault("snr_grid", lines.get("snr_grid"))
        kwargs["snr_grid"] = values["snr_grid"]
    else:
        lo = values.get("snr_min", CONFIG_KEYS["snr_min"].default)
        hi = values.get("snr_max", CONFIG_KEYS["snr_max"].default)
        step = values.get("snr_step", CONFIG_KEYS["snr_step"].default)
        try:
            kwargs["snr_grid"] = snr_range(lo, hi, step)
        except ValueError as exc:
            raise _config_error(str(exc), "snr_step", lines=lines) from None
        if lines is not None:
            for k in ("snr_min", "snr_max", "snr_step"):
                if k in lines:
                    lines.setdefault("snr_grid", lines[k])
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        message, *keys = exc.args
        keys = [("precoder" if k == "precoders" else k) for k in keys]
        raise _config_error(message, *keys, lines=lines) from None


class Preset(enum.Enum):
    FIG3 = "fig3"
    FIG4 = "fig4"


def preset(name, scale: int = 1) -> ExperimentConfig:
    """Full-geometry sweeps (N_t = 256, K = 32, N_k = 1, S = 4); ``scale`` divides N_t and K.

    FIG3: mean sum-rate of ZF, rKA and SwoR-rKA for AFDM and OFDM.
    FIG4: pooled BER of ZF and rKA for AFDM and OFDM.
    Both use a mobile channel (alpha_max = 2 with fractional Doppler), SNR
    -10..30 dB in 5 dB steps and 200 trials.
    """
    try:
        which = Preset(str(name).lower())
    except ValueError:
        raise ConfigError(f"unknown preset {name!r}; choose fig3 or fig4") from None
    if int(scale) != scale or scale < 1:
        raise ConfigError(f"scale must be a positive integer, got {scale}")
    n_tx, users = 256, 32
    if n_tx % scale or users % scale:
        raise ConfigError(f"scale {scale} must divide n_tx = {n_tx} and users = {users}")
    common = dict(n_tx=n_tx // scale, users=users // scale, subarrays=4, rx_per_user=1)
    if which is Preset.FIG3:
        return ExperimentConfig(
            experiment_id="fig3",
            precoders=(Algorithm.ZF, Algorithm.RKA, Algorithm.SWOR_RKA),
            metric=Metric.SUM_RATE,
            **common,
        )
    return ExperimentConfig(experiment_id="fig4", precoders=(Algorithm.ZF, Algorithm.RKA), metric=Metric.BER, **common)


# -- running -------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    waveform: str
    precoder: str
    snr_db: float
    metric_name: str
    value: float
    trials: int
    seed: int


def _flops_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    lay = cfg.layout
    out = []
    for w in cfg.waveforms:
        for p in cfg.precoders:
            value = flops_model(p, cfg.n_carriers, lay.n_sub, lay.users_per_sub, lay.ants_per_sub, cfg.iterations)
            for snr in cfg.snr_grid:
                out.append(ResultRow(cfg.experiment_id, w.value, p.value, snr, Metric.FLOPS.value, float(value), cfg.trials, cfg.seed))
    return out


def trial_metrics(cfg: ExperimentConfig, trial: int) -> dict:
    """Metric values of one trial, keyed by (waveform, precoder, snr index).

    Sum-rate entries are that trial's sum-rate; BER entries are BerCount objects.
    """
    lay = cfg.layout
    trial_seed = seed_sequence(cfg.seed, trial)
    out = {}
    bits = noise = None
    if cfg.metric is Metric.BER:
        rng = generator(trial_seed, "data")
        probe = cfg.scenario(cfg.waveforms[0], cfg.precoders[0])
        bits = draw_bits(rng, probe)
        noise = awgn(rng, (lay.n_users, cfg.n_carriers * lay.n_rx_per_user, cfg.frames), 1.0)
    for w in cfg.waveforms:
        base = cfg.scenario(w, cfg.precoders[0])
        channel = gen_xl_channel(base.layout, base.afdm, base.correlation, base.paths, seed_sequence(trial_seed, "channel"))
        for p in cfg.precoders:
            scen = replace(base, precoder=p)
            mats = records = None
            for i, snr in enumerate(cfg.snr_grid):
                try:
                    noise_var = snr_to_noise_var(snr, cfg.power_budget)
                    # ZF does not depend on the SNR; the Kaczmarz precoders do through xi
                    if mats is None or p is not Algorithm.ZF:
                        results = precode_subarrays(
                            channel, p, scen.precode_config(snr), seed_sequence(trial_seed, "precoder", p.value)
                        )
                        mats = [r.matrix for r in results]
                        records = None
                    if cfg.metric is Metric.SUM_RATE:
                        if records is None:
                            records = received_decomposition(channel, mats, 0.0, scen.modulation.symbol_power)
                        out[(w, p, i)] = sum_rate(sinr(replace(r, noise=noise_var)) for r in records)
                    else:
                        out[(w, p, i)] = transmit_block(channel, mats, scen, bits, noise, noise_var)
                except Exception as exc:
                    raise SimulationError(
                        f"trial {trial}, SNR {snr:g} dB, {w.value}/{p.value}: {exc}"
                    ) from exc
    return out


def run_experiment(cfg: ExperimentConfig, progress: Callable[[int], None] | None = None) -> list[ResultRow]:
    """Mean sum-rate, pooled BER or FLOP count for every (waveform, precoder, SNR)."""
    if cfg.metric is Metric.FLOPS:
        return sort_rows(_flops_rows(cfg))
    keys = [(w, p, i) for w in cfg.waveforms for p in cfg.precoders for i in range(len(cfg.snr_grid))]
    if cfg.metric is Metric.SUM_RATE:
        acc = {k: 0.0 for k in keys}
    else:
        acc = {k: BerCount() for k in keys}
    for t in range(cfg.trials):
        res = trial_metrics(cfg, t)
        for k in keys:
            acc[k] += res[k]
        if progress is not None:
            progress(t)
    rows = []
    for (w, p, i), v in acc.items():
        value = v / cfg.trials if cfg.metric is Metric.SUM_RATE else v.ber
        rows.append(ResultRow(cfg.experiment_id, w.value, p.value, cfg.snr_grid[i], cfg.metric.value, value, cfg.trials, cfg.seed))
    return sort_rows(rows)


def sort_rows(rows) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.precoder, r.waveform, r.snr_db))


# -- CSV -----------------------------------------------------------------------

CSV_HEADER = ("experiment_id", "waveform", "precoder", "snr_db", "metric", "value", "trials", "seed")


def _num(x: float) -> str:
    return f"{x:.9g}"


def emit_csv(rows, out=None) -> bytes:
    """CSV bytes (LF newlines, 9 significant digits); also written to ``out`` if given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sort_rows(rows):
        writer.writerow([r.experiment_id, r.waveform, r.precoder, _num(r.snr_db), r.metric_name, _num(r.value), r.trials, r.seed])
    data = buf.getvalue().encode("utf-8")
    if out is not None:
        if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
            with open(out, "wb") as fh:
                fh.write(data)
        else:
            out.write(data)
    return data


def read_csv(data: bytes | str) -> list[ResultRow]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return [
        ResultRow(e, w, p, float(s), m, float(v), int(t), int(sd))
        for e, w, p, s, m, v, t, sd in reader
    ]


def config_table() -> str:
    """Markdown table of config keys and defaults."""
    def show(v):
        if isinstance(v, tuple):
            return ", ".join(x.value if isinstance(x, enum.Enum) else str(x) for x in v)
        if isinstance(v, enum.Enum):
            return v.name.lower() if isinstance(v, Modulation) else v.value
        if v is None:
            return "auto"
        if isinstance(v, bool):
            return str(v).lower()
        return str(v)

    lines = ["| key | default | meaning |", "|---|---|---|"]
    for key, spec in CONFIG_KEYS.items():
        default = "(from snr_min/max/step)" if key == "snr_grid" else show(spec.default)
        lines.append(f"| `{key}` | {default} | {spec.help} |")
    return "\n".join(lines)
