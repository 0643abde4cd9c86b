import io
from dataclasses import replace

import pytest

from xlafdm.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    Metric,
    ResultRow,
    Waveform,
    config_table,
    emit_csv,
    parse_config,
    preset,
    read_csv,
    run_experiment,
    trial_metrics,
)
from xlafdm.metrics import Modulation
from xlafdm.precoding import Algorithm

TINY = dict(
    n_carriers=8, n_tx=8, subarrays=2, users=4, paths=2, l_max=2, alpha_max=1,
    snr_grid=(0.0, 10.0), trials=2, iterations=40, frames=2,
)


def test_empty_config_is_desk_default():
    cfg = parse_config("")
    assert (cfg.n_carriers, cfg.n_tx, cfg.subarrays, cfg.users) == (64, 64, 4, 8)
    assert cfg.snr_grid == tuple(float(s) for s in range(-10, 31, 5))
    assert cfg.metric is Metric.SUM_RATE and cfg.modulation is Modulation.QAM4
    assert cfg.iterations == 200 and cfg.trials == 200


def test_full_geometry_config():
    cfg = parse_config("n_tx = 256\nsubarrays = 4\nusers = 32")
    lay = cfg.layout
    assert (lay.n_tx, lay.n_users, lay.n_rx_per_user, lay.n_sub) == (256, 32, 1, 4)


def test_divisibility_error_names_both_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("n_tx = 256  # full array\nsubarrays = 5\nusers = 40")
    msg = str(exc.value)
    assert "subarrays" in msg and "n_tx" in msg and "line 1, 2" in msg


def test_parse_errors_carry_line_numbers():
    cases = {
        "# comment\nbogus = 1": "line 2",
        "n_tx = many": "line 1",
        "\n\nseed 4": "line 3",
        "seed = 1\nseed = 2": "line 2",
        "visibility = 1.5": "line 1",
        "precoder = zf, magic": "line 1",
    }
    for text, where in cases.items():
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert where in str(exc.value), text


def test_parse_values():
    cfg = parse_config(
        """
        precoder = zf, swor_rka   # both
        waveform = ofdm
        snr_grid = 0, 7.5, 20
        c1 = 0.01
        xi = auto
        fractional_doppler = false
        metric = ber
        modulation = qam16
        experiment_id = run-a
        """
    )
    assert cfg.precoders == (Algorithm.ZF, Algorithm.SWOR_RKA)
    assert cfg.waveforms == (Waveform.OFDM,)
    assert cfg.snr_grid == (0.0, 7.5, 20.0)
    assert cfg.c1 == 0.01 and cfg.xi is None and not cfg.fractional_doppler
    assert cfg.metric is Metric.BER and cfg.modulation is Modulation.QAM16
    with pytest.raises(ConfigError):
        parse_config("snr_grid = 0, 0")
    assert parse_config("snr_min = 0\nsnr_max = 4\nsnr_step = 2").snr_grid == (0.0, 2.0, 4.0)


def test_ofdm_forces_zero_chirp_rates():
    cfg = parse_config("c1 = 0.3\nc2 = 0.1")
    assert cfg.afdm_params(Waveform.OFDM).is_ofdm
    assert cfg.afdm_params(Waveform.AFDM).c1 == 0.3
    assert parse_config("").afdm_params(Waveform.AFDM).c1 == 5 / 128


def test_presets():
    f3 = preset("fig3")
    assert (f3.n_tx, f3.users, f3.rx_per_user, f3.subarrays) == (256, 32, 1, 4)
    assert f3.metric is Metric.SUM_RATE
    f4 = preset("FIG4")
    assert (f4.n_tx, f4.users, f4.subarrays) == (256, 32, 4) and f4.metric is Metric.BER
    s = preset("fig3", 4)
    assert (s.n_tx, s.users, s.rx_per_user, s.subarrays) == (64, 8, 1, 4)
    with pytest.raises(ConfigError):
        preset("fig5")
    with pytest.raises(ConfigError):
        preset("fig3", 3)


def test_flops_metric():
    cfg = ExperimentConfig(n_tx=256, users=32, subarrays=4, metric=Metric.FLOPS, precoders=(Algorithm.RKA,), trials=7)
    rows = run_experiment(cfg)
    assert {r.value for r in rows} == {12800 * 64 * 64 * 4}
    assert len(rows) == 2 * len(cfg.snr_grid)


@pytest.mark.parametrize("metric", [Metric.SUM_RATE, Metric.BER])
def test_determinism_and_trial_prefix(metric):
    cfg = ExperimentConfig(metric=metric, precoders=(Algorithm.ZF, Algorithm.RKA), **{**TINY, "trials": 1})
    assert emit_csv(run_experiment(cfg)) == emit_csv(run_experiment(cfg))
    more = replace(cfg, trials=3)
    a = trial_metrics(cfg, 0)
    b = trial_metrics(more, 0)
    for key, value in a.items():
        if metric is Metric.SUM_RATE:
            assert value == b[key]
        else:
            assert value.bit_errors == b[key].bit_errors


def test_rows_cover_grid_and_sort():
    cfg = ExperimentConfig(precoders=(Algorithm.ZF, Algorithm.RKA, Algorithm.SWOR_RKA), **TINY)
    rows = run_experiment(cfg)
    assert len(rows) == 3 * 2 * 2
    keys = [(r.precoder, r.waveform, r.snr_db) for r in rows]
    assert keys == sorted(keys)
    assert all(r.trials == 2 and r.seed == 0 and r.metric_name == "sum_rate" for r in rows)


def test_errors_annotated(monkeypatch):
    import xlafdm.harness as harness

    def boom(*a, **k):
        raise ValueError("kaput")

    monkeypatch.setattr(harness, "precode_subarrays", boom)
    with pytest.raises(harness.SimulationError, match="trial 0, SNR 0 dB"):
        run_experiment(ExperimentConfig(**TINY))


def test_emit_csv_format(tmp_path):
    assert emit_csv([]) == (",".join(CSV_HEADER) + "\n").encode()
    row = ResultRow("x", "afdm", "zf", 7.5, "ber", 1 / 3, 10, 42)
    data = emit_csv([row])
    assert data == b"experiment_id,waveform,precoder,snr_db,metric,value,trials,seed\nx,afdm,zf,7.5,ber,0.333333333,10,42\n"
    path = tmp_path / "out.csv"
    emit_csv([row], path)
    assert path.read_bytes() == data
    buf = io.BytesIO()
    emit_csv([row], buf)
    assert buf.getvalue() == data


def test_csv_round_trip():
    cfg = ExperimentConfig(metric=Metric.BER, **TINY)
    rows = run_experiment(cfg)
    data = emit_csv(rows)
    back = read_csv(data)
    assert emit_csv(back) == data
    for a, b in zip(rows, back):
        assert (a.precoder, a.waveform, a.snr_db, a.trials, a.seed) == (b.precoder, b.waveform, b.snr_db, b.trials, b.seed)
        assert abs(a.value - b.value) <= 1e-8 * max(abs(a.value), 1e-300)
    with pytest.raises(ValueError):
        read_csv("a,b\n")


def test_config_table_lists_every_key():
    table = config_table()
    for key in ("n_carriers", "precoder", "snr_grid", "visibility"):
        assert f"`{key}`" in table
