from xlafdm.cli import main
from xlafdm.harness import read_csv

SMALL = """
n_carriers = 8
n_tx = 8
subarrays = 2
users = 4
paths = 2
l_max = 2
alpha_max = 1
trials = 1
iterations = 20
precoder = zf, rka
"""


def test_config_run(tmp_path, capsysbinary):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out.csv"
    assert main(["--config", str(cfg), "--out", str(out), "--quiet", "--snr-min", "0", "--snr-max", "10"]) == 0
    rows = read_csv(out.read_bytes())
    assert {r.snr_db for r in rows} == {0.0, 5.0, 10.0}
    assert main(["--config", str(cfg), "--quiet", "--seed", "3", "--trials", "2", "--snr-min", "0", "--snr-max", "0"]) == 0
    rows = read_csv(capsysbinary.readouterr().out)
    assert all(r.seed == 3 and r.trials == 2 for r in rows)


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_tx = 256\nsubarrays = 5\n")
    assert main(["--config", str(bad)]) == 1
    assert "line 1, 2" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["--preset", "fig7"]) == 1
    assert main([]) == 1
    assert main(["--preset", "fig3", "--scale", "5"]) == 1
    assert main(["--config", str(bad), "--scale", "2"]) == 1


def test_runtime_error_exit_2(tmp_path, monkeypatch):
    import xlafdm.cli as cli

    def boom(*a, **k):
        raise RuntimeError("no")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["--preset", "fig3", "--quiet"]) == 2
