from cellbem import cli, config
from cellbem.harness import CVConfig

EXAMPLE_TOML = """
[geometry]
kind = "cell_array"
rows = 2
cols = 4
cell_width_um = 20.0
cell_length_um = 200.0
bath_pad_um = 30.0
bath_margin_um = 400.0
dx_um = 10.0
dx_outer_um = 20.0

[conductivity]
sigma_bath_mS_per_cm = 20.0
sigma_cell_mS_per_cm = 3.0
kappa_mS_per_cm2 = 690.0

[membrane]
model = "mitchell_schaeffer"
[membrane.params]
v_gate = 0.45

[stimulus]
amplitude_uA_per_cm2 = 300.0
duration_ms = 1.0

[time]
dt_ms = 0.02
t_end_ms = 40.0
"""


def test_config_roundtrip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(EXAMPLE_TOML)
    cfg = config.load_cv_config(str(p))
    assert cfg.cols == 4 and cfg.c_l == 200.0
    assert cfg.kappa == 690.0 and cfg.model_params == {"v_gate": 0.45}
    assert cfg.t_end == 40.0


def test_config_defaults():
    cfg = config.cv_config_from_dict({})
    assert cfg == CVConfig()


def test_converge_command(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    rc = cli.main(["converge", "--geometry", "a", "--M", "8,16",
                   "--output", str(out), "--report"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "M,e0,e1" and len(lines) == 3
    assert "fitted slope" in capsys.readouterr().out


def test_cv_command(tmp_path, capsys):
    p = tmp_path / "run.toml"
    p.write_text(EXAMPLE_TOML)
    out = tmp_path / "cv.csv"
    rc = cli.main(["cv", "--config", str(p), "--output", str(out), "--report"])
    assert rc == 0
    text = out.read_text()
    assert text.startswith("pair,")
    assert "mean,,," in text
    assert "CV =" in capsys.readouterr().out


def test_sweep_command(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(EXAMPLE_TOML)
    out = tmp_path / "sweep.csv"
    rc = cli.main(["sweep", "--kind", "sigma_i", "--values", "3.0",
                   "--config", str(p), "--output", str(out)])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "sigma_i,cv_um_per_ms,propagation_failed"
    assert len(lines) == 2 and lines[1].endswith(",0")


def test_simulate_command(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(EXAMPLE_TOML.replace("t_end_ms = 40.0", "t_end_ms = 1.0"))
    out = tmp_path / "probes.csv"
    rc = cli.main(["simulate", "--config", str(p), "--output", str(out)])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("t_ms,probe_0_mV")
    assert len(lines) == 52   # header + 51 steps of 0.02 up to 1.0 inclusive


def test_error_exit_code(capsys):
    rc = cli.main(["converge", "--geometry", "a", "--M", "7"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
