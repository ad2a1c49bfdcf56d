import json

import numpy as np
import pytest

from spin1topo import cli
from spin1topo.errors import ConfigError
from spin1topo.model import CouplingParams
from spin1topo.topology import LoopSpec, loop_flux


def run_cli(args):
    return cli.main([str(a) for a in args])


def write_config(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    comments = [l for l in lines if l.startswith("#")]
    header = next(l for l in lines if not l.startswith("#"))
    data = np.array([[float(x) for x in l.split(",")]
                     for l in lines[lines.index(header) + 1:]])
    return comments, header.split(","), data


def test_resolve_config_defaults():
    cfg = cli.resolve_config("vortex")
    assert cfg["alpha"] == 2.0
    assert cfg["latitude"] == 0.1
    assert cfg["samples"] == 32
    assert cfg["seed"] == 0


def test_resolve_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        cli.resolve_config("vortex", {"latitud": 0.2})


def test_resolve_config_rejects_bad_types():
    with pytest.raises(ConfigError, match="vortex.samples"):
        cli.resolve_config("vortex", {"samples": "many"})
    with pytest.raises(ConfigError):
        cli.resolve_config("flux-scan", {"trials": -5})


def test_config_hash_ignores_output_dir():
    a = cli.resolve_config("vortex", {"out": "/tmp/a"})
    b = cli.resolve_config("vortex", {"out": "/tmp/b"})
    assert cli.config_hash(a) == cli.config_hash(b)
    c = cli.resolve_config("vortex", {"seed": 7})
    assert cli.config_hash(a) != cli.config_hash(c)


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "bad.json", {"nonsense": 1})
    assert run_cli(["vortex", "--config", cfg, "--out", tmp_path]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert run_cli(["vortex", "--config", tmp_path / "absent.json"]) == 2


def test_conflicting_mode_flags_exit_2(tmp_path, capsys):
    assert run_cli(["flux-scan", "--dynamics", "--ideal",
                    "--out", tmp_path]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    # the default loop at beta=-2.0 hits the arrow gimbal; the track
    # cannot be lifted and the command reports the error class
    cfg = write_config(tmp_path, "ls.json", {"beta": -2.0})
    code = run_cli(["loop-sim", "--config", cfg, "--out", tmp_path])
    assert code == 3
    assert "UndersampledLoop" in capsys.readouterr().err


def test_vortex_output(tmp_path):
    assert run_cli(["vortex", "--out", tmp_path]) == 0
    comments, columns, data = read_csv(tmp_path / "vortex.csv")
    assert columns == ["phi", "phi_f"]
    assert any("config-hash" in c for c in comments)
    assert any("winding: -1" in c for c in comments)
    assert data.shape == (33, 2)
    # arrow azimuth tracks the negated loop parameter
    err = np.abs(np.angle(np.exp(1j * (data[:, 1] + data[:, 0]))))
    assert err.max() < 0.1


def test_vortex_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["vortex", "--out", out1]) == 0
    assert run_cli(["vortex", "--out", out2]) == 0
    assert (out1 / "vortex.csv").read_bytes() == \
        (out2 / "vortex.csv").read_bytes()


def test_flux_scan_ideal_single_point(tmp_path):
    cfg = write_config(tmp_path, "fs.json",
                       {"beta_min": -1.0, "beta_max": -1.0, "beta_points": 1,
                        "samples": 512})
    assert run_cli(["flux-scan", "--config", cfg, "--out", tmp_path]) == 0
    comments, columns, data = read_csv(tmp_path / "flux_scan.csv")
    assert columns == ["beta", "gamma", "gamma_f", "gamma_t", "wrapped",
                       "sigma"]
    loop = LoopSpec("circle", (3 * np.pi / 4, np.pi), 0.2, 512, 1.0,
                    CouplingParams(0.0, -1.0))
    want = loop_flux(loop)
    assert data[0, 1] == pytest.approx(want.gamma, abs=1e-9)
    assert data[0, 5] == 0.0


def test_flux_scan_masks_failed_points(tmp_path):
    cfg = write_config(tmp_path, "fs2.json",
                       {"beta_min": -2.0, "beta_max": -2.0, "beta_points": 1,
                        "samples": 256})
    assert run_cli(["flux-scan", "--config", cfg, "--out", tmp_path]) == 0
    _, _, data = read_csv(tmp_path / "flux_scan.csv")
    assert np.isnan(data[0, 1])
    assert data[0, 0] == -2.0


def test_flux_scan_thread_count_does_not_change_bytes(tmp_path):
    payload = {"beta_min": -1.5, "beta_max": -0.5, "beta_points": 3,
               "samples": 128}
    cfg = write_config(tmp_path, "fs3.json", payload)
    out1, out2 = tmp_path / "t1", tmp_path / "t4"
    assert run_cli(["flux-scan", "--config", cfg, "--out", out1,
                    "--threads", 1]) == 0
    assert run_cli(["flux-scan", "--config", cfg, "--out", out2,
                    "--threads", 4]) == 0
    assert (out1 / "flux_scan.csv").read_bytes() == \
        (out2 / "flux_scan.csv").read_bytes()


def test_phase_diagram_single_cell(tmp_path):
    cfg = write_config(tmp_path, "pd.json",
                       {"alpha_min": 0.0, "alpha_max": 0.0, "alpha_points": 1,
                        "beta_min": 0.0, "beta_max": 0.0, "beta_points": 1,
                        "charge_grid": [40, 80]})
    assert run_cli(["phase-diagram", "--config", cfg, "--out", tmp_path]) == 0
    payload = json.loads((tmp_path / "phase_diagram.json").read_text())
    assert payload["command"] == "phase-diagram"
    assert payload["charge"] == [[2]]
    assert payload["undefined"] == [[False]]
    assert payload["config_hash"] == cli.config_hash(
        cli.resolve_config("phase-diagram", json.loads(cfg.read_text())))


def test_phase_diagram_undefined_cell(tmp_path):
    # the charge changes across beta=-2 at alpha=0; the cell on the
    # transition has no defined integer
    cfg = write_config(tmp_path, "pd2.json",
                       {"alpha_min": 0.0, "alpha_max": 0.0, "alpha_points": 1,
                        "beta_min": -2.0, "beta_max": -2.0, "beta_points": 1,
                        "charge_grid": [40, 80]})
    assert run_cli(["phase-diagram", "--config", cfg, "--out", tmp_path]) == 0
    payload = json.loads((tmp_path / "phase_diagram.json").read_text())
    assert payload["undefined"] == [[True]]
    assert payload["charge"] == [[None]]


def test_alpha_jump_output(tmp_path):
    cfg = write_config(tmp_path, "aj.json", {"alpha_min": 0.9, "alpha_max": 1.1, "alpha_points": 5})
    assert run_cli(["alpha-jump", "--config", cfg, "--out", tmp_path]) == 0
    _, columns, data = read_csv(tmp_path / "alpha_jump.csv")
    assert columns[:2] == ["alpha", "f_z"]
    assert "gap01" in columns
    fz = data[:, 1]
    gap = data[:, columns.index("gap01")]
    assert fz[0] == pytest.approx(-1.0, abs=1e-9)   # alpha = 0.9
    assert fz[-1] == pytest.approx(0.0, abs=1e-9)   # alpha = 1.1
    assert np.isnan(fz[2])                          # alpha = 1.0: degenerate
    assert gap[2] == pytest.approx(0.0, abs=1e-9)


def test_loop_sim_outputs(tmp_path):
    cfg = write_config(tmp_path, "ls.json",
                       {"beta": -1.0, "tau_samples": 100,
                        "total_time": 2e-4})
    assert run_cli(["loop-sim", "--config", cfg, "--out", tmp_path]) == 0
    comments, columns, data = read_csv(tmp_path / "loop_trajectory.csv")
    assert columns[0] == "tau" and columns[-1] == "purity"
    assert data.shape == (101, 15)
    frames = json.loads((tmp_path / "ellipsoid_frames.json").read_text())
    assert len(frames["frames"]) == 8
    f0 = frames["frames"][0]
    assert set(f0) >= {"tau_over_pi", "time", "arrow", "axis_lengths",
                       "axes", "purity"}
    assert len(f0["arrow"]) == 3
    assert "gamma" in frames["flux"]
