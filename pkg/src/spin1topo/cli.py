"""Command-line front end emitting plot-ready data files.

Each subcommand resolves one flat configuration -- schema defaults,
then a JSON --config file, then command-line flags -- validates it
(unknown keys are rejected), and writes its outputs under --out.  Every
output file carries the SHA-256 hash of the resolved configuration
(paths and thread counts excluded), and a rerun with the same
configuration and seed is byte-identical, so data files stay traceable
to the run that produced them.

Commands:
  phase-diagram   band charge over a coupling grid -> JSON grid + mask
  flux-scan       loop flux versus the transverse coupling -> CSV
  loop-sim        finite-time loop traversal -> trajectory CSV
                  + ellipsoid frames JSON
  alpha-jump      polar ground-state vector/tensor across the
                  level crossing -> CSV
  vortex          arrow azimuth winding around a polar circle -> CSV

Exit codes: 0 success, 2 configuration error, 3 numerical failure (the
raising error class name goes to stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (ConfigError, DegenerateBand, GapClosedOnLoop,
                     GapClosedOnSphere, NotConverged, PopulationsInconsistent,
                     Spin1TopoError, TensorDegenerate, UndersampledLoop,
                     VectorDegenerate)
from .geometry import SpinMoments, covariance_tensor, ellipsoid, moments
from .model import CouplingParams, sphere_eigensystem
from .util import wrap_angle

# physical defaults: 1 ms ramp, momentum scale pi/(10.67 us) in rad/s,
# loop radius 0.2, 500 detection trials at count threshold 6
K0_DEFAULT = np.pi / 10.67e-6
T_DEFAULT = 1e-3
R_DEFAULT = 0.2
CENTER_DEFAULT = [0.75 * np.pi, np.pi]
FRAME_TAUS_DEFAULT = [0.0, 0.19, 0.48, 0.95, 1.05, 1.71, 1.81, 1.90]

# a cell/point where the computation is genuinely undefined gets masked
# in the output instead of failing the whole run
_UNDEFINED_CELL = (GapClosedOnSphere, NotConverged, DegenerateBand)
_POINT_FAIL = _UNDEFINED_CELL + (GapClosedOnLoop, UndersampledLoop,
                                 TensorDegenerate, VectorDegenerate,
                                 PopulationsInconsistent)


# ---------------------------------------------------------------------------
# config schemas

def _num(x, kind: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a {kind}, got {x!r}")
    return float(x)


def _float(x) -> float:
    return _num(x, "number")


def _pos_float(x) -> float:
    v = _num(x, "positive number")
    if v <= 0:
        raise ConfigError(f"must be positive, got {x!r}")
    return v


def _nonneg_float(x) -> float:
    v = _num(x, "nonnegative number")
    if v < 0:
        raise ConfigError(f"must be nonnegative, got {x!r}")
    return v


def _int(x) -> int:
    v = _num(x, "integer")
    if v != int(v):
        raise ConfigError(f"expected an integer, got {x!r}")
    return int(v)


def _pos_int(x) -> int:
    v = _int(x)
    if v < 1:
        raise ConfigError(f"must be >= 1, got {x!r}")
    return v


def _samples(x) -> int:
    v = _int(x)
    if v < 4:
        raise ConfigError(f"need at least 4 loop samples, got {x!r}")
    return v


def _band(x) -> int:
    v = _int(x)
    if v not in (0, 1, 2):
        raise ConfigError(f"band must be 0, 1 or 2, got {x!r}")
    return v


def _bool(x) -> bool:
    if not isinstance(x, bool):
        raise ConfigError(f"expected true/false, got {x!r}")
    return x


def _str(x) -> str:
    if not isinstance(x, str):
        raise ConfigError(f"expected a string, got {x!r}")
    return x


def _choice(*options):
    def cast(x):
        if x not in options:
            raise ConfigError(f"must be one of {options}, got {x!r}")
        return x
    return cast


def _float_pair(x) -> list:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ConfigError(f"expected a pair of numbers, got {x!r}")
    return [_float(v) for v in x]


def _grid_pair(x) -> list:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ConfigError(f"expected [n_theta, n_phi], got {x!r}")
    return [_pos_int(v) for v in x]


def _float_list(x) -> list:
    if not isinstance(x, (list, tuple)) or not x:
        raise ConfigError(f"expected a nonempty list of numbers, got {x!r}")
    return [_float(v) for v in x]


_COMMON = {"seed": (0, _int), "out": (".", _str)}

SCHEMAS = {
    "phase-diagram": {
        "alpha_min": (-3.0, _float), "alpha_max": (3.0, _float),
        "alpha_points": (61, _pos_int),
        "beta_min": (-4.0, _float), "beta_max": (4.0, _float),
        "beta_points": (81, _pos_int),
        "band": (0, _band), "k0": (K0_DEFAULT, _pos_float),
        # starting charge grid per cell; the computation doubles it until
        # two consecutive grids agree on the integer
        "charge_grid": ([40, 80], _grid_pair),
        **_COMMON,
    },
    "flux-scan": {
        "alpha": (0.0, _float),
        "beta_min": (-4.0, _float), "beta_max": (0.0, _float),
        "beta_points": (41, _pos_int),
        "r": (R_DEFAULT, _pos_float),
        "center": (CENTER_DEFAULT, _float_pair),
        "samples": (512, _samples), "band": (0, _band),
        "k0": (K0_DEFAULT, _pos_float),
        "mode": ("ideal", _choice("ideal", "dynamics")),
        "total_time": (T_DEFAULT, _pos_float),
        "tau_samples": (256, _samples),
        "trials": (500, _pos_int), "threshold": (6, _pos_int),
        "bright_mean": (25.0, _pos_float), "dark_mean": (1.6, _nonneg_float),
        "resamples": (500, _pos_int),
        "dephasing": (False, _bool),
        **_COMMON,
    },
    "loop-sim": {
        "alpha": (0.0, _float), "beta": (-2.2, _float),
        "r": (R_DEFAULT, _nonneg_float),
        "center": (CENTER_DEFAULT, _float_pair),
        "k0": (K0_DEFAULT, _pos_float),
        "total_time": (T_DEFAULT, _pos_float),
        "tau_samples": (200, _samples),
        "frame_taus": (FRAME_TAUS_DEFAULT, _float_list),
        "dephasing": (False, _bool),
        **_COMMON,
    },
    "alpha-jump": {
        "alpha_min": (0.5, _float), "alpha_max": (1.5, _float),
        "alpha_points": (101, _pos_int),
        "beta": (0.0, _float),
        "band": (0, _band), "k0": (K0_DEFAULT, _pos_float),
        **_COMMON,
    },
    "vortex": {
        "alpha": (2.0, _float), "beta": (0.0, _float),
        "latitude": (0.1, _pos_float), "samples": (32, _samples),
        "band": (0, _band), "k0": (K0_DEFAULT, _pos_float),
        **_COMMON,
    },
}


def load_config_file(path) -> dict:
    """Parse a JSON config document; anything but an object is an error."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def resolve_config(command: str, file_cfg: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Defaults <- config file <- flag overrides, validated against schema."""
    schema = SCHEMAS[command]
    cfg = {k: default for k, (default, _) in schema.items()}
    for source in (file_cfg, overrides):
        if not source:
            continue
        unknown = sorted(set(source) - set(schema))
        if unknown:
            raise ConfigError(
                f"unknown {command} config keys: {', '.join(unknown)}")
        cfg.update(source)
    resolved = {}
    for key, (_, cast) in schema.items():
        try:
            resolved[key] = cast(cfg[key])
        except ConfigError as e:
            raise ConfigError(f"{command}.{key}: {e}") from None
    return resolved


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form, output location excluded."""
    payload = {k: v for k, v in cfg.items() if k != "out"}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


# ---------------------------------------------------------------------------
# output writers

def _public(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k != "out"}


def _write_csv(path, columns, rows, h, extra_comments=()):
    data = np.asarray(rows, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config-hash: {h}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        np.savetxt(fh, data, delimiter=",", header=",".join(columns),
                   comments="", fmt="%.12g")
    return path


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")
    return path


def _child_seeds(seed: int, n: int) -> list[int]:
    # index-keyed streams: results do not depend on worker scheduling
    return [int(s.generate_state(1)[0])
            for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------------------
# commands

def cmd_phase_diagram(cfg: dict, pool) -> list[str]:
    """Charge of one band over an (alpha, beta) grid, undefined cells masked."""
    from .topology import monopole_charge

    _require(cfg["alpha_max"] >= cfg["alpha_min"],
             "alpha_max must be >= alpha_min")
    _require(cfg["beta_max"] >= cfg["beta_min"],
             "beta_max must be >= beta_min")
    alphas = np.linspace(cfg["alpha_min"], cfg["alpha_max"],
                         cfg["alpha_points"])
    betas = np.linspace(cfg["beta_min"], cfg["beta_max"], cfg["beta_points"])
    grid = tuple(cfg["charge_grid"])

    def cell(ab):
        try:
            res = monopole_charge(CouplingParams(*ab), band=cfg["band"],
                                  k0=cfg["k0"], grid=grid)
        except _UNDEFINED_CELL:
            return np.nan
        return float(res.charge)

    pairs = [(a, b) for a in alphas for b in betas]
    charge = np.reshape(list(pool.map(cell, pairs)),
                        (alphas.size, betas.size))
    payload = {
        "command": "phase-diagram",
        "config": _public(cfg),
        "config_hash": config_hash(cfg),
        "alphas": [float(a) for a in alphas],
        "betas": [float(b) for b in betas],
        "charge": [[float(v) if np.isfinite(v) else None for v in row]
                   for row in charge],
        "undefined": [[bool(not np.isfinite(v)) for v in row]
                      for row in charge],
    }
    return [_write_json(os.path.join(cfg["out"], "phase_diagram.json"),
                        payload)]


def cmd_flux_scan(cfg: dict, pool) -> list[str]:
    """Loop flux versus beta; dynamics mode adds pipeline error bars."""
    from .topology import LoopSpec, loop_flux

    _require(cfg["beta_max"] >= cfg["beta_min"],
             "beta_max must be >= beta_min")
    betas = np.linspace(cfg["beta_min"], cfg["beta_max"], cfg["beta_points"])
    center = tuple(cfg["center"])
    alpha, k0, r = cfg["alpha"], cfg["k0"], cfg["r"]

    if cfg["mode"] == "ideal":
        def point(args):
            beta, _ = args
            try:
                res = loop_flux(LoopSpec("circle", center, r, cfg["samples"],
                                         k0, CouplingParams(alpha, beta)),
                                band=cfg["band"])
            except _POINT_FAIL:
                return (np.nan,) * 5
            return (res.gamma, res.gamma_f, res.gamma_t, res.wrapped, 0.0)
    else:
        from .dynamics import DephasingModel
        from .measurement import DetectionConfig, flux_measurement_pipeline

        det = DetectionConfig(bright_mean=cfg["bright_mean"],
                              dark_mean=cfg["dark_mean"],
                              threshold=cfg["threshold"],
                              trials=cfg["trials"])
        model = DephasingModel.from_pair_times() if cfg["dephasing"] else None

        def point(args):
            beta, seed = args
            try:
                res = flux_measurement_pipeline(
                    CouplingParams(alpha, beta), cfg["total_time"], k0,
                    cfg=det, center=center, radius=r,
                    tau_samples=cfg["tau_samples"], seed=seed, model=model,
                    resamples=cfg["resamples"])
            except _POINT_FAIL:
                return (np.nan,) * 5
            return (res.gamma, res.gamma_f, res.gamma_t,
                    wrap_angle(res.gamma), res.sigma)

    seeds = _child_seeds(cfg["seed"], betas.size)
    results = list(pool.map(point, zip(betas, seeds)))
    rows = [(b, *vals) for b, vals in zip(betas, results)]
    path = _write_csv(os.path.join(cfg["out"], "flux_scan.csv"),
                      ["beta", "gamma", "gamma_f", "gamma_t", "wrapped",
                       "sigma"],
                      rows, config_hash(cfg))
    return [path]


def cmd_loop_sim(cfg: dict, pool) -> list[str]:
    """One finite-time loop traversal: full trajectory plus ellipsoid frames."""
    from .dynamics import (DephasingModel, RampSchedule, adiabatic_loop_run,
                           export_trajectory_csv)
    from .topology import LoopSpec, chart_track

    c = CouplingParams(cfg["alpha"], cfg["beta"])
    center = tuple(cfg["center"])
    loop = LoopSpec("circle", center, cfg["r"], 512, cfg["k0"], c)
    model = DephasingModel.from_pair_times() if cfg["dephasing"] else None
    # branch choices resolved against the static eigenstate track, the
    # same reference the measured reconstruction uses
    guide = chart_track(LoopSpec("circle", center, cfg["r"],
                                 cfg["tau_samples"], 1.0, c))
    run = adiabatic_loop_run(None, RampSchedule(loop, cfg["total_time"]),
                             model=model, tau_samples=cfg["tau_samples"],
                             guide=guide)
    h = config_hash(cfg)

    traj_path = os.path.join(cfg["out"], "loop_trajectory.csv")
    with open(traj_path, "w", newline="") as fh:
        fh.write(f"# config-hash: {h}\n")
        export_trajectory_csv(run, fh)

    frames = []
    for ft in cfg["frame_taus"]:
        i = int(np.argmin(np.abs(run.taus - ft * np.pi)))
        m = SpinMoments(vector=run.vectors[i], tensor=run.tensors[i])
        e = ellipsoid(covariance_tensor(m))
        frames.append({
            "tau_over_pi": float(run.taus[i] / np.pi),
            "time": float(run.times[i]),
            "arrow": [float(v) for v in run.vectors[i]],
            "axis_lengths": [float(v) for v in e.lengths],
            "axes": [[float(x) for x in e.axes[:, j]] for j in range(3)],
            "purity": float(run.purity[i]),
        })
    payload = {
        "command": "loop-sim",
        "config": _public(cfg),
        "config_hash": h,
        "flux": {
            "gamma": float(run.flux.gamma),
            "gamma_f": float(run.flux.gamma_f),
            "gamma_t": float(run.flux.gamma_t),
            "wrapped": float(run.flux.wrapped),
        },
        "frames": frames,
    }
    frames_path = _write_json(os.path.join(cfg["out"],
                                           "ellipsoid_frames.json"), payload)
    return [traj_path, frames_path]


def cmd_alpha_jump(cfg: dict, pool) -> list[str]:
    """Polar ground-state arrow and ellipsoid across the level crossing."""
    _require(cfg["alpha_max"] >= cfg["alpha_min"],
             "alpha_max must be >= alpha_min")
    alphas = np.linspace(cfg["alpha_min"], cfg["alpha_max"],
                         cfg["alpha_points"])
    k0, band = cfg["k0"], cfg["band"]
    rows = []
    for a in alphas:
        vals, vecs = sphere_eigensystem(k0, 0.0, 0.0,
                                        CouplingParams(a, cfg["beta"]))
        gap01 = float(vals[1] - vals[0])
        isolation = min(vals[band] - vals[band - 1] if band > 0 else np.inf,
                        vals[band + 1] - vals[band] if band < 2 else np.inf)
        if isolation < 1e-9 * k0:
            # crossing point: the band has no unique state there
            rows.append((a, *(np.nan,) * 6, gap01))
            continue
        m = moments(vecs[:, band])
        e = ellipsoid(covariance_tensor(m))
        rows.append((a, m.vector[2], *e.lengths, m.vector[0], m.vector[1],
                     gap01))
    path = _write_csv(os.path.join(cfg["out"], "alpha_jump.csv"),
                      ["alpha", "f_z", "axis_a", "axis_b", "axis_c",
                       "f_x", "f_y", "gap01"],
                      rows, config_hash(cfg))
    return [path]


def cmd_vortex(cfg: dict, pool) -> list[str]:
    """Arrow azimuth around a small polar circle, winding included."""
    from .topology import vortex_scan

    _require(0.0 < cfg["latitude"] < np.pi, "latitude must lie in (0, pi)")
    scan = vortex_scan(CouplingParams(cfg["alpha"], cfg["beta"]),
                       latitude=cfg["latitude"], samples=cfg["samples"],
                       k0=cfg["k0"], band=cfg["band"])
    rows = np.column_stack([scan.params, scan.azimuth])
    path = _write_csv(os.path.join(cfg["out"], "vortex.csv"),
                      ["phi", "phi_f"], rows, config_hash(cfg),
                      extra_comments=(f"winding: {scan.winding}",))
    return [path]


_COMMANDS = {
    "phase-diagram": cmd_phase_diagram,
    "flux-scan": cmd_flux_scan,
    "loop-sim": cmd_loop_sim,
    "alpha-jump": cmd_alpha_jump,
    "vortex": cmd_vortex,
}

_HELP = {
    "phase-diagram": "band charge over a coupling grid (JSON grid + mask)",
    "flux-scan": "loop flux versus transverse coupling (CSV)",
    "loop-sim": "finite-time loop traversal (trajectory CSV + frames JSON)",
    "alpha-jump": "polar ground-state moments across the crossing (CSV)",
    "vortex": "arrow azimuth around a polar circle (CSV)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spin1topo",
        description="Spin-1 monopole simulations: plot-ready data files.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    for name in _COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", metavar="FILE",
                        help="JSON file overriding schema defaults")
        sp.add_argument("--out", metavar="DIR",
                        help="output directory (default: .)")
        sp.add_argument("--threads", type=int, metavar="N",
                        help="worker pool size (default: available cores)")
        sp.add_argument("--seed", type=int, metavar="N", help="base RNG seed")
        if name == "flux-scan":
            sp.add_argument("--dynamics", action="store_true",
                            help="finite ramp + measurement pipeline "
                                 "(adds error bars)")
            sp.add_argument("--ideal", action="store_true",
                            help="static eigenstates (default)")
            sp.add_argument("--r", type=float, metavar="R",
                            help="loop radius override")
    return parser


def _overrides_from_args(args) -> dict:
    overrides = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.command == "flux-scan":
        if args.dynamics and args.ideal:
            raise ConfigError("--dynamics and --ideal are mutually exclusive")
        if args.dynamics:
            overrides["mode"] = "dynamics"
        if args.ideal:
            overrides["mode"] = "ideal"
        if args.r is not None:
            overrides["r"] = args.r
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, load_config_file(args.config),
                             _overrides_from_args(args))
        threads = args.threads if args.threads else (os.cpu_count() or 1)
        _require(threads >= 1, "--threads must be >= 1")
        os.makedirs(cfg["out"], exist_ok=True)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            paths = _COMMANDS[args.command](cfg, pool)
    except ConfigError as e:
        print(f"ConfigError: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"ConfigError: {e}", file=sys.stderr)
        return 2
    except Spin1TopoError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
