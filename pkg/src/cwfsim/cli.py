"""Command-line front end: `cwfsim run <config.yaml> [--seed] [--out] [--preset] [--threads]`.

Every run writes one CSV per observable plus a manifest.json carrying
the fully resolved configuration, the seed, invariant-check results and
timings.  CSV bodies are deterministic for a given (config, seed): same
column order, 17-significant-digit floats, '.' decimal separator, LF
line endings, no timestamps.  The process exits nonzero iff a run-level
invariant check fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import device as devmod, presets
from .config import ConfigError, RunConfig, SCHEMA_VERSION, parse_config_file
from .constants import EV, NM, PS, elementary_charge

OUT_DIR_ENV = "CWFSIM_OUT"

# estimator cross-check: biases whose |current| sits under kappa·e·sqrt(gross)/T
# are statistically zero and excluded from the 5% agreement gate
NOISE_FLOOR_KAPPA = 5.0
ESTIMATOR_REL_TOL = 0.05


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_table(path: Path, columns, rows, meta: dict):
    """CSV with a '# key: json' preamble embedding config and seed."""
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return {"columns": list(columns), "rows": len(rows)}


def _meta(cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "preset": cfg.preset,
        "config": cfg.resolved,
    }


# ----- config → objects -----


def device_from_config(cfg: RunConfig, bias_v: float = 0.0) -> devmod.DeviceSpec:
    d = cfg["device"]
    return devmod.resonant_tunneling_device(
        barrier_height_ev=d["barrier_height_ev"],
        barrier_width_m=d["barrier_width_nm"] * NM,
        well_width_m=d["well_width_nm"] * NM,
        total_length_m=d["total_length_nm"] * NM,
        fermi_level_ev=d["fermi_level_ev"],
        temperature_k=d["temperature_k"],
        mass_ratio=d["effective_mass_ratio"],
        bias_v=bias_v,
        relative_permittivity=d["relative_permittivity"],
        cross_section_m2=d["cross_section_nm2"] * NM * NM,
    )


def layout_from_config(cfg: RunConfig) -> devmod.BoxLayout:
    from .fields import Grid1D

    return devmod.BoxLayout(
        Grid1D(cfg["grid"]["box_length_nm"] * NM, cfg["grid"]["n"]),
        cfg["absorber"]["margin_fraction"],
        cfg["injection"]["sigma_nm"] * NM,
    )


def mechanisms_from_config(cfg: RunConfig):
    from . import scattering

    sc = cfg["scattering"]
    if not sc["enabled"]:
        return ()
    temp = cfg["device"]["temperature_k"]
    if not sc["mechanisms"]:
        return tuple(presets.default_mechanisms(temp))
    out = []
    for m in sc["mechanisms"]:
        out.append(
            scattering.Mechanism(
                scattering.MechanismKind(m["kind"]),
                float(m["rate_per_s"]),
                phonon_energy_ev=float(m.get("phonon_energy_ev", scattering.OPTICAL_PHONON_EV)),
                temperature_k=float(m.get("temperature_k", temp)),
            )
        )
    return tuple(out)


def params_from_config(cfg: RunConfig, device: devmod.DeviceSpec, layout: devmod.BoxLayout) -> devmod.RunParams:
    t = cfg["time"]
    dt = t["dt_fs"] * 1e-15 if t["dt_fs"] is not None else devmod.suggest_dt(device, layout)
    total = t["total_ps"] * PS
    dm = cfg["density_matrix"]
    return devmod.RunParams(
        dt=dt,
        n_steps=max(1, int(round(total / dt))),
        electron_cap=cfg["electron_cap"],
        kick_substeps=cfg["scattering"]["kick_substeps"],
        absorber_strength_ev=cfg["absorber"]["strength_ev"],
        warmup_fraction=t["warmup_fraction"],
        sample_stride=t["sample_stride"],
        density_matrix_stride=dm["stride"],
        density_matrix_dim=dm["dim"],
    )


# ----- preset runners -----


def noise_floor(gross: int, window_s: float) -> float:
    return NOISE_FLOOR_KAPPA * elementary_charge * math.sqrt(max(gross, 1)) / window_s


def _run_rtd(cfg: RunConfig, out: Path, threads: int) -> tuple[dict, dict]:
    device = device_from_config(cfg)
    layout = layout_from_config(cfg)
    mechanisms = mechanisms_from_config(cfg)
    params = params_from_config(cfg, device, layout)
    adaptive = "time.dt_fs" not in cfg.provided_keys
    points, records = devmod.iv_sweep(
        device,
        layout,
        mechanisms,
        params,
        cfg["bias"]["values_v"],
        cfg.seed,
        threads=threads,
        adaptive_dt=adaptive,
    )
    meta = _meta(cfg)
    files = {}
    files["iv.csv"] = write_table(
        out / "iv.csv",
        [
            "bias_v",
            "current_counting_a",
            "current_ramo_a",
            "gross_crossings",
            "injected",
            "collisions_per_second",
            "collisions_per_transit",
            "converged",
        ],
        [
            (
                p.bias_v,
                p.current_counting_a,
                p.current_ramo_a,
                p.gross_crossings,
                p.injected,
                p.collisions_per_second,
                p.collisions_per_transit,
                p.converged,
            )
            for p in points
        ],
        meta,
    )
    ts_rows, ev_rows, tr_rows, pos_rows, book_rows = [], [], [], [], []
    all_balanced = True
    all_positive = True
    estimator_ok = True
    for p, rec in zip(points, records):
        for t, ic, nc, na in zip(rec.times, rec.ramo_current, rec.net_crossings, rec.alive_count):
            ts_rows.append((p.bias_v, t, ic, nc, na))
        for t, bid, kind, q, de in rec.events:
            ev_rows.append((p.bias_v, t, bid, kind, q, de))
        for t, posmap in rec.trajectory_samples:
            for bid, x in sorted(posmap.items()):
                tr_rows.append((p.bias_v, t, bid, x))
        for t, rep in rec.positivity_samples:
            pos_rows.append((p.bias_v, t, rep.min_eigenvalue, rep.trace, rep.hermiticity_deviation, rep.passed))
            all_positive &= rep.passed
        book = devmod.charge_bookkeeping(rec)
        book_rows.append(
            (
                p.bias_v,
                book["injected"],
                book["transmitted"],
                book["reflected"],
                book["absorbed"],
                book["still_inside"],
                book["balanced"],
            )
        )
        all_balanced &= book["balanced"]
        window = rec.window[1] - rec.window[0]
        floor = noise_floor(p.gross_crossings, window)
        scale = max(abs(p.current_counting_a), abs(p.current_ramo_a), floor)
        if p.converged:
            rel = abs(p.current_counting_a - p.current_ramo_a) / scale
            estimator_ok &= rel <= ESTIMATOR_REL_TOL
    files["timeseries.csv"] = write_table(
        out / "timeseries.csv",
        ["bias_v", "time_s", "ramo_current_a", "net_crossings", "alive"],
        ts_rows,
        meta,
    )
    files["events.csv"] = write_table(
        out / "events.csv",
        ["bias_v", "time_s", "bundle_id", "mechanism", "q_per_m", "delta_e_ev"],
        ev_rows,
        meta,
    )
    files["trajectories.csv"] = write_table(
        out / "trajectories.csv", ["bias_v", "time_s", "bundle_id", "x_m"], tr_rows, meta
    )
    files["positivity.csv"] = write_table(
        out / "positivity.csv",
        ["bias_v", "time_s", "min_eigenvalue", "trace", "hermiticity_deviation", "passed"],
        pos_rows,
        meta,
    )
    files["bookkeeping.csv"] = write_table(
        out / "bookkeeping.csv",
        ["bias_v", "injected", "transmitted", "reflected", "absorbed", "still_inside", "balanced"],
        book_rows,
        meta,
    )
    invariants = {
        "charge_bookkeeping_balanced": bool(all_balanced),
        "density_matrix_positive": bool(all_positive),
        "estimator_agreement": bool(estimator_ok),
    }
    return files, invariants


def _packet_rows(rec: presets.DiracRecord):
    rows = []
    for i, t in enumerate(rec.times):
        cx, cy = rec.centroid[i]
        kx, ky = rec.k_mean[i]
        vx, vy = rec.centroid_velocity[i]
        rows.append((t, cx, cy, kx, ky, rec.band_plus[i], rec.band_minus[i], vx, vy, rec.norm2[i]))
    return rows


_PACKET_COLS = [
    "time_s",
    "centroid_x_m",
    "centroid_y_m",
    "k_mean_x_per_m",
    "k_mean_y_per_m",
    "band_plus",
    "band_minus",
    "velocity_x_m_per_s",
    "velocity_y_m_per_s",
    "norm2",
]


def _trajectory_rows(rec: presets.DiracRecord):
    rows = []
    for t, pts in rec.trajectories:
        for j, (x, y) in enumerate(pts):
            rows.append((t, j, x, y))
    return rows


def _run_graphene(cfg: RunConfig, out: Path) -> tuple[dict, dict]:
    d = cfg["dirac"]
    shape = tuple(int(v) for v in cfg["grid2d"]["shape"])
    lengths = tuple(float(v) * NM for v in cfg["grid2d"]["lengths_nm"])
    setup = presets.GrapheneCollisionSetup(
        band_flip=bool(d["band_flip"]),
        k0_mag=d["k0_per_m"],
        sigma_m=d["sigma_nm"] * NM,
        new_angle_rad=math.radians(d["new_angle_deg"]),
        lengths_m=lengths,
        shape=shape,
        dt_s=d["dt_fs"] * 1e-15,
        pre_collision_s=d["pre_ps"] * PS,
        post_collision_s=d["post_ps"] * PS,
        absorber_ev=cfg["absorber"]["strength_ev"],
    )
    rec = presets.run_graphene_collision(setup, cfg.seed)
    meta = _meta(cfg)
    files = {}
    files["packet.csv"] = write_table(out / "packet.csv", _PACKET_COLS, _packet_rows(rec), meta)
    files["trajectories2d.csv"] = write_table(
        out / "trajectories2d.csv", ["time_s", "trajectory_id", "x_m", "y_m"], _trajectory_rows(rec), meta
    )
    ev = rec.collision
    files["collision.csv"] = write_table(
        out / "collision.csv",
        ["time_s", "k0x_per_m", "k0y_per_m", "kfx_per_m", "kfy_per_m", "qx_used_per_m", "qy_used_per_m", "band_flip_m", "delta_e_j"],
        [
            (
                rec.collision_step * rec.dt,
                ev.k0[0],
                ev.k0[1],
                ev.kf[0],
                ev.kf[1],
                rec.q_used[0],
                rec.q_used[1],
                ev.band_flip_m,
                ev.delta_e_j,
            )
        ],
        meta,
    )
    weights_ok = all(abs(bp + bm - 1.0) < 1e-9 for bp, bm in zip(rec.band_plus, rec.band_minus))
    norm_ok = all(0.0 < n <= 1.0 + 1e-9 for n in rec.norm2)
    invariants = {"band_weights_sum_to_one": bool(weights_ok), "norm_bounded": bool(norm_ok)}
    return files, invariants


def _run_klein(cfg: RunConfig, out: Path) -> tuple[dict, dict]:
    d = cfg["dirac"]
    shape = tuple(int(v) for v in cfg["grid2d"]["shape"])
    lengths = tuple(float(v) * NM for v in cfg["grid2d"]["lengths_nm"])
    setup = presets.KleinSetup(
        barrier_ev=d["barrier_ev"],
        barrier_width_m=d["barrier_width_nm"] * NM,
        k0_mag=d["k0_per_m"],
        sigma_m=d["sigma_nm"] * NM,
        incidence_rad=math.radians(d["incidence_deg"]),
        lengths_m=lengths,
        shape=shape,
        dt_s=d["dt_fs"] * 1e-15,
        total_s=d["total_ps"] * PS,
        approach_m=d["approach_nm"] * NM,
        absorber_ev=cfg["absorber"]["strength_ev"],
    )
    scenarios = (
        ("normal", "oblique", "oblique_collision") if d["scenario"] == "all" else (d["scenario"],)
    )
    meta = _meta(cfg)
    files = {}
    rows = []
    trans_ok = True
    for sc in scenarios:
        res = presets.run_klein(setup, sc, cfg.seed)
        rows.append(
            (
                sc,
                res.transmission,
                res.collision_time_s if res.collision_time_s is not None else float("nan"),
                res.record.absorbed_left,
                res.record.absorbed_right,
            )
        )
        files[f"packet_{sc}.csv"] = write_table(
            out / f"packet_{sc}.csv", _PACKET_COLS, _packet_rows(res.record), meta
        )
        trans_ok &= -1e-9 <= res.transmission <= 1.0 + 1e-6
    files["klein.csv"] = write_table(
        out / "klein.csv",
        ["scenario", "transmission", "collision_time_s", "absorbed_left", "absorbed_right"],
        rows,
        meta,
    )
    return files, {"transmission_in_unit_interval": bool(trans_ok)}


def run(cfg: RunConfig, out_dir=None, threads=None) -> tuple[int, dict]:
    """Execute one configured run; returns (exit_code, manifest dict)."""
    out = Path(
        out_dir
        or cfg.resolved["out_dir"]
        or os.environ.get(OUT_DIR_ENV)
        or f"cwfsim_runs/{cfg.preset}_seed{cfg.seed}"
    )
    out.mkdir(parents=True, exist_ok=True)
    threads = threads if threads is not None else cfg.resolved["threads"]
    t0 = time.perf_counter()
    if cfg.preset in ("rtd_iv", "custom"):
        files, invariants = _run_rtd(cfg, out, threads)
    elif cfg.preset == "graphene_collision":
        files, invariants = _run_graphene(cfg, out)
    else:
        files, invariants = _run_klein(cfg, out)
    elapsed = time.perf_counter() - t0
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "preset": cfg.preset,
        "seed": cfg.seed,
        "resolved_config": cfg.resolved,
        "provided_keys": list(cfg.provided_keys),
        "files": files,
        "invariants": invariants,
        "timings": {"total_s": elapsed},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )
    ok = all(invariants.values())
    return (0 if ok else 1), manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cwfsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute one configured simulation")
    runp.add_argument("config", help="YAML configuration file")
    runp.add_argument("--seed", type=int, default=None, help="override the config seed")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--preset", default=None, help="override the config preset")
    runp.add_argument("--threads", type=int, default=None, help="parallel bias points")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config_file(args.config)
        if args.seed is not None or args.preset is not None:
            resolved = dict(cfg.resolved)
            if args.seed is not None:
                resolved["seed"] = args.seed
            if args.preset is not None:
                resolved["preset"] = args.preset
            import yaml as _yaml

            from .config import parse_config

            cfg = parse_config(_yaml.safe_dump(resolved))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    code, manifest = run(cfg, out_dir=args.out, threads=args.threads)
    status = "ok" if code == 0 else "INVARIANT VIOLATION"
    print(f"{cfg.preset} seed={cfg.seed}: {status}; wrote {len(manifest['files'])} tables")
    return code


if __name__ == "__main__":
    sys.exit(main())
