"""Command-line entry point.

Every command reads one JSON config (``--config``); ``--set key.sub=value``
overrides individual keys (values parsed as JSON when possible), and the
common flags ``--seed`` and ``--out`` override ``seed`` and ``out``. Each run
writes a ``manifest.json`` next to its outputs.

Exit codes: 0 success, 2 configuration or input error, 3 no result,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (assemble_2d_map, binned_correlation, extract_ridge, fit_anticrossing_spectrum,
                       fit_correlation_model, fit_folded_gaussian, fit_rician, resample_spline, save_map2d,
                       save_ridge)
from .analysis.correlation import bins_to_rows
from .analysis.ridge import ridge_rms_error
from .forward import NoiseConfig, load_map, save_map, simulate_dqd_scan, simulate_shuttle_map, simulate_tau_resolved
from .io import file_digest, read_csv_columns, write_csv, write_json
from .landscape import LandscapeSpec, load_landscape, save_landscape, synthesize_landscape
from .magnetospec import (ScanSynthConfig, analyse_tracks, cross_capacitance_ratio, default_gate_layout,
                          load_scan, save_scan, synthesize_scans, track_pair, triangulate,
                          y_displacement_calibration)
from .physics import TABLE1, SpinValleyParams, anticrossing_center
from .pulses import ShuttleWaveform, StageTimeline

log = logging.getLogger("vsmap")

OUTPUT_ROOT_ENV = "VSMAP_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_NO_RESULT, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class NoResult(Exception):
    pass


DEFAULTS = {
    "synth-landscape": {"landscape": {}},
    "simulate-map": {
        "mode": "shuttle",
        "landscape": None,
        "y_offset_nm": 0.0,
        "d_nm": [0.0, 208.6, 150],
        "B_T": [0.05, 0.56, 80],
        "tau_s": [0.0, 1.5e-6, 100],
        "tau_w_s": [0.0, 1e-6, 50],
        "params": None,
        "noise": {"T2_star": 1e-6, "a": 0.35, "c": 0.5, "shots": 1000},
        "timeline": {},
        "waveform": {},
        "max_step_s": 1e-9,
    },
    "extract": {
        "maps": [],
        "band_halfwidth_T": 0.030,
        "threshold": 3.0,
        "pitch_nm": 1.4,
        "bin_width_nm": 1.4,
        "distance": "geometric",
        "D_max_nm": 28.0,
        "truth_landscape": None,
    },
    "magnetospec": {
        "scan01": None,
        "scan12": None,
        "synthetic": {},
        "width_samples": None,
        "noise_subtraction": True,
        "refit": True,
        "fit_T": False,
        "alpha": None,
        "T": 0.1,
        "triangulation": None,
    },
    "fit-anticrossing": {"spectrum": None},
}
STOCHASTIC = {"synth-landscape", "simulate-map", "magnetospec"}


# ------------------------------------------------------------------ config

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(command: str, args) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(cfg, k.strip(), _parse_value(v))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if "out" not in cfg or cfg["out"] is None:
        root = os.environ.get(OUTPUT_ROOT_ENV, "vsmap-out")
        cfg["out"] = str(Path(root) / command)
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError(f"{command} needs a seed (--seed or config key 'seed')")
    return cfg


def _axis(spec, name):
    try:
        lo, hi, n = spec
        n = int(n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be [start, stop, count]") from exc
    if n < 1:
        raise ConfigError(f"{name} needs at least one point")
    return np.linspace(float(lo), float(hi), n)


def _need_file(path, what):
    if path is None:
        raise ConfigError(f"missing {what}")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------- commands

def _landscape_spec(cfg: dict) -> LandscapeSpec:
    d = dict(cfg.get("landscape") or {})
    try:
        return LandscapeSpec.from_dict(d) if d else LandscapeSpec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid landscape spec: {exc}") from exc


def cmd_synth_landscape(cfg: dict, out: Path) -> tuple[list, list]:
    spec = _landscape_spec(cfg)
    try:
        land = synthesize_landscape(spec, int(cfg["seed"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    files = save_landscape(land, out)
    return [], list(files.values())


def _noise(cfg: dict) -> NoiseConfig:
    n = dict(cfg.get("noise") or {})
    shots = n.get("shots", 1000)
    shots = None if shots in (0, None) else int(shots)
    try:
        return NoiseConfig(T2_star=float(n.get("T2_star", 1e-6)), a=float(n.get("a", 0.35)),
                           c=float(n.get("c", 0.5)), shots=shots, seed=int(cfg["seed"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid noise config: {exc}") from exc


def cmd_simulate_map(cfg: dict, out: Path) -> tuple[list, list]:
    mode = cfg.get("mode")
    noise = _noise(cfg)
    B = _axis(cfg["B_T"], "B_T")
    inputs = []
    try:
        timeline = StageTimeline.from_config(cfg.get("timeline") or {})
        waveform = ShuttleWaveform.from_config(cfg.get("waveform") or {})
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid pulse configuration: {exc}") from exc
    if mode == "dqd":
        params = SpinValleyParams(**cfg["params"]) if cfg.get("params") else TABLE1
        pm = simulate_dqd_scan(params, B, _axis(cfg["tau_s"], "tau_s"), noise)
    elif mode in ("shuttle", "tau"):
        ldir = _need_file(cfg.get("landscape"), "landscape directory")
        land = load_landscape(ldir)
        inputs = sorted(p for p in ldir.iterdir() if p.name.startswith("landscape"))
        y = float(cfg.get("y_offset_nm", 0.0))
        try:
            if mode == "shuttle":
                pm = simulate_shuttle_map(land, _axis(cfg["d_nm"], "d_nm"), B, timeline, noise, y,
                                          waveform=waveform, max_step=float(cfg["max_step_s"]))
            else:
                d_list = np.atleast_1d(np.asarray(cfg.get("d_list_nm", [100.0]), dtype=float))
                pm = simulate_tau_resolved(land, d_list, _axis(cfg["tau_w_s"], "tau_w_s"), B, timeline, noise, y,
                                           waveform=waveform, max_step=float(cfg["max_step_s"]))
        except ValueError as exc:
            raise ConfigError(f"landscape and scan do not match: {exc}") from exc
    else:
        raise ConfigError(f"unknown mode {mode!r} (shuttle, dqd or tau)")
    # the echo inside data files leaves out the output location so reruns elsewhere match
    echo = {k: v for k, v in cfg.items() if k != "out"}
    if isinstance(pm, list):
        outputs = []
        for k, m in enumerate(pm):
            outputs += list(save_map(m, out / f"map_{k}.csv", echo))
        return inputs, outputs
    return inputs, list(save_map(pm, out / "map.csv", echo))


def cmd_extract(cfg: dict, out: Path) -> tuple[list, list]:
    entries = cfg.get("maps") or []
    if not entries:
        raise ConfigError("extract needs at least one map (config key 'maps')")
    inputs, outputs = [], []
    dense = []
    ridges = []
    for k, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"path": entry}
        path = _need_file(entry.get("path"), "map file")
        inputs.append(path)
        pm = load_map(path)
        y = entry.get("y_offset_nm", (pm.meta or {}).get("y_offset_nm", 0.0))
        trace = extract_ridge(pm, float(cfg["band_halfwidth_T"]), float(cfg["threshold"]), float(y))
        ridges.append(trace)
        outputs.append(save_ridge(trace, out / f"ridge_{k}.csv"))
        dt = resample_spline(trace, float(cfg["pitch_nm"]))
        dense.append(dt)
        outputs.append(write_csv(out / f"resampled_{k}.csv", ["d_nm", "E_VS_ueV"],
                                 ((d, e if np.isfinite(e) else "") for d, e in zip(dt.d, dt.E_VS))))
    if not any(r.valid.any() for r in ridges):
        raise NoResult("no valid anticrossing in any map")

    report: dict = {"traces": [{"y_offset_nm": r.y_offset, "valid": int(r.valid.sum()), "total": int(r.valid.size)}
                               for r in ridges]}
    if len(dense) >= 2:
        m2 = assemble_2d_map(dense, pitch=float(cfg["pitch_nm"]))
        outputs.append(save_map2d(m2, out / "map2d.csv"))
    report["two_dimensional"] = len(dense) >= 2

    xs = np.concatenate([t.d for t in dense])
    ys = np.concatenate([np.full(t.d.size, t.y_offset) for t in dense])
    Es = np.concatenate([t.E_VS for t in dense])
    ok = np.isfinite(Es)
    if ok.sum() >= 2:
        bins = binned_correlation(xs, ys, Es, float(cfg["bin_width_nm"]), cfg["distance"])
        outputs.append(write_csv(out / "correlation.csv", ["D_nm", "corr", "pairs"], bins_to_rows(bins)))
        try:
            cf = fit_correlation_model(bins, float(cfg["D_max_nm"]))
            report["correlation"] = {**cf.report.to_dict(), "a_dot_nm": cf.model.a_dot, "E_orb_meV": cf.E_orb_meV}
        except ValueError as exc:
            report["correlation"] = {"error": str(exc)}
        samples = Es[ok]
        samples = samples[samples > 0]
        if samples.size >= 2:
            rp, rr = fit_rician(samples)
            fp, fr = fit_folded_gaussian(samples)
            report["rician"] = {**rr.to_dict(), **asdict(rp)}
            report["folded_gaussian"] = {**fr.to_dict(), **asdict(fp)}

    truth = cfg.get("truth_landscape")
    if truth:
        land = load_landscape(_need_file(truth, "truth landscape"))
        cmp = []
        for r in ridges:
            E_true, _, _ = land.sample_at(r.d, np.full(r.d.size, r.y_offset))
            B_true = anticrossing_center(E_true)
            cmp.append({"y_offset_nm": r.y_offset, "rms_B_error_T": ridge_rms_error(r, B_true),
                        "valid": int(r.valid.sum())})
        report["comparison"] = cmp
    outputs.append(write_json(out / "report.json", report))
    return inputs, outputs


def _magnetospec_once(cfg: dict, out: Path, tag: str, seed: int):
    inputs = []
    if cfg.get("scan01") or cfg.get("scan12"):
        p01 = _need_file(cfg.get("scan01"), "scan01")
        p12 = _need_file(cfg.get("scan12"), "scan12")
        s01, s12 = load_scan(p01), load_scan(p12)
        inputs += [p01, p12]
        truth = None
    else:
        syn = dict(cfg.get("synthetic") or {})
        syn["seed"] = seed
        try:
            sc = ScanSynthConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in syn.items()})
        except TypeError as exc:
            raise ConfigError(f"invalid synthetic scan config: {exc}") from exc
        s01, s12, truth = synthesize_scans(sc)
        if cfg.get("save_scans"):
            save_scan(s01, out / f"scan01{tag}.csv")
            save_scan(s12, out / f"scan12{tag}.csv")
    if not cfg.get("refit", True) and (cfg.get("alpha") is None or cfg.get("T") is None):
        raise ConfigError("alpha and T are required when refit is disabled")
    t01, t12 = track_pair(s01, s12, cfg.get("width_samples"))
    res = analyse_tracks(t01, t12, bool(cfg.get("noise_subtraction", True)), alpha=cfg.get("alpha"),
                         T=cfg.get("T"), refit=bool(cfg.get("refit", True)), fit_T=bool(cfg.get("fit_T", False)))
    if not np.isfinite(res.E_ST):
        raise FloatingPointError("E_ST fit did not produce a finite value")
    outputs = []
    rows = ((b, v1, s1, int(ok1), v2, s2, int(ok2), c) for b, v1, s1, ok1, v2, s2, ok2, c in
            zip(t01.B, t01.V, t01.sigma, t01.valid, t12.V, t12.sigma, t12.valid, res.cleaned12))
    outputs.append(write_csv(out / f"transitions{tag}.csv",
                             ["B_T", "V01_V", "V01_sigma_V", "valid01", "V12_V", "V12_sigma_V", "valid12",
                              "V12_clean_V"],
                             ([x if np.isfinite(x) else "" for x in r] for r in rows)))
    report = res.report()
    if truth is not None:
        report["truth"] = {"E_ST_ueV": sc.E_ST, "alpha_eV_per_V": sc.alpha, "T_K": sc.T}
    return inputs, outputs, report


def cmd_magnetospec(cfg: dict, out: Path) -> tuple[list, list]:
    inputs, outputs = [], []
    positions = int(cfg.get("positions", 1))
    reports = []
    for k in range(positions):
        tag = "" if positions == 1 else f"_{k}"
        i, o, rep = _magnetospec_once(cfg, out, tag, int(cfg["seed"]) + k)
        inputs += i
        outputs += o
        reports.append(rep)
    summary: dict = {"positions": reports if positions > 1 else reports[0]}
    tri = cfg.get("triangulation")
    if tri is not None:
        x = _axis(tri.get("x_nm", [-30, 30, 121]), "x_nm")
        y = _axis(tri.get("y_nm", [-30, 30, 121]), "y_nm")
        kernels = default_gate_layout(float(tri.get("kernel_width_nm", 50.0)))
        a = cross_capacitance_ratio(kernels, "SB", "ST", x, y, measured=tuple(tri.get("alpha_SB_ST", [1.25, 0.10])))
        b = cross_capacitance_ratio(kernels, "LB", "RB", x, y, measured=tuple(tri.get("alpha_LB_RB", [0.78, 0.08])))
        res = triangulate(a, b)
        outputs.append(write_csv(out / "ratio_SB_ST.csv", ["x_nm", "y_nm", "ratio"], a.rows()))
        outputs.append(write_csv(out / "ratio_LB_RB.csv", ["x_nm", "y_nm", "ratio"], b.rows()))
        summary["triangulation"] = asdict(res)
        # one entry per dot position: {"alpha_SB_ST": [v, s], "alpha_LB_RB": [v, s]}
        batch = tri.get("batch") or []
        if batch:
            try:
                summary["triangulation_batch"] = [
                    asdict(triangulate(a.with_measurement(*m["alpha_SB_ST"]), b.with_measurement(*m["alpha_LB_RB"])))
                    for m in batch]
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"invalid triangulation batch entry: {exc}") from exc
        if "calibration" in tri:
            pts = np.asarray(tri["calibration"], dtype=float)
            slope, sig = y_displacement_calibration(pts[:, 0], pts[:, 1])
            summary["y_calibration_nm_per_V"] = {"value": slope, "sigma": sig}
    outputs.append(write_json(out / "report.json", summary))
    return inputs, outputs


def cmd_fit_anticrossing(cfg: dict, out: Path) -> tuple[list, list]:
    path = _need_file(cfg.get("spectrum"), "spectrum file")
    cols = read_csv_columns(path, ["B_T", "nu_Hz"])
    sigma = cols.get("sigma_Hz")
    rep = fit_anticrossing_spectrum(cols["B_T"], cols["nu_Hz"], sigma)
    if not np.all(np.isfinite(rep.estimates)):
        raise FloatingPointError("non-finite fit result")
    return [path], [write_json(out / "report.json", rep.to_dict())]


COMMANDS = {
    "synth-landscape": cmd_synth_landscape,
    "simulate-map": cmd_simulate_map,
    "extract": cmd_extract,
    "magnetospec": cmd_magnetospec,
    "fit-anticrossing": cmd_fit_anticrossing,
}


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsmap", description="Valley-splitting mapping toolkit")
    p.add_argument("--version", action="version", version=f"vsmap {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted path)")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<command>)")
    return p


def write_manifest(out: Path, command: str, cfg: dict, inputs, outputs, duration: float) -> Path:
    def digests(paths):
        return {str(Path(p)): file_digest(p) for p in paths}

    return write_json(out / "manifest.json", {
        "command": command,
        "version": __version__,
        "config": cfg,
        "duration_s": duration,
        "inputs": digests(inputs),
        "outputs": digests(outputs),
    })


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args.command, args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        inputs, outputs = COMMANDS[args.command](cfg, out)
        write_manifest(out, args.command, cfg, inputs, outputs, time.perf_counter() - t0)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoResult as exc:
        print(f"no result: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
