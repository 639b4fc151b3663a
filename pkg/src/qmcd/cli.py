"""Command-line front end: ``qmcd <subcommand> ...``."""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path


from . import __version__
from .config import DEFAULT_CONFIG_YAML, ConfigError, load_config
from .csvio import (
    CsvFormatError,
    atomic_write_text,
    format_csv,
    format_sweep_csv,
    read_timeseries_csv,
    write_trace_csv,
)
from .experiment import (
    analyze_trace,
    field_train,
    minimize_background,
    readout_stats,
    run_sweep,
)
from .quantum_noise import noise_floor_db, noise_floor_linear
from .sigproc import invert_first_harmonic, lock_in, shot_noise_bin_power, spectrum, synthesize

OUTPUT_DIR_ENV = "QMCD_OUTPUT_DIR"
DEFAULT_GAINS = (1.0, 1.5, 2.0, 2.5, 3.0, 5.0, 10.0)


class UsageError(Exception):
    pass


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or "qmcd-out"
    return Path(out)


def _claim_outputs(out: Path, names, force: bool):
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise UsageError(f"{out}: would overwrite {', '.join(clash)}; pass --force")
    out.mkdir(parents=True, exist_ok=True)


def _write_manifest(out: Path, command: str, run, seed: int, started: str, outputs, extra=None):
    manifest = {
        "tool": "qmcd",
        "tool_version": __version__,
        "command": command,
        "config_hash": run.config_hash,
        "master_seed": seed,
        "started_utc": started,
        "finished_utc": _utc_now(),
        "config": run.resolved,
        "outputs": {name: _sha256(out / name) for name in outputs},
    }
    if extra:
        manifest.update(extra)
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_run(args):
    run = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        resolved = dict(run.resolved, seed=args.seed)
        run = load_config(resolved)
    return run


def _tuned(run):
    """Sweep config with the second HWP tuned when the config asks for it."""
    cfg = run.sweep
    if not (run.minimize_background and cfg.train.background is not None):
        return cfg, None
    angle = minimize_background(field_train(cfg, 0.0))
    return replace(cfg, train=replace(cfg.train, second_hwp_angle=angle)), angle


# -- noise-floor ------------------------------------------------------------------

def cmd_noise_floor(args) -> int:
    if args.sweep:
        gains = args.gains or DEFAULT_GAINS
        etas = args.etas or [round(0.05 * k, 2) for k in range(1, 21)]
        for g in gains:
            if g < 1:
                raise UsageError("gain must be ≥ 1")
        for e in etas:
            if not 0 <= e <= 1:
                raise UsageError("eta must be in [0, 1]")
        text = format_csv(("gain", "eta", "noise_floor_dB"),
                          ((g, e, noise_floor_db(g, e)) for g in gains for e in etas))
        if args.out:
            atomic_write_text(args.out, text)
            print(f"wrote {len(gains) * len(etas)} rows to {args.out}")
        else:
            sys.stdout.write(text)
        return 0

    if args.budget:
        run = load_config(args.budget)
        gain = run.sweep.source.gain if args.gain is None else args.gain
        eta = run.sweep.losses.probe_transmission * run.sweep.sample_transmission if args.eta is None else args.eta
    else:
        if args.gain is None or args.eta is None:
            raise UsageError("give --gain and --eta, or --budget FILE")
        gain, eta = args.gain, args.eta
    if gain < 1:
        raise UsageError("gain must be ≥ 1")
    if not 0 <= eta <= 1:
        raise UsageError("eta must be in [0, 1]")
    db = noise_floor_db(gain, eta)
    print(f"gain {gain:g}  eta {eta:g}  variance {noise_floor_linear(gain, eta):.4f} x SNL  noise floor {db:.2f} dB")
    return 0


# -- simulate-sweep -----------------------------------------------------------------

def _plot_sweep(path: Path, results):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "qmcd"
    fig, ax = plt.subplots(figsize=(5, 3.6))
    colors = {"classical": "tab:red", "squeezed": "tab:green", "noiseless": "tab:gray"}
    for k, res in enumerate(results):
        shift = (k - (len(results) - 1) / 2) * 4.0
        ax.errorbar(res.fields * 1e3 + shift, res.mean_eta_f, yerr=res.std_eta_f, fmt="o", ms=3,
                    capsize=3, label=res.readout, color=colors.get(res.readout))
    ax.set_xlabel("B (mT)")
    ax.set_ylabel(r"$\Delta\eta_F$")
    ax.legend(frameon=False)
    fig.tight_layout()
    tmp = path.with_name(f".{path.name}.tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)


def cmd_simulate_sweep(args) -> int:
    started = _utc_now()
    run = _load_run(args)
    out = _out_dir(args)
    names = ("sweep.csv", "sweep.svg", "manifest.json")
    _claim_outputs(out, names, args.force)
    cfg, angle = _tuned(run)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    results = [run_sweep(replace(cfg, readout=r)) for r in run.readouts]
    atomic_write_text(out / "sweep.csv", format_sweep_csv(results))
    _plot_sweep(out / "sweep.svg", results)
    extra = {
        "error_bars": results[0].error_bar,
        "gain": cfg.source.gain,
        "zero_field_offsets": {r.readout: r.zero_field_offset for r in results},
    }
    if angle is not None:
        extra["second_hwp_deg"] = math.degrees(angle)
    _write_manifest(out, "simulate-sweep", run, cfg.seed, started, names[:2], extra)
    print(f"wrote {out / 'sweep.csv'} ({sum(len(r.points) for r in results)} rows)")
    return 0


# -- simulate-trace -------------------------------------------------------------------

def cmd_simulate_trace(args) -> int:
    started = _utc_now()
    run = _load_run(args)
    out = _out_dir(args)
    names = ("trace.csv", "snl.csv", "manifest.json")
    _claim_outputs(out, names, args.force)
    cfg, angle = _tuned(run)
    a = run.analyzer
    cfg = replace(cfg, demod=replace(cfg.demod, duration=a.duration))
    train = field_train(cfg, args.field_mT * 1e-3)
    fs = cfg.demod.sample_rate
    wavelength = cfg.source.wavelength
    sq = readout_stats(cfg, args.readout)
    snl_stats = readout_stats(cfg, "classical")
    snl_level = shot_noise_bin_power(snl_stats.mean_p + snl_stats.mean_c, fs, a.rbw, wavelength)

    traces = {}
    for name, stats in (("trace.csv", sq), ("snl.csv", snl_stats)):
        probe, conj = synthesize(train, stats, fs, a.duration, cfg.seed, wavelength)
        tr = spectrum(probe - conj, a.center, a.span, a.rbw, a.vbw, a.points)
        traces[name] = tr.relative_to(snl_level, "dB re SNL")
        write_trace_csv(out / name, traces[name])
    p_dc = float(probe.samples.mean())
    extra = {
        "readout": args.readout,
        "field_mT": args.field_mT,
        "snl_bin_power_W2": snl_level,
        "p_dc_W": p_dc,
        "configured_noise_floor_dB": sq.noise_floor_db if sq is not None else None,
        "analyzer": {"center_hz": a.center, "span_hz": a.span, "rbw_hz": a.rbw, "vbw_hz": a.vbw,
                     "points": a.points, "duration_s": a.duration},
    }
    if angle is not None:
        extra["second_hwp_deg"] = math.degrees(angle)
    _write_manifest(out, "simulate-trace", run, cfg.seed, started, names[:2], extra)
    print(f"wrote {out / 'trace.csv'} and {out / 'snl.csv'}; SNL bin power {snl_level:.6g} W^2, P_dc {p_dc:.6g} W")
    return 0


# -- analyze ----------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    try:
        snl = float(args.snl)
    except ValueError:
        snl = args.snl
    report = analyze_trace(
        args.trace, snl,
        band=tuple(args.band) if args.band else None,
        modulation_frequency=args.f_mod,
        guard=args.guard,
        p_dc=args.p_dc,
        reference_power=args.ref_power,
    )
    print(report.text())
    summary = report.as_dict()
    summary.update(trace=str(args.trace), snl=args.snl, tool_version=__version__)
    if args.json:
        atomic_write_text(args.json, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


# -- demodulate -------------------------------------------------------------------------

def cmd_demodulate(args) -> int:
    ts = read_timeseries_csv(args.input)
    h = lock_in(ts, args.f_ref, args.harmonic, args.tau)
    print(f"harmonic {h.harmonic_order} at {args.harmonic * args.f_ref:g} Hz: amplitude {h.amplitude:.9g} W, "
          f"phase {h.phase:.6f} rad, integration {h.integration_time:.6g} s")
    summary = {
        "harmonic": h.harmonic_order,
        "f_ref_hz": args.f_ref,
        "amplitude_W": h.amplitude,
        "phase_rad": h.phase,
        "in_phase_W": h.in_phase,
        "quadrature_W": h.quadrature,
        "integration_time_s": h.integration_time,
    }
    if args.harmonic == 1:
        p_dc = args.p_dc if args.p_dc is not None else float(ts.samples.mean())
        # the sin(w t) term enters the detector power with a minus sign
        eta = invert_first_harmonic(-h.in_phase, p_dc, args.delta0)
        print(f"P_dc {p_dc:.9g} W -> eta_F = {eta:.9g}")
        summary.update(p_dc_W=p_dc, eta_f=eta)
    if args.json:
        atomic_write_text(args.json, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_config_template(args) -> int:
    sys.stdout.write(DEFAULT_CONFIG_YAML)
    return 0


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")

    p = argparse.ArgumentParser(prog="qmcd", description="Squeezed-light MCD polarimetry simulator.")
    p.add_argument("--version", action="version", version=f"qmcd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("noise-floor", parents=[common], help="intensity-difference noise floor")
    s.add_argument("--gain", type=float)
    s.add_argument("--eta", type=float, help="equal per-arm transmission")
    s.add_argument("--budget", help="experiment config; eta is its probe-arm transmission")
    s.add_argument("--sweep", action="store_true", help="emit a (gain, eta, dB) grid CSV")
    s.add_argument("--gains", type=float, nargs="+")
    s.add_argument("--etas", type=float, nargs="+")
    s.add_argument("--out", help="CSV path for --sweep (default stdout)")
    s.set_defaults(func=cmd_noise_floor)

    s = sub.add_parser("simulate-sweep", parents=[common], help="field sweep -> sweep.csv, sweep.svg")
    s.add_argument("config", nargs="?", help="YAML config (defaults if omitted)")
    s.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./qmcd-out)")
    s.add_argument("--force", action="store_true", help="overwrite existing outputs")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate_sweep)

    s = sub.add_parser("simulate-trace", parents=[common], help="synthetic analyzer trace -> trace.csv")
    s.add_argument("config", nargs="?")
    s.add_argument("--out")
    s.add_argument("--force", action="store_true")
    s.add_argument("--field-mT", dest="field_mT", type=float, default=0.0)
    s.add_argument("--readout", choices=("squeezed", "classical"), default="squeezed")
    s.set_defaults(func=cmd_simulate_trace)

    s = sub.add_parser("analyze", parents=[common], help="squeezing and sideband level of a trace CSV")
    s.add_argument("trace")
    s.add_argument("--snl", required=True, help="SNL reference trace CSV or scalar dB level")
    s.add_argument("--band", type=float, nargs=2, metavar=("FMIN", "FMAX"))
    s.add_argument("--f-mod", dest="f_mod", type=float, default=50e3)
    s.add_argument("--guard", type=float, default=10e3, help="half width excluded around f-mod (Hz)")
    s.add_argument("--p-dc", dest="p_dc", type=float, help="DC probe power (W) for the ellipticity")
    s.add_argument("--ref-power", dest="ref_power", type=float,
                   help="linear power (W^2) of the trace's 0 dB level")
    s.add_argument("--json", help="write a JSON summary here")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("demodulate", parents=[common], help="lock-in on a t_s,power_W CSV")
    s.add_argument("input")
    s.add_argument("--f-ref", dest="f_ref", type=float, default=50e3)
    s.add_argument("--harmonic", type=int, default=1)
    s.add_argument("--tau", type=float)
    s.add_argument("--p-dc", dest="p_dc", type=float)
    s.add_argument("--delta0", type=float, default=math.pi / 2, help="PEM peak retardance (rad)")
    s.add_argument("--json")
    s.set_defaults(func=cmd_demodulate)

    s = sub.add_parser("config-template", help="print the default config with comments")
    s.set_defaults(func=cmd_config_template)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"qmcd {args.command}: error: {exc}\n")
    except ConfigError as exc:
        parser.exit(2, f"qmcd {args.command}: config error: {exc}\n")
    except (CsvFormatError, ValueError, OSError) as exc:
        parser.exit(1, f"qmcd {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
