"""Command-line front end: ``dqmag {flcoef, synth, scan, compare}``."""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import PROMINENCE, compare_scans
from .config import ConfigError, RunConfig
from .dynamics import ErrorModel, SpectrumScan, StepControl, scan_spectrum
from .errors import DQMError
from .modulation import (SynthesisParams, fl_tophat_analytic, fourier_coefficient,
                         invert_to_rabi, summarize_waveform, synthesize_corrected_modulation,
                         tophat_modulation)
from .sequences import build_dqm_schedule, build_sqm_schedule

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_SYNTHESIS = 4
EXIT_SOLVER = 5

SCAN_COLUMNS = ("omega_D_over_2pi_Hz", "signal", "one_minus_signal")


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _fmt(x) -> str:
    return "%.17g" % x


def _write(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _header(lines: dict) -> str:
    return "".join(f"# {k}: {v}\n" for k, v in lines.items())


def _load_config(path) -> RunConfig:
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise _Failure(EXIT_CONFIG, f"cannot read config: {exc}") from None
    except ConfigError as exc:
        raise _Failure(EXIT_CONFIG, f"invalid config {path}: {exc}") from None


def synthesize(cfg: RunConfig):
    """Corrected modulation function and waveform for a dqm-modulated config."""
    system = cfg.system.build()
    p = cfg.protocol
    try:
        params = SynthesisParams(cfg.harmonic, int(p.n), system.omega_L, p.k, p.sigma_frac)
        F = synthesize_corrected_modulation(params)
        wf = invert_to_rabi(F, samples_per_pulse=cfg.solver.samples_per_pulse)
    except (DQMError, ValueError) as exc:
        raise _Failure(EXIT_SYNTHESIS, f"synthesis failed ({type(exc).__name__}): {exc}") from None
    return F, wf


def build_template(cfg: RunConfig, system=None):
    """Schedule at the design frequency ``omega_L / l`` described by ``cfg``."""
    system = system or cfg.system.build()
    wD = system.omega_L / cfg.harmonic
    p = cfg.protocol
    try:
        if p.kind == "sqm":
            return build_sqm_schedule(wD, cfg.repetitions, gradient=p.gradient)
        if p.kind == "dqm-tophat":
            return build_dqm_schedule(wD, cfg.repetitions, t_pi=p.r * 2.0 * np.pi / system.omega_L)
        if p.kind == "dqm-modulated":
            _, wf = synthesize(cfg)
            return build_dqm_schedule(wD, cfg.repetitions, waveform=wf)
        return build_dqm_schedule(wD, cfg.repetitions)
    except _Failure:
        raise
    except (DQMError, ValueError) as exc:
        raise _Failure(EXIT_SYNTHESIS, f"cannot build the schedule: {exc}") from None


def run_scan(cfg: RunConfig, workers=None) -> SpectrumScan:
    system = cfg.system.build()
    template = build_template(cfg, system)
    omegas = cfg.scan.omegas(system.omega_L / cfg.harmonic)
    errors = ErrorModel(cfg.errors.rabi_error, cfg.detuning)
    step = StepControl(cfg.solver.step_fraction, cfg.solver.check_halving)
    try:
        return scan_spectrum(system, template, omegas, errors, step, workers=workers,
                             metadata={"config_digest": cfg.digest()})
    except DQMError as exc:
        raise _Failure(EXIT_SOLVER, f"solver failed ({type(exc).__name__}): {exc}") from None


def scan_csv(scan: SpectrumScan, cfg: RunConfig, timestamp: bool = True) -> str:
    meta = {"dqmag": __version__, "protocol": cfg.protocol.kind, "harmonic": cfg.harmonic,
            "repetitions": cfg.repetitions, "config_digest": cfg.digest()}
    if timestamp:
        meta["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    out = io.StringIO()
    out.write(_header(meta))
    out.write(",".join(SCAN_COLUMNS) + "\n")
    for w, s in zip(scan.frequencies_hz, scan.signals):
        out.write(f"{_fmt(w)},{_fmt(s)},{_fmt(1.0 - s)}\n")
    return out.getvalue()


def read_scan_csv(path) -> SpectrumScan:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip() and not line.startswith(SCAN_COLUMNS[0]):
                rows.append([float(x) for x in line.split(",")[:2]])
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return SpectrumScan(2.0 * np.pi * data[:, 0], data[:, 1], meta)


def waveform_text(wf) -> str:
    out = io.StringIO()
    out.write("# time_s rabi_rad_per_s phase_rad transition\n")
    for t, a, ph, m in wf.rows():
        out.write(f"{_fmt(t)} {_fmt(a)} {_fmt(ph)} {m:+d}\n")
    return out.getvalue()


def cmd_flcoef(args) -> int:
    out = io.StringIO()
    out.write("l,r,f_analytic,f_quadrature,abs_diff\n")
    rs = np.linspace(args.r_min, args.r_max, args.r_points)
    for l in args.l:
        for r in rs:
            fa = float(fl_tophat_analytic(l, r))
            fq = fourier_coefficient(tophat_modulation(l, r, 1.0), l)
            out.write(f"{l},{_fmt(r)},{_fmt(fa)},{_fmt(fq)},{_fmt(abs(fa - fq))}\n")
    _write(out.getvalue(), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    if cfg.protocol.kind != "dqm-modulated":
        raise _Failure(EXIT_CONFIG, "synth needs protocol.kind = dqm-modulated")
    F, wf = synthesize(cfg)
    report = summarize_waveform(F, wf, cfg.harmonic)
    report["f_l_target"] = 4.0 / (np.pi * cfg.harmonic)
    report["max_abs_rabi_2pi_MHz"] = report["max_abs_rabi_rad_per_s"] / (2e6 * np.pi)
    report["t_pi_us"] = report["t_pi_s"] * 1e6
    path = args.waveform or cfg.output.waveform
    if path:
        Path(path).write_text(waveform_text(wf))
        report["waveform_file"] = str(path)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load_config(args.config)
    scan = run_scan(cfg, args.workers)
    _write(scan_csv(scan, cfg, timestamp=not args.no_timestamp), args.output or cfg.output.csv)
    return EXIT_OK


def _scan_from(path, workers) -> SpectrumScan:
    if str(path).endswith(".csv"):
        return read_scan_csv(path)
    return run_scan(_load_config(path), workers)


def cmd_compare(args) -> int:
    a = _scan_from(args.a, args.workers)
    b = _scan_from(args.b, args.workers)
    try:
        report = compare_scans(a, b, args.prominence)
    except ValueError as exc:
        raise _Failure(EXIT_CONFIG, str(exc)) from None
    for side in ("a", "b"):
        report[side]["positions_2pi_Hz"] = [w / (2.0 * np.pi) for w in report[side].pop("positions")]
    report["step_2pi_Hz"] = report.pop("step") / (2.0 * np.pi)
    if "main_position_difference" in report:
        report["main_position_difference_2pi_Hz"] = report.pop("main_position_difference") / (2.0 * np.pi)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqmag", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flcoef", help="top-hat filter coefficients, closed form vs quadrature")
    p.add_argument("--l", type=int, nargs="+", default=[37, 43])
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=1.5)
    p.add_argument("--r-points", type=int, default=151)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_flcoef)

    p = sub.add_parser("synth", help="synthesise the corrected Rabi waveform")
    p.add_argument("config")
    p.add_argument("--waveform", help="waveform output file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scan", help="signal versus drive frequency")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--workers", type=int, help="process count (default: $DQMAG_WORKERS or 1)")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("compare", help="compare two scans (CSV files or configs)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--prominence", type=float, default=PROMINENCE)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"dqmag: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
