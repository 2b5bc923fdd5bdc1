"""``simulate`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime or physics error.
The default output directory comes from ``$SQZMAG_OUT``, then the config.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .config import OUTPUT_FORMATS, ConfigError, load_config, validate_config
from .gaussian_optics import PhysicsDomainError
from .spectrum_analyzer import InsufficientDataError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUT_ENV = "SQZMAG_OUT"
COMMANDS = ("b-sweep", "density-sweep", "spectrum", "sensitivity", "validate")

log = logging.getLogger("sqzmag")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate",
                                description="Squeezed-light NMOR magnetometer simulator.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI file or preset name (fig2 ... fig8)")
    p.add_argument("--seed", type=int, help="override the configured RNG seed")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or the config)")
    p.add_argument("--format", choices=OUTPUT_FORMATS, help="output format")
    p.add_argument("--detection-freq", type=float, metavar="HZ",
                   help="detection frequency for sensitivity (default 500 kHz)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _run(args) -> int:
    if args.command == "validate":
        report = validate_config(args.config)
        print(report.format())
        return EXIT_OK if report.ok else EXIT_CONFIG

    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError([f"--seed: must be >= 0, got {args.seed}"])
        cfg = cfg.with_(seed=args.seed)
    if args.detection_freq is not None and args.detection_freq <= 0:
        raise ConfigError([f"--detection-freq: must be > 0, got {args.detection_freq}"])
    out_dir = args.out or os.environ.get(OUT_ENV) or cfg.output_dir
    fmt = args.format or cfg.output_format

    if args.command == "b-sweep":
        result = pipeline.run_b_sweep(cfg)
        print(f"slope {result.curve.slope_rad_per_T:.6g} rad/T at "
              f"B = {result.curve.operating_field_T + 0.0:.6g} T")
    elif args.command == "density-sweep":
        result = pipeline.run_density_sweep(cfg, args.detection_freq)
        for p in result.points:
            print(f"{p.temperature_C:6.1f} C  N={p.density_cm3:.3e}  T={p.transmission:.3f}  "
                  f"dB_sq={p.squeezed.delta_B_T_per_rtHz:.3e}  "
                  f"dB_coh={p.coherent.delta_B_T_per_rtHz:.3e}")
    elif args.command == "spectrum":
        result = pipeline.run_spectrum(cfg)
        for t in result.traces:
            print(f"{t.label}: measured {t.measured_dB:+.3f} dB, analytic {t.analytic_dB:+.3f} dB")
    else:
        result = pipeline.run_sensitivity(cfg, args.detection_freq)
        for r in result.results:
            print(f"{r.probe}: {r.delta_B_T_per_rtHz:.4e} T/rtHz "
                  f"(noise {r.noise_rad_per_rtHz:.4e} rad/rtHz, slope {r.slope_rad_per_T:.4e} rad/T)")
    written = pipeline.write_outputs(result, cfg, args.command, out_dir, fmt)
    log.info("wrote %d files to %s", len(written), out_dir)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhysicsDomainError, InsufficientDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
