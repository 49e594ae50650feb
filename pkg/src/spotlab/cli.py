"""Command-line entry point.

Subcommands map one-to-one onto the library modules; every artifact file
embeds the config hash and seed so a rerun with the same inputs is
byte-identical.  Exit codes: 0 ok, 2 usage/config error, 3 domain error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from spotlab import __version__, dopplerfit, satspec, spectro, spotfield, ybdata
from spotlab.beamsim import derive_seed, mean_axial_velocity, sample_atoms
from spotlab.config import RunConfig, load_config
from spotlab.errors import ConfigError, DomainError, NumericalError, SpotlabError
from spotlab.photonics import LaserState
from spotlab.spectro import ScanSetup

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERICAL = 4


def _provenance(cfg: RunConfig, seed: int) -> str:
    return f"config_sha256={cfg.config_hash} seed={seed}"


def _write_text(path: Path, header: str, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {header}\n{body}")


def _write_json(path: Path, cfg: RunConfig, seed: int, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "_provenance": {
            "config_sha256": cfg.config_hash,
            "seed": seed,
            "budget": cfg.budget_dict(),
            "version": __version__,
        },
        **payload,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _setup(cfg: RunConfig, catalog, angle_deg=None, atoms=None, threads=1) -> ScanSetup:
    return ScanSetup(
        catalog=catalog,
        oven=cfg.oven(catalog, angle_deg=angle_deg),
        beams=cfg.beams(),
        frame_spec=cfg.frame_spec(),
        atoms_per_frame=int(atoms or cfg["scan.atoms_per_frame"]),
        n_threads=max(1, int(threads)),
    )


def cmd_isotopes(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    if args.format == "json":
        out = ybdata.catalog_to_json(catalog)
    else:
        out = ybdata.catalog_to_csv(catalog)
    if args.out:
        _write_text(Path(args.out), _provenance(cfg, cfg.seed()), out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_beam(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    oven = cfg.oven(catalog)
    seed = args.seed if args.seed is not None else cfg.seed()
    if args.dump:
        atoms = sample_atoms(oven, args.n, seed)
        lines = ["isotope,x,y,z,vx,vy,vz"]
        for i in range(len(atoms)):
            p, v = atoms.positions[i], atoms.velocities[i]
            lines.append(
                f"{atoms.isotopes[i]},{p[0]:.9e},{p[1]:.9e},{p[2]:.9e},"
                f"{v[0]:.6e},{v[1]:.6e},{v[2]:.6e}"
            )
        body = "\n".join(lines) + "\n"
        path = Path(args.out or "beam.csv")
        _write_text(path, _provenance(cfg, seed), body)
        print(f"wrote {path}")
    else:
        mv = mean_axial_velocity(oven, args.n, seed)
        print(
            f"T = {oven.temperature_k:.1f} K  mean axial velocity = "
            f"{mv.mean:.2f} +- {mv.sem:.2f} m/s  (n={mv.n})"
        )
    return EXIT_OK


def cmd_render(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    seed = args.seed if args.seed is not None else cfg.seed()
    setup = _setup(cfg, catalog, angle_deg=args.angle, atoms=args.atoms,
                   threads=args.threads)
    atoms = sample_atoms(setup.oven, setup.atoms_per_frame, derive_seed(seed, 0))
    state = LaserState(args.detuning * 1e6)
    frame, cents, result = spotfield.render_and_align(
        atoms, setup.beams, state, catalog, setup.oven, setup.frame_spec,
        n_threads=setup.n_threads,
    )
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)

    pgm = outdir / "frame.pgm"
    _write_pgm(pgm, frame)
    rows = ["beam_index,x_m,z_m,total_intensity,rms_x_m,rms_z_m"]
    for c in cents:
        if c is None:
            continue
        rows.append(
            f"{c.beam_index},{c.centroid[0]:.6e},{c.centroid[1]:.6e},"
            f"{c.total_intensity:.6e},{c.rms_extent[0]:.6e},{c.rms_extent[1]:.6e}"
        )
    _write_text(outdir / "centroids.csv", _provenance(cfg, seed), "\n".join(rows) + "\n")
    _write_json(
        outdir / "alignment.json",
        cfg,
        seed,
        {
            "detuning_mhz": args.detuning,
            "angle_deg": setup.angle_deg,
            "perp_residual_m": result.perp_residual,
            "line_angle_to_beams_rad": result.line_angle_to_beams,
            "line_angle_to_axis_rad": result.line_angle_to_axis,
            "pair24_offset_m": result.pair24_offset,
            "pair13_offset_m": result.pair13_offset,
        },
    )
    print(f"wrote {pgm}, centroids.csv, alignment.json")
    return EXIT_OK


def _write_pgm(path: Path, frame: spotfield.FluorescenceFrame) -> None:
    """Portable graymap (P2) scaled to 16 bits."""
    px = frame.pixels
    top = px.max()
    scaled = np.zeros_like(px, dtype=int) if top <= 0 else np.round(
        px / top * 65535
    ).astype(int)
    lines = [f"P2\n{px.shape[1]} {px.shape[0]}\n65535"]
    for row in scaled[::-1]:  # z upward
        lines.append(" ".join(map(str, row)))
    path.write_text("\n".join(lines) + "\n")


def cmd_scan(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    seed = args.seed if args.seed is not None else cfg.seed()
    setup = _setup(cfg, catalog, angle_deg=args.angle, atoms=args.atoms,
                   threads=args.threads)
    span = (args.start * 1e6, args.stop * 1e6)
    trace = spectro.run_scan(span, args.step * 1e6, setup, seed)
    path = Path(args.out or "scan.csv")
    _write_text(path, _provenance(cfg, seed), trace.to_csv())
    print(f"wrote {path} ({len(trace)} points)")
    return EXIT_OK


def _two_phase_peaks(cfg: RunConfig, catalog, setup: ScanSetup, seed: int):
    """Coarse pass over the full span, then a fine window per feature."""
    coarse = spectro.run_scan(
        (cfg["scan.start_mhz"] * 1e6, cfg["scan.stop_mhz"] * 1e6),
        cfg["scan.coarse_step_mhz"] * 1e6,
        setup,
        seed,
    )
    candidates = spectro.find_doppler_free_resonances(coarse, catalog)
    half = cfg["scan.fine_halfwidth_mhz"] * 1e6
    fine_step = cfg["scan.fine_step_mhz"] * 1e6
    f_ref = catalog.transition.f_ref_hz
    peaks = []
    for k, cand in enumerate(candidates):
        det = cand.center_hz - f_ref
        window = spectro.run_scan(
            (det - half, det + half), fine_step, setup, seed + 1000 * (k + 1)
        )
        peaks.extend(spectro.find_doppler_free_resonances(window, catalog))
    return coarse, peaks


def cmd_shifts(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    seed = args.seed if args.seed is not None else cfg.seed()
    setup = _setup(cfg, catalog, atoms=args.atoms, threads=args.threads)
    coarse, peaks = _two_phase_peaks(cfg, catalog, setup, seed)
    rows = spectro.extract_isotope_shifts(peaks, catalog, cfg.budget())
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    _write_text(
        outdir / "shifts.csv", _provenance(cfg, seed), spectro.shift_table_csv(rows)
    )
    _write_text(outdir / "scan_coarse.csv", _provenance(cfg, seed), coarse.to_csv())
    _write_json(
        outdir / "shifts.json",
        cfg,
        seed,
        {
            "shifts": [
                {
                    "isotope": r.line.mass_number,
                    "transition": r.line.hyperfine_label,
                    "shift_mhz": r.shift_hz / 1e6,
                    "sigma_mhz": r.sigma_hz / 1e6,
                    "merged": r.merged,
                    "catalog_shift_mhz": r.line.shift_from_174_hz / 1e6,
                }
                for r in rows
            ]
        },
    )
    print(f"wrote shifts.csv ({sum(1 for r in rows if r.line.mass_number != 174)} rows)")
    return EXIT_OK


def cmd_satspec(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    seed = args.seed if args.seed is not None else cfg.seed()
    sat_cfg = satspec.SatConfig(
        pump_intensity=cfg["satspec.pump_intensity_w_m2"],
        probe_intensity=cfg["satspec.probe_intensity_w_m2"],
    )
    oven = cfg.oven(catalog, angle_deg=90.0)
    span = (args.start * 1e6, args.stop * 1e6)
    signal, background = satspec.run_pump_probe(
        sat_cfg, oven, catalog, span, args.step * 1e6, seed,
        n_atoms=int(cfg["satspec.atoms"]),
    )
    dips = satspec.extract_dips(signal, background, catalog)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    _write_text(
        outdir / "satspec.csv",
        _provenance(cfg, seed),
        satspec.spectrum_csv(signal, background),
    )
    _write_json(
        outdir / "satspec_dips.json",
        cfg,
        seed,
        {
            "dips": [
                {
                    "center_thz": p.center_hz / 1e12,
                    "width_fwhm_mhz": p.width_fwhm_hz / 1e6,
                    "lines": [l.label for l in p.assigned_lines],
                    "merged": p.merged,
                }
                for p in dips
            ]
        },
    )
    print(f"wrote satspec.csv and satspec_dips.json ({len(dips)} dips)")
    return EXIT_OK


def cmd_fit_doppler(args, cfg: RunConfig) -> int:
    catalog = ybdata.load_catalog()
    const = catalog.constants
    seed = args.seed if args.seed is not None else cfg.seed()
    if args.synthesize:
        dataset = dopplerfit.synthesize_dataset(
            v=args.v,
            f0_hz=catalog.transition.f_ref_hz,
            angles_deg=dopplerfit.BENCH_ANGLES_DEG,
            sigma_hz=args.sigma * 1e6,
            seed=seed,
            const=const,
        )
    elif args.infile:
        try:
            rows = Path(args.infile).read_text().strip().splitlines()
            data = [
                [float(x) for x in row.split(",")]
                for row in rows
                if row and not row.startswith(("#", "theta"))
            ]
            arr = np.array(data).reshape(-1, 3)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read points file {args.infile}: {exc}") from exc
        dataset = dopplerfit.DopplerDataset(arr[:, 0], arr[:, 1], arr[:, 2])
    else:
        raise ConfigError("fit-doppler needs --in FILE or --synthesize")

    result = dopplerfit.fit(dataset, const)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(
        outdir / "doppler_fit.json",
        cfg,
        seed,
        {
            "v_mean_m_s": result.v_mean,
            "v_sigma_m_s": result.v_sigma,
            "f0_hz": result.f0_hz,
            "f0_sigma_hz": result.f0_sigma,
            "chi2_per_dof": result.chi2_per_dof,
            "n_points": len(dataset),
        },
    )
    rows = ["theta_deg,f_hz,sigma_hz,model_hz"]
    cos_t = np.cos(np.radians(dataset.theta_deg))
    model = result.f0_hz + (result.f0_hz / const.c) * result.v_mean * cos_t
    for i in range(len(dataset)):
        rows.append(
            f"{dataset.theta_deg[i]:.1f},{dataset.frequency_hz[i]:.1f},"
            f"{dataset.sigma_hz[i]:.1f},{model[i]:.1f}"
        )
    _write_text(outdir / "doppler_points.csv", _provenance(cfg, seed), "\n".join(rows) + "\n")
    curve = ["theta_deg,shift_hz"]
    for theta in np.arange(40.0, 140.5, 1.0):
        shift = (result.f0_hz / const.c) * result.v_mean * np.cos(np.radians(theta))
        curve.append(f"{theta:.1f},{shift:.1f}")
    _write_text(outdir / "doppler_curve.csv", _provenance(cfg, seed), "\n".join(curve) + "\n")
    print(
        f"v = {result.v_mean:.2f} +- {result.v_sigma:.2f} m/s, "
        f"f0 = {result.f0_hz / 1e12:.8f} THz"
    )
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    """Recovered-versus-catalog comparison tables (shift scan, saturation
    cross check, Doppler fit) with one pass/fail line per check."""
    catalog = ybdata.load_catalog()
    seed = args.seed if args.seed is not None else cfg.seed()
    outdir = Path(args.out or "report")
    outdir.mkdir(parents=True, exist_ok=True)

    setup = _setup(cfg, catalog, atoms=args.atoms, threads=args.threads)
    _, peaks = _two_phase_peaks(cfg, catalog, setup, seed)
    rows = spectro.extract_isotope_shifts(peaks, catalog, cfg.budget())
    _write_text(
        outdir / "shift_table_recovered.csv",
        _provenance(cfg, seed),
        spectro.shift_table_csv(rows),
    )

    checks = []
    for r in rows:
        if r.line.mass_number == 174 and not r.line.hyperfine_label:
            continue
        err = abs(r.shift_hz - r.line.shift_from_174_hz)
        checks.append(
            {
                "check": f"shift {r.line.label}",
                "recovered": r.shift_hz / 1e6,
                "expected": r.line.shift_from_174_hz / 1e6,
                "tolerance": r.sigma_hz / 1e6,
                "unit": "MHz",
                "pass": bool(err <= r.sigma_hz),
            }
        )

    dataset = dopplerfit.synthesize_dataset(
        260.0, catalog.transition.f_ref_hz, dopplerfit.BENCH_ANGLES_DEG,
        0.0, seed, catalog.constants,
    )
    fit_res = dopplerfit.fit(dataset, catalog.constants)
    checks.append(
        {
            "check": "noiseless doppler fit",
            "recovered": fit_res.v_mean,
            "expected": 260.0,
            "tolerance": 1e-6,
            "unit": "m/s",
            "pass": bool(abs(fit_res.v_mean - 260.0) < 1e-6),
        }
    )

    _write_json(outdir / "report.json", cfg, seed, {"checks": checks})
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{status}] {c['check']}: {c['recovered']:.6g} vs "
              f"{c['expected']:.6g} {c['unit']} (tol {c['tolerance']:.6g})")
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_NUMERICAL


def cmd_serve(args, cfg: RunConfig) -> int:
    import uvicorn

    from spotlab.labserver import create_app

    app = create_app(seed=args.seed if args.seed is not None else cfg.seed(), config=cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotlab",
        description="Fluorescence-spot spectroscopy virtual lab for the Yb 398.9 nm line",
    )
    parser.add_argument("--config", help="path to key=value config file")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for rendering (or SPOTLAB_THREADS)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("isotopes", help="dump the line catalog")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_isotopes)

    p = sub.add_parser("beam", help="sample the atomic beam")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dump", action="store_true", help="write atom samples as CSV")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_beam)

    p = sub.add_parser("render", help="render one fluorescence frame")
    p.add_argument("--detuning", type=float, default=0.0, help="MHz from the 174 line")
    p.add_argument("--angle", type=float, default=None, help="oven angle, deg")
    p.add_argument("--atoms", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("scan", help="sweep detuning and record alignment")
    p.add_argument("--start", type=float, required=True, help="MHz")
    p.add_argument("--stop", type=float, required=True, help="MHz")
    p.add_argument("--step", type=float, default=5.0, help="MHz")
    p.add_argument("--angle", type=float, default=None)
    p.add_argument("--atoms", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("shifts", help="two-phase scan + isotope shift table")
    p.add_argument("--atoms", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shifts)

    p = sub.add_parser("satspec", help="saturation-spectroscopy simulation")
    p.add_argument("--start", type=float, default=-700.0, help="MHz")
    p.add_argument("--stop", type=float, default=2000.0, help="MHz")
    p.add_argument("--step", type=float, default=5.0, help="MHz")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_satspec)

    p = sub.add_parser("fit-doppler", help="fit the Doppler-shift law")
    p.add_argument("--in", dest="infile", help="CSV: theta_deg,f_hz,sigma_hz")
    p.add_argument("--synthesize", action="store_true")
    p.add_argument("--v", type=float, default=260.0, help="m/s (with --synthesize)")
    p.add_argument("--sigma", type=float, default=0.0, help="MHz noise (with --synthesize)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_doppler)

    p = sub.add_parser("report", help="recovered-vs-catalog comparison report")
    p.add_argument("--atoms", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the virtual-lab HTTP server")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.threads is None:
            args.threads = int(os.environ.get("SPOTLAB_THREADS", "1"))
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"spotlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"spotlab: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalError as exc:
        print(f"spotlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SpotlabError as exc:
        print(f"spotlab: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
