"""Command-line front end.

Subcommands ``dw`` and ``state`` print a report; ``lattice``, ``sq``,
``timeseries`` and ``mc`` write their outputs to ``--out`` together with
``<cmd>.resolved.ini`` and ``<cmd>.manifest.json``.  Passing either of those
back as ``--config`` reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice as lat
from .classical import classical_point_oracle
from .config import RunConfig, resolve
from .constants import AMU, TWO_PI, species_mass
from .dynamics import (
    CorrectionFactors,
    compare_measurements,
    decoherence_time,
    read_measurements,
    series_to_csv,
    time_series,
)
from .exceptions import AtomScatterError, ConfigError
from .presets import ExperimentPreset
from .quantum import (
    ScatteringGeometry,
    TwoAtomScatterConfig,
    Wavepacket,
    build_two_atom_state,
    debye_waller,
    ho_populations,
    lamb_dicke,
    photon_density_matrix,
)
from .structure import angle_directions, angular_scan, fibonacci_directions, grid_directions
from .svg import line_plot

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


# -- building model objects from a resolved config ------------------------

def _geometry(cfg: RunConfig) -> ScatteringGeometry:
    wl = cfg.float("geometry", "wavelength_nm") * 1e-9
    if not wl > 0:
        cfg._error("geometry", "wavelength_nm", "must be positive")
    return ScatteringGeometry.from_angle(wl, np.radians(cfg.float("geometry", "theta_deg")),
                                         np.radians(cfg.float("geometry", "phi_deg")))


def _packet(cfg: RunConfig, with_time=True) -> Wavepacket:
    if cfg.text("packet", "mass_amu"):
        mass = cfg.float("packet", "mass_amu") * AMU
    else:
        try:
            mass = species_mass(cfg.text("packet", "species"))
        except KeyError as exc:
            cfg._error("packet", "species", exc.args[0])
    omega = TWO_PI * 1e3 * cfg.vector("packet", "omega_khz")
    nbar = cfg.vector("packet", "nbar")
    t = cfg.float("packet", "time_us") * 1e-6 if with_time else 0.0
    try:
        return Wavepacket(mass, omega, nbar, t)
    except ValueError as exc:
        raise ConfigError(f"[packet] {exc}") from None


def _corrections(cfg: RunConfig) -> CorrectionFactors:
    try:
        return CorrectionFactors(cfg.float("corrections", "saturation"), cfg.float("corrections", "branching"))
    except ValueError as exc:
        raise ConfigError(f"[corrections] {exc}") from None


def _preset_from_config(cfg: RunConfig) -> ExperimentPreset:
    packet = _packet(cfg, with_time=False)
    return ExperimentPreset(
        name="config",
        species=cfg.text("packet", "species"),
        wavelength=cfg.float("geometry", "wavelength_nm") * 1e-9,
        trap_frequency=tuple(packet.omega / TWO_PI),
        structure_factor=cfg.float("timeseries", "structure_factor"),
        corrections=_corrections(cfg),
        theta=np.radians(cfg.float("geometry", "theta_deg")),
        pulse_fwhm=cfg.float("timeseries", "pulse_fwhm_us") * 1e-6,
    )


def _lattice(cfg: RunConfig, seed: int | None = None) -> lat.AtomArray:
    kind = cfg.choice("lattice", "shape", ("sphere", "cube"))
    try:
        if kind == "sphere":
            shape = lat.Sphere(cfg.float("lattice", "radius_sites"), jitter=cfg.bool("lattice", "jitter"))
        else:
            shape = lat.Cube(cfg.int("lattice", "edge_sites"))
        spec = lat.DefectSpec(cfg.float("lattice", "hole_probability"), cfg.shells())
    except ValueError as exc:
        raise ConfigError(f"[lattice] {exc}") from None
    seed = cfg.int("lattice", "seed") if seed is None else seed
    return lat.generate(shape, cfg.float("lattice", "spacing_nm") * 1e-9, spec, seed)


# -- output helpers -------------------------------------------------------

def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(data: str) -> str:
    return hashlib.sha256(data.encode()).hexdigest()


def _emit(args, cfg: RunConfig, outputs: dict, seeds: dict) -> Path:
    out = Path(args.out)
    for name, data in outputs.items():
        _atomic_write(out / name, data)
    _atomic_write(out / f"{args.command}.resolved.ini", cfg.to_ini())
    manifest = {
        "tool": "atomscatter",
        "version": __version__,
        "subcommand": args.command,
        "preset": args.preset,
        "config": cfg.as_dict(),
        "seeds": seeds,
        "outputs": {name: _digest(data) for name, data in sorted(outputs.items())},
    }
    path = out / f"{args.command}.manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name in outputs:
        print(f"wrote {out / name}")
    print(f"wrote {path}")
    return path


# -- subcommands ----------------------------------------------------------

def cmd_dw(args, cfg):
    packet = _packet(cfg)
    geom = _geometry(cfg)
    eta = lamb_dicke(packet, geom)
    d = debye_waller(packet, geom)
    x0 = packet.x0 * 1e9
    print(f"mass            {packet.mass / AMU:.6f} u")
    print(f"trap frequency  {', '.join(f'{w / TWO_PI / 1e3:g}' for w in packet.omega)} kHz")
    print(f"x0              {', '.join(f'{v:.2f}' for v in x0)} nm")
    print(f"|Q|             {geom.q_magnitude:.6e} 1/m (theta = {np.degrees(geom.theta):g} deg)")
    print(f"eta             {eta:.4f}")
    print(f"D               {d:.4f}")
    print(f"f_incoh         {1 - d:.4f}")
    print(f"P0 (projection) {ho_populations(1j * eta, 0)[0]:.4f}")
    if geom.q_magnitude > 0:
        print(f"D < 0.01 after  {decoherence_time(packet, geom) * 1e6:.3f} us")
    return 0


def cmd_state(args, cfg):
    packet = _packet(cfg)
    geom = _geometry(cfg)
    r1 = cfg.vector("state", "r1_nm") * 1e-9
    r2 = cfg.vector("state", "r2_nm") * 1e-9
    if args.anti_bragg:
        q = geom.Q
        r2 = r1 + np.pi * q / q.dot(q)
    try:
        conf = TwoAtomScatterConfig(cfg.complex("state", "epsilon"), r1, r2, geom, packet)
    except ValueError as exc:
        raise ConfigError(f"[state] {exc}") from None
    state = build_two_atom_state(conf)
    rho = photon_density_matrix(conf)
    print("two-atom state coefficients (unnormalised):")
    for label, c in zip(state.basis, state.coefficients):
        print(f"  {label:12s} {c:.6g}")
    print(f"  norm          {state.norm:.10g}")
    print("photon density matrix (basis |0>, |1>):")
    for row in rho.matrix:
        print("  " + "  ".join(f"{v.real:+.6e}{v.imag:+.6e}j" for v in row))
    print(f"D                   {conf.debye_waller:.6f}")
    print(f"gamma1, gamma2      {conf.gamma1:.6f}, {conf.gamma2:.6f}")
    print(f"coherent photons    {rho.coherent_photons:.6e}")
    print(f"incoherent photons  {rho.incoherent_photons:.6e}")
    print(f"purity              {rho.purity:.10f}")
    return 0


def cmd_lattice(args, cfg):
    seed = cfg.int("lattice", "seed")
    array = _lattice(cfg)
    print(f"{array.shape.describe()}: {array.n_atoms} atoms on {array.n_occupied} of {array.n_sites} sites")
    return _emit(args, cfg, {"lattice.txt": lat.dumps(array)}, {"lattice": seed})


def _directions(cfg: RunConfig):
    grid = cfg.choice("scan", "grid", ("fibonacci", "angles", "grid"))
    if grid == "fibonacci":
        return fibonacci_directions(cfg.int("scan", "n_directions"))
    theta = np.radians(cfg.floats("scan", "theta_deg"))
    phi = np.radians(cfg.floats("scan", "phi_deg"))
    if theta.size == 0 or phi.size == 0:
        cfg._error("scan", "theta_deg", "angle grids need theta_deg and phi_deg lists")
    if grid == "grid":
        return grid_directions(theta, phi)
    if theta.size != phi.size and phi.size != 1:
        cfg._error("scan", "phi_deg", "needs one entry per theta_deg or a single value")
    return angle_directions(theta, phi)


def cmd_sq(args, cfg):
    if args.lattice:
        array = lat.load(args.lattice)
    else:
        array = _lattice(cfg)
    size = cfg.int("scan", "ensemble_size")
    if size < 1:
        cfg._error("scan", "ensemble_size", "must be >= 1")
    base = array.seed
    ensemble = None if size == 1 else [base + i for i in range(size)]
    scan = angular_scan(
        array,
        cfg.float("geometry", "wavelength_nm") * 1e-9,
        _directions(cfg),
        k_in=cfg.vector("scan", "k_in"),
        ensemble=ensemble,
        bragg_margin=cfg.float("scan", "bragg_margin"),
        threads=args.threads,
    )
    print(f"array: {scan.array_description}, <N> = {scan.n_atoms_mean:.1f}, realisations = {scan.n_realizations}")
    print(f"directions: {len(scan.s_mean)}, flagged near Bragg: {int(scan.bragg_flag.sum())}")
    if len(scan.s_mean) <= 10:
        for t, p, s, f in zip(scan.theta, scan.phi, scan.s_mean, scan.bragg_flag):
            print(f"  theta={np.degrees(t):8.3f} phi={np.degrees(p):8.3f}  S={s:.6g}{'  (Bragg)' if f else ''}")
    print(f"off-Bragg median S = {scan.off_bragg_median():.5f}, mean S = {scan.off_bragg_mean():.5f}")
    outputs = {"sq.csv": scan.to_csv()}
    if args.svg:
        order = np.argsort(scan.theta, kind="stable")
        outputs["sq.svg"] = line_plot(
            [(np.degrees(scan.theta[order]), scan.s_mean[order], "S(Q)")],
            xlabel="theta (deg)", ylabel="S(Q)", title="structure factor scan", markers=True)
    return _emit(args, cfg, outputs, {"lattice": list(scan.seeds)})


def cmd_timeseries(args, cfg):
    preset = _preset_from_config(cfg)
    n = cfg.int("timeseries", "n_points")
    if n < 1:
        cfg._error("timeseries", "n_points", "must be >= 1")
    t = np.linspace(cfg.float("timeseries", "t_min_us"), cfg.float("timeseries", "t_max_us"), n) * 1e-6
    series = time_series(preset, t)
    print(f"I(t_min) = {series[0].intensity:.4f}, I(0) = "
          f"{time_series(preset, [0.0])[0].intensity:.4f}, I(t_max) = {series[-1].intensity:.4f}")
    outputs = {"timeseries.csv": series_to_csv(series)}
    curves = [(t * 1e6, [p.intensity for p in series], "theory")]
    if args.data:
        times, measured = read_measurements(Path(args.data).read_text())
        scale, normed, theory = compare_measurements(preset, times, measured)
        order = np.argsort(times, kind="stable")
        rows = ["t_us,intensity_raw,intensity_normalized,theory,residual"]
        for ti, raw, nm, th in zip(times[order], measured[order], normed, theory):
            rows.append(f"{ti * 1e6!r},{raw!r},{nm!r},{th.intensity!r},{nm - th.intensity!r}")
        outputs["residuals.csv"] = "\n".join(rows) + "\n"
        print(f"measurement long-time scale = {scale:.4f}, rms residual = "
              f"{np.sqrt(np.mean((normed - [p.intensity for p in theory]) ** 2)):.4f}")
        curves.append((times[order] * 1e6, normed, "data (normalised)"))
    if args.svg:
        outputs["timeseries.svg"] = line_plot(curves, xlabel="t (us)", ylabel="normalised intensity",
                                              title="scattered intensity after release")
    return _emit(args, cfg, outputs, {})


def cmd_mc(args, cfg):
    packet = _packet(cfg)
    geom = _geometry(cfg)
    n = cfg.int("mc", "n_samples")
    seed = cfg.int("mc", "seed")
    res = classical_point_oracle(packet, geom, n_samples=n, seed=seed, workers=args.threads)
    d = debye_waller(packet, geom)
    z = (res.coherent_fraction - d) / res.coherent_fraction_stderr if res.coherent_fraction_stderr else 0.0
    print(f"coherent fraction   {res.coherent_fraction:.5f} +- {res.coherent_fraction_stderr:.5f}")
    print(f"incoherent fraction {res.incoherent_fraction:.5f} +- {res.incoherent_fraction_stderr:.5f}")
    print(f"quantum D           {d:.5f}  ({z:+.2f} sigma)")
    csv_text = ("n_samples,seed,coherent_fraction,coherent_stderr,incoherent_fraction,"
                "incoherent_stderr,debye_waller\n"
                f"{n},{seed},{res.coherent_fraction!r},{res.coherent_fraction_stderr!r},"
                f"{res.incoherent_fraction!r},{res.incoherent_fraction_stderr!r},{d!r}\n")
    return _emit(args, cfg, {"mc.csv": csv_text}, {"mc": seed})


# -- argument parsing -----------------------------------------------------

# flag dest -> (section, key, converter to config text)
_OVERRIDES = {
    "theta": ("geometry", "theta_deg", str),
    "wavelength_nm": ("geometry", "wavelength_nm", str),
    "species": ("packet", "species", str),
    "omega_khz": ("packet", "omega_khz", str),
    "time_us": ("packet", "time_us", str),
    "epsilon": ("state", "epsilon", str),
    "shape": ("lattice", "shape", str),
    "radius": ("lattice", "radius_sites", str),
    "edge": ("lattice", "edge_sites", str),
    "holes": ("lattice", "hole_probability", str),
    "spacing_nm": ("lattice", "spacing_nm", str),
    "jitter": ("lattice", "jitter", str),
    "n_directions": ("scan", "n_directions", str),
    "ensemble": ("scan", "ensemble_size", str),
    "theta_deg": ("scan", "theta_deg", str),
    "phi_deg": ("scan", "phi_deg", str),
    "grid": ("scan", "grid", str),
    "tmin_us": ("timeseries", "t_min_us", str),
    "tmax_us": ("timeseries", "t_max_us", str),
    "points": ("timeseries", "n_points", str),
    "structure_factor": ("timeseries", "structure_factor", str),
    "samples": ("mc", "n_samples", str),
}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config or a previous run manifest")
    common.add_argument("--seed", type=_seed, help="seed for lattice and Monte Carlo generators")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    common.add_argument("--preset", metavar="NAME", help="li7-deep, li7-shallow, dy162-21k, dy162-43k")
    common.add_argument("--threads", type=int, default=1, metavar="N")

    parser = argparse.ArgumentParser(prog="atomscatter", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def geometry_flags(p):
        p.add_argument("--theta", help="scattering angle in degrees")
        p.add_argument("--wavelength-nm", dest="wavelength_nm")
        p.add_argument("--species")
        p.add_argument("--omega-khz", dest="omega_khz", help="trap frequency omega/2pi in kHz (one or three)")

    def lattice_flags(p):
        p.add_argument("--shape", choices=("sphere", "cube"))
        p.add_argument("--radius", help="sphere radius in sites")
        p.add_argument("--edge", help="cube edge in sites")
        p.add_argument("--holes", help="hole probability")
        p.add_argument("--spacing-nm", dest="spacing_nm")
        p.add_argument("--jitter", choices=("true", "false"), help="random sphere centre per seed")

    p = sub.add_parser("dw", parents=[common], help="Debye-Waller factor of a wavepacket")
    geometry_flags(p)
    p.add_argument("--time-us", dest="time_us", help="expansion time after release")

    p = sub.add_parser("state", parents=[common], help="two-atom photon density matrix")
    geometry_flags(p)
    p.add_argument("--epsilon", help="scattering amplitude, e.g. 0.05 or 0.03+0.02j")
    p.add_argument("--anti-bragg", action="store_true", help="place atom 2 so that Q.(R2-R1) = pi")

    p = sub.add_parser("lattice", parents=[common], help="generate a Mott-insulator atom array")
    lattice_flags(p)

    p = sub.add_parser("sq", parents=[common], help="structure factor angular scan")
    lattice_flags(p)
    p.add_argument("--wavelength-nm", dest="wavelength_nm")
    p.add_argument("--lattice", metavar="FILE", help="use a saved lattice instead of generating one")
    p.add_argument("--n-directions", dest="n_directions")
    p.add_argument("--ensemble", help="number of disorder realisations")
    p.add_argument("--grid", choices=("fibonacci", "angles", "grid"))
    p.add_argument("--theta-deg", dest="theta_deg", help="comma-separated polar angles")
    p.add_argument("--phi-deg", dest="phi_deg", help="comma-separated azimuths")
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")

    p = sub.add_parser("timeseries", parents=[common], help="intensity versus time after release")
    geometry_flags(p)
    p.add_argument("--tmin-us", dest="tmin_us")
    p.add_argument("--tmax-us", dest="tmax_us")
    p.add_argument("--points")
    p.add_argument("--structure-factor", dest="structure_factor")
    p.add_argument("--data", metavar="CSV", help="measured t_us,intensity to normalise and compare")
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")

    p = sub.add_parser("mc", parents=[common], help="classical point-sampling Monte Carlo")
    geometry_flags(p)
    p.add_argument("-n", "--samples", help="number of samples, e.g. 1e6")
    return parser


def _overrides(args) -> dict:
    out = {}
    for dest, (section, key, conv) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            out[(section, key)] = conv(value)
    if getattr(args, "theta_deg", None) is not None and getattr(args, "grid", None) is None:
        out[("scan", "grid")] = "angles"
    if args.seed is not None:
        out[("lattice", "seed")] = str(args.seed)
        out[("mc", "seed")] = str(args.seed)
    return out


COMMANDS = {
    "dw": cmd_dw,
    "state": cmd_state,
    "lattice": cmd_lattice,
    "sq": cmd_sq,
    "timeseries": cmd_timeseries,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jitter", None) is None and getattr(args, "shape", None) == "cube":
        args.jitter = "false"
    try:
        cfg = resolve(args.preset, args.config, _overrides(args))
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"atomscatter: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AtomScatterError, OSError, ValueError) as exc:
        print(f"atomscatter: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
