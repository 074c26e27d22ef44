"""Command line driver: orchestrates the solvers, writes CSV/JSON artifacts
with full-precision numbers, and records a run manifest for reproducibility.

Subcommands: groundstate, certify, construct, energy-scan, deadcore,
verify-all. Numeric output uses 17 significant digits so every value
round-trips exactly; identical config and seed give byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import config as cf
from . import deadcore as dc
from . import energy as en
from . import grid as gr
from . import groundstate as gs
from . import model, outer
from . import reduction as rd
from . import verify as vf

FMT = "%.17g"


@dataclass
class RunManifest:
    subcommand: str
    created: str
    input_hash: str
    seed: int
    threads: int
    configuration: dict
    settings: dict
    artifacts: list = field(default_factory=list)

    def add(self, path: str) -> str:
        self.artifacts.append(path)
        return path

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        self.artifacts.append(path)
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _hash_inputs(settings: dict, args) -> str:
    blob = json.dumps({"settings": settings, "ell": args.ell,
                       "seed": args.seed}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _dump_json(obj, path: str) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        raise TypeError(f"not serializable: {type(o)!r}")

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def _setup(args, subcommand: str):
    os.makedirs(args.out, exist_ok=True)
    settings = cf.load_settings(args.config)
    config = cf.build_configuration(settings, ell=args.ell)
    manifest = RunManifest(
        subcommand=subcommand,
        created=datetime.now(timezone.utc).isoformat(),
        input_hash=_hash_inputs(settings, args),
        seed=args.seed, threads=args.threads,
        configuration=cf.echo(config), settings=settings)
    return settings, config, manifest


def _smoothing(config, profiles):
    a0 = model.alpha0_from_amplitudes(profiles[0].center_value,
                                      profiles[1].center_value)
    spec = model.CouplingSpec(sigma1=config.sigma1, sigma2=config.sigma2,
                              beta=config.beta)
    return spec, model.build_smoothing(spec, n=config.n_smooth, alpha0=a0)


def cmd_groundstate(args) -> int:
    settings, config, manifest = _setup(args, "groundstate")
    prof = gs.solve_ground_state(config.p, 2, 1e-10)
    csv_path = manifest.add(os.path.join(args.out, "groundstate.csv"))
    gs.save_profile(prof, csv_path)
    header = {
        "p": config.p, "dimension": 2,
        "center_value": prof.center_value,
        "tail_rate": prof.tail_rate,
        "tail_amplitude": prof.tail_amplitude,
        "max_residual": prof.max_residual,
        "action_value": gs.functional_value(prof),
        "mass": gs.radial_integral(prof, 2.0),
        "configuration": manifest.configuration,
    }
    _dump_json(header, manifest.add(os.path.join(args.out,
                                                 "groundstate.json")))
    manifest.write(args.out)
    print(f"ground state p={config.p}: W(0) = {prof.center_value:.17g},"
          f" residual {prof.max_residual:.2e}")
    return 0


def cmd_certify(args) -> int:
    settings, config, manifest = _setup(args, "certify")
    profiles = outer.bump_profiles(config)
    spec, smoothed = _smoothing(config, profiles)
    report = model.certify_conditions(spec, smoothed)
    report["configuration"] = manifest.configuration
    path = manifest.add(os.path.join(args.out, "certify.json"))
    _dump_json(report, path)
    manifest.write(args.out)

    def passes(tree):
        if isinstance(tree, dict):
            return all(passes(v) for k, v in tree.items()
                       if k != "configuration") and tree.get("pass", True)
        return True

    ok = passes(report)
    print(f"coupling conditions: {'all satisfied' if ok else 'see report'}"
          f" ({path})")
    return 0 if ok else 1


def cmd_construct(args) -> int:
    settings, config, manifest = _setup(args, "construct")
    grid = gr.build_grid(config, settings["grid"]["h"])
    profiles = outer.bump_profiles(config)
    _, smoothed = _smoothing(config, profiles)
    log_path = manifest.add(os.path.join(args.out, "fixed_point.json"))
    res = rd.fixed_point(config, grid, smoothed, profiles,
                         log_path=log_path)
    energy = outer.DiscreteEnergy(config, grid, smoothed, profiles)
    u = energy.u_base + res.phi.values
    v = energy.v_base + res.psi.values
    pts = grid.points()
    rad = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    table = np.column_stack([rad, theta, u, v])
    csv_path = manifest.add(os.path.join(args.out, "solution.csv"))
    np.savetxt(csv_path, table, fmt=FMT, delimiter=",",
               header="r,theta,u,v", comments="")
    summary = {
        "converged": res.converged, "iterations": res.iterations,
        "final_distance": res.history[-1]["d"] if res.history else math.nan,
        "t_gap": res.t_gap, "score": res.score, "bound": res.bound,
        "energy": energy.value(u, v),
        "configuration": manifest.configuration,
    }
    _dump_json(summary, manifest.add(os.path.join(args.out,
                                                  "construct.json")))
    manifest.write(args.out)
    print(f"construct ell={config.ell}: converged={res.converged}"
          f" in {res.iterations} iterations,"
          f" energy {summary['energy']:.17g}")
    return 0 if res.converged else 1


def cmd_energy_scan(args) -> int:
    settings, config, manifest = _setup(args, "energy-scan")
    h = settings["energy"]["h"]
    rows = en.scan_samples(config, h=h,
                           n_line=int(settings["energy"]["n_line"]))
    csv_path = manifest.add(os.path.join(args.out, "samples.csv"))
    np.savetxt(csv_path, np.asarray(rows, dtype=float), fmt=FMT,
               delimiter=",", header="r,rho,J", comments="")
    exp = en.expansion_fit(rows, config)
    co = en.analytic_coefficients(config)
    report = {"fit": dataclasses.asdict(exp), "analytic": co,
              "configuration": manifest.configuration}
    _dump_json(report, manifest.add(os.path.join(args.out,
                                                 "expansion.json")))
    surf = en.locate_max(config, h=h,
                         n_points=int(settings["energy"]["n_points"]))
    surf_path = manifest.add(os.path.join(args.out, "surface.csv"))
    en.surface_csv(surf, surf_path)
    manifest.write(args.out)
    print(f"energy scan ell={config.ell}: fit residual {exp.residual:.3e},"
          f" box maximum J = {surf.J_star:.17g}"
          f" at (r, rho) = ({surf.r_star:.6g}, {surf.rho_star:.6g})"
          f" ({'interior' if surf.interior else 'boundary'})")
    return 0


def cmd_deadcore(args) -> int:
    settings, config, manifest = _setup(args, "deadcore")
    sp = config.sigma_prime
    c_tau, a_target = dc.find_c_tau(config.tau, config.m, sp)
    sol = dc.solve_radial_sublinear(c_tau, sp)
    csv_path = manifest.add(os.path.join(args.out, "radial_deadcore.csv"))
    np.savetxt(csv_path, np.column_stack([sol.radii, sol.values]), fmt=FMT,
               delimiter=",", header="r,w", comments="")
    grid = gr.build_grid(config, settings["grid"]["h"])
    profiles = outer.bump_profiles(config)
    _, smoothed = _smoothing(config, profiles)
    res = rd.fixed_point(config, grid, smoothed, profiles)
    energy = outer.DiscreteEnergy(config, grid, smoothed, profiles)
    rep = dc.detect_dead_cores(energy.u_base + res.phi.values,
                               energy.v_base + res.psi.values,
                               config, grid,
                               tol=settings["deadcore"]["tol"])
    report = dataclasses.asdict(rep)
    report.update({
        "c_tau": c_tau, "a_target": a_target,
        "core_radius": sol.core_radius,
        "supersolution_certificate_q": 5.4,
        "supersolution_certificate": dc.certify_supersolution(
            a_target, 5.4, sp)[0],
        "configuration": manifest.configuration,
    })
    _dump_json(report, manifest.add(os.path.join(args.out,
                                                 "deadcore.json")))
    manifest.write(args.out)
    print(f"dead core: c_tau = {c_tau:.17g}, core radius"
          f" {sol.core_radius:.6g} >= target {a_target:.6g};"
          f" planar ball sup {np.max(rep.u_ball_sups):.3e}"
          f" vs envelope {rep.envelope:.3e}")
    return 0


def cmd_verify_all(args) -> int:
    settings, config, manifest = _setup(args, "verify-all")
    results = vf.run_all(quick=args.quick)
    table = vf.format_table(results)
    print(table)
    txt_path = manifest.add(os.path.join(args.out, "acceptance.txt"))
    with open(txt_path, "w") as fh:
        fh.write(table + "\n")
    _dump_json([dataclasses.asdict(r) for r in results],
               manifest.add(os.path.join(args.out, "acceptance.json")))
    manifest.write(args.out)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "groundstate": cmd_groundstate,
    "certify": cmd_certify,
    "construct": cmd_construct,
    "energy-scan": cmd_energy_scan,
    "deadcore": cmd_deadcore,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segbumps",
        description="Segregated multi-bump construction pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="key = value config file (defaults built in)")
        p.add_argument("--out", default="out",
                       help="output directory for artifacts")
        p.add_argument("--ell", type=int, default=None,
                       help="override the ring count")
        p.add_argument("--seed", type=int, default=0,
                       help="random seed recorded in the manifest")
        p.add_argument("--threads", type=int, default=0,
                       help="limit BLAS thread count (0 = leave as is)")
        if name == "verify-all":
            p.add_argument("--quick", action="store_true",
                           help="coarser energy-expansion scan")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return COMMANDS[args.subcommand](args)
    except (ValueError, RuntimeError) as exc:
        print(f"{args.subcommand}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
