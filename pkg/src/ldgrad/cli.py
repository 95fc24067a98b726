"""Batch command-line front door.

Subcommands: analyze (structure diagnostics), evolve (trajectory CSVs and
comparison gaps), simulate (particle experiment report), diffusion
(grid profiles, entropy decay, decomposition report, plot script).

Exit codes: 0 ok, 2 input error, 3 structural refusal (no gradient system),
4 runtime/statistical failure.  Outputs are written atomically (temp file +
rename) and are byte-identical for a fixed config and seed regardless of
worker count; every report carries its seeds and tolerances.  A run
manifest (command, config hash, outputs, wall clock) is written next to the
outputs; the manifest is the one file allowed to differ between reruns.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, chains, diffusion, evolve, markov, particle, structure
from .errors import (InvalidGenerator, InvalidInput, LdgradError,
                     NotGradientSystem, NotWeaklyReversible, ReducibleChain,
                     TiltTooStrong)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STRUCTURE = 3
EXIT_RUNTIME = 4


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError("not JSON serializable: %r" % type(o))


def _atomic_write(path, data):
    tmp = path + ".tmp"
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2,
                                   default=_json_default) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
            for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _out_dir(args):
    out = os.environ.get("OUT_DIR", None) or args.out
    os.makedirs(out, exist_ok=True)
    return out


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_manifest(out, command, args_dict, seeds, tolerances, outputs,
                    wall_clock, config_path=None):
    manifest = {
        "command": command,
        "args": args_dict,
        "config_sha256": _sha256_file(config_path) if config_path else None,
        "seeds": seeds,
        "tool_version": __version__,
        "tolerances": tolerances,
        "outputs": sorted(outputs),
        "wall_clock_s": wall_clock,
    }
    write_json(os.path.join(out, "manifest.json"), manifest)


def cmd_analyze(args):
    t0 = time.perf_counter()
    g = markov.load_generator(args.generator)
    diag = structure.diagnostics(g, sample_count=args.samples, seed=args.seed)
    report = diag.to_dict()
    report["generator_file"] = args.generator
    if diag.detailed_balance:
        verdict = "gradient system (detailed balance)"
        report["driving_functional"] = "S = 0.5 * E_pi"
    else:
        verdict = "covector system only"
    report["verdict"] = verdict
    if g.weakly_reversible and diag.detailed_balance:
        for fam in (structure.Family.QUADRATIC_FAMILY,
                    structure.Family.COSH_FAMILY):
            _, srep = structure.determine_entropy_scale(g, fam, seed=args.seed)
            report.setdefault("family_entropy_scales", {})[fam.value] = srep
        report["cosh_vs_ldp"] = structure.cosh_vs_ldp_report(g, seed=args.seed)
    out = _out_dir(args)
    path = os.path.join(out, "diagnostics.json")
    write_json(path, report)
    print("verdict: %s" % verdict)
    for key in ("decomposition_residual_max", "psi_star_symmetry_defect",
                "time_symmetry_defect_max", "integrability_defect"):
        print("  %s = %.6e" % (key, report[key]))
    print("  critical covector equals half entropy gradient: %s"
          % report["critical_covector_is_half_entropy_gradient"])
    _write_manifest(out, "analyze", {"generator": args.generator,
                                     "samples": args.samples},
                    {"seed": args.seed}, {"diagnostic_tol": structure.DIAG_TOL},
                    ["diagnostics.json"], time.perf_counter() - t0)
    return EXIT_OK


def _parse_rho0(text, g):
    if text == "pi":
        return markov.analyze_balance(g).invariant_measure
    vals = np.array([float(x) for x in text.split(",")])
    return markov.as_simplex(vals)


def cmd_evolve(args):
    t0 = time.perf_counter()
    g = markov.load_generator(args.generator)
    tags = args.structure.split(",")
    valid = {"linear", "ldp", "cosh_family", "quadratic_family"}
    for tag in tags:
        if tag not in valid:
            raise InvalidInput("unknown structure tag %r" % tag)
    rho0 = _parse_rho0(args.rho0, g)
    out = _out_dir(args)
    outputs = []
    trajs = {}
    for tag in tags:
        if tag == "linear":
            traj = evolve.integrate_linear(rho0, g, args.T, args.dt)
        else:
            gs = structure.build_structure(g, structure.Family(tag),
                                           seed=args.seed)
            traj = evolve.integrate_gradient_flow(rho0, gs, args.T, args.dt)
        name = "trajectory_%s.csv" % tag
        evolve.trajectory_to_csv(traj, os.path.join(out, name))
        outputs.append(name)
        trajs[tag] = traj
    report = {"generator_file": args.generator, "rho0": rho0.tolist(),
              "T": args.T, "dt": args.dt, "tags": tags, "seed": args.seed}
    if len(tags) == 2:
        report["gap"] = evolve.compare_trajectories(trajs[tags[0]],
                                                    trajs[tags[1]])
        print("sup-norm gap %s vs %s: %.6e at t = %.6g"
              % (tags[0], tags[1], report["gap"]["sup_norm_gap"],
                 report["gap"]["at_time"]))
    path = os.path.join(out, "evolve_report.json")
    write_json(path, report)
    outputs.append("evolve_report.json")
    _write_manifest(out, "evolve", {"generator": args.generator,
                                    "rho0": args.rho0, "T": args.T,
                                    "dt": args.dt, "structure": args.structure},
                    {"seed": args.seed},
                    {"mass_drift_per_step": evolve.MASS_DRIFT_TOL},
                    outputs, time.perf_counter() - t0)
    return EXIT_OK


def cmd_simulate(args):
    t0 = time.perf_counter()
    with open(args.config) as fh:
        cfg = json.load(fh)
    g = markov.load_generator(cfg["generator"])
    T = float(cfg["T"])
    dt = float(cfg.get("grid_dt", 0.01))
    times = np.arange(int(round(T / dt)) + 1) * dt
    target_cfg = cfg["target"]
    if target_cfg["type"] == "constant":
        rho = markov.as_simplex(target_cfg["rho"])
        states = np.tile(rho, (times.size, 1))
    elif target_cfg["type"] == "linear_solution":
        rho0 = markov.as_simplex(target_cfg["rho0"])
        states = evolve.exact_linear_solution(rho0, g, times).states
    else:
        raise InvalidInput("unknown target type %r" % target_cfg["type"])
    report, rows = particle.rate_vs_probability_experiment(
        g, times, states, float(cfg["tube_radius"]),
        [int(n) for n in cfg["n_list"]], int(cfg["replicas"]),
        int(cfg["seed"]), workers=int(cfg.get("workers", 1)))
    # Zero-tilt sanity: the identity tilt has zero log density by definition.
    zero = particle.TiltField.constant(np.zeros(g.size), T)
    p0 = particle.simulate(
        g, 10, T, particle.deterministic_assignment(states[0], 10),
        int(cfg["seed"]), tilt=zero)
    report["zero_tilt_girsanov"] = particle.girsanov_log_density(p0, zero, g)
    report["config_file"] = args.config
    out = _out_dir(args)
    write_json(os.path.join(out, "ldp_report.json"), report)
    write_csv(os.path.join(out, "replicas.csv"),
              ["n", "replica", "hit", "G", "log_weight", "distance"],
              [[r["n"], r["replica"], r["hit"], r["G"], r["log_weight"],
               r["distance"]] for r in rows])
    print("I_T(target) = %.6e" % report["rate_functional"])
    for n, entry in report["estimates"].items():
        print("  n=%s: -(1/n) log p-hat = %.6e (se %.2e, hits %.2f, ESS %.1f%s)"
              % (n, entry["estimate"], entry["standard_error"],
                 entry["hit_fraction"], entry["effective_sample_size"],
                 ", VARIANCE FLAGGED" if entry["variance_flagged"] else ""))
    print("girsanov consistency |gap| = %.3e"
          % report["girsanov_consistency_abs_gap"])
    _write_manifest(out, "simulate", {"config": args.config},
                    {"seed": cfg["seed"]},
                    {"girsanov_exactness": 1e-10},
                    ["ldp_report.json", "replicas.csv"],
                    time.perf_counter() - t0, config_path=args.config)
    return EXIT_OK


PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Plot commands for the diffusion outputs in this directory.
import csv, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return rows

prof = read("profiles.csv")
ent = read("entropy.csv")
times = sorted({r["t"] for r in prof}, key=float)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for t in times:
    xs = [float(r["x"]) for r in prof if r["t"] == t]
    ys = [float(r["rho"]) for r in prof if r["t"] == t]
    ax1.plot(xs, ys, label="t=%s" % t)
ax1.plot([float(r["x"]) for r in prof if r["t"] == times[0]],
         [float(r["pi"]) for r in prof if r["t"] == times[0]],
         "k--", label="pi")
ax1.set_xlabel("x"); ax1.set_ylabel("density"); ax1.legend(fontsize=6)
ax2.plot([float(r["t"]) for r in ent], [float(r["entropy"]) for r in ent])
ax2.set_xlabel("t"); ax2.set_ylabel("entropy")
fig.tight_layout()
fig.savefig("diffusion.png", dpi=150)
print("wrote diffusion.png")
"""


def cmd_diffusion(args):
    t0 = time.perf_counter()
    with open(args.config) as fh:
        cfg = json.load(fh)
    g = diffusion.grid_from_config(cfg)
    gen = diffusion.discretize_generator(g)
    seed = int(cfg.get("seed", args.seed))
    rho0_cfg = cfg.get("rho0", {"type": "gaussian", "mean": 1.0, "var": 0.8})
    if rho0_cfg["type"] == "gaussian":
        rho0 = diffusion.gaussian_initial_masses(g, rho0_cfg["mean"],
                                                 rho0_cfg["var"])
    elif rho0_cfg["type"] == "pi":
        rho0 = g.invariant_masses()
    else:
        raise InvalidInput("unknown rho0 type %r" % rho0_cfg["type"])
    traj = evolve.integrate_linear(rho0, gen, args.T, args.dt,
                                   with_entropy=False)
    pi = g.invariant_masses()
    entropy = [markov.relative_entropy(traj.states[k], pi)
               for k in range(traj.times.size)]

    # Exact quadratic-form split, checked on seeded random tangents.
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(cfg.get("decomposition_samples", 20))):
        rho = 0.5 * rng.dirichlet(np.ones(g.N)) + 0.5 / g.N
        s = rng.standard_normal(g.N)
        s = 0.01 * (s - s.mean())
        worst = max(worst, diffusion.decomposition_residual(rho, s, g))

    out = _out_dir(args)
    snap = np.linspace(0, traj.times.size - 1, 6).astype(int)
    prof_rows = []
    for k in snap:
        for x, dens, pdens, ds in diffusion.profiles_rows(g, traj.states[k]):
            prof_rows.append([float(traj.times[k]), x, dens, pdens, ds])
    write_csv(os.path.join(out, "profiles.csv"),
              ["t", "x", "rho", "pi", "DS"], prof_rows)
    write_csv(os.path.join(out, "entropy.csv"), ["t", "entropy"],
              [[float(t), float(e)] for t, e in zip(traj.times, entropy)])
    _atomic_write(os.path.join(out, "plot_diffusion.py"), PLOT_SCRIPT)
    report = {
        "grid": {"a": g.a, "b": g.b, "N": g.N, "h": g.h},
        "T": args.T, "dt": args.dt, "seed": seed,
        "decomposition_residual_max": worst,
        "decomposition_tolerance": 1e-12,
        "entropy_monotone": bool(np.all(np.diff(entropy) <= 1e-10)),
        "final_gap_to_pi": float(np.abs(traj.states[-1] - pi).max()),
        "detailed_balance": True,
    }
    if isinstance(cfg.get("potential"), str) and cfg["potential"] == "quadratic":
        report["truncation_tail_mass"] = diffusion.gaussian_tail_mass(g)
        report["truncation_tail_target"] = diffusion.TAIL_MASS_TARGET
    write_json(os.path.join(out, "diffusion_report.json"), report)
    print("decomposition residual max = %.3e (must be <= 1e-12)" % worst)
    print("entropy monotone: %s; final |rho - pi|_inf = %.3e"
          % (report["entropy_monotone"], report["final_gap_to_pi"]))
    _write_manifest(out, "diffusion", {"config": args.config, "T": args.T,
                                       "dt": args.dt},
                    {"seed": seed}, {"decomposition_residual": 1e-12},
                    ["profiles.csv", "entropy.csv", "plot_diffusion.py",
                     "diffusion_report.json"],
                    time.perf_counter() - t0, config_path=args.config)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ldgrad",
        description="Gradient structures for Markov rate functionals: "
                    "diagnostics, flows, particle experiments, diffusion.")
    sub = ap.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="structure diagnostics for a generator")
    pa.add_argument("--generator", required=True)
    pa.add_argument("--samples", type=int, default=20)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", default="out")
    pa.set_defaults(func=cmd_analyze)

    pe = sub.add_parser("evolve", help="integrate linear and/or gradient flows")
    pe.add_argument("--generator", required=True)
    pe.add_argument("--rho0", default="pi",
                    help="comma-separated masses or the keyword 'pi'")
    pe.add_argument("--T", type=float, default=5.0)
    pe.add_argument("--dt", type=float, default=1e-3)
    pe.add_argument("--structure", default="linear",
                    help="TAG or TAG,TAG from linear|ldp|cosh_family|"
                         "quadratic_family")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", default="out")
    pe.set_defaults(func=cmd_evolve)

    ps = sub.add_parser("simulate", help="tilted particle experiment")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", default="out")
    ps.set_defaults(func=cmd_simulate)

    pd = sub.add_parser("diffusion", help="1-D drift-diffusion run")
    pd.add_argument("--config", required=True)
    pd.add_argument("--T", type=float, default=5.0)
    pd.add_argument("--dt", type=float, default=1e-3)
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--out", default="out")
    pd.set_defaults(func=cmd_diffusion)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (NotGradientSystem, NotWeaklyReversible) as exc:
        print("structural refusal: %s" % exc, file=sys.stderr)
        return EXIT_STRUCTURE
    except TiltTooStrong as exc:
        print("runtime failure: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME
    except (InvalidGenerator, ReducibleChain, InvalidInput,
            FileNotFoundError, KeyError, json.JSONDecodeError,
            ValueError) as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except LdgradError as exc:
        print("runtime failure: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
