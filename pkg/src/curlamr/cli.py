"""Configuration-driven command line driver.

Subcommands:
  run <config.toml>       solve the configured AMR experiments, write CSV
                          convergence files, a summary table and optional
                          VTK snapshots under the output directory
  validate <config.toml>  check the configuration and exit
  export <run-dir>        convert saved final-state .npz files to VTK

Exit codes: 0 success, 2 configuration error, 3 numerical failure (with
partial outputs preserved).

The config file is TOML; see the README for the schema.  CURLAMR_BACKEND
selects the kernel backend and CURLAMR_THREADS caps numba threads.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .amr import ESTIMATORS, AmrConfig, ConvergenceRecord, run_amr
from .linalg import SolveConfig
from .problems import default_initial_mesh, get_problem
from .vtkio import export_vtk


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config error at '{key}': {message}")
        self.key = key


def _require(table, key, path):
    if key not in table:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return table[key]


def _solve_config(table, path):
    known = {"mode", "tol", "max_iterations", "iterations", "preconditioner"}
    for k in table:
        if k not in known:
            raise ConfigError(f"{path}.{k}", "unknown key")
    try:
        return SolveConfig(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(path):
    """Load and validate a run configuration; raises ConfigError."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(str(path), "file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML parse failure: {exc}") from exc

    cfg = {}
    prob = _require(raw, "problem", "")
    name = _require(prob, "name", "problem")
    if "/" not in name:
        variant = _require(prob, "variant", "problem")
        name = f"{name}/{variant}"
    kwargs = {}
    if "a" in prob:
        if name.startswith("example2"):
            kwargs["a"] = float(prob["a"])
        else:
            raise ConfigError("problem.a", "only example2 takes the contrast a")
    try:
        cfg["problem"] = get_problem(name, **kwargs)
    except (KeyError, ValueError) as exc:
        raise ConfigError("problem.name", str(exc)) from exc

    meshtab = raw.get("mesh", {})
    subdiv = meshtab.get("subdivisions")
    if subdiv is not None:
        subdiv = tuple(int(v) for v in subdiv)
        if len(subdiv) != 3 or min(subdiv) < 1:
            raise ConfigError("mesh.subdivisions", "need three positive integers")
    cfg["subdivisions"] = subdiv

    amr = raw.get("amr", {})
    est = amr.get("estimators", amr.get("estimator", ["new"]))
    if isinstance(est, str):
        est = [est]
    for e in est:
        if e not in ESTIMATORS:
            raise ConfigError("amr.estimators", f"unknown estimator {e!r}")
    cfg["estimators"] = list(est)

    solver = raw.get("solver", {})
    primal = _solve_config(solver.get("primal", {}), "solver.primal")
    auxiliary = _solve_config(solver.get("auxiliary", {}), "solver.auxiliary")

    quad = raw.get("quadrature", {})
    try:
        cfg["amr_template"] = dict(
            theta=float(amr.get("theta", 0.5)),
            max_dof=int(amr.get("max_dof", 150000)),
            max_iterations=int(amr.get("max_iterations", 40)),
            target_rel_error=amr.get("target_rel_error"),
            solver_primal=primal, solver_auxiliary=auxiliary,
            quad_volume=int(quad.get("volume", 4)),
            quad_face=int(quad.get("face", 4)),
            quad_edge=int(quad.get("edge", 5)),
            error_quad=quad.get("error"),
        )
        AmrConfig(estimator=est[0], **cfg["amr_template"])
    except ValueError as exc:
        raise ConfigError("amr", str(exc)) from exc

    out = raw.get("output", {})
    cfg["outdir"] = Path(out.get("directory", "out"))
    cfg["csv"] = bool(out.get("csv", True))
    cfg["vtk"] = bool(out.get("vtk", False))
    cfg["seed"] = int(out.get("seed", 0))
    return cfg


def _run(cfg):
    outdir = cfg["outdir"]
    outdir.mkdir(parents=True, exist_ok=True)
    problem = cfg["problem"]
    summary = []
    status = 0
    for est in cfg["estimators"]:
        config = AmrConfig(estimator=est, **cfg["amr_template"])
        mesh0 = default_initial_mesh(problem, cfg["subdivisions"])
        csv_path = outdir / f"{est}_convergence.csv"
        fh = open(csv_path, "w") if cfg["csv"] else None
        if fh:
            fh.write(ConvergenceRecord.CSV_HEADER + "\n")

        def stream(rec, fh=fh):
            if fh:
                fh.write(rec.csv_row() + "\n")
                fh.flush()

        try:
            records, state = run_amr(problem, mesh0, config, on_record=stream)
        except Exception as exc:  # numerical failure: keep partial outputs
            print(f"error: estimator {est} failed: {exc}", file=sys.stderr)
            status = 3
            continue
        finally:
            if fh:
                fh.close()

        final = records[-1]
        summary.append((est, final))
        mesh = state["mesh"]
        np.savez(outdir / f"{est}_final.npz",
                 vertices=mesh.vertices, tets=mesh.tets,
                 subdomain=mesh.subdomains,
                 eta_K=state["report"].indicators)
        if cfg["vtk"]:
            export_vtk(mesh, {"subdomain": mesh.subdomains.astype(float),
                              "eta_K": state["report"].indicators},
                       outdir / f"{est}_final.vtk")

    lines = [f"problem: {problem.key}   seed: {cfg['seed']}",
             f"{'estimator':<12}{'#Iter':>7}{'#DoF':>9}{'error':>12}"
             f"{'rel-error':>12}{'eta':>12}{'eff-index':>11}"]
    for est, rec in summary:
        lines.append(f"{est:<12}{rec.iteration + 1:>7}{rec.dof:>9}"
                     f"{rec.error:>12.4g}{rec.rel_error:>12.4g}"
                     f"{rec.eta:>12.4g}{rec.eff_index:>11.3f}")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return status


def _export(rundir):
    rundir = Path(rundir)
    hits = sorted(rundir.glob("*_final.npz"))
    if not hits:
        print(f"error: no *_final.npz files under {rundir}", file=sys.stderr)
        return 2
    from .mesh import TetMesh

    for npz in hits:
        data = np.load(npz)
        mesh = TetMesh(data["vertices"], data["tets"],
                       subdomains=data["subdomain"])
        out = npz.with_suffix(".vtk")
        export_vtk(mesh, {"subdomain": data["subdomain"].astype(float),
                          "eta_K": data["eta_K"]}, out)
        print(f"wrote {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="curlamr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the configured experiments")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")
    p_exp = sub.add_parser("export", help="export saved runs to VTK")
    p_exp.add_argument("rundir")
    args = parser.parse_args(argv)

    if args.command == "export":
        return _export(args.rundir)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {args.config} is a valid curlamr config")
        return 0
    return _run(cfg)


if __name__ == "__main__":
    sys.exit(main())
