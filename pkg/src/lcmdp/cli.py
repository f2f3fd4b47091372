"""Command-line front end: compile, build-grid, solve, simulate, render, bench."""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import gridworld as gw
from . import lp as lpcore
from . import model as mdl
from .automata import SEMANTICS, compile_spec, dfa_to_dict, to_dot
from .product import build_product, load_product, save_product
from .prune import MODES, InfeasibleStructure, prune
from .sim import sample, write_csv
from .synth import StructurallyInfeasible, SynthesisProblem, expected_visits, policy_from_dict, synthesize

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

MISSION_REGEX = "(A+B+C)*D(D+C)*"


class StageError(Exception):
    def __init__(self, stage: str, msg: str, code: int = EXIT_ERROR):
        super().__init__(f"{stage}: {msg}")
        self.stage = stage
        self.code = code


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        code = EXIT_INFEASIBLE if isinstance(exc, (InfeasibleStructure, StructurallyInfeasible)) else EXIT_ERROR
        raise StageError(name, str(exc) or type(exc).__name__, code) from exc


# --- outputs -----------------------------------------------------------------------

class Outputs:
    """Output directory with a manifest of written files and their hashes."""

    def __init__(self, path, command: str, config: dict):
        self.dir = Path(path)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.files: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.dir / name

    def text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return self.record(name)

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2) + "\n")

    def record(self, name: str) -> Path:
        p = self.path(name)
        self.files[name] = hashlib.sha256(p.read_bytes()).hexdigest()
        return p

    def close(self) -> None:
        mpath = self.path("manifest.json")
        runs = []
        if mpath.exists():
            with contextlib.suppress(json.JSONDecodeError, KeyError):
                runs = json.loads(mpath.read_text())["runs"]
        runs.append({"command": self.command, "config": self.config, "files": self.files})
        mpath.write_text(json.dumps({"runs": runs}, indent=2) + "\n")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# --- shared input handling ----------------------------------------------------------

def parse_bounds(items, n_aux: int) -> list[float]:
    """``["1=140"]`` to a bound list; auxiliary costs are numbered from 1."""
    bounds = [float("inf")] * n_aux
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"bound {item!r} is not of the form <i>=<value>")
        i = int(key)
        if not 1 <= i <= n_aux:
            raise ValueError(f"bound index {i} outside 1..{n_aux}")
        bounds[i - 1] = float(val)
    return bounds


def load_grid(args) -> tuple[gw.ElevationMap, np.ndarray, gw.GridConfig]:
    if args.synthetic:
        return gw.synthetic_instance(args.synthetic)
    if not (args.grid_elev and args.grid_mask and args.grid_config):
        raise ValueError("grid input needs --grid-elev, --grid-mask and --grid-config (or --synthetic)")
    elev = gw.load_elevation(args.grid_elev)
    mask = gw.load_mask(args.grid_mask)
    cfg = gw.load_config(args.grid_config, mask)
    return elev, gw.derive_risk(elev), cfg


def load_model(args) -> mdl.Lcmdp:
    if args.model:
        return mdl.load(args.model)
    elev, risk, cfg = load_grid(args)
    return gw.build_grid_lcmdp(elev, risk, cfg)


def spec_text(args) -> str:
    if args.spec is None:
        raise ValueError("no specification given (--spec)")
    p = Path(args.spec)
    if args.spec_kind != "dfa" and p.suffix in (".txt", ".ltl", ".re") and p.is_file():
        return p.read_text().strip()
    return args.spec


def build_pipeline(args, out: Outputs | None = None):
    with stage("model"):
        model = load_model(args)
    with stage("spec"):
        dfa = compile_spec(spec_text(args), model.ap, kind=args.spec_kind, semantics=args.semantics)
    with stage("product"):
        prod = build_product(model, dfa)
    report = None
    if args.prune != "off":
        with stage("prune"):
            prod, report = prune(prod, args.prune)
        if out is not None:
            out.text("prune.json", report.to_json() + "\n")
    return model, dfa, prod, report


# --- commands ------------------------------------------------------------------------

def cmd_compile(args) -> int:
    out = Outputs(args.out, "compile", _config(args))
    with stage("spec"):
        ap = [a.strip() for a in args.ap.split(",") if a.strip()]
        dfa = compile_spec(spec_text(args), ap, kind=args.spec_kind, semantics=args.semantics)
    out.json("dfa.json", dfa_to_dict(dfa))
    out.text("dfa.dot", to_dot(dfa))
    out.close()
    print(f"n_d = {dfa.n_states}")
    return EXIT_OK


def cmd_build_grid(args) -> int:
    out = Outputs(args.out, "build-grid", _config(args))
    with stage("grid"):
        elev, risk, cfg = load_grid(args)
        model = gw.build_grid_lcmdp(elev, risk, cfg)
    out.text("model.json", mdl.dumps(model))
    if args.synthetic:
        # write the generated inputs so later commands can use the file flags
        gw.write_grid_csv(elev.heights, out.path("elevation.csv"))
        out.record("elevation.csv")
        gw.write_grid_csv(cfg.mask, out.path("mask.csv"))
        out.record("mask.csv")
        out.json("grid.json", cfg.to_dict())
    out.close()
    print(f"{model.n_states} states, {model.n_choices} state-action pairs")
    return EXIT_OK


def cmd_solve(args) -> int:
    out = Outputs(args.out, "solve", _config(args))
    model, _, prod, report = build_pipeline(args, out)
    with stage("synth"):
        bounds = parse_bounds(args.bound, model.n_costs - 1)
        res = synthesize(SynthesisProblem(prod, args.pl, bounds))
    save_product(prod, out.path("product.json"))
    out.record("product.json")
    if args.dump_lp:
        out.text("lp.txt", res.lp.dump())
    summary = {
        "status": res.status,
        "message": res.message,
        "lp_variables": res.lp.n_vars,
        "lp_constraints": res.lp.n_constraints,
        "iterations": res.solution.iterations,
        "solve_time": res.solution.time,
        "lp": res.lp_report.to_dict() if res.lp_report else None,
        "exact": res.exact_report.to_dict() if res.exact_report else None,
        "prune": json.loads(report.to_json()) if report else None,
    }
    out.json("report.json", summary)
    if res.ok:
        out.text("policy.json", res.policy.to_json() + "\n")
    out.close()
    if report is not None:
        print(report.table())
    print(f"status: {res.status}  ({res.lp.n_vars} variables, {res.lp.n_constraints} constraints, "
          f"{res.solution.time:.2f} s)")
    if not res.ok:
        print(res.message, file=sys.stderr)
        return EXIT_INFEASIBLE if res.status == lpcore.INFEASIBLE else EXIT_SOLVER
    rep = res.exact_report or res.lp_report
    print(f"objective: {rep.objective:.6f}")
    for i, c in enumerate(rep.aux_costs, start=1):
        print(f"cost {i}: {c:.6f}  (bound {bounds[i - 1]})")
    print(f"satisfaction: {rep.satisfaction:.6f}  (threshold {args.pl})")
    return EXIT_OK


def _policy_and_product(args):
    with stage("policy"):
        if args.product:
            prod = load_product(args.product)
        else:
            _, _, prod, _ = build_pipeline(args)
        policy = policy_from_dict(json.loads(Path(args.policy).read_text()), prod)
    return policy, prod


def cmd_simulate(args) -> int:
    out = Outputs(args.out, "simulate", _config(args))
    policy, prod = _policy_and_product(args)
    with stage("simulate"):
        stats = sample(policy, prod, seed=args.seed, n=args.n, step_cap=args.step_cap,
                       keep_trajectories=bool(args.csv))
    out.text("sim.json", stats.to_json() + "\n")
    if args.csv:
        write_csv(stats, out.path("trajectories.csv"))
        out.record("trajectories.csv")
    out.close()
    print(stats.to_json())
    return EXIT_OK


def cmd_render(args) -> int:
    out = Outputs(args.out, "render", _config(args))
    with stage("grid"):
        elev, risk, cfg = load_grid(args)
    H, W = elev.heights.shape
    cells, heat = [], None
    if args.policy:
        policy, prod = _policy_and_product(args)
        if args.heat:
            with stage("render"):
                visits = expected_visits(policy)
                heat = np.zeros(H * W)
                keep = prod.mdp_state >= 0
                np.add.at(heat, prod.mdp_state[keep], visits[keep])
                heat = heat.reshape(H, W)
        else:
            with stage("simulate"):
                stats = sample(policy, prod, seed=args.seed, n=1, keep_trajectories=True)
            traj = stats.trajectories[0]
            cells = [gw.cell_of(prod.mdp_state[x], W) for x in traj.states if prod.mdp_state[x] >= 0]
    with stage("render"):
        gw.render(out.path("render.ppm"), risk, cfg.mask, cells=cells, heat=heat, scale=args.scale)
    out.record("render.ppm")
    out.close()
    what = "visit heat" if heat is not None else f"{len(set(cells))} path cells"
    print(f"wrote {out.path('render.ppm')} ({what})")
    return EXIT_OK


def bench_rows(sizes, spec: str, pl: float, mode: str, bound_factor: float, semantics: str = "exact",
               solver=lpcore.solve) -> list[dict]:
    """Solve each synthetic grid size without and with pruning."""
    rows = []
    for size in sizes:
        elev, risk, cfg = gw.synthetic_instance(size)
        model = gw.build_grid_lcmdp(elev, risk, cfg)
        dfa = compile_spec(spec, model.ap, semantics=semantics)
        full = build_product(model, dfa)
        pruned, _ = prune(full, mode)
        bounds = [bound_factor * gw.manhattan_to_goal(cfg)]
        row = {"size": size}
        for tag, prod in (("np", full), ("wp", pruned)):
            res = synthesize(SynthesisProblem(prod, pl, bounds), solver=solver, evaluate=False)
            row[f"vars_{tag}"] = res.lp.n_vars
            row[f"time_{tag}"] = res.solution.time
            row[f"obj_{tag}"] = res.solution.objective if res.ok else None
            row[f"status_{tag}"] = res.status
        rows.append(row)
    return rows


def bench_table(rows: list[dict]) -> str:
    head = f"{'size':>6} {'#Var NP':>8} {'#Var WP':>8} {'Time NP':>8} {'Time WP':>8} {'Obj NP':>14} {'Obj WP':>14}"
    lines = [head, "-" * len(head)]

    def fmt(v):
        return f"{v:14.8f}" if v is not None else f"{'-':>14}"

    for r in rows:
        lines.append(f"{r['size']:>6} {r['vars_np']:>8} {r['vars_wp']:>8} {r['time_np']:>8.2f} "
                     f"{r['time_wp']:>8.2f} {fmt(r['obj_np'])} {fmt(r['obj_wp'])}")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    out = Outputs(args.out, "bench", _config(args))
    sizes = [int(s) for s in args.sizes.split(",")]
    if args.prune == "off":
        raise StageError("bench", "bench compares against a pruned run; use --prune reach-only or full")
    with stage("bench"):
        rows = bench_rows(sizes, args.spec or MISSION_REGEX, args.pl, args.prune, args.bound_factor,
                          args.semantics)
    table = bench_table(rows)
    out.json("bench.json", rows)
    out.text("bench.txt", table + "\n")
    out.close()
    print(table)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def _add_grid(p) -> None:
    p.add_argument("--grid-elev", help="elevation CSV or PGM")
    p.add_argument("--grid-mask", help="region mask CSV or PGM (0..3 = A..D)")
    p.add_argument("--grid-config", help="grid config JSON (start, goal, law parameters)")
    p.add_argument("--synthetic", type=int, metavar="SIZE", help="use the built-in synthetic map")


def _add_spec(p, default=None) -> None:
    p.add_argument("--spec", default=default, help="formula or regex text, or a DFA JSON path")
    p.add_argument("--spec-kind", choices=("scltl", "regex", "dfa"), default="regex")
    p.add_argument("--semantics", choices=SEMANTICS, default="exact")


def _add_pipeline(p) -> None:
    p.add_argument("--model", help="model JSON (instead of grid inputs)")
    _add_grid(p)
    _add_spec(p)
    p.add_argument("--prune", choices=("off",) + MODES, default="reach-only")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcmdp", description="Constrained policy synthesis for labeled MDPs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a specification to a minimal DFA")
    _add_spec(p)
    p.add_argument("--ap", default="A,B,C,D", help="comma-separated propositions")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("build-grid", help="build the grid model from terrain inputs")
    _add_grid(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_build_grid)

    p = sub.add_parser("solve", help="product, prune, LP and policy")
    _add_pipeline(p)
    p.add_argument("--pl", type=float, default=0.0, help="satisfaction threshold")
    p.add_argument("--bound", action="append", metavar="I=VALUE", help="bound on auxiliary cost I (repeatable)")
    p.add_argument("--dump-lp", action="store_true", help="also write the LP as text")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo rollouts of a policy")
    _add_pipeline(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--product", help="product JSON written by solve")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--step-cap", type=int, default=None)
    p.add_argument("--csv", action="store_true", help="write one CSV row per trajectory")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="draw the risk map with a sampled path or visit heat")
    _add_pipeline(p)
    p.add_argument("--policy")
    p.add_argument("--product")
    p.add_argument("--heat", action="store_true", help="shade by expected visits instead of a path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=8)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="pruning benchmark over synthetic grid sizes")
    _add_spec(p, default=MISSION_REGEX)
    p.add_argument("--sizes", default="10,12,14,16")
    p.add_argument("--pl", type=float, default=0.7)
    p.add_argument("--bound-factor", type=float, default=1.4,
                   help="path-length bound as a multiple of the start-goal Manhattan distance")
    p.add_argument("--prune", choices=("off",) + MODES, default="reach-only")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "pl") and not 0.0 <= args.pl <= 1.0:
        print(f"error: --pl {args.pl} outside [0, 1]", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {str(exc).split(': ', 1)[1]}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
