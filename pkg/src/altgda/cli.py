"""Command-line interface: ``altgda <command> [options]``.

Options are resolved in three layers.  Built-in defaults are overridden by
the document given with ``--config`` (TOML or JSON, keys spelled like the
long options with ``_`` for ``-``), which is in turn overridden by flags on
the command line.  ``PEP_SDP_SOLVER`` beats every other way of naming the
SDP solver.  Every command writes ``manifest.json`` with the resolved
configuration into ``--out``.

Exit codes: 0 success, 1 audit failure, 2 configuration error, 3 solver error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .dynamics import RunConfig, run
from .errors import (AltGDAError, CertificateRejected, ConfigurationError, ReconstructionFailed,
                     SolverError)
from .game import (DISTRIBUTIONS, GameSpec, MAX_ENUM_DIM, MixedStrategy, generate_game, load_matrix,
                   noninterior_3x3, rock_paper_scissors, save_matrix, solve_equilibrium_max_support)

log = logging.getLogger("altgda")

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
BUILTIN_GAMES = {"rps": rock_paper_scissors, "noninterior3x3": noninterior_3x3}
FIGURES = ("fig2", "fig3", "fig4", "tables")

COMMON_DEFAULTS = {"seed": 0, "jobs": None, "out": "results", "solver": None, "verbose": False}
DEFAULTS = {
    "run": {"game": None, "builtin": None, "dist": "uniform01", "m": 10, "n": 20, "game_seed": None,
            "algorithm": "altgda", "eta": 0.01, "T": 10_000, "repeats": 1, "init": "simplex",
            "x0": None, "y0": None},
    "audit": {"game": None, "builtin": "rps", "dist": "uniform01", "m": 3, "n": 3, "game_seed": None,
              "eta": 0.1, "T": 10_000, "x0": None, "y0": None, "probes": 100, "probe_steps": 1000},
    "pep": {"algorithm": "altgda", "T": 5, "eta": 1.527, "export_sdpa": None, "reconstruct": False},
    "tune": {"algorithm": "altgda", "T": [5], "eta_min": 1.0, "eta_max": 2.0, "points_n": 20,
             "shrink_alpha": 1.0, "tol_eps": 1e-3, "max_rounds": 50},
    "gen-game": {"dist": "uniform01", "m": 10, "n": 20, "game_seed": None, "path": None},
    "reproduce": {"figure": None, "T": None, "eta": None, "repeats": 10, "t_min": 5, "t_max": 50,
                  "algorithms": ["altgda", "simgda"], "m": 10, "n": 20, "dists": None,
                  "eta_min": None, "eta_max": None, "points_n": 20, "shrink_alpha": 1.0,
                  "tol_eps": 1e-3, "max_rounds": 50},
}
# Initial search windows for the tables; every tabulated optimum lies inside.
TABLE_RANGES = {"altgda": (1.0, 2.0), "simgda": (0.2, 2.5)}


def _add_common(p):
    p.add_argument("--config", help="TOML or JSON file with option values")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out", help="output directory (default ./results)")
    p.add_argument("--solver", help="SDP solver command or 'bundled'; PEP_SDP_SOLVER takes precedence")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_game(p):
    g = p.add_argument_group("game")
    g.add_argument("--game", help="matrix file in the 'm n' text format")
    g.add_argument("--builtin", choices=sorted(BUILTIN_GAMES))
    g.add_argument("--dist", choices=[d for d in DISTRIBUTIONS if d != "explicit"])
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--game-seed", type=int, help="seed of the generated game (default --seed)")


def _floats(text):
    return [float(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="altgda", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run AltGDA or SimGDA with random restarts",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_game(p)
    p.add_argument("--algorithm", choices=["altgda", "simgda"])
    p.add_argument("--eta", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--init", choices=list(bench.INIT_MODES))
    p.add_argument("--x0", type=_floats, help="comma-separated start for x (single repeat)")
    p.add_argument("--y0", type=_floats, help="comma-separated start for y (single repeat)")

    p = sub.add_parser("audit", help="check every lemma inequality on a stored AltGDA run",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_game(p)
    p.add_argument("--eta", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--y0", type=_floats)
    p.add_argument("--probes", type=int)
    p.add_argument("--probe-steps", type=int)

    p = sub.add_parser("pep", help="worst-case averaged gap via the SDP", argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--algorithm", choices=["altgda", "simgda"])
    p.add_argument("--T", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--export-sdpa", help="also write the full SDPA instance to this path")
    p.add_argument("--reconstruct", action="store_true", help="recover and replay a worst-case game")

    p = sub.add_parser("tune", help="optimize the stepsize for given horizons",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--algorithm", choices=["altgda", "simgda"])
    p.add_argument("--T", type=int, nargs="+")
    p.add_argument("--eta-min", type=float)
    p.add_argument("--eta-max", type=float)
    p.add_argument("--points-n", type=int)
    p.add_argument("--shrink-alpha", type=float)
    p.add_argument("--tol-eps", type=float)
    p.add_argument("--max-rounds", type=int)

    p = sub.add_parser("gen-game", help="write a generated payoff matrix", argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--dist", choices=[d for d in DISTRIBUTIONS if d != "explicit"])
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--game-seed", type=int)
    p.add_argument("--path", help="matrix file to write (default <out>/game_<dist>_<m>x<n>.txt)")

    p = sub.add_parser("reproduce", help="data behind a figure or table", argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--T", type=int, help="horizon (fig2/fig3/fig4)")
    p.add_argument("--eta", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--dists", nargs="+", choices=[d for d in DISTRIBUTIONS if d != "explicit"])
    p.add_argument("--t-min", type=int, help="first horizon of the tables")
    p.add_argument("--t-max", type=int, help="last horizon of the tables")
    p.add_argument("--algorithms", nargs="+", choices=["altgda", "simgda"])
    p.add_argument("--eta-min", type=float, help="tables: initial window (default per algorithm)")
    p.add_argument("--eta-max", type=float)
    p.add_argument("--points-n", type=int)
    p.add_argument("--tol-eps", type=float)
    return parser


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib

            doc = tomllib.loads(text)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config file must hold a table/object at top level")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    given = vars(args).copy()
    command = given.pop("command")
    defaults = {**COMMON_DEFAULTS, **{k.replace("-", "_"): v for k, v in DEFAULTS[command].items()}}
    from_file = load_config_file(given.pop("config")) if "config" in given else {}
    unknown = set(from_file) - set(defaults) - {"command"}
    if unknown:
        raise ConfigurationError(f"unknown config keys for {command!r}: {sorted(unknown)}")
    opts = {**defaults, **{k: v for k, v in from_file.items() if k != "command"}, **given}
    opts["command"] = command
    return opts


def _select_game(opts):
    if opts.get("game"):
        return load_matrix(opts["game"]), {"file": str(opts["game"])}
    if opts.get("builtin"):
        name = opts["builtin"]
        if name not in BUILTIN_GAMES:
            raise ConfigurationError(f"unknown builtin game {name!r}")
        return BUILTIN_GAMES[name](), {"builtin": name}
    seed = opts["seed"] if opts.get("game_seed") is None else opts["game_seed"]
    spec = GameSpec(int(opts["m"]), int(opts["n"]), opts["dist"], int(seed))
    return generate_game(spec), json.loads(spec.to_json())


def _maybe_profile(A):
    if max(A.shape) > MAX_ENUM_DIM:
        return None
    try:
        return solve_equilibrium_max_support(A)
    except AltGDAError as exc:
        log.warning("no reference equilibrium: %s", exc)
        return None


def cmd_run(opts) -> int:
    A, game_info = _select_game(opts)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    profile = _maybe_profile(A)
    T, eta, alg = int(opts["T"]), float(opts["eta"]), opts["algorithm"]
    if opts.get("x0") is not None or opts.get("y0") is not None:
        x0 = opts.get("x0") or np.full(A.n, 1.0 / A.n)
        y0 = opts.get("y0") or np.full(A.m, 1.0 / A.m)
        cfg = RunConfig(eta, T, MixedStrategy(np.asarray(x0, dtype=float)),
                        MixedStrategy(np.asarray(y0, dtype=float)), alg, reference=profile,
                        checkpoints=bench.log_checkpoints(T))
        tr = run(A, cfg)
        tr.write_csv(out / f"trace_{alg}.csv")
        report = bench.BenchmarkReport(tr.t, tr.table["gap_avg"][None, :], [None],
                                       {"algorithm": alg, "eta": eta, "T": T}, [tr])
    else:
        report = bench.run_benchmark(A, alg, eta, T, int(opts["repeats"]), int(opts["seed"]),
                                     opts["init"], opts["jobs"], profile=profile)
        for r, tr in enumerate(report.traces):
            tr.write_csv(out / f"trace_{alg}_repeat{r:02d}.csv")
    report.write(out, f"gap_{alg}")
    bench.write_manifest(out, opts, {"game": game_info, "report": report.metadata})
    print(f"{alg}: averaged gap at T={T}: mean {report.mean[-1]:.6e}, std {report.std[-1]:.3e}")
    return EXIT_OK


def cmd_audit(opts) -> int:
    from .invariants import audit_trace

    A, game_info = _select_game(opts)
    profile = _maybe_profile(A)
    x0 = opts.get("x0") or np.full(A.n, 1.0 / A.n)
    y0 = opts.get("y0") or np.full(A.m, 1.0 / A.m)
    if profile is not None and opts.get("x0") is None and profile.is_interior:
        x0, y0 = np.eye(A.n)[0], np.eye(A.m)[min(1, A.m - 1)]
    cfg = RunConfig(float(opts["eta"]), int(opts["T"]), MixedStrategy(np.asarray(x0, dtype=float)),
                    MixedStrategy(np.asarray(y0, dtype=float)), "altgda", reference=profile,
                    store_iterates=True)
    trace = run(A, cfg)
    results = audit_trace(A, trace, profile, seed=int(opts["seed"]), probes=int(opts["probes"]),
                          probe_steps=int(opts["probe_steps"]))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "audit.csv", "w") as fh:
        fh.write("invariant,asserted,passed,worst_slack,n_checked,note\n")
        for r in results:
            fh.write(f"{r.name},{int(r.asserted)},{int(r.passed)},{r.worst_slack:.17g},"
                     f"{r.n_checked},\"{r.note}\"\n")
            print(r.line())
    failed = [r.name for r in results if r.asserted and not r.passed]
    bench.write_manifest(out, opts, {"game": game_info, "failed": failed})
    print(f"{len(failed)} failure(s)")
    return EXIT_AUDIT if failed else EXIT_OK


def _solver(opts):
    from .pep.solver import resolve_solver

    return resolve_solver(opts.get("solver"))


def cmd_pep(opts) -> int:
    from .pep import PepSpec
    from .pep.reconstruct import reconstruct_worst_case
    from .pep.sdp import assemble_pep_sdp
    from .pep.sdpa import export_sdpa
    from .pep.solver import solve_pep

    spec = PepSpec(opts["algorithm"], int(opts["T"]), float(opts["eta"]))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    if opts.get("export_sdpa"):
        export_sdpa(assemble_pep_sdp(spec), opts["export_sdpa"])
    solver = _solver(opts)
    sol = solve_pep(spec, solver)
    print(f"{spec.algorithm} T={spec.T} eta={spec.eta}: worst-case averaged gap {sol.objective_value:.6f}"
          f" ({sol.summary()})")
    with open(out / "pep.csv", "w") as fh:
        fh.write("T,algorithm,eta,value,max_eq_residual,max_ineq_violation,min_eigenvalue\n")
        fh.write(f"{spec.T},{spec.algorithm},{spec.eta:.17g},{sol.objective_value:.17g},"
                 f"{sol.max_eq_residual:.3e},{sol.max_ineq_violation:.3e},{sol.min_eigenvalue:.3e}\n")
    np.savez(out / "pep_grams.npz", gram_x=sol.gram_x, gram_y=sol.gram_y)
    extra = {"solver": solver.describe(), "value": sol.objective_value}
    if opts.get("reconstruct"):
        wc = reconstruct_worst_case(spec, sol.gram_x, sol.gram_y, sol.objective_value)
        save_matrix(wc.A, out / "worst_case_A.txt")
        extra["reconstruction"] = {"replay_objective": wc.replay_objective,
                                   "max_iterate_error": wc.max_iterate_error}
        print(f"reconstructed game replays to {wc.replay_objective:.6f} "
              f"(iterate error {wc.max_iterate_error:.2e})")
    bench.write_manifest(out, opts, extra)
    return EXIT_OK


def _tune(opts, algorithm, horizons, out, prefix):
    from concurrent.futures import ProcessPoolExecutor

    from .pep.solver import make_evaluator
    from .search import SearchConfig, optimize_stepsize, write_search_csv

    cfg = SearchConfig(float(opts["eta_min"]), float(opts["eta_max"]), int(opts["points_n"]),
                       float(opts["shrink_alpha"]), float(opts["tol_eps"]), int(opts["max_rounds"]))
    solver = _solver(opts)
    jobs = bench.resolve_jobs(opts["jobs"])
    traces = []
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for T in horizons:
            ev = make_evaluator(int(T), algorithm, solver)
            tr = optimize_stepsize(int(T), algorithm, cfg, ev, pool.map if pool else map)
            print(f"{algorithm} T={T}: eta* {tr.final_eta:.4f}, value {tr.final_value:.6f}, "
                  f"{tr.solver_calls} solves in {len(tr.rounds)} rounds", flush=True)
            traces.append(tr)
            write_search_csv(traces, out / f"{prefix}.csv")
    finally:
        if pool:
            pool.shutdown()
    return traces, cfg


def cmd_tune(opts) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    horizons = opts["T"] if isinstance(opts["T"], list) else [opts["T"]]
    traces, cfg = _tune(opts, opts["algorithm"], horizons, out, f"search_{opts['algorithm']}")
    bench.write_manifest(out, opts, {"results": [tr.csv_row() for tr in traces]})
    return EXIT_OK


def cmd_gen_game(opts) -> int:
    seed = opts["seed"] if opts.get("game_seed") is None else opts["game_seed"]
    spec = GameSpec(int(opts["m"]), int(opts["n"]), opts["dist"], int(seed))
    A = generate_game(spec)
    out = Path(opts["out"])
    path = Path(opts["path"]) if opts.get("path") else out / f"game_{spec.distribution}_{spec.m}x{spec.n}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_matrix(A, path)
    bench.write_manifest(out if not opts.get("path") else path.parent, opts,
                         {"game": json.loads(spec.to_json()), "path": str(path)})
    print(path)
    return EXIT_OK


def cmd_reproduce(opts) -> int:
    fig = opts["figure"]
    out = Path(opts["out"]) / fig
    eta = opts.get("eta")
    extra = {}
    if fig in ("fig2", "fig3"):
        fn = bench.reproduce_fig2 if fig == "fig2" else bench.reproduce_fig3
        tr, paths = fn(out, T=int(opts["T"] or 10_000), eta=float(eta or 0.01))
        extra = {"files": [str(p) for p in paths], "final_gap": tr.final_gap}
        print(f"{fig}: final averaged gap {tr.final_gap:.6e}")
    elif fig == "fig4":
        reps = bench.reproduce_fig4(out, int(opts["m"]), int(opts["n"]), int(opts["T"] or 1_000_000),
                                    float(eta or 0.01), int(opts["repeats"]), int(opts["seed"]),
                                    opts["jobs"], opts.get("dists"))
        extra = {"final_mean_gap": {f"{d}/{a}": float(r.mean[-1]) for (d, a), r in reps.items()}}
        for k, v in extra["final_mean_gap"].items():
            print(f"{k}: {v:.6e}")
    else:
        horizons = list(range(int(opts["t_min"]), int(opts["t_max"]) + 1))
        rows = {}
        for alg in opts["algorithms"]:
            lo, hi = TABLE_RANGES[alg]
            sub = {**opts, "eta_min": opts["eta_min"] or lo, "eta_max": opts["eta_max"] or hi}
            traces, _ = _tune(sub, alg, horizons, out, f"table_{alg}")
            rows[alg] = [tr.csv_row() for tr in traces]
        extra = {"tables": rows}
    bench.write_manifest(out, opts, extra)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "audit": cmd_audit, "pep": cmd_pep, "tune": cmd_tune,
            "gen-game": cmd_gen_game, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args)
        logging.basicConfig(level=logging.INFO if opts["verbose"] else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[opts["command"]](opts)
    except (SolverError, CertificateRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        output = getattr(exc, "output", None)
        if output:
            print(output[-2000:], file=sys.stderr)
        return EXIT_SOLVER
    except ReconstructionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigurationError, AltGDAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
