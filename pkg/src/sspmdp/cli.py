"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input or usage error,
3 numerical divergence. ``SSPMDP_OUTPUT_DIR`` sets where ``gen-grid``
writes when no explicit output path is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .domains import GridSpec, format_grid, grid_to_mdp, parse_grid
from .dp import (DivergenceError, EpsilonGreedy, PolicyCycleError, Truncated, compute_q,
                 initial_policy, policy_evaluation, policy_improvement, policy_iteration,
                 value_iteration)
from .harness import (DeterminizeReplan, OfflinePolicy, ProbabilisticPlan, ReplanPolicy,
                      evaluate_mode, stats_to_csv, stats_to_json)
from .inference import TimePrior, e_step, em_solve, m_step_greedy, scale_costs, value_from_betas
from .mdp import SspMdp
from .textformat import MdpFormatError, mdp_from_json, mdp_to_json, parse_mdp, write_mdp

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
OUTPUT_DIR_ENV = "SSPMDP_OUTPUT_DIR"
EQUIVALENCE_TOL = 1e-9
MODES = ("offline", "replan", "probplan", "determinize")


class UsageError(Exception):
    pass


def _cell(text: str) -> tuple[int, int]:
    try:
        r, c = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return r, c


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def load_mdp(path: str, p_slip: float = 0.0, step_cost: float = 1.0) -> SspMdp:
    text = Path(path).read_text()
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return mdp_from_json(text)
    if suffix == ".grid":
        return grid_to_mdp(parse_grid(text, p_slip, step_cost))
    return parse_mdp(text)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _default_tmax(mdp: SspMdp, tmax: int | None) -> int:
    return 2 * mdp.num_states if tmax is None else tmax


def _prior(args, t_max: int) -> TimePrior:
    if args.prior == "discounted":
        if args.gamma is None:
            raise UsageError("--prior discounted requires --gamma")
        return TimePrior.discounted(args.gamma, t_max)
    if args.gamma is not None:
        raise UsageError("--gamma is only valid with --prior discounted")
    return TimePrior.flat(t_max)


def _floats(a: np.ndarray) -> list:
    return [float(x) for x in np.ravel(a)] if np.ndim(a) == 1 else [_floats(r) for r in a]


def cmd_gen_grid(args) -> int:
    if args.layout:
        spec = parse_grid(Path(args.layout).read_text(), args.slip, args.cost)
    else:
        if args.size is None:
            raise UsageError("gen-grid needs --size or --layout")
        width, height = args.size
        goals = args.goal or [(height - 1, width - 1)]
        spec = GridSpec(width, height, args.start, frozenset(goals),
                        frozenset(args.obstacle or ()), args.slip, args.cost)
    mdp = grid_to_mdp(spec)
    out_dir = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    mdp_path = Path(args.out) if args.out else out_dir / "grid.mdp"
    grid_path = Path(args.grid_out) if args.grid_out else mdp_path.with_suffix(".grid")
    header = (f"# grid {spec.height}x{spec.width} slip {spec.p_slip!r} cost {spec.step_cost!r}\n"
              "# actions: 0=N 1=S 2=E 3=W; states row-major over free cells\n")
    mdp_path.write_text(header + write_mdp(mdp))
    grid_path.write_text(format_grid(spec))
    print(f"wrote {mdp_path} ({mdp.num_states} states) and {grid_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    mdp = load_mdp(args.input, args.slip, args.cost)
    print(f"OK: {mdp.num_states} states, {mdp.num_actions} actions, {len(mdp.goals)} goals")
    return EXIT_OK


def cmd_solve(args) -> int:
    mdp = load_mdp(args.input, args.slip, args.cost)
    doc = {"solver": args.solver}
    if args.solver == "pi":
        term = Truncated(args.sweeps) if args.sweeps else EpsilonGreedy(args.eps)
        report = policy_iteration(mdp, term=term)
    elif args.solver == "vi":
        values, policy = value_iteration(mdp, args.eps)
        doc.update(policy=[int(a) for a in policy], values=_floats(values))
        _emit(json.dumps(doc, indent=1) + "\n", args.output)
        return EXIT_OK
    else:
        t_max = _default_tmax(mdp, args.tmax)
        prior = _prior(args, t_max)
        report = em_solve(mdp, t_max, prior)
        doc.update(t_max=t_max, prior=prior.kind)
    doc.update(
        policy=[int(a) for a in report.policy],
        values=_floats(report.values),
        converged=report.converged,
        improvement_rounds=report.improvement_rounds,
        sweeps_total=report.sweeps_total,
        round_sweeps=[r.sweeps for r in report.history],
    )
    if report.betas is not None:
        doc["beta_trace"] = _floats(report.betas)
    _emit(json.dumps(doc, indent=1) + "\n", args.output)
    return EXIT_OK


def equivalence_rows(mdp: SspMdp, t_max: int, max_rounds: int = 100,
                     corrupt_beta: float = 0.0) -> list[dict]:
    """Round-by-round comparison of the inference quantities with truncated
    policy evaluation and improvement, following the EM policy sequence."""
    scaled = scale_costs(mdp)
    prior = TimePrior.flat(t_max)
    policy = initial_policy(mdp)
    rows = []
    for k in range(1, max_rounds + 1):
        beta, q_prob = e_step(mdp, scaled, policy, prior)
        if corrupt_beta:
            beta = beta + corrupt_beta
        v_em = value_from_betas(beta, scaled, prior)
        v_pe = policy_evaluation(mdp, policy, Truncated(t_max + 1))
        em_next = m_step_greedy(q_prob, current=policy)
        pe_next = policy_improvement(
            compute_q(mdp, policy_evaluation(mdp, policy, Truncated(t_max))), current=policy)
        rows.append({"round": k, "max_deviation": float(np.max(np.abs(v_em - v_pe))),
                     "policies_match": bool(np.array_equal(em_next, pe_next)),
                     "v_em": v_em, "v_pe": v_pe})
        if np.array_equal(em_next, policy):
            break
        policy = em_next
    return rows


def cmd_verify_equivalence(args) -> int:
    mdp = load_mdp(args.input, args.slip, args.cost)
    t_max = _default_tmax(mdp, args.tmax)
    rows = equivalence_rows(mdp, t_max, args.rounds, args.corrupt_beta)
    s0 = mdp.start if mdp.start is not None else 0
    print(f"t_max {t_max}: value_from_betas vs truncated evaluation ({t_max + 1} sweeps), "
          f"tolerance {EQUIVALENCE_TOL:g}")
    print(f"{'round':>5} {'max_dev':>12} {'policy':>7} {'V_em(s0)':>14} {'V_pe(s0)':>14}")
    ok = True
    for r in rows:
        passed = r["max_deviation"] <= EQUIVALENCE_TOL and r["policies_match"]
        ok &= passed
        print(f"{r['round']:>5} {r['max_deviation']:>12.3e} "
              f"{'same' if r['policies_match'] else 'DIFF':>7} "
              f"{r['v_em'][s0]:>14.10g} {r['v_pe'][s0]:>14.10g}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_MISMATCH


def _parse_modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in modes if m not in MODES]
    if unknown or not modes:
        raise UsageError(f"unknown mode(s) {unknown or text!r}; choose from {', '.join(MODES)}")
    return modes


def cmd_compare_modes(args) -> int:
    modes = _parse_modes(args.modes)
    mdp = load_mdp(args.input, args.slip, args.cost)
    if args.start is not None:
        s0 = args.start
    elif mdp.start is not None:
        s0 = mdp.start
    else:
        s0 = int(np.flatnonzero(~mdp.goal_mask)[0])
    if not 0 <= s0 < mdp.num_states:
        raise UsageError(f"start state {s0} out of range")
    t_max = _default_tmax(mdp, args.tmax)
    built = []
    for name in modes:
        if name == "offline":
            built.append(OfflinePolicy(policy_iteration(mdp, term=EpsilonGreedy(args.eps)).policy))
        elif name == "replan":
            built.append(ReplanPolicy(EpsilonGreedy(args.eps)))
        elif name == "probplan":
            built.append(ProbabilisticPlan(t_max))
        else:
            built.append(DeterminizeReplan())
    rows = [evaluate_mode(mdp, mode, s0, args.n, args.seed, args.max_steps) for mode in built]
    text = stats_to_json(rows, args.timing) if args.format == "json" else stats_to_csv(rows, args.timing)
    _emit(text, args.output)
    return EXIT_OK


def cmd_convert(args) -> int:
    mdp = load_mdp(args.input, args.slip, args.cost)
    suffix = Path(args.output).suffix.lower()
    Path(args.output).write_text(mdp_to_json(mdp) if suffix == ".json" else write_mdp(mdp))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspmdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_input(p):
        p.add_argument("input", help="MDP file (.mdp text, .json, or .grid layout)")
        p.add_argument("--slip", type=float, default=0.0, help="slip probability for .grid input")
        p.add_argument("--cost", type=float, default=1.0, help="step cost for .grid input")
        return p

    g = sub.add_parser("gen-grid", help="generate a slip grid world")
    g.add_argument("--size", type=_size, help="WIDTHxHEIGHT, e.g. 4x4")
    g.add_argument("--layout", help="ASCII layout file instead of --size/--goal/--obstacle")
    g.add_argument("--slip", type=float, default=0.0)
    g.add_argument("--cost", type=float, default=1.0)
    g.add_argument("--start", type=_cell, default=(0, 0), help="ROW,COL")
    g.add_argument("--goal", type=_cell, action="append", help="ROW,COL (repeatable)")
    g.add_argument("--obstacle", type=_cell, action="append", help="ROW,COL (repeatable)")
    g.add_argument("--out", help="MDP output path")
    g.add_argument("--grid-out", help="ASCII layout output path")
    g.set_defaults(func=cmd_gen_grid)

    v = with_input(sub.add_parser("validate", help="check an MDP file"))
    v.set_defaults(func=cmd_validate)

    s = with_input(sub.add_parser("solve", help="solve an MDP"))
    s.add_argument("--solver", choices=("pi", "vi", "em"), default="pi")
    s.add_argument("--eps", type=float, default=1e-10)
    s.add_argument("--sweeps", type=int, help="truncated evaluation sweeps (pi only)")
    s.add_argument("--tmax", type=int, help="message horizon for em (default 2|S|)")
    s.add_argument("--prior", choices=("flat", "discounted"), default="flat")
    s.add_argument("--gamma", type=float)
    s.add_argument("--output", help="JSON report path (default stdout)")
    s.set_defaults(func=cmd_solve)

    e = with_input(sub.add_parser("verify-equivalence",
                                  help="check inference against truncated policy iteration"))
    e.add_argument("--tmax", type=int, help="message horizon (default 2|S|)")
    e.add_argument("--rounds", type=int, default=100)
    e.add_argument("--corrupt-beta", type=float, default=0.0, help=argparse.SUPPRESS)
    e.set_defaults(func=cmd_verify_equivalence)

    c = with_input(sub.add_parser("compare-modes", help="Monte-Carlo comparison of execution modes"))
    c.add_argument("--modes", default=",".join(MODES))
    c.add_argument("--n", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-steps", type=int, default=1000)
    c.add_argument("--start", type=int)
    c.add_argument("--tmax", type=int, help="probplan horizon (default 2|S|)")
    c.add_argument("--eps", type=float, default=1e-10)
    c.add_argument("--timing", action="store_true", help="fill the wall-clock column")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--output")
    c.set_defaults(func=cmd_compare_modes)

    k = with_input(sub.add_parser("convert", help="convert between .mdp, .json and .grid"))
    k.add_argument("output", help="destination (.json or .mdp)")
    k.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve" and args.sweeps is not None and args.solver != "pi":
        print("error: --sweeps applies only to --solver pi", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (DivergenceError, PolicyCycleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, MdpFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
