"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 verification failure,
3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .compact import defender_coords, support_set
from .gamespec import _clean, distribution_from_doc, load_game, read_document, result_to_doc
from .lpengine import SolverConfig, SolverError
from .model import ModelError, adjacency, common_utilities, is_additive, mask_of, members, network_value_benefits, parse_edge_list
from .oracles import MAX, OracleError, dop_linear, enumerate_system
from .solvers import NE, SSE, solve_ne_additive, solve_sse, solve_zero_sum
from .verify import brute_minimax, check_ne, check_sse, expand_normal_form

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(doc, out: str | None):
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> SolverConfig:
    return SolverConfig(feas_tol=args.feas_tol, opt_tol=args.opt_tol, max_iters=args.max_iters,
                        backend=args.backend, seed=args.seed)


def solve_game(game, concept: str, cfg: SolverConfig):
    """Dispatch to the solver matching the concept and utility structure."""
    concept = concept.upper()
    if concept == SSE:
        return solve_sse(game, cfg)
    if concept != NE:
        raise UsageError(f"unknown concept {concept!r}")
    if game.utilities.zero_sum:
        return solve_zero_sum(game, cfg)
    if is_additive(game.utilities):
        return solve_ne_additive(game, cfg)
    raise UsageError("Nash equilibria of non-zero-sum games with non-additive utilities are an open "
                     "problem; use --concept sse, or a zero-sum or additive game")


def cmd_solve(args) -> int:
    game = load_game(args.spec)
    res = solve_game(game, args.concept, _config(args))
    _emit(result_to_doc(res), args.output)
    return EXIT_OK


def verify_solution(game, sol: dict, eps: float) -> list[dict]:
    n = game.n
    q = distribution_from_doc(sol.get("defender_mixed"), n, "defender_mixed")
    p = distribution_from_doc(sol.get("attacker_mixed"), n, "attacker_mixed")
    concept = str(sol.get("concept", NE)).upper()
    checks = []
    rep = check_sse(p, q, game, eps) if concept == SSE else check_ne(p, q, game, eps)
    checks.append({"check": f"{rep.name}:attacker_best_response", "max_violation": rep.attacker_violation,
                   "pass": rep.attacker_violation <= eps})
    checks.append({"check": f"{rep.name}:defender", "max_violation": rep.defender_violation,
                   "pass": rep.defender_violation <= eps})
    if concept == NE and game.utilities.zero_sum and "attacker_value" in sol:
        value, _, _ = brute_minimax(expand_normal_form(game))
        gap = abs(float(sol["attacker_value"]) - value)
        checks.append({"check": "ne:value_vs_brute_minimax", "max_violation": gap, "pass": gap <= eps})
    if "attacker_marginals" in sol:
        a = np.asarray(sol["attacker_marginals"], dtype=float)
        viol = max(0.0, a.sum() - game.budget, -a.min(), a.max() - 1.0)
        checks.append({"check": "attack_marginals_feasible", "max_violation": viol, "pass": viol <= 1e-9})
    return checks


def cmd_verify(args) -> int:
    game = load_game(args.spec)
    sol = read_document(args.solution)
    if not isinstance(sol, dict):
        raise UsageError("solution must be a mapping")
    checks = verify_solution(game, sol, args.eps)
    ok = all(c["pass"] for c in checks)
    _emit(_clean({"pass": ok, "checks": checks}), args.output)
    return EXIT_OK if ok else EXIT_VERIFY


def _read_sets(path) -> list[int]:
    sets = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            sets.append(mask_of(int(x) for x in line.replace(",", " ").split()))
        except ValueError:
            raise ModelError(f"{path}: line {lineno}: expected node indices, got {raw!r}") from None
    return sets


def cmd_gen_network(args) -> int:
    if args.value != "sumsq":
        raise UsageError(f"unknown value function {args.value!r} (only 'sumsq' is built in)")
    adj = adjacency(parse_edge_list(Path(args.graph).read_text()))
    sets = _read_sets(args.sets)
    f = network_value_benefits(adj, sets)
    entries = [{"set": members(m), "b_a": f(m)} for m in sets if m]
    _emit(_clean({"sparse": entries}), args.output)
    return EXIT_OK


def _dump(g) -> list[dict]:
    return [{"set": members(m), "value": v} for m, v in sorted(g.entries.items(), key=lambda kv: (bin(kv[0]).count("1"), kv[0]))]


def cmd_transform(args) -> int:
    game = load_game(args.spec)
    common = common_utilities(game.utilities)
    S = support_set(common, game.n)
    doc = {
        "benefit_attacker": _dump(common.benefit_attacker),
        "loss_attacker": _dump(common.loss_attacker),
        "benefit_defender": _dump(common.benefit_defender),
        "loss_defender": _dump(common.loss_defender),
        "support_set": [members(m) for m in S.members],
        "additive": is_additive(game.utilities),
    }
    _emit(_clean(doc), args.output)
    return EXIT_OK


def cmd_oracle_test(args) -> int:
    game = load_game(args.spec)
    common = common_utilities(game.utilities)
    S = support_set(common, game.n)
    try:
        system = enumerate_system(game.defender)
    except OracleError as e:
        raise UsageError(f"oracle-test needs an enumerable defender system: {e}") from None
    table = np.array([defender_coords(D, S) for D in system])
    rng = np.random.default_rng(args.seed)
    gaps, errs = [], []
    for _ in range(args.trials):
        w = rng.integers(-9, 10, 2 * len(S)).astype(float) if args.integer_weights else rng.normal(size=2 * len(S))
        ans = dop_linear(game.defender, w, S, MAX)
        # suboptimality of the returned strategy, both sides evaluated identically
        mine = float(defender_coords(ans.strategy, S) @ w)
        gaps.append(float((table @ w).max()) - mine)
        errs.append(abs(ans.objective_value - mine))
    doc = {"trials": args.trials, "weights": "integer" if args.integer_weights else "normal",
           "system_size": len(system), "support_size": len(S),
           "max_gap": max(gaps) if gaps else None,
           "max_value_error": max(errs) if errs else None}
    _emit(_clean(doc), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="secgame", description="Equilibria of security games with set-valued utilities.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(sp):
        sp.add_argument("--feas-tol", type=float, default=1e-7)
        sp.add_argument("--opt-tol", type=float, default=1e-6)
        sp.add_argument("--max-iters", type=int, default=None)
        sp.add_argument("--backend", choices=("colgen", "ellipsoid"), default="colgen")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("solve", help="compute an equilibrium")
    sp.add_argument("spec")
    sp.add_argument("--concept", required=True, type=str.lower, choices=("ne", "sse"))
    sp.add_argument("-o", "--output")
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="check a solution against brute force")
    sp.add_argument("spec")
    sp.add_argument("--solution", required=True)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("gen-network", help="network-value benefits of node sets")
    sp.add_argument("graph", help="edge list, one 'u v' pair per line (0-based)")
    sp.add_argument("sets", help="candidate node sets, one per line")
    sp.add_argument("--value", default="sumsq", help="network value function (sumsq)")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_gen_network)

    sp = sub.add_parser("transform", help="print common utilities and the support set")
    sp.add_argument("spec")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("oracle-test", help="compare the defender oracle with enumeration")
    sp.add_argument("spec")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--integer-weights", action="store_true", help="draw integer weights (exact sums)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_oracle_test)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ModelError, OSError) as e:
        print(f"secgame: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, OracleError) as e:
        print(f"secgame: solver failure: {e}", file=sys.stderr)
        diag = getattr(e, "diagnostics", None)
        if diag:
            print(json.dumps(_clean(diag), indent=2), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
