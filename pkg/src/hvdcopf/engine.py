"""Discrete layer around the continuous solver.

Decides which bipolar stations run asymmetric (beta) and which neutral
lines stay connected (gamma) per post-contingency state, either by
exhaustive enumeration in deterministic lexicographic order or by
branch-and-bound.  The B&B relaxation omits the constraints an undecided
binary would add (a valid lower bound, since fixing a binary only ever
adds rows) and branches on the most violated omitted constraint.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import naming as nm
from .builder import BinaryCatalogue, StateBinaries, split_outage
from .grid import Grid, ungrounded_neutral_groups
from .ipm import Solution, SolverOptions, solve_multistart
from .nlp import NlpProblem


class EnumerationCapExceeded(RuntimeError):
    """Raised when the assignment space is too large to enumerate."""


@dataclass(frozen=True)
class ContingencyOverlay:
    """Pole-converter outage as a set of pinned variables per state."""

    outage: str
    station: str
    pole: str

    def bounds_for_state(self, k: int) -> dict[str, tuple[float, float]]:
        zero = (0.0, 0.0)
        return {
            nm.conv_i(self.station, self.pole, 1, k): zero,
            nm.conv_i(self.station, self.pole, 2, k): zero,
            nm.conv_p(self.station, self.pole, k): zero,
        }


def expand_contingency(grid: Grid, outage: str) -> ContingencyOverlay:
    """Validate and expand a pole-converter outage id; idempotent by construction."""
    station, pole = split_outage(grid, outage)
    return ContingencyOverlay(outage, station, pole)


@dataclass(frozen=True)
class GuardResult:
    ok: bool
    violations: tuple[str, ...] = ()


def nls_guard(grid: Grid, gamma: dict[str, int]) -> GuardResult:
    """Every neutral subnetwork with a station neutral must keep a ground path."""
    bad = ungrounded_neutral_groups(grid, gamma)
    return GuardResult(not bad, tuple(bad))


@dataclass(frozen=True)
class BinaryAssignment:
    """Complete (or, inside B&B, partial) binary decision per scenario."""

    beta: tuple[tuple[int, tuple[tuple[str, int | None], ...]], ...]
    gamma: tuple[tuple[int, tuple[tuple[str, int | None], ...]], ...]

    @staticmethod
    def from_maps(beta: dict[int, dict[str, int | None]], gamma: dict[int, dict[str, int | None]]):
        freeze = lambda m: tuple(sorted((k, tuple(sorted(v.items()))) for k, v in m.items()))
        return BinaryAssignment(freeze(beta), freeze(gamma))

    def beta_map(self) -> dict[int, dict[str, int | None]]:
        return {k: dict(v) for k, v in self.beta}

    def gamma_map(self) -> dict[int, dict[str, int | None]]:
        return {k: dict(v) for k, v in self.gamma}

    def state_binaries(self, k: int) -> StateBinaries:
        return StateBinaries(self.beta_map().get(k, {}), self.gamma_map().get(k, {}))

    def binaries(self) -> dict[int, StateBinaries]:
        out = {}
        for k in {k for k, _ in self.beta} | {k for k, _ in self.gamma}:
            out[k] = self.state_binaries(k)
        return out

    def is_complete(self) -> bool:
        return not any(v is None for _, kv in self.beta + self.gamma for _, v in kv)

    def sort_key(self):
        """Lexicographic tie-break key: asymmetric sets, then opened lines."""
        asym = tuple(
            (k, tuple(s for s, v in sorted(kv) if v == 0)) for k, kv in self.beta
        )
        opened = tuple(
            (k, tuple(s for s, v in sorted(kv) if v == 0)) for k, kv in self.gamma
        )
        return (asym, opened)

    def label(self) -> str:
        parts = []
        for k, kv in self.beta:
            asym = [s for s, v in kv if v == 0]
            und = [s for s, v in kv if v is None]
            txt = "asym={" + ",".join(sorted(asym)) + "}"
            if und:
                txt += " undecided={" + ",".join(sorted(und)) + "}"
            parts.append(f"k{k}:{txt}")
        for k, kv in self.gamma:
            opened = [s for s, v in kv if v == 0]
            und = [s for s, v in kv if v is None]
            if opened or und:
                txt = "open={" + ",".join(sorted(opened)) + "}"
                if und:
                    txt += " undecided={" + ",".join(sorted(und)) + "}"
                parts.append(f"k{k}:{txt}")
        return "; ".join(parts) if parts else "default"


def _scenario_beta_choices(catalogue: BinaryCatalogue, k: int) -> list[dict[str, int]]:
    stations = catalogue.beta_stations
    forced_zero = sorted(s for (kk, s) in catalogue.forced_beta if kk == k)
    free = [s for s in stations if s not in forced_zero]
    n_asym_exact = len(stations) - catalogue.n_b
    if catalogue.nb_mode == "exact":
        sizes = [n_asym_exact]
    else:  # at-least N_b symmetric -> at most n_asym_exact asymmetric
        sizes = list(range(n_asym_exact + 1))
    out: list[dict[str, int]] = []
    for size in sizes:
        extra = size - len(forced_zero)
        if extra < 0 or extra > len(free):
            continue
        for combo in itertools.combinations(free, extra):
            asym = set(forced_zero) | set(combo)
            out.append({s: (0 if s in asym else 1) for s in stations})
    return out


def _scenario_gamma_choices(grid: Grid, catalogue: BinaryCatalogue) -> list[dict[str, int]]:
    lines = catalogue.gamma_lines
    if not lines:
        return [{}]
    out = []
    for values in itertools.product((1, 0), repeat=len(lines)):
        gamma = dict(zip(lines, values))
        if nls_guard(grid, gamma).ok:
            out.append(gamma)
    return out


def enumerate_assignments(
    grid: Grid,
    catalogue: BinaryCatalogue,
    cap_per_scenario: int = 2**16,
    cap_total: int = 2**16,
) -> list[BinaryAssignment]:
    """All admissible complete assignments, deterministic lexicographic order.

    Ordering: per scenario, asymmetric station sets ascending lexicographic
    (station id), then line statuses with in-service before open (line id).
    """
    gamma_choices = _scenario_gamma_choices(grid, catalogue)
    per_scenario: list[list[tuple[dict[str, int], dict[str, int]]]] = []
    for sc in catalogue.scenarios:
        betas = _scenario_beta_choices(catalogue, sc.k)
        choices = [(b, g) for b in betas for g in gamma_choices]
        if len(choices) > cap_per_scenario:
            raise EnumerationCapExceeded(
                f"scenario {sc.label}: {len(choices)} assignments exceed the cap "
                f"({cap_per_scenario}); use the branch-and-bound strategy"
            )
        per_scenario.append(choices)

    total = math.prod(len(c) for c in per_scenario) if per_scenario else 0
    if total > cap_total:
        raise EnumerationCapExceeded(
            f"{total} joint assignments exceed the cap ({cap_total}); "
            "use the branch-and-bound strategy"
        )
    out = []
    for combo in itertools.product(*per_scenario):
        beta = {sc.k: c[0] for sc, c in zip(catalogue.scenarios, combo)}
        gamma = {sc.k: c[1] for sc, c in zip(catalogue.scenarios, combo)}
        out.append(BinaryAssignment.from_maps(beta, gamma))
    return out


@dataclass
class AssignmentRecord:
    assignment: BinaryAssignment
    status: str
    objective: float | None
    solution: Solution | None = None


@dataclass
class MinlpSolution:
    status: str  # 'optimal' | 'infeasible'
    objective: float | None
    assignment: BinaryAssignment | None
    solution: Solution | None
    explored: int
    table: list[AssignmentRecord] = field(default_factory=list)
    diagnostics: str = ""


_TIE_REL = 1e-9


def _better(obj, key, best_obj, best_key) -> bool:
    if best_obj is None:
        return True
    tol = _TIE_REL * max(1.0, abs(best_obj))
    if obj < best_obj - tol:
        return True
    return abs(obj - best_obj) <= tol and key < best_key


def solve_minlp(
    factory,
    grid: Grid,
    catalogue: BinaryCatalogue,
    strategy: str = "enumerate",
    solver_options: SolverOptions | None = None,
    threads: int = 1,
    seed: int = 2024,
    cap: int = 2**16,
) -> MinlpSolution:
    """Minimize over admissible binary assignments.

    `factory(assignment) -> NlpProblem` builds the continuous program with
    the assignment's binaries fixed (undecided entries relax their rows).
    """
    if strategy == "enumerate":
        return _solve_enumerate(factory, grid, catalogue, solver_options, threads, seed, cap)
    if strategy == "branch-and-bound":
        return _solve_bnb(factory, grid, catalogue, solver_options, seed)
    raise ValueError(f"unknown strategy {strategy!r}")


def _solve_one(factory, assignment, solver_options, seed) -> AssignmentRecord:
    problem = factory(assignment)
    sol = solve_multistart(problem, solver_options, seed=seed)
    obj = sol.objective if sol.status == "optimal" else None
    return AssignmentRecord(assignment, sol.status, obj, sol)


def _solve_enumerate(factory, grid, catalogue, solver_options, threads, seed, cap) -> MinlpSolution:
    assignments = enumerate_assignments(grid, catalogue, cap_per_scenario=cap, cap_total=cap)
    if not assignments:
        return MinlpSolution(
            "infeasible", None, None, None, 0,
            diagnostics="no admissible binary assignment (check N_b against the outage: "
            "the faulted station cannot operate symmetrically)",
        )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda a: _solve_one(factory, a, solver_options, seed), assignments))
    else:
        records = [_solve_one(factory, a, solver_options, seed) for a in assignments]

    best: AssignmentRecord | None = None
    for rec in records:
        if rec.status != "optimal":
            continue
        if best is None or _better(
            rec.objective, rec.assignment.sort_key(), best.objective, best.assignment.sort_key()
        ):
            best = rec
    if best is None:
        return MinlpSolution(
            "infeasible", None, None, None, len(records), records,
            diagnostics="every admissible assignment is infeasible for the continuous program",
        )
    return MinlpSolution("optimal", best.objective, best.assignment, best.solution, len(records), records)


# -- branch and bound ---------------------------------------------------------


def _propagate(beta: dict[str, int | None], n_b: int, mode: str) -> dict[str, int | None] | None:
    """Apply the counting rule; None result marks an inadmissible partial node."""
    ones = sum(1 for v in beta.values() if v == 1)
    undecided = [s for s, v in beta.items() if v is None]
    if mode == "exact":
        if ones > n_b or ones + len(undecided) < n_b:
            return None
        if ones == n_b:
            return {s: (0 if v is None else v) for s, v in beta.items()}
        if ones + len(undecided) == n_b:
            return {s: (1 if v is None else v) for s, v in beta.items()}
    else:
        if ones + len(undecided) < n_b:
            return None
        if ones < n_b and ones + len(undecided) == n_b:
            return {s: (1 if v is None else v) for s, v in beta.items()}
    return dict(beta)


def _branch_scores(problem: NlpProblem, sol: Solution, grid: Grid, assignment: BinaryAssignment):
    """Violation of each undecided binary's omitted constraint at the relaxation."""
    values = sol.values(problem)
    beta_scores: dict[tuple[int, str], float] = {}
    for k, kv in assignment.beta:
        for st, v in kv:
            if v is not None:
                continue
            cs = grid.station(st)
            cva, cvb = cs.pole_converters
            imb = values[nm.conv_i(st, cva.id, 2, k)] + values[nm.conv_i(st, cvb.id, 2, k)]
            beta_scores[(k, st)] = abs(imb)
    gamma_scores: dict[tuple[int, str], float] = {}
    for k, kv in assignment.gamma:
        for bd, v in kv:
            if v is not None:
                continue
            line = grid.line(bd)
            du = values[nm.port_u(bd, "i", k)] - values[nm.port_u(bd, "j", k)]
            res = du + line.resistance_pu * values[nm.port_i(bd, "j", k)]
            gamma_scores[(k, bd)] = abs(res)
    return beta_scores, gamma_scores


def _solve_bnb(factory, grid, catalogue, solver_options, seed) -> MinlpSolution:
    root_beta: dict[int, dict[str, int | None]] = {}
    root_gamma: dict[int, dict[str, int | None]] = {}
    for sc in catalogue.scenarios:
        beta = {s: None for s in catalogue.beta_stations}
        for (kk, s), v in catalogue.forced_beta.items():
            if kk == sc.k:
                beta[s] = v
        beta = _propagate(beta, catalogue.n_b, catalogue.nb_mode)
        if beta is None:
            return MinlpSolution(
                "infeasible", None, None, None, 0,
                diagnostics="no admissible binary assignment (check N_b against the outage: "
                "the faulted station cannot operate symmetrically)",
            )
        root_beta[sc.k] = beta
        root_gamma[sc.k] = {bd: None for bd in catalogue.gamma_lines}
    root = BinaryAssignment.from_maps(root_beta, root_gamma)

    explored = 0
    table: list[AssignmentRecord] = []
    best: AssignmentRecord | None = None
    stack = [root]
    while stack:
        node = stack.pop()
        problem = factory(node)
        sol = solve_multistart(problem, solver_options, seed=seed)
        explored += 1
        if sol.status != "optimal":
            table.append(AssignmentRecord(node, sol.status, None))
            continue
        bound = sol.objective
        if node.is_complete():
            rec = AssignmentRecord(node, "optimal", bound, sol)
            table.append(rec)
            if best is None or _better(bound, node.sort_key(), best.objective, best.assignment.sort_key()):
                best = rec
            continue
        if best is not None and bound >= best.objective - 1e-7 * max(1.0, abs(best.objective)):
            table.append(AssignmentRecord(node, "pruned-by-bound", bound))
            continue
        table.append(AssignmentRecord(node, "relaxation", bound))

        beta_scores, gamma_scores = _branch_scores(problem, sol, grid, node)
        children: list[BinaryAssignment] = []
        if beta_scores:
            (k, st), _ = max(beta_scores.items(), key=lambda kv: (kv[1], kv[0]))
            for value in (1, 0):  # pushed in reverse: asymmetric child is explored first
                beta = node.beta_map()
                beta[k] = dict(beta[k])
                beta[k][st] = value
                beta[k] = _propagate(beta[k], catalogue.n_b, catalogue.nb_mode)
                if beta[k] is None:
                    continue
                children.append(BinaryAssignment.from_maps(beta, node.gamma_map()))
        else:
            (k, bd), _ = max(gamma_scores.items(), key=lambda kv: (kv[1], kv[0]))
            for value in (0, 1):  # in-service child explored first
                gamma = node.gamma_map()
                gamma[k] = dict(gamma[k])
                gamma[k][bd] = value
                statuses = {b: (1 if v is None else v) for b, v in gamma[k].items()}
                if value == 0 and not nls_guard(grid, statuses).ok:
                    continue
                children.append(BinaryAssignment.from_maps(node.beta_map(), gamma))
        stack.extend(children)

    if best is None:
        return MinlpSolution(
            "infeasible", None, None, None, explored, table,
            diagnostics="branch-and-bound found no feasible complete assignment",
        )
    return MinlpSolution("optimal", best.objective, best.assignment, best.solution, explored, table)
