"""Mathematical-program container used by the builder and the solver.

The OPF/SCOPF programs have a linear objective, constraints that are linear
except for the converter power-balance products, and simple variable
bounds.  Every constraint row is therefore stored as

    sum_j a_j x_j + sum_k c_k x_{u_k} x_{v_k} + const  (= or <=) 0

which gives exact sparse first and second derivatives.  Rows are built
symbolically against variable names and frozen into index form by
:meth:`ProblemBuilder.build`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

INF = float("inf")


@dataclass(frozen=True)
class Row:
    """One constraint row over named variables."""

    name: str
    lin: tuple[tuple[str, float], ...]
    const: float = 0.0
    quad: tuple[tuple[str, str, float], ...] = ()

    def evaluate(self, state: dict[str, float]) -> float:
        val = self.const
        val += sum(c * state[v] for v, c in self.lin)
        val += sum(c * state[a] * state[b] for a, b, c in self.quad)
        return val


def lin_row(name: str, lin: dict[str, float], const: float = 0.0) -> Row:
    return Row(name, tuple(lin.items()), const)


def quad_row(name: str, lin: dict[str, float], quad: list[tuple[str, str, float]], const: float = 0.0) -> Row:
    return Row(name, tuple(lin.items()), const, tuple(quad))


class ProblemBuilder:
    """Accumulates variables, rows and objective terms; freezes to NlpProblem."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._cost: list[float] = []
        self._start: list[float] = []
        self._eq: list[Row] = []
        self._ineq: list[Row] = []
        self.meta: dict = {}

    def add_var(
        self,
        name: str,
        lb: float = -INF,
        ub: float = INF,
        cost: float = 0.0,
        start: float = 0.0,
    ) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._lb.append(lb)
        self._ub.append(ub)
        self._cost.append(cost)
        self._start.append(start)
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def set_bounds(self, name: str, lb: float, ub: float) -> None:
        k = self._index[name]
        self._lb[k], self._ub[k] = lb, ub

    def fix(self, name: str, value: float) -> None:
        self.set_bounds(name, value, value)
        k = self._index[name]
        self._start[k] = value

    def set_start(self, name: str, value: float) -> None:
        self._start[self._index[name]] = value

    def get_start(self, name: str) -> float:
        return self._start[self._index[name]]

    def add_cost(self, name: str, coeff: float) -> None:
        self._cost[self._index[name]] += coeff

    def add_eq(self, row: Row) -> None:
        self._check(row)
        self._eq.append(row)

    def add_ineq(self, row: Row) -> None:
        if row.quad:
            raise ValueError(f"inequality rows must be linear: {row.name}")
        self._check(row)
        self._ineq.append(row)

    def add_rows(self, rows) -> None:
        for row, kind in rows:
            (self.add_eq if kind == "eq" else self.add_ineq)(row)

    def _check(self, row: Row) -> None:
        for v, _ in row.lin:
            if v not in self._index:
                raise KeyError(f"row {row.name!r} references unknown variable {v!r}")
        for a, b, _ in row.quad:
            for v in (a, b):
                if v not in self._index:
                    raise KeyError(f"row {row.name!r} references unknown variable {v!r}")

    def build(self) -> "NlpProblem":
        n = len(self._names)

        def pack(rows: list[Row]):
            ri, ci, vs = [], [], []
            quads = []
            consts = np.zeros(len(rows))
            for r, row in enumerate(rows):
                consts[r] = row.const
                acc: dict[int, float] = {}
                for vname, c in row.lin:
                    j = self._index[vname]
                    acc[j] = acc.get(j, 0.0) + c
                for j, c in acc.items():
                    ri.append(r)
                    ci.append(j)
                    vs.append(c)
                for a, b, c in row.quad:
                    quads.append((r, self._index[a], self._index[b], c))
            mat = sp.csr_matrix((vs, (ri, ci)), shape=(len(rows), n))
            q = np.array(quads, dtype=float).reshape(-1, 4)
            return mat, consts, q

        a_eq, b_eq, q_eq = pack(self._eq)
        a_in, b_in, q_in = pack(self._ineq)
        assert q_in.shape[0] == 0
        return NlpProblem(
            name=self.name,
            var_names=tuple(self._names),
            lb=np.array(self._lb),
            ub=np.array(self._ub),
            cost=np.array(self._cost),
            start=np.array(self._start),
            eq_names=tuple(r.name for r in self._eq),
            ineq_names=tuple(r.name for r in self._ineq),
            a_eq=a_eq,
            b_eq=b_eq,
            quad_eq=q_eq,
            a_ineq=a_in,
            b_ineq=b_in,
            meta=dict(self.meta),
        )


@dataclass(frozen=True)
class NlpProblem:
    """Frozen program: min cost.x s.t. A_eq x + q(x) + b_eq = 0, A_in x + b_in <= 0, lb <= x <= ub."""

    name: str
    var_names: tuple[str, ...]
    lb: np.ndarray
    ub: np.ndarray
    cost: np.ndarray
    start: np.ndarray
    eq_names: tuple[str, ...]
    ineq_names: tuple[str, ...]
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    quad_eq: np.ndarray  # rows (row, ja, jb, coeff)
    a_ineq: sp.csr_matrix
    b_ineq: np.ndarray
    meta: dict = field(default_factory=dict)
    _index: dict[str, int] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: k for k, n in enumerate(self.var_names)})

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_eq(self) -> int:
        return len(self.eq_names)

    @property
    def n_ineq(self) -> int:
        return len(self.ineq_names)

    def var_index(self, name: str) -> int:
        return self._index[name]

    def value(self, x: np.ndarray, name: str) -> float:
        return float(x[self._index[name]])

    # -- evaluation ---------------------------------------------------------

    def eval_objective(self, x: np.ndarray) -> float:
        self._check_dim(x)
        return float(self.cost @ x)

    def objective_gradient(self, x: np.ndarray | None = None) -> np.ndarray:
        return self.cost.copy()

    def eval_eq(self, x: np.ndarray) -> np.ndarray:
        self._check_dim(x)
        r = self.a_eq @ x + self.b_eq
        for row, ja, jb, c in self.quad_eq:
            r[int(row)] += c * x[int(ja)] * x[int(jb)]
        return r

    def eval_ineq(self, x: np.ndarray) -> np.ndarray:
        self._check_dim(x)
        return self.a_ineq @ x + self.b_ineq

    def eval_constraints(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.eval_eq(x), self.eval_ineq(x)

    def eq_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        self._check_dim(x)
        if self.quad_eq.shape[0] == 0:
            return self.a_eq
        rows, cols, vals = [], [], []
        for row, ja, jb, c in self.quad_eq:
            rows.append(int(row))
            cols.append(int(ja))
            vals.append(c * x[int(jb)])
            rows.append(int(row))
            cols.append(int(jb))
            vals.append(c * x[int(ja)])
        extra = sp.csr_matrix((vals, (rows, cols)), shape=self.a_eq.shape)
        return (self.a_eq + extra).tocsr()

    def ineq_jacobian(self, x: np.ndarray | None = None) -> sp.csr_matrix:
        return self.a_ineq

    def jacobian_pattern(self) -> sp.csr_matrix:
        """Structural pattern of the stacked (eq; ineq) Jacobian."""
        j = self.eq_jacobian(np.ones(self.n_vars))
        pat = sp.vstack([j, self.a_ineq]).tocsr()
        pat.data = np.ones_like(pat.data)
        return pat

    def lagrangian_hessian(self, lam_eq: np.ndarray) -> sp.csr_matrix:
        """Hessian of lam_eq . c_eq(x); the objective and inequalities are linear."""
        n = self.n_vars
        if self.quad_eq.shape[0] == 0:
            return sp.csr_matrix((n, n))
        rows, cols, vals = [], [], []
        for row, ja, jb, c in self.quad_eq:
            w = c * lam_eq[int(row)]
            a, b = int(ja), int(jb)
            if a == b:
                rows.append(a)
                cols.append(a)
                vals.append(2.0 * w)
            else:
                rows.extend((a, b))
                cols.extend((b, a))
                vals.extend((w, w))
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def _check_dim(self, x: np.ndarray) -> None:
        if x.shape != (self.n_vars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n_vars},)")

    # -- fixed-variable condensing ------------------------------------------

    def fixed_mask(self, tol: float = 1e-12) -> np.ndarray:
        return (self.ub - self.lb) <= tol

    def dump(self, fh) -> None:
        """Human/machine-readable dump: variables, rows, Jacobian sparsity."""
        fh.write(f"problem {self.name}\n")
        fh.write(f"vars {self.n_vars} eq {self.n_eq} ineq {self.n_ineq}\n")
        for k, name in enumerate(self.var_names):
            fh.write(
                f"var {name} lb {self.lb[k]:.17g} ub {self.ub[k]:.17g} cost {self.cost[k]:.17g}\n"
            )
        a = self.a_eq.tocoo()
        by_row: dict[int, list[str]] = {}
        for r, c, v in zip(a.row, a.col, a.data):
            by_row.setdefault(int(r), []).append(f"{v:+.12g}*{self.var_names[c]}")
        quads: dict[int, list[str]] = {}
        for row, ja, jb, c in self.quad_eq:
            quads.setdefault(int(row), []).append(
                f"{c:+.12g}*{self.var_names[int(ja)]}*{self.var_names[int(jb)]}"
            )
        for r, name in enumerate(self.eq_names):
            terms = sorted(by_row.get(r, [])) + sorted(quads.get(r, []))
            fh.write(f"eq {name}: {' '.join(terms)} {self.b_eq[r]:+.12g} = 0\n")
        a = self.a_ineq.tocoo()
        by_row = {}
        for r, c, v in zip(a.row, a.col, a.data):
            by_row.setdefault(int(r), []).append(f"{v:+.12g}*{self.var_names[c]}")
        for r, name in enumerate(self.ineq_names):
            fh.write(f"ineq {name}: {' '.join(sorted(by_row.get(r, [])))} {self.b_ineq[r]:+.12g} <= 0\n")
        pat = self.jacobian_pattern().tocoo()
        fh.write(f"jacobian-pattern nnz {pat.nnz}\n")
