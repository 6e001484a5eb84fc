"""Solver-agnostic mixed-integer linear models.

Formulations are written once against :class:`MilpModel` and handed to a
named backend for solving.  Every variable carries a name and every
constraint a tag such as ``"opc.parent:vertex=7"`` so that model sizes can be
audited exactly by prefix.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import sparse

BINARY = "binary"
CONTINUOUS = "continuous"

LE, EQ, GE = "<=", "==", ">="
_SENSES = {LE, EQ, GE, "<", "=", ">", "≤", "≥"}
_SENSE_ALIASES = {"<": LE, "=": EQ, ">": GE, "≤": LE, "≥": GE}

FEASIBILITY_TOL = 1e-6

_model_ids = itertools.count()


class ModelError(ValueError):
    """Raised on malformed variables or constraints."""


class BackendUnavailable(RuntimeError):
    pass


class NoIncumbent(RuntimeError):
    """The solver hit a limit before finding any feasible point."""


@dataclass(frozen=True, eq=False)
class Var:
    index: int
    kind: str
    lb: float
    ub: float
    name: str
    owner: int = field(repr=False)

    def __hash__(self) -> int:
        return hash((self.owner, self.index))

    def __eq__(self, other) -> bool:
        return isinstance(other, Var) and other.owner == self.owner and other.index == self.index

    # arithmetic builds LinExpr objects
    def _expr(self) -> LinExpr:
        return LinExpr({self.index: 1.0}, 0.0, self.owner)

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-self._expr()) + other

    def __mul__(self, k):
        return self._expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + constant``."""

    __slots__ = ("terms", "constant", "owner")

    def __init__(self, terms: Mapping[int, float] | None = None, constant: float = 0.0,
                 owner: int | None = None):
        self.terms: dict[int, float] = dict(terms or {})
        self.constant = float(constant)
        self.owner = owner

    @classmethod
    def sum(cls, items: Iterable) -> LinExpr:
        out = cls()
        for item in items:
            out._iadd(item, 1.0)
        return out

    def _merge_owner(self, owner: int | None) -> None:
        if owner is None:
            return
        if self.owner is None:
            self.owner = owner
        elif self.owner != owner:
            raise ModelError("expression mixes variables from different models")

    def _iadd(self, other, sign: float) -> LinExpr:
        if isinstance(other, Var):
            self._merge_owner(other.owner)
            self.terms[other.index] = self.terms.get(other.index, 0.0) + sign
        elif isinstance(other, LinExpr):
            self._merge_owner(other.owner)
            for i, c in other.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + sign * c
            self.constant += sign * other.constant
        elif isinstance(other, (int, float, np.floating, np.integer)):
            self.constant += sign * float(other)
        else:
            return NotImplemented
        return self

    def copy(self) -> LinExpr:
        return LinExpr(self.terms, self.constant, self.owner)

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return (self * -1.0)._iadd(other, 1.0)

    def __mul__(self, k):
        if not isinstance(k, (int, float, np.floating, np.integer)):
            return NotImplemented
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.constant * k, self.owner)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def normalized(self) -> LinExpr:
        """Drop zero coefficients (duplicates are merged on construction)."""
        return LinExpr({i: c for i, c in self.terms.items() if c != 0.0}, self.constant, self.owner)

    def value(self, x: Mapping[int, float] | np.ndarray) -> float:
        return self.constant + sum(c * x[i] for i, c in self.terms.items())

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x{i}" for i, c in sorted(self.terms.items()))
        return f"LinExpr({body or '0'} + {self.constant:g})"


def as_expr(obj) -> LinExpr:
    if isinstance(obj, LinExpr):
        return obj
    if isinstance(obj, Var):
        return obj._expr()
    if isinstance(obj, (int, float)):
        return LinExpr(constant=obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to LinExpr")


@dataclass
class Constraint:
    expr: LinExpr
    sense: str
    rhs: float
    tag: str


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | limit
    objective_value: float = math.nan
    values: np.ndarray | None = None
    solve_seconds: float = 0.0
    gap: float = math.nan
    backend: str = ""
    max_violation: float = math.nan
    message: str = ""

    @property
    def has_values(self) -> bool:
        return self.values is not None

    def value(self, item) -> float:
        if self.values is None:
            raise NoIncumbent(f"no solution values (status={self.status})")
        if isinstance(item, Var):
            return float(self.values[item.index])
        return as_expr(item).value(self.values)


class MilpModel:
    """A minimisation MILP with tagged rows and named columns."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.id = next(_model_ids)
        self.variables: list[Var] = []
        self.constraints: list[Constraint] = []
        self.objective: LinExpr | None = None

    # -- building ---------------------------------------------------------
    def add_variable(self, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf,
                     name: str = "") -> Var:
        if kind not in (BINARY, CONTINUOUS):
            raise ModelError(f"unknown variable kind {kind!r}")
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f"inverted bounds for {name or 'variable'}: lb={lb} > ub={ub}")
        if kind == BINARY and (lb < 0.0 or ub > 1.0):
            raise ModelError(f"binary {name} must have bounds within [0, 1]")
        var = Var(len(self.variables), kind, lb, ub, name or f"x{len(self.variables)}", self.id)
        self.variables.append(var)
        return var

    def binary(self, name: str, lb: float = 0.0, ub: float = 1.0) -> Var:
        return self.add_variable(BINARY, lb, ub, name)

    def continuous(self, name: str, lb: float = -math.inf, ub: float = math.inf) -> Var:
        return self.add_variable(CONTINUOUS, lb, ub, name)

    def add_constraint(self, expr, sense: str, rhs: float = 0.0, tag: str = "") -> int:
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        sense = _SENSE_ALIASES.get(sense, sense)
        expr = as_expr(expr)
        if expr.owner is not None and expr.owner != self.id:
            raise ModelError(f"constraint {tag!r} uses a variable from another model")
        rhs = float(rhs) - expr.constant
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {tag!r} has non-finite rhs")
        row = LinExpr(expr.terms, 0.0, self.id).normalized()
        self.constraints.append(Constraint(row, sense, rhs, tag))
        return len(self.constraints) - 1

    def set_objective(self, expr) -> None:
        expr = as_expr(expr)
        if expr.owner is not None and expr.owner != self.id:
            raise ModelError("objective uses a variable from another model")
        self.objective = expr

    # -- auditing ---------------------------------------------------------
    def constraints_with_prefix(self, prefix: str) -> list[Constraint]:
        return [c for c in self.constraints if c.tag.startswith(prefix)]

    def count_constraints(self, prefix: str = "") -> int:
        return sum(1 for c in self.constraints if c.tag.startswith(prefix))

    def count_variables(self, prefix: str = "", kind: str | None = None) -> int:
        return sum(1 for v in self.variables
                   if v.name.startswith(prefix) and (kind is None or v.kind == kind))

    @property
    def num_binaries(self) -> int:
        return self.count_variables(kind=BINARY)

    def matrices(self):
        """Return ``(c, c0, A, row_lb, row_ub, lb, ub, integrality)`` in CSR form."""
        n = len(self.variables)
        obj = self.objective or LinExpr()
        c = np.zeros(n)
        for i, coef in obj.terms.items():
            c[i] += coef
        rows, cols, data = [], [], []
        row_lb = np.empty(len(self.constraints))
        row_ub = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for i, coef in con.expr.terms.items():
                rows.append(r)
                cols.append(i)
                data.append(coef)
            row_lb[r] = con.rhs if con.sense in (EQ, GE) else -np.inf
            row_ub[r] = con.rhs if con.sense in (EQ, LE) else np.inf
        A = sparse.csr_matrix((data, (rows, cols)), shape=(len(self.constraints), n))
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integrality = np.array([1 if v.kind == BINARY else 0 for v in self.variables])
        return c, obj.constant, A, row_lb, row_ub, lb, ub, integrality

    def max_violation(self, x: np.ndarray) -> float:
        """Largest violation over rows (scaled by the row's largest coefficient) and bounds."""
        _, _, A, row_lb, row_ub, lb, ub, integ = self.matrices()
        worst = 0.0
        if A.shape[0]:
            ax = A @ x
            scale = np.maximum(abs(A).max(axis=1).toarray().ravel(), 1.0)
            viol = np.maximum(row_lb - ax, 0.0) + np.maximum(ax - row_ub, 0.0)
            worst = float(np.max(viol / scale))
        if len(x):
            worst = max(worst, float(np.max(np.maximum(lb - x, 0.0) + np.maximum(x - ub, 0.0))))
            ints = integ.astype(bool)
            if ints.any():
                worst = max(worst, float(np.max(np.abs(x[ints] - np.round(x[ints])))))
        return worst

    def __repr__(self) -> str:
        return (f"MilpModel({self.name!r}, vars={len(self.variables)}, "
                f"binaries={self.num_binaries}, rows={len(self.constraints)})")


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------

@dataclass
class SolveOptions:
    time_limit_s: float | None = None
    mip_gap: float = 0.0
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    polish: bool = True


def _solve_highs(model: MilpModel, opts: SolveOptions) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, c0, A, rlb, rub, lb, ub, integ = model.matrices()
    options = {"mip_rel_gap": opts.mip_gap, "presolve": True, "disp": False}
    if opts.time_limit_s is not None:
        options["time_limit"] = float(opts.time_limit_s)
    options.update(opts.extra)
    constraints = [LinearConstraint(A, rlb, rub)] if A.shape[0] else []
    t0 = time.perf_counter()
    res = milp(c, constraints=constraints, integrality=integ, bounds=Bounds(lb, ub),
               options=options)
    elapsed = time.perf_counter() - t0
    status = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "limit")
    x = None if res.x is None else np.asarray(res.x, dtype=float)
    obj = float(res.fun) + c0 if x is not None else math.nan
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0) if x is not None else math.nan
    return SolveResult(status, obj, x, elapsed, gap, "highs", message=str(res.message))


def _solve_glpk(model: MilpModel, opts: SolveOptions) -> SolveResult:
    try:
        from cvxopt import glpk, matrix, spmatrix
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise BackendUnavailable("glpk backend needs cvxopt") from exc

    c, c0, A, rlb, rub, lb, ub, integ = model.matrices()
    n = len(c)
    g_rows, h, a_rows, b = [], [], [], []
    A = A.tocsr()
    for r in range(A.shape[0]):
        row = A.getrow(r)
        if rlb[r] == rub[r]:
            a_rows.append(row)
            b.append(rlb[r])
            continue
        if np.isfinite(rub[r]):
            g_rows.append(row)
            h.append(rub[r])
        if np.isfinite(rlb[r]):
            g_rows.append(-row)
            h.append(-rlb[r])
    eye = sparse.identity(n, format="csr")
    for i in range(n):
        if np.isfinite(ub[i]):
            g_rows.append(eye.getrow(i))
            h.append(ub[i])
        if np.isfinite(lb[i]):
            g_rows.append(-eye.getrow(i))
            h.append(-lb[i])

    def to_cvx(rows):
        if not rows:
            return spmatrix([], [], [], (0, n))
        m = sparse.vstack(rows).tocoo()
        return spmatrix(m.data.tolist(), m.row.tolist(), m.col.tolist(), m.shape)

    options = {"msg_lev": "GLP_MSG_OFF", "mip_gap": max(opts.mip_gap, 0.0)}
    if opts.time_limit_s is not None:
        options["tm_lim"] = int(opts.time_limit_s * 1000)
    options.update(opts.extra)
    t0 = time.perf_counter()
    status, x = glpk.ilp(matrix(c), to_cvx(g_rows), matrix(h, tc="d"), to_cvx(a_rows),
                         matrix(b, tc="d"), set(np.flatnonzero(integ).tolist()), set(),
                         options=options)
    elapsed = time.perf_counter() - t0
    mapped = {"optimal": "optimal", "feasible": "limit", "undefined": "limit",
              "invalid formulation": "infeasible", "infeasible problem": "infeasible",
              "LP relaxation is primal infeasible": "infeasible",
              "LP relaxation is dual infeasible": "unbounded"}.get(status, "limit")
    xs = None if x is None else np.asarray(x, dtype=float).ravel()
    obj = float(c @ xs) + c0 if xs is not None else math.nan
    return SolveResult(mapped, obj, xs, elapsed, 0.0 if mapped == "optimal" else math.nan,
                       "glpk", message=status)


BACKENDS: dict[str, Callable[[MilpModel, SolveOptions], SolveResult]] = {
    "highs": _solve_highs,
    "glpk": _solve_glpk,
}


def polish(model: MilpModel, result: SolveResult) -> SolveResult:
    """Re-solve the continuous part with binaries fixed at their rounded values.

    MIP solvers accept binaries a little off 0 or 1, which lets big-M rows
    leak small flows through "open" elements.  Fixing the rounding and
    solving the remaining LP removes that slack.  The original result is
    returned unchanged if the LP is not solved to optimality.
    """
    from scipy.optimize import linprog

    c, c0, A, rlb, rub, lb, ub, integ = model.matrices()
    ints = integ.astype(bool)
    if result.values is None or not ints.any():
        return result
    fixed = np.round(result.values[ints])
    lb, ub = lb.copy(), ub.copy()
    lb[ints] = ub[ints] = fixed
    eq = np.isfinite(rlb) & (rlb == rub)
    hi = np.isfinite(rub) & ~eq
    lo = np.isfinite(rlb) & ~eq
    A_ub = sparse.vstack([A[hi], -A[lo]]) if (hi.any() or lo.any()) else None
    b_ub = np.concatenate([rub[hi], -rlb[lo]]) if A_ub is not None else None
    lp = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq.any() else None,
                 b_eq=rlb[eq] if eq.any() else None, bounds=np.column_stack([lb, ub]),
                 method="highs")
    if lp.status != 0:
        return result
    x = np.asarray(lp.x, dtype=float)
    x[ints] = fixed
    return SolveResult(result.status, float(lp.fun) + c0, x, result.solve_seconds, result.gap,
                       result.backend, message=result.message)


def available_backends() -> list[str]:
    out = ["highs"]
    try:
        import cvxopt.glpk  # noqa: F401
        out.append("glpk")
    except ImportError:  # pragma: no cover
        pass
    return out


def solve(model: MilpModel, backend: str = "highs", options: SolveOptions | Mapping | None = None
          ) -> SolveResult:
    """Solve ``model`` with the named backend.

    Raises :class:`NoIncumbent` when a limit is hit before any feasible point
    was found.  For optimal results the largest scaled row violation is
    stored in ``max_violation``.
    """
    if model.objective is None:
        raise ModelError("model has no objective")
    if backend not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    if options is None:
        opts = SolveOptions()
    elif isinstance(options, SolveOptions):
        opts = options
    else:
        options = dict(options)
        opts = SolveOptions(options.pop("time_limit_s", None), options.pop("mip_gap", 0.0),
                            options.pop("seed", None), polish=options.pop("polish", True),
                            extra=options)
    if not model.variables:
        # nothing to decide; solvers reject empty problems
        return SolveResult("optimal", model.objective.constant, np.zeros(0), 0.0, 0.0, backend,
                           max_violation=model.max_violation(np.zeros(0)))
    result = BACKENDS[backend](model, opts)
    if result.status == "limit" and result.values is None:
        raise NoIncumbent(f"{backend}: limit reached without incumbent ({result.message})")
    if opts.polish and result.values is not None:
        t0 = time.perf_counter()
        result = polish(model, result)
        result.solve_seconds += time.perf_counter() - t0
    if result.values is not None:
        result.max_violation = model.max_violation(result.values)
    return result
