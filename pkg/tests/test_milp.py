from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opsf.milp import (BINARY, CONTINUOUS, EQ, GE, LE, BackendUnavailable, LinExpr, MilpModel,
                       ModelError, SolveOptions, available_backends, solve)

BACKENDS = available_backends()


def test_first_variable_has_index_zero():
    m = MilpModel()
    assert m.add_variable(CONTINUOUS, 0, 1, "x").index == 0
    assert m.add_variable(CONTINUOUS, 0, 1, "y").index == 1


def test_binary_handle():
    v = MilpModel().add_variable(BINARY, 0, 1, "b")
    assert v.kind == BINARY and (v.lb, v.ub) == (0, 1)


def test_inverted_bounds_rejected():
    with pytest.raises(ModelError):
        MilpModel().add_variable(CONTINUOUS, 2, 1, "x")


def test_binary_bounds_outside_unit_interval_rejected():
    with pytest.raises(ModelError):
        MilpModel().add_variable(BINARY, 0, 2, "b")


def test_add_constraint_counts_and_prefix_lookup():
    m = MilpModel()
    x, y = m.binary("x"), m.binary("y")
    m.add_constraint(x + y, LE, 1, "pair:a")
    m.add_constraint(x - y, GE, 0, "loop:id=3")
    assert len(m.constraints) == 2
    assert [c.tag for c in m.constraints_with_prefix("loop:")] == ["loop:id=3"]
    assert m.count_constraints("pair") == 1


def test_foreign_handle_rejected():
    a, b = MilpModel(), MilpModel()
    x = a.binary("x")
    with pytest.raises(ModelError):
        b.add_constraint(x * 1.0, LE, 1, "bad")
    y = b.binary("y")
    with pytest.raises(ModelError):
        _ = x + y


def test_nonfinite_rhs_rejected():
    m = MilpModel()
    x = m.continuous("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_constraint(x, LE, math.inf, "bad")


def test_linexpr_merges_duplicates():
    m = MilpModel()
    x = m.continuous("x")
    e = x + x - 2 * x + 3 * x
    assert e.terms == {x.index: 3.0}
    assert LinExpr({x.index: 0.0}).normalized().terms == {}


@pytest.mark.parametrize("backend", BACKENDS)
def test_minimize_simple_lower_bound(backend):
    m = MilpModel()
    x = m.continuous("x", -10, 10)
    m.add_constraint(x, GE, 3, "lb")
    m.set_objective(x * 1.0)
    res = solve(m, backend)
    assert res.status == "optimal"
    assert res.objective_value == pytest.approx(3.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_binary(backend):
    m = MilpModel()
    x = m.binary("x")
    m.add_constraint(x, GE, 0.5, "a")
    m.add_constraint(x, LE, 0.4, "b")
    m.set_objective(x * 1.0)
    assert solve(m, backend).status == "infeasible"


@pytest.mark.parametrize("backend", BACKENDS)
def test_empty_model(backend):
    m = MilpModel()
    m.set_objective(LinExpr())
    res = solve(m, backend)
    assert res.status == "optimal" and res.objective_value == 0.0


def test_objective_constant_carried():
    m = MilpModel()
    x = m.binary("x")
    m.set_objective(2.0 - x * 1.0)
    assert solve(m).objective_value == pytest.approx(1.0)


def test_unknown_backend():
    m = MilpModel()
    m.set_objective(LinExpr())
    with pytest.raises(BackendUnavailable):
        solve(m, "nope")


def test_missing_objective():
    with pytest.raises(ModelError):
        solve(MilpModel())


def test_knapsack_matches_enumeration():
    values, weights, cap = [6, 5, 8, 9, 6, 7, 3], [2, 3, 6, 7, 5, 9, 4], 15
    m = MilpModel()
    xs = [m.binary(f"x{i}") for i in range(len(values))]
    m.add_constraint(LinExpr.sum(w * x for w, x in zip(weights, xs)), LE, cap, "cap")
    m.set_objective(LinExpr.sum(-v * x for v, x in zip(values, xs)))
    best = 0
    for mask in range(1 << len(values)):
        if sum(w for i, w in enumerate(weights) if mask >> i & 1) <= cap:
            best = max(best, sum(v for i, v in enumerate(values) if mask >> i & 1))
    for backend in BACKENDS:
        res = solve(m, backend)
        assert -res.objective_value == pytest.approx(best)
        assert res.max_violation <= 1e-6


def test_polish_removes_near_binary_slack():
    m = MilpModel()
    z = m.binary("z")
    p = m.continuous("p", -100, 100)
    m.add_constraint(p - 100 * z, LE, 0, "gate")
    m.add_constraint(z, EQ, 0, "off")
    m.set_objective(p * -1.0)
    res = solve(m, options=SolveOptions(polish=True))
    assert res.values[p.index] == pytest.approx(0.0, abs=1e-9)


def test_model_construction_is_deterministic():
    def build():
        m = MilpModel()
        xs = [m.binary(f"x{i}") for i in range(5)]
        for i in range(4):
            m.add_constraint(xs[i] - xs[i + 1], LE, 0, f"c{i}")
        m.set_objective(LinExpr.sum(xs))
        return m.matrices()

    a, b = build(), build()
    assert (a[2] != b[2]).nnz == 0
    for u, v in zip(a[3:], b[3:]):
        np.testing.assert_array_equal(u, v)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.floats(-5, 5, allow_nan=False)), max_size=12))
def test_linexpr_value_matches_dense_sum(pairs):
    m = MilpModel()
    xs = [m.continuous(f"x{i}") for i in range(5)]
    e = LinExpr.sum(c * xs[i] for i, c in pairs)
    vals = np.arange(1.0, 6.0)
    assert e.value(vals) == pytest.approx(sum(c * vals[i] for i, c in pairs), abs=1e-9)
