import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussprimes.boxnorm import (
    BudgetExceeded, EdgeFunction, FiniteGroup, HypergraphSystem, box_norm, box_norm_power, dual_function,
    gvn_average, lift_to_hypergraph, load_edge_function, load_system, lower_order_correlation, q_quantity,
    save_edge_function, save_system,
)


def brute_power(vals):
    """Average of prod over corners, by explicit enumeration of x^0 and x^1."""
    d = vals.ndim
    total, count = 0.0, 0
    for x0 in itertools.product(*(range(n) for n in vals.shape)):
        for x1 in itertools.product(*(range(n) for n in vals.shape)):
            p = 1.0
            for omega in itertools.product((0, 1), repeat=d):
                p *= vals[tuple(x1[j] if w else x0[j] for j, w in enumerate(omega))]
            total += p
            count += 1
    return total / count


shapes = st.lists(st.integers(1, 4), min_size=1, max_size=3).map(tuple)


@settings(max_examples=40)
@given(shapes, st.integers(0, 2**32 - 1))
def test_box_norm_matches_enumeration(shape, seed):
    vals = np.random.default_rng(seed).uniform(-1, 1, shape)
    f = EdgeFunction(tuple(range(len(shape))), shape, vals)
    assert box_norm_power(f) == pytest.approx(brute_power(vals), abs=1e-12)


def test_four_cycle():
    rng = np.random.default_rng(0)
    A = (rng.random((6, 5)) < 0.4).astype(float)
    n, m = A.shape
    cycles = sum(A[x, y] * A[xp, y] * A[x, yp] * A[xp, yp]
                 for x in range(n) for xp in range(n) for y in range(m) for yp in range(m))
    assert box_norm(EdgeFunction((0, 1), A.shape, A)) ** 4 == pytest.approx(cycles / (n * n * m * m))


def test_simple_values():
    assert box_norm(EdgeFunction.constant((0, 1, 2), (3, 4, 5))) == pytest.approx(1.0)
    v = np.array([0.5, -1.0, 2.0])
    assert box_norm(EdgeFunction((3,), (3,), v)) == pytest.approx(abs(v.mean()))
    assert box_norm(EdgeFunction((), (), np.array(-0.25))) == -0.25


@settings(max_examples=40)
@given(shapes, st.integers(0, 2**32 - 1))
def test_dual_identity(shape, seed):
    vals = np.random.default_rng(seed).uniform(-1, 1, shape)
    f = EdgeFunction(tuple(range(len(shape))), shape, vals)
    Df = dual_function(f)
    assert float(np.mean(vals * Df.values)) == pytest.approx(box_norm_power(f), abs=1e-12)
    assert np.all(np.abs(Df.values) <= 1 + 1e-12)


def test_lazy_rule_agrees():
    f = EdgeFunction((0, 2), (7, 5), rule=lambda x, y: np.cos(x + 2 * y))
    g = f.materialize()
    assert box_norm(f) == pytest.approx(box_norm(g))
    assert f(np.array([1, 2]), np.array([3, 4])) == pytest.approx(g(np.array([1, 2]), np.array([3, 4])))


def test_budget():
    f = EdgeFunction.constant((0, 1), (100, 100))
    with pytest.raises(BudgetExceeded):
        box_norm(f, budget=1000)
    with pytest.raises(BudgetExceeded):
        dual_function(f, budget=1000)
    with pytest.raises(BudgetExceeded):
        EdgeFunction((0,), (10**6,), rule=lambda x: x).dense(budget=10)


def test_system_validation():
    with pytest.raises(ValueError):
        HypergraphSystem((0, 1), (2, 2), 2, ((0, 2),))
    with pytest.raises(ValueError):
        HypergraphSystem((0, 0), (2, 2), 1, ())
    s = HypergraphSystem.simplex(3, 4)
    assert s.H == ((0, 1), (0, 2), (1, 2)) and s.d == 2


def random_funcs(system, rng):
    return {e: EdgeFunction.on(system, e, rng.uniform(-1, 1, system.sizes_of(e))) for e in system.H}


def brute_gvn(system, funcs):
    total = 0.0
    for x in itertools.product(*(range(n) for n in system.sizes)):
        p = 1.0
        for e, f in funcs.items():
            p *= f.values[tuple(x[system.J.index(j)] for j in e)]
        total += p
    return total / math.prod(system.sizes)


@pytest.mark.parametrize("seed", range(5))
def test_gvn_and_q(seed):
    rng = np.random.default_rng(seed)
    system = HypergraphSystem((0, 1, 2), (3, 4, 5), 2, ((0, 1), (0, 2), (1, 2)))
    funcs = random_funcs(system, rng)
    avg = gvn_average(system, funcs)
    assert avg == pytest.approx(brute_gvn(system, funcs), abs=1e-12)
    assert abs(avg) <= min(box_norm(f) for f in funcs.values()) + 1e-12
    assert q_quantity((), system, funcs) == pytest.approx(avg, abs=1e-12)
    # one Cauchy-Schwarz step per doubled vertex
    q1 = q_quantity((0,), system, funcs)
    q2 = q_quantity((0, 1), system, funcs)
    assert abs(avg) <= q1 ** 0.5 + 1e-12
    assert q1 ** 0.5 <= q2 ** 0.25 + 1e-12
    assert q2 == pytest.approx(box_norm_power(funcs[(0, 1)]), abs=1e-12)


def test_q_with_measures():
    rng = np.random.default_rng(7)
    system = HypergraphSystem.simplex(3, 4)
    nus = {e: EdgeFunction.on(system, e, 1 + rng.random((4, 4))) for e in system.H}
    funcs = {e: EdgeFunction.on(system, e, nus[e].values * rng.uniform(-1, 1, (4, 4))) for e in system.H}
    avg = gvn_average(system, funcs)
    q = q_quantity((0, 1), system, funcs, nus)
    assert abs(avg) <= q ** 0.25 + 1e-12
    with pytest.raises(ValueError):
        q_quantity((0,), system, {e: EdgeFunction.on(system, e, 3 * np.ones((4, 4))) for e in system.H})


def test_lower_order_correlation():
    rng = np.random.default_rng(3)
    vals = rng.uniform(-1, 1, (3, 4, 2))
    f = EdgeFunction((0, 1, 2), vals.shape, vals)
    sets = {(0, 1): rng.random((3, 4)) < 0.5, (2,): np.array([True, False])}
    want = np.mean([vals[a, b, c] * sets[(0, 1)][a, b] * sets[(2,)][c]
                    for a in range(3) for b in range(4) for c in range(2)])
    assert lower_order_correlation(f, sets) == pytest.approx(want)
    with pytest.raises(ValueError):
        lower_order_correlation(f, {(0, 1, 2): np.ones((3, 4, 2))})


def test_group_lift():
    Z, Zp = FiniteGroup.cyclic(5), FiniteGroup.cyclic(7 * 5)
    homs = [np.arange(5) * 7 * m % 35 for m in (1, 2, 3)]
    A = {0, 7, 14, 3}
    lift = lift_to_hypergraph(A, homs, Z, Zp)
    cap = np.logical_and.reduce(list(lift.edge_sets.values()))
    grids = np.meshgrid(*(np.arange(5),) * 3, indexing="ij")
    a, r = lift.Phi(grids)
    want = np.ones_like(cap)
    for h in homs:
        want &= np.isin(Zp.add[a, h[r]], list(A))
    assert np.array_equal(cap, want)
    # each edge set ignores its missing vertex
    for e, s in lift.edge_sets.items():
        j = ({0, 1, 2} - set(e)).pop()
        assert np.all(s == np.take(s, [0], axis=j))
    with pytest.raises(ValueError):
        lift_to_hypergraph(A, [np.array([0, 1, 2, 3, 5])], Z, Zp)


def test_product_group():
    g = FiniteGroup.product(2, 3)
    assert g.order == 6 and g.labels[g.zero] == (0, 0)
    assert np.all(g.add[np.arange(6), g.neg()] == g.zero)


def test_persistence(tmp_path):
    rng = np.random.default_rng(0)
    f = EdgeFunction((1, 4), (3, 6), rng.random((3, 6)))
    save_edge_function(f, tmp_path / "f.bin", J=[0, 1, 4])
    g = load_edge_function(tmp_path / "f.bin")
    assert g.edge == f.edge and np.array_equal(g.values, f.values)
    (tmp_path / "bad.bin").write_bytes(b"nope\n")
    with pytest.raises(ValueError):
        load_edge_function(tmp_path / "bad.bin")
    s = HypergraphSystem.simplex(4, 3)
    save_system(s, tmp_path / "s.json")
    assert load_system(tmp_path / "s.json") == s
