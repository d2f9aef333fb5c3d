import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussprimes.boxnorm import EdgeFunction, box_norm
from gaussprimes.decompose import (
    Partition, cond_exp, energy, find_small_atoms, random_measure, sigma_from_function, tower, udp_test,
)


def random_partition(rng, shape, k):
    return Partition.from_labels(rng.integers(0, k, shape))


def test_cond_exp_extremes():
    rng = np.random.default_rng(0)
    f = rng.random((4, 5))
    assert np.allclose(cond_exp(f, Partition.trivial(f.shape)), f.mean())
    assert np.allclose(cond_exp(f, Partition.discrete(f.shape)), f)
    with pytest.raises(ValueError):
        cond_exp(f, Partition.trivial((5, 4)))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
def test_cond_exp_tower_and_pythagoras(seed, k1, k2):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(6, 7))
    B1 = random_partition(rng, f.shape, k1)
    B = B1.join(random_partition(rng, f.shape, k2))
    assert B.refines(B1)
    e, e1 = cond_exp(f, B), cond_exp(f, B1)
    assert np.allclose(cond_exp(e, B1), e1)
    assert np.mean(f**2) == pytest.approx(np.mean(e**2) + np.mean((f - e) ** 2))
    assert energy(f, B) >= energy(f, B1) - 1e-12
    # level sets of E(f|B) are B-measurable
    assert B.is_measurable(e > np.median(e))
    for a in range(B.atom_count):
        assert np.ptp(e[B.atom_of == a]) < 1e-12


def test_partition_basics():
    P = Partition.from_labels(np.array([[5, 5], [9, 2]]))
    assert P.atom_count == 3 and sorted(P.sizes()) == [1, 1, 2]
    assert P.is_measurable(np.array([[True, True], [False, False]]))
    assert not P.is_measurable(np.array([[True, False], [False, False]]))
    assert Partition.discrete((2, 2)).refines(P) and not P.refines(Partition.discrete((2, 2)))


def test_sigma_constant_function():
    ds = sigma_from_function(np.full((5, 5), 0.37), 0.1, 0.05)
    assert ds.partition.atom_count == 1
    assert ds.grid == math.ceil(1 / 0.05**2)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.5), st.floats(0.01, 0.3))
def test_sigma_properties(seed, eps, sig):
    rng = np.random.default_rng(seed)
    g = rng.uniform(-1, 1, (8, 9))
    nu = random_measure((8, 9), rng, scale=3.0)
    ds = sigma_from_function(g, eps, sig, nu)
    P = ds.partition
    assert P.atom_count <= 2 / eps + 2
    for a in range(P.atom_count):
        assert np.ptp(g[P.atom_of == a]) <= eps + 1e-12
    assert ds.boundary_mass <= ds.bound + 1e-9
    # the reported boundary mass is the mass of points near a cut point
    u = np.mod(g / eps - ds.alpha, 1.0)
    near = (u <= sig + 1e-9) | (u >= 1 - sig - 1e-9)
    assert ds.boundary_mass == pytest.approx(float(np.mean(np.where(near, nu + 1, 0))), abs=1e-9)


def test_sigma_validation():
    with pytest.raises(ValueError):
        sigma_from_function(np.zeros(3), 1.5, 0.1)
    with pytest.raises(ValueError):
        sigma_from_function(np.zeros(3), 0.1, 0.6)


def test_small_atoms():
    B = Partition.from_labels(np.array([0, 0, 0, 1, 2, 2, 2, 2]))
    nu = np.ones(8)
    sa = find_small_atoms(B, nu, sigma=(2 / 8) ** 2)
    assert list(sa.small) == [False, True, False]
    assert sa.omega_mass == pytest.approx(0.25)
    assert np.isnan(sa.deviation[1]) and sa.deviation[0] == 0
    none = find_small_atoms(B, nu, sigma=1e-6)
    assert not none.omega.any()


def test_energy_with_omega():
    B = Partition.from_labels(np.array([0, 0, 1, 1]))
    f = np.array([1.0, 3.0, 2.0, 2.0])
    assert energy(f, B, np.array([True, True, False, False])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        energy(f, B, np.array([True, False, False, False]))


def test_tower_trivial():
    st_ = tower(np.ones((10, 10)), np.ones((10, 10)), 0.1, 1e-3)
    assert st_.K == 0 and st_.terminated and st_.final_box_norm == pytest.approx(0.0, abs=1e-12)


def test_tower_refines_structured_function():
    x = np.arange(20)
    f = 0.5 + 0.5 * np.cos(2 * np.pi * np.add.outer(x, 2 * x) / 20)
    nu = np.ones_like(f)
    st_ = tower(f, nu, 1e-6, 1e-3, K_max=6)
    assert st_.K >= 1
    assert st_.box_norms[-1] < st_.box_norms[0]
    assert all(b.refines(a) for a, b in [(Partition.trivial(f.shape), st_.B)])
    assert st_.terminated == (st_.final_box_norm <= st_.threshold)
    assert st_.atom_counts == sorted(st_.atom_counts)
    d = st_.to_dict()
    assert d["K"] == st_.K and len(d["energies"]) == st_.K + 1


def test_tower_on_random_measure():
    rng = np.random.default_rng(5)
    nu = random_measure((30, 30), rng)
    f = nu * (rng.random(nu.shape) < 0.5)
    st_ = tower(f, nu, 0.1, 1e-3)
    assert st_.terminated
    F = np.where(st_.Omega, 0, f - cond_exp(f, st_.B))
    assert box_norm(EdgeFunction((0, 1), F.shape, F)) == pytest.approx(st_.final_box_norm)
    assert st_.B.is_measurable(st_.Omega)


def test_tower_domination():
    with pytest.raises(ValueError):
        tower(2 * np.ones((3, 3)), np.ones((3, 3)), 0.1, 0.01)
    with pytest.raises(ValueError):
        tower(np.ones((3, 3)), np.ones((3, 4)), 0.1, 0.01)


def test_random_measure_mean():
    rng = np.random.default_rng(0)
    nu = random_measure((400, 400), rng)
    assert nu.mean() == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        random_measure((2, 2), rng)


def test_udp():
    one = np.ones((6, 6))
    assert udp_test(one, [np.ones((6, 6)), -one]).value == 0
    rng = np.random.default_rng(1)
    vals = []
    for n in (8, 24, 72):
        gens = [np.where(rng.random((n, n)) < 0.5, 1.0, -1.0) for _ in range(2)]
        vals.append(np.mean([udp_test(random_measure((n, n), rng, scale=math.log(n)), gens).value for _ in range(4)]))
    assert vals[2] < vals[0]
    with pytest.raises(ValueError):
        udp_test(one, [3 * one])
