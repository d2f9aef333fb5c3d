import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaussprimes.gint import UNITS, GaussianInt, canonical, divides
from gaussprimes.sieve import (
    INERT, RAMIFIED, SPLIT, CoverageError, GaussPrimeTable, build_table, divisor_count, divisors, factor,
    is_gaussian_prime, is_rational_prime, is_sq_unexceptional, load_table, mangoldt, moebius, prime_mask,
    prime_sieve, save_table, two_squares,
)

G = GaussianInt


def brute_gaussian_primes(bound):
    """Canonical Gaussian primes of norm <= bound by trial division over all smaller norms."""
    out = []
    for a in range(1, math.isqrt(bound) + 1):
        for b in range(0, math.isqrt(bound) + 1):
            z = G(a, b)
            n = z.norm()
            if n > bound or n < 2:
                continue
            composite = any(
                divides(G(x, y), z)
                for x in range(-math.isqrt(n), math.isqrt(n) + 1)
                for y in range(-math.isqrt(n), math.isqrt(n) + 1)
                if 1 < x * x + y * y < n
            )
            if not composite:
                out.append(z)
    return sorted(out, key=lambda z: (z.norm(), z.re, z.im))


def test_small_tables():
    t5 = build_table(5)
    assert t5.entries == [(1, 1, 2, RAMIFIED), (1, 2, 5, SPLIT), (2, 1, 5, SPLIT)]
    t10 = build_table(10)
    assert (3, 0, 9, INERT) in t10.entries and len(t10) == 4


def test_table_matches_trial_division():
    t = build_table(400)
    assert t.primes() == brute_gaussian_primes(400)


def test_sorted_and_counts(table):
    e = table.entries
    assert e == sorted(e, key=lambda r: (r[2], r[0], r[1]))
    s = prime_sieve(table.norm_bound)
    q1 = np.flatnonzero(s)
    split = sum(1 for r in e if r[3] == SPLIT)
    assert split == 2 * int(np.sum(q1 % 4 == 1))
    inert = [r for r in e if r[3] == INERT]
    assert all(r[2] == r[0] ** 2 and r[0] % 4 == 3 for r in inert)
    assert len(inert) == int(np.sum((q1 % 4 == 3) & (q1 * q1 <= table.norm_bound)))


def test_eight_primes_per_split_norm(table):
    for q, (p, pb) in list(table.split_primes.items())[:300]:
        classes = {u * x for u in UNITS for x in (p, pb)}
        assert len(classes) == 8 and all(z.norm() == q for z in classes)


@pytest.mark.parametrize("q,expected", [(5, G(2, 1)), (13, G(3, 2)), (17, G(4, 1))])
def test_two_squares_examples(q, expected):
    assert two_squares(q) == expected


@pytest.mark.parametrize("bad", [3, 7, 21, 25, 1])
def test_two_squares_rejects(bad):
    with pytest.raises(ValueError):
        two_squares(bad)


def test_factor_examples(table):
    f = factor(5, table)
    assert f.unit == G(0, -1) and f.factors == ((G(1, 2), 1), (G(2, 1), 1))
    f = factor(2, table)
    assert f.unit == G(0, -1) and f.factors == ((G(1, 1), 2),)
    f = factor(G(2, 1), table)
    assert f.unit == G(1) and f.factors == ((G(2, 1), 1),)


def test_factor_roundtrip(table):
    rng = random.Random(3)
    for _ in range(10_000):
        z = G(rng.randint(-150, 150), rng.randint(-150, 150))
        if not z:
            continue
        f = factor(z, table)
        assert f.expand() == z
        assert all(canonical(p) == p for p, _ in f.factors)
        assert len({p for p, _ in f.factors}) == len(f.factors)


def test_factor_coverage_error():
    t = build_table(10)
    with pytest.raises(CoverageError) as exc:
        factor(G(1000, 999), t)
    assert exc.value.missing_norm > 100


@pytest.mark.parametrize("n,mu", [(1, 1), (2, 0), (5, 1), (G(2, 1), -1), (G(3, 0), -1), (15, -1)])
def test_moebius(n, mu, table):
    assert moebius(n, table) == mu


@pytest.mark.parametrize("n,lam", [(G(2, 1), math.log(5)), (5, 0.0), (-9, math.log(9)), (G(0, 2), math.log(2)), (1, 0.0)])
def test_mangoldt(n, lam, table):
    assert mangoldt(n, table) == pytest.approx(lam, abs=1e-15)


@pytest.mark.parametrize("n,ok", [(G(2, 1), True), (G(1, 1), False), (5, True), (25, False), (3, False)])
def test_sq_unexceptional(n, ok, table):
    assert is_sq_unexceptional(n, table) is ok


@pytest.mark.parametrize("n,d", [(1, 4), (G(2, 1), 8), (2, 12)])
def test_divisor_count(n, d, table):
    assert divisor_count(n, table) == d
    assert len(divisors(n, table)) == d


def test_divisors_are_divisors(table):
    for z in (G(12, 5), G(30, 0), G(7, 7)):
        ds = divisors(z, table)
        assert len(set(ds)) == len(ds) == divisor_count(z, table)
        assert all(divides(d, z) for d in ds)


def test_gaussian_prime_classification():
    assert is_gaussian_prime(G(1, 1))
    assert is_gaussian_prime(G(0, 3)) and is_gaussian_prime(-7)
    assert not is_gaussian_prime(5) and not is_gaussian_prime(G(3, 1))
    assert not is_gaussian_prime(0) and not is_gaussian_prime(G(0, 1))


def test_table_persistence(tmp_path):
    t = build_table(500)
    path = tmp_path / "t.txt"
    save_table(t, path)
    u = load_table(path)
    assert u.norm_bound == 500 and u.entries == t.entries
    (tmp_path / "bad.txt").write_text("nonsense\n")
    with pytest.raises(ValueError):
        load_table(tmp_path / "bad.txt")


def test_table_rejects_tiny_bound():
    with pytest.raises(ValueError):
        GaussPrimeTable(1)


def test_prime_mask_matches_sieve():
    v = np.arange(0, 300_000)
    assert np.array_equal(prime_mask(v), prime_sieve(299_999))


def test_prime_mask_large_values():
    # base-2 strong pseudoprimes and Carmichael numbers must be rejected
    bad = [2047, 3277, 4033, 4681, 8321, 561, 41041, 825265, 321197185, 25326001, 3215031751 - 2]
    good = [2_147_483_647, 1_000_000_007, 2_999_999_929]
    res = prime_mask(np.array(bad + good, dtype=np.int64))
    assert res.tolist() == [is_rational_prime(n) for n in bad + good]
    assert res[-3:].all()
    rng = np.random.default_rng(5)
    sample = rng.integers(10**9, 4 * 10**9, 20_000)
    assert prime_mask(sample).tolist() == [is_rational_prime(int(n)) for n in sample]


@given(st.integers(2, 10**12))
def test_is_rational_prime_small_factor(n):
    smallest = next((d for d in range(2, min(math.isqrt(n), 10**4) + 1) if n % d == 0), None)
    if smallest is not None:
        assert not is_rational_prime(n)
