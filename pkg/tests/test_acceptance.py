"""End-to-end acceptance checks, one per criterion, each reporting a PASS/FAIL line."""

import math
import random
import time
from fractions import Fraction
from itertools import combinations

import numpy as np

from gaussprimes.boxnorm import (
    EdgeFunction, HypergraphSystem, box_norm, box_norm_power, dual_function, gvn_average, lower_order_correlation,
)
from gaussprimes.constellation import SearchStats, Shape, search, verify_prime
from gaussprimes.decompose import random_measure, tower
from gaussprimes.gint import GaussianInt as G
from gaussprimes.gyweight import WeightConfig, compute_W, mean_nu, truncated_mangoldt
from gaussprimes.localfactors import (
    LinearFormFamily, c_phi_prime, c_phi_prime_fourier, empirical_gy, gy_main_term, local_prediction,
    omega_bruteforce, omega_crt, rational_period, zeta_gauss_remainder,
)
from gaussprimes.sieve import SPLIT, build_table, divisors, is_gaussian_prime, mangoldt, moebius, prime_sieve

UNITS = (G(1, 0), G(0, 1), G(-1, 0), G(0, -1))


def test_c01_split_prime_counts(criterion):
    t0 = time.perf_counter()
    table = build_table(1_000_000)
    arr = table.arrays()
    split = arr["kind"] == SPLIT
    norms, counts = np.unique(arr["norm"][split], return_counts=True)
    q = np.flatnonzero(prime_sieve(1_000_000))
    q = q[q % 4 == 1]
    ok_pairs = np.array_equal(norms, q) and bool(np.all(counts == 2))
    # each canonical pair really has norm q and is not associate to its partner
    re, im = arr["re"][split], arr["im"][split]
    ok_norm = bool(np.all(re * re + im * im == arr["norm"][split])) and bool(np.all((re > 0) & (im > 0)))
    elapsed = time.perf_counter() - t0
    criterion(1, ok_pairs and ok_norm and elapsed < 30,
              f"{q.size} split primes q <= 1e6, 2 canonical (8 with units) each; {elapsed:.1f}s")


def test_c02_prime_count_ratio(criterion, big_table):
    t0 = time.perf_counter()
    N = 2000
    sieve = prime_sieve(N * N)
    q = np.flatnonzero(sieve)
    count = 8 * int(np.count_nonzero(q % 4 == 1))  # eight unexceptional primes above each split q
    ratio = count / (2 * N * N / math.log(N))
    elapsed = time.perf_counter() - t0
    criterion(2, 0.9 <= ratio <= 1.1 and elapsed < 60, f"ratio {ratio:.4f} at N={N}; {elapsed:.1f}s")


def test_c03_divisor_identities(criterion, table):
    t0 = time.perf_counter()
    bound = 20_000
    worst_log, worst_inv, count = 0.0, 0.0, 0
    for a in range(1, math.isqrt(bound) + 1):
        for b in range(0, math.isqrt(bound - a * a) + 1):
            n = G(a, b)
            divs = divisors(n, table, with_units=True)
            lam = sum(mangoldt(d, table) for d in divs) / 4
            worst_log = max(worst_log, abs(lam - math.log(n.norm())))
            inv = -sum(moebius(d, table) * math.log(d.norm()) for d in divs) / 4
            worst_inv = max(worst_inv, abs(inv - mangoldt(n, table)))
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_log <= 1e-9 and worst_inv <= 1e-9 and elapsed < 60
    criterion(3, ok, f"{count} n, max errors {worst_log:.1e} / {worst_inv:.1e}; {elapsed:.1f}s")


def test_c04_truncated_sum_on_primes(criterion, table):
    R = 20.0
    rng = random.Random(4)
    primes = [p for p in table.primes(SPLIT) if p.norm() > R * R][:1000]
    worst = max(abs(truncated_mangoldt(p * rng.choice(UNITS), R, "smooth", table) - math.log(R * R))
                for p in primes)
    criterion(4, len(primes) == 1000 and worst <= 1e-12, f"{len(primes)} primes, max error {worst:.1e}")


def test_c05_majorant_mean(criterion):
    t0 = time.perf_counter()
    devs = []
    for N in (10007, 30011, 100003):
        cfg_table = build_table(max(100, math.ceil(N ** 0.1) + 1))
        cfg = WeightConfig.build(N, cfg_table, w=5, c_exponent=0.05, phi="triangle")
        devs.append(abs(mean_nu(cfg, cfg_table, mode="exact").value - 1))
    ok = devs[0] <= 0.3 and all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
    elapsed = time.perf_counter() - t0
    criterion(5, ok, "|E(nu)-1| = " + ", ".join(f"{d:.2e}" for d in devs) + f"; {elapsed:.1f}s")


def test_c06_gy_single_form(criterion):
    t0 = time.perf_counter()
    NR = 1000.0
    table = build_table(1001)
    W, phi_W = compute_W(5, table)
    R = math.sqrt(NR)
    fam = LinearFormFamily([[1]], [G(0, 1)])
    emp = empirical_gy(fam, [(0, 400_000)], R, W, "triangle", table, samples=400_000, seed=0, side_floor=400_000)
    ratio = emp.value / gy_main_term(1, W, R, "triangle", table, phi_W)
    elapsed = time.perf_counter() - t0
    criterion(6, 0.8 <= ratio <= 1.25, f"ratio {ratio:.4f} (W={W}, N(R)={NR:g}); {elapsed:.1f}s")


def test_c07_c_phi_prime(criterion):
    closed = 64 / math.pi
    val = c_phi_prime("triangle")
    four = c_phi_prime_fourier("triangle")
    rel = abs(four - closed) / closed
    criterion(7, abs(val - closed) <= 1e-9 and rel <= 1e-3,
              f"quadrature error {abs(val - closed):.1e}, Fourier relative error {rel:.1e}")


def test_c08_dual_identity(criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 5))
        sizes = tuple(int(s) for s in rng.integers(1, 7, k))
        d = int(rng.integers(1, min(k, 3) + 1))
        system = HypergraphSystem.complete(sizes, d)
        e = system.H[int(rng.integers(len(system.H)))]
        f = EdgeFunction.on(system, e, rng.uniform(-1, 1, system.sizes_of(e)))
        lhs = float(np.mean(f.values * dual_function(f).values))
        worst = max(worst, abs(lhs - box_norm_power(f)))
    criterion(8, worst <= 1e-9, f"200 systems, max |E(f Df) - ||f||^(2^|e|)| = {worst:.1e}")


def test_c09_gvn_and_lower_order(criterion):
    rng = np.random.default_rng(9)
    gvn_slack, low_slack = math.inf, math.inf
    for _ in range(100):
        sizes = tuple(int(s) for s in rng.integers(2, 7, 3))
        d = int(rng.integers(1, 3))
        system = HypergraphSystem.complete(sizes, d)
        funcs = {e: EdgeFunction.on(system, e, rng.uniform(-1, 1, system.sizes_of(e))) for e in system.H}
        avg = gvn_average(system, funcs)
        gvn_slack = min(gvn_slack, min(box_norm(f) for f in funcs.values()) + 1e-9 - abs(avg))
    for _ in range(100):
        k = int(rng.integers(2, 4))
        shape = tuple(int(s) for s in rng.integers(2, 6, k))
        f = EdgeFunction(tuple(range(k)), shape, rng.uniform(-1, 1, shape))
        sets = {}
        for size in range(1, k):
            for sub in combinations(range(k), size):
                if rng.random() < 0.7:
                    sets[sub] = rng.random(tuple(shape[j] for j in sub)) < rng.uniform(0.2, 0.9)
        low_slack = min(low_slack, box_norm(f) - abs(lower_order_correlation(f, sets)))
    criterion(9, gvn_slack >= 0 and low_slack >= 0,
              f"min slack GVN {gvn_slack:.2e}, lower-order {low_slack:.2e} over 100 + 100 instances")


def test_c10_omega_oracle(criterion, table):
    rng = random.Random(10)
    primes = [p for p in table.primes(SPLIT) if p.norm() <= 41]
    done, tried = 0, 0
    while done < 100:
        tried += 1
        T, S = rng.choice([1, 2, 3]), rng.choice([1, 2, 3])
        forms = [[G(rng.randint(-3, 3), rng.randint(-3, 3)) for _ in range(T)] for _ in range(S)]
        try:
            fam = LinearFormFamily(forms, [G(rng.randint(-3, 3), rng.randint(-3, 3)) for _ in range(S)])
        except ValueError:
            continue
        moduli = [math.prod(rng.sample(primes, rng.choice([0, 1, 2])), start=G(1)) for _ in range(S)]
        D = math.lcm(*(rational_period(q) for q in moduli))
        if D**T > 10**6:
            continue
        W = rng.choice([1, 2])
        if omega_crt(moduli, fam, W, table) != omega_bruteforce(moduli, fam, W):
            break
        done += 1
    fam = LinearFormFamily([[1, 0], [0, 1], [1, 1]], [G(0, 1), G(1, 0), G(1, 1)])
    exact = True
    for n in (13, 17, 29):
        p, _ = table.split_of(n)
        exact &= local_prediction(n, [1, 1, 1], fam, 2, table).value == 1
        exact &= local_prediction(n, [1, p, 1], fam, 2, table).value == Fraction(1, n)
    criterion(10, done == 100 and exact, f"{done}/100 random instances agree exactly; unit and single-prime cases exact")


def test_c11_tower(criterion):
    eps, sigma = 0.1, 1e-3
    rng = np.random.default_rng(11)
    nu = random_measure((50, 50), rng)
    f = nu * (rng.random(nu.shape) < 0.5)
    st = tower(f, nu, eps, sigma)
    omega_mass = float(np.mean(np.where(st.Omega, nu + 1, 0)))
    slack = max(st.energy_slacks(), default=0.0)
    ok = st.terminated and st.K <= math.ceil(32 / eps) and st.final_box_norm <= st.threshold \
        and omega_mass <= 20 * math.sqrt(sigma) and slack <= eps / 4
    criterion(11, ok, f"K={st.K}, final norm {st.final_box_norm:.4f} <= {st.threshold:.4f}, "
                      f"Omega mass {omega_mass:.2e}, max energy slack {slack:.2e}")


def test_c12_zeta_remainder(criterion):
    t0 = time.perf_counter()
    rows = [zeta_gauss_remainder(s) for s in (1.01, 1.05, 1.1)]
    ok = all(abs(r.value) <= 5 for r in rows)
    elapsed = time.perf_counter() - t0
    criterion(12, ok, "remainders " + ", ".join(f"{r.sigma}: {r.value:.4f}" for r in rows) + f"; {elapsed:.1f}s")


def test_c13_square_constellation(criterion):
    t0 = time.perf_counter()
    stats = SearchStats()
    hits = search(Shape.parse("0,1,i,1+i"), 10_000, 100, limit=1, stats=stats)
    reverified = all(verify_prime(z) and is_gaussian_prime(z) for c in hits for z in c.points)
    ok = len(hits) >= 1 and reverified and stats.rejected_by_verifier == 0
    elapsed = time.perf_counter() - t0
    first = hits[0] if hits else None
    desc = f"a={first.a}, r={first.r}" if first else "none"
    criterion(13, ok, f"{len(hits)} constellation ({desc}) after {stats.candidates} candidates, "
                      f"{stats.rejected_by_verifier} false positives; {elapsed:.1f}s")
