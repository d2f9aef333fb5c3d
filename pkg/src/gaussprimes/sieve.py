"""Gaussian prime tables, factorization and the arithmetic functions of Z[i].

A :class:`GaussPrimeTable` stores one canonical (first-quadrant) representative
per associate class of Gaussian primes up to a norm bound, classified as

* ``ramified``: the single class ``1+i`` of norm 2,
* ``split``: the two classes ``a+bi``, ``b+ai`` above a rational prime ``q = 1 mod 4``
  (these are the unexceptional primes),
* ``inert``: a rational prime ``q = 3 mod 4``, of norm ``q**2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .gint import ONE, UNITS, GaussianInt, GaussLike, as_gint, canonical, format_gint

RAMIFIED, SPLIT, INERT = "ramified", "split", "inert"
KINDS = (RAMIFIED, SPLIT, INERT)


class CoverageError(LookupError):
    """A prime table is too small for the requested computation."""

    def __init__(self, missing_norm: int, message: str | None = None):
        self.missing_norm = missing_norm
        super().__init__(message or f"prime table does not cover norm {missing_norm}")


def prime_sieve(limit: int) -> np.ndarray:
    """Boolean array ``s`` of length ``limit + 1`` with ``s[n]`` true iff n is prime."""
    limit = int(limit)
    s = np.ones(max(limit + 1, 2), dtype=bool)
    s[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if s[p]:
            s[p * p :: p] = False
    return s[: limit + 1]


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_rational_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def sqrt_minus_one(q: int) -> int:
    """A square root of -1 modulo the prime ``q = 1 mod 4``."""
    for b in itertools.count(2):
        r = pow(b, (q - 1) // 4, q)
        if r * r % q == q - 1:
            return r
    raise AssertionError("unreachable")


def two_squares(q: int) -> GaussianInt:
    """The canonical Gaussian prime ``a+bi`` with ``a**2 + b**2 == q`` and ``a > b``.

    Uses a square root ``r`` of -1 mod q and the Gaussian gcd of ``q`` and ``r + i``.
    """
    from .gint import gcd

    q = int(q)
    if q % 4 != 1 or not is_rational_prime(q):
        raise ValueError(f"{q} is not a rational prime congruent to 1 mod 4")
    g = gcd(GaussianInt(q, 0), GaussianInt(sqrt_minus_one(q), 1))
    if g.re < g.im:
        g = GaussianInt(g.im, g.re)
    assert g.norm() == q
    return g


@dataclass(frozen=True)
class Factorization:
    unit: GaussianInt
    factors: tuple[tuple[GaussianInt, int], ...]

    def expand(self) -> GaussianInt:
        out = self.unit
        for p, e in self.factors:
            out = out * p**e
        return out

    @property
    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)


class GaussPrimeTable:
    """Canonical Gaussian primes of norm at most ``norm_bound``."""

    def __init__(self, norm_bound: int, entries: list[tuple[int, int, int, str]] | None = None):
        if norm_bound < 2:
            raise ValueError("norm_bound must be at least 2")
        self.norm_bound = int(norm_bound)
        self._entries = entries

    # -- construction -------------------------------------------------
    @cached_property
    def sieve(self) -> np.ndarray:
        return prime_sieve(self.norm_bound)

    @cached_property
    def rational_primes(self) -> np.ndarray:
        return np.flatnonzero(self.sieve)

    @cached_property
    def _prime_list(self) -> list[int]:
        return self.rational_primes.tolist()

    @property
    def entries(self) -> list[tuple[int, int, int, str]]:
        if self._entries is None:
            self._entries = self._build_entries()
        return self._entries

    def _build_entries(self) -> list[tuple[int, int, int, str]]:
        out = [(1, 1, 2, RAMIFIED)]
        for q in self.rational_primes.tolist():
            if q == 2:
                continue
            if q % 4 == 1:
                p = two_squares(q)
                out.append((p.im, p.re, q, SPLIT))
                out.append((p.re, p.im, q, SPLIT))
            elif q * q <= self.norm_bound:
                out.append((q, 0, q * q, INERT))
        out.sort(key=lambda t: (t[2], t[0], t[1]))
        return out

    @cached_property
    def split_primes(self) -> dict[int, tuple[GaussianInt, GaussianInt]]:
        """Map ``q -> (a+bi, b+ai)`` for every split rational prime q in range (a > b)."""
        out: dict[int, tuple[GaussianInt, GaussianInt]] = {}
        for re_, im_, n, kind in self.entries:
            if kind == SPLIT:
                a, b = max(re_, im_), min(re_, im_)
                out[n] = (GaussianInt(a, b), GaussianInt(b, a))
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        e = self.entries
        return {
            "re": np.array([t[0] for t in e], dtype=np.int64),
            "im": np.array([t[1] for t in e], dtype=np.int64),
            "norm": np.array([t[2] for t in e], dtype=np.int64),
            "kind": np.array([t[3] for t in e]),
        }

    def primes(self, kind: str | None = None, max_norm: int | None = None) -> list[GaussianInt]:
        return [
            GaussianInt(a, b)
            for a, b, n, k in self.entries
            if (kind is None or k == kind) and (max_norm is None or n <= max_norm)
        ]

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"GaussPrimeTable(norm_bound={self.norm_bound})"

    # -- queries -------------------------------------------------------
    def is_prime_norm(self, n: int) -> bool:
        if n <= self.norm_bound:
            return bool(self.sieve[n])
        if math.isqrt(n) <= self.norm_bound:
            return is_rational_prime(n)
        raise CoverageError(n)

    def split_of(self, q: int) -> tuple[GaussianInt, GaussianInt]:
        if q <= self.norm_bound:
            try:
                return self.split_primes[q]
            except KeyError:
                raise ValueError(f"{q} is not a split rational prime") from None
        p = two_squares(q)
        return p, GaussianInt(p.im, p.re)

    def factor_rational(self, m: int) -> list[tuple[int, int]]:
        """Factor a positive rational integer by trial division over the table's primes."""
        if m < 1:
            raise ValueError("can only factor positive integers")
        out = []
        for p in self._prime_list:
            if p * p > m:
                break
            if m % p == 0:
                e = 0
                while m % p == 0:
                    m //= p
                    e += 1
                out.append((p, e))
        if m > 1:
            if m > self.norm_bound and math.isqrt(m) > self.norm_bound:
                raise CoverageError(m, f"cofactor {m} exceeds the square of norm bound {self.norm_bound}")
            out.append((m, 1))
        return out

    def factor(self, n: GaussLike) -> Factorization:
        return factor(n, self)


def build_table(norm_bound: int) -> GaussPrimeTable:
    t = GaussPrimeTable(norm_bound)
    t.entries  # noqa: B018 - force construction
    return t


def factor(n: GaussLike, table: GaussPrimeTable) -> Factorization:
    """Factor ``n`` as ``unit * prod(p**e)`` over canonical Gaussian primes."""
    n = as_gint(n)
    if not n:
        raise ValueError("cannot factor zero")
    rest = n
    factors: list[tuple[GaussianInt, int]] = []
    for q, e in table.factor_rational(n.norm()):
        if q == 2:
            cands = [GaussianInt(1, 1)]
        elif q % 4 == 3:
            cands = [GaussianInt(q, 0)]
        else:
            cands = list(table.split_of(q))
        for p in cands:
            k, m, pc = 0, p.norm(), p.conj()
            while True:
                num = rest * pc
                if num.re % m or num.im % m:
                    break
                rest = GaussianInt(num.re // m, num.im // m)
                k += 1
            if k:
                factors.append((p, k))
    if rest.norm() != 1:
        raise AssertionError(f"factorization of {n} left cofactor {rest}")
    factors.sort(key=lambda t: (t[0].norm(), t[0].re, t[0].im))
    return Factorization(rest, tuple(factors))


def prime_kind(p: GaussianInt) -> str:
    if p.norm() == 2:
        return RAMIFIED
    if p.re == 0 or p.im == 0:
        return INERT
    return SPLIT


def moebius(n: GaussLike, table: GaussPrimeTable) -> int:
    f = factor(n, table)
    if not f.is_squarefree:
        return 0
    return -1 if len(f.factors) % 2 else 1


def mangoldt(n: GaussLike, table: GaussPrimeTable) -> float:
    f = factor(n, table)
    if len(f.factors) == 1:
        return math.log(f.factors[0][0].norm())
    return 0.0


def is_sq_unexceptional(n: GaussLike, table: GaussPrimeTable) -> bool:
    f = factor(n, table)
    return f.is_squarefree and all(prime_kind(p) == SPLIT for p, _ in f.factors)


def divisor_count(n: GaussLike, table: GaussPrimeTable) -> int:
    f = factor(n, table)
    return 4 * math.prod(e + 1 for _, e in f.factors)


def divisors(n: GaussLike, table: GaussPrimeTable, *, with_units: bool = True) -> list[GaussianInt]:
    """All divisors of ``n``; with ``with_units`` every associate is listed separately."""
    f = factor(n, table)
    out = []
    for exps in itertools.product(*(range(e + 1) for _, e in f.factors)):
        d = ONE
        for (p, _), k in zip(f.factors, exps):
            d = d * p**k
        if with_units:
            out.extend(u * d for u in UNITS)
        else:
            out.append(d)
    return out


def is_gaussian_prime(z: GaussLike, table: GaussPrimeTable | None = None) -> bool:
    """Classification test: norm a rational prime, or associate to a rational prime 3 mod 4."""
    z = as_gint(z)
    if not z:
        return False
    n = z.norm()
    prime = table.is_prime_norm if table is not None else is_rational_prime
    if prime(n):
        return True
    if z.re == 0 or z.im == 0:
        q = abs(z.re or z.im)
        return q % 4 == 3 and prime(q)
    return False


def is_unexceptional_prime(z: GaussLike, table: GaussPrimeTable | None = None) -> bool:
    z = as_gint(z)
    n = z.norm()
    prime = table.is_prime_norm if table is not None else is_rational_prime
    return n % 4 == 1 and prime(n)


# -- persistence ---------------------------------------------------------------

def save_table(table: GaussPrimeTable, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# gauss-prime-table norm_bound={table.norm_bound} count={len(table)}\n")
        for a, b, n, kind in table.entries:
            fh.write(f"{a} {b} {n} {kind}\n")


def load_table(path: str | Path) -> GaussPrimeTable:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# gauss-prime-table"):
            raise ValueError(f"{path}: not a Gaussian prime table")
        fields = dict(tok.split("=", 1) for tok in header.split()[2:])
        entries = []
        for line in fh:
            a, b, n, kind = line.split()
            if kind not in KINDS:
                raise ValueError(f"{path}: unknown prime kind {kind!r}")
            entries.append((int(a), int(b), int(n), kind))
    return GaussPrimeTable(int(fields["norm_bound"]), entries)


def describe(table: GaussPrimeTable) -> list[str]:
    return [format_gint(GaussianInt(a, b)) for a, b, _, _ in table.entries]


_SMALL_SIEVE = prime_sieve(1000)
_SMALL_PRIMES = np.flatnonzero(_SMALL_SIEVE)


_MR_LIMIT = 3_000_000_000  # products of residues stay below 2**63; bases 2,3,5,7 are deterministic here


def _powmod(base: int, exp: np.ndarray, mod: np.ndarray) -> np.ndarray:
    result = np.ones_like(mod)
    b = np.full_like(mod, base) % mod
    e = exp.copy()
    while np.any(e):
        odd = (e & 1).astype(bool)
        result = np.where(odd, result * b % mod, result)
        b = b * b % mod
        e >>= 1
    return result


def _miller_rabin_array(n: np.ndarray) -> np.ndarray:
    """Deterministic Miller-Rabin for odd ``n`` in (7, 3e9)."""
    d = n - 1
    s = np.zeros_like(n)
    while True:
        even = (d & 1) == 0
        if not even.any():
            break
        d = np.where(even, d >> 1, d)
        s += even
    ok = np.ones(n.shape, dtype=bool)
    for a in (2, 3, 5, 7):
        x = _powmod(a, d, n)
        good = (x == 1) | (x == n - 1)
        for r in range(1, int(s.max()) if s.size else 1):
            x = x * x % n
            good |= (x == n - 1) & (r < s)
        ok &= good
    return ok


def prime_mask(values: np.ndarray, table: GaussPrimeTable | None = None) -> np.ndarray:
    """Vectorized rational primality for nonnegative int64 values.

    Values inside the table's sieve are looked up directly; larger ones are
    filtered by small primes and the survivors checked by Miller-Rabin.
    """
    v = np.asarray(values, dtype=np.int64)
    out = np.zeros(v.shape, dtype=bool)
    if v.size == 0:
        return out
    if table is not None and int(v.max()) <= table.norm_bound:
        return table.sieve[v]
    small = v <= 1000
    out[small] = _SMALL_SIEVE[v[small]]
    idx = np.flatnonzero(~small)
    cand = v.ravel()[idx]
    keep = np.ones(cand.shape, dtype=bool)
    for p in _SMALL_PRIMES:
        keep &= cand % p != 0
    idx, cand = idx[keep], cand[keep]
    fast = cand < _MR_LIMIT
    flat = out.ravel()
    flat[idx[fast]] = _miller_rabin_array(cand[fast])
    flat[idx[~fast]] = [is_rational_prime(int(n)) for n in cand[~fast]]
    return flat.reshape(v.shape)
