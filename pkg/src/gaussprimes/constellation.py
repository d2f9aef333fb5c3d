"""Shapes, their normalization, and exhaustive search for Gaussian-prime constellations."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gint import GaussianInt, GaussLike, as_gint, format_gint, parse_gint
from .sieve import GaussPrimeTable, is_gaussian_prime, is_unexceptional_prime, prime_mask

MAX_DUMMIES = 16


@dataclass(frozen=True)
class Shape:
    """Distinct Gaussian integers; ``dummies`` trailing points were added by normalization."""

    points: tuple[GaussianInt, ...]
    dummies: int = 0

    def __post_init__(self):
        pts = tuple(as_gint(p) for p in self.points)
        if len(set(pts)) != len(pts):
            raise ValueError("shape points must be distinct")
        object.__setattr__(self, "points", pts)

    @classmethod
    def parse(cls, text: str) -> Shape:
        return cls(tuple(parse_gint(t) for t in text.split(",") if t.strip()))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def original(self) -> tuple[GaussianInt, ...]:
        return self.points[: len(self.points) - self.dummies]

    def translate(self, c: GaussLike) -> Shape:
        return Shape(tuple(p + c for p in self.points), self.dummies)

    def rotate(self, u: GaussLike) -> Shape:
        return Shape(tuple(p * u for p in self.points), self.dummies)

    def to_dict(self) -> dict:
        return {"points": [p.to_pair() for p in self.points], "dummies": self.dummies}

    def __str__(self) -> str:
        return ",".join(format_gint(p) for p in self.points)


def spans_lattice(vectors: Iterable[GaussLike]) -> bool:
    """True iff the vectors generate Z[i] additively (gcd of all 2x2 determinants is 1)."""
    vs = [as_gint(v) for v in vectors]
    g = 0
    for u, v in itertools.combinations(vs, 2):
        g = math.gcd(g, u.re * v.im - u.im * v.re)
        if g == 1:
            return True
    return False


def spanning_failures(points: tuple[GaussianInt, ...]) -> list[tuple[int, int]]:
    """Ordered pairs ``(i, j)`` for which ``{v_k - v_j : k != i, j}`` fails to span."""
    bad = []
    for i, j in itertools.permutations(range(len(points)), 2):
        if not spans_lattice(points[k] - points[j] for k in range(len(points)) if k not in (i, j)):
            bad.append((i, j))
    return bad


def dummy_candidates() -> Iterator[GaussianInt]:
    """First-quadrant nonzero points by increasing norm, then argument: 1, i, 1+i, 2, 2i, 2+i, ..."""
    radius = 1
    seen = 0
    while True:
        ring = [GaussianInt(a, b) for a in range(radius + 1) for b in range(radius + 1)
                if (a or b) and seen < a * a + b * b <= radius * radius]
        ring.sort(key=lambda z: (z.norm(), math.atan2(z.im, z.re)))
        yield from ring
        seen = radius * radius
        radius += 1


def normalize(shape: Shape | Iterable[GaussLike]) -> Shape:
    """Translate the lexicographically smallest point to 0 and add dummies until every pair spans."""
    pts = list(shape.original if isinstance(shape, Shape) else (as_gint(p) for p in shape))
    if not pts:
        raise ValueError("empty shape")
    if len(set(pts)) != len(pts):
        raise ValueError("shape points must be distinct")
    origin = min(pts, key=lambda z: (z.re, z.im))
    pts = [p - origin for p in pts]
    pts.sort(key=lambda z: (z.re, z.im))
    n_orig = len(pts)
    cands = dummy_candidates()
    while spanning_failures(tuple(pts)):
        if len(pts) - n_orig >= MAX_DUMMIES:
            raise RuntimeError("dummy augmentation did not converge")
        c = next(cands)
        if c not in pts:
            pts.append(c)
    return Shape(tuple(pts), len(pts) - n_orig)


def symmetrize(shape: Shape | Iterable[GaussLike]) -> Shape:
    pts = list(shape.original if isinstance(shape, Shape) else (as_gint(p) for p in shape))
    out = list(dict.fromkeys(pts + [-p for p in pts]))
    return Shape(tuple(out))


@dataclass(frozen=True)
class Constellation:
    a: GaussianInt
    r: int
    points: tuple[GaussianInt, ...]

    def to_dict(self) -> dict:
        return {"r": self.r, "a": self.a.to_pair(), "points": [p.to_pair() for p in self.points]}


def is_constellation(a: GaussLike, r: int, shape, table: GaussPrimeTable | None = None,
                     unexceptional_only: bool = False) -> bool:
    if r == 0:
        raise ValueError("scale r must be nonzero")
    a = as_gint(a)
    test = is_unexceptional_prime if unexceptional_only else is_gaussian_prime
    pts = [a + p * r for p in _points(shape)]
    return len(set(pts)) == len(pts) and all(test(z, table) for z in pts)


def _points(shape) -> tuple[GaussianInt, ...]:
    return shape.original if isinstance(shape, Shape) else tuple(as_gint(p) for p in shape)


# -- independent verification ----------------------------------------------------

@lru_cache(maxsize=32)
def _trial_primes(bound: int) -> tuple[tuple[int, int], ...]:
    """Canonical Gaussian primes of norm <= bound, found by rational trial division only."""
    def rational_prime(n: int) -> bool:
        if n < 2:
            return False
        return all(n % d for d in range(2, math.isqrt(n) + 1))

    out = []
    for a in range(1, math.isqrt(bound) + 1):
        for b in range(0, math.isqrt(max(bound - a * a, 0)) + 1):
            n = a * a + b * b
            if b == 0:
                if a % 4 == 3 and rational_prime(a) and a * a <= bound:
                    out.append((a, 0))
            elif rational_prime(n):
                out.append((a, b))
    return tuple(out)


def verify_prime(z: GaussLike) -> bool:
    """Gaussian primality by trial division with canonical primes of norm up to sqrt(N(z))."""
    z = as_gint(z)
    x, y = z.re, z.im
    n = x * x + y * y
    if n < 2:
        return False
    bound = math.isqrt(n)
    cap = 1 << max(bound - 1, 1).bit_length()
    for a, b in _trial_primes(cap):
        q = a * a + b * b
        if q > bound:
            continue
        # z / (a+bi) = z (a-bi) / q
        if (x * a + y * b) % q == 0 and (y * a - x * b) % q == 0:
            return False
    return True


# -- search -----------------------------------------------------------------------

@dataclass
class SearchCheckpoint:
    """Resume position: scan continues at scale ``r``, real part ``re``."""

    r: int
    re: int
    candidates: int = 0


@dataclass
class SearchStats:
    candidates: int = 0
    found: int = 0
    rejected_by_verifier: int = 0
    checkpoints: list[dict] = field(default_factory=list)


def _prime_grid(x: np.ndarray, y: np.ndarray, table, unexceptional_only: bool) -> np.ndarray:
    n = x * x + y * y
    ok = prime_mask(n, table)
    if unexceptional_only:
        return ok & (n % 4 == 1)
    axis = (x == 0) | (y == 0)
    if axis.any():
        q = np.abs(x + y)[axis]
        ok[axis] |= (q % 4 == 3) & prime_mask(q, table)
    return ok


def _small_primes(bound: int) -> list[GaussianInt]:
    return [GaussianInt(a, b) for a, b in _trial_primes(max(bound, 2)) if a * a + b * b <= bound]


def _residue(z: GaussianInt, p: GaussianInt) -> tuple[int, ...]:
    if p.im == 0:
        q = p.re
        return (z.re % q, z.im % q)
    q = p.norm()
    t = (-p.re * pow(p.im, -1, q)) % q  # image of i in Z[i]/p
    return ((z.re + z.im * t) % q,)


def local_obstruction(points, r: int) -> GaussianInt | None:
    """A prime ``p`` such that ``{r v_j}`` meets every residue class mod ``p``, if any.

    For such ``p`` every candidate has a point divisible by ``p``, which is then
    prime only if it is an associate of ``p``.
    """
    pts = _points(points)
    for p in _small_primes(len(pts)):
        if len({_residue(v * r, p) for v in pts}) == p.norm():
            return p
    return None


def _obstructed_candidates(pts, r: int, p: GaussianInt, a_bound: int) -> list[GaussianInt]:
    out = set()
    for u in (GaussianInt(1, 0), GaussianInt(0, 1), GaussianInt(-1, 0), GaussianInt(0, -1)):
        for v in pts:
            a = p * u - v * r
            if abs(a.re) <= a_bound and abs(a.im) <= a_bound:
                out.add(a)
    return sorted(out, key=lambda z: (z.re, z.im))


def iter_search(shape, a_bound: int, r_bound: int, table: GaussPrimeTable | None = None, *,
                unexceptional_only: bool = False, negative: bool = False, rows_per_block: int = 32,
                resume: SearchCheckpoint | None = None, checkpoint_every: int = 10_000_000,
                stats: SearchStats | None = None) -> Iterator[Constellation]:
    """Scan ``1 <= r <= r_bound`` then ``a`` lexicographically over the box ``|re a|, |im a| <= a_bound``.

    Candidates are filtered one shape point at a time; each survivor is then
    re-verified by :func:`verify_prime` before it is yielded.  A scale with a
    :func:`local_obstruction` only examines the few candidates that place an
    associate of the obstructing prime on the shape.  With ``negative``
    the scales run over ``-1 ... -r_bound`` instead.
    """
    pts = _points(shape)
    if a_bound < 0 or r_bound < 0:
        raise ValueError("bounds must be nonnegative")
    if not pts or r_bound == 0:
        return
    stats = stats if stats is not None else SearchStats()
    test = is_unexceptional_prime if unexceptional_only else is_gaussian_prime
    span = np.arange(-a_bound, a_bound + 1, dtype=np.int64)
    start_r, start_re = (resume.r, resume.re) if resume else (1, -a_bound)
    since = 0
    for r_abs in range(start_r, r_bound + 1):
        r = -r_abs if negative else r_abs
        first = start_re if r_abs == start_r else -a_bound
        blocker = local_obstruction(pts, r)
        if blocker is not None:
            for a in _obstructed_candidates(pts, r, blocker, a_bound):
                if a.re < first:
                    continue
                stats.candidates += 1
                members = tuple(a + p * r for p in pts)
                if all(test(z, table) for z in members):
                    if all(verify_prime(z) for z in members):
                        stats.found += 1
                        yield Constellation(a, r, members)
                    else:
                        stats.rejected_by_verifier += 1
            continue
        for re0 in range(first, a_bound + 1, rows_per_block):
            rows = np.arange(re0, min(re0 + rows_per_block, a_bound + 1), dtype=np.int64)
            ax = np.repeat(rows, span.size)
            ay = np.tile(span, rows.size)
            alive = np.ones(ax.size, dtype=bool)
            for p in pts:
                idx = np.flatnonzero(alive)
                if idx.size == 0:
                    break
                alive[idx] = _prime_grid(ax[idx] + r * p.re, ay[idx] + r * p.im, table, unexceptional_only)
            stats.candidates += ax.size
            since += ax.size
            for k in np.flatnonzero(alive):
                a = GaussianInt(int(ax[k]), int(ay[k]))
                members = tuple(a + p * r for p in pts)
                if all(verify_prime(z) for z in members) and all(test(z, table) for z in members):
                    stats.found += 1
                    yield Constellation(a, r, members)
                else:
                    stats.rejected_by_verifier += 1
            if since >= checkpoint_every:
                nxt = (r_abs, int(rows[-1]) + 1) if rows[-1] < a_bound else (r_abs + 1, -a_bound)
                stats.checkpoints.append({"r": nxt[0], "re": nxt[1], "candidates": stats.candidates})
                since = 0


def search(shape, a_bound: int, r_bound: int, table: GaussPrimeTable | None = None, *,
           unexceptional_only: bool = False, limit: int | None = None, **kwargs) -> list[Constellation]:
    out = []
    for c in iter_search(shape, a_bound, r_bound, table, unexceptional_only=unexceptional_only, **kwargs):
        out.append(c)
        if limit is not None and len(out) >= limit:
            break
    return out


@dataclass(frozen=True)
class DensityRow:
    a_bound: int
    r_bound: int
    count: int
    volume: int
    ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def density_report(shape, bounds: list[tuple[int, int]], table: GaussPrimeTable | None = None,
                   unexceptional_only: bool = False) -> list[DensityRow]:
    """Counts per (a, r) box and the ratio ``count / (volume / log(A^2)^k)``."""
    k = len(_points(shape))
    rows = []
    for A, R in bounds:
        volume = (2 * A + 1) ** 2 * R
        if k == 0 or volume == 0:
            rows.append(DensityRow(A, R, 0, volume, 0.0))
            continue
        count = sum(1 for _ in iter_search(shape, A, R, table, unexceptional_only=unexceptional_only))
        scale = math.log(max(A * A, 3)) ** k
        rows.append(DensityRow(A, R, count, volume, count * scale / volume))
    return rows
