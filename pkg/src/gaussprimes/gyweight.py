"""Bump functions, the truncated divisor sum, the W-trick and the majorant nu."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from .gint import GaussianInt, GaussLike, as_gint, gcd
from .sieve import GaussPrimeTable, SPLIT, prime_mask

log = logging.getLogger(__name__)

SMOOTH, TRIANGLE, SAMPLED = "smooth", "triangle", "sampled"


class BumpFunction:
    """An even cutoff supported on [-1, 1] with value 1 at the origin.

    ``kind`` is ``"smooth"`` for ``exp(1 - 1/(1 - x**2))``, ``"triangle"`` for
    ``max(1 - |x|, 0)``, or ``"sampled"`` for a piecewise-linear function through
    user-supplied samples on ``[0, 1]`` (extended evenly).
    """

    def __init__(self, kind: str = SMOOTH, xs: Sequence[float] | None = None, ys: Sequence[float] | None = None):
        if kind not in (SMOOTH, TRIANGLE, SAMPLED):
            raise ValueError(f"unknown bump kind {kind!r}")
        self.kind = kind
        if kind == SAMPLED:
            if xs is None or ys is None:
                raise ValueError("sampled bump needs xs and ys")
            xs_a, ys_a = np.asarray(xs, float), np.asarray(ys, float)
            if xs_a.ndim != 1 or xs_a.shape != ys_a.shape or len(xs_a) < 2:
                raise ValueError("xs and ys must be matching 1-d arrays of length >= 2")
            if xs_a[0] != 0.0 or xs_a[-1] != 1.0 or np.any(np.diff(xs_a) <= 0):
                raise ValueError("xs must increase from 0 to 1")
            if ys_a[0] != 1.0 or ys_a[-1] != 0.0 or np.any(ys_a < 0):
                raise ValueError("samples need phi(0)=1, phi(1)=0 and phi>=0")
            self.xs, self.ys = xs_a, ys_a
        else:
            self.xs = self.ys = None

    @classmethod
    def from_name(cls, name: str | BumpFunction) -> BumpFunction:
        if isinstance(name, BumpFunction):
            return name
        return cls(name)

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        inside = a < 1
        out = np.zeros_like(a)
        if self.kind == SMOOTH:
            t = a[inside]
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - t * t))
        elif self.kind == TRIANGLE:
            out[inside] = 1.0 - a[inside]
        else:
            out[inside] = np.interp(a[inside], self.xs, self.ys)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        inside = a < 1
        out = np.zeros_like(x)
        if self.kind == SMOOTH:
            t = x[inside]
            u = 1.0 - t * t
            out[inside] = np.exp(1.0 - 1.0 / u) * (-2.0 * t / (u * u))
        elif self.kind == TRIANGLE:
            out[inside] = -np.sign(x[inside])
        else:
            slopes = np.diff(self.ys) / np.diff(self.xs)
            k = np.clip(np.searchsorted(self.xs, a[inside], side="right") - 1, 0, len(slopes) - 1)
            out[inside] = slopes[k] * np.sign(x[inside])
        return out if out.ndim else float(out)

    def breakpoints(self) -> list[float]:
        if self.kind == SAMPLED:
            return [float(v) for v in self.xs[1:-1]]
        return []

    def dirichlet_energy(self, resolution: int = 200) -> float:
        """``integral_0^inf phi'(x)**2 dx`` by adaptive quadrature.

        ``resolution`` caps the number of adaptive subintervals.
        """
        f = lambda x: float(self.derivative(x)) ** 2  # noqa: E731
        val, err = integrate.quad(
            f, 0.0, 1.0, limit=int(resolution), epsabs=1e-14, epsrel=1e-12,
            points=self.breakpoints() or None,
        )
        if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300):
            raise ArithmeticError(f"quadrature did not converge (estimate {val}, error {err})")
        return val

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == SAMPLED:
            d.update(xs=self.xs.tolist(), ys=self.ys.tolist())
        return d

    @classmethod
    def from_dict(cls, d: dict | str) -> BumpFunction:
        if isinstance(d, str):
            return cls(d)
        return cls(d.get("kind", SMOOTH), d.get("xs"), d.get("ys"))

    def __repr__(self) -> str:
        return f"BumpFunction({self.kind!r})"


def gy_constant(phi: BumpFunction, resolution: int = 200) -> float:
    """Per-form main-term constant ``(4/pi) * integral phi'**2``.

    This is ``c'/16`` where ``c' = (64/pi) * integral phi'**2``.
    """
    return 4.0 / math.pi * phi.dirichlet_energy(resolution)


# -- truncated divisor sum ------------------------------------------------------

def _log_norm_R(R: float) -> float:
    NR = float(R) ** 2
    if NR <= 1:
        raise ValueError("R must exceed 1")
    return math.log(NR)


def _subset_sum(norms: list[int], NR: float, L: float, phi: BumpFunction) -> float:
    """Sum of ``mu(d) phi(log N(d) / L)`` over products of distinct primes with the given norms."""
    total = 0.0
    norms = sorted(norms)

    def rec(start: int, prod: int, sign: int):
        nonlocal total
        total += sign * float(phi(math.log(prod) / L))
        for j in range(start, len(norms)):
            nxt = prod * norms[j]
            if nxt > NR:
                break
            rec(j + 1, nxt, -sign)

    rec(0, 1, 1)
    return total


def split_divisor_norms(n: GaussLike, max_norm: float, table: GaussPrimeTable) -> list[int]:
    """Norms of the canonical unexceptional primes of norm <= max_norm dividing n (with repetition for p and its conjugate)."""
    n = as_gint(n)
    m = n.norm()
    out = []
    for q in table.rational_primes[table.rational_primes <= max_norm].tolist():
        if q % 4 != 1 or m % q:
            continue
        for p in table.split_of(q):
            num = n * p.conj()
            if num.re % q == 0 and num.im % q == 0:
                out.append(q)
    return out


def truncated_mangoldt(n: GaussLike, R: float, phi: BumpFunction | str, table: GaussPrimeTable) -> float:
    """``1/4 log N(R) * sum mu(d) phi(log N(d)/log N(R))`` over squarefree unexceptional ``d | n``.

    The four unit multiples of each ``d`` contribute equally, so the sum runs over
    associate classes and the 1/4 cancels.
    """
    n = as_gint(n)
    if not n:
        raise ValueError("n must be nonzero")
    phi = BumpFunction.from_name(phi)
    L = _log_norm_R(R)
    NR = float(R) ** 2
    if table.norm_bound < min(NR, n.norm()):
        from .sieve import CoverageError

        raise CoverageError(int(min(NR, n.norm())))
    return L * _subset_sum(split_divisor_norms(n, NR, table), NR, L, phi)


@dataclass(frozen=True)
class SplitPrimeData:
    """Canonical unexceptional primes in array form.

    ``p | x + y i`` iff ``x + y * root`` is divisible by ``norm``, where ``root`` is
    the residue of ``i`` modulo ``p``.
    """

    norm: np.ndarray
    root: np.ndarray
    re: np.ndarray
    im: np.ndarray

    @classmethod
    def from_table(cls, table: GaussPrimeTable, max_norm: float) -> SplitPrimeData:
        if table.norm_bound < max_norm:
            from .sieve import CoverageError

            raise CoverageError(int(max_norm))
        rows = [(a, b, n) for a, b, n, k in table.entries if k == SPLIT and n <= max_norm]
        q = np.array([r[2] for r in rows], dtype=np.int64)
        a = np.array([r[0] for r in rows], dtype=np.int64)
        b = np.array([r[1] for r in rows], dtype=np.int64)
        root = np.array([(-ai * pow(int(bi), -1, int(qi))) % qi for ai, bi, qi in zip(a, b, q)], dtype=np.int64)
        return cls(q, root, a, b)

    def divisible(self, j: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        q, r = self.norm[j], self.root[j]
        return (x % q + (y % q) * r) % q == 0


def truncated_mangoldt_array(
    x: np.ndarray, y: np.ndarray, R: float, phi: BumpFunction | str, table: GaussPrimeTable,
    primes: SplitPrimeData | None = None,
) -> np.ndarray:
    """Vectorized truncated divisor sum at the points ``x + y i`` (none may be zero)."""
    phi = BumpFunction.from_name(phi)
    x = np.asarray(x, dtype=np.int64).ravel()
    y = np.asarray(y, dtype=np.int64).ravel()
    if np.any((x == 0) & (y == 0)):
        raise ValueError("truncated_mangoldt is undefined at 0")
    L = _log_norm_R(R)
    NR = float(R) ** 2
    if primes is None:
        primes = SplitPrimeData.from_table(table, NR)
    acc = np.ones(x.shape, dtype=float)
    norms = primes.norm

    def rec(start: int, idx: np.ndarray, prod: int, sign: int):
        for j in range(start, len(norms)):
            nxt = prod * int(norms[j])
            if nxt > NR:
                break
            hit = idx[primes.divisible(j, x[idx], y[idx])]
            if hit.size == 0:
                continue
            acc[hit] += -sign * float(phi(math.log(nxt) / L))
            rec(j + 1, hit, nxt, -sign)

    rec(0, np.arange(x.size), 1, 1)
    return L * acc


# -- W-trick ------------------------------------------------------------------

def compute_W(w: int, table: GaussPrimeTable) -> tuple[int, int]:
    """``W`` = product of ``N(p)`` over canonical primes with ``N(p) <= w``, and ``phi_{Z[i]}(W)``."""
    if w < 2:
        raise ValueError("w must be at least 2")
    if table.norm_bound < w:
        from .sieve import CoverageError

        raise CoverageError(w)
    W = 1
    for _, _, n, _ in table.entries:
        if n > w:
            break
        W *= n
    return W, gaussian_totient(W, table)


def prime_divisors_of_rational(W: int, table: GaussPrimeTable) -> list[GaussianInt]:
    out = []
    for q, _ in table.factor_rational(W) if W > 1 else []:
        if q == 2:
            out.append(GaussianInt(1, 1))
        elif q % 4 == 3:
            out.append(GaussianInt(q, 0))
        else:
            out.extend(table.split_of(q))
    return out


def gaussian_totient(W: int, table: GaussPrimeTable) -> int:
    """Number of residues in ``[0, W)^2`` coprime to the rational integer W."""
    val = Fraction(W * W)
    for p in prime_divisors_of_rational(W, table):
        val *= 1 - Fraction(1, p.norm())
    assert val.denominator == 1
    return int(val)


def coprime_residues(W: int, table: GaussPrimeTable) -> np.ndarray:
    """All ``b`` in ``[0, W)^2`` coprime to W, as an ``(m, 2)`` array sorted by (re, im)."""
    g = np.stack(np.meshgrid(np.arange(W), np.arange(W), indexing="ij"), -1).reshape(-1, 2).astype(np.int64)
    ok = np.ones(len(g), dtype=bool)
    for p in prime_divisors_of_rational(W, table):
        n = p.norm()
        num_re = g[:, 0] * p.re + g[:, 1] * p.im  # (x + yi) * conj(p)
        num_im = g[:, 1] * p.re - g[:, 0] * p.im
        ok &= ~((num_re % n == 0) & (num_im % n == 0))
    return g[ok]


def annulus_points(radius_sq: float) -> np.ndarray:
    """Lattice points with ``radius_sq/2 <= N(n) <= radius_sq`` as an ``(m, 2)`` array."""
    r = math.isqrt(int(radius_sq)) + 1
    ax = np.arange(-r, r + 1, dtype=np.int64)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    nn = X * X + Y * Y
    mask = (2 * nn >= radius_sq) & (nn <= radius_sq)
    return np.stack([X[mask], Y[mask]], -1)


def disk_points(radius_sq: float) -> np.ndarray:
    r = math.isqrt(int(radius_sq)) + 1
    ax = np.arange(-r, r + 1, dtype=np.int64)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    mask = X * X + Y * Y <= radius_sq
    return np.stack([X[mask], Y[mask]], -1)


@dataclass(frozen=True)
class ResidueChoice:
    b: GaussianInt
    count: int
    counts: dict[tuple[int, int], int]
    sampled: bool
    points_scanned: int


def choose_b(
    N: int, epsilon: float, W: int, table: GaussPrimeTable,
    budget: int = 20_000_000, sample_size: int = 2000, seed: int = 0,
) -> ResidueChoice:
    """Residue ``b`` coprime to W maximizing ``#{n in annulus : W n + b unexceptional prime}``.

    The annulus is ``eps^2 N^2 / 2 <= N(n) <= eps^2 N^2``.  When the scan
    ``#annulus * #residues`` exceeds ``budget`` a seeded subsample of the annulus
    is used for every residue and the result is flagged ``sampled``.
    """
    rad_sq = (epsilon * N) ** 2
    pts = annulus_points(rad_sq)
    res = coprime_residues(W, table)
    if len(res) == 0:
        raise RuntimeError("no residue coprime to W")
    sampled = len(pts) * len(res) > budget
    if sampled:
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(len(pts), size=min(sample_size, len(pts)), replace=False))]
    counts: dict[tuple[int, int], int] = {}
    for bx, by in res.tolist():
        zx = W * pts[:, 0] + bx
        zy = W * pts[:, 1] + by
        nn = zx * zx + zy * zy
        ok = nn % 4 == 1
        ok[ok] = prime_mask(nn[ok], table)
        counts[(bx, by)] = int(ok.sum())
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))
    return ResidueChoice(GaussianInt(*best[0]), best[1], counts, sampled, len(pts))


# -- the majorant -------------------------------------------------------------

SMALL_C_NOTE = "c_exponent exceeds the tiny exponent required by the asymptotic argument"


@dataclass(frozen=True)
class WeightConfig:
    N: int
    epsilon: float
    w: int
    W: int
    phi_W: int
    b: GaussianInt
    R: float
    c_exponent: float
    phi: BumpFunction
    C_phi: float
    seed: int = 0
    warnings: tuple[str, ...] = field(default=())

    @property
    def log_NR(self) -> float:
        return _log_norm_R(self.R)

    @property
    def disk_scale(self) -> float:
        """Constant value of ``C_phi * phi(W)/N(W) / log N(R)`` multiplying ``Lambda_R**2``."""
        return self.C_phi * self.phi_W / (self.W * self.W) / self.log_NR

    @classmethod
    def build(
        cls, N: int, table: GaussPrimeTable, *, epsilon: float = 1 / 128, w: int = 5,
        c_exponent: float = 0.05, phi: BumpFunction | str = SMOOTH, b: GaussLike | None = None,
        seed: int = 0, choose_budget: int = 20_000_000,
    ) -> WeightConfig:
        from .sieve import is_rational_prime

        if not is_rational_prime(N):
            raise ValueError(f"N={N} must be a rational prime")
        if not 0 <= epsilon < 0.01:
            raise ValueError("epsilon must lie in [0, 1/100)")
        if c_exponent <= 0:
            raise ValueError("c_exponent must be positive")
        phi = BumpFunction.from_name(phi)
        W, phi_W = compute_W(w, table)
        if b is None:
            b = choose_b(N, epsilon, W, table, budget=choose_budget, seed=seed).b if epsilon > 0 else _first_coprime(W, table)
        b = as_gint(b)
        if gcd(b, W).norm() != 1 and W > 1:
            raise ValueError(f"b={b} is not coprime to W={W}")
        R = float(N) ** c_exponent
        if R * R <= 1.0:
            raise ValueError("R must exceed 1")
        warns = (SMALL_C_NOTE,)
        return cls(N, epsilon, w, W, phi_W, b, R, c_exponent, phi, 1.0 / gy_constant(phi), seed, warns)

    def to_dict(self) -> dict:
        return {
            "N": self.N, "epsilon": self.epsilon, "w": self.w, "W": self.W, "phi_W": self.phi_W,
            "b": self.b.to_pair(), "R": self.R, "N_R": self.R**2, "c_exponent": self.c_exponent,
            "phi": self.phi.to_dict(), "C_phi": self.C_phi, "seed": self.seed,
        }


def _first_coprime(W: int, table: GaussPrimeTable) -> GaussianInt:
    return GaussianInt(*coprime_residues(W, table)[0].tolist())


def lift(x: np.ndarray | int, N: int):
    """Representative of ``x mod N`` in ``(-N/2, N/2]``."""
    x = np.asarray(x, dtype=np.int64) % N
    return np.where(2 * x > N, x - N, x)


def nu_array(x1: np.ndarray, x2: np.ndarray, config: WeightConfig, table: GaussPrimeTable,
             primes: SplitPrimeData | None = None) -> np.ndarray:
    """Vectorized majorant at points ``(x1, x2)`` of ``Z_N^2``."""
    n1 = lift(np.asarray(x1).ravel(), config.N)
    n2 = lift(np.asarray(x2).ravel(), config.N)
    out = np.ones(n1.shape, dtype=float)
    inside = n1 * n1 + n2 * n2 <= (config.epsilon * config.N) ** 2
    if config.epsilon > 0 and inside.any():
        W, b = config.W, config.b
        lam = truncated_mangoldt_array(W * n1[inside] + b.re, W * n2[inside] + b.im, config.R, config.phi, table, primes)
        out[inside] = config.disk_scale * lam * lam
    return out


def nu(x: tuple[int, int] | GaussLike, config: WeightConfig, table: GaussPrimeTable) -> float:
    """The majorant at one point of ``Z_N^2``."""
    z = as_gint(x)
    n = GaussianInt(int(lift(z.re, config.N)), int(lift(z.im, config.N)))
    if config.epsilon <= 0 or n.norm() > (config.epsilon * config.N) ** 2:
        return 1.0
    lam = truncated_mangoldt(config.W * n + config.b, config.R, config.phi, table)
    return config.disk_scale * lam * lam


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    stderr: float
    mode: str
    points: int
    seed: int | None

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "mode": self.mode, "points": self.points, "seed": self.seed}


def mean_nu(
    config: WeightConfig, table: GaussPrimeTable, mode: str = "auto", samples: int = 200_000,
    seed: int | None = None, chunk: int = 1 << 20,
) -> MeanEstimate:
    """Average of nu over ``Z_N^2``.

    ``exact`` sums nu over the disk where it can differ from 1 and counts every
    other point as 1; ``sample`` draws uniform points.  ``auto`` is exact unless
    the disk has more than ``10**7`` points.
    """
    primes = SplitPrimeData.from_table(table, config.R**2)
    total = config.N**2
    rad_sq = (config.epsilon * config.N) ** 2
    if mode == "auto":
        mode = "exact" if math.pi * rad_sq <= 1e7 else "sample"
    if mode == "exact":
        pts = disk_points(rad_sq) if config.epsilon > 0 else np.zeros((0, 2), dtype=np.int64)
        s = 0.0
        for i in range(0, len(pts), chunk):
            blk = pts[i:i + chunk]
            s += math.fsum(nu_array(blk[:, 0], blk[:, 1], config, table, primes))
        return MeanEstimate((s + (total - len(pts))) / total, 0.0, "exact", total, None)
    if mode != "sample":
        raise ValueError(f"unknown mode {mode!r}")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, config.N, size=(samples, 2))
    vals = np.concatenate([
        nu_array(xs[i:i + chunk, 0], xs[i:i + chunk, 1], config, table, primes) for i in range(0, samples, chunk)
    ])
    return MeanEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), "sample", samples, seed)


def measure_system_from_nu(shape: Sequence[GaussLike], config: WeightConfig, table: GaussPrimeTable):
    """System of measures ``nu_e(x_e) = nu(sum_{j in e} (v_j - v_i) x_j)`` for ``e = J - {i}``.

    Returns ``(system, {e: EdgeFunction})`` with lazily evaluated edge functions
    on ``Z_N^e``.
    """
    from .boxnorm import EdgeFunction, HypergraphSystem

    pts = [as_gint(v) for v in shape]
    if len(set(pts)) != len(pts):
        raise ValueError("shape points must be distinct")
    k = len(pts)
    if k < 2:
        raise ValueError("shape needs at least two points")
    J = tuple(range(k))
    H = tuple(tuple(j for j in J if j != i) for i in J)
    system = HypergraphSystem(J, (config.N,) * k, k - 1, H)
    primes = SplitPrimeData.from_table(table, config.R**2)
    funcs = {}
    for i, e in zip(J, H):
        diffs = [pts[j] - pts[i] for j in e]

        def rule(*coords, diffs=diffs):
            coords = [np.asarray(c, dtype=np.int64) for c in coords]
            shp = np.broadcast(*coords).shape
            X = sum(d.re * c for d, c in zip(diffs, coords)) % config.N
            Y = sum(d.im * c for d, c in zip(diffs, coords)) % config.N
            return nu_array(np.broadcast_to(X, shp), np.broadcast_to(Y, shp), config, table, primes).reshape(shp)

        funcs[e] = EdgeFunction(e, system.sizes_of(e), rule=rule)
    return system, funcs

