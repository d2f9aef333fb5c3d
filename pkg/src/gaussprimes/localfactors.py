"""Local densities, truncated Gaussian zeta products, GY main terms and tau bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from .gint import GaussianInt, GaussLike, as_gint, divides, gcd
from .gyweight import (
    BumpFunction, SplitPrimeData, gaussian_totient, gy_constant, truncated_mangoldt_array,
)
from .sieve import SPLIT, GaussPrimeTable, factor, prime_kind

log = logging.getLogger(__name__)

OMEGA_GUARD = 10**8


# -- linear forms ---------------------------------------------------------------

def _minors_vanish(L: Sequence[GaussianInt], M: Sequence[GaussianInt]) -> bool:
    k = len(L)
    return all(L[t] * M[u] - L[u] * M[t] == GaussianInt(0) for t in range(k) for u in range(t + 1, k))


def commensurate(L: Sequence[GaussLike], M: Sequence[GaussLike]) -> bool:
    """True when ``L`` is a Gaussian-rational multiple of ``M`` or of its conjugate."""
    L = [as_gint(z) for z in L]
    M = [as_gint(z) for z in M]
    if len(L) != len(M):
        raise ValueError("forms have different lengths")
    if not any(L) or not any(M):
        return True
    return _minors_vanish(L, M) or _minors_vanish(L, [z.conj() for z in M])


@dataclass(frozen=True)
class LinearFormFamily:
    """Affine forms ``x -> L_s . x + a_s`` on ``Z^T`` with Gaussian coefficients."""

    forms: tuple[tuple[GaussianInt, ...], ...]
    shifts: tuple[GaussianInt, ...]

    def __init__(self, forms: Sequence[Sequence[GaussLike]], shifts: Sequence[GaussLike] | None = None,
                 require_incommensurate: bool = True):
        fs = tuple(tuple(as_gint(z) for z in L) for L in forms)
        if not fs:
            raise ValueError("need at least one form")
        T = len(fs[0])
        if T == 0 or any(len(L) != T for L in fs):
            raise ValueError("all forms need the same positive length")
        if any(not any(L) for L in fs):
            raise ValueError("forms must not vanish identically")
        sh = tuple(as_gint(a) for a in shifts) if shifts is not None else (GaussianInt(0),) * len(fs)
        if len(sh) != len(fs):
            raise ValueError("one shift per form")
        if require_incommensurate:
            for s in range(len(fs)):
                for u in range(s + 1, len(fs)):
                    if commensurate(fs[s], fs[u]):
                        raise ValueError(f"forms {s} and {u} are commensurate")
        object.__setattr__(self, "forms", fs)
        object.__setattr__(self, "shifts", sh)

    @property
    def T(self) -> int:
        return len(self.forms[0])

    @property
    def S(self) -> int:
        return len(self.forms)

    def evaluate(self, s: int, xs: Sequence[np.ndarray], W: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Real and imaginary parts of ``W (L_s . x) + a_s`` for integer coordinate arrays."""
        L, a = self.forms[s], self.shifts[s]
        re = sum(c.re * x for c, x in zip(L, xs))
        im = sum(c.im * x for c, x in zip(L, xs))
        return W * re + a.re, W * im + a.im

    def to_dict(self) -> dict:
        return {"forms": [[z.to_pair() for z in L] for L in self.forms], "shifts": [a.to_pair() for a in self.shifts]}


# -- local densities ------------------------------------------------------------

def rational_period(q: GaussLike) -> int:
    """Least positive rational integer divisible by ``q``."""
    q = as_gint(q)
    if not q:
        raise ValueError("modulus must be nonzero")
    g = math.gcd(q.re, q.im)
    return q.norm() // g


def _divisible(re: np.ndarray, im: np.ndarray, q: GaussianInt) -> np.ndarray:
    n = q.norm()
    return ((re * q.re + im * q.im) % n == 0) & ((im * q.re - re * q.im) % n == 0)


def omega_bruteforce(moduli: Sequence[GaussLike], family: LinearFormFamily, W: int = 1,
                     guard: int = OMEGA_GUARD) -> Fraction:
    """Exact density of ``x in (Z/D)^T`` with ``q_s | W (L_s . x) + a_s`` for every s."""
    qs = [as_gint(q) for q in moduli]
    if len(qs) != family.S:
        raise ValueError("one modulus per form")
    D = math.lcm(*(rational_period(q) for q in qs))
    T = family.T
    if D**T > guard:
        raise MemoryError(f"enumeration of {D}^{T} points exceeds the guard {guard}")
    active = [s for s, q in enumerate(qs) if q.norm() != 1]
    if not active:
        return Fraction(1)
    rest = np.meshgrid(*(np.arange(D, dtype=np.int64),) * (T - 1), indexing="ij") if T > 1 else []
    rest = [r.ravel() for r in rest]
    count = 0
    for x0 in range(D):
        xs = [np.full(rest[0].shape if rest else (1,), x0, dtype=np.int64)] + rest
        ok = np.ones(xs[0].shape, dtype=bool)
        for s in active:
            re, im = family.evaluate(s, xs, W)
            ok &= _divisible(re, im, qs[s])
        count += int(ok.sum())
    return Fraction(count, D**T)


def _check_sq_unexceptional(q: GaussianInt, W: int, table: GaussPrimeTable):
    if not q:
        raise ValueError("modulus must be nonzero")
    if q.norm() == 1:
        return []
    f = factor(q, table)
    if not f.is_squarefree or any(prime_kind(p) != SPLIT for p, _ in f.factors):
        raise ValueError(f"modulus {q} is not a squarefree product of unexceptional primes")
    if gcd(q, W).norm() != 1:
        raise ValueError(f"modulus {q} is not coprime to W={W}")
    return [p for p, _ in f.factors]


def omega_crt(moduli: Sequence[GaussLike], family: LinearFormFamily, W: int, table: GaussPrimeTable) -> Fraction:
    """Product over prime norms n of the local densities at ``gcd(q_s, n)``."""
    qs = [as_gint(q) for q in moduli]
    norms = set()
    for q in qs:
        norms.update(p.norm() for p in _check_sq_unexceptional(q, W, table))
    out = Fraction(1)
    for n in sorted(norms):
        local = [gcd(q, n) for q in qs]
        out *= omega_bruteforce(local, family, W)
        if out == 0:
            break
    return out


def _residue_of_i(p: GaussianInt) -> int:
    n = p.norm()
    return (-p.re * pow(p.im, -1, n)) % n


@dataclass(frozen=True)
class LocalPrediction:
    kind: str  # "unit", "prime", "higher" or "degenerate"
    predicted: Fraction | None
    value: Fraction
    witness: Fraction | None = None
    notice: str | None = None

    def to_dict(self) -> dict:
        fmt = lambda q: None if q is None else str(q)  # noqa: E731
        return {"kind": self.kind, "predicted": fmt(self.predicted), "value": fmt(self.value),
                "witness": fmt(self.witness), "notice": self.notice}


def local_prediction(n: int, divisors: Sequence[GaussLike], family: LinearFormFamily, W: int,
                     table: GaussPrimeTable) -> LocalPrediction:
    """Classify the local density at the split prime ``n`` for divisors ``d_s | n``.

    Conditions are the pairs ``(s, p)`` with ``p | d_s``.  Each one is a linear
    equation over ``F_n`` in ``x`` with coefficient vector ``iota_p(L_s)``; when
    these vectors are pairwise independent the density is 1, 1/n, or at most
    ``1/n**2``.  Dependent pairs are reported as degenerate with the exact value.
    """
    ds = [as_gint(d) for d in divisors]
    if len(ds) != family.S:
        raise ValueError("one divisor per form")
    if n % 4 != 1 or not table.is_prime_norm(n):
        raise ValueError(f"{n} is not a split rational prime")
    if W % n == 0:
        raise ValueError(f"n={n} divides W")
    p, pb = table.split_of(n)
    conds = []
    for s, d in enumerate(ds):
        if d.norm() == 1:
            continue
        if not divides(d, n):
            raise ValueError(f"divisor {d} does not divide {n}")
        conds.extend((s, q) for q in (p, pb) if divides(q, d))
    value = omega_bruteforce(ds, family, W)
    if not conds:
        return LocalPrediction("unit", Fraction(1), value)
    vecs = []
    for s, q in conds:
        r = _residue_of_i(q)
        vecs.append([(c.re + c.im * r) % n for c in family.forms[s]])
    notice = None
    for k, v in enumerate(vecs):
        if not any(v):
            notice = f"form {conds[k][0]} vanishes modulo {conds[k][1]}"
    for k in range(len(vecs)):
        for m in range(k + 1, len(vecs)):
            u, v = vecs[k], vecs[m]
            T = len(u)
            if all((u[a] * v[b] - u[b] * v[a]) % n == 0 for a in range(T) for b in range(a + 1, T)):
                notice = notice or f"conditions {conds[k]} and {conds[m]} are dependent modulo {n}"
    if notice:
        return LocalPrediction("degenerate", None, value, None, notice)
    if len(conds) == 1:
        return LocalPrediction("prime", Fraction(1, n), value)
    return LocalPrediction("higher", None, value, value * n * n)


# -- zeta products --------------------------------------------------------------

def zeta_tail_bound(s: complex, cutoff: float) -> float:
    """Upper bound ``sum_{n > cutoff} 2 n^-sigma <= 2 cutoff^(1-sigma)/(sigma-1)``, sigma = Re s."""
    sigma = complex(s).real
    return 2.0 * float(cutoff) ** (1.0 - sigma) / (sigma - 1.0)


def truncated_zeta_log(s: complex, w: int, cutoff: int, table: GaussPrimeTable) -> complex:
    s = complex(s)
    if s.real <= 1:
        raise ValueError("need Re s > 1")
    if table.norm_bound < cutoff:
        from .sieve import CoverageError

        raise CoverageError(cutoff)
    q = table.rational_primes
    q = q[(q % 4 == 1) & (q >= w) & (q <= cutoff)].astype(float)
    if q.size == 0:
        return 0j
    terms = -np.log1p(-np.exp(-s * np.log(q)))
    return complex(2.0 * math.fsum(terms.real) + 2j * math.fsum(terms.imag))


def truncated_zeta(s: complex, w: int, cutoff: int, table: GaussPrimeTable, tail_correction: bool = False) -> complex:
    """``prod (1 - N(p)^-s)^-1`` over canonical unexceptional p with ``w <= N(p) <= cutoff``.

    With ``tail_correction`` the logarithm is increased by the prime-density
    estimate ``E1((s-1) log cutoff)`` of the omitted primes.
    """
    lg = truncated_zeta_log(s, w, cutoff, table)
    log.debug("truncated_zeta(s=%s, cutoff=%s): tail bound %.3g", s, cutoff, zeta_tail_bound(s, cutoff))
    if tail_correction and cutoff >= w:
        lg += complex(special.exp1((complex(s) - 1) * math.log(cutoff)))
    return complex(np.exp(lg))


@dataclass(frozen=True)
class ZetaRemainder:
    value: float
    sigma: float
    partial_sum: float
    tail: float
    bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def zeta_gauss_remainder(sigma: float, lattice_cutoff: int = 10**6, bound: float = 5.0) -> ZetaRemainder:
    """``sum_{n != 0} N(n)^-sigma - pi/(sigma - 1)`` with an integral tail past the cutoff.

    The tail ``pi X^(1-sigma)/(sigma-1)`` is corrected by the lattice-count defect
    at ``X`` (partial summation).
    """
    if not 1 < sigma <= 1.5:
        raise ValueError("sigma must lie in (1, 1.5]")
    X = int(lattice_cutoff)
    r = math.isqrt(X)
    total = 0.0
    count = 0
    ax = np.arange(-r, r + 1, dtype=np.int64)
    for a in ax:
        nn = a * a + ax * ax
        nn = nn[(nn > 0) & (nn <= X)].astype(float)
        count += nn.size
        total += math.fsum(nn ** (-sigma))
    defect = (count + 1) - math.pi * X  # include the origin in the lattice count
    tail = math.pi * X ** (1 - sigma) / (sigma - 1) - defect * X ** (-sigma)
    value = total + tail - math.pi / (sigma - 1)
    return ZetaRemainder(value, sigma, total, tail, bound)


# -- the GY constant ------------------------------------------------------------

def c_phi_prime(phi: BumpFunction | str, resolution: int = 200) -> float:
    """``(64/pi) * integral_0^inf phi'(x)**2 dx``."""
    phi = BumpFunction.from_name(phi)
    val = 64.0 / math.pi * phi.dirichlet_energy(resolution)
    if not val > 0:
        raise ArithmeticError("c'_phi must be positive")
    return val


def _linear_knots(phi: BumpFunction) -> tuple[np.ndarray, np.ndarray] | None:
    """Knots and values on ``[-1, 1]`` when ``phi`` is piecewise linear, else None."""
    if phi.kind == "triangle":
        return np.array([-1.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])
    if phi.kind == "sampled":
        return np.concatenate([-phi.xs[:0:-1], phi.xs]), np.concatenate([phi.ys[:0:-1], phi.ys])
    return None


def psi_transform(phi: BumpFunction, t: np.ndarray, x_points: int = 4001) -> np.ndarray:
    """``psi(t) = (1/2pi) integral e^x phi(x) e^{ixt} dx``.

    Piecewise-linear bumps are integrated exactly piece by piece; other bumps use
    the trapezoid rule on ``x_points`` nodes of ``[-1, 1]``.
    """
    t = np.asarray(t, dtype=float)
    knots = _linear_knots(phi)
    if knots is not None:
        # integrating by parts twice leaves only the slope jumps: -(1/z^2) sum_k slope_k (e^{z x_k+1} - e^{z x_k})
        x, y = knots
        slopes = np.diff(y) / np.diff(x)
        z = 1.0 + 1j * t
        ez = np.exp(np.multiply.outer(z, x))
        return -(np.diff(ez, axis=-1) @ slopes) / (z * z) / (2 * math.pi)
    x = np.linspace(-1.0, 1.0, x_points)
    dx = x[1] - x[0]
    g = np.exp(x) * phi(x) * dx
    g[[0, -1]] *= 0.5
    out = np.empty(t.shape, dtype=complex)
    for i in range(0, t.size, 2048):
        tt = t[i:i + 2048]
        out[i:i + 2048] = np.exp(1j * np.outer(tt, x)) @ g
    return out / (2 * math.pi)


def c_phi_prime_fourier(phi: BumpFunction | str, t_cutoff: float | None = None, dt: float = 0.02) -> float:
    """Fourier-side value ``(64/pi) iint (1+it)(1+it')/(2+it+it') psi(t) psi(t') dt dt'``.

    The double integral is reduced to one integral over ``s = t + t'`` of the
    self-convolution of ``(1+it) psi(t)``.  The truncation error decays like
    ``1/t_cutoff`` for kinked bumps, so those default to a longer range.
    """
    from scipy.signal import fftconvolve

    phi = BumpFunction.from_name(phi)
    if t_cutoff is None:
        t_cutoff = 400.0 if _linear_knots(phi) is None else 8000.0
    n = int(round(t_cutoff / dt))
    t = np.arange(-n, n + 1) * dt
    A = (1 + 1j * t) * psi_transform(phi, t)
    F = fftconvolve(A, A) * dt  # F(s) on s = -2n..2n
    s = np.arange(-2 * n, 2 * n + 1) * dt
    val = np.sum(F / (2 + 1j * s)) * dt
    return 64.0 / math.pi * float(val.real)


def gy_main_term(size_S: int, W: int, R: float, phi: BumpFunction | str, table: GaussPrimeTable,
                 phi_W: int | None = None) -> float:
    """``(c_phi N(W) log N(R) / phi(W))**|S|`` with the per-form constant ``c_phi = c'_phi / 16``."""
    phi = BumpFunction.from_name(phi)
    if size_S == 0:
        return 1.0
    phi_W = gaussian_totient(W, table) if phi_W is None else phi_W
    L = math.log(float(R) ** 2)
    return (gy_constant(phi) * W * W * L / phi_W) ** size_S


@dataclass(frozen=True)
class EmpiricalAverage:
    value: float
    stderr: float
    points: int
    exhaustive: bool
    seed: int | None
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["warnings"] = list(self.warnings)
        return d


def empirical_gy(family: LinearFormFamily, box: Sequence[tuple[int, int]], R: float, W: int,
                 phi: BumpFunction | str, table: GaussPrimeTable, *, budget: int = 2_000_000,
                 samples: int = 500_000, seed: int = 0, side_floor: int | None = None,
                 chunk: int = 1 << 18) -> EmpiricalAverage:
    """Average of ``prod_s Lambda_R(W (L_s . x) + a_s)**2`` over the box ``prod [lo, hi)``."""
    phi = BumpFunction.from_name(phi)
    if len(box) != family.T:
        raise ValueError("box needs one interval per coordinate")
    for a in family.shifts:
        if gcd(a, W).norm() != 1:
            raise ValueError(f"shift {a} is not coprime to W={W}")
    warns = []
    need = float(R) ** (10 * family.S)
    floor = need if side_floor is None else side_floor
    if any(hi - lo < floor for lo, hi in box):
        raise ValueError(f"box sides must be at least {floor:.3g}")
    if any(hi - lo < need for lo, hi in box):
        warns.append(f"box sides relaxed below R^(10|S|) = {need:.3g}")
    primes = SplitPrimeData.from_table(table, float(R) ** 2)
    sides = [hi - lo for lo, hi in box]
    volume = math.prod(sides)
    exhaustive = volume <= budget
    rng = np.random.default_rng(seed)

    def values(xs):
        out = np.ones(xs[0].shape, dtype=float)
        for s in range(family.S):
            re, im = family.evaluate(s, xs, W)
            lam = truncated_mangoldt_array(re, im, R, phi, table, primes)
            out *= lam * lam
        return out

    parts = []
    if exhaustive:
        flat = np.arange(volume, dtype=np.int64)
        for i in range(0, volume, chunk):
            idx = np.unravel_index(flat[i:i + chunk], sides)
            parts.append(values([lo + k for (lo, _), k in zip(box, idx)]))
    else:
        for i in range(0, samples, chunk):
            m = min(chunk, samples - i)
            parts.append(values([rng.integers(lo, hi, m) for lo, hi in box]))
    v = np.concatenate(parts) if parts else np.ones(1)
    se = 0.0 if exhaustive else float(v.std(ddof=1) / math.sqrt(v.size))
    return EmpiricalAverage(float(v.mean()), se, int(v.size), exhaustive, None if exhaustive else seed, tuple(warns))


# -- correlation bounds -------------------------------------------------------------

@dataclass(frozen=True)
class DeltaQuantity:
    value: int

    @property
    def is_zero(self) -> bool:
        return self.value == 0


def delta(h: Sequence[GaussLike], v: GaussLike, b: GaussLike, W: int) -> DeltaQuantity:
    hs = [as_gint(x) for x in h]
    v, b = as_gint(v), as_gint(b)
    out = 1
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            out *= (hs[i] - hs[j]).norm()
    for i in range(len(hs)):
        for j in range(i, len(hs)):
            z = W * (hs[i] * v.conj() - hs[j].conj() * v) - b * v.conj() + b.conj() * v
            out *= z.norm()
    return DeltaQuantity(out)


def _split_prime_factor(m: int, W: int, kappa: float, power: int, table: GaussPrimeTable) -> float:
    """``prod (1 + kappa N(p)^-1/2)^power`` over canonical unexceptional p coprime to W with ``p | m``.

    Both classes above a rational prime ``q | m`` divide the rational integer m.
    Only primes inside the table are seen.
    """
    m = abs(int(m))
    out = 1.0
    for q, _ in _rational_factors_in_table(m, table):
        if q % 4 == 1 and W % q:
            out *= (1.0 + kappa / math.sqrt(q)) ** (2 * power)
    return out


def _rational_factors_in_table(m: int, table: GaussPrimeTable) -> list[tuple[int, int]]:
    out = []
    for q in table._prime_list:
        if m == 1:
            break
        if m % q == 0:
            e = 0
            while m % q == 0:
                m //= q
                e += 1
            out.append((q, e))
    return out


def tau_bound(x: GaussLike, kind: int, m: int, v: GaussLike, b: GaussLike, W: int, table: GaussPrimeTable,
              kappa: float = 1.0, radius: float | None = None) -> float:
    """The correlation weights: kind 1 uses ``N(x)``, kinds 2 and 3 use ``N(Wx - b conj(v) + conj(b) v)``."""
    x, v, b = as_gint(x), as_gint(v), as_gint(b)
    if radius is not None and x.norm() > radius * radius:
        return 0.0
    if kind == 1:
        arg = x
    elif kind in (2, 3):
        arg = W * x - b * v.conj() + b.conj() * v
    else:
        raise ValueError("kind must be 1, 2 or 3")
    if not arg:
        raise ValueError("diagonal case: the argument vanishes, use the crude divisor bound")
    return _split_prime_factor(arg.norm(), W, kappa, m * m, table)


@dataclass
class CorrelationReport:
    lhs: float
    rhs: float
    main_term: float
    delta: int
    delta_factor: float
    margin: float
    passed: bool
    points: int
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def correlation_check(v: GaussLike, h: Sequence[GaussLike], *, W: int, b: GaussLike, R: float,
                      phi: BumpFunction | str, table: GaussPrimeTable, interval: tuple[int, int],
                      kappa: float = 1.0, margin: float = 5.0, phi_W: int | None = None) -> CorrelationReport:
    """Compare ``E_n prod_j Lambda_R(W(h_j + n v) + b)**2`` with its Delta-weighted bound."""
    phi = BumpFunction.from_name(phi)
    v, b = as_gint(v), as_gint(b)
    hs = [as_gint(x) for x in h]
    D = delta(hs, v, b, W)
    if D.is_zero:
        raise ValueError("Delta vanishes: use the crude divisor bound for this configuration")
    phi_W = gaussian_totient(W, table) if phi_W is None else phi_W
    primes = SplitPrimeData.from_table(table, float(R) ** 2)
    n = np.arange(interval[0], interval[1], dtype=np.int64)
    prod = np.ones(n.shape)
    for hj in hs:
        lam = truncated_mangoldt_array(W * (hj.re + n * v.re) + b.re, W * (hj.im + n * v.im) + b.im, R, phi, table, primes)
        prod *= lam * lam
    L = math.log(float(R) ** 2)
    main = (W * W * L / phi_W) ** len(hs)
    dfac = _split_prime_factor(D.value, W, kappa, 1, table)
    rhs = main * dfac
    lhs = float(prod.mean())
    return CorrelationReport(
        lhs, rhs, main, D.value, dfac, margin, lhs <= margin * rhs, int(n.size),
        {"v": v.to_pair(), "h": [x.to_pair() for x in hs], "W": W, "b": b.to_pair(), "R": R,
         "phi": phi.to_dict(), "kappa": kappa, "interval": list(interval)},
    )
