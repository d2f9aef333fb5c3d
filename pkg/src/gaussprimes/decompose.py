"""Finite sigma-algebras, dual-function partitions and the energy-increment tower."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxnorm import DEFAULT_BUDGET, EdgeFunction, box_norm, dual_function


@dataclass(frozen=True)
class Partition:
    """A sigma-algebra on a finite grid given by an atom label per point (labels dense from 0)."""

    atom_of: np.ndarray
    atom_count: int

    @classmethod
    def from_labels(cls, labels) -> Partition:
        labels = np.asarray(labels)
        _, inv = np.unique(labels.ravel(), return_inverse=True)
        inv = inv.reshape(labels.shape)
        return cls(inv, int(inv.max()) + 1 if inv.size else 0)

    @classmethod
    def trivial(cls, shape) -> Partition:
        return cls(np.zeros(shape, dtype=np.int64), 1)

    @classmethod
    def discrete(cls, shape) -> Partition:
        n = math.prod(shape)
        return cls(np.arange(n).reshape(shape), n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.atom_of.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.atom_of.ravel(), minlength=self.atom_count)

    def join(self, other: Partition) -> Partition:
        if other.shape != self.shape:
            raise ValueError("partitions live on different domains")
        return Partition.from_labels(self.atom_of.astype(np.int64) * other.atom_count + other.atom_of)

    def refines(self, other: Partition) -> bool:
        """True if every atom of ``self`` lies inside one atom of ``other``."""
        pairs = np.unique(np.stack([self.atom_of.ravel(), other.atom_of.ravel()]), axis=1)
        return pairs.shape[1] == self.atom_count

    def is_measurable(self, mask: np.ndarray) -> bool:
        m = np.asarray(mask, dtype=bool).ravel()
        a = self.atom_of.ravel()
        hits = np.bincount(a, weights=m, minlength=self.atom_count)
        return bool(np.all((hits == 0) | (hits == self.sizes())))

    def to_dict(self) -> dict:
        return {"atom_count": self.atom_count, "shape": list(self.shape)}


def _values(f) -> np.ndarray:
    return f.dense() if isinstance(f, EdgeFunction) else np.asarray(f, dtype=float)


def cond_exp(f, B: Partition) -> np.ndarray:
    """``E(f | B)``: the atomwise mean, as an array on the domain."""
    v = _values(f)
    if v.shape != B.shape:
        raise ValueError(f"function shape {v.shape} does not match partition {B.shape}")
    a = B.atom_of.ravel()
    sums = np.bincount(a, weights=v.ravel(), minlength=B.atom_count)
    means = sums / np.maximum(B.sizes(), 1)
    return means[a].reshape(B.shape)


@dataclass(frozen=True)
class DualSigma:
    partition: Partition
    alpha: float
    boundary_mass: float
    bound: float
    grid: int


def sigma_from_function(G, epsilon: float, sigma: float, nu=None) -> DualSigma:
    """Atoms ``G^-1([eps(n+alpha), eps(n+1+alpha)))`` with alpha minimizing the boundary mass.

    The boundary mass of alpha is ``sum_n E(1{G in [eps(n-sigma+alpha), eps(n+sigma+alpha)]} (nu+1))``.
    Alpha ranges over ``ceil(1/sigma**2)`` equispaced points of ``[0, 1)``.  The grid
    minimum never exceeds the grid average, which is at most ``(2 sigma + 1/m) E(nu+1)``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < sigma < 0.5:
        raise ValueError("sigma must lie in (0, 1/2)")
    g = _values(G)
    wts = np.ones_like(g) if nu is None else _values(nu)
    wts = (wts + 1.0).ravel()
    total = g.size
    m = math.ceil(1.0 / sigma**2)
    u = np.mod(g.ravel() / epsilon, 1.0)
    # point with fractional part u is on the boundary for alpha in [u - sigma, u + sigma] (mod 1)
    lo = np.ceil((u - sigma) * m - 1e-9).astype(np.int64)
    hi = np.floor((u + sigma) * m + 1e-9).astype(np.int64)
    diff = np.zeros(m + 1)
    span = hi - lo + 1
    full = span >= m
    diff[0] += wts[full].sum()
    lo, hi, w = lo[~full], hi[~full], wts[~full]
    lo_m, hi_m = np.mod(lo, m), np.mod(hi, m)
    wrap = lo_m > hi_m
    np.add.at(diff, lo_m[~wrap], w[~wrap])
    np.add.at(diff, hi_m[~wrap] + 1, -w[~wrap])
    np.add.at(diff, lo_m[wrap], w[wrap])
    diff[m] -= w[wrap].sum()
    diff[0] += w[wrap].sum()
    np.add.at(diff, hi_m[wrap] + 1, -w[wrap])
    mass = np.cumsum(diff[:m]) / total
    k = int(np.argmin(mass))
    alpha = k / m
    labels = np.floor(g / epsilon - alpha).astype(np.int64)
    bound = (2 * sigma + 1.0 / m) * wts.sum() / total
    return DualSigma(Partition.from_labels(labels), alpha, float(mass[k]), float(bound), m)


@dataclass(frozen=True)
class SmallAtoms:
    omega: np.ndarray
    masses: np.ndarray
    small: np.ndarray
    omega_mass: float
    deviation: np.ndarray  # |E(nu - 1 | A)| for atoms outside Omega (nan on small atoms)


def find_small_atoms(B: Partition, nu, sigma: float) -> SmallAtoms:
    """Union of atoms ``A`` with ``E((nu+1) 1_A) <= sigma**0.5``."""
    v = _values(nu) if nu is not None else np.ones(B.shape)
    a = B.atom_of.ravel()
    total = v.size
    masses = np.bincount(a, weights=(v + 1.0).ravel(), minlength=B.atom_count) / total
    small = masses <= math.sqrt(sigma)
    omega = small[a].reshape(B.shape)
    means = np.bincount(a, weights=v.ravel(), minlength=B.atom_count) / np.maximum(B.sizes(), 1)
    dev = np.where(small, np.nan, np.abs(means - 1.0))
    return SmallAtoms(omega, masses, small, float(masses[small].sum()), dev)


def energy(f, B: Partition, omega: np.ndarray | None = None) -> float:
    """``E((1 - 1_Omega) E(f|B)**2)``."""
    ce = cond_exp(f, B)
    if omega is None:
        return float(np.mean(ce**2))
    if not B.is_measurable(omega):
        raise ValueError("Omega is not measurable with respect to B")
    return float(np.mean(np.where(omega, 0.0, ce**2)))


@dataclass
class TowerState:
    K: int
    B: Partition
    Omega: np.ndarray
    epsilon: float
    sigma: float
    d: int
    terminated: bool
    box_norms: list[float] = field(default_factory=list)
    atom_counts: list[int] = field(default_factory=list)
    omega_masses: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    generators: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def threshold(self) -> float:
        return self.epsilon ** (1.0 / 2 ** (self.d + 1))

    @property
    def final_box_norm(self) -> float:
        return self.box_norms[-1]

    def energy_slacks(self) -> list[float]:
        """Per-step decrease ``max(0, E_{j-1} - E_j)`` of the energy."""
        e = self.energies
        return [max(0.0, e[j - 1] - e[j]) for j in range(1, len(e))]

    def to_dict(self) -> dict:
        return {
            "K": self.K, "terminated": self.terminated, "epsilon": self.epsilon, "sigma": self.sigma,
            "d": self.d, "threshold": self.threshold, "box_norms": self.box_norms,
            "atom_counts": self.atom_counts, "omega_masses": self.omega_masses,
            "energies": self.energies, "alphas": self.alphas, "energy_slacks": self.energy_slacks(),
            "final_atoms": self.B.atom_count,
        }


def tower(f, nu, epsilon: float, sigma: float, K_max: int | None = None, budget: int = DEFAULT_BUDGET) -> TowerState:
    """Refine a sigma-algebra by dual functions until the remainder is box-norm small.

    Each round sets ``F = (1 - 1_Omega)(f - E(f|B))`` and stops when
    ``||F|| <= eps^(1/2^(d+1))`` with ``d = |e|``; otherwise ``B`` is joined with
    the partition generated by ``D F`` and the small atoms are added to ``Omega``.
    """
    fv = _values(f)
    nv = _values(nu)
    if fv.shape != nv.shape:
        raise ValueError("f and nu live on different domains")
    if np.any(fv < -1e-12) or np.any(fv > nv + 1e-12):
        raise ValueError("need 0 <= f <= nu pointwise")
    d = fv.ndim
    edge = tuple(range(d))
    K_max = math.ceil(32 / epsilon) if K_max is None else K_max
    B = Partition.trivial(fv.shape)
    omega = np.zeros(fv.shape, dtype=bool)
    state = TowerState(0, B, omega, epsilon, sigma, d, False)
    state.energies.append(energy(fv, B, omega))
    state.omega_masses.append(0.0)
    state.atom_counts.append(1)
    while True:
        F = np.where(omega, 0.0, fv - cond_exp(fv, B))
        Ff = EdgeFunction(edge, fv.shape, F)
        bn = box_norm(Ff, budget)
        state.box_norms.append(bn)
        if bn <= state.threshold:
            state.terminated = True
            break
        if state.K >= K_max:
            break
        DF = dual_function(Ff, budget).values
        state.generators.append(DF)
        ds = sigma_from_function(DF, epsilon, sigma, nv)
        state.alphas.append(ds.alpha)
        B = B.join(ds.partition)
        small = find_small_atoms(B, nv, sigma)
        omega = omega | small.omega
        state.K += 1
        state.B, state.Omega = B, omega
        state.atom_counts.append(B.atom_count)
        state.omega_masses.append(float(np.mean(np.where(omega, nv + 1.0, 0.0))))
        state.energies.append(energy(fv, B, omega))
    state.B, state.Omega = B, omega
    return state


def random_measure(shape, rng: np.random.Generator, scale: float | None = None) -> np.ndarray:
    """``log N`` with probability ``1/log N`` and 0 otherwise, ``N`` the largest side by default."""
    L = math.log(max(shape)) if scale is None else float(scale)
    if L <= 1:
        raise ValueError("need log N > 1")
    return np.where(rng.random(shape) < 1.0 / L, L, 0.0)


@dataclass(frozen=True)
class UDPReport:
    value: float
    max_dual: float
    K: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def udp_test(nu, generators, budget: int = DEFAULT_BUDGET) -> UDPReport:
    """``|E((nu - 1) prod_k D f_k)|`` and ``max |D(nu + 1)|`` for ``|f_k| <= nu + 1``."""
    nv = _values(nu)
    edge = tuple(range(nv.ndim))
    prod = np.ones_like(nv)
    for g in generators:
        gv = _values(g)
        if gv.shape != nv.shape:
            raise ValueError("generator shape mismatch")
        if np.any(np.abs(gv) > nv + 1 + 1e-12):
            raise ValueError("need |f_k| <= nu + 1 pointwise")
        prod *= dual_function(EdgeFunction(edge, nv.shape, gv), budget).values
    val = abs(float(np.mean((nv - 1.0) * prod)))
    dmax = float(np.abs(dual_function(EdgeFunction(edge, nv.shape, nv + 1.0), budget).values).max())
    return UDPReport(val, dmax, len(generators))
