"""Hypergraph systems, edge functions, box norms and dual functions.

Dense edge functions are numpy arrays with one axis per vertex of the edge,
axes in ascending vertex order.  Averages over cubes are evaluated either by
the nested-square recursion (``box_norm``) or by ``numpy.einsum`` contractions
(dual functions, hypergraph averages, ``Q`` quantities).
"""

from __future__ import annotations

import itertools
import json
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DEFAULT_BUDGET = 10**8

Edge = tuple[int, ...]


class BudgetExceeded(MemoryError):
    """An exact enumeration would exceed the configured budget."""


def _check_budget(terms: float, budget: int) -> None:
    if terms > budget:
        raise BudgetExceeded(f"exact evaluation needs {terms:.3g} terms, budget is {budget:.3g}")


@dataclass(frozen=True)
class HypergraphSystem:
    J: tuple[int, ...]
    sizes: tuple[int, ...]
    d: int
    H: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(self.J))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "H", tuple(tuple(sorted(e)) for e in self.H))
        if len(set(self.J)) != len(self.J):
            raise ValueError("J has repeated indices")
        if len(self.sizes) != len(self.J) or any(s < 1 for s in self.sizes):
            raise ValueError("need one positive size per index of J")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        for e in self.H:
            if len(e) != self.d or not set(e) <= set(self.J) or len(set(e)) != len(e):
                raise ValueError(f"edge {e} is not a {self.d}-subset of J")

    @classmethod
    def simplex(cls, k: int, size: int) -> HypergraphSystem:
        """``J = {0..k-1}`` with all ``(k-1)``-subsets as edges."""
        J = tuple(range(k))
        return cls(J, (size,) * k, k - 1, tuple(itertools.combinations(J, k - 1)))

    @classmethod
    def complete(cls, sizes: Sequence[int], d: int) -> HypergraphSystem:
        J = tuple(range(len(sizes)))
        return cls(J, tuple(sizes), d, tuple(itertools.combinations(J, d)))

    def size(self, j: int) -> int:
        return self.sizes[self.J.index(j)]

    def sizes_of(self, e: Iterable[int]) -> tuple[int, ...]:
        return tuple(self.size(j) for j in e)

    def to_dict(self) -> dict:
        return {"J": list(self.J), "sizes": list(self.sizes), "d": self.d, "H": [list(e) for e in self.H]}

    @classmethod
    def from_dict(cls, d: Mapping) -> HypergraphSystem:
        return cls(tuple(d["J"]), tuple(d["sizes"]), int(d["d"]), tuple(tuple(e) for e in d["H"]))


@dataclass
class EdgeFunction:
    """A real function on ``V_e``, stored densely or given by a vectorized rule.

    ``rule(*coords)`` receives one integer array per vertex of ``edge`` (all
    broadcastable to a common shape) and returns values of that shape.
    """

    edge: Edge
    shape: tuple[int, ...]
    values: np.ndarray | None = None
    rule: Callable[..., np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.edge = tuple(self.edge)
        self.shape = tuple(int(s) for s in self.shape)
        if len(self.edge) != len(self.shape):
            raise ValueError("edge and shape lengths differ")
        if list(self.edge) != sorted(set(self.edge)):
            raise ValueError("edge vertices must be distinct and ascending")
        if (self.values is None) == (self.rule is None):
            raise ValueError("give exactly one of values or rule")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float).reshape(self.shape)

    @property
    def is_lazy(self) -> bool:
        return self.values is None

    def dense(self, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        if self.values is not None:
            return self.values
        _check_budget(math.prod(self.shape), budget)
        grids = np.meshgrid(*(np.arange(n) for n in self.shape), indexing="ij", sparse=True)
        return np.asarray(self.rule(*grids), dtype=float).reshape(self.shape)

    def materialize(self, budget: int = DEFAULT_BUDGET) -> EdgeFunction:
        return EdgeFunction(self.edge, self.shape, self.dense(budget))

    def __call__(self, *coords) -> np.ndarray:
        if self.values is not None:
            return self.values[tuple(np.asarray(c, dtype=np.intp) for c in coords)]
        return np.asarray(self.rule(*coords), dtype=float)

    def mean(self, budget: int = DEFAULT_BUDGET) -> float:
        return float(self.dense(budget).mean())

    @classmethod
    def constant(cls, edge: Sequence[int], shape: Sequence[int], value: float = 1.0) -> EdgeFunction:
        return cls(tuple(edge), tuple(shape), np.full(tuple(shape), float(value)))

    @classmethod
    def on(cls, system: HypergraphSystem, edge: Sequence[int], values) -> EdgeFunction:
        e = tuple(sorted(edge))
        return cls(e, system.sizes_of(e), np.asarray(values, dtype=float))


# -- box norms ----------------------------------------------------------------

def _cube_power(arr: np.ndarray, nb: int) -> np.ndarray:
    """``E prod_omega f(x^omega)`` over the cube, batched over the first ``nb`` axes.

    Nested squares: pairing the two copies of one coordinate turns ``f`` into a
    batch of products on one fewer coordinate.
    """
    d = arr.ndim - nb
    if d == 0:
        return arr
    if d == 1:
        return arr.mean(axis=-1) ** 2
    # pair the smallest remaining axis first so the final batch is as small as possible
    axis = nb + int(np.argmin(arr.shape[nb:]))
    a = np.moveaxis(arr, axis, nb)
    n = a.shape[nb]
    prod = a[(slice(None),) * nb + (slice(None), None)] * a[(slice(None),) * nb + (None, slice(None))]
    prod = prod.reshape(a.shape[:nb] + (n * n,) + a.shape[nb + 1:])
    inner = _cube_power(prod, nb + 1)
    return inner.mean(axis=-1)


def box_norm_power(f: EdgeFunction, budget: int = DEFAULT_BUDGET) -> float:
    """``E prod_{omega in {0,1}^e} f(x^omega)``, i.e. the norm raised to ``2**|e|``."""
    vals = f.dense(budget)
    d = vals.ndim
    if d == 0:
        return float(vals)
    _check_budget(math.prod(vals.shape) ** 2 / max(vals.shape), budget)
    return float(_cube_power(vals, 0))


def box_norm(f: EdgeFunction, budget: int = DEFAULT_BUDGET) -> float:
    """Gowers box norm of ``f`` over its own edge.

    For an empty edge the signed value of the constant function is returned;
    this is the only case in which the result can be negative.
    """
    p = box_norm_power(f, budget)
    d = len(f.edge)
    if d == 0:
        return p
    return max(p, 0.0) ** (1.0 / 2**d)


def _letters(k: int) -> tuple[str, str]:
    if 2 * k > 52:
        raise ValueError("too many vertices for einsum labelling")
    return string.ascii_lowercase[:k], string.ascii_uppercase[:k]


def dual_function(f: EdgeFunction, budget: int = DEFAULT_BUDGET) -> EdgeFunction:
    """``D f(x^0) = E_{x^1} prod_{omega != 0} f(x^omega)`` as a dense edge function."""
    vals = f.dense(budget)
    d = vals.ndim
    if d == 0:
        raise ValueError("dual function needs a nonempty edge")
    _check_budget(math.prod(vals.shape) ** 2, budget)
    lo, up = _letters(d)
    ops, subs = [], []
    for omega in itertools.product((0, 1), repeat=d):
        if not any(omega):
            continue
        subs.append("".join(up[j] if w else lo[j] for j, w in enumerate(omega)))
        ops.append(vals)
    # output letters absent from every operand (only when |e| = 1) are broadcast afterwards
    keep = "".join(c for c in lo if any(c in s for s in subs))
    out = np.einsum(",".join(subs) + "->" + keep, *ops, optimize=True) / math.prod(vals.shape)
    out = np.broadcast_to(np.expand_dims(out, [j for j, c in enumerate(lo) if c not in keep]), vals.shape).copy()
    return EdgeFunction(f.edge, f.shape, out)


def _index_map(system: HypergraphSystem) -> dict[int, int]:
    return {j: k for k, j in enumerate(system.J)}


def gvn_average(system: HypergraphSystem, funcs: Mapping[Edge, EdgeFunction], budget: int = DEFAULT_BUDGET) -> float:
    """``E_{x in V_J} prod_{e in H} f_e(x_e)``."""
    missing = set(system.H) - set(map(tuple, funcs))
    if missing:
        raise ValueError(f"missing edge functions for {sorted(missing)}")
    _check_budget(math.prod(system.sizes), budget)
    idx = _index_map(system)
    lo, _ = _letters(len(system.J))
    subs = ["".join(lo[idx[j]] for j in e) for e in system.H]
    ops = [funcs[e].dense(budget) for e in system.H]
    total = np.einsum(",".join(subs) + "->", *ops, optimize=True)
    return float(total) / math.prod(system.sizes)


def q_quantity(
    Jp: Iterable[int], system: HypergraphSystem, funcs: Mapping[Edge, EdgeFunction],
    measures: Mapping[Edge, EdgeFunction] | None = None, budget: int = DEFAULT_BUDGET, check: bool = True,
) -> float:
    """Cauchy-Schwarz quantity with doubled variables on ``Jp``.

    Edges containing ``Jp`` contribute ``f_e`` at every corner of ``{0,1}^Jp``;
    the other edges contribute ``nu_e`` at every corner of ``{0,1}^(e & Jp)``.
    Missing measures default to 1.
    """
    Jp = tuple(sorted(set(Jp)))
    if not set(Jp) <= set(system.J):
        raise ValueError("Jp must be a subset of J")
    idx = _index_map(system)
    lo, up = _letters(len(system.J))
    ops, subs = [], []
    for e in system.H:
        f = funcs[e].dense(budget)
        nu = measures[e].dense(budget) if measures is not None and e in measures else None
        if check:
            bound = 1.0 if nu is None else nu
            if np.any(np.abs(f) > bound + 1e-12):
                raise ValueError(f"|f_e| <= nu_e fails on edge {e}")
        if set(Jp) <= set(e):
            doubled, arr = Jp, f
        else:
            doubled = tuple(j for j in e if j in Jp)
            if nu is None:
                continue
            arr = nu
        for omega in itertools.product((0, 1), repeat=len(doubled)):
            w = dict(zip(doubled, omega))
            subs.append("".join(up[idx[j]] if w.get(j) else lo[idx[j]] for j in e))
            ops.append(arr)
    norm = math.prod(system.sizes) * math.prod(system.size(j) for j in Jp)
    _check_budget(norm, budget)
    if not ops:
        return 1.0
    total = np.einsum(",".join(subs) + "->", *ops, optimize=True)
    # letters for variables that appear in no operand still count in the average
    used = set("".join(subs))
    free = math.prod(system.size(j) for j in system.J if lo[idx[j]] not in used)
    free *= math.prod(system.size(j) for j in Jp if up[idx[j]] not in used)
    return float(total) * free / norm


def lower_order_correlation(
    f: EdgeFunction, sets: Mapping[Edge, np.ndarray], budget: int = DEFAULT_BUDGET,
) -> float:
    """``E_{x_e} f(x_e) prod_{e' < e} 1_{E_e'}(x_e')`` for boolean arrays on proper sub-edges."""
    vals = f.dense(budget)
    e = f.edge
    pos = {j: k for k, j in enumerate(e)}
    lo, _ = _letters(len(e))
    ops, subs = [vals], [lo[: len(e)]]
    for ep, mask in sets.items():
        ep = tuple(sorted(ep))
        if not set(ep) < set(e):
            raise ValueError(f"{ep} is not a proper subset of {e}")
        m = np.asarray(mask, dtype=float)
        if m.shape != tuple(f.shape[pos[j]] for j in ep):
            raise ValueError(f"set on {ep} has shape {m.shape}")
        ops.append(m)
        subs.append("".join(lo[pos[j]] for j in ep))
    total = np.einsum(",".join(subs) + "->", *ops, optimize=True)
    return float(total) / math.prod(f.shape)


# -- group lift ---------------------------------------------------------------

@dataclass(frozen=True)
class FiniteGroup:
    """Finite abelian group given by its addition table on element indices ``0..n-1``."""

    add: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        a = np.asarray(self.add, dtype=np.int64)
        n = a.shape[0]
        if a.shape != (n, n) or a.min() < 0 or a.max() >= n:
            raise ValueError("addition table must be n x n with entries in range")
        object.__setattr__(self, "add", a)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(n)))

    @property
    def order(self) -> int:
        return self.add.shape[0]

    @property
    def zero(self) -> int:
        for z in range(self.order):
            if np.array_equal(self.add[z], np.arange(self.order)):
                return z
        raise ValueError("no identity element")

    def neg(self) -> np.ndarray:
        return np.argmax(self.add == self.zero, axis=1)

    def sum(self, elems: Sequence[np.ndarray]) -> np.ndarray:
        out = np.full(np.broadcast(*elems).shape if len(elems) > 1 else np.shape(elems[0]), self.zero)
        for x in elems:
            out = self.add[out, x]
        return out

    @classmethod
    def cyclic(cls, n: int) -> FiniteGroup:
        r = np.arange(n)
        return cls((r[:, None] + r[None, :]) % n)

    @classmethod
    def product(cls, *moduli: int) -> FiniteGroup:
        elems = list(itertools.product(*(range(m) for m in moduli)))
        index = {e: k for k, e in enumerate(elems)}
        table = np.array([[index[tuple((a + b) % m for a, b, m in zip(x, y, moduli))] for y in elems] for x in elems])
        return cls(table, tuple(elems))


def check_homomorphism(phi: np.ndarray, Z: FiniteGroup, Zp: FiniteGroup, samples: int = 200, seed: int = 0) -> bool:
    phi = np.asarray(phi)
    n = Z.order
    if n * n <= samples:
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        a, b = a.ravel(), b.ravel()
    else:
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, n, samples), rng.integers(0, n, samples)
    return bool(np.all(phi[Z.add[a, b]] == Zp.add[phi[a], phi[b]]))


@dataclass(frozen=True)
class GroupLift:
    system: HypergraphSystem
    edge_sets: dict[Edge, np.ndarray]  # boolean array over V_J (axis j = vertex j)
    Phi: Callable[[Sequence[np.ndarray]], tuple[np.ndarray, np.ndarray]]


def lift_to_hypergraph(A: Iterable[int], homs: Sequence[np.ndarray], Z: FiniteGroup, Zp: FiniteGroup) -> GroupLift:
    """Edge sets ``E_e = {x : sum_i phi_i(x_i) - phi_j(x_i) in A}`` for ``e = J - {j}``.

    Also returns ``Phi(x) = (sum_i phi_i(x_i), -sum_i x_i)``.  Edge sets are boolean
    arrays over the full product ``Z^J``; membership does not depend on ``x_j``.
    """
    homs = [np.asarray(h, dtype=np.int64) for h in homs]
    for h in homs:
        if h.shape != (Z.order,) or not check_homomorphism(h, Z, Zp):
            raise ValueError("each phi_j must be a homomorphism Z -> Z' given as an index array")
    k = len(homs)
    system = HypergraphSystem.simplex(k, Z.order)
    inA = np.zeros(Zp.order, dtype=bool)
    inA[list(A)] = True
    negp = Zp.neg()
    grids = np.meshgrid(*(np.arange(Z.order),) * k, indexing="ij")
    sets = {}
    for j in range(k):
        terms = [Zp.add[homs[i][grids[i]], negp[homs[j][grids[i]]]] for i in range(k)]
        sets[tuple(i for i in range(k) if i != j)] = inA[Zp.sum(terms)]

    def Phi(xs):
        a = Zp.sum([homs[i][np.asarray(x)] for i, x in enumerate(xs)])
        r = Z.neg()[Z.sum([np.asarray(x) for x in xs])]
        return a, r

    return GroupLift(system, sets, Phi)


# -- persistence --------------------------------------------------------------

MAGIC = b"GPEDGE1\n"


def save_edge_function(f: EdgeFunction, path: str | Path, J: Sequence[int] | None = None) -> None:
    vals = f.dense()
    header = {"J": list(J) if J is not None else list(f.edge), "edge": list(f.edge), "sizes": list(f.shape), "dtype": "<f8"}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def load_edge_function(path: str | Path) -> EdgeFunction:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not an edge-function file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header.get("dtype", "<f8"))
    shape = tuple(header["sizes"])
    if data.size != math.prod(shape):
        raise ValueError(f"{path}: expected {math.prod(shape)} values, found {data.size}")
    return EdgeFunction(tuple(header["edge"]), shape, data.reshape(shape).astype(float))


def save_system(system: HypergraphSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system.to_dict()) + "\n")


def load_system(path: str | Path) -> HypergraphSystem:
    return HypergraphSystem.from_dict(json.loads(Path(path).read_text()))
