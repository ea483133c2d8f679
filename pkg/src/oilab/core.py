"""Finite domains, distributions, bounded functions, and the dual-norm calculus.

Everything downstream (covering numbers, fat shattering, learners) is built on
the objects here: a finite ordered ``Domain``, a probability ``Distribution``
over it, bounded real functions ``Fn`` (predictors in [0,1], distinguishers in
[-1,1], generic bounded vectors), and function classes ``FnClass`` that are
either explicit finite lists or structured families with closed-form dual-norm
evaluators.

All values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .rng import stream

WEIGHT_TOL = 1e-9

PREDICTOR = "predictor"
DISTINGUISHER = "distinguisher"
GENERIC = "generic"
_KINDS = (PREDICTOR, DISTINGUISHER, GENERIC)


class DomainMismatchError(ValueError):
    """Raised when two objects that must share a domain do not."""


class UnsupportedRepresentationError(ValueError):
    """Raised when an operation needs a class representation it cannot handle."""


class UnsupportedSizeError(ValueError):
    """Raised when an exhaustive search would exceed its configured cap."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Domain:
    """Ordered finite set of individuals, indexed 0 .. size-1."""

    individuals: tuple

    def __post_init__(self):
        labels = tuple(self.individuals)
        if len(labels) == 0:
            raise ValueError("domain must contain at least one individual")
        if len(set(labels)) != len(labels):
            raise ValueError("domain labels must be unique")
        object.__setattr__(self, "individuals", labels)

    @property
    def size(self) -> int:
        return len(self.individuals)

    def index(self, label) -> int:
        return self.individuals.index(label)

    @staticmethod
    def of_size(n: int, prefix: str = "x") -> "Domain":
        return Domain(tuple(f"{prefix}{i}" for i in range(n)))


def _check_same_domain(*objs):
    d0 = objs[0].domain
    for o in objs[1:]:
        if o.domain != d0:
            raise DomainMismatchError(
                f"objects live on different domains ({d0.size} vs {o.domain.size} points)"
            )
    return d0


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability weights over a Domain; renormalized on construction."""

    domain: Domain
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.domain.size,):
            raise ValueError("weights must have one entry per individual")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = float(w.sum())
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        w = w / total
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError("weights failed to renormalize within tolerance")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        cum = np.cumsum(w)
        cum[-1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @staticmethod
    def uniform(domain: Domain) -> "Distribution":
        return Distribution(domain, np.full(domain.size, 1.0 / domain.size))

    def draw_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. individual indices."""
        u = rng.random(n)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)


def _kind_bound(kind: str, bound: float | None) -> float:
    if kind == PREDICTOR or kind == DISTINGUISHER:
        return 1.0
    if bound is None:
        raise ValueError("generic Fn requires an explicit bound")
    if bound <= 0:
        raise ValueError("bound must be positive")
    return float(bound)


@dataclass(frozen=True, eq=False)
class Fn:
    """A bounded real function on a Domain.

    kind 'predictor' forces values in [0,1], 'distinguisher' in [-1,1],
    'generic' enforces |value| <= bound.
    """

    domain: Domain
    values: np.ndarray
    kind: str = GENERIC
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.domain.size,):
            raise ValueError("values must have one entry per individual")
        b = _kind_bound(self.kind, self.bound)
        if self.kind == PREDICTOR:
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError("predictor values must lie in [0,1]")
        elif self.kind == DISTINGUISHER:
            if np.any(v < -1) or np.any(v > 1):
                raise ValueError("distinguisher values must lie in [-1,1]")
        else:
            if np.any(np.abs(v) > b):
                raise ValueError(f"generic values must satisfy |value| <= {b}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bound", b)

    def __sub__(self, other: "Fn") -> "Fn":
        _check_same_domain(self, other)
        return Fn(self.domain, self.values - other.values, GENERIC,
                  self.bound + other.bound)

    def __add__(self, other: "Fn") -> "Fn":
        _check_same_domain(self, other)
        return Fn(self.domain, self.values + other.values, GENERIC,
                  self.bound + other.bound)

    def __neg__(self) -> "Fn":
        if self.kind == DISTINGUISHER:
            return Fn(self.domain, -self.values, DISTINGUISHER)
        return Fn(self.domain, -self.values, GENERIC, self.bound)

    def scale(self, c: float) -> "Fn":
        b = abs(c) * self.bound
        return Fn(self.domain, c * self.values, GENERIC, b if b > 0 else 1.0)

    @staticmethod
    def constant(domain: Domain, value: float, kind: str = GENERIC,
                 bound: float | None = None) -> "Fn":
        if kind == GENERIC and bound is None:
            bound = max(abs(value), 1.0)
        return Fn(domain, np.full(domain.size, float(value)), kind, bound)


@dataclass(frozen=True, eq=False)
class RandomizedDistinguisher:
    """Accept probabilities for (x,1) and (x,0) inputs."""

    domain: Domain
    accept_prob1: np.ndarray
    accept_prob0: np.ndarray

    def __post_init__(self):
        for name in ("accept_prob1", "accept_prob0"):
            p = np.array(getattr(self, name), dtype=float)
            if p.shape != (self.domain.size,):
                raise ValueError(f"{name} must have one entry per individual")
            if np.any(p < 0) or np.any(p > 1):
                raise ValueError(f"{name} entries must lie in [0,1]")
            p.setflags(write=False)
            object.__setattr__(self, name, p)


@dataclass(frozen=True, eq=False)
class Sample:
    """Examples (individual index, outcome in {0,1}) drawn from mu_p."""

    domain: Domain
    indices: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        out = np.array(self.outcomes, dtype=np.int64)
        if idx.shape != out.shape or idx.ndim != 1:
            raise ValueError("indices and outcomes must be 1-d arrays of equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.domain.size):
            raise ValueError("sample contains an out-of-domain index")
        if out.size and not np.all((out == 0) | (out == 1)):
            raise ValueError("outcomes must be 0 or 1")
        idx.setflags(write=False)
        out.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "outcomes", out)

    def __len__(self) -> int:
        return int(self.indices.size)

    def slice(self, start: int, stop: int) -> "Sample":
        return Sample(self.domain, self.indices[start:stop], self.outcomes[start:stop])


# ---------------------------------------------------------------------------
# Function classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FnClass:
    """Base for classes of bounded functions; see concrete representations."""

    domain: Domain
    kind: str = GENERIC

    @property
    def repr_name(self) -> str:
        raise NotImplementedError

    @property
    def bound(self) -> float:
        """Uniform bound M with |f(x)| <= M for every member."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ExplicitClass(FnClass):
    """A nonempty explicit finite list of member functions."""

    members: tuple = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("explicit class must be nonempty")
        for f in members:
            if f.domain != self.domain:
                raise DomainMismatchError("member defined on a different domain")
            if self.kind == PREDICTOR and (f.values.min() < 0 or f.values.max() > 1):
                raise ValueError("member violates predictor bound")
            if self.kind == DISTINGUISHER and np.abs(f.values).max() > 1:
                raise ValueError("member violates distinguisher bound")
        object.__setattr__(self, "members", members)
        mat = np.stack([f.values for f in members])
        mat.setflags(write=False)
        object.__setattr__(self, "_matrix", mat)

    @property
    def repr_name(self) -> str:
        return "explicit"

    @property
    def matrix(self) -> np.ndarray:
        """Member values, one row per member."""
        return self._matrix

    def __len__(self) -> int:
        return len(self.members)

    @property
    def bound(self) -> float:
        if self.kind in (PREDICTOR, DISTINGUISHER):
            return 1.0
        return max(float(np.abs(self._matrix).max()), np.finfo(float).tiny)


def explicit_class(fns: Sequence[Fn], kind: str = GENERIC) -> ExplicitClass:
    return ExplicitClass(fns[0].domain, kind, tuple(fns))


@dataclass(frozen=True, eq=False)
class FullCubeClass(FnClass):
    """All functions with every value in [lo, hi]."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("cube requires lo < hi")

    @property
    def repr_name(self) -> str:
        return "full_cube"

    @property
    def bound(self) -> float:
        return max(abs(self.lo), abs(self.hi))


@dataclass(frozen=True, eq=False)
class GridCubeClass(FnClass):
    """The cube [lo, hi]^X discretized to a uniform grid of the given step.

    The step must divide hi - lo exactly in rational arithmetic; grid points
    are exact class members, so packings on the grid are certified lower
    bounds for the continuous cube.
    """

    lo: float = -1.0
    hi: float = 1.0
    step: float = 0.125

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("cube requires lo < hi")
        if self.step <= 0:
            raise ValueError("step must be positive")
        span = Fraction(self.hi - self.lo).limit_denominator(10**9)
        st = Fraction(self.step).limit_denominator(10**9)
        if (span / st).denominator != 1:
            raise ValueError("step must divide hi - lo exactly")
        object.__setattr__(self, "points_per_axis", int(span / st) + 1)

    @property
    def repr_name(self) -> str:
        return "grid"

    @property
    def bound(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def axis_values(self) -> np.ndarray:
        k = self.points_per_axis
        return self.lo + (self.hi - self.lo) * np.arange(k) / (k - 1)


@dataclass(frozen=True, eq=False)
class SupportBoundedClass(FnClass):
    """Distinguishers free on a special set, supported on <= budget free points.

    Members take arbitrary [-1,1] values on ``special`` and on any subset of
    ``free`` of size at most ``budget``, and vanish elsewhere.  The dual norm
    has the closed form: full weighted-l1 mass on the special set plus the
    budget largest weighted-|f| terms over the free set.
    """

    special: tuple = ()
    free: tuple = ()
    budget: int = 0

    def __post_init__(self):
        special = tuple(int(i) for i in self.special)
        free = tuple(int(i) for i in self.free)
        n = self.domain.size
        seen = set(special) | set(free)
        if len(special) + len(free) != len(seen):
            raise ValueError("special and free sets must be disjoint")
        if any(i < 0 or i >= n for i in seen):
            raise ValueError("index out of domain")
        if self.budget < 0 or self.budget > len(free):
            raise ValueError("budget must lie in [0, |free|]")
        object.__setattr__(self, "special", special)
        object.__setattr__(self, "free", free)

    @property
    def repr_name(self) -> str:
        return "support_bounded"

    @property
    def bound(self) -> float:
        return 1.0


def _parity_signs(m: int) -> np.ndarray:
    # parity_bit[i] = popcount(i) mod 2 for i < 2**m
    par = np.zeros(1 << m, dtype=np.int8)
    for i in range(1, 1 << m):
        par[i] = par[i >> 1] ^ (i & 1)
    return par


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Output[g] = sum_x a[x] * (-1)^popcount(g & x).  Exact in floating point
    whenever all inputs share one magnitude (butterflies then only add or
    cancel equal values).
    """
    a = np.array(a, dtype=float)
    n = a.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        a = a.reshape(a.shape[:-1] + (-1, 2, h))
        top, bot = a[..., 0, :].copy(), a[..., 1, :].copy()
        a[..., 0, :] = top + bot
        a[..., 1, :] = top - bot
        a = a.reshape(a.shape[:-3] + (n,))
        h *= 2
    return a


@dataclass(frozen=True, eq=False)
class ParityClass(FnClass):
    """Parity distinguishers d_S with d_S(x) = (-1)^(parity of S & x).

    With ``include_bot`` the domain is {bot} followed by all m-bit strings and
    every member maps bot to +1; otherwise the domain is just the strings.
    There are 2^m members, indexed by the subset mask S.
    """

    m: int = 1
    include_bot: bool = True

    def __post_init__(self):
        expected = (1 << self.m) + (1 if self.include_bot else 0)
        if self.domain.size != expected:
            raise ValueError("domain size does not match 2^m (+ bot)")
        par = _parity_signs(self.m)
        par.setflags(write=False)
        object.__setattr__(self, "_parity", par)

    @property
    def repr_name(self) -> str:
        return "parity"

    @property
    def bound(self) -> float:
        return 1.0

    def __len__(self) -> int:
        return 1 << self.m

    def inner_products(self, f: Fn, mu: Distribution) -> np.ndarray:
        """<f, d_S>_mu for every member S, via one Walsh-Hadamard transform."""
        _check_same_domain(self, f, mu)
        w = mu.weights * f.values
        if self.include_bot:
            return w[0] + fwht(w[1:])
        return fwht(w)

    def member(self, mask: int) -> Fn:
        vals = 1.0 - 2.0 * self._parity[np.arange(1 << self.m) & mask]
        if self.include_bot:
            vals = np.concatenate(([1.0], vals))
        return Fn(self.domain, vals, DISTINGUISHER)

    def materialize(self) -> ExplicitClass:
        if self.m > 12:
            raise UnsupportedSizeError("refusing to materialize 2^m members for m > 12")
        return ExplicitClass(self.domain, DISTINGUISHER,
                             tuple(self.member(s) for s in range(1 << self.m)))


# ---------------------------------------------------------------------------
# Inner product, norms, advantage
# ---------------------------------------------------------------------------

def inner_product(f1: Fn, f2: Fn, mu: Distribution) -> float:
    """Mu-weighted inner product E_mu[f1 f2]."""
    _check_same_domain(f1, f2, mu)
    return float(np.dot(mu.weights * f1.values, f2.values))


def l1_error(p1: Fn, p2: Fn, mu: Distribution) -> float:
    """Weighted l1 distance E_mu |p1 - p2|."""
    _check_same_domain(p1, p2, mu)
    return float(np.dot(mu.weights, np.abs(p1.values - p2.values)))


def _box_sup(wf: np.ndarray, lo: float, hi: float) -> float:
    # sup over g with g(x) in [lo,hi] of |sum wf(x) g(x)|; attained at a vertex
    if lo == -hi:
        return hi * float(np.abs(wf).sum())
    upper = float(np.where(wf > 0, wf * hi, wf * lo).sum())
    lower = float(np.where(wf > 0, wf * lo, wf * hi).sum())
    return max(abs(upper), abs(lower))


def dual_norm(f: Fn, cls: FnClass, mu: Distribution) -> float:
    """Dual Minkowski norm sup over members g of |<f, g>_mu|."""
    _check_same_domain(f, cls, mu)
    wf = mu.weights * f.values
    if isinstance(cls, ExplicitClass):
        return float(np.abs(cls.matrix @ wf).max())
    if isinstance(cls, (FullCubeClass, GridCubeClass)):
        # grid extreme points coincide with the cube corners, so both share
        # the vertex closed form
        return _box_sup(wf, cls.lo, cls.hi)
    if isinstance(cls, SupportBoundedClass):
        a = np.abs(wf)
        special = float(a[list(cls.special)].sum()) if cls.special else 0.0
        if cls.budget and cls.free:
            free_vals = a[list(cls.free)]
            top = np.partition(free_vals, len(free_vals) - cls.budget)[-cls.budget:]
            special += float(top.sum())
        return special
    if isinstance(cls, ParityClass):
        return float(np.abs(cls.inner_products(f, mu)).max())
    raise UnsupportedRepresentationError(f"no dual-norm evaluator for {type(cls).__name__}")


def advantage(p1: Fn, p2: Fn, dist_class: FnClass, mu: Distribution) -> float:
    """Maximum distinguishing advantage of the class on the two predictors."""
    for p in (p1, p2):
        if p.kind != PREDICTOR:
            raise ValueError("advantage is defined for predictor-kind functions")
    return dual_norm(p1 - p2, dist_class, mu)


def transform_distinguisher(d: RandomizedDistinguisher) -> Fn:
    """Collapse a randomized distinguisher to its advantage-equivalent function."""
    return Fn(d.domain, d.accept_prob1 - d.accept_prob0, DISTINGUISHER)


def inverse_transform(f: Fn) -> RandomizedDistinguisher:
    """Right inverse of transform_distinguisher: round-trips exactly."""
    if f.kind != DISTINGUISHER:
        raise ValueError("inverse transform expects a distinguisher-kind Fn")
    v = f.values
    return RandomizedDistinguisher(f.domain, np.where(v >= 0, v, 0.0),
                                   np.where(v < 0, -v, 0.0))


def sample(p: Fn, mu: Distribution, n: int, seed: int, stream_id: int = 0) -> Sample:
    """Draw n examples (x, o) with x ~ mu and o ~ Ber(p(x))."""
    if p.kind != PREDICTOR:
        raise ValueError("sampling requires a predictor")
    _check_same_domain(p, mu)
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = stream(seed, stream_id)
    idx = mu.draw_indices(n, rng)
    outcomes = (rng.random(n) < p.values[idx]).astype(np.int64)
    return Sample(p.domain, idx, outcomes)


def difference_class(cls: FnClass) -> ExplicitClass:
    """P - P = {p1 - p2} for explicit P, duplicates removed by exact equality."""
    if not isinstance(cls, ExplicitClass):
        raise UnsupportedRepresentationError("difference class requires an explicit class")
    seen = set()
    diffs = []
    for f1 in cls.members:
        for f2 in cls.members:
            d = f1 - f2
            key = d.values.tobytes()
            if key not in seen:
                seen.add(key)
                diffs.append(d)
    return ExplicitClass(cls.domain, GENERIC, tuple(diffs))


def acceptance_probability(d: RandomizedDistinguisher, p: Fn, mu: Distribution) -> float:
    """Exact Pr[d accepts] on pairs (x,o) ~ mu_p."""
    _check_same_domain(d, p, mu)
    per_x = p.values * d.accept_prob1 + (1.0 - p.values) * d.accept_prob0
    return float(np.dot(mu.weights, per_x))
