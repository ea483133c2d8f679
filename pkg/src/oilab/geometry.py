"""Covering numbers, packings, metric entropy, and fat-shattering dimension.

Exact coverings are proper (centers are class members) and are found by a
lexicographic branch-and-bound set-cover search, so results are deterministic:
among all minimum-size coverings the one with the lexicographically smallest
index set is returned.  Fat-shattering witnesses are always re-verified
independently of the search that produced them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import (DISTINGUISHER, GENERIC, Distribution, Domain, ExplicitClass, Fn,
                   FnClass, FullCubeClass, GridCubeClass, UnsupportedSizeError,
                   dual_norm)
from .rng import stream

EXACT_COVER_CAP = 24
FAT_DOMAIN_CAP = 16
FAT_POINTS_CAP = 8


@dataclass(frozen=True)
class CoveringResult:
    """Centers (member indices of the covered class), size, mode, epsilon."""

    centers: tuple
    size: int
    mode: str
    epsilon: float

    def __post_init__(self):
        if self.size != len(self.centers):
            raise ValueError("size must equal the number of centers")


@dataclass(frozen=True)
class FatResult:
    """A verified fat-shattering witness: dimension, points, and shifts."""

    dimension: int
    witness_points: tuple
    witness_shifts: tuple

    def __post_init__(self):
        if self.dimension != len(self.witness_points):
            raise ValueError("dimension must equal the number of witness points")
        if len(self.witness_points) != len(self.witness_shifts):
            raise ValueError("one shift per witness point required")


def pairwise_distances(cls: ExplicitClass, norm_cls: FnClass, mu: Distribution) -> np.ndarray:
    """Matrix of dual-norm distances between members of an explicit class."""
    core._check_same_domain(cls, norm_cls, mu)
    k = len(cls)
    if isinstance(norm_cls, ExplicitClass):
        # gram[i, l] = <f_i, g_l>_mu ; distances reduce to max coordinate gaps
        gram = cls.matrix @ (norm_cls.matrix * mu.weights).T
        dist = np.abs(gram[:, None, :] - gram[None, :, :]).max(axis=2)
        return dist
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            d = dual_norm(cls.members[i] - cls.members[j], norm_cls, mu)
            dist[i, j] = dist[j, i] = d
    return dist


def _verify_covering(dist: np.ndarray, centers, eps: float) -> None:
    covered = (dist[:, list(centers)] <= eps).any(axis=1)
    if not covered.all():
        raise AssertionError("covering verification failed")


def covering_exact(cls: ExplicitClass, norm_cls: FnClass, mu: Distribution,
                   eps: float, cap: int = EXACT_COVER_CAP) -> CoveringResult:
    """Minimum-size proper eps-covering, lexicographically smallest index set."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    k = len(cls)
    if k > cap:
        raise UnsupportedSizeError(
            f"exact covering capped at {cap} members (got {k}); use covering_greedy")
    dist = pairwise_distances(cls, norm_cls, mu)
    cover_mask = [0] * k  # cover_mask[i]: bitmask of members within eps of i
    for i in range(k):
        mask = 0
        for j in range(k):
            if dist[i, j] <= eps:
                mask |= 1 << j
        cover_mask[i] = mask
    full = (1 << k) - 1
    # suffix_cover[i] = union of cover sets over centers with index >= i
    suffix = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix[i] = suffix[i + 1] | cover_mask[i]
    max_cover = max(m.bit_count() for m in cover_mask)

    def dfs(start: int, covered: int, chosen: list, slots: int) -> tuple | None:
        if covered == full:
            return tuple(chosen)
        if slots == 0:
            return None
        uncovered = full & ~covered
        if uncovered & ~suffix[start]:
            return None  # some member can no longer be covered
        if uncovered.bit_count() > slots * max_cover:
            return None
        for i in range(start, k):
            new = covered | cover_mask[i]
            if new == covered:
                continue
            chosen.append(i)
            found = dfs(i + 1, new, chosen, slots - 1)
            if found is not None:
                return found
            chosen.pop()
        return None

    lower = math.ceil(k / max_cover)
    for size in range(lower, k + 1):
        found = dfs(0, 0, [], size)
        if found is not None:
            _verify_covering(dist, found, eps)
            return CoveringResult(found, len(found), "exact", eps)
    raise AssertionError("unreachable: the full class always covers itself")


def covering_greedy(cls: ExplicitClass, norm_cls: FnClass, mu: Distribution,
                    eps: float) -> CoveringResult:
    """Greedy max-coverage upper bound on the covering number."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    dist = pairwise_distances(cls, norm_cls, mu)
    k = len(cls)
    covered = np.zeros(k, dtype=bool)
    centers = []
    within = dist <= eps
    while not covered.all():
        gains = (within & ~covered[None, :]).sum(axis=1)
        i = int(np.argmax(gains))  # argmax takes the smallest index on ties
        if gains[i] == 0:
            raise AssertionError("unreachable: every member covers itself")
        centers.append(i)
        covered |= within[i]
    _verify_covering(dist, centers, eps)
    return CoveringResult(tuple(centers), len(centers), "greedy", eps)


def packing_lower(cls: ExplicitClass, norm_cls: FnClass, mu: Distribution,
                  eps: float) -> int:
    """Size of a greedy maximal 2eps-separated subset; <= the eps-covering number."""
    dist = pairwise_distances(cls, norm_cls, mu)
    kept: list[int] = []
    for i in range(len(cls)):
        if all(dist[i, j] > 2 * eps for j in kept):
            kept.append(i)
    return len(kept)


def metric_entropy(cls: ExplicitClass, norm_cls: FnClass, mu: Distribution,
                   eps: float, mode: str = "exact") -> float:
    """Base-2 log of the covering number from the selected mode."""
    if mode == "exact":
        res = covering_exact(cls, norm_cls, mu, eps)
    elif mode == "greedy":
        res = covering_greedy(cls, norm_cls, mu, eps)
    else:
        raise ValueError("mode must be 'exact' or 'greedy'")
    return math.log2(res.size)


# ---------------------------------------------------------------------------
# Fat-shattering dimension
# ---------------------------------------------------------------------------

def verify_fat_witness(cls: ExplicitClass, points, shifts, gamma: float) -> bool:
    """Re-check all 2^n sign patterns directly, independent of any search."""
    n = len(points)
    mat = cls.matrix[:, list(points)]
    for bits in range(1 << n):
        b = np.array([1.0 if (bits >> i) & 1 else -1.0 for i in range(n)])
        ok = (b * (mat - np.asarray(shifts)) >= gamma - 0.0).all(axis=1).any()
        if not ok:
            return False
    return True


def _threshold_configs(col: np.ndarray, gamma: float):
    """Pareto-maximal (high, low) member bitmasks over candidate shifts.

    Shifts are searched on the finite grid {v - gamma, v + gamma : v member
    value at the point}; threshold comparisons cannot distinguish any other
    shift from its best grid neighbor.
    """
    k = col.size
    configs = {}
    for v in col:
        for r in (v - gamma, v + gamma):
            high = 0
            low = 0
            for f in range(k):
                # same float expressions as verify_fat_witness: b (f - r) >= gamma
                if col[f] - r >= gamma:
                    high |= 1 << f
                if -(col[f] - r) >= gamma:
                    low |= 1 << f
            if high and low:
                configs[(high, low)] = r
    items = list(configs.items())
    kept = []
    for (h, l), r in items:
        dominated = any((h | h2) == h2 and (l | l2) == l2 and (h, l) != (h2, l2)
                        for (h2, l2), _ in items)
        if not dominated:
            kept.append((h, l, r))
    return kept


def _shatter_shifts(cls: ExplicitClass, points, gamma: float):
    """Shifts certifying that the point tuple is gamma-fat shattered, or None."""
    mat = cls.matrix
    per_point = []
    for x in points:
        cfgs = _threshold_configs(mat[:, x], gamma)
        if not cfgs:
            return None
        per_point.append(cfgs)

    n = len(points)
    chosen = [0.0] * n

    def dfs(depth: int, masks: list) -> bool:
        if depth == n:
            return True
        for h, l, r in per_point[depth]:
            new = []
            ok = True
            for m in masks:
                mh = m & h
                ml = m & l
                if not mh or not ml:
                    ok = False
                    break
                new.append(mh)
                new.append(ml)
            if ok and dfs(depth + 1, new):
                chosen[depth] = r
                return True
        return False

    full = (1 << len(cls)) - 1
    if dfs(0, [full]):
        return tuple(chosen)
    return None


def fat_exact(cls: ExplicitClass, gamma: float, max_points: int,
              domain_cap: int = FAT_DOMAIN_CAP,
              points_cap: int = FAT_POINTS_CAP) -> FatResult:
    """Exhaustive fat-shattering dimension, capped at max_points."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    n_x = cls.domain.size
    if n_x > domain_cap or max_points > points_cap:
        raise UnsupportedSizeError(
            f"fat_exact capped at |X| <= {domain_cap}, points <= {points_cap}; "
            "use fat_lower for larger instances")
    best = FatResult(0, (), ())
    # grow shattered sets level by level; every subset of a shattered set is
    # shattered, so extensions of survivors suffice
    level = [()]
    for n in range(1, max_points + 1):
        nxt = []
        witness = None
        for pts in level:
            start = pts[-1] + 1 if pts else 0
            for x in range(start, n_x):
                cand = pts + (x,)
                shifts = _shatter_shifts(cls, cand, gamma)
                if shifts is not None:
                    nxt.append(cand)
                    if witness is None:
                        witness = (cand, shifts)
        if witness is None:
            break
        pts, shifts = witness
        if not verify_fat_witness(cls, pts, shifts, gamma):
            raise AssertionError("search produced an invalid fat witness")
        best = FatResult(n, pts, shifts)
        level = nxt
    return best


def fat_lower(cls: ExplicitClass, gamma: float, trials: int, seed: int,
              max_points: int | None = None) -> FatResult:
    """Randomized certified lower bound on the fat-shattering dimension.

    Random-restart greedy extension plus one swap pass per restart; the
    returned witness is always re-verified, so the bound never overstates.
    """
    n_x = cls.domain.size
    cap = n_x if max_points is None else min(max_points, n_x)
    rng = stream(seed, 0)
    best: tuple = ()
    best_shifts: tuple = ()

    def extend(pts: list) -> list:
        for x in rng.permutation(n_x):
            if len(pts) >= cap:
                break
            if int(x) in pts:
                continue
            if _shatter_shifts(cls, tuple(pts) + (int(x),), gamma) is not None:
                pts.append(int(x))
        return pts

    for _ in range(max(trials, 1)):
        pts = extend([])
        # swap pass: try trading one chosen point for one unused point
        improved = True
        while improved and len(pts) < cap:
            improved = False
            for out in list(pts):
                rest = [p for p in pts if p != out]
                grown = extend(list(rest))
                if len(grown) > len(pts):
                    pts = grown
                    improved = True
                    break
        if len(pts) > len(best):
            ordered = tuple(sorted(pts))
            shifts = _shatter_shifts(cls, ordered, gamma)
            if shifts is not None:
                best, best_shifts = ordered, shifts
        if len(best) >= cap:
            break
    if best and not verify_fat_witness(cls, best, best_shifts, gamma):
        raise AssertionError("randomized search produced an invalid witness")
    return FatResult(len(best), best, best_shifts)


def lift_distinguisher_class(cls: ExplicitClass) -> ExplicitClass:
    """Lift d on X to d~ on X x {0,1} with d~(x,0) = 0 and d~(x,1) = d(x)."""
    labels = []
    for lab in cls.domain.individuals:
        labels.append((lab, 0))
        labels.append((lab, 1))
    lifted_domain = Domain(tuple(labels))
    members = []
    for f in cls.members:
        vals = np.zeros(2 * cls.domain.size)
        vals[1::2] = f.values
        members.append(Fn(lifted_domain, vals, f.kind, f.bound))
    return ExplicitClass(lifted_domain, cls.kind, tuple(members))


# ---------------------------------------------------------------------------
# Duality and volume bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualityReport:
    lhs: float
    rhs: float
    holds: bool
    constant: float
    epsilon: float
    bound1: float
    bound2: float


def duality_check(cls1: ExplicitClass, cls2: ExplicitClass, mu: Distribution,
                  eps: float, constant: float,
                  cap: int = EXACT_COVER_CAP) -> DualityReport:
    """Check log2 N_{F2}(F1,eps) <= C (M1 M2 / eps)^2 (1 + log2 N_{F1}(F2,eps/8)).

    The constant is supplied by the caller and echoed in the report; it is
    never defaulted silently.
    """
    m1, m2 = cls1.bound, cls2.bound
    lhs = metric_entropy(cls1, cls2, mu, eps)
    rhs_entropy = metric_entropy(cls2, cls1, mu, eps / 8)
    rhs = constant * (m1 * m2 / eps) ** 2 * (1.0 + rhs_entropy)
    return DualityReport(lhs, rhs, lhs <= rhs, constant, eps, m1, m2)


def hadamard_class(m: int) -> ExplicitClass:
    """Columns of the Sylvester Hadamard matrix as +-1 functions on m points."""
    if m < 1 or m & (m - 1):
        raise ValueError("m must be a power of two")
    h = np.array([[1.0]])
    while h.shape[0] < m:
        h = np.block([[h, h], [h, -h]])
    domain = Domain.of_size(m)
    members = tuple(Fn(domain, h[:, j].copy(), DISTINGUISHER) for j in range(m))
    cls = ExplicitClass(domain, DISTINGUISHER, members)
    gram = cls.matrix @ (cls.matrix / m).T
    if not np.allclose(gram, np.eye(m), atol=1e-12):
        raise AssertionError("Hadamard columns failed the orthonormality check")
    return cls


def cube_packing_lower(eps: float, n: int, grid_step: float, norm_cls: FnClass,
                       mu: Distribution, lo: float = -1.0, hi: float = 1.0,
                       batch: int = 4096) -> int:
    """Greedy maximal 2eps-separated subset of the grid cube [lo,hi]^X.

    Scans grid points in lexicographic order and keeps every point farther
    than 2eps from all kept points.  The result lower-bounds the eps-covering
    number of the grid cube (each eps-ball holds at most one kept point), and
    the grid points are exact class members.
    """
    grid = GridCubeClass(mu.domain, GENERIC, lo=lo, hi=hi, step=grid_step)
    if mu.domain.size != n:
        raise ValueError("n must equal the domain size")
    axis = grid.axis_values()
    k = axis.size
    total = k ** n
    if total > 20_000_000:
        raise UnsupportedSizeError(f"grid has {total} points; choose a coarser step")

    if isinstance(norm_cls, ExplicitClass):
        basis = (norm_cls.matrix * mu.weights).T  # point values -> inner products
        embed = lambda pts: pts @ basis
    elif isinstance(norm_cls, (FullCubeClass, GridCubeClass)) and norm_cls.lo == -norm_cls.hi:
        # symmetric cube norm is hi-scaled weighted l1; embed so that the
        # distance is again a max of coordinate gaps (signed split trick is
        # unnecessary: l1 handled separately below)
        embed = None
    else:
        raise core.UnsupportedRepresentationError(
            "cube packing supports explicit or symmetric-cube norm classes")

    sep = 2 * eps
    kept_pts: list[np.ndarray] = []
    kept_proj: list[np.ndarray] = []

    def min_dist_to_kept(pts, proj):
        # blockwise vectorized distance from each chunk point to the nearest
        # kept point; blocks keep the broadcast buffers small
        out = np.full(pts.shape[0], np.inf)
        source = kept_proj if embed is not None else kept_pts
        for lo_i in range(0, len(source), 256):
            kp = np.stack(source[lo_i:lo_i + 256])
            if embed is not None:
                d = np.abs(proj[:, None, :] - kp[None, :, :]).max(axis=2)
            else:
                d = np.abs(pts[:, None, :] - kp[None, :, :]) @ mu.weights * norm_cls.hi
            out = np.minimum(out, d.min(axis=1))
        return out

    def dist_one(p, q_pts, p_proj, q_proj):
        if embed is not None:
            return np.abs(p_proj - q_proj).max()
        return float(np.abs(p - q_pts) @ mu.weights) * norm_cls.hi

    for start in range(0, total, batch):
        chunk = np.arange(start, min(start + batch, total))
        coords = np.empty((chunk.size, n), dtype=np.int64)
        rem = chunk.copy()
        for j in range(n - 1, -1, -1):
            coords[:, j] = rem % k
            rem //= k
        pts = axis[coords]
        proj = embed(pts) if embed is not None else None
        candidates = np.where(min_dist_to_kept(pts, proj) > sep)[0]
        new_in_chunk: list[int] = []
        for r in candidates:
            ok = True
            for s in new_in_chunk:
                d = dist_one(pts[r], pts[s],
                             proj[r] if proj is not None else None,
                             proj[s] if proj is not None else None)
                if d <= sep:
                    ok = False
                    break
            if ok:
                new_in_chunk.append(int(r))
                kept_pts.append(pts[r])
                if proj is not None:
                    kept_proj.append(proj[r])
    return len(kept_pts)
