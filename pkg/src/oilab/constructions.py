"""Generators for the named counterexample and separation instances.

Covers the Hadamard tightness instance, both covering-ERM failure instances,
and the parity-based realizable-vs-agnostic separation together with its
list-learning reduction and posterior checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import core, geometry
from .core import (DISTINGUISHER, GENERIC, PREDICTOR, Distribution, Domain,
                   ExplicitClass, Fn, FullCubeClass, GridCubeClass, ParityClass,
                   Sample, SupportBoundedClass, fwht)
from .rng import stream

LIST_NORM_THRESHOLD = 1 / 6 + 1 / 8  # membership radius of the candidate list


# ---------------------------------------------------------------------------
# GF(2) linear algebra on bit-packed rows
# ---------------------------------------------------------------------------

def gf2_rank(rows: list[int]) -> int:
    """Rank over GF(2); rows are bit-packed ints."""
    work = [r for r in rows if r]
    rank = 0
    while work:
        pivot_row = work.pop()
        pivot_bit = pivot_row & -pivot_row
        rank += 1
        work = [r ^ pivot_row if r & pivot_bit else r for r in work]
        work = [r for r in work if r]
    return rank


def gf2_independent(rows: list[int]) -> bool:
    return gf2_rank(rows) == len(rows)


# ---------------------------------------------------------------------------
# Hadamard tightness instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HadamardInstance:
    m: int
    domain: Domain
    mu: Distribution
    cube: GridCubeClass  # the discretized [-1,1] cube (norm and packing side)
    columns: ExplicitClass  # Hadamard column class


def make_hadamard_instance(eps: float, grid_step: float = 0.125) -> HadamardInstance:
    """Instance with m = largest power of two at most 1/(2 eps^2)."""
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    cap = 1.0 / (2 * eps * eps)
    m = 1
    while 2 * m <= cap:
        m *= 2
    columns = geometry.hadamard_class(m)
    domain = columns.domain
    mu = Distribution.uniform(domain)
    cube = GridCubeClass(domain, GENERIC, lo=-1.0, hi=1.0, step=grid_step)
    return HadamardInstance(m, domain, mu, cube, columns)


# ---------------------------------------------------------------------------
# Covering-ERM failure instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Erm3ConstInstance:
    domain: Domain
    mu: Distribution
    preds: ExplicitClass  # constants 0, 1/2, 1 in class order
    dists: FullCubeClass
    target_index: int  # the constant-1/2 predictor


def make_erm_failure_3const(size: int) -> Erm3ConstInstance:
    domain = Domain.of_size(size)
    mu = Distribution.uniform(domain)
    preds = ExplicitClass(domain, PREDICTOR, tuple(
        Fn.constant(domain, b, PREDICTOR) for b in (0.0, 0.5, 1.0)))
    dists = FullCubeClass(domain, DISTINGUISHER, lo=-1.0, hi=1.0)
    return Erm3ConstInstance(domain, mu, preds, dists, 1)


@dataclass(frozen=True)
class ErmParitySetsInstance:
    n: int
    m: int
    domain: Domain  # three special points followed by m free points
    mu: Distribution
    preds: ExplicitClass  # p0, p1, p2, p3 in display order
    dists: SupportBoundedClass
    # the covering branch the failure analysis runs on: class restricted to
    # {p1, p2, p3} with target p0 and wrong output p2 (the other branch,
    # selected by the lexicographic tie-break on the full class, is symmetric
    # with target p1 and wrong output p3)
    branch_members: tuple
    branch_target_index: int
    branch_wrong_index: int


def make_erm_failure_parity_sets(n: int, m: int) -> ErmParitySetsInstance:
    """Binary-predictor instance on which covering-ERM mislearns.

    Three special points carry half the mass; the m free points carry the
    rest.  Requires m >= 50 n so that the p0/p1 gap n/(2m) stays below 1/100.
    """
    if m < 50 * n:
        raise ValueError("need m >= 50 n for the distance separation")
    labels = (-1, -2, -3) + tuple(range(1, m + 1))
    domain = Domain(labels)
    weights = np.concatenate([np.full(3, 1 / 6), np.full(m, 1 / (2 * m))])
    mu = Distribution(domain, weights)

    def pred(special, free_val):
        vals = np.concatenate([np.array(special, float), np.full(m, float(free_val))])
        return Fn(domain, vals, PREDICTOR)

    p0 = pred((0, 0, 0), 0)
    p1 = pred((0, 0, 0), 1)
    p2 = pred((1, 1, 0), 0)
    p3 = pred((0, 1, 1), 1)
    preds = ExplicitClass(domain, PREDICTOR, (p0, p1, p2, p3))
    dists = SupportBoundedClass(domain, DISTINGUISHER,
                                special=(0, 1, 2),
                                free=tuple(range(3, m + 3)), budget=n)
    return ErmParitySetsInstance(n, m, domain, mu, preds, dists,
                                 branch_members=(1, 2, 3),
                                 branch_target_index=0, branch_wrong_index=2)


# ---------------------------------------------------------------------------
# Parity separation instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparationInstance:
    """Domain {bot} + {0,1}^m with the two-predictor class and parity tests."""

    m: int
    domain: Domain
    mu: Distribution
    preds: ExplicitClass  # p1 (bot -> 0) and p2 (bot -> 1)
    dists: ParityClass

    @property
    def bot_index(self) -> int:
        return 0


def make_separation_instance(m: int) -> SeparationInstance:
    if m < 1:
        raise ValueError("m must be positive")
    size = 1 << m
    domain = Domain(("bot",) + tuple(range(size)))
    weights = np.concatenate([[1 / 3], np.full(size, (2 / 3) / size)])
    mu = Distribution(domain, weights)
    half = np.full(size, 0.5)
    p1 = Fn(domain, np.concatenate([[0.0], half]), PREDICTOR)
    p2 = Fn(domain, np.concatenate([[1.0], half]), PREDICTOR)
    preds = ExplicitClass(domain, PREDICTOR, (p1, p2))
    dists = ParityClass(domain, DISTINGUISHER, m=m, include_bot=True)
    return SeparationInstance(m, domain, mu, preds, dists)


def predictor_from_boolean(inst: SeparationInstance, f_values: np.ndarray) -> Fn:
    """p_f: 1/2 at bot, (1 + (-1)^f(x)) / 2 on bitstrings."""
    f_values = np.asarray(f_values, dtype=np.int64)
    if f_values.shape != (1 << inst.m,):
        raise ValueError("boolean function must assign a bit to every string")
    strings = (1.0 + np.where(f_values == 1, -1.0, 1.0)) / 2
    return Fn(inst.domain, np.concatenate([[0.5], strings]), PREDICTOR)


def parity_values(m: int, mask: int) -> np.ndarray:
    """The boolean parity function x -> parity of mask & x, as a bit vector."""
    par = core._parity_signs(m)
    return par[np.arange(1 << m) & mask].astype(np.int64)


def candidate_list_counts(inst: SeparationInstance, p: Fn) -> dict:
    """Membership of every parity / anti-parity in the candidate list.

    A boolean f is listed when ||p_f - p||_{mu, D} <= 1/6 + 1/8.  For p_f with
    f parity of mask g, the inner product with member d_h is

        base_h + (1/3) [h == g],  base_h = mu_bot (1/2 - p(bot)) + (2/3) c_h,

    where c_h is the Walsh coefficient of (1/2 - p) on the strings; the
    anti-parity case flips the (1/3) delta term.  One transform therefore
    yields every norm at once.
    """
    m = inst.m
    mu_w = inst.mu.weights
    base = mu_w[0] * (0.5 - p.values[0]) + fwht(mu_w[1:] * (0.5 - p.values[1:]))
    delta = 0.5 * float(mu_w[1:].sum())  # <chi_g/2, chi_g> under the string mass
    abs_base = np.abs(base)
    # for mask g the norm is max(max_{h != g} |base_h|, |base_g +- delta|);
    # precompute the two largest |base_h| to answer the first term quickly
    order = np.argsort(abs_base)
    top1 = order[-1]
    top1_val = abs_base[top1]
    top2_val = abs_base[order[-2]] if abs_base.size > 1 else 0.0
    others = np.where(np.arange(1 << m) == top1, top2_val, top1_val)
    norm_parity = np.maximum(others, np.abs(base + delta))
    norm_anti = np.maximum(others, np.abs(base - delta))
    in_parity = norm_parity <= LIST_NORM_THRESHOLD
    in_anti = norm_anti <= LIST_NORM_THRESHOLD
    return {
        "parity_in_list": in_parity,
        "anti_in_list": in_anti,
        "n_parity": int(in_parity.sum()),
        "n_anti": int(in_anti.sum()),
        "norm_parity": norm_parity,
        "norm_anti": norm_anti,
    }


@dataclass(frozen=True)
class ListLearningInstance:
    """Hidden boolean target plus budgets for the list-learning task."""

    m: int
    n: int
    t_values: np.ndarray  # target t as a bit vector over {0,1}^m
    k: int

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=np.int64)
        if t.shape != (1 << self.m,):
            raise ValueError("t must assign a bit to every string")
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("t must be boolean")
        t.setflags(write=False)
        object.__setattr__(self, "t_values", t)

    def classify_target(self) -> tuple[str, int | None]:
        """Return ('parity', mask), ('anti', mask), or ('other', None)."""
        signs = 1.0 - 2.0 * self.t_values
        coeffs = fwht(signs)
        size = 1 << self.m
        hit = np.where(coeffs == size)[0]
        if hit.size:
            return "parity", int(hit[0])
        hit = np.where(coeffs == -size)[0]
        if hit.size:
            return "anti", int(hit[0])
        return "other", None


def run_list_reduction(learn, inst: ListLearningInstance, seed: int) -> dict:
    """Run the OI-to-list-learning reduction once.

    Draws n uniform strings labeled by t, rewrites each example to (bot, 0)
    with probability 1/6, (bot, 1) with probability 1/6, and the labeled
    string otherwise, runs ``learn`` (a callable Sample -> predictor Fn) on
    the rewritten sample, and forms the candidate list from the learned
    predictor.  The untestable boolean bulk outside parity/anti-parity stays
    symbolic: only t's membership and the parity/anti-parity counts matter.
    """
    sep = make_separation_instance(inst.m)
    rng = stream(seed, 0)
    size = 1 << inst.m
    u = rng.integers(0, size, size=inst.n)
    v = inst.t_values[u]
    mode = rng.random(inst.n)
    indices = np.where(mode < 1 / 3, 0, u + 1)
    outcomes = np.where(mode < 1 / 6, 0,
                        np.where(mode < 1 / 3, 1, 1 - v))
    sample = Sample(sep.domain, indices, outcomes)
    p = learn(sample)
    counts = candidate_list_counts(sep, p)
    kind, mask = inst.classify_target()
    if kind == "parity":
        t_in_list = bool(counts["parity_in_list"][mask])
    elif kind == "anti":
        t_in_list = bool(counts["anti_in_list"][mask])
    else:
        t_in_list = True  # symbolic component of the list
    success = t_in_list and min(counts["n_parity"], counts["n_anti"]) <= inst.k
    return {
        "success": success,
        "t_in_list": t_in_list,
        "t_kind": kind,
        "n_parity": counts["n_parity"],
        "n_anti": counts["n_anti"],
        "p_bot": float(p.values[0]),
    }


def parity_posterior_check(m: int, n: int, seed: int, trials: int) -> dict:
    """Posterior structure of parity learning from n uniform examples.

    Per trial: draw a hidden parity or anti-parity target and n uniform
    strings, test linear independence of the strings by GF(2) elimination,
    and count by enumeration how many parities and anti-parities agree with
    the labels.  On independent draws both counts must equal 2^(m-n).
    """
    if n > m:
        raise ValueError("the posterior check needs n <= m")
    size = 1 << m
    rows = []
    indep_count = 0
    all_match = True
    for trial in range(trials):
        rng = stream(seed, trial)
        t_mask = int(rng.integers(0, size))
        t_anti = bool(rng.integers(0, 2))
        u = rng.integers(0, size, size=n)
        labels = parity_values(m, t_mask)[u] ^ (1 if t_anti else 0)
        independent = gf2_independent([int(x) for x in u])
        # enumerate all 2^m parity masks; a mask g is consistent as a parity
        # if parity(g & u_i) == label_i for all i, and as an anti-parity if
        # parity(g & u_i) == 1 - label_i for all i
        par = core._parity_signs(m)
        consistent_parity = np.ones(size, dtype=bool)
        consistent_anti = np.ones(size, dtype=bool)
        for ui, vi in zip(u, labels):
            vals = par[np.arange(size) & int(ui)]
            consistent_parity &= vals == vi
            consistent_anti &= vals == 1 - vi
        n_parity = int(consistent_parity.sum())
        n_anti = int(consistent_anti.sum())
        # elimination-side prediction: 2^(m - rank) when the affine system is
        # consistent (augmented rank equal), otherwise zero
        rank = gf2_rank([int(x) for x in u])
        aug_parity = gf2_rank([int(ui) | (int(vi) << m) for ui, vi in zip(u, labels)])
        aug_anti = gf2_rank([int(ui) | (int(1 - vi) << m) for ui, vi in zip(u, labels)])
        pred_parity = (1 << (m - rank)) if aug_parity == rank else 0
        pred_anti = (1 << (m - rank)) if aug_anti == rank else 0
        formula_match = (n_parity == pred_parity and n_anti == pred_anti)
        all_match &= formula_match
        if independent:
            indep_count += 1
        rows.append({
            "trial": trial,
            "independent": independent,
            "n_consistent_parity": n_parity,
            "n_consistent_anti": n_anti,
            "expected_if_independent": 1 << (m - n),
        })
    return {
        "rows": rows,
        "independence_rate": indep_count / trials if trials else 1.0,
        "elimination_matches_enumeration": bool(all_match),
    }
