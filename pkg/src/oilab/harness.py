"""Experiment runner: per-lemma Monte Carlo experiments with seeded reports.

Every experiment is a pure function of its config (including the mandatory
seed): trials draw from split RNG streams, aggregates are recomputed from the
per-trial rows, and reports carry a provenance block echoing the config, so
re-running the same config on the same build reproduces the report bit for
bit.  Success-rate assertions use Wilson 95% intervals; they are confidence
checks on true probability bounds, not worst-case guarantees.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import constructions, core, geometry, learners
from .core import (DISTINGUISHER, GENERIC, PREDICTOR, Distribution, Domain,
                   ExplicitClass, Fn, FullCubeClass, Sample)
from .rng import stream

CODE_VERSION = "oi-lab 0.1.0"

DEFAULT_CONSTANTS = {
    "duality_c": 1000.0,        # implementer-chosen conservative constant
    "boost_t_base": 25,         # 25 certifies termination; 16 matches the box
    "grid_step": 0.125,
    "sweep_grid_step": 2 / 3,   # finest uniform grid feasible at m = 8
    "covering_exact_cap": 24,
    "fat_domain_cap": 16,
    "fat_points_cap": 8,
    "wilson_z": 1.959963984540054,
    "search_slack": 0.02,
}


def wilson_interval(successes: int, trials: int,
                    z: float = DEFAULT_CONSTANTS["wilson_z"]) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    ph = successes / trials
    denom = 1 + z * z / trials
    center = (ph + z * z / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    code_version: str
    rows: list
    aggregates: dict
    assertions: list

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "provenance": {"config": self.config, "code_version": self.code_version},
            "aggregates": self.aggregates,
            "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail}
                           for a in self.assertions],
            "passed": self.passed,
            "n_rows": len(self.rows),
        }

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "rows.csv"), "w", newline="") as fh:
            if self.rows:
                writer = csv.DictWriter(fh, fieldnames=list(self.rows[0].keys()))
                writer.writeheader()
                writer.writerows(self.rows)


def _merged_config(config: dict) -> dict:
    cfg = dict(config)
    if "seed" not in cfg:
        raise ValueError("experiment configs must carry an explicit seed")
    constants = dict(DEFAULT_CONSTANTS)
    constants.update(cfg.get("constants", {}))
    cfg["constants"] = constants
    cfg.setdefault("trials", 200)
    cfg.setdefault("instance", {})
    cfg.setdefault("params", {})
    cfg.setdefault("acceptance", {})
    return cfg


def sample_size_search(run_probe, delta: float, n_start: int,
                       trials: int, slack: float = DEFAULT_CONSTANTS["search_slack"],
                       max_doublings: int = 24) -> tuple[int, list]:
    """Doubling search for the smallest probed n meeting the success goal.

    ``run_probe(n, probe_index)`` returns the number of successes out of
    ``trials``.  The goal is a Wilson 95% lower bound of at least
    1 - delta - slack.  Returns the first passing n and the probe table.
    """
    n = n_start
    probes = []
    for k in range(max_doublings):
        succ = int(run_probe(n, k))
        lo, hi = wilson_interval(succ, trials)
        probes.append({"n": n, "successes": succ, "trials": trials,
                       "rate": succ / trials, "wilson_lower": lo})
        if lo >= 1 - delta - slack:
            return n, probes
        n *= 2
    raise RuntimeError("sample size search exhausted its doubling budget")


def _random_predictor(domain, rng) -> Fn:
    return Fn(domain, rng.random(domain.size), PREDICTOR)


def _random_distinguisher_class(domain, rng, k) -> ExplicitClass:
    members = tuple(Fn(domain, rng.uniform(-1, 1, domain.size), DISTINGUISHER)
                    for _ in range(k))
    return ExplicitClass(domain, DISTINGUISHER, members)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _exp_adv_vs_l1(cfg):
    inst = {"x_size": 20, "d_members": 8}
    inst.update(cfg["instance"])
    domain = Domain.of_size(inst["x_size"])
    cube = FullCubeClass(domain, DISTINGUISHER, lo=-1.0, hi=1.0)
    rows = []
    eq_tol = cfg["acceptance"].get("equality_tol", 1e-12)
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        mu = Distribution(domain, rng.random(inst["x_size"]) + 1e-3)
        p1, p2 = _random_predictor(domain, rng), _random_predictor(domain, rng)
        d_cls = _random_distinguisher_class(domain, rng, inst["d_members"])
        l1 = core.l1_error(p1, p2, mu)
        adv_cube = core.advantage(p1, p2, cube, mu)
        adv_d = core.advantage(p1, p2, d_cls, mu)
        rows.append({"trial": t, "l1": l1, "adv_full_cube": adv_cube,
                     "adv_random_class": adv_d})
    eq_err = max(abs(r["adv_full_cube"] - r["l1"]) for r in rows)
    dominated = all(r["adv_random_class"] <= r["l1"] + eq_tol for r in rows)
    aggregates = {"max_equality_error": eq_err, "all_dominated": dominated}
    assertions = [
        Assertion("full_cube_advantage_equals_l1", eq_err <= eq_tol,
                  f"max |adv - l1| = {eq_err:.3e} (tol {eq_tol:.0e})"),
        Assertion("advantage_at_most_l1", dominated,
                  "adv under a random class never exceeded the l1 error"),
    ]
    return rows, aggregates, assertions


def _exp_transform_mc(cfg):
    inst = {"x_size": 12, "mc_pairs": 100_000}
    inst.update(cfg["instance"])
    domain = Domain.of_size(inst["x_size"])
    n_mc = inst["mc_pairs"]
    rows = []
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        mu = Distribution(domain, rng.random(inst["x_size"]) + 1e-3)
        p1, p2 = _random_predictor(domain, rng), _random_predictor(domain, rng)
        d = core.RandomizedDistinguisher(domain, rng.random(inst["x_size"]),
                                         rng.random(inst["x_size"]))
        exact = abs(core.inner_product(core.transform_distinguisher(d),
                                       p1 - p2, mu))
        accepts = []
        variances = []
        for p in (p1, p2):
            idx = mu.draw_indices(n_mc, rng)
            outcomes = rng.random(n_mc) < p.values[idx]
            acc_prob = np.where(outcomes, d.accept_prob1[idx], d.accept_prob0[idx])
            accepted = rng.random(n_mc) < acc_prob
            phat = float(accepted.mean())
            accepts.append(phat)
            variances.append(phat * (1 - phat) / n_mc)
        mc = abs(accepts[0] - accepts[1])
        se = math.sqrt(sum(variances))
        ok = abs(mc - exact) <= 3 * se + 1e-12
        rows.append({"trial": t, "exact": exact, "monte_carlo": mc,
                     "std_error": se, "within_3se": ok})
    hits = sum(r["within_3se"] for r in rows)
    need = cfg["acceptance"].get("min_within", math.floor(0.94 * cfg["trials"]))
    aggregates = {"within_3se": hits, "trials": cfg["trials"]}
    assertions = [Assertion(
        "acceptance_game_matches_inner_product", hits >= need,
        f"{hits}/{cfg['trials']} within 3 standard errors (need {need})")]
    return rows, aggregates, assertions


def _scaled_class(cls: ExplicitClass, factor: float) -> ExplicitClass:
    members = tuple(f.scale(factor) for f in cls.members)
    return ExplicitClass(cls.domain, GENERIC, members)


def _shifted_class(cls: ExplicitClass, shift: Fn) -> ExplicitClass:
    members = tuple(f + shift for f in cls.members)
    return ExplicitClass(cls.domain, GENERIC, members)


def _exp_covering_algebra(cfg):
    inst = {"x_size": 6, "f2_members": 10, "f1_members": 4}
    inst.update(cfg["instance"])
    domain = Domain.of_size(inst["x_size"])
    rows = []
    viol = {"monotone": 0, "shift": 0, "homogeneity": 0, "hull": 0,
            "packing": 0, "greedy_bound": 0, "greedy_ge_exact": 0}
    norm_tol = cfg["acceptance"].get("hull_tol", 1e-9)
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        mu = Distribution(domain, rng.random(inst["x_size"]) + 1e-3)
        f1 = _random_distinguisher_class(domain, rng, inst["f1_members"])
        f2 = ExplicitClass(domain, GENERIC, tuple(
            Fn(domain, rng.uniform(-1, 1, inst["x_size"]), GENERIC, 1.0)
            for _ in range(inst["f2_members"])))
        dist = geometry.pairwise_distances(f2, f1, mu)
        positives = dist[dist > 0]
        eps = 0.6 * float(np.median(positives)) if positives.size else 0.1
        base = geometry.covering_exact(f2, f1, mu, eps)
        # (1) monotone in the norm class
        sub = ExplicitClass(domain, DISTINGUISHER,
                            f1.members[:max(1, len(f1) - 2)])
        n_sub = geometry.covering_exact(f2, sub, mu, eps).size
        if n_sub > base.size:
            viol["monotone"] += 1
        # (3) shift invariance
        shift = Fn(domain, rng.uniform(-1, 1, inst["x_size"]), GENERIC, 1.0)
        n_shift = geometry.covering_exact(_shifted_class(f2, shift), f1, mu, eps).size
        if n_shift != base.size:
            viol["shift"] += 1
        # (4) homogeneity for a, b in {1/2, 2}
        for a in (0.5, 2.0):
            for b in (0.5, 2.0):
                n_ab = geometry.covering_exact(
                    _scaled_class(f2, b), _scaled_class(f1, a), mu, a * b * eps).size
                if n_ab != base.size:
                    viol["homogeneity"] += 1
        # (2) hull invariance at the norm level: convex combinations of signed
        # members never beat the class supremum
        f = Fn(domain, rng.uniform(-1, 1, inst["x_size"]), GENERIC, 1.0)
        nrm = core.dual_norm(f, f1, mu)
        for _ in range(50):
            lam = rng.random(len(f1))
            lam /= lam.sum()
            signs = rng.choice([-1.0, 1.0], size=len(f1))
            combo = (lam * signs) @ f1.matrix
            val = abs(float(np.dot(mu.weights * f.values, combo)))
            if val > nrm + norm_tol:
                viol["hull"] += 1
        # packing lower-bounds covering; greedy sandwiched by the ln bound
        pack = geometry.packing_lower(f2, f1, mu, eps)
        greedy = geometry.covering_greedy(f2, f1, mu, eps).size
        if pack > base.size:
            viol["packing"] += 1
        if greedy < base.size:
            viol["greedy_ge_exact"] += 1
        if greedy > base.size * (1 + math.log(len(f2))):
            viol["greedy_bound"] += 1
        rows.append({"trial": t, "eps": eps, "exact_size": base.size,
                     "greedy_size": greedy, "packing": pack})
    aggregates = {"violations": viol}
    assertions = [
        Assertion("covering_monotone_in_norm_class", viol["monotone"] == 0,
                  f"{viol['monotone']} violations"),
        Assertion("covering_shift_invariant", viol["shift"] == 0,
                  f"{viol['shift']} violations"),
        Assertion("covering_homogeneous", viol["homogeneity"] == 0,
                  f"{viol['homogeneity']} violations"),
        Assertion("hull_never_beats_class_norm", viol["hull"] == 0,
                  f"{viol['hull']} violations (tol {norm_tol:.0e})"),
        Assertion("packing_at_most_covering", viol["packing"] == 0,
                  f"{viol['packing']} violations"),
        Assertion("greedy_between_exact_and_log_bound",
                  viol["greedy_ge_exact"] == 0 and viol["greedy_bound"] == 0,
                  "greedy stayed within [exact, exact(1+ln|F2|)]"),
    ]
    return rows, aggregates, assertions


def _exp_duality_sweep(cfg):
    inst = {"eps_sweep": [0.45, 0.3, 0.2], "random_instances": 50,
            "random_x_size": 5, "random_members": 6}
    inst.update(cfg["instance"])
    consts = cfg["constants"]
    c = consts["duality_c"]
    rows = []
    holds_all = True
    for t in range(inst["random_instances"]):
        rng = stream(cfg["seed"], t)
        domain = Domain.of_size(inst["random_x_size"])
        mu = Distribution(domain, rng.random(domain.size) + 1e-3)
        m1 = float(rng.choice([0.5, 1.0, 2.0]))
        m2 = float(rng.choice([0.5, 1.0, 2.0]))
        k1 = int(rng.integers(2, inst["random_members"] + 1))
        k2 = int(rng.integers(2, inst["random_members"] + 1))
        f1 = ExplicitClass(domain, GENERIC, tuple(
            Fn(domain, rng.uniform(-m1, m1, domain.size), GENERIC, m1)
            for _ in range(k1)))
        f2 = ExplicitClass(domain, GENERIC, tuple(
            Fn(domain, rng.uniform(-m2, m2, domain.size), GENERIC, m2)
            for _ in range(k2)))
        eps = float(rng.uniform(0.1, 1.0)) * m1 * m2
        rep = geometry.duality_check(f1, f2, mu, eps, c)
        holds_all &= rep.holds
        rows.append({"kind": "random", "trial": t, "eps": eps,
                     "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.holds,
                     "grid_step": ""})
    sweep_step = consts["sweep_grid_step"]
    lhs_values = []
    for eps in inst["eps_sweep"]:
        had = constructions.make_hadamard_instance(eps, grid_step=sweep_step)
        count = geometry.cube_packing_lower(eps, had.m, sweep_step,
                                            had.columns, had.mu)
        lhs = math.log2(count)
        rhs_cov = geometry.covering_exact(had.columns, had.cube, had.mu, eps / 8)
        rhs_entropy = math.log2(rhs_cov.size)
        rhs = c * (1.0 / eps) ** 2 * (1 + rhs_entropy)
        holds = lhs <= rhs
        holds_all &= holds
        lhs_values.append(lhs)
        rows.append({"kind": "hadamard", "trial": had.m, "eps": eps,
                     "lhs": lhs, "rhs": rhs, "holds": holds,
                     "grid_step": sweep_step})
    x = np.log2(1.0 / np.array(inst["eps_sweep"]))
    y = np.log2(np.array(lhs_values))
    exponent = float(np.polyfit(x, y, 1)[0])
    lo_exp = cfg["acceptance"].get("exponent_low", 1.5)
    hi_exp = cfg["acceptance"].get("exponent_high", 2.5)
    aggregates = {"exponent": exponent, "lhs_sweep": lhs_values,
                  "all_hold": holds_all, "duality_c": c,
                  "sweep_grid_step": sweep_step}
    assertions = [
        Assertion("duality_inequality_holds", holds_all,
                  f"C = {c}, every instance satisfied the inequality"),
        Assertion("tightness_exponent_in_band",
                  lo_exp <= exponent <= hi_exp,
                  f"fitted exponent {exponent:.3f} in [{lo_exp}, {hi_exp}]"),
    ]
    return rows, aggregates, assertions


def _exp_fat_lift(cfg):
    inst = {"x_size": 6, "d_members": 5, "max_points": 4}
    inst.update(cfg["instance"])
    rows = []
    mismatches = 0
    trials = min(cfg["trials"], 50)
    for t in range(trials):
        rng = stream(cfg["seed"], t)
        domain = Domain.of_size(inst["x_size"])
        d_cls = _random_distinguisher_class(domain, rng, inst["d_members"])
        gamma = float(rng.uniform(0.05, 0.5))
        base = geometry.fat_exact(d_cls, gamma, inst["max_points"])
        lifted = geometry.lift_distinguisher_class(d_cls)
        lift_fat = geometry.fat_exact(lifted, gamma, inst["max_points"])
        if base.dimension != lift_fat.dimension:
            mismatches += 1
        rows.append({"trial": t, "gamma": gamma, "fat": base.dimension,
                     "fat_lifted": lift_fat.dimension})
    aggregates = {"mismatches": mismatches, "trials": trials}
    assertions = [Assertion("lifted_class_fat_identity", mismatches == 0,
                            f"{mismatches} mismatches over {trials} instances")]
    return rows, aggregates, assertions


def _sign_pattern_class(n: int) -> ExplicitClass:
    domain = Domain.of_size(n)
    members = []
    for bits in range(1 << n):
        vals = np.array([1.0 if (bits >> i) & 1 else -1.0 for i in range(n)])
        members.append(Fn(domain, vals, DISTINGUISHER))
    return ExplicitClass(domain, DISTINGUISHER, tuple(members))


def _exp_fat_cover_bridge(cfg):
    inst = {"points": [2, 3, 4], "eps": 0.1, "grid_step": 0.125}
    inst.update(cfg["instance"])
    eps = inst["eps"]
    rows = []
    ok_all = True
    for n in inst["points"]:
        d_cls = _sign_pattern_class(n)
        mu = Distribution.uniform(d_cls.domain)
        fat = geometry.fat_exact(d_cls, 6 * eps, n)
        certified = fat.dimension == n
        count = geometry.cube_packing_lower(eps, n, inst["grid_step"], d_cls,
                                            mu, lo=0.0, hi=1.0)
        entropy = math.log2(count)
        ok = certified and entropy >= n / 8
        ok_all &= ok
        rows.append({"points": n, "six_eps": 6 * eps,
                     "fat_dimension": fat.dimension, "packing": count,
                     "entropy": entropy, "bound": n / 8, "ok": ok})
    aggregates = {"all_ok": ok_all}
    assertions = [Assertion(
        "fat_shattering_forces_metric_entropy", ok_all,
        "entropy of the predictor-cube packing reached n/8 on every certified instance")]
    return rows, aggregates, assertions


def _exp_erm_fail_3const(cfg):
    inst = {"x_size": 101, "n": 10, "eps": 1 / 3}
    inst.update(cfg["instance"])
    built = constructions.make_erm_failure_3const(inst["x_size"])
    n = inst["n"]
    rows = []
    failures = 0
    case_violations = 0
    for t in range(cfg["trials"]):
        params = learners.LearnParams(inst["eps"], 0.1, n, cfg["seed"])
        ex = core.sample(built.preds.members[built.target_index], built.mu, n,
                         cfg["seed"], 10_000 + t)
        p = learners.erm_learn(built.preds, built.dists, built.mu, params, ex)
        out_idx = next(i for i, q in enumerate(built.preds.members)
                       if q is p)
        n_ones = int(ex.outcomes.sum())
        failed = out_idx != built.target_index
        failures += failed
        # the proof's case analysis: below half -> constant 0, above -> constant 1
        if n_ones < n / 2 and out_idx != 0:
            case_violations += 1
        if n_ones > n / 2 and out_idx != 2:
            case_violations += 1
        rows.append({"trial": t, "ones": n_ones, "output_index": out_idx,
                     "failed": failed})
    lo, hi = wilson_interval(failures, cfg["trials"])
    bound = cfg["acceptance"].get("min_failure_wilson_lower", 0.66)
    aggregates = {"failure_rate": failures / cfg["trials"],
                  "wilson_lower": lo, "case_violations": case_violations}
    assertions = [
        Assertion("erm_fails_with_high_probability", lo >= bound,
                  f"failure Wilson lower bound {lo:.4f} >= {bound}"),
        Assertion("erm_case_analysis_exact", case_violations == 0,
                  "output matched the one-count case analysis on every trial"),
    ]
    return rows, aggregates, assertions


def _exp_erm_fail_parity(cfg):
    inst = {"n": 200, "m": 10_000, "eps": 0.25}
    inst.update(cfg["instance"])
    built = constructions.make_erm_failure_parity_sets(inst["n"], inst["m"])
    tol = cfg["acceptance"].get("distance_tol", 1e-12)
    # exact distance structure
    d01 = core.dual_norm(built.preds.members[0] - built.preds.members[1],
                         built.dists, built.mu)
    expected = inst["n"] / (2 * inst["m"])
    dist_ok = abs(d01 - expected) <= tol
    min_other = min(
        core.dual_norm(built.preds.members[i] - built.preds.members[j],
                       built.dists, built.mu)
        for i in range(4) for j in range(i + 1, 4) if (i, j) != (0, 1))
    sep_ok = min_other >= 1 / 3 - tol
    # the analysis branch: ERM restricted to {p1, p2, p3} with target p0
    branch = ExplicitClass(built.domain, PREDICTOR,
                           tuple(built.preds.members[i] for i in built.branch_members))
    target = built.preds.members[built.branch_target_index]
    wrong = built.preds.members[built.branch_wrong_index]
    rows = []
    wrong_count = 0
    n = inst["n"]
    for t in range(cfg["trials"]):
        params = learners.LearnParams(inst["eps"], 0.1, n, cfg["seed"])
        ex = core.sample(target, built.mu, n, cfg["seed"], 20_000 + t)
        p = learners.erm_learn(branch, built.dists, built.mu, params, ex)
        got_wrong = p is wrong
        wrong_count += got_wrong
        rows.append({"trial": t, "returned_wrong": got_wrong})
    rate = wrong_count / cfg["trials"]
    need = cfg["acceptance"].get("min_wrong_rate", 0.95)
    # which branch the generic lexicographic covering picks on the full class
    full_cov = geometry.covering_exact(built.preds, built.dists, built.mu,
                                       inst["eps"] / 2)
    aggregates = {"wrong_rate": rate, "distance_p0_p1": d01,
                  "min_other_distance": min_other,
                  "full_class_covering": list(full_cov.centers),
                  "wrong_norm_gap": core.dual_norm(wrong - target, built.dists,
                                                   built.mu)}
    assertions = [
        Assertion("p0_p1_distance_exact", dist_ok,
                  f"|distance - n/2m| = {abs(d01 - expected):.2e}"),
        Assertion("other_pairs_separated", sep_ok,
                  f"min other distance {min_other:.4f} >= 1/3"),
        Assertion("erm_returns_far_predictor", rate >= need,
                  f"wrong-output rate {rate:.3f} >= {need}"),
    ]
    return rows, aggregates, assertions


def _dcover_trial(cfg, inst, t, realizable: bool):
    domain = Domain.of_size(inst["x_size"])
    mu = Distribution.uniform(domain)
    rng = stream(cfg["seed"], t)
    preds = ExplicitClass(domain, PREDICTOR, tuple(
        _random_predictor(domain, rng) for _ in range(inst["p_members"])))
    dists = _random_distinguisher_class(domain, rng, inst["d_members"])
    if realizable:
        target = preds.members[int(rng.integers(inst["p_members"]))]
    else:
        target = _random_predictor(domain, rng)
    ex = core.sample(target, mu, inst["n"], cfg["seed"], 30_000 + t)
    params = learners.LearnParams(inst["eps"], inst["delta"], inst["n"],
                                  cfg["seed"])
    p = learners.dcover_learn(preds, dists, mu, params, ex)
    adv = core.advantage(p, target, dists, mu)
    opt = min(core.advantage(q, target, dists, mu) for q in preds.members)
    return adv, opt


def _exp_dcover(cfg, realizable: bool):
    inst = {"x_size": 8, "p_members": 4, "d_members": 6, "n": 4000,
            "eps": 0.25, "delta": 0.1}
    inst.update(cfg["instance"])
    rows = []
    successes = 0
    for t in range(cfg["trials"]):
        adv, opt = _dcover_trial(cfg, inst, t, realizable)
        bound = inst["eps"] if realizable else 3 * opt + inst["eps"]
        ok = adv <= bound
        successes += ok
        rows.append({"trial": t, "advantage": adv, "best_in_class": opt,
                     "bound": bound, "success": ok})
    rate = successes / cfg["trials"]
    need = cfg["acceptance"].get("min_success_rate", 0.9)
    label = "realizable" if realizable else "agnostic"
    aggregates = {"success_rate": rate,
                  "wilson_lower": wilson_interval(successes, cfg["trials"])[0]}
    assertions = [Assertion(f"dcover_{label}_success", rate >= need,
                            f"success rate {rate:.3f} >= {need}")]
    return rows, aggregates, assertions


def _exp_boost_potential(cfg):
    inst = {"m": 8, "n": 20_000, "eps": 0.2, "delta": 0.1}
    inst.update(cfg["instance"])
    d_cls = geometry.hadamard_class(inst["m"])
    mu = Distribution.uniform(d_cls.domain)
    eps = inst["eps"]
    t_base = cfg["constants"]["boost_t_base"]
    drop_bound = eps * eps / 25 - 1e-12
    rows = []
    drop_viol = 0
    clamp_viol = 0
    qualifying = 0
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        target = _random_predictor(d_cls.domain, rng)
        ex = core.sample(target, mu, inst["n"], cfg["seed"], 40_000 + t)
        params = learners.LearnParams(eps, inst["delta"], inst["n"],
                                      cfg["seed"] + t)
        _, trace = learners.boost_learn(d_cls, params, ex, t_base=t_base,
                                        oracle_target=target, oracle_mu=mu)
        for r in trace.update_rounds():
            if r.potential_after_clamp > r.potential_after_update + 1e-15:
                clamp_viol += 1
            if r.true_gap >= eps / 5:
                qualifying += 1
                if r.potential_before - r.potential_after_clamp < drop_bound:
                    drop_viol += 1
        rows.append({"trial": t, "rounds": len(trace.rounds),
                     "updates": len(trace.update_rounds()),
                     "exit": trace.exit_line})
    aggregates = {"qualifying_rounds": qualifying, "drop_violations": drop_viol,
                  "clamp_violations": clamp_viol}
    assertions = [
        Assertion("potential_drops_by_eps_sq_over_25", drop_viol == 0,
                  f"{drop_viol} violations over {qualifying} qualifying rounds"),
        Assertion("clamping_never_increases_potential", clamp_viol == 0,
                  f"{clamp_viol} clamp violations"),
    ]
    return rows, aggregates, assertions


def _exp_boost_endtoend(cfg):
    inst = {"m": 8, "eps": 0.2, "delta": 0.1}
    inst.update(cfg["instance"])
    d_cls = geometry.hadamard_class(inst["m"])
    mu = Distribution.uniform(d_cls.domain)
    eps, delta = inst["eps"], inst["delta"]
    t_base = cfg["constants"]["boost_t_base"]
    t_budget = math.ceil(t_base / (eps * eps))

    def run_trial(n, trial, offset):
        rng = stream(cfg["seed"], offset + trial)
        target = _random_predictor(d_cls.domain, rng)
        ex = core.sample(target, mu, n, cfg["seed"], offset + 100_000 + trial)
        params = learners.LearnParams(eps, delta, n, cfg["seed"] + trial)
        p, _ = learners.boost_learn(d_cls, params, ex, t_base=t_base)
        return core.advantage(p, target, d_cls, mu) <= eps

    def probe(n, k):
        return sum(run_trial(n, t, 1_000_000 * (k + 1)) for t in range(cfg["trials"]))

    n_found, probes = sample_size_search(probe, delta, t_budget, cfg["trials"],
                                         slack=cfg["constants"]["search_slack"])
    successes = sum(run_trial(n_found, t, 50_000_000) for t in range(cfg["trials"]))
    lo, hi = wilson_interval(successes, cfg["trials"])
    need = cfg["acceptance"].get("min_success_wilson_lower", 1 - delta)
    rows = [{"probe": i, **p} for i, p in enumerate(probes)]
    rows.append({"probe": "confirm", "n": n_found, "successes": successes,
                 "trials": cfg["trials"], "rate": successes / cfg["trials"],
                 "wilson_lower": lo})
    aggregates = {"n_found": n_found, "confirm_rate": successes / cfg["trials"],
                  "confirm_wilson_lower": lo}
    assertions = [Assertion(
        "boost_reaches_target_advantage", lo >= need,
        f"Wilson lower bound {lo:.4f} >= {need} at n = {n_found}")]
    return rows, aggregates, assertions


def _exp_mcboost(cfg):
    inst = {"x_size": 6, "d_members": 4, "cells": 3, "eps": 0.4,
            "equiv_trials": 10, "quiet_trials": 10, "fat_trials": 20}
    inst.update(cfg["instance"])
    domain = Domain.of_size(inst["x_size"])
    mu = Distribution.uniform(domain)
    eps = inst["eps"]
    t_base = cfg["constants"]["boost_t_base"]
    t_budget = math.ceil(t_base / (eps * eps))
    trivial = learners.LevelPartition(())
    rows = []
    # (a) the one-cell partition reproduces plain boosting exactly
    equiv_fail = 0
    for t in range(inst["equiv_trials"]):
        rng = stream(cfg["seed"], t)
        d_cls = _random_distinguisher_class(domain, rng, inst["d_members"])
        target = _random_predictor(domain, rng)
        n = 40 * t_budget
        ex = core.sample(target, mu, n, cfg["seed"], 60_000 + t)
        params = learners.LearnParams(eps, 0.1, n, cfg["seed"] + t)
        p_plain, tr_plain = learners.boost_learn(d_cls, params, ex, t_base=t_base)
        p_mc, tr_mc = learners.mc_boost_learn(d_cls, params, trivial, ex,
                                              t_base=t_base)
        same = np.array_equal(p_plain.values, p_mc.values) \
            and tr_plain.exit_line == tr_mc.exit_line \
            and len(tr_plain.rounds) == len(tr_mc.rounds)
        equiv_fail += not same
        rows.append({"part": "equivalence", "trial": t, "ok": same})
    # (b) with the target equal to the initial predictor no update fires
    cuts = tuple((j + 1) / inst["cells"] for j in range(inst["cells"] - 1))
    partition = learners.LevelPartition(cuts)
    fired = 0
    for t in range(inst["quiet_trials"]):
        rng = stream(cfg["seed"], 1000 + t)
        d_cls = _random_distinguisher_class(domain, rng, inst["d_members"])
        target = Fn.constant(domain, 0.5, PREDICTOR)
        n = 1000 * t_budget
        ex = core.sample(target, mu, n, cfg["seed"], 70_000 + t)
        params = learners.LearnParams(eps, 0.1, n, cfg["seed"] + t)
        _, trace = learners.mc_boost_learn(d_cls, params, partition, ex,
                                           t_base=t_base)
        updates = len(trace.update_rounds())
        fired += updates > 0
        rows.append({"part": "quiet", "trial": t, "updates": updates,
                     "ok": updates == 0})
    # (c) masking adds at most one to the fat dimension
    fat_viol = 0
    for t in range(inst["fat_trials"]):
        rng = stream(cfg["seed"], 2000 + t)
        d_cls = _random_distinguisher_class(domain, rng, inst["d_members"])
        p = _random_predictor(domain, rng)
        gamma = float(rng.uniform(0.05, 0.4))
        masked = learners.masked_class(d_cls, p, partition)
        fat_d = geometry.fat_exact(d_cls, gamma, 4).dimension
        fat_m = geometry.fat_exact(masked, gamma, min(4, fat_d + 2)).dimension
        ok = fat_m <= fat_d + 1
        fat_viol += not ok
        rows.append({"part": "masked_fat", "trial": t, "fat": fat_d,
                     "fat_masked": fat_m, "ok": ok})
    aggregates = {"equivalence_failures": equiv_fail, "quiet_fired": fired,
                  "masked_fat_violations": fat_viol}
    assertions = [
        Assertion("one_cell_partition_reduces_to_boost", equiv_fail == 0,
                  f"{equiv_fail} mismatches"),
        Assertion("no_update_when_target_matches", fired == 0,
                  f"{fired} runs fired an update"),
        Assertion("masked_class_fat_within_one", fat_viol == 0,
                  f"{fat_viol} violations"),
    ]
    return rows, aggregates, assertions


def _exp_zerofat(cfg):
    inst = {"x_size": 10, "d_members": 5, "eps": 0.25, "delta": 0.1}
    inst.update(cfg["instance"])
    domain = Domain.of_size(inst["x_size"])
    mu = Distribution.uniform(domain)
    eps, delta = inst["eps"], inst["delta"]
    n = math.ceil(64 / (eps * eps) * math.log(4 / delta))
    rows = []
    successes = 0
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        base = rng.uniform(-0.9, 0.9, domain.size)
        spread = eps / 25
        members = tuple(
            Fn(domain, np.clip(base + rng.uniform(-spread * 0.9, spread * 0.9,
                                                  domain.size), -1, 1),
               DISTINGUISHER)
            for _ in range(inst["d_members"]))
        d_cls = ExplicitClass(domain, DISTINGUISHER, members)
        target = _random_predictor(domain, rng)
        ex = core.sample(target, mu, n, cfg["seed"], 80_000 + t)
        params = learners.LearnParams(eps, delta, n, cfg["seed"] + t)
        p = learners.zero_fat_learn(d_cls, params, ex)
        adv = core.advantage(p, target, d_cls, mu)
        ok = adv <= eps
        successes += ok
        rows.append({"trial": t, "advantage": adv, "success": ok})
    rate = successes / cfg["trials"]
    need = cfg["acceptance"].get("min_success_rate", 0.9)
    aggregates = {"success_rate": rate, "n": n}
    assertions = [Assertion("zero_fat_learner_succeeds", rate >= need,
                            f"success rate {rate:.3f} >= {need} at n = {n}")]
    return rows, aggregates, assertions


def _exp_easy_agnostic(cfg):
    inst = {"m": 4, "eps": 0.1, "delta": 0.05}
    inst.update(cfg["instance"])
    sep = constructions.make_separation_instance(inst["m"])
    eps, delta = inst["eps"], inst["delta"]
    mu_bot = float(sep.mu.weights[0])
    n = math.ceil(max(8 / mu_bot * math.log(2 / delta),
                      math.log(4 / delta) / (eps * eps)))
    cube = FullCubeClass(sep.domain, DISTINGUISHER, lo=-1.0, hi=1.0)
    rows = []
    successes = 0
    for t in range(cfg["trials"]):
        rng = stream(cfg["seed"], t)
        target = _random_predictor(sep.domain, rng)
        ex = core.sample(target, sep.mu, n, cfg["seed"], 90_000 + t)
        p = learners.easy_agnostic_learn(ex, sep.domain, sep.bot_index)
        adv = core.advantage(p, target, cube, sep.mu)
        opt = min(core.advantage(q, target, cube, sep.mu)
                  for q in sep.preds.members)
        ok = adv <= opt + eps
        successes += ok
        rows.append({"trial": t, "advantage": adv, "best_in_class": opt,
                     "success": ok})
    rate = successes / cfg["trials"]
    need = cfg["acceptance"].get("min_success_rate", 1 - delta)
    aggregates = {"success_rate": rate, "n": n}
    assertions = [Assertion("easy_agnostic_learner_succeeds", rate >= need,
                            f"success rate {rate:.3f} >= {need} at n = {n}")]
    return rows, aggregates, assertions


def _exp_separation_components(cfg):
    inst = {"m": 8, "parity_trials": 20, "candidate_trials": 100,
            "posterior_m": 6, "posterior_n": 3, "posterior_trials": 100,
            "reduction_trials": 20}
    inst.update(cfg["instance"])
    m = inst["m"]
    sep = constructions.make_separation_instance(m)
    size = 1 << m
    tol = cfg["acceptance"].get("norm_tol", 1e-12)
    parseval_tol = cfg["acceptance"].get("parseval_tol", 1e-9)
    rows = []
    # (a) Parseval on the string restriction
    d_mat = sep.dists.materialize().matrix[:, 1:]
    parseval_err = 0.0
    rng = stream(cfg["seed"], 0)
    for _ in range(20):
        g = rng.uniform(-1, 1, size)
        ips = d_mat @ (g / size)
        parseval_err = max(parseval_err,
                           abs(float((ips ** 2).sum()) - float(g @ g) / size))
    rows.append({"part": "parseval", "value": parseval_err, "ok": parseval_err <= parseval_tol})
    # (b) norm exactly 1/6 for random parities against the bot-1 predictor
    norm_err = 0.0
    for t in range(inst["parity_trials"]):
        g = int(stream(cfg["seed"], 100 + t).integers(size))
        p_t = constructions.predictor_from_boolean(
            sep, constructions.parity_values(m, g))
        nm = core.dual_norm(p_t - sep.preds.members[1], sep.dists, sep.mu)
        norm_err = max(norm_err, abs(nm - 1 / 6))
    rows.append({"part": "parity_norm", "value": norm_err, "ok": norm_err <= tol})
    # (c) candidate bound: at most 64 parities (anti-parities) in the list
    worst_parity = 0
    worst_anti = 0
    for t in range(inst["candidate_trials"]):
        rng = stream(cfg["seed"], 200 + t)
        vals = rng.random(size + 1)
        vals[0] *= 0.5  # p(bot) <= 1/2
        counts = constructions.candidate_list_counts(
            sep, Fn(sep.domain, vals, PREDICTOR))
        worst_parity = max(worst_parity, counts["n_parity"])
        vals2 = rng.random(size + 1)
        vals2[0] = 0.5 + 0.5 * vals2[0]  # p(bot) >= 1/2
        counts2 = constructions.candidate_list_counts(
            sep, Fn(sep.domain, vals2, PREDICTOR))
        worst_anti = max(worst_anti, counts2["n_anti"])
    rows.append({"part": "candidate_bound", "value": max(worst_parity, worst_anti),
                 "ok": worst_parity <= 64 and worst_anti <= 64})
    # (d) posterior structure of parity learning
    post = constructions.parity_posterior_check(
        inst["posterior_m"], inst["posterior_n"], cfg["seed"] + 1,
        inst["posterior_trials"])
    expected = 1 << (inst["posterior_m"] - inst["posterior_n"])
    counts_ok = all(r["n_consistent_parity"] == expected
                    and r["n_consistent_anti"] == expected
                    for r in post["rows"] if r["independent"])
    indep_successes = sum(r["independent"] for r in post["rows"])
    wilson_hi = wilson_interval(indep_successes, inst["posterior_trials"])[1]
    indep_ok = wilson_hi >= 1 - 1 / expected  # CI consistent with the bound
    rows.append({"part": "posterior_counts", "value": post["independence_rate"],
                 "ok": counts_ok and post["elimination_matches_enumeration"]})
    # oracle list reduction always succeeds
    red_fail = 0
    for t in range(inst["reduction_trials"]):
        rng = stream(cfg["seed"], 300 + t)
        g = int(rng.integers(size))
        li = constructions.ListLearningInstance(
            m, n=4, t_values=constructions.parity_values(m, g), k=64)
        oracle = lambda s, _g=g: constructions.predictor_from_boolean(
            sep, constructions.parity_values(m, _g))
        out = constructions.run_list_reduction(oracle, li, cfg["seed"] + t)
        red_fail += not out["success"]
    rows.append({"part": "oracle_reduction", "value": red_fail, "ok": red_fail == 0})
    aggregates = {"parseval_error": parseval_err, "max_norm_error": norm_err,
                  "worst_parity_candidates": worst_parity,
                  "worst_anti_candidates": worst_anti,
                  "posterior_independence_rate": post["independence_rate"]}
    assertions = [
        Assertion("parseval_identity", parseval_err <= parseval_tol,
                  f"max error {parseval_err:.2e}"),
        Assertion("parity_norm_exact", norm_err <= tol,
                  f"max |norm - 1/6| = {norm_err:.2e}"),
        Assertion("candidate_list_bound", worst_parity <= 64 and worst_anti <= 64,
                  f"worst counts {worst_parity} / {worst_anti} <= 64"),
        Assertion("posterior_counts_exact", counts_ok,
                  "every independent draw left exactly 2^(m-n) of each kind"),
        Assertion("elimination_matches_enumeration",
                  post["elimination_matches_enumeration"],
                  "rank formula matched exhaustive counts on every draw"),
        Assertion("independence_rate_consistent", indep_ok,
                  f"Wilson upper {wilson_hi:.4f} compatible with >= {1 - 1/expected:.4f}"),
        Assertion("oracle_reduction_succeeds", red_fail == 0,
                  f"{red_fail} failures"),
    ]
    return rows, aggregates, assertions


def _exp_cube_packing(cfg):
    inst = {"n": 4, "eps": 0.125, "grid_step": 0.125}
    inst.update(cfg["instance"])
    n = inst["n"]
    domain = Domain.of_size(n)
    mu = Distribution.uniform(domain)
    cube = FullCubeClass(domain, GENERIC, lo=-1.0, hi=1.0)
    count = geometry.cube_packing_lower(inst["eps"], n, inst["grid_step"],
                                        cube, mu)
    entropy = math.log2(count)
    bound = n * math.log2(1 / (math.e * inst["eps"]))
    ok = entropy >= bound
    rows = [{"n": n, "eps": inst["eps"], "grid_step": inst["grid_step"],
             "count": count, "entropy": entropy, "volume_bound": bound}]
    aggregates = {"count": count, "entropy": entropy, "volume_bound": bound}
    assertions = [Assertion(
        "packing_entropy_meets_volume_bound", ok,
        f"log2(count) = {entropy:.3f} >= {bound:.3f}")]
    return rows, aggregates, assertions


EXPERIMENTS = {
    "adv-vs-l1": _exp_adv_vs_l1,
    "transform-mc": _exp_transform_mc,
    "covering-algebra": _exp_covering_algebra,
    "duality-sweep": _exp_duality_sweep,
    "fat-lift": _exp_fat_lift,
    "fat-cover-bridge": _exp_fat_cover_bridge,
    "erm-fail-3const": _exp_erm_fail_3const,
    "erm-fail-parity": _exp_erm_fail_parity,
    "dcover-realizable": lambda cfg: _exp_dcover(cfg, True),
    "dcover-agnostic": lambda cfg: _exp_dcover(cfg, False),
    "boost-potential": _exp_boost_potential,
    "boost-endtoend": _exp_boost_endtoend,
    "mcboost": _exp_mcboost,
    "zerofat": _exp_zerofat,
    "easy-agnostic": _exp_easy_agnostic,
    "separation-components": _exp_separation_components,
    "cube-packing": _exp_cube_packing,
}


def run_experiment(config: dict) -> ExperimentReport:
    """Dispatch to the named experiment and assemble its report."""
    cfg = _merged_config(config)
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ValueError(f"unknown experiment {name!r}; known ids: {known}")
    rows, aggregates, assertions = EXPERIMENTS[name](cfg)
    return ExperimentReport(name, cfg, CODE_VERSION, rows, aggregates,
                            list(assertions))
