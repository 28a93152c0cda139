"""Per-point scale sweeps: predicate fractions over dyadic scales, shell
frequencies, doubling scales, labeling gaps, and local dimension estimates.

Tree-backed sweeps run to the tree depth.  Statistics whose horizons exceed
any storable depth (thousands of scales) run on exact digit arithmetic:
integer dyadic expansions for the purely geometric predicates, and the
generators' digit models for conditional masses.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dyadic import DomainError, DyadicMassTree, ZeroMassError, morton_decode
from .generators import AxisDigitModel
from . import geometry

Labeler = Callable[[int, int], bool]


# ---------------------------------------------------------------------------
# Scale predicates on trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateSpec:
    """A registered per-scale predicate with its parameters."""

    kind: str
    params: dict

    KINDS = ("dyadic_doubling", "doubling", "shell", "porous", "trapped",
             "dyadic_homogeneity", "euclidean_homogeneity")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown predicate kind {self.kind!r}")


@dataclass
class ScaleReport:
    """Outcome booleans per scale k = 1..horizon for each predicate, with
    the fraction of satisfied scales; a truncated chain flags the report."""

    point: np.ndarray
    horizon: int
    outcomes: dict[str, np.ndarray] = field(default_factory=dict)
    fractions: dict[str, float] = field(default_factory=dict)
    truncated: dict[str, int | None] = field(default_factory=dict)


def _predicate_max_level(spec: PredicateSpec, N: int) -> int:
    a = int(spec.params.get("a", 0))
    if spec.kind in ("dyadic_doubling", "shell", "dyadic_homogeneity"):
        return N + a
    if spec.kind == "euclidean_homogeneity":
        return N + geometry.dyadic_alignment(float(spec.params["delta"]))
    return N


def evaluate_predicate(tree: DyadicMassTree, x: Sequence[float], k: int,
                       spec: PredicateSpec) -> bool:
    """One predicate at one scale; ZeroMassError propagates to the sweep."""
    p = spec.params
    if spec.kind == "dyadic_doubling":
        a = int(p["a"])
        parent = tree.mass_of(tree.cube_at(x, k))
        child = tree.mass_of(tree.cube_at(x, k + a))
        if parent <= 0.0:
            raise ZeroMassError("chain hit a zero-mass cube")
        return child >= float(p["c"]) * parent
    if spec.kind == "doubling":
        cube = tree.cube_at(x, k)
        own = tree.mass_of(cube)
        if own <= 0.0:
            raise ZeroMassError("chain hit a zero-mass cube")
        return own >= float(p["c"]) * tree.enlarged_cube_mass(cube, float(p["K"]))
    if spec.kind == "shell":
        K, a = int(p["K"]), int(p["a"])
        if 2 ** (a - 1) <= K:
            raise DomainError("shell predicate requires 2^(a-1) > K")
        coarse = tree.cube_at(x, k).index
        fine = tree.cube_at(x, k + a).index
        return all(K <= f - (c << a) <= (1 << a) - 1 - K
                   for c, f in zip(coarse, fine))
    if spec.kind == "porous":
        hit = geometry.porosity_exceeds(
            tree, np.asarray(x, dtype=float), 2.0 ** -k, float(p["alpha"]),
            holes=int(p.get("holes", 1)), mode=p.get("mode", "measure"),
            epsilon=float(p.get("epsilon", 0.0)),
            frames=int(p.get("frames", 2)), seed=int(p.get("seed", 0)),
            t_steps=int(p.get("t_steps", 12)))
        return hit is not None
    if spec.kind == "trapped":
        return geometry.chain_cube_trapped(
            tree, x, k, int(p["a"]), float(p["alpha"]), float(p["epsilon"]),
            int(p["m"]), frames=int(p.get("frames", 16)),
            seed=int(p.get("seed", 0)))
    if spec.kind == "dyadic_homogeneity":
        count = geometry.dyadic_homogeneity(tree, x, k, int(p["a"]),
                                            float(p["epsilon"]))
        return count > float(p["threshold"])
    if spec.kind == "euclidean_homogeneity":
        count = geometry.euclidean_homogeneity(
            tree, x, k, float(p["delta"]), float(p["epsilon"]),
            enlargement=float(p.get("enlargement", 5.0)))
        return count >= float(p["threshold"])
    raise DomainError(f"unknown predicate kind {spec.kind!r}")


def scale_fraction(tree: DyadicMassTree, x: Sequence[float], N: int,
                   predicates: dict[str, PredicateSpec]) -> ScaleReport:
    """Evaluate registered predicates at scales k = 1..N for one point."""
    if N < 1:
        raise DomainError("horizon N must be >= 1")
    x = np.asarray(x, dtype=float)
    report = ScaleReport(x, N)
    for name, spec in predicates.items():
        if _predicate_max_level(spec, N) > tree.depth:
            raise DomainError(f"predicate {name!r} needs levels beyond depth "
                              f"{tree.depth} at N={N}")
        vals = np.zeros(N, dtype=bool)
        cut = None
        for k in range(1, N + 1):
            try:
                vals[k - 1] = evaluate_predicate(tree, x, k, spec)
            except ZeroMassError:
                cut = k
                vals = vals[:k - 1]
                break
        report.outcomes[name] = vals
        report.truncated[name] = cut
        report.fractions[name] = float(vals.sum()) / N
    return report


def porosity_profile(tree: DyadicMassTree, x: Sequence[float], N: int,
                     holes: int = 1, mode: str = "measure",
                     epsilon: float = 0.0, frames: int = 2, seed: int = 0,
                     rho_steps: int = 10, t_steps: int = 12) -> np.ndarray:
    """Certified porosity lower bound at every scale k = 1..N."""
    x = np.asarray(x, dtype=float)
    return np.array([
        geometry.porosity_search(tree, x, 2.0 ** -k, holes=holes, mode=mode,
                                 epsilon=epsilon, frames=frames, seed=seed,
                                 rho_steps=rho_steps, t_steps=t_steps).rho
        for k in range(1, N + 1)
    ])


# ---------------------------------------------------------------------------
# Doubling-scale constants (tiny, but exactly the proofs' recipes)
# ---------------------------------------------------------------------------

def dyadic_doubling_log2c(d: int, p: float, a: int) -> float:
    """log2 of c(d,p,a) = 2^(-2ad/(1-p)) for the ancestor-doubling bound."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0,1)")
    return -2.0 * a * d / (1.0 - p)


def doubling_constants(d: int, p: float, K: int) -> tuple[int, float, float]:
    """(a, p', log2 c') for the enlarged-cube doubling lemma at target
    fraction p: a is the smallest gap with 2^(a-1) > K and shell frequency
    above p; c' comes from the ancestor-doubling bound at p'."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0,1)")
    a = max(1, K.bit_length() + 1)
    while 2 ** (a - 1) <= K or (1.0 - K * 2.0 ** (1 - a)) ** d <= p:
        a += 1
    p_a = ((1.0 - K * 2.0 ** (1 - a)) ** d + p) / 2.0
    p_prime = 1.0 + p - p_a
    return a, p_prime, dyadic_doubling_log2c(d, p_prime, a)


# ---------------------------------------------------------------------------
# Shell frequency at long horizons (exact integer digits)
# ---------------------------------------------------------------------------

@dataclass
class ShellFrequency:
    fractions: np.ndarray
    theoretical: float

    @property
    def mean(self) -> float:
        return float(self.fractions.mean())


def shell_frequency_check(tree: DyadicMassTree, omega_samples: int, K: int,
                          a: int, N: int, seed: int = 0) -> ShellFrequency:
    """Empirical frequency of Q^{k+a,x} ⊂ U_{K,a}(Q^{k,x}) over k = 1..N
    against (1 - K*2^(1-a))^d.

    Each sample pairs a measure-drawn point with an independent random
    translation; the translated point's dyadic digits are carried as exact
    integers at N + a bits, so the horizon is unlimited by tree depth.
    """
    if 2 ** (a - 1) <= K:
        raise DomainError("requires 2^(a-1) > K")
    d, D = tree.dimension, tree.depth
    keys, _ = tree.leaf_cells()
    if np.any(morton_decode(keys, D, d) >= (1 << (D - 1))):
        raise DomainError("shell frequency needs support inside [0,1/2)^d")
    P = N + a + 1
    rng = np.random.default_rng(seed)
    base_points = tree.sample_points(omega_samples, rng)
    base_idx = np.floor(base_points * (1 << D)).astype(np.int64)
    lo_mask = (1 << a) - 1
    fractions = np.empty(omega_samples)
    for s in range(omega_samples):
        y = []
        for j in range(d):
            z = ((2 * int(base_idx[s, j]) + 1) << (P - D - 1))
            bits = rng.integers(0, 2, size=P - 1)
            omega = int("".join("1" if b else "0" for b in bits), 2)
            y.append(z + omega)
        hits = 0
        for k in range(1, N + 1):
            shift = P - k - a
            if all(K <= ((c >> shift) & lo_mask) <= (1 << a) - 1 - K for c in y):
                hits += 1
        fractions[s] = hits / N
    theoretical = (1.0 - K * 2.0 ** (1 - a)) ** d
    return ShellFrequency(fractions, theoretical)


# ---------------------------------------------------------------------------
# Black/white labeling gap
# ---------------------------------------------------------------------------

def hash_labeler(seed: int, prob: float = 0.5) -> Labeler:
    """Deterministic i.i.d.-style cube labeling: the same cube always gets
    the same label, labels across cubes behave like independent coin flips."""
    key = int(seed).to_bytes(8, "little", signed=False)
    cut = int(prob * 2.0 ** 64)

    def label(level: int, cube_key: int) -> bool:
        h = hashlib.blake2b(digest_size=8, key=key)
        h.update(level.to_bytes(4, "little"))
        h.update(cube_key.to_bytes(max(1, (cube_key.bit_length() + 7) // 8), "little"))
        return int.from_bytes(h.digest(), "little") < cut

    return label


def label_gap(tree: DyadicMassTree, x: Sequence[float], a: int, N: int,
              labeler: Labeler) -> np.ndarray:
    """Running averages of mu_{k,x}(black ≺_a part) - 1[Q^{k,x} black].

    The labeler must be defined on every cube (level, key); zero-mass
    children contribute nothing to the conditional black mass.  Truncates
    at a zero-mass chain cube.
    """
    if N + a > tree.depth:
        raise DomainError("N + a exceeds tree depth; use the model variant")
    x = np.asarray(x, dtype=float)
    d = tree.dimension
    key = tree.cube_at(x, N).key
    chain_keys = [0] * (N + 1)
    for k in range(N, -1, -1):
        chain_keys[k] = key
        key >>= d
    terms = []
    for k in range(1, N + 1):
        cube = tree.cube_at(x, k)
        base = tree.mass_of(cube)
        if base <= 0.0:
            break
        ckeys, cmasses = tree.descendant_slice(cube, a)
        black = sum(float(m) for ck, m in zip(ckeys, cmasses)
                    if labeler(k + a, int(ck)))
        terms.append(black / base - (1.0 if labeler(k, chain_keys[k]) else 0.0))
    terms = np.array(terms)
    return np.cumsum(terms) / np.arange(1, len(terms) + 1)


def label_gap_selfsimilar(models: Sequence[AxisDigitModel], a: int, N: int,
                          labeler: Labeler, rng: np.random.Generator
                          ) -> np.ndarray:
    """Depth-unbounded labeling gap along a measure-typical digit path of a
    product-form generator."""
    d = len(models)
    states = [m.start() for m in models]
    key = 0
    terms = np.empty(N)
    for k in range(1, N + 1):
        # one chain step
        nxt_states = []
        local = 0
        for j, m in enumerate(models):
            (m0, m1), (s0, s1) = m.children(states[j])
            bit = 1 if rng.random() >= m0 else 0
            local |= bit << j
            nxt_states.append((s0, s1)[bit])
        key = (key << d) | local
        states = nxt_states
        # conditional black mass over the ≺_a children of the new chain cube
        black = 0.0
        stack = [(0, 0, 1.0, states)]
        while stack:
            lev, rel, mass, sts = stack.pop()
            if mass <= 0.0:
                continue
            if lev == a:
                if labeler(k + a, (key << (d * a)) | rel):
                    black += mass
                continue
            for child in range(1 << d):
                cmass = mass
                csts = []
                for j, m in enumerate(models):
                    (m0, m1), (s0, s1) = m.children(sts[j])
                    bit = (child >> j) & 1
                    cmass *= (m0, m1)[bit]
                    csts.append((s0, s1)[bit])
                stack.append((lev + 1, (rel << d) | child, cmass, csts))
        terms[k - 1] = black - (1.0 if labeler(k, key) else 0.0)
    return np.cumsum(terms) / np.arange(1, N + 1)


# ---------------------------------------------------------------------------
# Deep doubling along digit models (log-space, unbounded horizon)
# ---------------------------------------------------------------------------

def deep_scale_statistics(models: Sequence[AxisDigitModel], N: int,
                          rng: np.random.Generator,
                          dyadic_doubling: tuple[int, float] | None = None,
                          enlarged_doubling: float | None = None
                          ) -> dict[str, np.ndarray]:
    """Exact per-scale statistics along a sampled digit path.

    Returns log2 chain masses and, when requested, the dyadic-doubling
    outcomes (a, log2 c) and the K=3 enlarged-cube doubling outcomes at
    log2 c', all at horizon N with neighbor masses tracked in log space.
    """
    d = len(models)
    LOG0 = -math.inf
    levels = N + (dyadic_doubling[0] if dyadic_doubling is not None else 0)
    axis = []
    for m in models:
        axis.append({
            "idx": 0,
            "cells": {0: (0.0, m.start()), -1: (LOG0, None), 1: (LOG0, None)},
            "model": m,
        })
    log_mass = np.zeros(levels)
    ratio_sum = np.zeros(levels)  # log2 mu(Q)/mu(3Q) per scale
    running = 0.0
    for k in range(levels):
        step_log = 0.0
        step_ratio = 0.0
        for ax in axis:
            m = ax["model"]
            center_log, center_state = ax["cells"][0]
            (m0, m1), _ = m.children(center_state)
            u = rng.random()
            bit = 1 if u >= m0 else 0
            w = (m0, m1)[bit]
            if w <= 0.0:
                raise ZeroMassError("sampled into a dead branch")
            new_cells = {}
            for off in (-1, 0, 1):
                src = (bit + off) >> 1
                c = (bit + off) & 1
                src_log, src_state = ax["cells"][src]
                if src_log == LOG0:
                    new_cells[off] = (LOG0, None)
                    continue
                (n0, n1), (s0, s1) = m.children(src_state)
                factor = (n0, n1)[c]
                if factor <= 0.0:
                    new_cells[off] = (LOG0, None)
                    continue
                new_cells[off] = (src_log + math.log2(factor) - math.log2(w),
                                  (s0, s1)[c])
            ax["idx"] = 2 * ax["idx"] + bit
            top = 1 << (k + 1)
            if ax["idx"] - 1 < 0:
                new_cells[-1] = (LOG0, None)
            if ax["idx"] + 1 >= top:
                new_cells[1] = (LOG0, None)
            ax["cells"] = new_cells
            step_log += math.log2(w)
            l = new_cells[-1][0]
            r = new_cells[1][0]
            # log2(1 + 2^l + 2^r), stable
            mx = max(0.0, l, r)
            step_ratio -= mx + math.log2(2.0 ** (0.0 - mx)
                                         + (2.0 ** (l - mx) if l > LOG0 else 0.0)
                                         + (2.0 ** (r - mx) if r > LOG0 else 0.0))
        running += step_log
        log_mass[k] = running
        ratio_sum[k] = step_ratio
    out = {"log2_chain_mass": log_mass[:N], "log2_enlarged_ratio": ratio_sum[:N]}
    if dyadic_doubling is not None:
        a, log2c = dyadic_doubling
        padded = np.r_[0.0, log_mass]
        diffs = padded[1 + a:N + a + 1] - padded[1:N + 1]
        out["dyadic_doubling"] = diffs >= log2c
    if enlarged_doubling is not None:
        out["enlarged_doubling"] = ratio_sum[:N] >= enlarged_doubling
    return out


# ---------------------------------------------------------------------------
# Local dimension
# ---------------------------------------------------------------------------

@dataclass
class DimensionEstimate:
    """Ball-scaling slope with limsup/liminf window proxies, the dyadic
    chain value log2 mu(Q^{N,x}) / (-N), and the bracket widths of the ball
    masses used."""

    slope: float
    upper: float
    lower: float
    dyadic: float
    bracket_widths: np.ndarray


def dyadic_upper_dim(tree: DyadicMassTree, x: Sequence[float], N: int) -> float:
    """log2 mu(Q^{N,x}) / (-N); the finite-scale dyadic dimension value."""
    if not 1 <= N <= tree.depth:
        raise DomainError("N must lie in 1..depth")
    m = tree.mass_of(tree.cube_at(x, N))
    if m <= 0.0:
        raise ZeroMassError("chain cube carries no mass")
    return math.log2(m) / (-N)


def local_dim_estimate(tree: DyadicMassTree, x: Sequence[float], N: int
                       ) -> DimensionEstimate:
    """Regression estimate of the local dimension from dyadic-radius ball
    masses, with sliding-window max/min as upper/lower proxies.

    Windows: the slope uses the finest ceil(N/2) scales; the proxies slide
    width-ceil(N/4) windows across them.  Radii with zero ball mass
    truncate the radius set.
    """
    if not 1 <= N <= tree.depth:
        raise DomainError("N must lie in 1..depth")
    x = np.asarray(x, dtype=float)
    logr, logm, widths = [], [], []
    for j in range(1, N + 1):
        est = tree.ball_mass(x, 2.0 ** -j)
        if est.midpoint <= 0.0:
            break
        logr.append(-float(j))
        logm.append(math.log2(est.midpoint))
        widths.append(est.width)
    if len(logr) < 2:
        raise ZeroMassError("not enough positive-mass radii for a slope")
    logr = np.array(logr)
    logm = np.array(logm)
    n = len(logr)
    tail = max(2, math.ceil(n / 2))
    w = max(2, math.ceil(n / 4))
    sl_tail = np.polyfit(logr[-tail:], logm[-tail:], 1)[0]
    slopes = [np.polyfit(logr[i:i + w], logm[i:i + w], 1)[0]
              for i in range(n - tail, n - w + 1)]
    dyadic = dyadic_upper_dim(tree, x, min(N, tree.depth))
    return DimensionEstimate(float(sl_tail), float(max(slopes)),
                             float(min(slopes)), dyadic, np.array(widths))


@dataclass
class OmegaClassification:
    lower_evidence: list[int]
    upper_evidence: list[int]
    neither: list[int]
    estimates: list[DimensionEstimate]


def classify_omega(tree: DyadicMassTree, s: float, points: np.ndarray,
                   N: int | None = None, margin: float = 0.05
                   ) -> OmegaClassification:
    """Sort points by dimension evidence: lower-set membership when the
    lower proxy clears s - margin, upper-set when only the upper proxy does."""
    N = tree.depth - 1 if N is None else N
    lower_ev, upper_ev, neither, ests = [], [], [], []
    for i, x in enumerate(np.atleast_2d(points)):
        try:
            est = local_dim_estimate(tree, x, N)
        except ZeroMassError:
            neither.append(i)
            ests.append(None)
            continue
        ests.append(est)
        if est.lower >= s - margin:
            lower_ev.append(i)
        elif est.upper >= s - margin:
            upper_ev.append(i)
        else:
            neither.append(i)
    return OmegaClassification(lower_ev, upper_ev, neither, ests)
