"""Build mass trees from declarative generator specs.

Each spec is a small dataclass; ``build`` turns it into a
:class:`~dimens.dyadic.DyadicMassTree` at a requested depth, and
``theoretical_dimension`` reports the closed-form dimension where theory
provides one, so verification suites have ground truth.

Product-form generators (everything except IFS and cascades) also expose
per-axis *digit models*: exact conditional child distributions at every
level, with no depth bound.  These drive the scale statistics whose
horizons exceed any storable tree depth.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .dyadic import DomainError, DyadicMassTree, morton_encode

MAX_LEAF_CELLS = 1 << 26
WEIGHT_SUM_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spec variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lebesgue:
    dimension: int = 1


@dataclass(frozen=True)
class PointMass:
    point: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.point)


@dataclass(frozen=True)
class DyadicBernoulli:
    """I.i.d. child weights per generation.

    ``weights`` has 2^d entries in binary child order: bit j of the child
    index is the offset along coordinate j.
    """

    dimension: int
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != 1 << self.dimension:
            raise DomainError("need 2^d child weights")
        w = np.array(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError("weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class SelfSimilarIFS:
    """Maps x -> ratio_i * x + shift_i with selection probabilities."""

    dimension: int
    ratios: tuple[float, ...]
    shifts: tuple[tuple[float, ...], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if not len(self.ratios) == len(self.shifts) == len(self.probs):
            raise DomainError("ratios, shifts and probs must have equal length")
        p = np.array(self.probs)
        if np.any(p < 0) or abs(p.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError("probabilities must be non-negative and sum to 1")
        for r, t in zip(self.ratios, self.shifts):
            if not 0.0 < r < 1.0:
                raise DomainError("contraction ratios must lie in (0,1)")
            if len(t) != self.dimension:
                raise DomainError("shift dimension mismatch")
            if any(tj < 0 or tj + r > 1.0 + 1e-12 for tj in t):
                raise DomainError("IFS map image leaves [0,1)^d")

    def separated(self) -> bool:
        """True when the open map images are pairwise disjoint boxes."""
        n = len(self.ratios)
        for i in range(n):
            for j in range(i + 1, n):
                overlap = all(
                    self.shifts[i][c] + self.ratios[i] > self.shifts[j][c] + 1e-12
                    and self.shifts[j][c] + self.ratios[j] > self.shifts[i][c] + 1e-12
                    for c in range(self.dimension)
                )
                if overlap:
                    return False
        return True


@dataclass(frozen=True)
class PorousCantor:
    """Middle-gap construction: one gap generation per ``a`` dyadic levels.

    During a gap generation each kept cell retains its two extreme level-a
    children per axis (gap fraction 1 - 2^(1-a)); with ``gap_every`` = P the
    gap happens on every P-th generation and the others refine uniformly.
    """

    dimension: int = 1
    levels_per_generation: int = 2
    gap_every: int = 1

    def __post_init__(self):
        if self.levels_per_generation < 2:
            raise DomainError("need at least 2 levels per generation")
        if self.gap_every < 1:
            raise DomainError("gap_every must be >= 1")

    @property
    def gap_fraction(self) -> float:
        return 1.0 - 2.0 ** (1 - self.levels_per_generation)


@dataclass(frozen=True)
class Product:
    factors: tuple["MeasureSpec", ...]

    @property
    def dimension(self) -> int:
        return sum(f.dimension for f in self.factors)


@dataclass(frozen=True)
class RandomCascade:
    """Conservative multiplicative cascade: per parent, i.i.d. lognormal
    child weights normalized to sum 1, so mass is preserved exactly."""

    dimension: int
    sigma: float = 0.5
    seed: int = 0


MeasureSpec = Union[Lebesgue, PointMass, DyadicBernoulli, SelfSimilarIFS,
                    PorousCantor, Product, RandomCascade]


@dataclass(frozen=True)
class KnownDimension:
    value: float | None
    formula: str

    def __post_init__(self):
        if self.value is not None and self.value < 0:
            raise DomainError("dimension cannot be negative")


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------

def parse_measure_spec(doc: dict) -> MeasureSpec:
    """Parse the JSON config document form of a spec."""
    try:
        variant = doc["variant"]
    except (KeyError, TypeError):
        raise DomainError("measure spec needs a 'variant' field") from None
    if variant == "lebesgue":
        return Lebesgue(int(doc.get("dimension", 1)))
    if variant == "point_mass":
        return PointMass(tuple(float(v) for v in doc["point"]))
    if variant == "dyadic_bernoulli":
        return DyadicBernoulli(int(doc["dimension"]),
                               tuple(float(v) for v in doc["weights"]))
    if variant == "ifs":
        maps = doc["maps"]
        return SelfSimilarIFS(
            int(doc["dimension"]),
            tuple(float(m["ratio"]) for m in maps),
            tuple(tuple(float(v) for v in m["shift"]) for m in maps),
            tuple(float(v) for v in doc["probs"]),
        )
    if variant == "porous_cantor":
        return PorousCantor(int(doc.get("dimension", 1)),
                            int(doc["levels_per_generation"]),
                            int(doc.get("gap_every", 1)))
    if variant == "product":
        return Product(tuple(parse_measure_spec(f) for f in doc["factors"]))
    if variant == "cascade":
        return RandomCascade(int(doc["dimension"]), float(doc.get("sigma", 0.5)),
                             int(doc.get("seed", 0)))
    raise DomainError(f"unknown measure variant {variant!r}")


def spec_to_json(spec: MeasureSpec) -> dict:
    if isinstance(spec, Lebesgue):
        return {"variant": "lebesgue", "dimension": spec.dimension}
    if isinstance(spec, PointMass):
        return {"variant": "point_mass", "point": list(spec.point)}
    if isinstance(spec, DyadicBernoulli):
        return {"variant": "dyadic_bernoulli", "dimension": spec.dimension,
                "weights": list(spec.weights)}
    if isinstance(spec, SelfSimilarIFS):
        return {"variant": "ifs", "dimension": spec.dimension,
                "maps": [{"ratio": r, "shift": list(t)}
                         for r, t in zip(spec.ratios, spec.shifts)],
                "probs": list(spec.probs)}
    if isinstance(spec, PorousCantor):
        return {"variant": "porous_cantor", "dimension": spec.dimension,
                "levels_per_generation": spec.levels_per_generation,
                "gap_every": spec.gap_every}
    if isinstance(spec, Product):
        return {"variant": "product",
                "factors": [spec_to_json(f) for f in spec.factors]}
    if isinstance(spec, RandomCascade):
        return {"variant": "cascade", "dimension": spec.dimension,
                "sigma": spec.sigma, "seed": spec.seed}
    raise DomainError(f"unsupported spec {spec!r}")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _guard_cells(n: int):
    if n > MAX_LEAF_CELLS:
        raise DomainError(f"build would materialize {n} leaf cells "
                          f"(guard: {MAX_LEAF_CELLS})")


def estimate_leaf_cells(spec: MeasureSpec, depth: int) -> int:
    """Upper estimate of the nonzero leaf cells a build would store."""
    d = spec.dimension
    if isinstance(spec, PointMass):
        return 1
    if isinstance(spec, DyadicBernoulli):
        branching = int(np.count_nonzero(np.array(spec.weights) > 0))
        return branching ** depth
    if isinstance(spec, SelfSimilarIFS):
        r_min = min(spec.ratios)
        words = math.ceil(depth / max(1e-9, math.log2(1.0 / r_min)))
        return len(spec.ratios) ** max(1, words)
    if isinstance(spec, PorousCantor):
        a, period = spec.levels_per_generation, spec.gap_every
        cells = 1
        phase, gen = 0, 0
        for _ in range(depth):
            gap = gen % period == 0
            if not gap or phase == 0:
                cells <<= d
            phase += 1
            if phase == a:
                phase, gen = 0, gen + 1
        return cells
    if isinstance(spec, Product):
        total = 1
        for f in spec.factors:
            total *= estimate_leaf_cells(f, depth)
        return total
    return 1 << (d * depth)  # dense variants


def build(spec: MeasureSpec, depth: int) -> DyadicMassTree:
    """Materialize the spec as a depth-``depth`` mass tree."""
    if depth < 1:
        raise DomainError("depth must be >= 1")
    d = spec.dimension
    if isinstance(spec, Lebesgue):
        _guard_cells(1 << (d * depth))
        keys = np.arange(1 << (d * depth), dtype=np.int64)
        masses = np.full(len(keys), 2.0 ** (-d * depth))
        return DyadicMassTree.from_leaves(d, depth, keys, masses)
    if isinstance(spec, PointMass):
        x = np.asarray(spec.point)
        if np.any(x < 0) or np.any(x >= 1):
            raise DomainError("point mass must lie in [0,1)^d")
        idx = np.floor(x * (1 << depth)).astype(np.int64)[None, :]
        return DyadicMassTree.from_leaves(d, depth, morton_encode(idx, depth, d),
                                          np.array([1.0]))
    if isinstance(spec, DyadicBernoulli):
        w = np.array(spec.weights)
        masses = np.array([1.0])
        keys = np.zeros(1, dtype=np.int64)
        for _ in range(depth):
            _guard_cells(len(masses) << d)
            masses = (masses[:, None] * w[None, :]).ravel()
            keys = ((keys[:, None] << d) | np.arange(1 << d, dtype=np.int64)[None, :]).ravel()
            live = masses > 0
            keys, masses = keys[live], masses[live]
        return DyadicMassTree.from_leaves(d, depth, keys, masses)
    if isinstance(spec, SelfSimilarIFS):
        return _build_ifs(spec, depth)
    if isinstance(spec, PorousCantor):
        return _build_porous_cantor(spec, depth)
    if isinstance(spec, Product):
        return _build_product(spec, depth)
    if isinstance(spec, RandomCascade):
        rng = np.random.default_rng(spec.seed)
        masses = np.array([1.0])
        for _ in range(depth):
            _guard_cells(len(masses) << d)
            raw = rng.lognormal(0.0, spec.sigma, size=(len(masses), 1 << d))
            raw /= raw.sum(axis=1, keepdims=True)
            masses = (masses[:, None] * raw).ravel()
        keys = np.arange(1 << (d * depth), dtype=np.int64)
        return DyadicMassTree.from_leaves(d, depth, keys, masses)
    raise DomainError(f"unsupported spec {spec!r}")


def _build_ifs(spec: SelfSimilarIFS, depth: int) -> DyadicMassTree:
    d = spec.dimension
    leaf = 2.0 ** -depth
    if not spec.separated():
        warnings.warn("IFS images overlap: dimension formula unreliable",
                      stacklevel=3)
    # expand words until every image cube fits inside one leaf cell
    scales = [1.0]
    offsets = [np.zeros(d)]
    probs = [1.0]
    done_centers, done_probs = [], []
    while scales:
        _guard_cells(len(scales) * len(spec.ratios) + len(done_probs))
        new_s, new_o, new_p = [], [], []
        for s, o, p in zip(scales, offsets, probs):
            for r, t, q in zip(spec.ratios, spec.shifts, spec.probs):
                if q == 0.0:
                    continue
                s2 = s * r
                o2 = o + s * np.asarray(t)
                p2 = p * q
                if s2 <= leaf:
                    done_centers.append(o2 + 0.5 * s2)
                    done_probs.append(p2)
                else:
                    new_s.append(s2)
                    new_o.append(o2)
                    new_p.append(p2)
        scales, offsets, probs = new_s, new_o, new_p
    centers = np.array(done_centers)
    idx = np.floor(centers * (1 << depth)).astype(np.int64)
    idx = np.clip(idx, 0, (1 << depth) - 1)
    return DyadicMassTree.from_leaves(d, depth, morton_encode(idx, depth, d),
                                      np.array(done_probs))


def _build_porous_cantor(spec: PorousCantor, depth: int) -> DyadicMassTree:
    d, a, period = spec.dimension, spec.levels_per_generation, spec.gap_every
    keys = np.zeros(1, dtype=np.int64)
    masses = np.array([1.0])
    roles = np.zeros((1, d), dtype=np.int64)
    all_children = np.arange(1 << d, dtype=np.int64)
    child_bits = np.stack([(all_children >> j) & 1 for j in range(d)], axis=1)
    phase, generation = 0, 0
    for _ in range(depth):
        gap_gen = generation % period == 0
        if gap_gen and phase != 0:
            local = np.zeros(len(keys), dtype=np.int64)
            for j in range(d):
                local |= roles[:, j] << j
            keys = (keys << d) | local
        else:
            _guard_cells(len(keys) << d)
            keys = ((keys[:, None] << d) | all_children[None, :]).ravel()
            masses = np.repeat(masses, 1 << d) / (1 << d)
            if gap_gen:  # children adopt their corner as the role to track
                roles = np.tile(child_bits, (len(keys) >> d, 1))
        phase += 1
        if phase == a:
            phase, generation = 0, generation + 1
            if not gap_gen:
                roles = np.zeros((len(keys), d), dtype=np.int64)
    return DyadicMassTree.from_leaves(d, depth, keys, masses)


def _build_product(spec: Product, depth: int) -> DyadicMassTree:
    from .dyadic import morton_decode
    trees = [build(f, depth) for f in spec.factors]
    d = spec.dimension
    total = 1
    for t in trees:
        total *= len(t.leaf_cells()[0])
    _guard_cells(total)
    grids_idx, grids_mass = [], []
    for t in trees:
        k, m = t.leaf_cells()
        grids_idx.append(morton_decode(k, depth, t.dimension))
        grids_mass.append(m)
    mesh = np.meshgrid(*[np.arange(len(m)) for m in grids_mass], indexing="ij")
    sel = [g.ravel() for g in mesh]
    idx = np.hstack([grids_idx[f][sel[f]] for f in range(len(trees))])
    mass = np.ones(total)
    for f in range(len(trees)):
        mass *= grids_mass[f][sel[f]]
    return DyadicMassTree.from_leaves(d, depth, morton_encode(idx, depth, d), mass)


# ---------------------------------------------------------------------------
# Known dimensions
# ---------------------------------------------------------------------------

def theoretical_dimension(spec: MeasureSpec) -> KnownDimension:
    """Closed-form dimension of the generated measure, when theory gives one."""
    if isinstance(spec, Lebesgue):
        return KnownDimension(float(spec.dimension), "lebesgue")
    if isinstance(spec, PointMass):
        return KnownDimension(0.0, "atom")
    if isinstance(spec, DyadicBernoulli):
        w = np.array(spec.weights)
        w = w[w > 0]
        return KnownDimension(float(-(w * np.log2(w)).sum()), "shannon-entropy")
    if isinstance(spec, SelfSimilarIFS):
        if not spec.separated():
            return KnownDimension(None, "unknown-overlapping-ifs")
        q = np.array(spec.probs)
        r = np.array(spec.ratios)
        keep = q > 0
        val = float((q[keep] * np.log2(q[keep])).sum()
                    / (q[keep] * np.log2(r[keep])).sum())
        return KnownDimension(val, "self-similar-measure")
    if isinstance(spec, PorousCantor):
        a, period = spec.levels_per_generation, spec.gap_every
        val = spec.dimension * (1 + a * (period - 1)) / (period * a)
        return KnownDimension(val, "kept-cell-count")
    if isinstance(spec, Product):
        parts = [theoretical_dimension(f) for f in spec.factors]
        if any(p.value is None for p in parts):
            return KnownDimension(None, "unknown-factor")
        return KnownDimension(sum(p.value for p in parts), "product-sum")
    return KnownDimension(None, "unknown-variant")


# ---------------------------------------------------------------------------
# Digit models: exact per-axis conditional distributions at any level
# ---------------------------------------------------------------------------

class AxisDigitModel:
    """One coordinate of a product-form generator as a digit process.

    ``start()`` gives the root state; ``children(state)`` returns the two
    conditional child masses (summing to 1, or to 0 on a dead branch) and
    the two successor states.
    """

    def start(self):
        raise NotImplementedError

    def children(self, state):
        raise NotImplementedError


class _UniformAxis(AxisDigitModel):
    def start(self):
        return None

    def children(self, state):
        return (0.5, 0.5), (None, None)


class _BernoulliAxis(AxisDigitModel):
    def __init__(self, w0: float, w1: float):
        self.w = (w0, w1)

    def start(self):
        return None

    def children(self, state):
        return self.w, (None, None)


class _AtomAxis(AxisDigitModel):
    """Point mass at a dyadic coordinate num / 2^prec."""

    def __init__(self, num: int, prec: int):
        self.num, self.prec = num, prec

    def start(self):
        return (self.num, self.prec)

    def children(self, state):
        num, prec = state
        if prec == 0:
            return (1.0, 0.0), ((0, 0), None)
        bit = num >> (prec - 1)
        nxt = (num - (bit << (prec - 1)), prec - 1)
        return ((1.0, 0.0), (nxt, None)) if bit == 0 else ((0.0, 1.0), (None, nxt))


class _CantorAxis(AxisDigitModel):
    """Keep-two-extremes middle-gap process with period ``gap_every``."""

    def __init__(self, a: int, gap_every: int):
        self.a, self.period = a, gap_every

    def start(self):
        return (0, 0, 0)  # (phase, generation, tracked bit)

    def children(self, state):
        phase, gen, role = state
        nphase = phase + 1
        ngen = gen + (1 if nphase == self.a else 0)
        nphase %= self.a
        gap_gen = gen % self.period == 0
        if gap_gen and phase != 0:
            nxt = (nphase, ngen, role)
            return ((1.0, 0.0), (nxt, None)) if role == 0 else ((0.0, 1.0), (None, nxt))
        s0 = (nphase, ngen, 0 if gap_gen else role)
        s1 = (nphase, ngen, 1 if gap_gen else role)
        return (0.5, 0.5), (s0, s1)


def axis_models(spec: MeasureSpec) -> list[AxisDigitModel] | None:
    """Per-axis digit models, or None when the spec is not product-form."""
    if isinstance(spec, Lebesgue):
        return [_UniformAxis() for _ in range(spec.dimension)]
    if isinstance(spec, PointMass):
        out = []
        for x in spec.point:
            if not 0.0 <= x < 1.0:
                raise DomainError("point mass coordinate outside [0,1)")
            num, prec = x.as_integer_ratio() if isinstance(x, float) else (int(x), 1)
            if prec & (prec - 1):
                raise DomainError("atom coordinate is not a dyadic rational")
            out.append(_AtomAxis(num, prec.bit_length() - 1))
        return out
    if isinstance(spec, DyadicBernoulli) and spec.dimension == 1:
        return [_BernoulliAxis(spec.weights[0], spec.weights[1])]
    if isinstance(spec, PorousCantor):
        return [_CantorAxis(spec.levels_per_generation, spec.gap_every)
                for _ in range(spec.dimension)]
    if isinstance(spec, Product):
        parts = [axis_models(f) for f in spec.factors]
        if any(p is None for p in parts):
            return None
        return [m for p in parts for m in p]
    return None


def sample_digit_path(models: Sequence[AxisDigitModel], levels: int,
                      rng: np.random.Generator) -> "DigitPath":
    """Draw a measure-typical digit expansion to the requested level."""
    d = len(models)
    digits = np.empty((levels, d), dtype=np.int64)
    ratios = np.empty((levels, d))
    states = [m.start() for m in models]
    u = rng.random((levels, d))
    for k in range(levels):
        for j, m in enumerate(models):
            (m0, m1), (s0, s1) = m.children(states[j])
            bit = 1 if u[k, j] >= m0 else 0
            if m0 + m1 <= 0:
                raise ZeroDivisionError("sampled into a dead branch")
            digits[k, j] = bit
            ratios[k, j] = (m0, m1)[bit]
            states[j] = (s0, s1)[bit]
    return DigitPath(digits, ratios)


@dataclass
class DigitPath:
    """A sampled dyadic expansion with its conditional mass ratios.

    ``digits[k-1, j]`` is the bit of coordinate j chosen between levels k-1
    and k; ``ratios`` the matching conditional child masses, so the chain
    cube mass at level k is the running product of ``ratios[:k]``.
    """

    digits: np.ndarray
    ratios: np.ndarray

    @property
    def levels(self) -> int:
        return self.digits.shape[0]

    def log2_chain_masses(self) -> np.ndarray:
        """log2 mass of Q^{k,x} for k = 1..levels (cumulative)."""
        with np.errstate(divide="ignore"):
            return np.cumsum(np.log2(self.ratios).sum(axis=1))

    def coordinate_integers(self) -> np.ndarray:
        """Cube indices per axis at every level, as Python ints (exact)."""
        d = self.digits.shape[1]
        out = np.empty((self.levels, d), dtype=object)
        acc = [0] * d
        for k in range(self.levels):
            for j in range(d):
                acc[j] = (acc[j] << 1) | int(self.digits[k, j])
                out[k, j] = acc[j]
        return out
