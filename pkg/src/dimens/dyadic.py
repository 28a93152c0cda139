"""Dyadic cube addressing and depth-bounded mass trees on [0,1)^d.

A mass tree assigns a non-negative mass to every dyadic cube of levels
0..D, with the parent mass equal to the sum of its children.  Cells not
stored are zero, together with their whole subtree.  Levels are stored as
sorted Morton-keyed arrays, so the descendants of any cube form one
contiguous slice per level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

FORMAT_HEADER = "dimens-tree v1"
PARENT_SUM_RTOL = 1e-12


class DomainError(ValueError):
    """Input outside the documented domain of an operation."""


class ZeroMassError(DomainError):
    """A quantity that requires positive mass was asked of a null region."""


# ---------------------------------------------------------------------------
# Morton (bit-interleaved) keys
# ---------------------------------------------------------------------------

def morton_encode(indices: np.ndarray, level: int, dimension: int) -> np.ndarray:
    """Interleave the bits of integer cube indices into sortable keys.

    ``indices`` has shape (n, dimension); bit b of coordinate j lands in key
    bit b*dimension + j.  Requires level*dimension <= 62.
    """
    if level * dimension > 62:
        raise DomainError(f"level {level} too deep for d={dimension} Morton keys")
    idx = np.asarray(indices, dtype=np.int64)
    if dimension == 1:
        return idx[:, 0].copy()
    keys = np.zeros(len(idx), dtype=np.int64)
    for b in range(level):
        for j in range(dimension):
            keys |= ((idx[:, j] >> b) & 1) << (b * dimension + j)
    return keys


def morton_decode(keys: np.ndarray, level: int, dimension: int) -> np.ndarray:
    """Inverse of :func:`morton_encode`; returns shape (n, dimension)."""
    keys = np.asarray(keys, dtype=np.int64)
    if dimension == 1:
        return keys[:, None].copy()
    out = np.zeros((len(keys), dimension), dtype=np.int64)
    for b in range(level):
        for j in range(dimension):
            out[:, j] |= ((keys >> (b * dimension + j)) & 1) << b
    return out


def _morton_encode_one(index: Sequence[int], level: int, dimension: int) -> int:
    if dimension == 1:
        return int(index[0])
    key = 0
    for b in range(level):
        for j in range(dimension):
            key |= ((int(index[j]) >> b) & 1) << (b * dimension + j)
    return key


# ---------------------------------------------------------------------------
# Cubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicCube:
    """Half-open grid cube [index*2^-level, (index+1)*2^-level) per axis."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise DomainError("cube level must be >= 0")
        for i in self.index:
            if not 0 <= i < (1 << self.level):
                raise DomainError(f"index {self.index} out of range at level {self.level}")

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 0.5) * self.side

    @property
    def key(self) -> int:
        return _morton_encode_one(self.index, self.level, self.dimension)

    def contains(self, x: Sequence[float]) -> bool:
        lo, hi = self.lower, self.upper
        return bool(np.all(np.asarray(x) >= lo) and np.all(np.asarray(x) < hi))

    def ancestor(self, level: int) -> "DyadicCube":
        if level > self.level:
            raise DomainError("ancestor level must not exceed cube level")
        shift = self.level - level
        return DyadicCube(level, tuple(i >> shift for i in self.index))

    def vertices(self) -> np.ndarray:
        """All 2^d corner points of the closed cube, shape (2^d, d)."""
        d = self.dimension
        lo, hi = self.lower, self.upper
        out = np.empty((1 << d, d))
        for m in range(1 << d):
            for j in range(d):
                out[m, j] = hi[j] if (m >> j) & 1 else lo[j]
        return out


def cube_of_point(x: Sequence[float], level: int, dimension: int | None = None) -> DyadicCube:
    """The unique level-k dyadic cube containing x, half-open convention."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if dimension is not None and x.shape[0] != dimension:
        raise DomainError(f"point has dimension {x.shape[0]}, expected {dimension}")
    if np.any(x < 0.0) or np.any(x >= 1.0):
        raise DomainError(f"point {x.tolist()} outside [0,1)^d")
    idx = np.floor(x * (1 << level)).astype(np.int64)
    idx = np.minimum(idx, (1 << level) - 1)
    return DyadicCube(level, tuple(int(i) for i in idx))


def refine(cube: DyadicCube, a: int) -> list[DyadicCube]:
    """All 2^(a*d) level-(k+a) subcubes of ``cube`` in Morton child order."""
    if a < 1:
        raise DomainError("refinement step a must be >= 1")
    d = cube.dimension
    level = cube.level + a
    base = tuple(i << a for i in cube.index)
    out = []
    for local in range(1 << (a * d)):
        offs = morton_decode(np.array([local]), a, d)[0]
        out.append(DyadicCube(level, tuple(base[j] + int(offs[j]) for j in range(d))))
    return out


# ---------------------------------------------------------------------------
# Ball mass estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallMassEstimate:
    """Bracket [lower, upper] for the mass of a closed ball.

    ``lower`` sums leaf cells wholly inside the ball, ``upper`` sums leaf
    cells meeting it; the midpoint is used where a single number is needed.
    """

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower < -1e-15 or self.upper < self.lower - 1e-15:
            raise DomainError("invalid ball mass bracket")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# The mass tree
# ---------------------------------------------------------------------------

class DyadicMassTree:
    """Finite-depth mass assignment on the dyadic cubes of [0,1)^d.

    Immutable after construction; every query is a pure read.  Construct
    with :meth:`from_leaves`, which aggregates leaf masses upward so the
    parent-sum identity holds exactly at build time.
    """

    def __init__(self, dimension: int, depth: int,
                 level_keys: list[np.ndarray], level_masses: list[np.ndarray]):
        self.dimension = dimension
        self.depth = depth
        self._keys = level_keys
        self._masses = level_masses
        for k, m in zip(level_keys, level_masses):
            k.setflags(write=False)
            m.setflags(write=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_leaves(cls, dimension: int, depth: int,
                    leaf_keys: np.ndarray, leaf_masses: np.ndarray) -> "DyadicMassTree":
        if dimension < 1:
            raise DomainError("dimension must be >= 1")
        if depth < 0 or depth * dimension > 62:
            raise DomainError(f"depth {depth} unsupported for d={dimension}")
        keys = np.asarray(leaf_keys, dtype=np.int64)
        masses = np.asarray(leaf_masses, dtype=float)
        if np.any(masses < 0):
            raise DomainError("leaf masses must be non-negative")
        pos = masses > 0
        keys, masses = keys[pos], masses[pos]
        if len(keys) == 0:
            raise ZeroMassError("measure has zero total mass")
        order = np.argsort(keys, kind="stable")
        keys, masses = keys[order], masses[order]
        # merge duplicate cells (e.g. two IFS words rasterized into one cell)
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            uniq, inv = np.unique(keys, return_inverse=True)
            summed = np.zeros(len(uniq))
            np.add.at(summed, inv, masses)
            keys, masses = uniq, summed
        level_keys = [None] * (depth + 1)
        level_masses = [None] * (depth + 1)
        level_keys[depth], level_masses[depth] = keys, masses
        d = dimension
        for lev in range(depth - 1, -1, -1):
            parents = level_keys[lev + 1] >> d
            starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
            level_keys[lev] = parents[starts]
            level_masses[lev] = np.add.reduceat(level_masses[lev + 1], starts)
        return cls(dimension, depth, level_keys, level_masses)

    # -- basic lookups ------------------------------------------------------

    @property
    def root_mass(self) -> float:
        return float(self._masses[0][0]) if len(self._masses[0]) else 0.0

    def level_cells(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """All stored (key, mass) pairs of one level, Morton-sorted."""
        self._check_level(level)
        return self._keys[level], self._masses[level]

    def leaf_cells(self) -> tuple[np.ndarray, np.ndarray]:
        return self.level_cells(self.depth)

    def _check_level(self, level: int):
        if not 0 <= level <= self.depth:
            raise DomainError(f"level {level} outside 0..{self.depth}")

    def mass_of_key(self, level: int, key: int) -> float:
        self._check_level(level)
        keys = self._keys[level]
        i = np.searchsorted(keys, key)
        if i < len(keys) and keys[i] == key:
            return float(self._masses[level][i])
        return 0.0

    def mass_of(self, cube: DyadicCube) -> float:
        """Stored mass of a cube; zero for absent cells."""
        if cube.dimension != self.dimension:
            raise DomainError("cube dimension mismatch")
        return self.mass_of_key(cube.level, cube.key)

    def cube_at(self, x: Sequence[float], level: int) -> DyadicCube:
        return cube_of_point(x, level, self.dimension)

    def chain_masses(self, x: Sequence[float], kmax: int) -> np.ndarray:
        """Masses of Q^{k,x} for k = 0..kmax."""
        self._check_level(kmax)
        key = cube_of_point(x, kmax, self.dimension).key
        out = np.empty(kmax + 1)
        for k in range(kmax, -1, -1):
            out[k] = self.mass_of_key(k, key)
            key >>= self.dimension
        return out

    # -- subtree slices -----------------------------------------------------

    def descendant_slice(self, cube: DyadicCube, a: int) -> tuple[np.ndarray, np.ndarray]:
        """(keys, masses) of the stored level-(k+a) descendants of ``cube``."""
        level = cube.level + a
        self._check_level(level)
        d = self.dimension
        lo = cube.key << (a * d)
        hi = (cube.key + 1) << (a * d)
        keys = self._keys[level]
        i0, i1 = np.searchsorted(keys, (lo, hi))
        return keys[i0:i1], self._masses[level][i0:i1]

    def children(self, cube: DyadicCube, a: int = 1) -> list[tuple[DyadicCube, float]]:
        keys, masses = self.descendant_slice(cube, a)
        level = cube.level + a
        idx = morton_decode(keys, level, self.dimension)
        return [
            (DyadicCube(level, tuple(int(v) for v in idx[i])), float(masses[i]))
            for i in range(len(keys))
        ]

    # -- geometric gathers --------------------------------------------------

    def cells_in_ball(self, x: Sequence[float], r: float, level: int
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stored level cells whose centers lie in the closed ball B(x, r).

        Returns (keys, centers, masses).  Cost is proportional to the number
        of cells in a dyadic cover of the ball, not to the level size.
        """
        self._check_level(level)
        x = np.asarray(x, dtype=float)
        d = self.dimension
        if r <= 0:
            raise DomainError("ball radius must be positive")
        k0 = max(0, min(level, int(math.floor(math.log2(1.0 / (2.0 * r)))) if r < 0.5 else 0))
        side = 2.0 ** -k0
        ranges = []
        for j in range(d):
            a = int(math.floor((x[j] - r) / side))
            b = int(math.floor((x[j] + r) / side))
            ranges.append(range(max(0, a), min((1 << k0) - 1, b) + 1))
        shift = (level - k0) * d
        chunks_k, chunks_m = [], []
        keys = self._keys[level]
        for idx in _product_indices(ranges):
            key0 = _morton_encode_one(idx, k0, d)
            i0, i1 = np.searchsorted(keys, (key0 << shift, (key0 + 1) << shift))
            if i1 > i0:
                chunks_k.append(keys[i0:i1])
                chunks_m.append(self._masses[level][i0:i1])
        if not chunks_k:
            empty = np.empty(0, dtype=np.int64)
            return empty, np.empty((0, d)), np.empty(0)
        ck = np.concatenate(chunks_k)
        cm = np.concatenate(chunks_m)
        centers = (morton_decode(ck, level, d).astype(float) + 0.5) * 2.0 ** -level
        dist2 = np.sum((centers - x) ** 2, axis=1)
        mask = dist2 <= r * r
        return ck[mask], centers[mask], cm[mask]

    def _expand(self, level: int, keys: np.ndarray) -> np.ndarray:
        """Stored children (level+1 keys) of the given level cells."""
        d = self.dimension
        child_keys = self._keys[level + 1]
        starts = np.searchsorted(child_keys, keys << d)
        ends = np.searchsorted(child_keys, (keys + 1) << d)
        return child_keys[_concat_ranges(starts, ends)]

    def _masses_at(self, level: int, keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._keys[level], keys)
        return self._masses[level][pos]

    def ball_mass(self, x: Sequence[float], r: float) -> BallMassEstimate:
        """Bracketed mass of the closed ball B(x, r), resolved at leaf level.

        Level-synchronous descent: cells wholly inside count toward both
        bounds, boundary cells recurse, leaf boundary cells widen only the
        upper bound.
        """
        x = np.asarray(x, dtype=float)
        if r <= 0:
            raise DomainError("ball radius must be positive")
        d, D = self.dimension, self.depth
        r2 = r * r
        lower = upper = 0.0
        keys = self._keys[0]
        for level in range(D + 1):
            if len(keys) == 0:
                break
            side = 2.0 ** -level
            lo = morton_decode(keys, level, d).astype(float) * side
            near = np.maximum(np.maximum(lo - x, x - (lo + side)), 0.0)
            touching = np.einsum("ij,ij->i", near, near) <= r2
            far = np.maximum(np.abs(x - lo), np.abs(x - (lo + side)))
            inside = touching & (np.einsum("ij,ij->i", far, far) <= r2)
            masses = self._masses_at(level, keys)
            m_in = float(masses[inside].sum())
            lower += m_in
            upper += m_in
            partial = touching & ~inside
            if level == D:
                upper += float(masses[partial].sum())
                break
            keys = self._expand(level, keys[partial])
        return BallMassEstimate(lower, upper)

    def support_intersects_ball(self, y: Sequence[float], r: float) -> bool:
        """True if any positive-mass leaf cell meets the closed ball B(y, r)."""
        y = np.asarray(y, dtype=float)
        d, D = self.dimension, self.depth
        r2 = r * r
        keys = self._keys[0]
        for level in range(D + 1):
            if len(keys) == 0:
                return False
            side = 2.0 ** -level
            lo = morton_decode(keys, level, d).astype(float) * side
            near = np.maximum(np.maximum(lo - y, y - (lo + side)), 0.0)
            touching = np.einsum("ij,ij->i", near, near) <= r2
            if level == D:
                return bool(touching.any())
            far = np.maximum(np.abs(y - lo), np.abs(y - (lo + side)))
            if bool((touching & (np.einsum("ij,ij->i", far, far) <= r2)).any()):
                return True
            keys = self._expand(level, keys[touching])
        return False

    def box_mass(self, lo_idx: Sequence[int], hi_idx: Sequence[int]) -> float:
        """Total mass of leaf cells with index in the closed integer box."""
        d, D = self.dimension, self.depth
        lo = np.maximum(np.asarray(lo_idx, dtype=np.int64), 0)
        hi = np.minimum(np.asarray(hi_idx, dtype=np.int64), (1 << D) - 1)
        if np.any(lo > hi):
            return 0.0
        total = 0.0
        keys = self._keys[0]
        for level in range(D + 1):
            if len(keys) == 0:
                break
            shift = D - level
            idx = morton_decode(keys, level, d)
            c_lo = idx << shift
            c_hi = ((idx + 1) << shift) - 1
            touching = np.all((c_lo <= hi) & (c_hi >= lo), axis=1)
            inside = touching & np.all((c_lo >= lo) & (c_hi <= hi), axis=1)
            total += float(self._masses_at(level, keys[inside]).sum())
            if level == D:
                break
            keys = self._expand(level, keys[touching & ~inside])
        return total

    def enlarged_cube_mass(self, cube: DyadicCube, K: float) -> float:
        """Mass of KQ, resolved as leaf cells whose centers lie in KQ.

        For odd integer K this equals the exact mass of KQ clipped to
        [0,1)^d; for general K the center rule makes the value deterministic
        and monotone in K.
        """
        if K <= 0:
            raise DomainError("enlargement factor must be positive")
        D = self.depth
        lo, hi = [], []
        for j in range(self.dimension):
            c = (2 * cube.index[j] + 1) * (1 << (D - cube.level))  # 2*center*2^D
            half = K * (1 << (D - cube.level))                     # K*side*2^D
            # leaf center (i+0.5)2^-D in [c/2 - half/2, c/2 + half/2]*2^-D
            lo.append(math.ceil((c - half - 1) / 2))
            hi.append(math.floor((c + half - 1) / 2))
        return self.box_mass(lo, hi)

    def shell_mass(self, cube: DyadicCube, K: int, a: int) -> float:
        """Mass of U_{K,a}(Q): remove the K outer layers of ≺_a subcells."""
        if 2 ** (a - 1) <= K:
            raise DomainError("shell requires 2^(a-1) > K")
        keys, masses = self.descendant_slice(cube, a)
        if len(keys) == 0:
            return 0.0
        local = keys - (cube.key << (a * self.dimension))
        offs = morton_decode(local, a, self.dimension)
        good = np.all((offs >= K) & (offs <= (1 << a) - 1 - K), axis=1)
        return float(masses[good].sum())

    # -- transforms ---------------------------------------------------------

    def translate(self, omega: Sequence[float]) -> "DyadicMassTree":
        """Shift the measure by +omega, rebuilding at leaf level.

        Requires support inside [0,1/2)^d and omega in [0,1/2)^d so the
        shifted support stays in [0,1)^d.  Leaf mass moves whole to the cell
        containing the shifted cell center, which is exact whenever omega is
        a multiple of 2^-D per axis.
        """
        omega = np.asarray(omega, dtype=float)
        d, D = self.dimension, self.depth
        if omega.shape != (d,):
            raise DomainError("translation vector has wrong dimension")
        if np.any(omega < 0) or np.any(omega >= 0.5):
            raise DomainError("translation coordinates must lie in [0, 1/2)")
        keys, masses = self.leaf_cells()
        idx = morton_decode(keys, D, d)
        half = 1 << (D - 1)
        if np.any(idx >= half):
            raise DomainError("translate requires support inside [0,1/2)^d")
        shift = np.floor(omega * (1 << D) + 0.5).astype(np.int64)
        new_idx = idx + shift
        if np.any(new_idx >= (1 << D)):
            raise DomainError("translated support escapes [0,1)^d")
        new_keys = morton_encode(new_idx, D, d)
        return DyadicMassTree.from_leaves(d, D, new_keys, masses.copy())

    def normalized_restriction(self, cube: DyadicCube) -> "ConditionalMeasure":
        """Conditional mass map on the descendants of ``cube``.

        Zero base mass yields the trivial (all-zero) measure.
        """
        return ConditionalMeasure(self, cube, self.mass_of(cube))

    # -- integrity ----------------------------------------------------------

    def validate(self, rtol: float = PARENT_SUM_RTOL):
        """Check the parent-sum identity on every stored level."""
        d = self.dimension
        if self.root_mass <= 0:
            raise ZeroMassError("root mass must be positive")
        for lev in range(self.depth):
            child_keys = self._keys[lev + 1]
            parents = child_keys >> d
            starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
            up_keys = parents[starts]
            up_mass = np.add.reduceat(self._masses[lev + 1], starts) if len(starts) else np.empty(0)
            if not np.array_equal(up_keys, self._keys[lev]):
                raise DomainError(f"level {lev}: stored cells disagree with children")
            denom = np.maximum(np.abs(self._masses[lev]), 1e-300)
            if np.any(np.abs(up_mass - self._masses[lev]) / denom > rtol):
                raise DomainError(f"level {lev}: parent-sum violated beyond rtol={rtol}")

    # -- sampling -----------------------------------------------------------

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n leaf-cell centers drawn with probability proportional to mass."""
        keys, masses = self.leaf_cells()
        cum = np.cumsum(masses)
        picks = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
        picks = np.minimum(picks, len(keys) - 1)
        idx = morton_decode(keys[picks], self.depth, self.dimension)
        return (idx.astype(float) + 0.5) * 2.0 ** -self.depth

    # -- serialization ------------------------------------------------------

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(f"{FORMAT_HEADER} d={self.dimension} D={self.depth}\n")
            keys, masses = self.leaf_cells()
            idx = morton_decode(keys, self.depth, self.dimension)
            for i in range(len(keys)):
                coords = " ".join(str(int(v)) for v in idx[i])
                fh.write(f"{self.depth} {coords} {float(masses[i])!r}\n")

    @classmethod
    def load(cls, path) -> "DyadicMassTree":
        with open(path) as fh:
            header = fh.readline().split()
            if header[:2] != FORMAT_HEADER.split() or len(header) != 4:
                raise DomainError(f"unrecognized tree file header: {' '.join(header)}")
            d = int(header[2].removeprefix("d="))
            depth = int(header[3].removeprefix("D="))
            rows_idx, rows_mass = [], []
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if int(parts[0]) != depth or len(parts) != d + 2:
                    raise DomainError(f"malformed tree line: {line.strip()}")
                rows_idx.append([int(v) for v in parts[1:1 + d]])
                rows_mass.append(float(parts[-1]))
        idx = np.array(rows_idx, dtype=np.int64).reshape(len(rows_idx), d)
        keys = morton_encode(idx, depth, d)
        return cls.from_leaves(d, depth, keys, np.array(rows_mass))


class ConditionalMeasure:
    """Lazy normalized restriction of a tree to one cube."""

    def __init__(self, tree: DyadicMassTree, base: DyadicCube, base_mass: float):
        self.tree = tree
        self.base = base
        self.base_mass = base_mass

    @property
    def trivial(self) -> bool:
        return self.base_mass <= 0.0

    def mass_of(self, cube: DyadicCube) -> float:
        if self.trivial:
            return 0.0
        if cube.level < self.base.level or cube.ancestor(self.base.level) != self.base:
            raise DomainError("cube is not a descendant of the restriction base")
        return self.tree.mass_of(cube) / self.base_mass

    def total(self) -> float:
        return 0.0 if self.trivial else 1.0

    def child_fractions(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        """(keys, conditional masses) of the ≺_a descendants of the base."""
        keys, masses = self.tree.descendant_slice(self.base, a)
        if self.trivial:
            return keys, np.zeros_like(masses)
        return keys, masses / self.base_mass


def _product_indices(ranges: list[range]) -> Iterator[tuple[int, ...]]:
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _product_indices(ranges[1:]):
            yield (head,) + tail


def _concat_ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenation of arange(s, e) for every pair, as one index vector."""
    lens = ends - starts
    keep = lens > 0
    starts, lens = starts[keep], lens[keep]
    if len(starts) == 0:
        return np.empty(0, dtype=np.int64)
    steps = np.ones(int(lens.sum()), dtype=np.int64)
    steps[0] = starts[0]
    pos = np.cumsum(lens)[:-1]
    steps[pos] = starts[1:] - (starts[:-1] + lens[:-1]) + 1
    return np.cumsum(steps)
