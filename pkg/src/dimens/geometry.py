"""Cones, homogeneity, porosity and the porous-cube machinery.

Direction sets over the Grassmannian and the sphere are finite seeded
samples, so every "inf over directions" here is a certified upper bound on
the true infimum, and every porosity value a certified lower bound on the
true supremum.  Downstream uses take porosity above a threshold as a
hypothesis, so lower bounds are the sound side.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dyadic import (DomainError, DyadicCube, DyadicMassTree, ZeroMassError,
                     cube_of_point, refine)

ORTHO_TOL = 1e-10


# ---------------------------------------------------------------------------
# Cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """A cone pair: X(x,V,alpha) around the subspace spanned by the rows of
    ``basis`` and the one-sided cone H(x,theta,alpha) to cut away."""

    basis: tuple[tuple[float, ...], ...]
    alpha: float
    theta: tuple[float, ...]

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        if B.ndim != 2 or B.shape[1] != th.shape[0]:
            raise DomainError("basis rows and theta must share the ambient dimension")
        gram = B @ B.T
        if np.max(np.abs(gram - np.eye(B.shape[0]))) > ORTHO_TOL:
            raise DomainError("cone basis is not orthonormal")
        if abs(th @ th - 1.0) > ORTHO_TOL:
            raise DomainError("theta must be a unit vector")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("aperture alpha must lie in [0,1]")

    @property
    def dimension(self) -> int:
        return len(self.theta)

    @property
    def codimension(self) -> int:
        """m = d - dim V, the number of directions the cone pinches."""
        return self.dimension - len(self.basis)

    def basis_array(self) -> np.ndarray:
        return np.asarray(self.basis, dtype=float)

    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


def cone_mask(z: np.ndarray, spec: ConeSpec, exclude_half: bool) -> np.ndarray:
    """Membership of difference vectors z = y - x in X (optionally X \\ H).

    The apex z = 0 is excluded (strict inequalities).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    B = spec.basis_array()
    norm2 = np.einsum("ij,ij->i", z, z)
    coef = z @ B.T
    proj2 = np.einsum("ij,ij->i", coef, coef)
    dist2 = np.maximum(norm2 - proj2, 0.0)
    inside = (dist2 < spec.alpha ** 2 * norm2) & (norm2 > 0.0)
    if exclude_half:
        dot = z @ spec.theta_array()
        inside &= dot <= spec.alpha * np.sqrt(norm2)
    return inside


def cone_membership(y: Sequence[float], x: Sequence[float], spec: ConeSpec,
                    exclude_half: bool = False) -> bool:
    """Is y in X(x,V,alpha), or in X \\ H(x,theta,alpha) when requested?"""
    z = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return bool(cone_mask(z[None, :], spec, exclude_half)[0])


def sample_cone_frames(d: int, m: int, count: int, seed: int, alpha: float
                       ) -> list[ConeSpec]:
    """``count`` seeded (V, theta) pairs with V uniform on G(d, d-m) and
    theta uniform on the sphere.  For a fixed seed the list with a larger
    count extends the smaller one, so sampled infima are monotone."""
    if not 0 <= m <= d - 1:
        raise DomainError("need 0 <= m <= d-1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        A = rng.standard_normal((d, d - m))
        Q, R = np.linalg.qr(A)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        basis = (Q * signs).T
        th = rng.standard_normal(d)
        th /= math.sqrt(th @ th)
        out.append(ConeSpec(tuple(map(tuple, basis)), alpha, tuple(th)))
    return out


@dataclass(frozen=True)
class ConicalRatio:
    """Sampled minimum of mu(X(x,r,V,alpha) \\ H) / mu(B(x,r))."""

    ratio: float
    worst: ConeSpec
    frames: int
    seed: int


def min_conical_ratio(tree: DyadicMassTree, x: Sequence[float], k: int,
                      alpha: float, m: int, frames: int = 64, seed: int = 0,
                      resolution: int | None = None) -> ConicalRatio:
    """Minimize the conical mass ratio over sampled (V, theta) pairs.

    Numerator and denominator are both resolved by cell-center membership
    at ``resolution`` levels below k (leaf level by default).  The sampled
    minimum is an upper bound on the true infimum.
    """
    x = np.asarray(x, dtype=float)
    r = 2.0 ** -k
    level = tree.depth if resolution is None else min(tree.depth, k + resolution)
    if level <= k:
        raise DomainError("resolution level must exceed k")
    keys, centers, masses = tree.cells_in_ball(x, r, level)
    denom = float(masses.sum())
    if denom <= 0.0:
        raise ZeroMassError("reference ball carries no mass")
    apex = cube_of_point(np.clip(x, 0.0, np.nextafter(1.0, 0.0)), level).key
    numer_ok = keys != apex
    z = centers - x
    best = math.inf
    worst = None
    for spec in sample_cone_frames(tree.dimension, m, frames, seed, alpha):
        mask = cone_mask(z, spec, exclude_half=True) & numer_ok
        ratio = float(masses[mask].sum()) / denom
        if ratio < best:
            best, worst = ratio, spec
    return ConicalRatio(best, worst, frames, seed)


# ---------------------------------------------------------------------------
# Homogeneity
# ---------------------------------------------------------------------------

def dyadic_alignment(delta: float) -> int:
    """The unique integer a with 2^-a <= delta < 2^(1-a), for delta in (0,1)."""
    if not 0.0 < delta < 1.0:
        raise DomainError("alignment needs delta in (0,1)")
    a = max(1, int(math.ceil(-math.log2(delta))))
    while 2.0 ** -a > delta:
        a += 1
    while a > 1 and 2.0 ** (1 - a) > delta and 2.0 ** -(a - 1) <= delta:
        a -= 1
    return a


def dyadic_homogeneity(tree: DyadicMassTree, x: Sequence[float], k: int,
                       a: int, epsilon: float) -> int:
    """Exact count of ≺_a subcubes of Q^{k,x} heavier than epsilon times it."""
    if a < 1:
        raise DomainError("a must be >= 1")
    if k + a > tree.depth:
        raise DomainError("k + a exceeds tree depth")
    parent = tree.cube_at(x, k)
    pm = tree.mass_of(parent)
    if pm <= 0.0:
        raise ZeroMassError("parent cube carries no mass")
    _, masses = tree.descendant_slice(parent, a)
    return int(np.count_nonzero(masses > epsilon * pm))


def euclidean_homogeneity(tree: DyadicMassTree, x: Sequence[float], k: int,
                          delta: float, epsilon: float,
                          enlargement: float = 5.0) -> int:
    """Greedy packing count: disjoint delta*r balls centered in B(x, r) whose
    mass exceeds epsilon * mu(B(x, enlargement*r)).

    Candidate centers are centers of aligned subcubes (2^-a' <= delta) whose
    cell mass already exceeds the threshold, so the count is a certified
    lower bound for the homogeneity supremum.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0,1)")
    if epsilon < 0.0:
        raise DomainError("epsilon must be non-negative")
    x = np.asarray(x, dtype=float)
    r = 2.0 ** -k
    a_prime = dyadic_alignment(delta)
    level = k + a_prime
    if level > tree.depth:
        raise DomainError("delta*r cells are finer than the tree depth")
    big = tree.ball_mass(x, enlargement * r)
    if big.upper <= 0.0:
        raise ZeroMassError("enlarged ball carries no mass")
    threshold = epsilon * big.midpoint
    keys, centers, masses = tree.cells_in_ball(x, r, level)
    good = masses > threshold
    centers = centers[good]
    chosen: list[np.ndarray] = []
    min_gap = 2.0 * delta * r
    for c in centers:  # Morton order: deterministic greedy
        if all(math.dist(c, p) > min_gap for p in chosen):
            chosen.append(c)
    return len(chosen)


# ---------------------------------------------------------------------------
# Porosity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HoleConfig:
    """Mutually orthogonal hole centers around a base point, with the
    relative hole radius that was certified."""

    base: tuple[float, ...]
    centers: tuple[tuple[float, ...], ...]
    rho: float

    def __post_init__(self):
        x = np.asarray(self.base)
        offs = [np.asarray(c) - x for c in self.centers]
        for i in range(len(offs)):
            for j in range(i + 1, len(offs)):
                if abs(offs[i] @ offs[j]) > ORTHO_TOL * max(1.0, offs[i] @ offs[i]):
                    raise DomainError("hole directions are not orthogonal")


@dataclass(frozen=True)
class PorosityResult:
    rho: float
    config: HoleConfig | None


def _hole_direction_frames(d: int, holes: int, extra_frames: int, seed: int
                           ) -> list[np.ndarray]:
    """Orthonormal frames of ``holes`` directions: all axis-aligned choices
    first, then seeded random frames.  Sign flips are searched per hole."""
    if not 1 <= holes <= d:
        raise DomainError("hole count must lie in 1..d")
    frames = [np.eye(d)[list(combo)] for combo in itertools.combinations(range(d), holes)]
    rng = np.random.default_rng(seed)
    for _ in range(extra_frames):
        A = rng.standard_normal((d, holes))
        Q, R = np.linalg.qr(A)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        frames.append((Q * signs).T)
    return frames


def _hole_admissible(tree: DyadicMassTree, y: np.ndarray, radius: float,
                     mode: str, epsilon: float | None, ref_lower: float) -> bool:
    if mode == "set":
        return not tree.support_intersects_ball(y, radius)
    est = tree.ball_mass(y, radius)
    return est.upper <= epsilon * ref_lower


def _feasible_holes(tree, x, r, rho, frames, mode, epsilon, ref_lower,
                    t_steps) -> HoleConfig | None:
    if rho > 0.5 or rho <= 0.0:
        return None
    ts = np.linspace(1.0 - rho, rho, t_steps) if 1.0 - rho > rho else [rho]
    for dirs in frames:
        centers = []
        for i in range(dirs.shape[0]):
            hit = None
            for sign in (1.0, -1.0):
                for t in ts:
                    y = x + sign * t * r * dirs[i]
                    if _hole_admissible(tree, y, rho * r, mode, epsilon, ref_lower):
                        hit = y
                        break
                if hit is not None:
                    break
            if hit is None:
                break
            centers.append(tuple(hit))
        else:
            return HoleConfig(tuple(x), tuple(centers), rho)
    return None


def porosity_search(tree: DyadicMassTree, x: Sequence[float], r: float,
                    holes: int = 1, mode: str = "set",
                    epsilon: float | None = None, frames: int = 2,
                    seed: int = 0, rho_steps: int = 10, t_steps: int = 12
                    ) -> PorosityResult:
    """Largest certified relative hole radius rho for ``holes`` mutually
    orthogonal holes in B(x, r).

    ``mode='set'`` requires holes disjoint from the support; ``'measure'``
    requires hole mass (upper bracket) at most epsilon times the reference
    ball mass (lower bracket).  Binary search over rho with a radial grid of
    hole centers per sampled frame; the result is a lower bound for the
    porosity supremum and never exceeds 1/2.
    """
    if mode not in ("set", "measure"):
        raise DomainError(f"unknown porosity mode {mode!r}")
    x = np.asarray(x, dtype=float)
    ref_lower = 0.0
    if mode == "measure":
        if epsilon is None or epsilon < 0:
            raise DomainError("measure mode needs a non-negative epsilon")
        ref = tree.ball_mass(x, r)
        if ref.upper <= 0.0:
            raise ZeroMassError("reference ball carries no mass")
        ref_lower = ref.lower
    dir_frames = _hole_direction_frames(tree.dimension, holes, frames, seed)
    lo, hi = 0.0, 0.5
    best: HoleConfig | None = None
    for _ in range(rho_steps):
        mid = 0.5 * (lo + hi)
        cfg = _feasible_holes(tree, x, r, mid, dir_frames, mode, epsilon,
                              ref_lower, t_steps)
        if cfg is not None:
            lo, best = mid, cfg
        else:
            hi = mid
    return PorosityResult(lo, best)


def porosity_exceeds(tree: DyadicMassTree, x: Sequence[float], r: float,
                     alpha: float, holes: int = 1, mode: str = "set",
                     epsilon: float | None = None, frames: int = 2,
                     seed: int = 0, t_steps: int = 12
                     ) -> HoleConfig | None:
    """Witness holes certifying porosity strictly above alpha, or None."""
    x = np.asarray(x, dtype=float)
    ref_lower = 0.0
    if mode == "measure":
        if epsilon is None or epsilon < 0:
            raise DomainError("measure mode needs a non-negative epsilon")
        ref = tree.ball_mass(x, r)
        if ref.upper <= 0.0:
            raise ZeroMassError("reference ball carries no mass")
        ref_lower = ref.lower
    dir_frames = _hole_direction_frames(tree.dimension, holes, frames, seed)
    rho = alpha + 1e-9
    return _feasible_holes(tree, x, r, rho, dir_frames, mode, epsilon,
                           ref_lower, t_steps)


# ---------------------------------------------------------------------------
# Cube labelings
# ---------------------------------------------------------------------------

@dataclass
class CubeLabeling:
    """A total predicate over the ≺_a children of one cube, with optional
    per-child witness holes."""

    base: DyadicCube
    a: int
    kind: str
    labels: dict[int, bool] = field(default_factory=dict)
    witnesses: dict[int, HoleConfig] = field(default_factory=dict)
    flagged: bool = False

    def labeled_keys(self) -> list[int]:
        return [k for k, v in self.labels.items() if v]

    def fraction(self) -> float:
        return sum(self.labels.values()) / max(1, len(self.labels))


def porosity_alignment(alpha: float) -> int:
    """The unique a with 2^-a <= 1 - 2*alpha < 2^(1-a); alpha in (0, 1/2)."""
    if not 0.0 < alpha < 0.5:
        raise DomainError("porous-cube alpha must lie in (0, 1/2)")
    return dyadic_alignment(1.0 - 2.0 * alpha)


def label_porous_cubes(tree: DyadicMassTree, cube: DyadicCube, alpha: float,
                       epsilon: float, holes: int = 1, a: int | None = None,
                       frames: int = 2, seed: int = 0, t_steps: int = 12
                       ) -> CubeLabeling:
    """Label each ≺_a child porous when some witness point in it has
    measure porosity above alpha at the parent scale.

    Witness points are the child's center and its 2^d corners, so the
    labeling may under-report porous cubes but never over-reports beyond
    witness resolution.  ``a`` defaults to the porosity alignment of alpha.
    """
    aligned = porosity_alignment(alpha)
    if a is None:
        a = aligned
    elif a != aligned:
        raise DomainError(f"a={a} does not match the alignment {aligned} of alpha={alpha}")
    if cube.level + a > tree.depth:
        raise DomainError("children exceed tree depth")
    r = 2.0 ** -cube.level
    out = CubeLabeling(cube, a, "porous")
    if tree.mass_of(cube) <= 0.0:
        out.flagged = True
    for child in refine(cube, a):
        witnesses = [child.center] + list(child.vertices())
        hit = None
        for w in witnesses:
            hit = porosity_exceeds(tree, w, r, alpha, holes=holes,
                                   mode="measure", epsilon=epsilon,
                                   frames=frames, seed=seed, t_steps=t_steps)
            if hit is not None:
                break
        out.labels[child.key] = hit is not None
        if hit is not None:
            out.witnesses[child.key] = hit
    return out


def cube_in_cone_conservative(child: DyadicCube, sibling: DyadicCube,
                              spec: ConeSpec) -> bool:
    """Sufficient test for sibling ⊂ X(x,V,alpha) \\ H(x,theta,alpha) for
    every x in ``child``: center directions with the aperture shrunk by
    (1+alpha) * diameter / distance, absorbing both cubes' extents."""
    g = math.sqrt(child.dimension) * child.side
    z0 = sibling.center - child.center
    dist = math.sqrt(z0 @ z0)
    if dist <= 0.0:
        return False
    margin = (1.0 + spec.alpha) * g / dist
    eff = spec.alpha - margin
    if eff <= 0.0:
        return False
    B = spec.basis_array()
    coef = B @ z0
    d2 = max(z0 @ z0 - coef @ coef, 0.0)
    if d2 >= (eff * dist) ** 2:
        return False
    return z0 @ spec.theta_array() <= eff * dist


def _trapped_against_specs(child_center: np.ndarray, child_side: float,
                           sibling_centers: np.ndarray,
                           specs: Sequence[ConeSpec]) -> bool:
    """Vectorized form of the conservative surround test: every sampled
    (V, theta) must admit some sibling wholly inside the cone remainder."""
    d = len(child_center)
    g = math.sqrt(d) * child_side
    z0 = sibling_centers - child_center
    dist = np.sqrt(np.einsum("ij,ij->i", z0, z0))
    ok_dist = dist > 0.0
    for spec in specs:
        with np.errstate(divide="ignore", invalid="ignore"):
            eff = spec.alpha - (1.0 + spec.alpha) * g / dist
        usable = ok_dist & (eff > 0.0)
        if not usable.any():
            return False
        B = spec.basis_array()
        coef = z0 @ B.T
        d2 = np.maximum(np.einsum("ij,ij->i", z0, z0)
                        - np.einsum("ij,ij->i", coef, coef), 0.0)
        inside = usable & (d2 < (eff * dist) ** 2)
        inside &= (z0 @ spec.theta_array()) <= eff * dist
        if not inside.any():
            return False
    return True


def chain_cube_trapped(tree: DyadicMassTree, x: Sequence[float], k: int,
                       a: int, alpha: float, epsilon: float, m: int,
                       frames: int = 16, seed: int = 0) -> bool:
    """Is Q^{k,x}, as a ≺_a child of Q^{k-a,x}, trapped among its heavy
    siblings?  Fast path for per-scale sweeps."""
    if k <= a:
        return False
    if k > tree.depth:
        raise DomainError("k exceeds tree depth")
    parent = tree.cube_at(x, k - a)
    base = tree.mass_of(parent)
    if base <= 0.0:
        raise ZeroMassError("parent cube carries no mass")
    child = tree.cube_at(x, k)
    if tree.mass_of(child) <= epsilon * base:
        return False
    keys, masses = tree.descendant_slice(parent, a)
    heavy = masses > epsilon * base
    keys = keys[heavy]
    if len(keys) == 0:
        return False
    from .dyadic import morton_decode
    centers = (morton_decode(keys, k, tree.dimension).astype(float) + 0.5) * 2.0 ** -k
    others = keys != child.key
    specs = sample_cone_frames(tree.dimension, m, frames, seed, alpha)
    return _trapped_against_specs(child.center, child.side, centers[others], specs)


def label_trapped_cubes(tree: DyadicMassTree, cube: DyadicCube, a: int,
                        alpha: float, epsilon: float, m: int,
                        frames: int = 16, seed: int = 0) -> CubeLabeling:
    """Label heavy ≺_a children that are surrounded: for every sampled
    (V, theta) some heavy sibling sits wholly inside the cone remainder.

    The universal quantifier over directions is sampled, so trapped labels
    are certified only against the sampled net (seed recorded).
    """
    if a < 1 or cube.level + a > tree.depth:
        raise DomainError("invalid refinement for trapped labeling")
    base_mass = tree.mass_of(cube)
    out = CubeLabeling(cube, a, "trapped")
    children = refine(cube, a)
    if base_mass <= 0.0:
        out.flagged = True
        out.labels = {c.key: False for c in children}
        return out
    masses = np.array([tree.mass_of(c) for c in children])
    heavy = masses > epsilon * base_mass
    specs = sample_cone_frames(tree.dimension, m, frames, seed, alpha)
    heavy_children = [c for c, h in zip(children, heavy) if h]
    for child, is_heavy in zip(children, heavy):
        if not is_heavy:
            out.labels[child.key] = False
            continue
        trapped = True
        for spec in specs:
            if not any(sib is not child
                       and cube_in_cone_conservative(child, sib, spec)
                       for sib in heavy_children):
                trapped = False
                break
        out.labels[child.key] = trapped
    return out


# ---------------------------------------------------------------------------
# The E/P/J decomposition and its covering check
# ---------------------------------------------------------------------------

@dataclass
class Decomposition:
    """Cell-level split Q = E ∪ P ∪ J at leaf resolution.

    E collects the witness hole balls of porous children, P the rest of the
    porous region, J everything else.  ``certificates`` records the measured
    quantities the decomposition lemma bounds."""

    base: DyadicCube
    a: int
    leaf_keys: np.ndarray
    part: np.ndarray          # 0 = E, 1 = P, 2 = J per leaf cell
    labeling: CubeLabeling
    certificates: dict


def decompose_porous(tree: DyadicMassTree, cube: DyadicCube, alpha: float,
                     epsilon: float, holes: int = 1, a: int | None = None,
                     frames: int = 2, seed: int = 0) -> Decomposition:
    """Split ``cube`` into hole cells E, covered porous remainder P, and
    non-porous remainder J, with the lemma's measured certificates."""
    labeling = label_porous_cubes(tree, cube, alpha, epsilon, holes=holes,
                                  a=a, frames=frames, seed=seed)
    a = labeling.a
    d, D = tree.dimension, tree.depth
    k = cube.level
    drop = D - k
    if drop * d > 24:
        raise DomainError("cube too coarse to enumerate leaf cells")
    n_leaf = 1 << (d * drop)
    leaf_keys = (cube.key << (d * drop)) + np.arange(n_leaf, dtype=np.int64)
    from .dyadic import morton_decode
    centers = (morton_decode(leaf_keys, D, d).astype(float) + 0.5) * 2.0 ** -D
    hole_r = alpha * 2.0 ** -k
    in_hole = np.zeros(n_leaf, dtype=bool)
    for cfg in labeling.witnesses.values():
        for c in cfg.centers:
            diff = centers - np.asarray(c)
            in_hole |= np.einsum("ij,ij->i", diff, diff) <= hole_r ** 2
    porous_keys = np.array(sorted(labeling.labeled_keys()), dtype=np.int64)
    child_of = leaf_keys >> (d * (drop - a))
    in_porous = np.isin(child_of, porous_keys)
    part = np.full(n_leaf, 2, dtype=np.int8)
    part[in_porous] = 1
    part[in_hole] = 0
    stored_keys, stored_masses = tree.descendant_slice(cube, drop)
    mass = np.zeros(n_leaf)
    if len(stored_keys):
        mass[np.searchsorted(leaf_keys, stored_keys)] = stored_masses
    mu_E = float(mass[part == 0].sum())
    mu_3Q = tree.enlarged_cube_mass(cube, 3)
    cover = int(len(np.unique(child_of[part == 1])))
    c0 = holes * (1 << (a * d))
    certificates = {
        "mu_E": mu_E,
        "mu_3Q": mu_3Q,
        "c0": c0,
        "epsilon": epsilon,
        "e_bound_ok": mu_E <= c0 * epsilon * mu_3Q + 1e-12,
        "p_cover_count": cover,
        "p_cover_scale": 1 << (a * (d - holes)),
        "measured_c1": cover / (1 << (a * (d - holes))),
        "porous_children": int(len(porous_keys)),
    }
    return Decomposition(cube, a, leaf_keys, part, labeling, certificates)


def covering_count(points: np.ndarray, x: Sequence[float], r: float,
                   alpha: float) -> int:
    """Greedy cover of the given points inside B(x, r) by balls of radius
    (1 - 2*alpha) * r; returns the ball count."""
    if not 0.0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 1/2)")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return 0
    x = np.asarray(x, dtype=float)
    dist2 = np.einsum("ij,ij->i", pts - x, pts - x)
    pts = pts[dist2 <= r * r]
    if len(pts) == 0:
        return 0
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    R2 = ((1.0 - 2.0 * alpha) * r) ** 2
    alive = np.ones(len(pts), dtype=bool)
    count = 0
    for i in range(len(pts)):
        if not alive[i]:
            continue
        count += 1
        diff = pts - pts[i]
        alive &= np.einsum("ij,ij->i", diff, diff) > R2
        alive[i] = False
    return count


@dataclass(frozen=True)
class PorosityBound:
    """Dimension bound for mean porous measures, plus the sharper small-p
    variant; c is caller-supplied (the dimensional constant is not explicit)."""

    alignment: int
    bound: float
    small_p_bound: float


def porosity_dimension_bound(d: int, holes: int, p: float, alpha: float,
                             c: float) -> PorosityBound:
    """Evaluate d - p*ell + c / log2(1/(1-2*alpha)) and its small-p variant."""
    if not 0.0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 1/2)")
    if not 0.0 < p <= 1.0:
        raise DomainError("scale fraction p must lie in (0, 1]")
    if not 1 <= holes <= d:
        raise DomainError("hole count must lie in 1..d")
    a = porosity_alignment(alpha)
    denom = math.log2(1.0 / (1.0 - 2.0 * alpha))
    bound = d - p * holes + c / denom
    sharp = d - p * holes + c * p * math.log2(1.0 / p) / denom if p < 1.0 else d - p * holes
    return PorosityBound(a, bound, sharp)
