"""Entropy of mass tuples, per-cube refinement entropy, local entropy
averages, and the constrained maximizers they are compared against.

Logarithms are base 2 throughout.  phi(0) := 0 and 0*log(0/0) := 0 by
continuity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dyadic import DomainError, DyadicMassTree, ZeroMassError, cube_of_point

MASS_TUPLE_TOL = 1e-12


def phi(t: float) -> float:
    """The entropy summand t * log2(1/t), extended by phi(0) = 0."""
    if t < 0.0 or t > 1.0 + MASS_TUPLE_TOL:
        raise DomainError(f"phi defined on [0,1], got {t}")
    if t <= 0.0:
        return 0.0
    return -t * math.log2(min(t, 1.0))


@dataclass(frozen=True)
class MassTuple:
    """A tuple of masses in [0,1]; the total may be below 1."""

    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if v < 0.0 or v > 1.0 + MASS_TUPLE_TOL:
                raise DomainError(f"mass {v} outside [0,1]")
        if sum(self.values) > 1.0 + MASS_TUPLE_TOL:
            raise DomainError("mass tuple total exceeds 1")

    def entropy(self) -> float:
        return sum(phi(v) for v in self.values)


def tuple_entropy(values: "MassTuple | Sequence[float]") -> float:
    """H(p_1, ..., p_K) = sum phi(p_i); the p_i need not sum to 1."""
    if isinstance(values, MassTuple):
        return values.entropy()
    return MassTuple(tuple(float(v) for v in values)).entropy()


def cell_entropy(tree: DyadicMassTree, cube, a: int) -> float:
    """a-entropy of the tree measure in ``cube``: the entropy of the
    conditional mass distribution over its ≺_a subcubes.  Lies in [0, a*d]."""
    if a < 1:
        raise DomainError("refinement step a must be >= 1")
    base = tree.mass_of(cube)
    if base <= 0.0:
        raise ZeroMassError(f"cube {cube} carries no mass")
    _, masses = tree.descendant_slice(cube, a)
    p = masses / base
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass
class EntropyProfile:
    """Per-scale entropies H^a(mu, Q^{k,x}) for k = 1..N with running
    averages (1/(k*a)) * sum_{j<=k} H^a.  ``truncated`` marks a chain that
    hit a zero-mass cube before reaching N (impossible for measure-typical
    points)."""

    point: np.ndarray
    a: int
    entropies: np.ndarray
    averages: np.ndarray
    truncated: bool

    @property
    def horizon(self) -> int:
        return len(self.entropies)


def entropy_average(tree: DyadicMassTree, x: Sequence[float], a: int, N: int
                    ) -> EntropyProfile:
    """Local entropy average profile of the point x down to scale N."""
    if N < 1:
        raise DomainError("horizon N must be >= 1")
    if N + a > tree.depth:
        raise DomainError(f"N + a = {N + a} exceeds tree depth {tree.depth}")
    x = np.asarray(x, dtype=float)
    ents = []
    truncated = False
    for k in range(1, N + 1):
        cube = tree.cube_at(x, k)
        try:
            ents.append(cell_entropy(tree, cube, a))
        except ZeroMassError:
            truncated = True
            break
    ents = np.array(ents)
    avgs = np.cumsum(ents) / (a * np.arange(1, len(ents) + 1))
    return EntropyProfile(x, a, ents, avgs, truncated)


# ---------------------------------------------------------------------------
# Closed-form maximizers and their brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintDomain:
    """Tuples (q_1..q_{M-n}, p_1..p_n) with sum q = 1 - sum p, q >= 0 and
    0 <= p_i <= epsilon; requires 0 < epsilon < 1/(2M)."""

    M: int
    n: int
    epsilon: float

    def __post_init__(self):
        if self.M < 1:
            raise DomainError("M must be >= 1")
        if not 0 <= self.n <= self.M - 1:
            raise DomainError("n must lie in {0, ..., M-1}")
        if not 0.0 < self.epsilon < 1.0 / (2 * self.M):
            raise DomainError(f"epsilon must lie in (0, 1/(2M)) = (0, {1/(2*self.M)})")


def fixed_sum_max(K: int, c: float) -> float:
    """Maximum of H over K-tuples with fixed total c: c * log2(K / c)."""
    if K < 1:
        raise DomainError("K must be >= 1")
    if not 0.0 < c <= 1.0:
        raise DomainError("total c must lie in (0, 1]")
    return c * math.log2(K / c)


def constrained_max(domain: ConstraintDomain) -> tuple[float, np.ndarray]:
    """Closed-form maximum of H on the constrained domain, with the
    maximizing configuration (all q equal, all p at epsilon)."""
    M, n, eps = domain.M, domain.n, domain.epsilon
    q_val = (1.0 - n * eps) / (M - n)
    value = (1.0 - n * eps) * math.log2((M - n) / (1.0 - n * eps))
    if n > 0:
        value += n * eps * math.log2(1.0 / eps)
    config = np.r_[np.full(M - n, q_val), np.full(n, eps)]
    return value, config


def brute_force_max(domain: ConstraintDomain, grid: int = 64,
                    rounds: int = 200, starts: int = 4, seed: int = 0) -> float:
    """Numerical maximum of H on the domain, independent of the closed form.

    Multi-start coordinate ascent: a grid scan per coordinate at resolution
    1/``grid`` first, then golden-section refinement per coordinate until a
    full round improves by less than 1e-13 (capped at ``rounds``).
    """
    M, n, eps = domain.M, domain.n, domain.epsilon
    free = n + (M - n - 1)
    if free == 0:
        return phi(1.0 - n * eps) + n * phi(eps) if n else phi(1.0)

    def objective(v: list[float]) -> float:
        last = 1.0 - sum(v)
        if last < -1e-15:
            return -math.inf
        total = phi(max(last, 0.0))
        for w in v:
            total += phi(w)
        return total

    def upper_bound(i: int, v: list[float]) -> float:
        slack = v[i] + (1.0 - sum(v))
        return min(eps, slack) if i < n else min(1.0, slack)

    rng = np.random.default_rng(seed)
    best = -math.inf
    inits = [
        [eps] * n + [(1.0 - n * eps) / (M - n)] * (M - n - 1),
        [0.0] * free,
    ]
    while len(inits) < starts + 2:
        draw = rng.random(free)
        v = [float(draw[i]) * eps for i in range(n)]
        rest = 1.0 - sum(v)
        v += [float(w) for w in draw[n:] * rest / max(1, M - n)]
        inits.append(v)

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for v in inits:
        v = list(v)
        cur = objective(v)
        if cur == -math.inf:
            continue
        # coarse per-coordinate grid pass
        for i in range(free):
            hi = upper_bound(i, v)
            vals = [hi * j / grid for j in range(grid + 1)]
            scores = []
            for cand in vals:
                v[i] = cand
                scores.append(objective(v))
            v[i] = vals[int(np.argmax(scores))]
        cur = objective(v)
        for _ in range(rounds):
            improved = cur
            for i in range(free):
                lo, hi = 0.0, upper_bound(i, v)
                x1 = hi - gr * (hi - lo)
                x2 = lo + gr * (hi - lo)
                v[i] = x1
                f1 = objective(v)
                v[i] = x2
                f2 = objective(v)
                for _ in range(60):
                    if f1 < f2:
                        lo, x1, f1 = x1, x2, f2
                        x2 = lo + gr * (hi - lo)
                        v[i] = x2
                        f2 = objective(v)
                    else:
                        hi, x2, f2 = x2, x1, f1
                        x1 = hi - gr * (hi - lo)
                        v[i] = x1
                        f1 = objective(v)
                v[i] = x1 if f1 >= f2 else x2
                cur = objective(v)
            if cur - improved < 1e-13:
                break
        best = max(best, cur)
    return best


def log_sum_bound(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Both sides of the log sum inequality; contract: lhs >= rhs.

    lhs = sum a_i log2(a_i / b_i), rhs = (sum a) log2(sum a / sum b), with
    0 * log(0/0) read as 0.  Requires b_i > 0 wherever a_i > 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("inputs must be equal-length vectors")
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("entries must be non-negative")
    if np.any((a > 0) & (b == 0)):
        raise DomainError("b must be positive wherever a is")
    pos = a > 0
    lhs = float((a[pos] * np.log2(a[pos] / b[pos])).sum())
    sa, sb = float(a.sum()), float(b.sum())
    if sa == 0.0:
        rhs = 0.0
    elif sb == 0.0:
        raise DomainError("sum of b vanishes while sum of a is positive")
    else:
        rhs = sa * math.log2(sa / sb)
    return lhs, rhs


def s_prime_bound(m: float, d: int, q: float, a: int, epsilon: float) -> float:
    """Dimension bound s' = q * h / a + (1-q) * d, where h is the
    constrained maximum with M = 2^(a*d) and n = 2^(a*d) - floor(2^(a*m)).

    Requires 0 < q < 1, a >= 1 and 0 < epsilon < 2^(-a*d-1)."""
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie in (0,1)")
    if a < 1 or d < 1:
        raise DomainError("a and d must be positive integers")
    if not 0.0 < m < d:
        raise DomainError("m must lie in (0, d)")
    if not 0.0 < epsilon < 2.0 ** (-a * d - 1):
        raise DomainError(f"epsilon must lie in (0, 2^-(a*d+1)) = (0, {2.0**(-a*d-1)})")
    M = 1 << (a * d)
    n = M - int(math.floor(2.0 ** (a * m)))
    h, _ = constrained_max(ConstraintDomain(M, n, epsilon))
    return q * h / a + (1.0 - q) * d


def homogeneity_entropy_cap(a: int, d: int) -> float:
    """Upper bound a*d for H^a in d dimensions (fixed-sum maximum at c=1)."""
    return fixed_sum_max(1 << (a * d), 1.0)
