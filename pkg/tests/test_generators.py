import math
import warnings

import numpy as np
import pytest

from dimens.dyadic import DomainError, DyadicCube
from dimens.generators import (DyadicBernoulli, Lebesgue, PointMass,
                               PorousCantor, Product, RandomCascade,
                               SelfSimilarIFS, axis_models, build,
                               estimate_leaf_cells, parse_measure_spec,
                               sample_digit_path, spec_to_json,
                               theoretical_dimension)
from dimens.scalestats import dyadic_upper_dim


def test_lebesgue_cell_mass():
    tree = build(Lebesgue(2), 4)
    # 2^4 cells per axis, each level-4 cell carries 2^(-4*2)
    assert tree.mass_of(DyadicCube(4, (3, 11))) == pytest.approx(2.0 ** -8)
    tree.validate()


def test_bernoulli_product_rule():
    tree = build(DyadicBernoulli(1, (0.25, 0.75)), 3)
    assert tree.mass_of(DyadicCube(3, (0,))) == pytest.approx((1 / 4) ** 3)
    assert tree.mass_of(DyadicCube(3, (7,))) == pytest.approx((3 / 4) ** 3)


def test_porous_cantor_two_generations():
    tree = build(PorousCantor(1, 2), 4)
    keys, masses = tree.leaf_cells()
    assert sorted(keys.tolist()) == [0, 3, 12, 15]
    assert np.allclose(masses, 0.25)


def test_porous_cantor_alternating_generations():
    spec = PorousCantor(1, 2, gap_every=2)
    tree = build(spec, 8)
    tree.validate()
    # one gap cycle = gap gen (x2 cells) + full gen (x4 cells) over 4 levels
    keys, _ = tree.leaf_cells()
    assert len(keys) == (2 * 4) ** 2
    assert theoretical_dimension(spec).value == pytest.approx(3 / 4)


def test_point_mass_checks_domain():
    with pytest.raises(DomainError):
        build(PointMass((1.2,)), 4)


def test_known_dimensions():
    assert theoretical_dimension(Lebesgue(3)).value == 3.0
    assert theoretical_dimension(PointMass((0.2, 0.3))).value == 0.0
    assert theoretical_dimension(DyadicBernoulli(1, (0.5, 0.5))).value == pytest.approx(1.0)
    h = 0.25 * math.log2(4) + 0.75 * math.log2(4 / 3)
    assert theoretical_dimension(DyadicBernoulli(1, (0.25, 0.75))).value == pytest.approx(h)
    assert theoretical_dimension(PorousCantor(1, 3)).value == pytest.approx(1 / 3)
    prod = Product((PorousCantor(1, 2), Lebesgue(1)))
    assert theoretical_dimension(prod).value == pytest.approx(1.5)
    assert theoretical_dimension(RandomCascade(1, 0.5, 0)).value is None


def test_ifs_dimension_and_build():
    # two maps of ratio 1/4 with separated images: dim = 1/2 at equal weights
    spec = SelfSimilarIFS(1, (0.25, 0.25), ((0.0,), (0.75,)), (0.5, 0.5))
    assert spec.separated()
    assert theoretical_dimension(spec).value == pytest.approx(0.5)
    tree = build(spec, 8)
    tree.validate()
    # attractor pieces sit in [0, 1/3] and [3/4, 1]
    assert tree.mass_of(DyadicCube(1, (0,))) == pytest.approx(0.5)


def test_ifs_overlap_warns_and_loses_formula():
    spec = SelfSimilarIFS(1, (0.6, 0.6), ((0.0,), (0.2,)), (0.5, 0.5))
    assert not spec.separated()
    assert theoretical_dimension(spec).value is None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        build(spec, 6)
    assert any("overlap" in str(w.message) for w in caught)


def test_ifs_rejects_escaping_maps():
    with pytest.raises(DomainError):
        SelfSimilarIFS(1, (0.5,), ((0.6,),), (1.0,))


def test_invalid_weights():
    with pytest.raises(DomainError):
        DyadicBernoulli(1, (0.5, 0.6))
    with pytest.raises(DomainError):
        DyadicBernoulli(1, (-0.1, 1.1))
    with pytest.raises(DomainError):
        DyadicBernoulli(2, (0.5, 0.5))


def test_cascade_deterministic_and_conservative():
    a = build(RandomCascade(1, 0.5, seed=9), 6)
    b = build(RandomCascade(1, 0.5, seed=9), 6)
    c = build(RandomCascade(1, 0.5, seed=10), 6)
    ka, ma = a.leaf_cells()
    kb, mb = b.leaf_cells()
    kc, mc = c.leaf_cells()
    assert np.array_equal(ma, mb)
    assert not np.array_equal(ma, mc)
    assert a.root_mass == pytest.approx(1.0, rel=1e-12)
    a.validate()


def test_product_build_is_outer_product():
    tree = build(Product((DyadicBernoulli(1, (0.25, 0.75)),
                          DyadicBernoulli(1, (0.25, 0.75)))), 5)
    direct = build(DyadicBernoulli(2, (1 / 16, 3 / 16, 3 / 16, 9 / 16)), 5)
    kt, mt = tree.leaf_cells()
    kd, md = direct.leaf_cells()
    assert np.array_equal(kt, kd)
    assert np.allclose(mt, md, rtol=1e-12)


def test_spec_json_roundtrip():
    specs = [
        Lebesgue(2),
        PointMass((0.25, 0.75)),
        DyadicBernoulli(1, (0.25, 0.75)),
        SelfSimilarIFS(1, (0.25, 0.25), ((0.0,), (0.75,)), (0.5, 0.5)),
        PorousCantor(1, 3, 2),
        Product((Lebesgue(1), PointMass((0.5,)))),
        RandomCascade(2, 0.3, 11),
    ]
    for spec in specs:
        assert parse_measure_spec(spec_to_json(spec)) == spec
    with pytest.raises(DomainError):
        parse_measure_spec({"variant": "nope"})
    with pytest.raises(DomainError):
        parse_measure_spec({})


def test_dimension_oracle_consistency():
    # dyadic local dimension at measure-drawn points concentrates on H
    tree = build(DyadicBernoulli(1, (0.25, 0.75)), 16)
    pts = tree.sample_points(300, np.random.default_rng(1))
    vals = [dyadic_upper_dim(tree, p, 16) for p in pts]
    h = theoretical_dimension(DyadicBernoulli(1, (0.25, 0.75))).value
    assert abs(float(np.mean(vals)) - h) < 0.05


def test_digit_model_matches_tree_conditionals():
    spec = PorousCantor(1, 2)
    tree = build(spec, 8)
    models = axis_models(spec)
    assert models is not None
    # walk the leftmost support chain in both representations
    state = models[0].start()
    x = [2.0 ** -9]  # inside the leftmost kept cell
    for k in range(1, 9):
        (m0, m1), (s0, s1) = models[0].children(state)
        parent = tree.mass_of(tree.cube_at(x, k - 1))
        child = tree.mass_of(tree.cube_at(x, k))
        assert child / parent == pytest.approx(m0, rel=1e-12)
        state = s0
    # atom axis model reproduces the digit chain of its coordinate
    atom = axis_models(PointMass((0.3125,)))[0]
    state = atom.start()
    digits = []
    for _ in range(6):
        (m0, m1), (s0, s1) = atom.children(state)
        bit = 0 if m0 == 1.0 else 1
        digits.append(bit)
        state = (s0, s1)[bit]
    assert digits == [0, 1, 0, 1, 0, 0]  # 0.3125 = 0.0101 in binary


def test_sample_digit_path_statistics():
    models = axis_models(DyadicBernoulli(1, (0.25, 0.75)))
    path = sample_digit_path(models, 2000, np.random.default_rng(4))
    h = theoretical_dimension(DyadicBernoulli(1, (0.25, 0.75))).value
    assert -path.log2_chain_masses()[-1] / 2000 == pytest.approx(h, abs=0.06)
    ints = path.coordinate_integers()
    assert ints[10, 0] == int("".join(str(b) for b in path.digits[:11, 0]), 2)


def test_estimate_leaf_cells():
    assert estimate_leaf_cells(PointMass((0.3,)), 20) == 1
    assert estimate_leaf_cells(Lebesgue(2), 5) == 1 << 10
    assert estimate_leaf_cells(PorousCantor(1, 2), 4) == 4
    assert estimate_leaf_cells(DyadicBernoulli(1, (1.0, 0.0)), 6) == 1


def test_build_guard():
    with pytest.raises(DomainError):
        build(Lebesgue(2), 14)  # 2^28 leaves exceeds the guard
