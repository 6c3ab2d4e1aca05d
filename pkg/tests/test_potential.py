from __future__ import annotations

import math

import numpy as np
import pytest

from jostkit.bc import random_unitary
from jostkit.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NonHermitianError,
    NotIntegrableError,
    PotentialError,
)
from jostkit.potential import (
    ConstantPiece,
    ExpPiece,
    LinearPiece,
    Piece,
    PotentialSpec,
    gauss_rule,
    integrate,
    moments,
    potential_from_dict,
    potential_to_dict,
    trapezoid_rule,
    validate_potential,
)


def test_piecewise_evaluation_is_right_continuous():
    p = PotentialSpec.piecewise([1.0, 2.0], [-3.0, 0.5])
    values = p.evaluate([0.0, 0.999, 1.0, 1.5, 2.0, 5.0])[:, 0, 0].real
    assert values.tolist() == [-3.0, -3.0, 0.5, 0.5, 0.0, 0.0]
    assert p.support_end() == 2.0
    assert p.breakpoints().tolist() == [0.0, 1.0, 2.0]


def test_sampled_model_interpolates_linearly():
    p = PotentialSpec.sampled([1.0, 2.0, 3.0], [0.0, -2.0, 0.0])
    assert p.evaluate([0.5])[0, 0, 0] == 0.0
    assert p.evaluate([1.5])[0, 0, 0].real == pytest.approx(-1.0)
    assert p.evaluate([2.75])[0, 0, 0].real == pytest.approx(-0.5)
    assert p.sup_norm() == pytest.approx(2.0)


def test_zero_potential_has_no_pieces():
    p = PotentialSpec.zero(3)
    assert p.pieces == ()
    assert p.support_end() == 0.0
    assert p.sup_norm() == 0.0
    assert np.all(p.evaluate([0.0, 1.0]) == 0.0)
    nodes, weights, values = trapezoid_rule(p, 0.1)
    assert len(nodes) == len(weights) == len(values) == 0


def test_builtin_families():
    well = PotentialSpec.builtin("square_well", n=2, depth=4.0, width=0.5)
    assert well.evaluate([0.25])[0] == pytest.approx(-4.0 * np.eye(2))
    assert well.support_end() == 0.5

    coupled = PotentialSpec.builtin("coupled_well", n=2, depths=(3.0, 1.5), coupling=0.7 + 0.2j)
    matrix = coupled.evaluate([0.5])[0]
    assert matrix == pytest.approx(np.array([[-3.0, 0.7 + 0.2j], [0.7 - 0.2j, -1.5]]))

    with pytest.raises(DimensionMismatchError):
        PotentialSpec.builtin("coupled_well", n=3)
    with pytest.raises(PotentialError):
        PotentialSpec.builtin("harmonic", n=1)


def test_exp_decay_is_truncated_at_tail_mass():
    p = PotentialSpec.builtin("exp_decay", n=1, strength=2.0, rate=1.5)
    expected = math.log(2.0 / (1.5 * p.settings.tail_mass)) / 1.5
    assert p.support_end() == pytest.approx(expected)
    assert p.evaluate([0.0])[0, 0, 0].real == pytest.approx(-2.0)
    l1 = validate_potential(p).l1_norm
    assert l1 == pytest.approx(2.0 / 1.5, rel=1e-9)

    with pytest.raises(NotIntegrableError):
        PotentialSpec.builtin("exp_decay", n=1, rate=0.0)


def test_validate_potential_norms(square_well):
    report = validate_potential(square_well)
    depth = -square_well.evaluate([0.5])[0, 0, 0].real
    assert report.hermiticity_defect == 0.0
    assert report.l1_norm == pytest.approx(depth)
    assert report.first_moment == pytest.approx(0.5 * depth)


def test_validate_potential_rejects_non_hermitian():
    p = PotentialSpec.piecewise([1.0], [[[0.0, 1.0], [0.0, 0.0]]])
    with pytest.raises(NonHermitianError):
        validate_potential(p)


def test_shape_errors():
    with pytest.raises(DimensionMismatchError):
        PotentialSpec.piecewise([1.0, 2.0], [-1.0])
    with pytest.raises(PotentialError):
        PotentialSpec.piecewise([2.0, 1.0], [-1.0, -1.0])
    with pytest.raises(DimensionMismatchError):
        PotentialSpec.sampled([1.0], [-1.0])


def test_gauss_rule_integrates_polynomial_pieces_exactly():
    p = PotentialSpec.sampled([0.0, 1.0, 3.0], [0.0, 2.0, -1.0])
    x, w = gauss_rule(p)
    assert np.sum(w) == pytest.approx(3.0)
    integral = integrate(p, lambda x, v: v)
    assert integral[0, 0].real == pytest.approx(1.0 + 1.0)


def test_moments_match_quadrature(coupled_well):
    data = moments(coupled_well)
    assert data.Q1 == pytest.approx(0.5 * coupled_well.evaluate([0.5])[0])
    k = 1.3
    direct = 0.5 * integrate(coupled_well, lambda x, v: np.exp(2j * k * x)[:, None, None] * v)
    assert data.Q2(k) == pytest.approx(direct, abs=1e-12)


def test_exp_moments_match_quadrature(exp_decay):
    k = 0.7
    direct = 0.5 * integrate(exp_decay, lambda x, v: np.exp(2j * k * x)[:, None, None] * v)
    assert moments(exp_decay).Q2(k) == pytest.approx(direct, abs=1e-10)


def test_conjugate_rotates_every_model(rng, coupled_well, exp_decay):
    M = random_unitary(2, rng)
    x = np.array([0.3, 0.9, 2.5])
    for p in (coupled_well, exp_decay, PotentialSpec.sampled([0.0, 1.0], [np.eye(2), -np.eye(2)])):
        rotated = p.conjugate(M)
        expected = M @ p.evaluate(x) @ M.conj().T
        assert rotated.evaluate(x) == pytest.approx(expected, abs=1e-12)


def test_trapezoid_rule_keeps_one_sided_values():
    p = PotentialSpec.piecewise([1.0, 2.0], [-3.0, 0.5])
    nodes, weights, values = trapezoid_rule(p, 0.25)
    assert np.sum(weights) == pytest.approx(2.0)
    knot = np.flatnonzero(nodes == 1.0)
    assert len(knot) == 2
    assert values[knot, 0, 0].real.tolist() == [-3.0, 0.5]


def test_json_codec_round_trip(exp_decay):
    p = PotentialSpec.piecewise([0.5, 1.5], [np.diag([-1.0, 2.0]), np.array([[0.0, 1j], [-1j, 0.0]])])
    restored = potential_from_dict(potential_to_dict(p))
    x = np.array([0.1, 1.0, 2.0])
    assert restored.evaluate(x) == pytest.approx(p.evaluate(x))

    restored_exp = potential_from_dict(potential_to_dict(exp_decay))
    assert restored_exp.evaluate(x) == pytest.approx(exp_decay.evaluate(x))


def test_from_dict_errors():
    with pytest.raises(PotentialError):
        potential_from_dict({"model": "piecewise", "n": 1})
    with pytest.raises(PotentialError):
        potential_from_dict({"model": "spline", "n": 1})
    scalar = potential_from_dict({"model": "piecewise", "n": 2, "breakpoints": [1.0], "values": [-2.0]})
    assert scalar.evaluate([0.5])[0] == pytest.approx(-2.0 * np.eye(2))


def test_piece_is_abstract(exp_decay):
    with pytest.raises(TypeError):
        Piece()
    sampled = PotentialSpec.sampled([0.5, 1.0], [-1.0, 0.0])
    kinds = {type(piece) for p in (PotentialSpec.piecewise([1.0], [-1.0]), sampled, exp_decay) for piece in p.pieces}
    assert kinds == {ConstantPiece, LinearPiece, ExpPiece}
    assert all(isinstance(piece, Piece) for piece in exp_decay.pieces)


@pytest.mark.parametrize(
    "family, params, name",
    [
        ("square_well", {"depth": "deep"}, "depth"),
        ("square_well", {"width": None}, "width"),
        ("exp_decay", {"strength": "x"}, "strength"),
        ("exp_decay", {"x_max": "far"}, "x_max"),
    ],
)
def test_builtin_params_must_be_numeric(family, params, name):
    with pytest.raises(InvalidParameterError) as excinfo:
        PotentialSpec.builtin(family, n=1, **params)
    assert excinfo.value.name == name
    assert excinfo.value.code == 2
