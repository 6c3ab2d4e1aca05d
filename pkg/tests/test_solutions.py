from __future__ import annotations

import numpy as np
import pytest

from jostkit.bc import dirichlet, neumann, random_bc
from jostkit.errors import GridMismatchError, SolutionError, ZeroKError
from jostkit.potential import PotentialSpec
from jostkit.scattering import jost_matrix
from jostkit.solutions import (
    jost_decomposition,
    jost_solution,
    physical_solution,
    physical_solution_from_regular,
    regular_solution,
    residual,
    second_solution,
    wronskian,
)
from tests.conftest import WELL_DEPTH


def test_free_jost_and_second_solutions_are_exponentials():
    p = PotentialSpec.zero(2)
    xs = np.linspace(0.0, 3.0, 7)
    k = 1.7
    f = jost_solution(p, k, xs)
    g = second_solution(p, k, xs)
    assert f.values[:, 0, 0] == pytest.approx(np.exp(1j * k * xs))
    assert f.derivs[:, 1, 1] == pytest.approx(1j * k * np.exp(1j * k * xs))
    assert g.values[:, 1, 1] == pytest.approx(np.exp(-1j * k * xs))
    assert f.values[:, 0, 1] == pytest.approx(np.zeros(len(xs)))


def test_jost_solution_decays_on_the_imaginary_axis(square_well):
    xs = np.array([1.0, 2.0, 4.0])
    f = jost_solution(square_well, 0.8j, xs)
    assert f.values[:, 0, 0] == pytest.approx(np.exp(-0.8 * xs))


def test_regular_solution_inside_square_well(square_well):
    k = 1.3
    q = np.sqrt(k**2 + WELL_DEPTH)
    xs = np.linspace(0.0, 1.0, 11)
    phi = regular_solution(square_well, dirichlet(1), k, xs)
    assert phi.values[:, 0, 0] == pytest.approx(np.sin(q * xs) / q, abs=1e-9)
    assert phi.derivs[:, 0, 0] == pytest.approx(np.cos(q * xs), abs=1e-9)


def test_regular_solution_starts_from_the_boundary_pair(rng, coupled_well):
    bp = random_bc(2, rng)
    phi = regular_solution(coupled_well, bp, 2.0, [0.0, 0.5, 3.0])
    assert phi.values[0] == pytest.approx(bp.A)
    assert phi.derivs[0] == pytest.approx(bp.B)


def test_wronskian_is_constant(coupled_well):
    xs = np.linspace(0.0, 2.5, 40)
    k = 1.1
    f = jost_solution(coupled_well, -np.conj(k), xs)
    phi = regular_solution(coupled_well, neumann(2), k, xs)
    stack = wronskian(f, phi)
    assert np.max(np.abs(stack - stack[0])) < 1e-8


@pytest.mark.parametrize("k", [0.5, 2.0, 5.0])
def test_jost_wronskians_against_plane_waves(coupled_well, k):
    xs = np.linspace(0.0, 2.5, 26)
    f = jost_solution(coupled_well, k, xs)
    g = second_solution(coupled_well, k, xs)
    eye = np.eye(2)
    assert np.max(np.abs(wronskian(f, f) - 2j * k * eye)) < 1e-8 * max(1.0, k)
    assert np.max(np.abs(wronskian(g, g) + 2j * k * eye)) < 1e-8 * max(1.0, k)
    assert np.max(np.abs(wronskian(g, f))) < 1e-8 * max(1.0, k)
    # real symmetric V keeps the transpose Wronskian constant too
    assert np.max(np.abs(wronskian(f, g, adjoint=False) + 2j * k * eye)) < 1e-8 * max(1.0, k)


@pytest.mark.parametrize("k", [0.5, 2.0, 5.0, 1.0 + 0.5j])
def test_wronskian_of_jost_and_regular_is_the_jost_matrix(rng, coupled_well, k):
    bp = random_bc(2, rng)
    xs = np.linspace(0.0, 2.5, 26)
    f = jost_solution(coupled_well, -np.conj(k), xs)
    phi = regular_solution(coupled_well, bp, k, xs)
    J = jost_matrix(coupled_well, bp, k)
    stack = wronskian(f, phi)
    assert np.max(np.abs(stack - J[None])) < 1e-8 * max(1.0, np.linalg.norm(J, 2))


@pytest.mark.parametrize("k", [0.5, 2.0, 5.0, 1.0 + 0.5j])
def test_regular_solution_is_even_in_k(rng, coupled_well, k):
    bp = random_bc(2, rng)
    xs = np.linspace(0.0, 3.0, 13)
    plus = regular_solution(coupled_well, bp, k, xs)
    minus = regular_solution(coupled_well, bp, -k, xs)
    scale = max(1.0, float(np.max(np.abs(plus.values))))
    assert np.max(np.abs(plus.values - minus.values)) < 1e-8 * scale
    assert np.max(np.abs(plus.derivs - minus.derivs)) < 1e-8 * scale * max(1.0, abs(k))


@pytest.mark.parametrize("k", [0.5, 2.0, 5.0, 1.0 + 0.5j])
def test_square_well_jost_solution_at_the_origin(square_well, k):
    q = np.sqrt(k**2 + WELL_DEPTH + 0j)
    f = jost_solution(square_well, k, [0.0])
    value = np.exp(1j * k) * (np.cos(q) - 1j * k / q * np.sin(q))
    deriv = np.exp(1j * k) * (q * np.sin(q) + 1j * k * np.cos(q))
    assert f.values[0, 0, 0] == pytest.approx(value, abs=1e-8)
    assert f.derivs[0, 0, 0] == pytest.approx(deriv, abs=1e-8 * abs(q))


def test_wronskian_needs_a_shared_grid(square_well):
    f = jost_solution(square_well, 1.0, [0.0, 1.0])
    g = jost_solution(square_well, 1.0, [0.0, 2.0])
    with pytest.raises(GridMismatchError):
        wronskian(f, g)


def test_free_dirichlet_physical_solution_is_a_sine():
    xs = np.linspace(0.1, 4.0, 9)
    k = 2.2
    psi = physical_solution(PotentialSpec.zero(1), dirichlet(1), k, xs)
    assert psi.values[:, 0, 0] == pytest.approx(-1j * np.sin(k * xs))
    neumann_psi = physical_solution(PotentialSpec.zero(1), neumann(1), k, xs)
    assert neumann_psi.values[:, 0, 0] == pytest.approx(np.cos(k * xs))


@pytest.mark.parametrize("k", [0.3, 1.5, 6.0])
def test_physical_solution_agrees_with_regular_route(rng, coupled_well, k):
    bp = random_bc(2, rng)
    xs = np.linspace(0.0, 3.0, 13)
    direct = physical_solution(coupled_well, bp, k, xs)
    regular = physical_solution_from_regular(coupled_well, bp, k, xs)
    assert np.max(np.abs(direct.values - regular.values)) < 1e-8
    assert np.max(np.abs(direct.derivs - regular.derivs)) < 1e-7


def test_physical_solution_satisfies_boundary_condition(rng, exp_decay):
    bp = random_bc(2, rng)
    psi = physical_solution(exp_decay, bp, 1.2, [0.0])
    value, deriv = psi.at(0)
    condition = -bp.B.conj().T @ value + bp.A.conj().T @ deriv
    assert np.max(np.abs(condition)) < 1e-8


def test_residual_is_small_on_a_fine_grid(square_well):
    xs = np.linspace(0.0, 2.0, 401)
    phi = regular_solution(square_well, neumann(1), 3.0, xs)
    assert residual(phi, square_well) < 1e-3


def test_jost_decomposition_reproduces_the_regular_solution(coupled_well):
    xs = np.linspace(0.0, 2.0, 25)
    decomposition = jost_decomposition(coupled_well, dirichlet(2), 1.4, xs)
    assert decomposition.residual < 1e-8
    assert decomposition.xi.shape == (2, 2)


def test_zero_k_and_lower_half_plane_are_rejected(square_well):
    with pytest.raises(ZeroKError):
        jost_solution(square_well, 0.0, [0.0])
    with pytest.raises(SolutionError):
        jost_solution(square_well, -0.5j, [0.0])
    with pytest.raises(GridMismatchError):
        jost_solution(square_well, 1.0, [-1.0])
