import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algorithms.errors import (
    ConstraintViolationError,
    FirstClassConstraintError,
    InconsistentDynamicsError,
    LayoutMismatchError,
)
from algorithms.poly_mech import (
    AffineConstraint,
    PhaseLayout,
    PolyObservable,
    block_diagonalize,
    classify_constraints,
    consistency_chain,
    constraint_quadratic_form,
    derive_primary_constraints,
    dirac_bracket,
    evolve_constrained,
    oscillator_hamiltonian,
    poisson_bracket,
    rotate_constraints,
)

LAYOUT = PhaseLayout(2)
MONOMIALS = [m for m in itertools.product(range(3), repeat=4) if sum(m) <= 2]

polynomials = st.dictionaries(
    keys=st.sampled_from(MONOMIALS),
    values=st.integers(min_value=-5, max_value=5),
    max_size=6,
).map(lambda terms: PolyObservable(LAYOUT, terms))


def var(name):
    return PolyObservable.variable(LAYOUT, name)


def oscillator_constraints(alpha, beta, k1, k2, kprime):
    """φ₁ = αx₁ + β(p₁ + (k′/k₂)p₂) e o sistema completo da cadeia."""
    h_c = oscillator_hamiltonian(k1, k2, kprime)
    phi1 = AffineConstraint([alpha, beta, 0.0, kprime / k2 * beta])
    return h_c, consistency_chain(h_c, [phi1])


class TestPhaseLayout:
    def test_interleaved_indices(self):
        assert LAYOUT.names == ("x1", "p1", "x2", "p2")
        assert LAYOUT.q_index(1) == 2
        assert LAYOUT.p_index(1) == 3
        assert LAYOUT.index("p2") == 3

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            LAYOUT.index("y")


class TestPolyObservable:
    def test_zero_degree(self):
        assert PolyObservable.zero(LAYOUT).degree() == -1
        assert PolyObservable.constant(LAYOUT, 3).degree() == 0

    def test_fraction_coefficients_stay_exact(self):
        half = var("x1") * Fraction(1, 2)
        total = half + half
        assert total == var("x1")
        assert isinstance(total.coefficient((1, 0, 0, 0)), (int, Fraction))

    def test_from_quadratic_round_trip(self):
        m = np.array([[2.0, 0.5, 0, 0], [0.5, 1.0, 0, 0], [0, 0, 3.0, -1.0], [0, 0, -1.0, 1.0]])
        poly = PolyObservable.from_quadratic(LAYOUT, m, linear=[1, 0, 0, -2], const=4)
        matrix, linear, const = poly.quadratic_part()
        np.testing.assert_allclose(matrix, m)
        np.testing.assert_allclose(linear, [1, 0, 0, -2])
        assert const == 4

    def test_evaluate(self):
        poly = var("x1") ** 2 + 3 * var("p2") - 1
        assert poly.evaluate(np.array([2.0, 0.0, 0.0, 1.0])) == pytest.approx(6.0)

    def test_layout_mismatch(self):
        other = PolyObservable.variable(PhaseLayout(1), "x1")
        with pytest.raises(LayoutMismatchError):
            var("x1") + other

    def test_linear_part_rejects_quadratic(self):
        with pytest.raises(ValueError):
            (var("x1") * var("p1")).linear_part()


class TestPoissonBracket:
    def test_canonical_pairs(self):
        assert poisson_bracket(var("x1"), var("p1")) == PolyObservable.constant(LAYOUT, 1)
        assert poisson_bracket(var("p2"), var("x2")) == PolyObservable.constant(LAYOUT, -1)
        assert poisson_bracket(var("x1"), var("p2")).is_zero()

    @settings(max_examples=200, deadline=None)
    @given(polynomials, polynomials)
    def test_antisymmetry(self, a, b):
        assert poisson_bracket(a, b) == -poisson_bracket(b, a)

    @settings(max_examples=200, deadline=None)
    @given(polynomials, polynomials, polynomials)
    def test_leibniz(self, a, b, c):
        lhs = poisson_bracket(a, b * c)
        rhs = poisson_bracket(a, b) * c + b * poisson_bracket(a, c)
        assert lhs == rhs

    @settings(max_examples=200, deadline=None)
    @given(polynomials, polynomials, polynomials)
    def test_jacobi(self, a, b, c):
        total = (
            poisson_bracket(a, poisson_bracket(b, c))
            + poisson_bracket(b, poisson_bracket(c, a))
            + poisson_bracket(c, poisson_bracket(a, b))
        )
        assert total.is_zero()


class TestPrimaryConstraints:
    def test_singular_hessian(self):
        (phi,) = derive_primary_constraints([[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(phi.coeffs, [0, 0, 0, 1])
        assert phi.const == 0

    def test_constant_velocity_term(self):
        (phi,) = derive_primary_constraints([[1.0, 0.0], [0.0, 0.0]], [0.0, 2.0])
        assert phi.const == pytest.approx(-2.0)

    def test_fully_singular_single_dof(self):
        (phi,) = derive_primary_constraints([[0.0]], [[3.0]])
        np.testing.assert_allclose(phi.coeffs, [-3.0, 1.0])

    def test_regular_hessian(self):
        assert derive_primary_constraints(np.eye(2)) == []


class TestConsistencyChain:
    def test_random_oscillator_chains(self, rng):
        """A cadeia reproduz a direção de {φ₁, H} e o módulo de C₁₂."""
        checked = 0
        while checked < 20:
            alpha, beta, gamma, delta = rng.uniform(-2, 2, size=4)
            k1, k2 = rng.uniform(0.5, 3.0, size=2)
            kprime = rng.uniform(-0.9, 0.9) * np.sqrt(k1 * k2)
            eta_form = alpha ** 2 + gamma ** 2 + k1 * beta ** 2 + k2 * delta ** 2 - 2 * kprime * beta * delta
            if abs(eta_form) < 1e-2:
                continue
            h_c = oscillator_hamiltonian(k1, k2, kprime)
            phi1 = AffineConstraint([alpha, beta, gamma, delta])
            cs = consistency_chain(h_c, [phi1])

            chi1, _ = poisson_bracket(phi1.to_poly(LAYOUT), h_c).linear_part()
            (secondary,) = cs.secondaries
            cosine = secondary.coeffs @ chi1 / (np.linalg.norm(secondary.coeffs) * np.linalg.norm(chi1))
            assert abs(abs(cosine) - 1) < 1e-12
            assert abs(abs(cs.c_matrix[0, 1]) - abs(eta_form)) < 1e-12 * max(1.0, abs(eta_form))
            assert cs.second_class_idx == (0, 1)

            # λ anula φ̇_n = {φ_n, H} + C_n1 λ em pontos da superfície
            lam = cs.multipliers[0]
            assert lam is not None
            tol = 1e-10 * max(1.0, lam.max_abs_coefficient())
            rows = np.array([phi.coeffs for phi in cs.constraints])
            _, _, vh = np.linalg.svd(rows)
            for z in (vh[-1], vh[-2], vh[-1] - 0.3 * vh[-2]):
                for n, phi in enumerate(cs.constraints):
                    chi = poisson_bracket(phi.to_poly(LAYOUT), h_c)
                    assert abs(chi.evaluate(z) + cs.c_matrix[n, 0] * lam.evaluate(z)) < tol
            checked += 1

    def test_free_pair_secondary(self):
        """H = ½p₁² + ½p₂² com φ = x₂: secundário p₂ e λ = 0."""
        h_c = (var("p1") ** 2 + var("p2") ** 2) * Fraction(1, 2)
        cs = consistency_chain(h_c, [AffineConstraint([0.0, 0.0, 1.0, 0.0])])
        (secondary,) = cs.secondaries
        np.testing.assert_allclose(secondary.coeffs, [0, 0, 0, 1])
        assert secondary.const == 0
        assert cs.multipliers[0].is_zero()
        np.testing.assert_allclose(cs.d_matrix, [[0, -1], [1, 0]])

    def test_model_secondary_and_bracket_sign(self):
        """Para o modelo, o secundário é −φ₂ e {φ₁, φ₂} = −η."""
        k1, k2, kprime, alpha = 1.0, 100.0, 0.6, 0.5
        h_c, cs = oscillator_constraints(alpha, 1.0, k1, k2, kprime)
        k_eff = kprime ** 2 / k2 - k1
        eta = alpha ** 2 - k_eff
        phi2 = AffineConstraint([-k_eff, -alpha, 0.0, 0.0])
        bracket = poisson_bracket(cs.primaries[0].to_poly(LAYOUT), phi2.to_poly(LAYOUT))
        assert bracket.constant_term() == pytest.approx(-eta, abs=1e-12)
        np.testing.assert_allclose(cs.secondaries[0].coeffs, -phi2.coeffs, atol=1e-12)

    def test_inconsistent_dynamics(self):
        layout = PhaseLayout(1)
        h_c = PolyObservable.variable(layout, "p1")
        with pytest.raises(InconsistentDynamicsError):
            consistency_chain(h_c, [AffineConstraint([1.0, 0.0])])

    def test_first_class_constraint(self):
        h_c = var("p1") ** 2 * 0.5
        cs = consistency_chain(h_c, [AffineConstraint([0.0, 0.0, 0.0, 1.0])])
        assert cs.first_class_idx == (0,)
        assert cs.multipliers == (None,)
        with pytest.raises(FirstClassConstraintError):
            dirac_bracket(var("x1"), h_c, cs)

    def test_first_class_combination(self):
        """x₂ e x₁ + x₂ com H = ½p₂²: a combinação −x₁ é de primeira classe."""
        h_c = var("p2") ** 2 * Fraction(1, 2)
        primaries = [AffineConstraint([0.0, 0.0, 1.0, 0.0]), AffineConstraint([1.0, 0.0, 1.0, 0.0])]
        cs = consistency_chain(h_c, primaries)
        assert len(cs.secondaries) == 1
        assert len(cs.rebased) == 3
        assert len(cs.first_class_idx) == 1
        assert cs.second_class_idx == (0, 1)

        (gauge,) = cs.first_class_constraints()
        direction = gauge.coeffs / np.linalg.norm(gauge.coeffs)
        np.testing.assert_allclose(np.abs(direction), [1, 0, 0, 0], atol=1e-12)

        # os índices de primeira classe geram o espaço nulo de C
        assert np.linalg.matrix_rank(cs.c_matrix) == len(cs.second_class_idx)
        np.testing.assert_allclose(cs.c_matrix[list(cs.first_class_idx)], 0.0)
        assert cs.d_matrix.shape == (2, 2)
        assert cs.to_dict()["rebased"] is not None
        with pytest.raises(FirstClassConstraintError):
            dirac_bracket(var("x1"), var("p2"), cs)

    def test_classification_without_chain(self):
        constraints = (
            AffineConstraint([0.0, 0.0, 1.0, 0.0]),
            AffineConstraint([1.0, 0.0, 1.0, 0.0]),
            AffineConstraint([0.0, 0.0, 0.0, 1.0]),
        )
        cs = classify_constraints(LAYOUT, constraints)
        assert len(cs.first_class_idx) == 1
        assert cs.residual(np.array([0.0, 3.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
        assert cs.residual(np.array([1.0, 0.0, 0.0, 0.0])) > 0.5

    def test_isolated_first_class_row_keeps_constraints(self):
        h_c = var("p1") ** 2 * 0.5
        cs = consistency_chain(h_c, [AffineConstraint([0.0, 0.0, 0.0, 1.0])])
        assert cs.rebased == ()
        assert cs.constraints == cs.primaries + cs.secondaries

    def test_no_primaries(self):
        cs = consistency_chain(oscillator_hamiltonian(1.0, 2.0, 0.1), [])
        assert cs.constraints == ()
        assert cs.d_matrix is None

    def test_auxiliary_coordinate(self):
        """L = ½ẋ₁² − ½x₂²: p₂ ≈ 0 gera x₂ ≈ 0, ambos de segunda classe."""
        h_c = PolyObservable.from_quadratic(LAYOUT, np.diag([0.0, 1.0, 1.0, 0.0]))
        primaries = derive_primary_constraints([[1.0, 0.0], [0.0, 0.0]])
        cs = consistency_chain(h_c, primaries)
        (secondary,) = cs.secondaries
        np.testing.assert_allclose(secondary.coeffs, [0, 0, -1, 0], atol=1e-15)
        assert cs.second_class_idx == (0, 1)


class TestDiracBracket:
    @settings(max_examples=50, deadline=None)
    @given(polynomials)
    def test_constraints_are_central(self, r):
        h_c, cs = oscillator_constraints(1.0, 2.0, 2.0, 5.0, 1.0)
        for phi in cs.constraints:
            assert dirac_bracket(phi.to_poly(LAYOUT), r, cs).is_zero()

    def test_reduction_removes_second_pair(self):
        h_c = oscillator_hamiltonian(1.0, 2.0, 0.5)
        cs = classify_constraints(
            LAYOUT, (AffineConstraint([0.0, 0.0, 1.0, 0.0]),), (AffineConstraint([0.0, 0.0, 0.0, 1.0]),)
        )
        assert dirac_bracket(var("x1"), var("p1"), cs) == PolyObservable.constant(LAYOUT, 1)
        assert dirac_bracket(var("x2"), var("p2"), cs).is_zero()
        assert dirac_bracket(var("x2"), h_c, cs).is_zero()
        assert dirac_bracket(var("x1"), h_c, cs).allclose(var("p1"), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(polynomials, polynomials)
    def test_antisymmetry(self, a, b):
        h_c, cs = oscillator_constraints(0.5, 1.0, 1.0, 100.0, 0.6)
        assert dirac_bracket(a, b, cs).allclose(-dirac_bracket(b, a, cs), atol=1e-9)

    def test_plain_bracket_without_constraints(self):
        cs = classify_constraints(LAYOUT, ())
        assert dirac_bracket(var("x1"), var("p1"), cs) == PolyObservable.constant(LAYOUT, 1)


class TestEvolveConstrained:
    def test_stays_on_surface(self):
        h_c, cs = oscillator_constraints(0.5, 1.0, 1.0, 100.0, 0.6)
        rows = np.array([phi.coeffs for phi in cs.constraints])
        _, _, vh = np.linalg.svd(rows)
        start = vh[-1] + vh[-2]
        result = evolve_constrained(start, h_c, cs, t_final=1.0, dt=0.01)
        assert result["steps"] == 100
        assert result["max_residual"] < 1e-8

    def test_rejects_point_off_surface(self):
        h_c, cs = oscillator_constraints(0.5, 1.0, 1.0, 100.0, 0.6)
        with pytest.raises(ConstraintViolationError):
            evolve_constrained(np.array([1.0, 1.0, 0.0, 0.0]), h_c, cs, 1.0, 0.01)

    def test_unconstrained_energy_conservation(self):
        h_c = oscillator_hamiltonian(1.0, 2.0, 0.3)
        cs = classify_constraints(LAYOUT, ())
        start = np.array([1.0, 0.0, -0.5, 0.2])
        result = evolve_constrained(start, h_c, cs, t_final=2.0, dt=0.001)
        energies = [h_c.evaluate(z) for z in result["states"]]
        assert max(energies) - min(energies) < 1e-9


    def test_free_particle_drift(self):
        layout = PhaseLayout(1)
        h_c = PolyObservable.variable(layout, "p1") ** 2 * Fraction(1, 2)
        cs = classify_constraints(layout, ())
        result = evolve_constrained(np.array([0.3, -1.2]), h_c, cs, t_final=2.0, dt=0.01)
        np.testing.assert_allclose(result["states"][:, 0], 0.3 - 1.2 * result["times"], atol=1e-12)
        np.testing.assert_allclose(result["states"][:, 1], -1.2, atol=1e-12)

    def test_reduced_oscillator(self):
        """Com x₁ ≈ 0 e p₁ ≈ 0, o par (x₂, p₂) oscila com ω = 2."""
        h_c = (var("p1") ** 2 + var("p2") ** 2) * Fraction(1, 2) + var("x2") ** 2 * 2
        cs = classify_constraints(
            LAYOUT, (AffineConstraint([1.0, 0.0, 0.0, 0.0]),), (AffineConstraint([0.0, 1.0, 0.0, 0.0]),)
        )
        result = evolve_constrained(np.array([0.0, 0.0, 1.0, 0.5]), h_c, cs, t_final=1.0, dt=0.001)
        t = result["times"]
        np.testing.assert_allclose(result["states"][:, 2], np.cos(2 * t) + 0.25 * np.sin(2 * t), atol=1e-9)
        np.testing.assert_allclose(result["states"][:, 3], -2 * np.sin(2 * t) + 0.5 * np.cos(2 * t), atol=1e-9)
        np.testing.assert_allclose(result["states"][:, :2], 0.0, atol=1e-15)


class TestBlockDiagonalize:
    def test_random_antisymmetric(self, rng):
        a = rng.normal(size=(4, 4))
        d = a - a.T
        bd = block_diagonalize(d)
        np.testing.assert_allclose(bd.reconstruct(), d, atol=1e-10)
        np.testing.assert_allclose(bd.o_matrix.T @ bd.o_matrix, np.eye(4), atol=1e-12)
        assert len(bd.blocks) == 2

    def test_odd_dimension(self, rng):
        a = rng.normal(size=(3, 3))
        bd = block_diagonalize(a - a.T)
        assert len(bd.blocks) == 1
        np.testing.assert_allclose(bd.reconstruct(), a - a.T, atol=1e-10)

    def test_single_pair(self):
        eta = 0.35
        d = np.array([[0.0, -1 / eta], [1 / eta, 0.0]])
        bd = block_diagonalize(d)
        (b,) = bd.blocks
        assert abs(b) == pytest.approx(1 / eta, rel=1e-12)
        np.testing.assert_allclose(bd.reconstruct(), d, atol=1e-12)

    def test_zero_matrix(self):
        bd = block_diagonalize(np.zeros((2, 2)))
        assert bd.blocks == (0.0,)
        np.testing.assert_allclose(bd.o_matrix.T @ bd.o_matrix, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(bd.reconstruct(), 0.0)

    def test_rejects_symmetric(self):
        with pytest.raises(ValueError):
            block_diagonalize(np.eye(2))

    def test_rotated_form_matches(self):
        h_c, cs = oscillator_constraints(0.5, 1.0, 1.0, 100.0, 0.6)
        form = constraint_quadratic_form(cs, h_c)
        rotated = rotate_constraints(cs, h_c, block_diagonalize(cs.d_matrix))
        assert form["total"].allclose(rotated["form"], atol=1e-10)
