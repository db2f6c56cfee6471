"""Abelian backend tests.

Ground truth for scalar symbols is classical: the log-determinant of
|p(t)| over the circle is the sum of log|a| over the roots a of p outside
the unit circle plus log of the leading coefficient, so t - 2 has
determinant 2 and t - 1 has determinant 1.  The quadrature never sees
those formulas.
"""

import numpy as np
import pytest

from detline.determinant import SpectralDensity
from detline.errors import (
    AlgebraMismatch,
    BackendUnsupported,
    DivergentIntegral,
    IllConditionedKernel,
    IndeterminateConvergence,
    KernelDetected,
    NegativeSpectrum,
    NotDenselyExact,
    NotHermitianSymbol,
    ShapeMismatch,
    ValidationError,
)
from detline.symbols import (
    LaurentMatrix,
    TorusGrid,
    abelian_dense_isomorphism_check,
    abelian_determinant_class_check,
    abelian_fk_det,
    abelian_fk_det_general,
    abelian_spectral_density,
    abelian_torsion,
    laurent_trace,
)


def scalar(coeffs, rank=1):
    return LaurentMatrix.from_scalar(coeffs, rank)


T_MINUS_1 = scalar({1: 1.0, 0: -1.0})
T_MINUS_2 = scalar({1: 1.0, 0: -2.0})


def symbol_power(base, exponent):
    out = base
    for _ in range(exponent - 1):
        out = out @ base
    return out


def random_symbol(rng, size, degree=2, rank=1):
    terms = {}
    for _ in range(2 * degree + 1):
        if rank == 1:
            key = (int(rng.integers(-degree, degree + 1)),)
        else:
            key = tuple(int(k) for k in rng.integers(-degree, degree + 1, size=rank))
        terms[key] = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    return LaurentMatrix(rank, terms, shape=(size, size))


def random_positive_symbol(rng, size, degree=2, rank=1, shift=1.0):
    base = random_symbol(rng, size, degree, rank)
    return (base.adjoint() @ base) + shift * LaurentMatrix.identity(rank, size)


# ---------------------------------------------------------------------------
# LaurentMatrix arithmetic


def test_constructor_validation():
    with pytest.raises(BackendUnsupported):
        LaurentMatrix(3, {(0, 0, 0): [[1.0]]})
    with pytest.raises(ValidationError):
        LaurentMatrix(0, {})
    with pytest.raises(ValidationError):
        LaurentMatrix(1, {})  # no coefficients and no shape
    with pytest.raises(ShapeMismatch):
        LaurentMatrix(1, {(0, 0): [[1.0]]})  # exponent length 2 on rank 1
    with pytest.raises(ShapeMismatch):
        LaurentMatrix(1, {0: [[1.0]], 1: [[1.0, 0.0]]})
    with pytest.raises(ValidationError):
        LaurentMatrix(1, {0: [[1.0]], (0,): [[2.0]]})  # same exponent twice


def test_zero_coefficients_are_dropped():
    f = LaurentMatrix(1, {0: [[1.0]], 5: [[0.0]]})
    assert list(f.coefficients) == [(0,)]
    z = LaurentMatrix.zero(1, (2, 2))
    assert z.coefficients == {} and z.shape == (2, 2)


def test_arithmetic_matches_pointwise_evaluation():
    rng = np.random.default_rng(3)
    nodes = TorusGrid(1, 16).nodes()
    for _ in range(5):
        f = random_symbol(rng, 2)
        g = random_symbol(rng, 2)
        fg = f @ g
        s = f + g
        adj = f.adjoint()
        for theta in nodes:
            fv, gv = f.evaluate(theta), g.evaluate(theta)
            assert np.allclose(fg.evaluate(theta), fv @ gv)
            assert np.allclose(s.evaluate(theta), fv + gv)
            assert np.allclose(adj.evaluate(theta), fv.conj().T)
            assert np.allclose((2.5 * f).evaluate(theta), 2.5 * fv)
            assert np.allclose((-f).evaluate(theta), -fv)


def test_arithmetic_matches_pointwise_on_the_two_torus():
    rng = np.random.default_rng(4)
    f = random_symbol(rng, 2, degree=1, rank=2)
    g = random_symbol(rng, 2, degree=1, rank=2)
    nodes = TorusGrid(2, 5).nodes()
    values_fg = (f @ g).evaluate_grid(nodes)
    values_f = f.evaluate_grid(nodes)
    values_g = g.evaluate_grid(nodes)
    assert np.allclose(values_fg, values_f @ values_g)
    assert np.allclose(
        f.adjoint().evaluate_grid(nodes), np.conj(np.swapaxes(values_f, -1, -2))
    )


def test_evaluate_grid_matches_single_points():
    f = random_symbol(np.random.default_rng(5), 3)
    nodes = TorusGrid(1, 8).nodes()
    stacked = f.evaluate_grid(nodes)
    for row, theta in zip(stacked, nodes):
        assert np.allclose(row, f.evaluate(theta))


def test_shape_and_rank_mismatches():
    f = scalar({0: 1.0})
    wide = LaurentMatrix(1, {0: [[1.0, 0.0]]})
    two_torus = scalar({(0, 0): 1.0}, rank=2)
    with pytest.raises(ShapeMismatch):
        f + wide
    with pytest.raises(ShapeMismatch):
        wide @ wide
    with pytest.raises(AlgebraMismatch):
        f @ two_torus
    with pytest.raises(ShapeMismatch):
        wide.size
    assert wide.adjoint().shape == (2, 1)


def test_hermitian_detection():
    assert scalar({1: 1.0, -1: 1.0}).is_hermitian()
    assert scalar({1: 2j, -1: -2j}).is_hermitian()
    assert not T_MINUS_1.is_hermitian()
    assert (T_MINUS_1.adjoint() @ T_MINUS_1).is_hermitian()
    with pytest.raises(NotHermitianSymbol):
        T_MINUS_1.require_hermitian()
    assert not LaurentMatrix(1, {0: [[1.0, 0.0]]}).is_hermitian()


def test_trace_examples():
    assert laurent_trace(LaurentMatrix.identity(1, 3)) == 3.0
    assert laurent_trace(LaurentMatrix.monomial(1)) == 0.0
    square = symbol_power(scalar({1: 1.0, -1: 1.0}), 2)
    assert laurent_trace(square) == pytest.approx(2.0)
    with pytest.raises(ShapeMismatch):
        laurent_trace(LaurentMatrix(1, {0: [[1.0, 0.0]]}))


def test_trace_matches_quadrature():
    rng = np.random.default_rng(11)
    nodes = TorusGrid(1, 512).nodes()
    for _ in range(10):
        f = random_symbol(rng, 2, degree=4)
        quad = np.mean(np.trace(f.evaluate_grid(nodes), axis1=-2, axis2=-1))
        assert abs(laurent_trace(f) - quad) < 1e-8


# ---------------------------------------------------------------------------
# grids


def test_grid_validation_and_refinement():
    with pytest.raises(ValidationError):
        TorusGrid(1, 1)
    with pytest.raises(BackendUnsupported):
        TorusGrid(3, 8)
    g = TorusGrid.default(1)
    assert g.resolution == 4096 and g.total == 4096
    assert TorusGrid.default(2).resolution == 64
    assert g.refine().resolution == 8192
    nodes = TorusGrid(1, 4).nodes()
    assert np.allclose(nodes[:, 0], [0.125, 0.375, 0.625, 0.875])
    assert TorusGrid(2, 4).nodes().shape == (16, 2)


# ---------------------------------------------------------------------------
# determinants


def test_jensen_determinant_of_t_minus_2():
    result = abelian_fk_det_general(T_MINUS_2)
    assert abs(result.value - 2.0) < 1e-9
    assert result.convergence.passed
    assert result.method == "polar"


def test_determinant_of_t_minus_1_converges_to_one():
    result = abelian_fk_det_general(T_MINUS_1)
    assert abs(result.value - 1.0) < 1e-9
    assert result.convergence.passed
    # the positive route through |t-1|^2 agrees and also passes
    herm = T_MINUS_1.adjoint() @ T_MINUS_1
    result = abelian_fk_det(herm)
    assert abs(result.value - 1.0) < 1e-9
    assert result.convergence.passed


def test_determinants_of_shifted_circles():
    # roots inside the unit circle contribute nothing, outside their modulus
    for a in (3.0, 0.5, -2.5, 0.25j):
        f = scalar({1: 1.0, 0: -a})
        expected = max(1.0, abs(a))
        assert abs(abelian_fk_det_general(f).value - expected) < 1e-6


def test_monomial_unimodularity():
    for exponent in (0, 1, 3, -5):
        result = abelian_fk_det_general(LaurentMatrix.monomial(exponent))
        assert abs(result.value - 1.0) < 1e-10
    result = abelian_fk_det_general(LaurentMatrix.monomial((2, -1)))
    assert abs(result.value - 1.0) < 1e-10


def test_two_torus_determinant_is_slicewise():
    # symbol depending on one angle only integrates to the circle answer
    f = scalar({(1, 0): 1.0, (0, 0): -2.0}, rank=2)
    assert abs(abelian_fk_det_general(f).value - 2.0) < 1e-9


def test_multiplicativity_for_commuting_positives():
    rng = np.random.default_rng(23)
    for _ in range(10):
        f = random_positive_symbol(rng, 1)
        g = random_positive_symbol(rng, 1)
        lhs = abelian_fk_det(f @ g).value
        rhs = abelian_fk_det(f).value * abelian_fk_det(g).value
        assert abs(lhs - rhs) / rhs < 1e-8


def test_determinant_scaling_matches_mass():
    rng = np.random.default_rng(29)
    f = random_positive_symbol(rng, 2)
    base = abelian_fk_det(f)
    scaled = abelian_fk_det(3.0 * f)
    # trace is unnormalized, so scaling by c multiplies by c^size
    assert abs(scaled.value / base.value - 9.0) < 1e-8


def test_refinement_stability():
    rng = np.random.default_rng(31)
    for _ in range(3):
        f = random_positive_symbol(rng, 2)
        base = abelian_fk_det(f).value
        fine = abelian_fk_det(f, TorusGrid(1, 8192)).value
        assert abs(fine - base) / base < 1e-8


def test_negative_spectrum_refused():
    f = LaurentMatrix.constant(np.diag([-1.0, 1.0]))
    with pytest.raises(NegativeSpectrum):
        abelian_fk_det(f)


def test_positive_route_requires_hermitian_symbol():
    with pytest.raises(NotHermitianSymbol):
        abelian_fk_det(T_MINUS_1)


# ---------------------------------------------------------------------------
# excision verdicts and refusals


def test_divergence_engineered_symbol_refused():
    f = LaurentMatrix.constant(np.diag([1.5e-3, 1.5e-4, 1.0]))
    with pytest.raises(DivergentIntegral):
        abelian_fk_det(f)
    report = abelian_determinant_class_check(f)
    assert report.refusal == "DivergentIntegral"
    assert report.value is None
    assert report.verdict.diagnostics["d1"] < -4.0
    assert report.verdict.diagnostics["d2"] < -6.0


def test_indeterminate_tail_refused():
    power = symbol_power(T_MINUS_1.adjoint() @ T_MINUS_1, 20)
    with pytest.raises(IndeterminateConvergence):
        abelian_fk_det(power)
    report = abelian_determinant_class_check(power)
    assert report.refusal == "IndeterminateConvergence"
    assert not report.passed


def test_kernel_bearing_symbol_refused():
    f = LaurentMatrix.constant(np.diag([0.0, 1.0]))
    with pytest.raises(KernelDetected):
        abelian_fk_det(f)
    # same kernel conjugated away from the diagonal
    u = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    g = LaurentMatrix.constant(u @ np.diag([0.0, 1.0]) @ u.T)
    with pytest.raises(KernelDetected):
        abelian_fk_det(g)


def test_class_check_passes_cleanly():
    report = abelian_determinant_class_check(T_MINUS_2.adjoint() @ T_MINUS_2)
    assert report.passed and report.refusal is None
    assert abs(report.value - 4.0) < 1e-9
    assert report.verdict.status == "convergent"


# ---------------------------------------------------------------------------
# spectral densities


def test_density_of_the_identity():
    d = abelian_spectral_density(LaurentMatrix.identity(1, 3))
    assert isinstance(d, SpectralDensity)
    assert d.kind == "sampled"
    assert d.total_mass == pytest.approx(3.0)
    assert np.allclose(d.values, 1.0)
    assert d.counting(0.5) == 0.0
    assert d.counting(1.0) == pytest.approx(3.0)


def test_density_support_of_shifted_circle():
    d = abelian_spectral_density(T_MINUS_2.adjoint() @ T_MINUS_2)
    # |e^(2 pi i theta) - 2|^2 sweeps [1, 9]
    assert 0.999 < d.values.min() < 1.01
    assert 8.99 < d.values.max() < 9.001
    assert d.counting(0.999) == 0.0
    assert d.counting(9.001) == pytest.approx(1.0)
    assert d.consistency < 1e-3


def test_density_square_root_edge():
    d = abelian_spectral_density(T_MINUS_1.adjoint() @ T_MINUS_1)
    # counting function of |t-1|^2 grows like sqrt(lambda)/pi at the edge
    for lam in (1e-2, 1e-3):
        ratio = d.counting(lam) / np.sqrt(lam)
        assert abs(ratio * np.pi - 1.0) < 0.05


def test_density_rejects_non_hermitian():
    with pytest.raises(NotHermitianSymbol):
        abelian_spectral_density(T_MINUS_1)


# ---------------------------------------------------------------------------
# dense isomorphism checks


def test_dense_isomorphism_accepts_t_minus_1():
    report = abelian_dense_isomorphism_check(T_MINUS_1)
    assert abs(report.determinant - 1.0) < 1e-9
    assert report.verdict.passed
    assert report.minimum_modulus > 0.0


def test_dense_isomorphism_rejects_vanishing_determinant():
    f = LaurentMatrix.constant(np.diag([0.0, 1.0]))
    with pytest.raises(NotDenselyExact):
        abelian_dense_isomorphism_check(f)


def test_dense_isomorphism_rejects_divergent_integral():
    f = LaurentMatrix.constant(np.diag([1.5e-3, 1.5e-4, 1.0]))
    with pytest.raises(NotDenselyExact):
        abelian_dense_isomorphism_check(f)


# ---------------------------------------------------------------------------
# torsion of symbol complexes


def test_two_term_torsion_is_inverse_determinant():
    report = abelian_torsion([T_MINUS_2])
    assert abs(report.coordinate - 0.5) < 1e-9
    assert report.betti == (0.0, 0.0)
    assert report.euler_characteristic == 0
    cochain = abelian_torsion([T_MINUS_2], convention="cochain")
    assert abs(cochain.coordinate - 2.0) < 1e-9


def test_circle_over_the_integers_has_trivial_torsion():
    report = abelian_torsion([T_MINUS_1])
    assert abs(report.coordinate - 1.0) < 1e-9
    assert report.betti == (0.0, 0.0)


def test_torus_over_its_deck_group():
    # cells of the square torus with both loops sent to coordinate shifts
    d2 = LaurentMatrix(
        2,
        {(0, 0): [[1.0], [-1.0]], (0, 1): [[-1.0], [0.0]], (1, 0): [[0.0], [1.0]]},
    )
    d1 = LaurentMatrix(
        2, {(1, 0): [[1.0, 0.0]], (0, 0): [[-1.0, -1.0]], (0, 1): [[0.0, 1.0]]}
    )
    report = abelian_torsion([d1, d2], TorusGrid(2, 64))
    assert report.betti == (0.0, 0.0, 0.0)
    assert report.euler_characteristic == 0
    assert abs(report.log_coordinate) < 1e-9


def test_zero_map_complex_has_full_homology():
    report = abelian_torsion([LaurentMatrix.zero(1, (1, 1))])
    assert report.betti == (1.0, 1.0)
    assert report.coordinate == pytest.approx(1.0)


def test_torsion_validates_composites_and_shapes():
    with pytest.raises(ValidationError):
        abelian_torsion([T_MINUS_1, LaurentMatrix.identity(1, 1)])
    wide = LaurentMatrix(1, {0: [[1.0, 0.0]]})
    with pytest.raises(ShapeMismatch):
        abelian_torsion([wide, wide])
    with pytest.raises(ValidationError):
        abelian_torsion([])
    with pytest.raises(ValidationError):
        abelian_torsion([T_MINUS_1], convention="sideways")


def test_variable_kernel_rank_is_rejected():
    # |t-1|^8 dips below the kernel cut near theta = 0 but not elsewhere
    with pytest.raises(IllConditionedKernel):
        abelian_torsion([symbol_power(T_MINUS_1, 4)])


def test_torsion_agrees_with_general_determinant():
    rng = np.random.default_rng(41)
    for _ in range(3):
        f = random_symbol(rng, 2, degree=1) + 4.0 * LaurentMatrix.identity(1, 2)
        report = abelian_torsion([f])
        det = abelian_fk_det_general(f)
        assert abs(report.log_coordinate + det.log_value) < 1e-8
