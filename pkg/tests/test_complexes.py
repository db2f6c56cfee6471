"""Chain complex, Hodge, torsion-isomorphism and zeta tests."""

import numpy as np
import pytest

from detline._linalg import operator_norm, random_complex
from detline.algebra import FiniteGroupTable, FiniteVonNeumannAlgebra, build_group_algebra
from detline.complexes import (
    HilbertianChainComplex,
    determinant_class_check,
    hodge,
    torsion_iso_via_exact_sequences,
    torsion_iso_via_laplacians,
    validate_complex,
    zeta_suite,
)
from detline.determinant import fk_det
from detline.errors import IllConditionedKernel, ValidationError
from detline.modules import (
    CommutantOperator,
    HilbertianModule,
    ModuleMorphism,
    direct_sum,
    standard_module,
    von_neumann_dimension,
)

SCALAR = FiniteVonNeumannAlgebra(((1, 1.0),))
Z2 = build_group_algebra(FiniteGroupTable.cyclic(2)).algebra
Z3 = build_group_algebra(FiniteGroupTable.cyclic(3)).algebra
S3 = build_group_algebra(FiniteGroupTable.symmetric(3)).algebra
ALGEBRAS = {"C": SCALAR, "C[Z/2]": Z2, "C[Z/3]": Z3, "C[S3]": S3}


def _unit_frame(rng, m):
    if m == 0:
        return np.zeros((0, 0), dtype=complex)
    q, _ = np.linalg.qr(random_complex(rng, (m, m)))
    return q


def random_gram_matrix(rng, module, floor=0.3):
    blocks = []
    for m in module.multiplicities:
        r = random_complex(rng, (m, m))
        blocks.append(r.conj().T @ r + floor * np.eye(m))
    return CommutantOperator(module, blocks).to_matrix()


def make_complex(rng, alg, mults, convention="chain", grams=True):
    """Random complex with exactly composing maps.

    Images and coimages are laid out in disjoint columns of one unitary
    frame per degree and block, so consecutive maps compose to exact zero
    and every rank is explicit.
    """
    modules = [HilbertianModule(alg, m) for m in mults]
    nmaps = len(mults) - 1
    nblocks = len(alg.blocks)
    frames = [[_unit_frame(rng, m) for m in mod.multiplicities] for mod in modules]
    ranks = [[0] * nblocks for _ in range(nmaps + 1)]
    maps = []
    if convention == "chain":
        blocks_by_map = [None] * nmaps
        for j in range(nmaps - 1, -1, -1):
            blks = []
            for k in range(nblocks):
                src_m, tgt_m = mults[j + 1][k], mults[j][k]
                used = ranks[j + 1][k]
                r = int(rng.integers(0, min(src_m - used, tgt_m) + 1))
                ranks[j][k] = r
                sv = 0.5 + 1.5 * rng.random(r)
                left = frames[j][k][:, :r]
                right = frames[j + 1][k][:, used:used + r]
                blks.append((left * sv) @ right.conj().T)
            blocks_by_map[j] = blks
        maps = [
            ModuleMorphism(modules[j + 1], modules[j], blocks_by_map[j])
            for j in range(nmaps)
        ]
    else:
        for j in range(nmaps):
            blks = []
            for k in range(nblocks):
                src_m, tgt_m = mults[j][k], mults[j + 1][k]
                used = ranks[j - 1][k] if j else 0
                r = int(rng.integers(0, min(src_m - used, tgt_m) + 1))
                ranks[j][k] = r
                sv = 0.5 + 1.5 * rng.random(r)
                left = frames[j + 1][k][:, :r]
                right = frames[j][k][:, used:used + r]
                blks.append((left * sv) @ right.conj().T)
            maps.append(ModuleMorphism(modules[j], modules[j + 1], blks))
    gram_list = [random_gram_matrix(rng, m) for m in modules] if grams else None
    return HilbertianChainComplex(modules, maps, convention=convention, grams=gram_list)


def two_term_acyclic(alg, f_blocks, convention="chain", grams=None):
    mod = standard_module(alg)
    f = CommutantOperator(mod, f_blocks)
    return HilbertianChainComplex([mod, mod], [f], convention=convention, grams=grams)


def test_rejects_nonzero_composition():
    mod = HilbertianModule(SCALAR, [1])
    one = CommutantOperator.identity(mod)
    with pytest.raises(ValidationError):
        HilbertianChainComplex([mod, mod, mod], [one, one])
    unchecked = HilbertianChainComplex([mod, mod, mod], [one, one], validate=False)
    report = validate_complex(unchecked)
    assert not report.valid
    assert report.boundary_residual > 0.1


def test_validate_clean_complexes():
    mod = standard_module(S3)
    zero = CommutantOperator.zero(mod)
    c = HilbertianChainComplex([mod, mod], [zero])
    report = validate_complex(c)
    assert report.valid
    assert report.boundary_residual == 0.0
    rng = np.random.default_rng(1)
    c2 = make_complex(rng, S3, [(1, 1, 2), (2, 1, 1), (1, 1, 1)])
    assert validate_complex(c2).valid


def test_convention_flag_checked():
    mod = standard_module(Z2)
    zero = CommutantOperator.zero(mod)
    with pytest.raises(ValidationError):
        HilbertianChainComplex([mod, mod], [zero], convention="spooky")


def test_hodge_zero_differentials():
    mod = standard_module(S3)
    zero = CommutantOperator.zero(mod)
    c = HilbertianChainComplex([mod, mod], [zero])
    data = hodge(c)
    for i in (0, 1):
        assert abs(data.betti[i] - von_neumann_dimension(mod)) < 1e-12
        assert data.laplacians[i].norm() < 1e-14
        assert data.positive_densities[i].values.size == 0


def test_hodge_two_term_identity_map():
    mod = standard_module(Z3)
    c = HilbertianChainComplex([mod, mod], [CommutantOperator.identity(mod)])
    data = hodge(c)
    for i in (0, 1):
        assert data.betti[i] == 0.0
        resid = (data.laplacians[i] - CommutantOperator.identity(mod)).norm()
        assert resid < 1e-12


def test_hodge_circle_with_degree_two_map():
    # 1x1 chain over C with the map (-2): both Laplacians are 4, no homology
    c = two_term_acyclic(SCALAR, [np.array([[-2.0]])])
    data = hodge(c)
    for i in (0, 1):
        assert data.betti[i] == 0.0
        assert abs(data.laplacians[i].blocks[0][0, 0] - 4.0) < 1e-14


def test_hodge_consistency_random():
    rng = np.random.default_rng(5)
    for name, alg in ALGEBRAS.items():
        c = make_complex(rng, alg, [tuple(2 for _ in alg.blocks)] * 3)
        data = hodge(c)
        for i in c.degrees:
            mod = c.modules[i]
            p = data.harmonic_projectors[i]
            assert ((p @ p) - p).norm() < 1e-10
            assert (data.laplacians[i] @ p).norm() < 1e-10 * max(
                1.0, data.laplacians[i].norm()
            )
            out = c.outgoing(i)
            inc = c.incoming(i)
            rank_out = sum(
                w * np.linalg.matrix_rank(b, tol=1e-10)
                for (_, w), b in zip(alg.blocks, out.blocks)
            ) if out is not None else 0.0
            rank_in = sum(
                w * np.linalg.matrix_rank(b, tol=1e-10)
                for (_, w), b in zip(alg.blocks, inc.blocks)
            ) if inc is not None else 0.0
            total = data.betti[i] + rank_out + rank_in
            assert abs(total - von_neumann_dimension(mod)) < 1e-9


def test_ill_conditioned_kernel_refused():
    # squared map has eigenvalues {1, 8.1e-11, 4e-10}: the middle one falls
    # in the kernel cluster but sits within a factor 10 of the smallest
    # positive one
    mod = HilbertianModule(SCALAR, [3])
    f = CommutantOperator(mod, [np.diag([1.0, 0.9e-5, 2e-5])])
    c = HilbertianChainComplex([mod, mod], [f])
    with pytest.raises(IllConditionedKernel):
        hodge(c)


def test_determinant_class_finite_always_passes():
    rng = np.random.default_rng(7)
    c = make_complex(rng, Z2, [(2, 1), (1, 2), (2, 2)])
    report = determinant_class_check(c)
    assert report.passed
    for r in report.per_degree:
        assert r.status == "convergent"
        assert "smallest_positive" in r.diagnostics


def test_torsion_iso_zero_differentials_is_unit():
    mod = standard_module(S3)
    zero = CommutantOperator.zero(mod)
    c = HilbertianChainComplex([mod, mod, mod], [zero, zero])
    for route in (torsion_iso_via_laplacians, torsion_iso_via_exact_sequences):
        graded = route(c)
        assert abs(graded.coordinate - 1.0) < 1e-10
        for _, element in graded.entries:
            assert abs(element.coefficient - 1.0) < 1e-10


@pytest.mark.parametrize("convention,power", [("chain", -1.0), ("cochain", 1.0)])
def test_torsion_iso_acyclic_two_term(convention, power):
    rng = np.random.default_rng(11)
    mod = standard_module(S3)
    blocks = [
        random_complex(rng, (m, m)) + 2.0 * np.eye(m) for m in mod.multiplicities
    ]
    c = two_term_acyclic(S3, blocks, convention=convention)
    det = fk_det(mod, CommutantOperator(mod, blocks)).value
    expect = det**power
    for route in (torsion_iso_via_laplacians, torsion_iso_via_exact_sequences):
        graded = route(c)
        assert abs(graded.coordinate - expect) < 1e-8 * expect


@pytest.mark.parametrize("name", sorted(ALGEBRAS))
@pytest.mark.parametrize("convention", ["chain", "cochain"])
def test_route_equivalence_random(name, convention):
    rng = np.random.default_rng(13)
    alg = ALGEBRAS[name]
    shapes = [
        [tuple(2 for _ in alg.blocks)] * 3,
        [tuple(int(rng.integers(0, 3)) for _ in alg.blocks) for _ in range(4)],
        [tuple(3 for _ in alg.blocks), tuple(2 for _ in alg.blocks)],
    ]
    for mults in shapes:
        c = make_complex(rng, alg, mults, convention=convention)
        data = hodge(c)
        a = torsion_iso_via_laplacians(c, data)
        b = torsion_iso_via_exact_sequences(c, data)
        assert abs(a.coordinate - b.coordinate) < 1e-8 * max(a.coordinate, b.coordinate)


def test_direct_sum_multiplies_coordinates():
    rng = np.random.default_rng(17)
    alg = Z3
    c1 = make_complex(rng, alg, [(2, 1, 1), (1, 2, 1), (1, 1, 2)], grams=False)
    c2 = make_complex(rng, alg, [(1, 1, 1), (2, 1, 2), (1, 1, 1)], grams=False)
    summed_modules = [direct_sum(m1, m2) for m1, m2 in zip(c1.modules, c2.modules)]
    summed_maps = []
    for f1, f2, src, tgt in zip(
        c1.maps, c2.maps, summed_modules[1:], summed_modules[:-1]
    ):
        blocks = []
        for b1, b2 in zip(f1.blocks, f2.blocks):
            blocks.append(
                np.block(
                    [
                        [b1, np.zeros((b1.shape[0], b2.shape[1]))],
                        [np.zeros((b2.shape[0], b1.shape[1])), b2],
                    ]
                )
            )
        summed_maps.append(ModuleMorphism(src, tgt, blocks))
    total = HilbertianChainComplex(summed_modules, summed_maps)
    coord = torsion_iso_via_laplacians(total).coordinate
    expect = (
        torsion_iso_via_laplacians(c1).coordinate
        * torsion_iso_via_laplacians(c2).coordinate
    )
    assert abs(coord - expect) < 1e-9 * expect
    cross = torsion_iso_via_exact_sequences(total).coordinate
    assert abs(cross - coord) < 1e-8 * coord


def test_homotopy_stability_of_verdict_and_det_factor():
    rng = np.random.default_rng(19)
    alg = Z2
    c = make_complex(rng, alg, [(2, 1), (1, 2), (1, 1)], grams=False)
    assert determinant_class_check(c).passed
    coord = torsion_iso_via_laplacians(c).coordinate

    # direct-sum an acyclic two-term piece in degrees 0 and 1
    mod = standard_module(alg)
    blocks = [random_complex(rng, (m, m)) + 2.0 * np.eye(m) for m in mod.multiplicities]
    det = fk_det(mod, CommutantOperator(mod, blocks)).value
    bigger_modules = [
        direct_sum(c.modules[0], mod),
        direct_sum(c.modules[1], mod),
        c.modules[2],
    ]
    f0 = c.maps[0]
    blocks0 = [
        np.block(
            [
                [b1, np.zeros((b1.shape[0], m))],
                [np.zeros((m, b1.shape[1])), b2],
            ]
        )
        for b1, b2, m in zip(f0.blocks, blocks, mod.multiplicities)
    ]
    f1 = c.maps[1]
    blocks1 = [
        np.vstack([b, np.zeros((m, b.shape[1]))])
        for b, m in zip(f1.blocks, mod.multiplicities)
    ]
    bigger_maps = [
        ModuleMorphism(bigger_modules[1], bigger_modules[0], blocks0),
        ModuleMorphism(bigger_modules[2], bigger_modules[1], blocks1),
    ]
    bigger = HilbertianChainComplex(bigger_modules, bigger_maps)
    assert determinant_class_check(bigger).passed
    new_coord = torsion_iso_via_laplacians(bigger).coordinate
    assert abs(new_coord - coord / det) < 1e-8 * max(new_coord, coord / det)


def test_metric_covariance_acyclic():
    rng = np.random.default_rng(23)
    alg = Z3
    mod = standard_module(alg)
    blocks = [random_complex(rng, (m, m)) + 2.0 * np.eye(m) for m in mod.multiplicities]
    lam = 1.9
    for degree in (0, 1):
        base = two_term_acyclic(alg, blocks)
        coord = torsion_iso_via_laplacians(base).coordinate
        grams = [None, None]
        grams[degree] = lam**2 * np.eye(mod.carrier_dim)
        scaled = two_term_acyclic(alg, blocks, grams=grams)
        new = torsion_iso_via_laplacians(scaled).coordinate
        factor = lam ** (-((-1) ** degree) * von_neumann_dimension(mod))
        assert abs(new - coord * factor) < 1e-9 * max(new, coord * factor)
        cross = torsion_iso_via_exact_sequences(scaled).coordinate
        assert abs(cross - new) < 1e-8 * new


def test_unitary_naturality():
    # conjugating every degree by a commutant unitary and transporting the
    # grams leaves both route coordinates unchanged
    rng = np.random.default_rng(29)
    alg = S3
    mults = [(2, 1, 1), (1, 2, 1), (1, 1, 2)]
    c = make_complex(rng, alg, mults)
    unitaries = []
    for m in c.modules:
        blocks = [_unit_frame(rng, mm) for mm in m.multiplicities]
        unitaries.append(CommutantOperator(m, blocks))
    new_maps = []
    for j, f in enumerate(c.maps):
        # chain: maps[j]: C_{j+1} -> C_j
        new_maps.append(unitaries[j] @ f @ unitaries[j + 1].inverse())
    new_grams = []
    for m, u in zip(c.modules, unitaries):
        ui = u.inverse().to_matrix()
        new_grams.append(ui.conj().T @ m.reference_gram.matrix @ ui)
    plain_modules = [HilbertianModule(alg, m.multiplicities) for m in c.modules]
    conj = HilbertianChainComplex(
        plain_modules,
        [
            ModuleMorphism(plain_modules[j + 1], plain_modules[j], f.blocks)
            for j, f in enumerate(new_maps)
        ],
        grams=new_grams,
    )
    for route in (torsion_iso_via_laplacians, torsion_iso_via_exact_sequences):
        a = route(c).coordinate
        b = route(conj).coordinate
        assert abs(a - b) < 1e-8 * max(a, b)


def test_zeta_two_term_doubling():
    # one positive eigenvalue 4 in each degree; only degree 1 contributes:
    # zeta'(0,0) = (-1)^1 * 1 * (-log 4) = log 4, so exp(zeta'/2) = 2,
    # matching the cochain-exponent product 4^(1/2)
    c = two_term_acyclic(SCALAR, [np.array([[2.0]])], convention="cochain")
    report = zeta_suite(c)
    assert abs(report.zeta_prime[0] + np.log(4.0)) < 1e-12
    assert abs(report.zeta_prime[1] + np.log(4.0)) < 1e-12
    assert abs(report.combined_prime - np.log(4.0)) < 1e-12
    assert abs(report.normalization - 2.0) < 1e-12
    assert abs(report.laplacian_product - 2.0) < 1e-12


def test_zeta_zero_complex():
    mod = standard_module(Z2)
    zero = CommutantOperator.zero(mod)
    c = HilbertianChainComplex([mod, mod], [zero])
    report = zeta_suite(c)
    assert report.combined_prime == 0.0
    assert report.normalization == 1.0
    assert report.laplacian_product == 1.0


def test_zeta_identity_on_random_complexes():
    rng = np.random.default_rng(31)
    for name, alg in ALGEBRAS.items():
        c = make_complex(rng, alg, [tuple(2 for _ in alg.blocks)] * 3, convention="cochain")
        report = zeta_suite(c)
        assert (
            abs(report.normalization - report.laplacian_product)
            < 1e-9 * report.laplacian_product
        )


def test_zeta_closed_form_values():
    c = two_term_acyclic(SCALAR, [np.array([[2.0]])])
    report = zeta_suite(c)
    # zeta_1(s, lam) = (4 + lam)^(-s)
    assert abs(report.zeta_value(1, 2.0, 1.0) - 5.0**-2.0) < 1e-14
    assert abs(report.theta_value(1, 0.25) - np.exp(-1.0)) < 1e-14
    assert abs(report.zeta_prime_value(1, 0.0) + np.log(4.0)) < 1e-14


def test_zeta_mellin_cross_check():
    rng = np.random.default_rng(37)
    c = make_complex(rng, Z3, [(2, 2, 2), (2, 2, 2), (2, 2, 2)])
    report = zeta_suite(c)
    for degree in c.degrees:
        if report.densities[degree].values.size == 0:
            continue
        for s, lam in ((1.0, 0.3), (1.5, 0.0)):
            closed = report.zeta_value(degree, s, lam)
            quad = report.mellin_zeta(degree, s, lam)
            assert abs(quad - closed) < 1e-4 * max(1.0, abs(closed))


def test_grams_are_baked_into_modules():
    rng = np.random.default_rng(41)
    mod = standard_module(Z2)
    g = random_gram_matrix(rng, mod)
    c = HilbertianChainComplex(
        [mod, mod], [CommutantOperator.identity(mod)], grams=[g, None]
    )
    assert operator_norm(c.modules[0].reference_gram.matrix - g) < 1e-12
    assert operator_norm(c.modules[1].reference_gram.matrix - np.eye(mod.carrier_dim)) < 1e-12