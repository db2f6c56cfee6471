import numpy as np
import pytest

from detline.algebra import FiniteGroupTable, FiniteVonNeumannAlgebra, build_group_algebra
from detline.errors import (
    AlgebraMismatch,
    NotAdmissible,
    NotInCommutant,
    NotIso,
    ShapeMismatch,
)
from detline.modules import (
    CommutantOperator,
    HilbertianModule,
    ModuleMorphism,
    canonical_trace,
    check_admissible,
    commutant_basis,
    direct_sum,
    direct_sum_many,
    free_module,
    image_submodule,
    inclusion_morphisms,
    kernel_submodule,
    module_from_group_action,
    regular_module,
    right_action_operator,
    standard_module,
    submodule_from_blocks,
    von_neumann_dimension,
    zero_module,
)

ALG = FiniteVonNeumannAlgebra(((1, 0.5), (2, 0.25)))


def random_commutant_op(module, rng):
    blocks = [
        rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        for m in module.multiplicities
    ]
    return CommutantOperator(module, blocks)


def test_carrier_dim_and_dimension():
    m = HilbertianModule(ALG, (3, 2))
    assert m.carrier_dim == 1 * 3 + 2 * 2
    assert von_neumann_dimension(m) == pytest.approx(0.5 * 3 + 0.25 * 2)
    assert von_neumann_dimension(standard_module(ALG)) == pytest.approx(ALG.trace_of_identity)
    assert von_neumann_dimension(zero_module(ALG)) == 0.0


def test_action_is_star_homomorphism():
    m = HilbertianModule(ALG, (2, 3))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = ALG.random_element(rng)
        y = ALG.random_element(rng)
        assert np.allclose(m.action(x) @ m.action(y), m.action(x * y), atol=1e-12)
        assert np.allclose(m.action(x.adjoint()), m.action(x).conj().T, atol=1e-12)


def test_commutant_operator_round_trip_and_commutation():
    m = HilbertianModule(ALG, (2, 3))
    rng = np.random.default_rng(1)
    f = random_commutant_op(m, rng)
    mat = f.to_matrix()
    # really commutes with the action
    for _ in range(4):
        x = ALG.random_element(rng)
        assert np.allclose(mat @ m.action(x), m.action(x) @ mat, atol=1e-10)
    back = CommutantOperator.from_matrix(m, mat)
    for a, b in zip(back.blocks, f.blocks):
        assert np.allclose(a, b, atol=1e-12)


def test_non_commutant_matrix_rejected():
    m = HilbertianModule(ALG, (2, 2))
    bad = np.zeros((m.carrier_dim, m.carrier_dim), dtype=complex)
    bad[0, -1] = 1.0  # couples inequivalent blocks
    with pytest.raises(NotInCommutant):
        CommutantOperator.from_matrix(m, bad)


def test_commutant_basis_size():
    m = HilbertianModule(ALG, (2, 3))
    basis = commutant_basis(m)
    assert len(basis) == 2 * 2 + 3 * 3
    # orthogonality under the canonical trace pairing <f, g> = Tr(f* g)
    seen = set()
    for i, f in enumerate(basis):
        for j, g in enumerate(basis):
            val = canonical_trace(m, f.adjoint() @ g)
            if i == j:
                assert abs(val) > 0
            else:
                assert abs(val) < 1e-14
            seen.add((i, j))


def test_canonical_trace_free_embedding_identity():
    # the blockwise trace must equal sum_i tau(alpha_ii) for right
    # multiplication by a matrix over the algebra on a free module
    rng = np.random.default_rng(7)
    for rank in (1, 2, 3):
        free = free_module(ALG, rank)
        alpha = [[ALG.random_element(rng) for _ in range(rank)] for _ in range(rank)]
        op = right_action_operator(free, alpha)
        lhs = canonical_trace(free, op)
        rhs = sum(ALG.trace(alpha[i][i]) for i in range(rank))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_right_action_reverses_products():
    rng = np.random.default_rng(8)
    free = free_module(ALG, 2)
    a = [[ALG.random_element(rng) for _ in range(2)] for _ in range(2)]
    b = [[ALG.random_element(rng) for _ in range(2)] for _ in range(2)]
    ab = [[sum((a[i][k] * b[k][j] for k in range(2)), ALG.zero()) for j in range(2)] for i in range(2)]
    lhs = right_action_operator(free, b) @ right_action_operator(free, a)
    rhs = right_action_operator(free, ab)
    assert np.allclose(lhs.to_matrix(), rhs.to_matrix(), atol=1e-10)


def test_trace_additive_on_operators():
    m = HilbertianModule(ALG, (2, 3))
    rng = np.random.default_rng(2)
    f = random_commutant_op(m, rng)
    g = random_commutant_op(m, rng)
    assert canonical_trace(m, f + g) == pytest.approx(
        canonical_trace(m, f) + canonical_trace(m, g), abs=1e-12
    )


def test_admissibility_conditions():
    m = HilbertianModule(ALG, (1, 2))
    d = m.carrier_dim
    ok = check_admissible(m, 2.0 * np.eye(d))
    assert ok.ok and ok.transition is not None
    assert np.allclose(ok.transition.to_matrix(), 2.0 * np.eye(d), atol=1e-12)

    not_sa = np.eye(d, dtype=complex)
    not_sa[0, 1] = 1.0
    rep = check_admissible(m, not_sa)
    assert not rep.self_adjoint and not rep.ok

    indefinite = np.eye(d, dtype=complex)
    indefinite[0, 0] = -1.0
    rep = check_admissible(m, indefinite)
    assert not rep.positive and not rep.ok

    # positive, self-adjoint, but not module-linear
    non_linear = np.eye(d, dtype=complex)
    non_linear[1, 1] = 3.0  # breaks 1 kron B structure inside the 2x2 block
    non_linear[1, 3] = 0.0
    rep = check_admissible(m, non_linear)
    assert not rep.commutes and not rep.ok

    near_singular = np.eye(d, dtype=complex)
    with pytest.raises(NotAdmissible):
        HilbertianModule(ALG, (1, 2), reference_gram=0.0 * near_singular)


def test_transition_operator_reproduces_gram():
    # gram = reference . transition in matrix form
    rng = np.random.default_rng(5)
    m = HilbertianModule(ALG, (2, 2))
    t = random_commutant_op(m, rng)
    pos = t.adjoint() @ t + CommutantOperator.identity(m)
    gram = pos.to_matrix()
    rep = check_admissible(m, gram)
    assert rep.ok
    assert np.allclose(rep.transition.to_matrix(), gram, atol=1e-10)

    # now against a non-identity reference
    ref = (t.adjoint() @ t + 2.0 * CommutantOperator.identity(m)).to_matrix()
    m2 = HilbertianModule(ALG, (2, 2), reference_gram=ref)
    rep2 = check_admissible(m2, gram)
    assert rep2.ok
    assert np.allclose(ref @ rep2.transition.to_matrix(), gram, atol=1e-10)


def test_direct_sum_layout():
    a = HilbertianModule(ALG, (1, 2))
    b = HilbertianModule(ALG, (2, 0))
    s = direct_sum(a, b)
    assert s.multiplicities == (3, 2)
    assert s.carrier_dim == a.carrier_dim + b.carrier_dim
    rng = np.random.default_rng(3)
    x = ALG.random_element(rng)
    blk = np.zeros((s.carrier_dim, s.carrier_dim), dtype=complex)
    blk[: a.carrier_dim, : a.carrier_dim] = a.action(x)
    blk[a.carrier_dim :, a.carrier_dim :] = b.action(x)
    assert np.allclose(s.action(x), blk, atol=1e-12)


def test_inclusions_are_isometric_and_commute_with_action():
    mods = [HilbertianModule(ALG, (1, 1)), HilbertianModule(ALG, (0, 2)), standard_module(ALG)]
    total = direct_sum_many(mods)
    incs = inclusion_morphisms(mods, total)
    at = 0
    for mod, inc in zip(mods, incs):
        mat = inc.to_matrix()
        expect = np.zeros((total.carrier_dim, mod.carrier_dim), dtype=complex)
        expect[at : at + mod.carrier_dim] = np.eye(mod.carrier_dim)
        assert np.allclose(mat, expect, atol=1e-12)
        at += mod.carrier_dim


def test_regular_module_action_is_left_translation():
    table = FiniteGroupTable.symmetric(3)
    dec = build_group_algebra(table)
    reg = regular_module(dec)
    for g in range(table.order):
        assert np.allclose(
            reg.action(dec.group_images[g]), table.left_translation(g), atol=1e-8
        )
    # right translations are commutant operators
    for g in range(table.order):
        CommutantOperator.from_matrix(reg, table.right_translation(g), tol=1e-8)


def test_module_from_group_action_round_trip():
    table = FiniteGroupTable.cyclic(3)
    dec = build_group_algebra(table)
    # two copies of the regular rep plus one extra trivial summand
    omega = np.exp(2j * np.pi / 3)
    images = []
    for g in range(3):
        l = table.left_translation(g)
        images.append(
            np.block(
                [
                    [l, np.zeros((3, 4))],
                    [np.zeros((3, 3)), l, np.zeros((3, 1))],
                    [np.zeros((1, 6)), np.eye(1)],
                ]
            )
        )
    mod = module_from_group_action(dec, images)
    assert sorted(mod.multiplicities) == sorted((3, 2, 2))
    assert mod.carrier_dim == 7
    for g in range(3):
        assert np.allclose(mod.action(dec.group_images[g]), images[g], atol=1e-8)


def test_morphism_intertwining_enforced():
    m = HilbertianModule(ALG, (2, 1))
    n = HilbertianModule(ALG, (1, 2))
    rng = np.random.default_rng(4)
    blocks = [rng.standard_normal((1, 2)), rng.standard_normal((2, 1))]
    f = ModuleMorphism(m, n, blocks)
    mat = f.to_matrix()
    for _ in range(4):
        x = ALG.random_element(rng)
        assert np.allclose(mat @ m.action(x), n.action(x) @ mat, atol=1e-10)
    back = ModuleMorphism.from_matrix(m, n, mat)
    for a, b in zip(back.blocks, f.blocks):
        assert np.allclose(a, b, atol=1e-12)
    bad = mat.copy()
    bad[0, 2] += 1.0  # couples the two inequivalent blocks
    with pytest.raises(NotInCommutant):
        ModuleMorphism.from_matrix(m, n, bad)


def test_morphism_inverse_and_notiso():
    m = HilbertianModule(ALG, (2, 2))
    rng = np.random.default_rng(9)
    f = random_commutant_op(m, rng) + 3.0 * CommutantOperator.identity(m)
    inv = f.inverse()
    assert np.allclose((inv @ f).to_matrix(), np.eye(m.carrier_dim), atol=1e-8)
    n = HilbertianModule(ALG, (2, 1))
    g = ModuleMorphism(m, n, [np.eye(2), np.zeros((1, 2))])
    with pytest.raises(NotIso):
        g.inverse()


def test_adjoint_respects_gram():
    rng = np.random.default_rng(10)
    m = HilbertianModule(ALG, (2, 2))
    t = random_commutant_op(m, rng)
    gram_op = t.adjoint() @ t + CommutantOperator.identity(m)
    gram = gram_op.to_matrix()
    f = random_commutant_op(m, rng)
    fstar = f.adjoint(source_gram=gram, target_gram=gram)
    # <f v, w>_G == <v, f* w>_G on random vectors
    for _ in range(5):
        v = rng.standard_normal(m.carrier_dim) + 1j * rng.standard_normal(m.carrier_dim)
        w = rng.standard_normal(m.carrier_dim) + 1j * rng.standard_normal(m.carrier_dim)
        lhs = np.vdot(w, gram @ f.to_matrix() @ v)
        rhs = np.vdot(fstar.to_matrix() @ w, gram @ v)
        assert lhs == pytest.approx(rhs, abs=1e-8)


def test_kernel_and_image_submodules():
    m = HilbertianModule(ALG, (2, 3))
    n = HilbertianModule(ALG, (1, 2))
    f = ModuleMorphism(m, n, [np.array([[1.0, 0.0]]), np.array([[1, 0, 0], [0, 1, 0.0]])])
    ker, ker_embed = kernel_submodule(f)
    assert ker.multiplicities == (1, 1)
    assert np.allclose((_compose(f, ker_embed)).norm(), 0.0, atol=1e-12)
    img, img_embed = image_submodule(f)
    assert img.multiplicities == (1, 2)
    # embeddings are isometries for the chosen gram (identity here)
    jmat = img_embed.to_matrix()
    assert np.allclose(jmat.conj().T @ jmat, np.eye(img.carrier_dim), atol=1e-12)


def _compose(f, g):
    return f @ g


def test_submodule_respects_nontrivial_gram():
    m = HilbertianModule(ALG, (2, 2))
    gram = np.eye(m.carrier_dim, dtype=complex) * 4.0
    sub, embed = submodule_from_blocks(m, [np.eye(2)[:, :1], np.eye(2)], gram=gram)
    j = embed.to_matrix()
    assert np.allclose(j.conj().T @ gram @ j, np.eye(sub.carrier_dim), atol=1e-12)


def test_algebra_mismatch_guard():
    other = FiniteVonNeumannAlgebra(((1, 1.0), (2, 0.25)))
    m = HilbertianModule(ALG, (1, 1))
    n = HilbertianModule(other, (1, 1))
    with pytest.raises(AlgebraMismatch):
        ModuleMorphism(m, n, [np.eye(1), np.eye(1)])
    with pytest.raises(ShapeMismatch):
        HilbertianModule(ALG, (1,))
