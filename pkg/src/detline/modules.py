"""Finitely generated Hilbertian modules in isotypic normal form.

A module over A = sum_k M_{n_k}(C) is stored by its multiplicities
(m_1, ..., m_r): the canonical carrier is sum_k C^{n_k} (x) C^{m_k} and the
algebra acts by x |-> blkdiag_k(x_k kron 1_{m_k}).  A unitary basis_map
carries canonical coordinates to whatever coordinates the user works in
(group-element coordinates for regular modules, concatenated coordinates for
direct sums).  The carrier has no preferred scalar product; a reference gram
(positive, invertible, commuting with the action) is part of the data and
all metric notions are taken relative to some admissible gram.

Everything A-linear is stored blockwise: a morphism M -> N decomposes as
blkdiag_k(1_{n_k} kron F_k) in canonical coordinates with F_k of shape
(m_k(N), m_k(M)).  Commutant operators are the square case.  The canonical
trace of a commutant operator is sum_k w_k tr(F_k), which agrees with the
free-embedding formula on free modules (tested, not assumed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    as_complex_matrix,
    gram_orthonormalize,
    inv_sqrt_pd,
    is_hermitian,
    nullspace,
    operator_norm,
    orthonormal_range,
    sqrt_psd,
)
from .algebra import AlgebraElement, FiniteVonNeumannAlgebra, GroupAlgebraDecomposition
from .errors import (
    AlgebraMismatch,
    NotAdmissible,
    NotInCommutant,
    NotIso,
    ShapeMismatch,
    ValidationError,
)

COMMUTANT_TOL = 1e-10
COND_LIMIT = 1e12
POSITIVITY_FLOOR = 1e-10


class HilbertianModule:
    def __init__(self, algebra, multiplicities, basis_map=None, reference_gram=None):
        if not isinstance(algebra, FiniteVonNeumannAlgebra):
            raise ValidationError("algebra must be a FiniteVonNeumannAlgebra")
        mult = tuple(int(m) for m in multiplicities)
        if len(mult) != len(algebra.blocks):
            raise ShapeMismatch("need one multiplicity per algebra block")
        if any(m < 0 for m in mult):
            raise ValidationError("multiplicities must be >= 0")
        self.algebra = algebra
        self.multiplicities = mult
        dims = algebra.block_dims
        self.carrier_dim = int(sum(n * m for n, m in zip(dims, mult)))
        self._offsets = np.cumsum([0] + [n * m for n, m in zip(dims, mult)])

        if basis_map is None:
            self.basis_map = None
        else:
            u = as_complex_matrix(basis_map)
            if u.shape != (self.carrier_dim, self.carrier_dim):
                raise ShapeMismatch("basis map has wrong shape")
            if operator_norm(u.conj().T @ u - np.eye(self.carrier_dim)) > 1e-8:
                raise ValidationError("basis map must be unitary")
            self.basis_map = u

        if reference_gram is None:
            gram = np.eye(self.carrier_dim, dtype=complex)
        else:
            gram = as_complex_matrix(reference_gram)
        self.reference_gram = _GramData.from_matrix(self, gram, what="reference gram")

    # -- coordinates ---------------------------------------------------------

    def block_slice(self, k: int) -> slice:
        return slice(int(self._offsets[k]), int(self._offsets[k + 1]))

    def to_canonical(self, mat: np.ndarray) -> np.ndarray:
        if self.basis_map is None:
            return mat
        return self.basis_map.conj().T @ mat @ self.basis_map

    def from_canonical(self, mat: np.ndarray) -> np.ndarray:
        if self.basis_map is None:
            return mat
        return self.basis_map @ mat @ self.basis_map.conj().T

    def action(self, x: AlgebraElement) -> np.ndarray:
        """Matrix of the action of x in user coordinates."""
        if x.algebra != self.algebra:
            raise AlgebraMismatch("element belongs to a different algebra")
        out = np.zeros((self.carrier_dim, self.carrier_dim), dtype=complex)
        for k, (m, b) in enumerate(zip(self.multiplicities, x.block_matrices)):
            sl = self.block_slice(k)
            out[sl, sl] = np.kron(b, np.eye(m))
        return self.from_canonical(out)

    # -- structure -----------------------------------------------------------

    def is_same_space(self, other: "HilbertianModule") -> bool:
        if self is other:
            return True
        if self.algebra != other.algebra or self.multiplicities != other.multiplicities:
            return False
        a = np.eye(self.carrier_dim) if self.basis_map is None else self.basis_map
        b = np.eye(other.carrier_dim) if other.basis_map is None else other.basis_map
        return np.allclose(a, b, atol=1e-12) and np.allclose(
            self.reference_gram.matrix, other.reference_gram.matrix, atol=1e-12
        )

    def __repr__(self):
        return f"HilbertianModule(dims={self.algebra.block_dims}, mult={self.multiplicities})"


class _GramData:
    """A positive invertible commutant operator used as a scalar product.

    Caches blockwise square roots, since metric work happens per block.
    """

    __slots__ = ("module", "blocks", "matrix", "_sqrt", "_inv_sqrt", "_inv")

    def __init__(self, module, blocks, matrix):
        self.module = module
        self.blocks = blocks
        self.matrix = matrix
        self._sqrt = None
        self._inv_sqrt = None
        self._inv = None

    @staticmethod
    def from_matrix(module, gram, what="gram"):
        gram = as_complex_matrix(gram)
        if gram.shape != (module.carrier_dim,) * 2:
            raise ShapeMismatch(f"{what} has wrong shape")
        if not is_hermitian(gram, 1e-10):
            raise NotAdmissible(f"{what} is not self-adjoint")
        blocks, resid, scale = _extract_blocks(module, module, gram)
        if resid > COMMUTANT_TOL * scale:
            raise NotAdmissible(f"{what} does not commute with the algebra action")
        vals = np.concatenate(
            [np.linalg.eigvalsh(0.5 * (b + b.conj().T)) for b in blocks if b.size]
            or [np.ones(1)]
        )
        top = float(np.max(np.abs(vals)))
        if np.min(vals) <= POSITIVITY_FLOOR * max(top, 1e-300):
            raise NotAdmissible(f"{what} is not positive definite")
        return _GramData(module, tuple(blocks), gram)

    @property
    def sqrt_blocks(self):
        if self._sqrt is None:
            self._sqrt = tuple(sqrt_psd(b) for b in self.blocks)
        return self._sqrt

    @property
    def inv_sqrt_blocks(self):
        if self._inv_sqrt is None:
            self._inv_sqrt = tuple(inv_sqrt_pd(b) for b in self.blocks)
        return self._inv_sqrt

    @property
    def inv_blocks(self):
        if self._inv is None:
            self._inv = tuple(
                np.linalg.inv(b) if b.size else b.copy() for b in self.blocks
            )
        return self._inv


def resolve_gram(module: HilbertianModule, gram=None) -> _GramData:
    """Accept None (module reference), a matrix, or prepared gram data."""
    if gram is None:
        return module.reference_gram
    if isinstance(gram, _GramData):
        if gram.module is not module and not gram.module.is_same_space(module):
            raise AlgebraMismatch("gram belongs to a different module")
        return gram
    if isinstance(gram, CommutantOperator):
        return _GramData.from_matrix(module, gram.to_matrix())
    return _GramData.from_matrix(module, gram)


def _extract_blocks(source, target, mat):
    """Blockwise form of an A-linear map, plus the reconstruction residual.

    Returns (blocks, residual, scale) where blocks[k] has shape
    (m_k(target), m_k(source)).  The residual measures the distance of mat
    from blkdiag_k(1_{n_k} kron F_k) in canonical coordinates; it is the
    caller's job to compare against a tolerance.
    """
    can = (target.basis_map.conj().T if target.basis_map is not None else np.eye(target.carrier_dim)) @ mat
    if source.basis_map is not None:
        can = can @ source.basis_map
    dims = source.algebra.block_dims
    blocks = []
    recon = np.zeros_like(can)
    for k, n in enumerate(dims):
        ms, mt = source.multiplicities[k], target.multiplicities[k]
        piece = can[target.block_slice(k), source.block_slice(k)]
        piece = piece.reshape(n, mt, n, ms)
        f = np.einsum("aiaj->ij", piece) / n
        blocks.append(f)
        recon[target.block_slice(k), source.block_slice(k)] = np.kron(np.eye(n), f).reshape(
            n * mt, n * ms
        )
    resid = operator_norm(can - recon)
    scale = max(1.0, operator_norm(can))
    return blocks, resid, scale


class ModuleMorphism:
    """A-linear map between Hilbertian modules, stored per block."""

    def __init__(self, source, target, blocks):
        if source.algebra != target.algebra:
            raise AlgebraMismatch("morphism endpoints live over different algebras")
        self.source = source
        self.target = target
        mats = []
        for k, b in enumerate(blocks):
            b = np.asarray(b, dtype=complex)
            want = (target.multiplicities[k], source.multiplicities[k])
            if b.shape != want:
                raise ShapeMismatch(f"block {k} has shape {b.shape}, expected {want}")
            mats.append(b)
        if len(mats) != len(source.algebra.blocks):
            raise ShapeMismatch("need one block per algebra block")
        self.blocks = tuple(mats)

    @classmethod
    def from_matrix(cls, source, target, mat, tol=COMMUTANT_TOL):
        mat = as_complex_matrix(mat)
        if mat.shape != (target.carrier_dim, source.carrier_dim):
            raise ShapeMismatch(
                f"matrix shape {mat.shape} does not map {source.carrier_dim} -> {target.carrier_dim}"
            )
        blocks, resid, scale = _extract_blocks(source, target, mat)
        if resid > tol * scale:
            raise NotInCommutant(f"matrix is not A-linear (residual {resid:.2e})")
        return cls(source, target, blocks)

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((self.target.carrier_dim, self.source.carrier_dim), dtype=complex)
        for k, n in enumerate(self.source.algebra.block_dims):
            out[self.target.block_slice(k), self.source.block_slice(k)] = np.kron(
                np.eye(n), self.blocks[k]
            )
        if self.target.basis_map is not None:
            out = self.target.basis_map @ out
        if self.source.basis_map is not None:
            out = out @ self.source.basis_map.conj().T
        return out

    def __matmul__(self, other: "ModuleMorphism") -> "ModuleMorphism":
        if not isinstance(other, ModuleMorphism):
            return NotImplemented
        if not other.target.is_same_space(self.source):
            raise AlgebraMismatch("morphisms do not compose")
        blocks = [a @ b for a, b in zip(self.blocks, other.blocks)]
        if other.source.is_same_space(self.target):
            return CommutantOperator(self.target, blocks)
        return ModuleMorphism(other.source, self.target, blocks)

    def __add__(self, other):
        self._check_same_shape(other)
        return type(self)._rebuild(self, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check_same_shape(other)
        return type(self)._rebuild(self, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)._rebuild(self, [scalar * b for b in self.blocks])

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    @classmethod
    def _rebuild(cls, proto, blocks):
        if isinstance(proto, CommutantOperator):
            return CommutantOperator(proto.module, blocks)
        return ModuleMorphism(proto.source, proto.target, blocks)

    def _check_same_shape(self, other):
        if not (self.source.is_same_space(other.source) and self.target.is_same_space(other.target)):
            raise AlgebraMismatch("morphisms have different endpoints")

    def adjoint(self, source_gram=None, target_gram=None) -> "ModuleMorphism":
        """Adjoint with respect to admissible grams on source and target."""
        gs = resolve_gram(self.source, source_gram)
        gt = resolve_gram(self.target, target_gram)
        blocks = [
            gsi @ b.conj().T @ gtb
            for gsi, b, gtb in zip(gs.inv_blocks, self.blocks, gt.blocks)
        ]
        if self.source.is_same_space(self.target):
            return CommutantOperator(self.source, blocks)
        return ModuleMorphism(self.target, self.source, blocks)

    def is_iso(self, cond_limit=COND_LIMIT) -> bool:
        for b in self.blocks:
            if b.shape[0] != b.shape[1]:
                return False
            if b.size and np.linalg.cond(b) > cond_limit:
                return False
        return True

    def inverse(self) -> "ModuleMorphism":
        if not self.is_iso():
            raise NotIso("morphism is not invertible")
        blocks = [np.linalg.inv(b) if b.size else b.copy().T for b in self.blocks]
        if self.source.is_same_space(self.target):
            return CommutantOperator(self.source, blocks)
        return ModuleMorphism(self.target, self.source, blocks)

    def norm(self) -> float:
        return max((operator_norm(b) for b in self.blocks), default=0.0)


class CommutantOperator(ModuleMorphism):
    """A-linear endomorphism of one module."""

    def __init__(self, module, blocks):
        super().__init__(module, module, blocks)
        self.module = module

    @classmethod
    def from_matrix(cls, module, mat, tol=COMMUTANT_TOL):
        mor = ModuleMorphism.from_matrix(module, module, mat, tol)
        return cls(module, mor.blocks)

    @classmethod
    def identity(cls, module):
        return cls(module, [np.eye(m, dtype=complex) for m in module.multiplicities])

    @classmethod
    def zero(cls, module):
        return cls(module, [np.zeros((m, m), dtype=complex) for m in module.multiplicities])

    @classmethod
    def from_action(cls, module, x: AlgebraElement):
        """Not in the commutant in general; here for grams built from central
        elements.  Only valid when every block of x is scalar."""
        blocks = []
        for (n, _), m, b in zip(module.algebra.blocks, module.multiplicities, x.block_matrices):
            if n and operator_norm(b - b[0, 0] * np.eye(n)) > 1e-12 * max(1.0, operator_norm(b)):
                raise NotInCommutant("action of a non-central element is not in the commutant")
            blocks.append((b[0, 0] if n else 0.0) * np.eye(m, dtype=complex))
        return cls(module, blocks)


# ---------------------------------------------------------------------------
# module-level operations


def commutant_basis(module: HilbertianModule) -> list[CommutantOperator]:
    """Matrix-unit basis of the commutant; size sum_k m_k^2."""
    out = []
    for k, m in enumerate(module.multiplicities):
        for i in range(m):
            for j in range(m):
                blocks = [np.zeros((mm, mm), dtype=complex) for mm in module.multiplicities]
                blocks[k][i, j] = 1.0
                out.append(CommutantOperator(module, blocks))
    return out


def canonical_trace(module: HilbertianModule, f: CommutantOperator) -> complex:
    if not f.module.is_same_space(module):
        raise AlgebraMismatch("operator lives on a different module")
    return complex(
        sum(w * np.trace(b) for (_, w), b in zip(module.algebra.blocks, f.blocks))
    )


def von_neumann_dimension(module: HilbertianModule) -> float:
    return float(
        sum(w * m for (_, w), m in zip(module.algebra.blocks, module.multiplicities))
    )


@dataclass
class AdmissibilityReport:
    homeomorphism: bool
    self_adjoint: bool
    positive: bool
    commutes: bool
    condition_number: float
    transition: CommutantOperator | None

    @property
    def ok(self) -> bool:
        return self.homeomorphism and self.self_adjoint and self.positive and self.commutes


def check_admissible(module: HilbertianModule, gram) -> AdmissibilityReport:
    """Check the four admissibility conditions of a candidate scalar product.

    The transition operator T (gram = reference . T, so that
    <v, w>_gram = <T v, w>_reference) is reported when all conditions hold.
    """
    gram = as_complex_matrix(gram)
    if gram.shape != (module.carrier_dim,) * 2:
        raise ShapeMismatch("gram has wrong shape")
    self_adjoint = is_hermitian(gram, 1e-10)
    herm = 0.5 * (gram + gram.conj().T)
    vals = np.linalg.eigvalsh(herm) if herm.size else np.array([1.0])
    top = float(np.max(np.abs(vals))) if vals.size else 1.0
    positive = bool(vals.size == 0 or np.min(vals) > POSITIVITY_FLOOR * top)
    cond = float(np.max(vals) / np.min(vals)) if positive and vals.size else np.inf
    homeo = bool(np.isfinite(cond) and cond < COND_LIMIT)
    blocks, resid, scale = _extract_blocks(module, module, gram)
    commutes = bool(resid <= COMMUTANT_TOL * scale)
    transition = None
    if self_adjoint and positive and homeo and commutes:
        ref = module.reference_gram
        t_blocks = [gi @ b for gi, b in zip(ref.inv_blocks, blocks)]
        transition = CommutantOperator(module, t_blocks)
    return AdmissibilityReport(homeo, self_adjoint, positive, commutes, cond, transition)


def require_admissible(module: HilbertianModule, gram) -> CommutantOperator:
    report = check_admissible(module, gram)
    if not report.ok:
        raise NotAdmissible(
            "gram fails admissibility: "
            f"homeomorphism={report.homeomorphism} self_adjoint={report.self_adjoint} "
            f"positive={report.positive} commutes={report.commutes}"
        )
    return report.transition


# ---------------------------------------------------------------------------
# constructions


def _summand_layout(modules):
    dims = modules[0].algebra.block_dims
    mult = tuple(sum(m.multiplicities[k] for m in modules) for k in range(len(dims)))
    return dims, mult


def direct_sum_many(modules: list[HilbertianModule]) -> HilbertianModule:
    """Direct sum; user coordinates are the concatenated user coordinates and
    the reference gram is the block sum of the summand references."""
    if not modules:
        raise ValidationError("direct sum needs at least one summand")
    alg = modules[0].algebra
    for m in modules:
        if m.algebra != alg:
            raise AlgebraMismatch("summands live over different algebras")
    dims, mult = _summand_layout(modules)
    total = int(sum(m.carrier_dim for m in modules))

    # unitary: canonical coords of the sum -> concatenated user coords
    u = np.zeros((total, total), dtype=complex)
    sum_offsets = np.cumsum([0] + [n * m for n, m in zip(dims, mult)])
    user_at = 0
    mult_seen = [0] * len(dims)
    for mod in modules:
        umod = mod.basis_map if mod.basis_map is not None else np.eye(mod.carrier_dim)
        # canonical index of summand (block k, copy a, column i) lands at
        # sum-canonical index (block k, copy a, column offset_k + i)
        cols = []
        for k, n in enumerate(dims):
            mk, off = mod.multiplicities[k], mult_seen[k]
            for a in range(n):
                for i in range(mk):
                    cols.append(sum_offsets[k] + a * mult[k] + off + i)
        cols = np.asarray(cols, dtype=int)
        u[user_at : user_at + mod.carrier_dim, cols] = umod
        user_at += mod.carrier_dim
        for k in range(len(dims)):
            mult_seen[k] += mod.multiplicities[k]

    gram = np.zeros((total, total), dtype=complex)
    at = 0
    for mod in modules:
        gram[at : at + mod.carrier_dim, at : at + mod.carrier_dim] = mod.reference_gram.matrix
        at += mod.carrier_dim
    return HilbertianModule(alg, mult, basis_map=u, reference_gram=gram)


def direct_sum(m: HilbertianModule, n: HilbertianModule) -> HilbertianModule:
    return direct_sum_many([m, n])


def inclusion_morphisms(modules, total: HilbertianModule) -> list[ModuleMorphism]:
    """The canonical inclusions of summands into direct_sum_many(modules)."""
    dims = total.algebra.block_dims
    out = []
    offset = [0] * len(dims)
    for mod in modules:
        blocks = []
        for k in range(len(dims)):
            j = np.zeros((total.multiplicities[k], mod.multiplicities[k]), dtype=complex)
            j[offset[k] : offset[k] + mod.multiplicities[k], :] = np.eye(mod.multiplicities[k])
            blocks.append(j)
        out.append(ModuleMorphism(mod, total, blocks))
        for k in range(len(dims)):
            offset[k] += mod.multiplicities[k]
    return out


def standard_module(algebra: FiniteVonNeumannAlgebra) -> HilbertianModule:
    """The algebra acting on itself; canonical coordinates, multiplicity n_k."""
    return HilbertianModule(algebra, algebra.block_dims)


def zero_module(algebra: FiniteVonNeumannAlgebra) -> HilbertianModule:
    return HilbertianModule(algebra, [0] * len(algebra.blocks))


def free_module(algebra: FiniteVonNeumannAlgebra, rank: int) -> HilbertianModule:
    if rank < 1:
        raise ValidationError("free rank must be >= 1")
    return direct_sum_many([standard_module(algebra)] * rank)


def right_action_operator(free: HilbertianModule, alpha) -> CommutantOperator:
    """Right multiplication by a square matrix alpha over A on a free module.

    alpha[j][i] is the (row j, column i) entry; components transform by
    (v . alpha)_i = sum_j v_j alpha[j][i].  Composition reverses order, as it
    must for a right action.
    """
    rank = len(alpha)
    alg = free.algebra
    if any(len(row) != rank for row in alpha):
        raise ShapeMismatch("alpha must be square")
    if free.multiplicities != tuple(rank * n for n in alg.block_dims):
        raise ShapeMismatch("module is not free of the right rank")
    blocks = []
    for k, n in enumerate(alg.block_dims):
        rows = []
        for i in range(rank):
            rows.append([alpha[j][i].block_matrices[k].T for j in range(rank)])
        blocks.append(np.block(rows) if n else np.zeros((0, 0), dtype=complex))
    return CommutantOperator(free, blocks)


def regular_module(dec: GroupAlgebraDecomposition, reference_gram=None) -> HilbertianModule:
    """l2 of the group algebra in group-element coordinates."""
    return HilbertianModule(
        dec.algebra,
        dec.algebra.block_dims,
        basis_map=dec.change_of_basis,
        reference_gram=reference_gram,
    )


def module_from_group_action(
    dec: GroupAlgebraDecomposition, images, reference_gram=None
) -> HilbertianModule:
    """Normalize a unitary group action on C^d into isotypic form.

    images: one unitary matrix per group element.  The basis is built from
    the images of the matrix units of each block, so the stored unitary does
    exactly and deterministically what eigen-clustering would do generically.
    """
    table = dec.table
    images = [as_complex_matrix(m) for m in images]
    if len(images) != table.order:
        raise ShapeMismatch("need one image per group element")
    d = images[0].shape[0]
    for m in images:
        if m.shape != (d, d):
            raise ShapeMismatch("images must share one square shape")
        if operator_norm(m @ m.conj().T - np.eye(d)) > 1e-8:
            raise ValidationError("raw actions must be unitary representations")
    for g in range(table.order):
        for h in range(table.order):
            err = operator_norm(images[g] @ images[h] - images[table.product[g, h]])
            if err > 1e-8 * max(1.0, operator_norm(images[g])):
                raise ValidationError(f"images do not respect the product at ({g},{h})")

    def rep_of(x: AlgebraElement) -> np.ndarray:
        coeffs = dec.coefficients_from_element(x)
        return sum(c * img for c, img in zip(coeffs, images))

    alg = dec.algebra
    cols = []
    mult = []
    for k, n in enumerate(alg.block_dims):
        units_first_col = []
        for a in range(n):
            blocks = [np.zeros((nn, nn), dtype=complex) for nn in alg.block_dims]
            blocks[k][a, 0] = 1.0
            units_first_col.append(rep_of(AlgebraElement(alg, blocks)))
        p11 = units_first_col[0]  # projection onto the (k, column-1) slot
        basis = orthonormal_range(p11, rtol=1e-8)
        mk = basis.shape[1]
        mult.append(mk)
        for a in range(n):
            shifted = units_first_col[a] @ basis
            for i in range(mk):
                cols.append(shifted[:, i])
    if sum(n * m for n, m in zip(alg.block_dims, mult)) != d:
        raise ValidationError("action does not fill the carrier; not a module over this algebra")
    u = np.stack(cols, axis=1)
    module = HilbertianModule(alg, mult, basis_map=u, reference_gram=reference_gram)
    # round-trip check: the given images must equal the module action
    for g in range(table.order):
        want = module.action(dec.group_images[g])
        if operator_norm(want - images[g]) > 1e-8:
            raise ValidationError("normalized module does not reproduce the raw action")
    return module


def submodule_from_blocks(
    module: HilbertianModule, column_blocks, gram=None
) -> tuple[HilbertianModule, ModuleMorphism]:
    """Submodule spanned per block by the given multiplicity-space columns.

    Columns are orthonormalized against the chosen gram, so the submodule's
    reference gram is the induced product and equals the identity in its own
    coordinates.  Returns (submodule, embedding).
    """
    g = resolve_gram(module, gram)
    ortho = []
    mult = []
    for k, colz in enumerate(column_blocks):
        colz = np.asarray(colz, dtype=complex)
        if colz.ndim != 2 or colz.shape[0] != module.multiplicities[k]:
            raise ShapeMismatch(f"column block {k} has wrong shape {colz.shape}")
        y = gram_orthonormalize(colz, g.blocks[k]) if colz.shape[1] else colz
        ortho.append(y)
        mult.append(y.shape[1])
    sub = HilbertianModule(module.algebra, mult)
    embed = ModuleMorphism(sub, module, ortho)
    return sub, embed


def kernel_submodule(f: ModuleMorphism, gram=None):
    """Kernel of an A-linear map as a submodule of its source."""
    cols = [nullspace(b) for b in f.blocks]
    return submodule_from_blocks(f.source, cols, gram=gram)


def image_submodule(f: ModuleMorphism, gram=None):
    """Closed image of an A-linear map as a submodule of its target."""
    cols = [orthonormal_range(b) for b in f.blocks]
    return submodule_from_blocks(f.target, cols, gram=gram)
