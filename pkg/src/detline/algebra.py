"""Finite von Neumann algebras presented as weighted sums of matrix blocks.

An algebra here is a finite direct sum of full matrix blocks M_{n_k}(C)
together with strictly positive trace weights w_k.  The trace of an element
x = (x_1, ..., x_r) is sum_k w_k tr(x_k); it is faithful and tracial by
construction and nothing forces tr(1) = 1.

Group algebras C[G] enter through a multiplication table.  The block
decomposition of the left regular representation is computed numerically:
the commutant of left translation is spanned by right translations, a random
Hermitian element of that commutant is diagonalized, eigenvalue clusters cut
the carrier into irreducible invariant subspaces, and unitary intertwiners
transport one matrix realization across each isotypic family.  Weights come
out so that the block trace restricts to the coefficient of the identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._linalg import cluster_values, inv_sqrt_pd, operator_norm, random_complex
from .errors import (
    AlgebraMismatch,
    DecompositionFailure,
    NegativeSpectrum,
    NonAssociativeTable,
    ShapeMismatch,
    ValidationError,
)


@dataclass(frozen=True)
class FiniteVonNeumannAlgebra:
    """Direct sum of matrix blocks with positive trace weights.

    blocks: tuple of (block dimension n_k, trace weight w_k).
    """

    blocks: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise ValidationError("algebra needs at least one block")
        norm = []
        for n, w in self.blocks:
            n = int(n)
            w = float(w)
            if n < 1:
                raise ValidationError(f"block dimension must be >= 1, got {n}")
            if not (w > 0.0) or not np.isfinite(w):
                raise ValidationError(f"trace weight must be positive, got {w}")
            norm.append((n, w))
        object.__setattr__(self, "blocks", tuple(norm))

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.blocks)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for _, w in self.blocks)

    @property
    def trace_of_identity(self) -> float:
        return float(sum(w * n for n, w in self.blocks))

    @property
    def total_matrix_dim(self) -> int:
        """Dimension of the algebra as a vector space, sum of n_k^2."""
        return int(sum(n * n for n, _ in self.blocks))

    def identity(self) -> "AlgebraElement":
        return AlgebraElement(self, [np.eye(n, dtype=complex) for n in self.block_dims])

    def zero(self) -> "AlgebraElement":
        return AlgebraElement(self, [np.zeros((n, n), dtype=complex) for n in self.block_dims])

    def element(self, blocks) -> "AlgebraElement":
        return AlgebraElement(self, blocks)

    def trace(self, x: "AlgebraElement") -> complex:
        if x.algebra != self:
            raise AlgebraMismatch("element belongs to a different algebra")
        return complex(sum(w * np.trace(b) for (_, w), b in zip(self.blocks, x.block_matrices)))

    def with_scaled_trace(self, lam: float) -> "FiniteVonNeumannAlgebra":
        """Same algebra with trace scaled by lam > 0."""
        lam = float(lam)
        if not lam > 0.0:
            raise ValidationError("trace scale must be positive")
        return FiniteVonNeumannAlgebra(tuple((n, lam * w) for n, w in self.blocks))

    def random_element(self, rng: np.random.Generator, hermitian: bool = False) -> "AlgebraElement":
        mats = []
        for n in self.block_dims:
            m = random_complex(rng, (n, n))
            if hermitian:
                m = 0.5 * (m + m.conj().T)
            mats.append(m)
        return AlgebraElement(self, mats)


class AlgebraElement:
    """One matrix per block.  Multiplication and adjoint act blockwise."""

    __slots__ = ("algebra", "block_matrices")

    def __init__(self, algebra: FiniteVonNeumannAlgebra, block_matrices):
        mats = []
        for n, mat in zip(algebra.block_dims, block_matrices, strict=True):
            m = np.asarray(mat, dtype=complex)
            if m.shape != (n, n):
                raise ShapeMismatch(f"block of shape {m.shape} does not fit dimension {n}")
            mats.append(m)
        self.algebra = algebra
        self.block_matrices = tuple(mats)

    def _check_peer(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            raise TypeError("expected an AlgebraElement")
        if other.algebra != self.algebra:
            raise AlgebraMismatch("elements belong to different algebras")

    def __add__(self, other):
        self._check_peer(other)
        return AlgebraElement(
            self.algebra, [a + b for a, b in zip(self.block_matrices, other.block_matrices)]
        )

    def __sub__(self, other):
        self._check_peer(other)
        return AlgebraElement(
            self.algebra, [a - b for a, b in zip(self.block_matrices, other.block_matrices)]
        )

    def __neg__(self):
        return AlgebraElement(self.algebra, [-a for a in self.block_matrices])

    def __mul__(self, other):
        if np.isscalar(other):
            return AlgebraElement(self.algebra, [other * a for a in self.block_matrices])
        self._check_peer(other)
        return AlgebraElement(
            self.algebra, [a @ b for a, b in zip(self.block_matrices, other.block_matrices)]
        )

    def __rmul__(self, other):
        if np.isscalar(other):
            return AlgebraElement(self.algebra, [other * a for a in self.block_matrices])
        return NotImplemented

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [a.conj().T for a in self.block_matrices])

    def norm(self) -> float:
        return max(operator_norm(a) for a in self.block_matrices)

    def is_close_to(self, other: "AlgebraElement", tol: float = 1e-10) -> bool:
        self._check_peer(other)
        return all(
            np.allclose(a, b, atol=tol)
            for a, b in zip(self.block_matrices, other.block_matrices)
        )


def trace(algebra: FiniteVonNeumannAlgebra, x: AlgebraElement) -> complex:
    return algebra.trace(x)


# ---------------------------------------------------------------------------
# finite group tables


class FiniteGroupTable:
    """Multiplication table of a finite group: product[a, b] = a * b."""

    def __init__(self, product, identity: int = 0):
        prod = np.asarray(product, dtype=int)
        if prod.ndim != 2 or prod.shape[0] != prod.shape[1]:
            raise ValidationError("product table must be square")
        self.order = int(prod.shape[0])
        self.product = prod
        self.identity = int(identity)
        self.validate()
        self.inverse = self._build_inverses()

    def validate(self):
        n, e = self.order, self.identity
        p = self.product
        if not (0 <= e < n):
            raise ValidationError("identity index out of range")
        if p.min() < 0 or p.max() >= n:
            raise ValidationError("table entries out of range")
        for a in range(n):
            if len(set(p[a])) != n or len(set(p[:, a])) != n:
                raise NonAssociativeTable("table rows/columns are not permutations")
        if not (np.all(p[e] == np.arange(n)) and np.all(p[:, e] == np.arange(n))):
            raise NonAssociativeTable("identity element does not act as identity")
        # (ab)c == a(bc), checked exhaustively:
        # p[p, :][a, b, c] = p[p[a, b], c] and p[:, p][a, b, c] = p[a, p[b, c]]
        if not np.array_equal(p[p, :], p[:, p]):
            raise NonAssociativeTable("table is not associative")

    def _build_inverses(self) -> np.ndarray:
        inv = np.full(self.order, -1, dtype=int)
        for a in range(self.order):
            hits = np.where(self.product[a] == self.identity)[0]
            if len(hits) != 1 or self.product[hits[0], a] != self.identity:
                raise NonAssociativeTable(f"element {a} has no two-sided inverse")
            inv[a] = hits[0]
        return inv

    def left_translation(self, g: int) -> np.ndarray:
        """Permutation matrix of h -> g h on the group basis."""
        mat = np.zeros((self.order, self.order))
        mat[self.product[g, np.arange(self.order)], np.arange(self.order)] = 1.0
        return mat

    def right_translation(self, g: int) -> np.ndarray:
        """Permutation matrix of h -> h g on the group basis."""
        mat = np.zeros((self.order, self.order))
        mat[self.product[np.arange(self.order), g], np.arange(self.order)] = 1.0
        return mat

    # -- common tables ------------------------------------------------------

    @staticmethod
    def trivial() -> "FiniteGroupTable":
        return FiniteGroupTable([[0]])

    @staticmethod
    def cyclic(n: int) -> "FiniteGroupTable":
        idx = np.arange(n)
        return FiniteGroupTable((idx[:, None] + idx[None, :]) % n)

    @staticmethod
    def symmetric(n: int) -> "FiniteGroupTable":
        """Symmetric group on n letters; element 0 is the identity."""
        perms = sorted(itertools.permutations(range(n)))
        index = {p: i for i, p in enumerate(perms)}
        size = len(perms)
        prod = np.zeros((size, size), dtype=int)
        for i, a in enumerate(perms):
            for j, b in enumerate(perms):
                prod[i, j] = index[tuple(a[b[k]] for k in range(n))]
        return FiniteGroupTable(prod)

    @staticmethod
    def direct_product(t1: "FiniteGroupTable", t2: "FiniteGroupTable") -> "FiniteGroupTable":
        n1, n2 = t1.order, t2.order
        prod = np.zeros((n1 * n2, n1 * n2), dtype=int)
        for a1 in range(n1):
            for a2 in range(n2):
                for b1 in range(n1):
                    for b2 in range(n2):
                        prod[a1 * n2 + a2, b1 * n2 + b2] = (
                            t1.product[a1, b1] * n2 + t2.product[a2, b2]
                        )
        return FiniteGroupTable(prod, identity=t1.identity * n2 + t2.identity)


# ---------------------------------------------------------------------------
# numerical block decomposition of C[G]


@dataclass
class GroupAlgebraDecomposition:
    """Result of build_group_algebra.

    algebra: the block model of C[G].
    change_of_basis: unitary U with U^H L_g U = blkdiag_k(image_k(g) kron 1).
    group_images: per group element, its block image in the algebra.
    table: the input table.
    """

    algebra: FiniteVonNeumannAlgebra
    change_of_basis: np.ndarray
    group_images: list[AlgebraElement]
    table: FiniteGroupTable

    def element_from_coefficients(self, coeffs) -> AlgebraElement:
        """Block image of sum_g coeffs[g] . g."""
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (self.table.order,):
            raise ShapeMismatch("need one coefficient per group element")
        out = self.algebra.zero()
        for c, img in zip(coeffs, self.group_images):
            out = out + c * img
        return out

    def coefficients_from_element(self, x: AlgebraElement) -> np.ndarray:
        """Inverse of element_from_coefficients; the block map is bijective."""
        cols = np.stack(
            [np.concatenate([b.ravel() for b in img.block_matrices]) for img in self.group_images],
            axis=1,
        )
        target = np.concatenate([b.ravel() for b in x.block_matrices])
        coeffs, *_ = np.linalg.lstsq(cols, target, rcond=None)
        return coeffs


def _split_into_irreducibles(herm_commutant, rel_gap):
    vals, vecs = np.linalg.eigh(herm_commutant)
    pieces = []
    for sl in cluster_values(vals, rel_gap):
        q, _ = np.linalg.qr(vecs[:, sl])
        pieces.append(q)
    return pieces


def build_group_algebra(
    table: FiniteGroupTable,
    *,
    seed: int = 0,
    rel_gap: float = 1e-6,
    max_order: int = 256,
    verify_tol: float = 1e-8,
) -> GroupAlgebraDecomposition:
    """Decompose C[G] into weighted matrix blocks from its table alone.

    Deterministic for a fixed seed; a handful of reseeded retries guard the
    measure-zero event of eigenvalue collisions across inequivalent blocks.
    """
    if table.order > max_order:
        raise ValidationError(f"group order {table.order} exceeds limit {max_order}")
    lefts = [table.left_translation(g) for g in range(table.order)]
    rights = [table.right_translation(g) for g in range(table.order)]
    last_err = None
    for attempt in range(6):
        rng = np.random.default_rng(seed + attempt)
        try:
            return _decompose_once(table, lefts, rights, rng, rel_gap, verify_tol)
        except (DecompositionFailure, NegativeSpectrum) as err:  # resample
            last_err = err
    raise DecompositionFailure(f"decomposition failed after retries: {last_err}")


def _decompose_once(table, lefts, rights, rng, rel_gap, verify_tol):
    n_g = table.order
    # Commutant of left translation is spanned by right translations; a
    # random Hermitian element of it splits the carrier into irreducibles.
    coeffs = random_complex(rng, n_g)
    sample = sum(c * r for c, r in zip(coeffs, rights))
    herm = 0.5 * (sample + sample.conj().T)
    for g, left in enumerate(lefts):
        if operator_norm(left @ herm - herm @ left) > 1e-10 * max(1.0, operator_norm(herm)):
            raise DecompositionFailure(f"commutant sample fails to commute with generator {g}")
    pieces = _split_into_irreducibles(herm, rel_gap)

    # Group the irreducible pieces into families carrying the same block,
    # probing with a second, non-Hermitian commutant element.
    probe = sum(c * r for c, r in zip(random_complex(rng, n_g), rights))
    families: list[list[np.ndarray]] = []
    for q in pieces:
        placed = False
        for fam in families:
            base = fam[0]
            if q.shape[1] != base.shape[1]:
                continue
            inter = q.conj().T @ probe @ base
            if operator_norm(inter) > 1e-6 * operator_norm(probe):
                fam.append(q)
                placed = True
                break
        if not placed:
            families.append([q])

    # Within each family, transport the first realization onto the others by
    # the unitary part of the intertwiner, then read off one matrix block.
    blocks_raw = []
    for fam in families:
        dim = fam[0].shape[1]
        if len(fam) != dim:
            raise DecompositionFailure(
                f"family of dimension {dim} has {len(fam)} copies; expected {dim}"
            )
        base = fam[0]
        bases = [base]
        for q in fam[1:]:
            phi = q.conj().T @ probe @ base
            v = phi @ inv_sqrt_pd(phi.conj().T @ phi)
            bases.append(q @ v)
        images = [base.conj().T @ left @ base for left in lefts]
        blocks_raw.append({"dim": dim, "bases": bases, "images": images})

    if sum(b["dim"] ** 2 for b in blocks_raw) != n_g:
        raise DecompositionFailure("block dimensions do not exhaust the group algebra")

    # Canonical block order: dimension first, then the character vector.
    def sort_key(block):
        chars = np.round([np.trace(img) for img in block["images"]], 9)
        return (block["dim"], tuple(zip(chars.real, chars.imag)))

    blocks_raw.sort(key=sort_key)

    cols = []
    for block in blocks_raw:
        dim, bases = block["dim"], block["bases"]
        for a in range(dim):
            for i in range(dim):  # multiplicity equals dimension here
                cols.append(bases[i][:, a])
    unitary = np.stack(cols, axis=1)

    weights = [block["dim"] / n_g for block in blocks_raw]
    algebra = FiniteVonNeumannAlgebra(
        tuple((block["dim"], w) for block, w in zip(blocks_raw, weights))
    )
    group_images = [
        AlgebraElement(algebra, [block["images"][g] for block in blocks_raw])
        for g in range(n_g)
    ]

    _verify_decomposition(table, lefts, unitary, algebra, group_images, verify_tol)
    return GroupAlgebraDecomposition(algebra, unitary, group_images, table)


def _verify_decomposition(table, lefts, unitary, algebra, group_images, tol):
    n_g = table.order
    if operator_norm(unitary.conj().T @ unitary - np.eye(n_g)) > tol:
        raise DecompositionFailure("change of basis is not unitary")
    for g, left in enumerate(lefts):
        model = _blockdiag_action(algebra, group_images[g])
        if operator_norm(unitary.conj().T @ left @ unitary - model) > tol:
            raise DecompositionFailure(f"block model mismatch for element {g}")
        got = algebra.trace(group_images[g])
        want = 1.0 if g == table.identity else 0.0
        if abs(got - want) > 1e-10:
            raise DecompositionFailure(f"trace of element {g} is {got}, expected {want}")
        prod_err = max(
            (group_images[table.product[g, h]] - group_images[g] * group_images[h]).norm()
            for h in range(n_g)
        )
        if prod_err > tol:
            raise DecompositionFailure("block images do not respect the group product")


def _blockdiag_action(algebra, x):
    mats = []
    for (n, _), b in zip(algebra.blocks, x.block_matrices):
        mats.append(np.kron(b, np.eye(n)))  # multiplicity = dimension in C[G]
    out = np.zeros((sum(m.shape[0] for m in mats),) * 2, dtype=complex)
    at = 0
    for m in mats:
        out[at : at + m.shape[0], at : at + m.shape[1]] = m
        at += m.shape[0]
    return out
