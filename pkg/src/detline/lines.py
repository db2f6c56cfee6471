"""Determinant lines of Hilbertian modules.

The determinant line of a module is one-dimensional and oriented, so an
element is stored as a single positive coordinate against the symbol of the
module's reference scalar product.  Re-expressing against another admissible
product multiplies the coordinate by Det_tau(A)^(-1/2), where A is the
transition operator of the pair.  All constructions below (pushforward,
direct sums, exact sequences, graded assembly) reduce to determinants of
explicit transition operators; positivity of every coordinate is enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import nullspace, operator_norm, orthonormal_range
from .determinant import fk_det_spectral
from .errors import (
    AlgebraMismatch,
    DuplicateDegree,
    NotExact,
    NotIso,
    ValidationError,
)
from .modules import (
    CommutantOperator,
    HilbertianModule,
    ModuleMorphism,
    direct_sum,
    require_admissible,
)

EXACTNESS_TOL = 1e-8


@dataclass(frozen=True)
class DetLineElement:
    """A positive coordinate against the module reference product.

    origin records which construction produced the element; it carries no
    mathematical content.
    """

    module: HilbertianModule
    coefficient: float
    origin: str = "reference"

    def __post_init__(self):
        c = float(self.coefficient)
        if not (math.isfinite(c) and c > 0.0):
            raise ValidationError(f"determinant line coordinate must be positive, got {c!r}")
        object.__setattr__(self, "coefficient", c)

    def __mul__(self, scalar):
        s = float(scalar)
        if not s > 0.0:
            raise ValidationError("determinant line elements scale by positive reals only")
        return DetLineElement(self.module, s * self.coefficient, "scaled")

    __rmul__ = __mul__

    def is_close_to(self, other: "DetLineElement", tol: float = 1e-10) -> bool:
        if not self.module.is_same_space(other.module):
            return False
        return abs(self.coefficient - other.coefficient) <= tol * max(
            self.coefficient, other.coefficient
        )


def reference_element(module: HilbertianModule) -> DetLineElement:
    return DetLineElement(module, 1.0, "reference")


def _transition_det(module, blocks):
    """Det of the reference-positive transition with the given blocks."""
    op = CommutantOperator(module, blocks)
    return fk_det_spectral(module, op)


def _as_carrier_matrix(module, gram):
    if isinstance(gram, ModuleMorphism):
        return gram.to_matrix()
    return gram


def element_from_product(module: HilbertianModule, gram) -> DetLineElement:
    """The element determined by an admissible scalar product."""
    transition = require_admissible(module, _as_carrier_matrix(module, gram))
    det = fk_det_spectral(module, transition)
    return DetLineElement(module, det.value ** -0.5, "product")


def element_from_extended_product(module: HilbertianModule, gram) -> DetLineElement:
    """Element of a positive injective product that need not be admissible.

    The transition against the reference only has to be injective with a
    convergent log integral; here that means no spectral mass at zero, and
    fk_det_spectral refuses (KernelDetected) otherwise.  For admissible
    products this agrees with element_from_product.
    """
    if isinstance(gram, CommutantOperator):
        op = gram
    else:
        op = CommutantOperator.from_matrix(module, gram)
    ref = module.reference_gram
    blocks = [gi @ b for gi, b in zip(ref.inv_blocks, op.blocks)]
    det = _transition_det(module, blocks)
    return DetLineElement(module, det.value ** -0.5, "extended_product")


def pushforward(f: ModuleMorphism, e: DetLineElement) -> DetLineElement:
    """Image of e under the canonical isomorphism det(M) -> det(N) of an
    A-linear isomorphism f: M -> N.

    The reference product of M pushes to the product ⟨f^{-1}v, f^{-1}w⟩ on
    N, whose transition against N's reference is G_N^{-1} f^{-H} G_M f^{-1};
    its determinant to the -1/2 rescales the coordinate.  For an
    automorphism with matching references this is multiplication by
    Det_tau(f).
    """
    if not e.module.is_same_space(f.source):
        raise AlgebraMismatch("element does not live on the source of the morphism")
    if not f.is_iso():
        raise NotIso("pushforward needs an isomorphism")
    finv = f.inverse()
    gm = f.source.reference_gram
    gn = f.target.reference_gram
    blocks = [
        gni @ fi.conj().T @ gmb @ fi
        for gni, fi, gmb in zip(gn.inv_blocks, finv.blocks, gm.blocks)
    ]
    det = _transition_det(f.target, blocks)
    return DetLineElement(f.target, e.coefficient * det.value ** -0.5, "pushforward")


def tensor_sum(
    e_m: DetLineElement, e_n: DetLineElement, total: HilbertianModule | None = None
) -> DetLineElement:
    """The image of e_m (x) e_n under det(M) (x) det(N) -> det(M + N).

    The direct sum carries the block sum of the reference products, so the
    coordinate simply multiplies.  Pass total to target an existing copy of
    the direct sum (it must have the same layout).
    """
    if e_m.module.algebra != e_n.module.algebra:
        raise AlgebraMismatch("summands live over different algebras")
    summed = direct_sum(e_m.module, e_n.module)
    if total is not None:
        if not total.is_same_space(summed):
            raise AlgebraMismatch("total module does not match the direct sum layout")
        summed = total
    return DetLineElement(summed, e_m.coefficient * e_n.coefficient, "tensor_sum")


def _check_exact(alpha: ModuleMorphism, beta: ModuleMorphism, tol: float):
    """alpha injective, beta surjective, im(alpha) = ker(beta) blockwise."""
    if not beta.source.is_same_space(alpha.target):
        raise AlgebraMismatch("the two maps do not share the middle module")
    scale = max(alpha.norm() * beta.norm(), 1.0)
    for k, (a, b) in enumerate(zip(alpha.blocks, beta.blocks)):
        if a.shape[1] and np.linalg.matrix_rank(a, tol=tol * max(1.0, operator_norm(a))) < a.shape[1]:
            raise NotExact(f"first map fails to be injective in block {k}")
        if b.shape[0] and np.linalg.matrix_rank(b, tol=tol * max(1.0, operator_norm(b))) < b.shape[0]:
            raise NotExact(f"second map fails to be surjective in block {k}")
        if a.size and b.size and operator_norm(b @ a) > tol * scale:
            raise NotExact(f"composite is nonzero in block {k}")
        image = orthonormal_range(a)
        kernel = nullspace(b)
        if image.shape[1] != kernel.shape[1]:
            raise NotExact(f"rank mismatch in block {k}: middle homology is nonzero")
        if image.size:
            gap = operator_norm(image @ image.conj().T - kernel @ kernel.conj().T)
            if gap > tol:
                raise NotExact(f"image and kernel subspaces differ in block {k} (gap {gap:.2e})")


def exact_sequence_iso(
    alpha: ModuleMorphism,
    beta: ModuleMorphism,
    e_prime: DetLineElement,
    e_second: DetLineElement,
    retraction: ModuleMorphism | None = None,
    tol: float = EXACTNESS_TOL,
) -> DetLineElement:
    """Canonical isomorphism det(M') (x) det(M'') -> det(M) of a short exact
    sequence 0 -> M' -a-> M -b-> M'' -> 0.

    Builds the product ⟨r v, r w⟩' + ⟨b v, b w⟩'' on M, where r is a
    retraction of alpha (by default the orthogonal one for the reference
    product of M); the element of that product times the incoming
    coordinates is the image.  The result does not depend on the retraction:
    two retractions differ by gamma∘beta, an upper-triangular change with
    unit determinant.
    """
    _check_exact(alpha, beta, tol)
    m = alpha.target
    if not e_prime.module.is_same_space(alpha.source):
        raise AlgebraMismatch("first element does not live on the sub module")
    if not e_second.module.is_same_space(beta.target):
        raise AlgebraMismatch("second element does not live on the quotient module")

    if retraction is None:
        # orthogonal retraction for M's reference: project onto im(alpha),
        # then invert alpha on its image
        gm = m.reference_gram
        r_blocks = []
        for a, g in zip(alpha.blocks, gm.blocks):
            if a.shape[1] == 0:
                r_blocks.append(np.zeros((0, a.shape[0]), dtype=complex))
                continue
            gram_a = a.conj().T @ g @ a
            r_blocks.append(np.linalg.solve(gram_a, a.conj().T @ g))
        retraction = ModuleMorphism(m, alpha.source, r_blocks)
    else:
        if not (
            retraction.source.is_same_space(m)
            and retraction.target.is_same_space(alpha.source)
        ):
            raise AlgebraMismatch("retraction endpoints do not match the sequence")
        resid = (retraction @ alpha) - CommutantOperator.identity(alpha.source)
        if resid.norm() > tol * max(1.0, retraction.norm() * alpha.norm()):
            raise ValidationError("retraction does not split the first map")

    g_prime = alpha.source.reference_gram
    g_second = beta.target.reference_gram
    blocks = []
    for gi, r, gp, b, gs in zip(
        m.reference_gram.inv_blocks, retraction.blocks, g_prime.blocks, beta.blocks, g_second.blocks
    ):
        combined = r.conj().T @ gp @ r + b.conj().T @ gs @ b
        blocks.append(gi @ combined)
    det = _transition_det(m, blocks)
    coeff = det.value ** -0.5 * e_prime.coefficient * e_second.coefficient
    return DetLineElement(m, coeff, "exact_sequence")


@dataclass(frozen=True)
class GradedDetLineElement:
    """Entries (degree, element); the degree-i line enters the combined
    coordinate with exponent (-1)^i."""

    entries: tuple

    def __post_init__(self):
        seen = set()
        for degree, element in self.entries:
            if degree in seen:
                raise DuplicateDegree(f"degree {degree} appears twice")
            seen.add(degree)
            if not isinstance(element, DetLineElement):
                raise ValidationError("graded entries must hold determinant line elements")
        object.__setattr__(
            self, "entries", tuple(sorted(self.entries, key=lambda de: de[0]))
        )

    @property
    def coordinate(self) -> float:
        out = 1.0
        for degree, element in self.entries:
            out *= element.coefficient ** (1 if degree % 2 == 0 else -1)
        return out

    def shift(self, k: int) -> "GradedDetLineElement":
        return GradedDetLineElement(tuple((d + k, e) for d, e in self.entries))

    def dual(self) -> "GradedDetLineElement":
        flipped = tuple(
            (d, DetLineElement(e.module, 1.0 / e.coefficient, "dual"))
            for d, e in self.entries
        )
        return GradedDetLineElement(flipped)


def graded_assemble(entries) -> GradedDetLineElement:
    """Assemble degree-indexed elements into one graded element."""
    return GradedDetLineElement(tuple(entries))
