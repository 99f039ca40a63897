"""
Degenerate nonnegative operators and their form-sum.

A :class:`DegenerateOperator` is a Hermitian PSD matrix living on a subspace
``M`` of C^d; outside ``M`` it is undefined and its product factor carries the
projector ``P_M``. In finite dimension the form domains are the whole
subspaces, so the common form domain (and its closure) is ``M_A ∩ M_B`` and
the form-sum is the compression of ``A_emb + B_emb`` to that intersection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operator_core as oc
from .errors import NotPSD, NumericalFailure, ShapeMismatch, SingularResolvent

NOT_PSD_TOL = 1e-8
FORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DegenerateOperator:
    subspace: oc.Subspace
    matrix_on_M: np.ndarray
    spectral: oc.SpectralDecomposition = field(repr=False)

    @property
    def ambient_dim(self) -> int:
        return self.subspace.ambient_dim

    def embedded(self) -> np.ndarray:
        """Ambient ``Q A_M Q^H``, extended by zero on ``M^perp``."""
        Q = self.subspace.basis
        return Q @ self.matrix_on_M @ Q.conj().T

    def sqrt_embedded(self) -> np.ndarray:
        QV = self.subspace.basis @ self.spectral.eigenvectors
        return (QV * np.sqrt(self.spectral.eigenvalues)) @ QV.conj().T

    def norm(self) -> float:
        lam = self.spectral.eigenvalues
        return float(lam[-1]) if lam.size else 0.0


def make_degenerate(S: oc.Subspace, A_M) -> DegenerateOperator:
    A_M = np.atleast_2d(np.asarray(A_M, dtype=np.complex128))
    if A_M.shape != (S.k, S.k):
        raise ShapeMismatch(f"operator is {A_M.shape}, subspace has dimension {S.k}")
    if S.k == 0:
        dec = oc.SpectralDecomposition(np.zeros(0), np.zeros((0, 0), dtype=np.complex128))
        return DegenerateOperator(S, A_M, dec)
    dec = oc.hermitian_eig(A_M)
    lam = dec.eigenvalues
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    if lam[0] < -NOT_PSD_TOL * scale:
        raise NotPSD(f"eigenvalue {lam[0]:.3e} < 0")
    if lam[0] >= 0:
        # keep the stored matrix bit-identical so instance files round-trip
        return DegenerateOperator(S, oc.symmetrize(A_M), dec)
    dec = oc.SpectralDecomposition(np.clip(lam, 0.0, None), dec.eigenvectors)
    return DegenerateOperator(S, dec.reconstruct(), dec)


@dataclass(frozen=True, eq=False)
class FormSum:
    h_prime: oc.Subspace
    p_prime: np.ndarray
    c_on_hprime: np.ndarray
    spectral: oc.SpectralDecomposition = field(repr=False)

    @property
    def ambient_dim(self) -> int:
        return self.h_prime.ambient_dim

    def embedded(self) -> np.ndarray:
        Q = self.h_prime.basis
        return Q @ self.c_on_hprime @ Q.conj().T

    def _lift(self, values) -> np.ndarray:
        """``Q' V diag(values) V^H Q'^H``; ``values`` may carry leading batch axes."""
        QV = self.h_prime.basis @ self.spectral.eigenvectors
        return np.einsum("ik,...k,jk->...ij", QV, values, QV.conj())


def form_sum(A: DegenerateOperator, B: DegenerateOperator,
             rank_tol: float = oc.DEFAULT_RANK_TOL) -> FormSum:
    if A.ambient_dim != B.ambient_dim:
        raise ShapeMismatch("operators act on different ambient spaces")
    H = oc.intersect(A.subspace, B.subspace, rank_tol=rank_tol)
    Q = H.basis
    d = H.ambient_dim
    if H.k == 0:
        dec = oc.SpectralDecomposition(np.zeros(0), np.zeros((0, 0), dtype=np.complex128))
        return FormSum(H, np.zeros((d, d), dtype=np.complex128),
                       np.zeros((0, 0), dtype=np.complex128), dec)
    C = Q.conj().T @ (A.embedded() + B.embedded()) @ Q
    C = 0.5 * (C + C.conj().T)
    # the compression must reproduce the quadratic form |A^1/2 u|^2 + |B^1/2 u|^2 on H'
    ra, rb = A.sqrt_embedded() @ Q, B.sqrt_embedded() @ Q
    form = ra.conj().T @ ra + rb.conj().T @ rb
    scale = max(1.0, A.norm() + B.norm())
    if np.max(np.abs(form - C)) > FORM_TOL * scale:
        raise NumericalFailure("form-sum compression disagrees with the quadratic form")
    dec = oc.hermitian_eig(C, clip_psd=True)
    dec = oc.SpectralDecomposition(np.clip(dec.eigenvalues, 0.0, None), dec.eigenvectors)
    return FormSum(H, oc.projector(H), C, dec)


def target_group(fs: FormSum, t) -> np.ndarray:
    """``exp(-i t C) P'`` on the ambient space; ``t`` may be an array of times."""
    t = np.asarray(t, dtype=float)
    phases = np.exp(-1j * t[..., None] * fs.spectral.eigenvalues)
    return fs._lift(phases)


def target_resolvent(fs: FormSum, t) -> np.ndarray:
    """``(I + t C)^{-1} P'``; ``t`` complex, scalar or array."""
    t = np.asarray(t, dtype=np.complex128)
    denom = 1.0 + t[..., None] * fs.spectral.eigenvalues
    if denom.size and np.min(np.abs(denom)) <= 1e-12:
        raise SingularResolvent("-1/t lies on the spectrum of C")
    return fs._lift(1.0 / denom)


# -- instance file format -----------------------------------------------------

def operator_to_json(A: DegenerateOperator) -> dict:
    return {"subspace": oc.subspace_to_json(A.subspace),
            "matrix": oc.matrix_to_json(A.matrix_on_M)}


def operator_from_json(obj: dict) -> DegenerateOperator:
    S = oc.subspace_from_json(obj["subspace"])
    m = obj["matrix"]
    if S.k == 0:
        return make_degenerate(S, np.zeros((0, 0)))
    return make_degenerate(S, oc.matrix_from_json(m))


def pair_to_json(A: DegenerateOperator, B: DegenerateOperator) -> dict:
    return {"ambient_dim": A.ambient_dim, "A": operator_to_json(A), "B": operator_to_json(B)}


def pair_from_json(obj: dict) -> tuple[DegenerateOperator, DegenerateOperator]:
    A, B = operator_from_json(obj["A"]), operator_from_json(obj["B"])
    if A.ambient_dim != int(obj["ambient_dim"]) or B.ambient_dim != A.ambient_dim:
        raise ShapeMismatch("ambient_dim does not match operator subspaces")
    return A, B
