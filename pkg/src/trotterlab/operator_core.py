"""
Dense complex linear algebra used throughout the lab.

Operators are plain ``numpy`` arrays of dtype ``complex128``. Closed subspaces
of C^d are stored as an orthonormal column basis (:class:`Subspace`). The
functional calculus ``h(scale * M)`` for Hermitian positive semidefinite ``M``
goes through the spectral decomposition.

Functions
---------
:func:`hermitian_eig`
    Spectral decomposition with Hermiticity and PSD clean-up.
:func:`apply_function`
    Functional calculus ``V diag(h(scale*lambda)) V^H``.
:func:`projector`, :func:`intersect`, :func:`orth_complement`, :func:`subspace_sum`
    Subspace algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as la

from .errors import DomainViolation, NonHermitian, NumericalFailure, ShapeMismatch

HERMITIAN_TOL = 1e-12
ORTHONORMAL_TOL = 1e-12
PSD_CLIP = 1e-12
DEFAULT_RANK_TOL = 1e-8


def as_complex_matrix(M) -> np.ndarray:
    """Coerce to a finite square complex128 array."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalFailure("matrix has non-finite entries")
    return M


def opnorm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def symmetrize(M: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (M + M^H)/2, rejecting inputs whose asymmetry exceeds ``tol * ||M||``."""
    M = as_complex_matrix(M)
    asym = np.linalg.norm(M - M.conj().T)
    if asym > tol * max(np.linalg.norm(M), 1e-300):
        raise NonHermitian(f"asymmetry {asym:.3e} exceeds tolerance {tol:g}*||M||")
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def hermitian_eig(M, clip_psd: bool = False) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    With ``clip_psd`` eigenvalues in ``[-1e-12 * max(1, ||M||), 0)`` are set to zero.
    """
    H = symmetrize(M)
    try:
        lam, V = la.eigh(H)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    if clip_psd:
        scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
        lam = np.where((lam < 0) & (lam >= -PSD_CLIP * scale), 0.0, lam)
    return SpectralDecomposition(np.asarray(lam, dtype=float), V)


def apply_function(h: Callable, M, scale: complex = 1.0,
                   decomposition: SpectralDecomposition | None = None) -> np.ndarray:
    """Compute ``h(scale * M)`` for Hermitian PSD ``M``.

    ``h`` is called once on the array of points ``scale * lambda_j``. If ``h``
    advertises ``right_half_plane = True`` (as :class:`~trotterlab.kato.KatoFunction`
    does) the points must satisfy ``Re >= -1e-12``.
    """
    dec = decomposition if decomposition is not None else hermitian_eig(M, clip_psd=True)
    lam = np.clip(dec.eigenvalues, 0.0, None)
    pts = complex(scale) * lam
    if getattr(h, "right_half_plane", False) and np.any(pts.real < -PSD_CLIP):
        raise DomainViolation("evaluation point with negative real part")
    vals = np.broadcast_to(np.asarray(h(pts), dtype=np.complex128), pts.shape)
    V = dec.eigenvectors
    return (V * vals) @ V.conj().T


@dataclass(frozen=True, eq=False)
class Subspace:
    """Closed subspace of C^d given by an orthonormal column basis (d x k)."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.basis, dtype=np.complex128)
        if Q.ndim != 2:
            Q = Q.reshape(self.ambient_dim, -1)
        if Q.shape[0] != self.ambient_dim:
            raise ShapeMismatch(f"basis has {Q.shape[0]} rows, ambient_dim is {self.ambient_dim}")
        k = Q.shape[1]
        if k > self.ambient_dim:
            raise ShapeMismatch("more basis vectors than ambient dimension")
        if k and np.max(np.abs(Q.conj().T @ Q - np.eye(k))) > ORTHONORMAL_TOL:
            raise NumericalFailure("basis columns are not orthonormal")
        Q.setflags(write=False)
        object.__setattr__(self, "basis", Q)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def span(cls, vectors, rank_tol: float = DEFAULT_RANK_TOL) -> "Subspace":
        """Orthonormalize the columns of ``vectors`` (d x m), dropping dependent ones."""
        X = np.asarray(vectors, dtype=np.complex128)
        if X.ndim == 1:
            X = X[:, None]
        d = X.shape[0]
        if X.shape[1] == 0:
            return cls.zero(d)
        U, s, _ = la.svd(X, full_matrices=False)
        r = int(np.sum(s > rank_tol * max(1.0, s[0])))
        return cls(d, U[:, :r])

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(d, np.eye(d, dtype=np.complex128))

    @classmethod
    def zero(cls, d: int) -> "Subspace":
        return cls(d, np.zeros((d, 0), dtype=np.complex128))

    @classmethod
    def coordinate(cls, d: int, indices) -> "Subspace":
        return cls(d, np.eye(d, dtype=np.complex128)[:, list(indices)])

    def contains(self, u, tol: float = 1e-8) -> bool:
        u = np.asarray(u, dtype=np.complex128)
        nu = np.linalg.norm(u)
        if nu == 0:
            return True
        return np.linalg.norm(u - projector(self) @ u) < tol * nu

    def same_span(self, other: "Subspace", tol: float = 1e-10) -> bool:
        return self.k == other.k and np.max(np.abs(projector(self) - projector(other)), initial=0.0) < tol


def projector(S: Subspace) -> np.ndarray:
    Q = S.basis
    return Q @ Q.conj().T


def _check_same_ambient(S1: Subspace, S2: Subspace):
    if S1.ambient_dim != S2.ambient_dim:
        raise ShapeMismatch(f"ambient dimensions differ: {S1.ambient_dim} vs {S2.ambient_dim}")


def intersect(S1: Subspace, S2: Subspace, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Intersection of two subspaces via principal angles.

    Singular values of ``Q1^H Q2`` are the cosines of the principal angles;
    those above ``1 - rank_tol`` give common directions.
    """
    _check_same_ambient(S1, S2)
    d = S1.ambient_dim
    if S1.k == 0 or S2.k == 0:
        return Subspace.zero(d)
    U, s, Wh = la.svd(S1.basis.conj().T @ S2.basis)
    r = int(np.sum(s > 1.0 - rank_tol))
    if r == 0:
        return Subspace.zero(d)
    # average the two representations of each common direction, then re-orthonormalize
    X = 0.5 * (S1.basis @ U[:, :r] + S2.basis @ Wh.conj().T[:, :r])
    Q, _ = np.linalg.qr(X)
    return Subspace(d, Q)


def orth_complement(S: Subspace) -> Subspace:
    d = S.ambient_dim
    if S.k == 0:
        return Subspace.full(d)
    U, _, _ = la.svd(S.basis, full_matrices=True)
    return Subspace(d, U[:, S.k:])


def subspace_sum(S1: Subspace, S2: Subspace, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    _check_same_ambient(S1, S2)
    return Subspace.span(np.hstack([S1.basis, S2.basis]), rank_tol=rank_tol)


# -- JSON interchange -------------------------------------------------------

def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=np.complex128)
    return {"dim": int(M.shape[0]),
            "entries": [[float(z.real), float(z.imag)] for z in M.reshape(-1)]}


def matrix_from_json(obj: dict) -> np.ndarray:
    d = int(obj["dim"])
    entries = np.asarray(obj["entries"], dtype=float).reshape(-1, 2)
    if entries.shape[0] != d * d:
        raise ShapeMismatch(f"expected {d * d} entries, got {entries.shape[0]}")
    return as_complex_matrix((entries[:, 0] + 1j * entries[:, 1]).reshape(d, d))


def subspace_to_json(S: Subspace) -> dict:
    cols = S.basis.T.reshape(-1)  # column-major
    return {"ambient_dim": S.ambient_dim,
            "basis": [[float(z.real), float(z.imag)] for z in cols],
            "k": S.k}


def subspace_from_json(obj: dict) -> Subspace:
    d, k = int(obj["ambient_dim"]), int(obj["k"])
    entries = np.asarray(obj["basis"], dtype=float).reshape(-1, 2)
    if entries.shape[0] != d * k:
        raise ShapeMismatch(f"expected {d * k} basis entries, got {entries.shape[0]}")
    cols = (entries[:, 0] + 1j * entries[:, 1]).reshape(k, d)
    return Subspace(d, cols.T.copy())
