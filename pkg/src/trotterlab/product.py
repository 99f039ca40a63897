"""
The arithmetic-mean product formula and its regularizations.

For degenerate operators ``A`` on ``M_A`` and ``B`` on ``M_B``::

    F(t) = [ f(2tA) P_A + g(2tB) P_B ] / 2

The factor 2 inside ``f`` compensates the average, so that
``F(t) = I - t (A_emb + B_emb) + O(t^2)`` on ``M_A ∩ M_B``. Powers
``F(it/n)^n`` approximate ``exp(-itC) P'`` where ``C`` is the form-sum.

Also provided: ``S(t, tau) = (I - F(t tau)) / tau``, its accretive parts
``A_{t,tau} = (I - f(t tau A) P_A) / tau`` (and likewise for ``B``), the
regularized resolvent ``(I + S)^{-1}``, the energy identity residual and the
Chernoff exponential ``exp(n (F(it/n) - I))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .degenerate import DegenerateOperator
from .errors import DomainViolation, ShapeMismatch, SingularResolvent
from .kato import KatoFunction, evaluate

DOMAIN_TOL = 1e-12
POWER_SWITCH = 1000


@dataclass(frozen=True, eq=False)
class ProductScheme:
    A: DegenerateOperator
    B: DegenerateOperator
    f: KatoFunction
    g: KatoFunction
    # Q V products, i.e. eigenvectors of A_emb and B_emb restricted to M_A, M_B
    _qv_a: np.ndarray = field(init=False, repr=False)
    _qv_b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.A.ambient_dim != self.B.ambient_dim:
            raise ShapeMismatch("operators act on different ambient spaces")
        object.__setattr__(self, "_qv_a", self.A.subspace.basis @ self.A.spectral.eigenvectors)
        object.__setattr__(self, "_qv_b", self.B.subspace.basis @ self.B.spectral.eigenvectors)

    @property
    def dim(self) -> int:
        return self.A.ambient_dim

    def factor(self, which: str, t):
        """``f(tA) P_A`` (``which='A'``) or ``g(tB) P_B``; ``t`` scalar or array."""
        if which == "A":
            h, lam, QV = self.f, self.A.spectral.eigenvalues, self._qv_a
        else:
            h, lam, QV = self.g, self.B.spectral.eigenvalues, self._qv_b
        t = np.asarray(t, dtype=np.complex128)
        vals = evaluate(h, t[..., None] * lam) if lam.size else np.zeros(t.shape + (0,))
        vals = np.asarray(vals, dtype=np.complex128)
        return np.einsum("ik,...k,jk->...ij", QV, vals, QV.conj())


def _check_domain(t):
    t = np.asarray(t, dtype=np.complex128)
    if np.any(t.real < -DOMAIN_TOL):
        raise DomainViolation("product formula needs Re t >= 0")
    return t


def F(scheme: ProductScheme, t) -> np.ndarray:
    """Averaged factor ``F(t)``; vectorized over an array of ``t``."""
    t = _check_domain(t)
    return 0.5 * (scheme.factor("A", 2 * t) + scheme.factor("B", 2 * t))


def F_power(scheme: ProductScheme, t, n: int, u) -> np.ndarray:
    """``F(it/n)^n u`` for real ``t``.

    Repeated matrix-vector products up to ``n = 1000``, binary powering above.
    ``u`` is a vector or a (d, m) block of column vectors; ``t`` may be an
    array, in which case the result has shape ``t.shape + u.shape``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.asarray(u, dtype=np.complex128)
    U = u[:, None] if u.ndim == 1 else u
    t = np.asarray(t, dtype=float)
    Fm = F(scheme, 1j * t / n)
    if n > POWER_SWITCH:
        W = np.linalg.matrix_power(Fm, n) @ U
    else:
        W = np.broadcast_to(U, t.shape + U.shape)
        for _ in range(n):
            W = Fm @ W
    return W[..., 0] if u.ndim == 1 else W


def F_power_grid(scheme: ProductScheme, t: float, n_values, u) -> np.ndarray:
    """``F(it/n)^n u`` for every ``n`` in ``n_values`` at one real ``t``.

    Same rule per element as :func:`F_power`, batched across ``n``: the small
    exponents share one loop of stacked matrix-vector products and the large
    ones one stacked binary powering. Result has shape ``(len(n_values),) + u.shape``.
    """
    n_values = np.asarray(n_values, dtype=np.int64)
    if n_values.ndim != 1 or np.any(n_values < 1):
        raise ValueError("n values must be positive integers")
    u = np.asarray(u, dtype=np.complex128)
    U = u[:, None] if u.ndim == 1 else u
    out = np.empty((n_values.size,) + U.shape, dtype=np.complex128)

    small = np.flatnonzero(n_values <= POWER_SWITCH)
    if small.size:
        order = small[np.argsort(n_values[small], kind="stable")]
        ns = n_values[order]
        Fm = F(scheme, 1j * float(t) / ns)
        W = np.repeat(U[None], ns.size, axis=0)
        for step in range(int(ns[-1])):
            # exponents are sorted, so the rows still needing a product form a suffix
            lo = int(np.searchsorted(ns, step, side="right"))
            W[lo:] = Fm[lo:] @ W[lo:]
        out[order] = W

    big = np.flatnonzero(n_values > POWER_SWITCH)
    if big.size:
        e = n_values[big].copy()
        P = F(scheme, 1j * float(t) / e)
        R = np.repeat(np.eye(U.shape[0], dtype=np.complex128)[None], e.size, axis=0)
        while np.any(e):
            odd = (e & 1).astype(bool)
            R[odd] = R[odd] @ P[odd]
            e >>= 1
            if np.any(e):
                P = P @ P
        out[big] = R @ U
    return out[..., 0] if u.ndim == 1 else out


def S(scheme: ProductScheme, t, tau: float) -> np.ndarray:
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = _check_domain(t)
    eye = np.eye(scheme.dim)
    return (eye - F(scheme, t * tau)) / tau


def accretive_parts(scheme: ProductScheme, t, tau: float):
    """``(A_{t,tau}, B_{t,tau})``, both bounded with numerical range in Re >= 0."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = _check_domain(t)
    eye = np.eye(scheme.dim)
    a_part = (eye - scheme.factor("A", t * tau)) / tau
    b_part = (eye - scheme.factor("B", t * tau)) / tau
    return a_part, b_part


def _refined_solve(M, rhs, steps: int = 2):
    """Dense LU solve with iterative refinement; ``M`` may carry batch axes."""
    if M.ndim == 2:
        lu = la.lu_factor(M, check_finite=False)
        x = la.lu_solve(lu, rhs)
        for _ in range(steps):
            x = x + la.lu_solve(lu, rhs - M @ x)
        return x
    x = np.linalg.solve(M, rhs[..., None])[..., 0]
    for _ in range(steps):
        r = rhs - np.einsum("...ij,...j->...i", M, x)
        x = x + np.linalg.solve(M, r[..., None])[..., 0]
    return x


def resolvent_S(scheme: ProductScheme, t, tau: float, u) -> np.ndarray:
    """``w = (I + S(t, tau))^{-1} u``; ``t`` complex, scalar or array."""
    u = np.asarray(u, dtype=np.complex128)
    Sm = S(scheme, t, tau)
    M = np.eye(scheme.dim) + Sm
    rhs = np.broadcast_to(u, Sm.shape[:-1]).copy()
    try:
        with np.errstate(all="raise"):
            w = _refined_solve(M, rhs)
    except (np.linalg.LinAlgError, la.LinAlgError, FloatingPointError) as exc:
        raise SingularResolvent(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise SingularResolvent("non-finite solution")
    return w


def energy_residual(scheme: ProductScheme, t: float, tau: float, u) -> float:
    """Residual of ``(u, w) = |w|^2 + (A_{it,2tau} w, w) + (B_{it,2tau} w, w)``.

    ``w = (I + S(it, tau))^{-1} u``; inner products are linear in the first slot.
    """
    u = np.asarray(u, dtype=np.complex128)
    z = 1j * float(t)
    w = resolvent_S(scheme, z, tau, u)
    a_part, b_part = accretive_parts(scheme, z, 2 * tau)
    lhs = np.vdot(w, u)
    rhs = np.vdot(w, w) + np.vdot(w, a_part @ w) + np.vdot(w, b_part @ w)
    return float(abs(lhs - rhs))


def chernoff_exp(scheme: ProductScheme, t: float, n: int, u) -> np.ndarray:
    """``exp(n (F(it/n) - I)) u`` via scaling-and-squaring."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.asarray(u, dtype=np.complex128)
    X = n * (F(scheme, 1j * float(t) / n) - np.eye(scheme.dim))
    return la.expm(X) @ u
