"""
Convergence experiments for the averaged product formula.

Each function turns one convergence statement into a number that can be
tabulated: strong errors along a full ``n`` sequence, time-averaged (weak)
gaps against an integrable profile, the weighted L^2 distance between
regularized and limiting resolvents, Poisson-kernel recovery of interior
values from imaginary-axis samples, and an empirical modulus of continuity.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import operator_core as oc
from . import product as pf
from .degenerate import FormSum, target_group, target_resolvent
from .errors import GridTooNarrow, QuadratureUnderResolved

IN_SUBSPACE_TOL = 1e-8
CONTRACTION_SLACK = 1e-10


# -- quadrature -----------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    rule: str = "composite-simpson"
    interval: tuple = (-50.0, 50.0)
    points: int = 10001

    def __post_init__(self):
        if self.rule not in ("composite-simpson", "trapezoid"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.points < 3 or self.points % 2 == 0:
            raise ValueError("points must be an odd integer >= 3")
        lo, hi = self.interval
        if not hi > lo:
            raise ValueError("empty interval")

    @property
    def step(self) -> float:
        lo, hi = self.interval
        return (hi - lo) / (self.points - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(*self.interval, self.points)

    def weights(self) -> np.ndarray:
        h = self.step
        w = np.ones(self.points)
        if self.rule == "trapezoid":
            w[0] = w[-1] = 0.5
            return h * w
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return h / 3.0 * w

    def integrate(self, values, axis: int = 0):
        """Quadrature of ``values`` sampled at :meth:`nodes` along ``axis``."""
        values = np.moveaxis(np.asarray(values), axis, -1)
        return values @ self.weights()


@dataclass(frozen=True)
class WeightedMeasure:
    """``dmu = dt / (1 + t^2)`` truncated to ``[-T, T]``."""

    T: float = 50.0
    points: int = 10001
    rule: str = "composite-simpson"

    @property
    def quadrature(self) -> Quadrature:
        return Quadrature(self.rule, (-self.T, self.T), self.points)

    @staticmethod
    def density(t):
        return 1.0 / (1.0 + np.asarray(t, dtype=float) ** 2)

    @property
    def tail_bound(self) -> float:
        return 2.0 / self.T

    def mass(self) -> float:
        q = self.quadrature
        return float(q.integrate(self.density(q.nodes())))


# -- integrable profiles --------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Unit-mass L^1 profile; ``scale`` is the length the quadrature must resolve."""

    name: str
    param: float
    scale: float
    support: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "gaussian":
            s = self.param
            return np.exp(-0.5 * (t / s) ** 2) / (s * math.sqrt(2 * math.pi))
        if self.name == "box":
            T = self.param
            return np.where(np.abs(t) <= T, 0.5 / T, 0.0)
        return 1.0 / (math.pi * (1.0 + t ** 2))

    def default_quadrature(self, per_unit: int = 40) -> Quadrature:
        lo, hi = -self.support, self.support
        pts = int(math.ceil((hi - lo) * per_unit / self.scale)) + 1
        pts += 1 - pts % 2
        return Quadrature("composite-simpson", (lo, hi), pts)


def profile(name: str, param: float | None = None) -> Profile:
    if name == "gaussian":
        s = 1.0 if param is None else float(param)
        return Profile("gaussian", s, s, 8.0 * s)
    if name == "box":
        T = 1.0 if param is None else float(param)
        return Profile("box", T, 1.0, T)
    if name == "cauchy":
        return Profile("cauchy", 0.0, 1.0, 50.0 if param is None else float(param))
    raise ValueError(f"unknown profile {name!r}")


def _check_resolution(phi: Profile, q: Quadrature, per_scale: int = 20):
    if q.step > phi.scale / per_scale:
        raise QuadratureUnderResolved(
            f"step {q.step:g} exceeds {phi.name} scale {phi.scale:g} / {per_scale}")


# -- vector classification -------------------------------------------------------

def classify_vector(u, scheme: pf.ProductScheme, fs: FormSum,
                    tol: float = IN_SUBSPACE_TOL) -> str:
    """Which clause of the convergence statement covers ``u``.

    Returns ``hprime`` (u in H'), ``perp_both`` (in M_A^⊥ ∩ M_B^⊥), ``perp_a`` or
    ``perp_b`` (in a single complement), ``perp_sum`` (in M_A^⊥ + M_B^⊥) or ``other``.
    """
    u = np.asarray(u, dtype=np.complex128)
    pa = oc.orth_complement(scheme.A.subspace)
    pb = oc.orth_complement(scheme.B.subspace)
    if fs.h_prime.contains(u, tol):
        return "hprime"
    in_a, in_b = pa.contains(u, tol), pb.contains(u, tol)
    if in_a and in_b:
        return "perp_both"
    if in_a:
        return "perp_a"
    if in_b:
        return "perp_b"
    if oc.subspace_sum(pa, pb).contains(u, tol):
        return "perp_sum"
    return "other"


# -- strong convergence -------------------------------------------------------------

def strong_error(scheme: pf.ProductScheme, fs: FormSum, t: float, n: int, u) -> float:
    u = np.asarray(u, dtype=np.complex128)
    return float(np.linalg.norm(pf.F_power(scheme, t, n, u) - target_group(fs, t) @ u))


def observed_order(n_values, errors) -> float:
    """Median of ``log(e_i / e_{i+1}) / log(n_{i+1} / n_i)`` over the top half of the grid."""
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    start = len(n_values) // 2
    rates = []
    for i in range(start, len(n_values) - 1):
        if errors[i] > 0 and errors[i + 1] > 0:
            rates.append(math.log(errors[i] / errors[i + 1]) / math.log(n_values[i + 1] / n_values[i]))
    return float(np.median(rates)) if rates else float("nan")


def convergence_flag(errors, tol_conv: float = 1e-3) -> str:
    errors = np.asarray(errors, dtype=float)
    if errors[-1] < tol_conv:
        return "converged"
    tail = errors[-4:]
    if len(tail) >= 2 and np.all(np.diff(tail) < 0):
        return "converged"
    return "stalled"


@dataclass
class ConvergenceReport:
    t_values: np.ndarray
    n_values: np.ndarray
    labels: list
    classes: list
    errors: np.ndarray  # (t, n, vector)
    orders: np.ndarray  # (t, vector)
    flags: list  # [t][vector]
    bounds: np.ndarray  # (vector,) contraction ceiling ||u|| + ||P'u||
    violations: list = field(default_factory=list)

    def local_orders(self) -> np.ndarray:
        """Per-row ``log(e_{prev}/e_n)/log(n/n_prev)``; NaN in the first row or at zeros."""
        e = self.errors
        out = np.full(e.shape, np.nan)
        ratio = np.log(self.n_values[1:] / self.n_values[:-1])[None, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.log(e[:, :-1, :]) - np.log(e[:, 1:, :])
        valid = (e[:, :-1, :] > 0) & (e[:, 1:, :] > 0)
        out[:, 1:, :] = np.where(valid, lo / ratio, np.nan)
        return out

    def summary(self) -> dict:
        """Per vector class: worst final error, median observed order, stalled count."""
        out = {}
        for cls in sorted(set(self.classes)):
            idx = [i for i, c in enumerate(self.classes) if c == cls]
            orders = self.orders[:, idx]
            finite = orders[np.isfinite(orders)]
            out[cls] = {
                "vectors": len(idx),
                "max_final_error": float(np.max(self.errors[:, -1, idx])),
                "median_order": float(np.median(finite)) if finite.size else float("nan"),
                "stalled": sum(self.flags[i][j] == "stalled"
                               for i in range(len(self.t_values)) for j in idx),
            }
        return out


def _errors_at_t(scheme, fs, t, n_values, U):
    target = target_group(fs, t) @ U
    return np.linalg.norm(pf.F_power_grid(scheme, t, n_values, U) - target, axis=1)


def convergence_sweep(scheme: pf.ProductScheme, fs: FormSum, t_grid, n_grid, vectors,
                      labels=None, tol_conv: float = 1e-3, workers: int = 1) -> ConvergenceReport:
    """Strong errors ``||F(it/n)^n u - exp(-itC) P'u||`` on a (t, n, u) grid.

    Cells are computed per ``t`` (optionally on a thread pool) and assembled in
    grid order, so the result does not depend on ``workers``.
    """
    t_values = np.asarray(list(t_grid), dtype=float)
    n_values = np.asarray(list(n_grid), dtype=int)
    if t_values.size == 0 or n_values.size == 0:
        raise ValueError("grids must be nonempty")
    if np.any(np.diff(n_values) <= 0):
        raise ValueError("n grid must be strictly increasing")
    U = np.column_stack([np.asarray(v, dtype=np.complex128) for v in vectors])
    if labels is None:
        labels = [f"v{i}" for i in range(U.shape[1])]
    classes = [classify_vector(U[:, j], scheme, fs) for j in range(U.shape[1])]

    def cell(t):
        return _errors_at_t(scheme, fs, t, n_values, U)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_t = list(pool.map(cell, t_values))
    else:
        per_t = [cell(t) for t in t_values]
    errors = np.stack(per_t)

    bounds = np.linalg.norm(U, axis=0) + np.linalg.norm(fs.p_prime @ U, axis=0)
    violations = []
    over = errors > bounds[None, None, :] * (1 + CONTRACTION_SLACK) + CONTRACTION_SLACK
    for i, k, j in zip(*np.nonzero(over)):
        violations.append(("contraction", float(t_values[i]), int(n_values[k]), labels[j],
                           float(errors[i, k, j])))

    orders = np.array([[observed_order(n_values, errors[i, :, j]) for j in range(U.shape[1])]
                       for i in range(len(t_values))])
    flags = [[convergence_flag(errors[i, :, j], tol_conv) for j in range(U.shape[1])]
             for i in range(len(t_values))]
    return ConvergenceReport(t_values, n_values, list(labels), classes, errors, orders, flags,
                             bounds, violations)


# -- weak convergence ---------------------------------------------------------------

@dataclass
class WeakResult:
    lhs: np.ndarray
    rhs: np.ndarray
    gap: float


def weak_integral(scheme: pf.ProductScheme, fs: FormSum, phi: Profile, u, n: int,
                  q: Quadrature | None = None) -> WeakResult:
    """Time averages ``∫ phi(t) F(it/n)^n u dt`` and ``∫ phi(t) exp(-itC) P'u dt``."""
    q = q or phi.default_quadrature()
    _check_resolution(phi, q)
    u = np.asarray(u, dtype=np.complex128)
    ts = q.nodes()
    w = q.weights() * phi(ts)
    lhs = w @ pf.F_power(scheme, ts, n, u)
    rhs = w @ (target_group(fs, ts) @ u)
    return WeakResult(lhs, rhs, float(np.linalg.norm(lhs - rhs)))


# -- resolvent metric -----------------------------------------------------------------

def resolvent_metric(scheme: pf.ProductScheme, fs: FormSum, tau: float, u,
                     wm: WeightedMeasure | None = None, violations: list | None = None) -> float:
    """``∫ ||(I + S(it,tau))^{-1} u - (I + itC)^{-1} P'u||^2 dt/(1+t^2)`` over ``[-T, T]``.

    If ``violations`` is a list, nodes where ``||w|| > ||u||`` are appended to it.
    """
    wm = wm or WeightedMeasure()
    q = wm.quadrature
    u = np.asarray(u, dtype=np.complex128)
    ts = q.nodes()
    w = pf.resolvent_S(scheme, 1j * ts, tau, u)
    target = target_resolvent(fs, 1j * ts) @ u
    if violations is not None:
        nu = np.linalg.norm(u)
        bad = np.linalg.norm(w, axis=-1) > nu * (1 + CONTRACTION_SLACK)
        for t in ts[bad]:
            violations.append(("resolvent_contraction", float(t), float(tau)))
    sq = np.sum(np.abs(w - target) ** 2, axis=-1)
    return float(q.integrate(sq * wm.density(ts)))


# -- Poisson kernel -------------------------------------------------------------------

@dataclass
class PoissonResult:
    value: np.ndarray
    truncation_bound: float
    kernel_mass: float
    window: float


def poisson_kernel(t: float, s):
    return (t / math.pi) / (t ** 2 + np.asarray(s, dtype=float) ** 2)


def poisson_convolve(s, values, t: float, s0: float) -> PoissonResult:
    """Harmonic extension ``∫ P_t(s0 - s') Psi(is') ds'`` from boundary samples.

    ``s`` is a uniform grid, ``values[i]`` the vector ``Psi(i s[i])``. The grid must
    cover ``[s0 - W, s0 + W]`` with ``W >= 50 t``; the kernel mass outside the
    window is bounded by ``2t/(pi W)``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    s = np.asarray(s, dtype=float)
    values = np.asarray(values)
    if s.size < 3:
        raise GridTooNarrow("need at least three samples")
    h = np.diff(s)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise ValueError("sample grid is not uniform")
    W = min(s0 - s[0], s[-1] - s0)
    if W < 50 * t:
        raise GridTooNarrow(f"window half-width {W:g} < 50 t = {50 * t:g}")
    if s.size % 2:
        wts = Quadrature("composite-simpson", (s[0], s[-1]), s.size).weights()
    else:
        wts = np.full(s.size, h[0])
        wts[0] = wts[-1] = 0.5 * h[0]
    ker = poisson_kernel(t, s0 - s) * wts
    value = np.tensordot(ker, values, axes=(0, 0))
    vmax = float(np.max(np.linalg.norm(values.reshape(s.size, -1), axis=1)))
    return PoissonResult(value, (t / math.pi) * (2.0 / W) * vmax, float(np.sum(ker)), float(W))


# -- equicontinuity ----------------------------------------------------------------------

@dataclass
class EquicontinuityTable:
    t0: float
    deltas: np.ndarray
    taus: np.ndarray
    diffs: np.ndarray  # (delta, tau)

    @property
    def modulus(self) -> np.ndarray:
        return self.diffs.max(axis=1)


def equicontinuity_probe(scheme: pf.ProductScheme, t0: float, tau_grid, delta_grid, u
                         ) -> EquicontinuityTable:
    """``sup_tau ||w_{t0+delta,tau} - w_{t0,tau}||`` for each ``delta``, with ``w = (I+S(it,tau))^{-1}u``."""
    if t0 == 0:
        raise ValueError("t0 must be nonzero")
    taus = np.asarray(list(tau_grid), dtype=float)
    deltas = np.asarray(list(delta_grid), dtype=float)
    if taus.size == 0 or deltas.size == 0:
        raise ValueError("grids must be nonempty")
    diffs = np.empty((deltas.size, taus.size))
    for j, tau in enumerate(taus):
        # one batch so that delta = 0 reproduces the base point bit for bit
        w = pf.resolvent_S(scheme, 1j * np.concatenate([[t0], t0 + deltas]), tau, u)
        diffs[:, j] = np.linalg.norm(w[1:] - w[0], axis=-1)
    return EquicontinuityTable(float(t0), deltas, taus, diffs)


# -- hard invariants --------------------------------------------------------------------

def check_hard_invariants(scheme: pf.ProductScheme, vectors, rng: np.random.Generator,
                          samples: int = 50) -> list:
    """Contraction of ``F(it)``, energy identity and ``||w|| <= ||u||`` on random samples."""
    violations = []
    vectors = [np.asarray(v, dtype=np.complex128) for v in vectors]
    for _ in range(samples):
        t = float(rng.uniform(-10, 10))
        tau = float(2.0 ** rng.uniform(-10, 0))
        u = vectors[int(rng.integers(len(vectors)))]
        nu = float(np.linalg.norm(u))
        Fn = oc.opnorm(pf.F(scheme, 1j * t))
        if Fn > 1 + CONTRACTION_SLACK:
            violations.append(("F_contraction", t, Fn))
        w = pf.resolvent_S(scheme, 1j * t, tau, u)
        if np.linalg.norm(w) > nu * (1 + CONTRACTION_SLACK):
            violations.append(("resolvent_contraction", t, tau))
        res = pf.energy_residual(scheme, t, tau, u)
        if res > 1e-9 * nu ** 2 * max(1.0, 1.0 / tau):
            violations.append(("energy_residual", t, tau, res))
    return violations
