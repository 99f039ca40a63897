"""
Kato-functions: the scalar factors ``f`` and ``g`` of the averaged product.

A Kato-function is bounded and holomorphic on the open right half-plane with
``|f| <= 1``, ``f(0) = 1``, ``f'(+0) = -1`` and ``0 <= f(s) <= 1`` for real
``s > 0``. Holomorphy is not checked numerically: the builtins are holomorphic
by construction and user-supplied callables are taken on trust.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainViolation, UnknownName

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class KatoFunction:
    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    right_half_plane = True

    def __call__(self, z):
        return evaluate(self, z)


def evaluate(f: KatoFunction, z):
    """Evaluate ``f`` at ``z`` (scalar or array) in the closed right half-plane.

    Points with ``-1e-12 <= Re z < 0`` are clipped onto the imaginary axis.
    """
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z.real < -DOMAIN_TOL):
        raise DomainViolation(f"{f.name}: evaluation point with Re z < 0")
    z = np.where(z.real < 0, 1j * z.imag, z)
    out = np.asarray(f.func(z), dtype=np.complex128)
    return complex(out) if out.ndim == 0 else out


def _exp_neg(z):
    return np.exp(-z)


def _resolvent(z):
    return 1.0 / (1.0 + z)


def _iterated_resolvent(k: int):
    def h(z):
        return (1.0 + z / k) ** (-k)
    return h


def builtin(name: str, k: int | None = None) -> KatoFunction:
    """Builtin Kato-function: ``exp_neg``, ``resolvent`` or ``iterated_resolvent`` (needs ``k``)."""
    if name == "exp_neg":
        return KatoFunction("exp", _exp_neg)
    if name == "resolvent":
        return KatoFunction("res", _resolvent)
    if name == "iterated_resolvent":
        if k is None or int(k) != k or k < 1:
            raise ValueError("iterated_resolvent needs an integer k >= 1")
        return KatoFunction(f"res^{int(k)}", _iterated_resolvent(int(k)))
    raise UnknownName(name)


# Functions that deliberately violate the conditions; used to exercise the validator.
COUNTEREXAMPLES = {
    "cos": lambda z: np.cos(z),
}

_RES_POWER = re.compile(r"^res\^(\d+)$")


def from_cli_name(name: str) -> KatoFunction:
    """Resolve the CLI spelling: ``exp``, ``res``, ``res^k``; ``cos`` as a counterexample."""
    if name == "exp":
        return builtin("exp_neg")
    if name == "res":
        return builtin("resolvent")
    m = _RES_POWER.match(name)
    if m:
        k = int(m.group(1))
        if k < 1:
            raise UnknownName(name)
        return builtin("iterated_resolvent", k)
    if name in COUNTEREXAMPLES:
        return KatoFunction(name, COUNTEREXAMPLES[name])
    raise UnknownName(name)


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class HalfPlaneGrid:
    """Sample points for :func:`validate`.

    Sector rays ``r e^{i theta}`` cover moduli ``[r_min, r_max]`` and angles
    ``|theta| <= pi/2 - margin``; the real and imaginary axes are sampled separately.
    """

    r_min: float = 1e-6
    r_max: float = 1e2
    n_r: int = 81
    margin: float = 0.05
    n_theta: int = 21
    real_max: float = 100.0
    n_real: int = 401
    imag_max: float = 1e3
    n_imag: int = 401
    deriv_radii: tuple = (1e-3, 1e-4, 1e-5)

    def __post_init__(self):
        if min(self.n_r, self.n_theta, self.n_real, self.n_imag) < 1:
            raise ValueError("grid must be nonempty")

    def angles(self):
        half = np.pi / 2 - self.margin
        return np.linspace(-half, half, self.n_theta)

    def sector_points(self):
        r = np.geomspace(self.r_min, self.r_max, self.n_r)
        return (r[None, :] * np.exp(1j * self.angles())[:, None]).ravel()

    def real_points(self):
        return np.linspace(0.0, self.real_max, self.n_real)[1:]

    def imag_points(self):
        return 1j * np.linspace(-self.imag_max, self.imag_max, self.n_imag)


@dataclass
class ValidationReport:
    passed: bool
    max_modulus: float
    boundary_deriv_estimate: complex
    worst_violation: tuple | None  # (condition id, sample point, value)
    failures: dict = field(default_factory=dict)


MODULUS_TOL = 1e-10
DERIV_TOL = 1e-4
REAL_TOL = 1e-12


def _richardson(values, ratio):
    """Richardson table for a quantity with an error expansion in powers of r."""
    row = list(values)
    p = 1
    while len(row) > 1:
        fac = ratio ** p
        row = [(fac * row[i + 1] - row[i]) / (fac - 1) for i in range(len(row) - 1)]
        p += 1
    return row[0]


def boundary_derivative(f: KatoFunction, theta: float, radii=(1e-3, 1e-4, 1e-5)) -> complex:
    """Estimate ``lim (f(z)-1)/z`` along the ray ``arg z = theta``."""
    radii = sorted(radii, reverse=True)
    zs = np.asarray(radii) * np.exp(1j * theta)
    quot = (np.asarray(evaluate(f, zs)) - 1.0) / zs
    ratio = radii[0] / radii[1]
    return complex(_richardson(quot, ratio))


def validate(f: KatoFunction, grid: HalfPlaneGrid | None = None) -> ValidationReport:
    """Numerically check the admissibility conditions of ``f``; failures are reported."""
    grid = grid or HalfPlaneGrid()
    failures = {}

    def record(cond, point, value, excess):
        if cond not in failures or excess > failures[cond][3]:
            failures[cond] = (cond, complex(point), value, excess)

    f0 = evaluate(f, 0.0)
    if f0 != 1.0:
        record("f(0)=1", 0.0, f0, abs(f0 - 1.0))

    pts = np.concatenate([grid.sector_points(), grid.imag_points(), grid.real_points()])
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(evaluate(f, pts))
    mods = np.abs(vals)
    mods = np.where(np.isfinite(mods), mods, np.inf)
    i = int(np.argmax(mods))
    max_modulus = float(mods[i])
    if max_modulus > 1.0 + MODULUS_TOL:
        record("|f|<=1", pts[i], complex(vals[i]), max_modulus - 1.0)

    s = grid.real_points()
    fs = np.asarray(evaluate(f, s))
    bad_im = np.abs(fs.imag)
    j = int(np.argmax(bad_im))
    if bad_im[j] > REAL_TOL:
        record("f(s) real", s[j], complex(fs[j]), float(bad_im[j]))
    excess = np.maximum(-fs.real, fs.real - 1.0)
    j = int(np.argmax(excess))
    if excess[j] > REAL_TOL:
        record("0<=f(s)<=1", s[j], complex(fs[j]), float(excess[j]))

    worst_est, worst_dev = None, -1.0
    for theta in grid.angles():
        est = boundary_derivative(f, theta, grid.deriv_radii)
        dev = abs(est + 1.0)
        if not np.isfinite(dev):
            dev = np.inf
        if dev > worst_dev:
            worst_est, worst_dev = est, dev
        if dev >= DERIV_TOL:
            record("f'(+0)=-1", np.exp(1j * theta) * min(grid.deriv_radii), est, dev)

    worst = None
    if failures:
        worst = max(failures.values(), key=lambda x: x[3])[:3]
    return ValidationReport(
        passed=not failures,
        max_modulus=max_modulus,
        boundary_deriv_estimate=complex(worst_est),
        worst_violation=worst,
        failures={k: v[:3] for k, v in failures.items()},
    )
