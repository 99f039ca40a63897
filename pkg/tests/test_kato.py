import math

import numpy as np
import pytest

from trotterlab import kato
from trotterlab.errors import DomainViolation, UnknownName

BUILTINS = [kato.builtin("exp_neg"), kato.builtin("resolvent"),
            kato.builtin("iterated_resolvent", 2), kato.builtin("iterated_resolvent", 8),
            kato.builtin("iterated_resolvent", 50)]


def test_evaluate_examples():
    assert kato.evaluate(kato.builtin("exp_neg"), 0) == 1.0
    assert kato.evaluate(kato.builtin("resolvent"), 1.0) == 0.5
    assert abs(kato.evaluate(kato.builtin("exp_neg"), 1j * math.pi) + 1) < 1e-15


def test_evaluate_domain():
    f = kato.builtin("exp_neg")
    with pytest.raises(DomainViolation):
        kato.evaluate(f, -1e-6)
    # tiny negative real parts are clipped onto the axis
    assert kato.evaluate(f, complex(-1e-13, 2.0)) == pytest.approx(np.exp(-2j))


def test_builtin_values():
    assert kato.builtin("exp_neg")(1.0) == pytest.approx(math.exp(-1))
    z = np.array([0.3, 2.0, 1 + 4j, 7j])
    np.testing.assert_allclose(kato.builtin("iterated_resolvent", 1)(z), kato.builtin("resolvent")(z),
                               rtol=1e-15)
    direct = (1 + 1 / 50) ** -50
    assert kato.builtin("iterated_resolvent", 50)(1.0) == pytest.approx(direct, rel=1e-13)
    assert abs(direct - math.exp(-1)) < 2e-2


def test_builtin_unknown():
    with pytest.raises(UnknownName):
        kato.builtin("sinc")
    with pytest.raises(ValueError):
        kato.builtin("iterated_resolvent", 0)


@pytest.mark.parametrize("name,expected", [("exp", "exp"), ("res", "res"), ("res^8", "res^8")])
def test_cli_names(name, expected):
    assert kato.from_cli_name(name).name == expected


@pytest.mark.parametrize("bad", ["res^", "res^0", "exp^2", "gauss"])
def test_cli_names_rejected(bad):
    with pytest.raises(UnknownName):
        kato.from_cli_name(bad)


@pytest.mark.parametrize("f", BUILTINS, ids=lambda f: f.name)
def test_builtins_validate(f):
    rep = kato.validate(f)
    assert rep.passed, rep.failures
    assert rep.max_modulus <= 1 + 1e-10
    assert abs(rep.boundary_deriv_estimate + 1) < 1e-4


@pytest.mark.parametrize("f", BUILTINS, ids=lambda f: f.name)
def test_builtin_real_axis_and_boundary(f):
    s = np.linspace(0, 100, 1001)
    vals = f(s)
    assert np.max(np.abs(vals.imag)) <= 1e-12
    assert np.all(vals.real >= -1e-12) and np.all(vals.real <= 1 + 1e-12)
    y = np.linspace(-1e3, 1e3, 2001)
    assert np.max(np.abs(f(1j * y))) <= 1 + 1e-12


def test_cos_counterexample_fails():
    rep = kato.validate(kato.from_cli_name("cos"))
    assert not rep.passed
    assert "f'(+0)=-1" in rep.failures
    assert "|f|<=1" in rep.failures
    assert abs(rep.boundary_deriv_estimate + 1) > 0.5


def test_boundary_derivative_on_sector_rays():
    f = kato.builtin("resolvent")
    for theta in np.linspace(-1.5, 1.5, 7):
        assert abs(kato.boundary_derivative(f, theta) + 1) < 1e-8


def test_validator_flags_wrong_slope():
    # e^{-2z} is bounded and real on the axis but has slope -2 at the origin
    rep = kato.validate(kato.KatoFunction("exp2", lambda z: np.exp(-2 * z)))
    assert not rep.passed
    assert set(rep.failures) == {"f'(+0)=-1"}
    assert rep.boundary_deriv_estimate == pytest.approx(-2, abs=1e-6)
