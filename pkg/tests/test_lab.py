import math

import numpy as np
import pytest

from trotterlab import lab
from trotterlab import operator_core as oc
from trotterlab import product as pf
from trotterlab.degenerate import make_degenerate, target_resolvent
from trotterlab.errors import GridTooNarrow, QuadratureUnderResolved

from conftest import random_pair, scalar_scheme, scheme_and_fs, unit


def scalar_resolvent_oracle(a, b, t, tau):
    """Boundary resolvent of the scalar scheme and its limit, written out by hand."""
    s = (1 - (np.exp(-2j * t * tau * a) + np.exp(-2j * t * tau * b)) / 2) / tau
    return 1 / (1 + s), 1 / (1 + 1j * t * (a + b))


# -- quadrature and measure --------------------------------------------------------

def test_default_quadrature_integrates_cauchy_density():
    q = lab.Quadrature()
    val = q.integrate(1 / (1 + q.nodes() ** 2))
    assert abs(val - 2 * math.atan(50)) < 1e-8


def test_trapezoid_rule():
    q = lab.Quadrature("trapezoid", (0.0, 1.0), 1001)
    assert abs(q.integrate(q.nodes() ** 2) - 1 / 3) < 1e-6


def test_quadrature_rejects_even_points():
    with pytest.raises(ValueError):
        lab.Quadrature(points=10)


def test_weighted_measure_mass():
    wm = lab.WeightedMeasure()
    assert math.pi - 2 / wm.T < wm.mass() < math.pi
    assert wm.tail_bound == pytest.approx(0.04)


@pytest.mark.parametrize("name,param", [("gaussian", 1.0), ("gaussian", 0.3), ("box", 2.0),
                                        ("cauchy", None)])
def test_profiles_unit_mass(name, param):
    phi = lab.profile(name, param)
    q = phi.default_quadrature()
    tol = 2 / (math.pi * 50) if name == "cauchy" else 1e-3 if name == "box" else 1e-10
    assert abs(q.integrate(phi(q.nodes())) - 1) < tol


def test_under_resolved_quadrature(degenerate_c4):
    sch, fs = degenerate_c4
    with pytest.raises(QuadratureUnderResolved):
        lab.weak_integral(sch, fs, lab.profile("gaussian", 1.0), np.ones(4), 4,
                          lab.Quadrature(interval=(-8, 8), points=101))


# -- classification ---------------------------------------------------------------------

def test_classify_vectors(degenerate_c4):
    sch, fs = degenerate_c4
    pa = oc.orth_complement(sch.A.subspace)
    pb = oc.orth_complement(sch.B.subspace)
    assert lab.classify_vector(fs.h_prime.basis[:, 0], sch, fs) == "hprime"
    assert lab.classify_vector(pa.basis[:, 0], sch, fs) == "perp_a"
    assert lab.classify_vector(pb.basis[:, 0], sch, fs) == "perp_b"
    assert lab.classify_vector(pa.basis[:, 0] + pb.basis[:, 0], sch, fs) == "perp_sum"
    # in finite dimension H' + M_A^⊥ + M_B^⊥ is the whole space, so 'other' means mixed
    assert lab.classify_vector(fs.h_prime.basis[:, 0] + pa.basis[:, 0], sch, fs) == "other"
    total = oc.subspace_sum(fs.h_prime, oc.subspace_sum(pa, pb))
    assert total.k == 4


# -- strong convergence ---------------------------------------------------------------------

def test_strong_error_exact_scalar():
    sch, fs = scalar_scheme(0.7, 0.7)
    for n in (1, 2, 100, 3000):
        assert lab.strong_error(sch, fs, 1.7, n, np.array([1.0 + 0j])) < 1e-12


def test_strong_error_t_zero_fixes_hprime(degenerate_c4):
    sch, fs = degenerate_c4
    u = fs.h_prime.basis @ np.array([0.6, 0.8j])
    # zero up to roundoff accumulated over n projector applications
    for n in (1, 8, 2048):
        assert lab.strong_error(sch, fs, 0.0, n, u) < 1e-12


def test_strong_error_first_order_nondegenerate(rng):
    A, B = random_pair(rng, 8, 8, 8)
    sch, fs = scheme_and_fs(A, B)
    u = unit(rng, 8)
    e512 = lab.strong_error(sch, fs, 1.0, 512, u)
    e1024 = lab.strong_error(sch, fs, 1.0, 1024, u)
    assert e1024 < e512
    assert 1.6 <= e512 / e1024 <= 2.4


def test_observed_order_and_flags():
    ns = [2 ** k for k in range(8)]
    errs = [1.0 / n for n in ns]
    assert lab.observed_order(ns, errs) == pytest.approx(1.0)
    assert lab.convergence_flag(errs) == "converged"
    assert lab.convergence_flag([0.5, 0.5, 0.5, 0.5]) == "stalled"
    assert math.isnan(lab.observed_order(ns, [0.0] * 8))


def test_sweep_zero_operators_all_zero():
    S = oc.Subspace.full(3)
    z = make_degenerate(S, np.zeros((3, 3)))
    sch, fs = scheme_and_fs(z, z)
    rep = lab.convergence_sweep(sch, fs, [0.5, 1.0], [1, 2, 4], [np.array([1, 1j, 0])])
    assert not np.any(rep.errors)
    assert rep.classes == ["hprime"]


def test_sweep_common_complement_vector():
    A = make_degenerate(oc.Subspace.coordinate(3, [0]), [[1.0]])
    B = make_degenerate(oc.Subspace.coordinate(3, [1]), [[2.0]])
    sch, fs = scheme_and_fs(A, B)
    rep = lab.convergence_sweep(sch, fs, [1.0], [1, 2, 4, 8], [np.array([0, 0, 1.0])])
    assert rep.classes == ["perp_both"]
    assert not np.any(rep.errors)


def test_sweep_degenerate_monotone_and_bounded(degenerate_c4):
    sch, fs = degenerate_c4
    u = fs.h_prime.basis @ np.array([1.0, 1j]) / math.sqrt(2)
    ns = [2 ** k for k in range(4, 13)]
    rep = lab.convergence_sweep(sch, fs, [0.5, 1.0, 2.0], ns, [u])
    assert not rep.violations
    tail = rep.errors[:, ns.index(64):, 0]
    # recorded behaviour on this instance: monotone beyond n = 64
    assert np.all(np.diff(tail, axis=1) < 0)
    assert all(f == "converged" for row in rep.flags for f in row)
    assert rep.summary()["hprime"]["median_order"] == pytest.approx(1.0, abs=0.1)


def test_sweep_worker_independent(degenerate_c4, rng):
    sch, fs = degenerate_c4
    vs = [unit(rng, 4) for _ in range(3)]
    r1 = lab.convergence_sweep(sch, fs, [0.5, 1.0, 2.0], [4, 16, 64], vs, workers=1)
    r2 = lab.convergence_sweep(sch, fs, [0.5, 1.0, 2.0], [4, 16, 64], vs, workers=3)
    np.testing.assert_array_equal(r1.errors, r2.errors)


# -- weak convergence -----------------------------------------------------------------------

def test_weak_zero_on_common_complement():
    A = make_degenerate(oc.Subspace.coordinate(3, [0]), [[1.0]])
    B = make_degenerate(oc.Subspace.coordinate(3, [1]), [[2.0]])
    sch, fs = scheme_and_fs(A, B)
    for name in ("gaussian", "box", "cauchy"):
        res = lab.weak_integral(sch, fs, lab.profile(name), np.array([0, 0, 1.0]), 3)
        assert res.gap == 0.0 and not np.any(res.lhs) and not np.any(res.rhs)


def test_weak_exact_scalar():
    sch, fs = scalar_scheme(0.9, 0.9)
    res = lab.weak_integral(sch, fs, lab.profile("gaussian", 1.0), np.array([1.0 + 0j]), 64)
    assert res.gap < 1e-8
    # and both sides agree with the characteristic function of the gaussian
    assert res.rhs[0] == pytest.approx(np.exp(-0.5 * 1.8 ** 2), abs=1e-8)


def test_weak_gap_decreasing(degenerate_c4, rng):
    sch, fs = degenerate_c4
    u = unit(rng, 4)
    phi = lab.profile("gaussian", 1.0)
    gaps = [lab.weak_integral(sch, fs, phi, u, 2 ** k).gap for k in range(4, 13)]
    assert np.all(np.diff(gaps) < 0)
    ceiling = 2 * np.linalg.norm(u)
    assert max(gaps) <= ceiling


# -- resolvent metric ---------------------------------------------------------------------

def test_metric_zero_case():
    z = make_degenerate(oc.Subspace.full(2), np.zeros((2, 2)))
    sch, fs = scheme_and_fs(z, z)
    assert lab.resolvent_metric(sch, fs, 0.1, np.array([1.0, 1j])) == 0.0


def test_metric_scalar_against_hand_oracle():
    sch, fs = scalar_scheme(1.0, 2.0)
    wm = lab.WeightedMeasure()
    q = wm.quadrature
    ts = q.nodes()
    for tau in (0.1, 0.01):
        w, w0 = scalar_resolvent_oracle(1.0, 2.0, ts, tau)
        oracle = q.integrate(np.abs(w - w0) ** 2 / (1 + ts ** 2))
        got = lab.resolvent_metric(sch, fs, tau, np.array([1.0 + 0j]), wm)
        assert got == pytest.approx(oracle, rel=1e-10)
    assert lab.resolvent_metric(sch, fs, 0.01, np.array([1.0])) < lab.resolvent_metric(sch, fs, 0.1, np.array([1.0]))


def test_metric_decreases_on_random_instance(degenerate_c4, rng):
    sch, fs = degenerate_c4
    u = unit(rng, 4)
    vals = [lab.resolvent_metric(sch, fs, 2.0 ** -k, u) for k in range(1, 11)]
    assert vals[-1] < 1e-2
    assert all(b <= 1.5 * a for a, b in zip(vals, vals[1:]))


def test_metric_reports_contraction_violations(degenerate_c4, rng):
    sch, fs = degenerate_c4
    viol = []
    lab.resolvent_metric(sch, fs, 0.05, unit(rng, 4), violations=viol)
    assert viol == []


# -- Poisson kernel -------------------------------------------------------------------------

def test_poisson_constant_function():
    t, s0, W = 0.5, 0.0, 40.0
    s = np.linspace(s0 - W, s0 + W, 8001)
    v = np.array([1.0, -2j])
    res = lab.poisson_convolve(s, np.tile(v, (s.size, 1)), t, s0)
    assert np.linalg.norm(res.value - v) <= res.truncation_bound
    assert 1 - 2 * t / (math.pi * W) * 1.1 <= res.kernel_mass <= 1


def test_poisson_resolvent_function():
    t, s0 = 0.5, 0.0
    s = np.linspace(-40, 40, 8001)
    v = np.array([1.0, 1j])
    samples = (1 / (1 + 1j * s))[:, None] * v
    res = lab.poisson_convolve(s, samples, t, s0)
    assert np.linalg.norm(res.value - v / 1.5) < 1e-6 + res.truncation_bound


def test_poisson_recovers_regularized_resolvent(degenerate_c4, rng):
    sch, fs = degenerate_c4
    u = unit(rng, 4)
    z = 0.3 + 0.2j
    s = z.imag + 0.01 * np.arange(-4000, 4001)
    vals = pf.resolvent_S(sch, 1j * s, 0.1, u)
    res = lab.poisson_convolve(s, vals, z.real, z.imag)
    direct = pf.resolvent_S(sch, z, 0.1, u)
    assert np.linalg.norm(res.value - direct) < 1e-4 + res.truncation_bound


def test_poisson_grid_too_narrow():
    s = np.linspace(-5, 5, 101)
    with pytest.raises(GridTooNarrow):
        lab.poisson_convolve(s, np.ones((101, 1)), 0.5, 0.0)


def test_poisson_kernel_mass_invariant():
    for t in (0.1, 0.3, 0.7):
        W = 50 * t
        s = np.linspace(-W, W, 20001)
        res = lab.poisson_convolve(s, np.ones((s.size, 1)), t, 0.0)
        assert 1 - 2 * t / (math.pi * W) * 1.1 <= res.kernel_mass <= 1


# -- equicontinuity -----------------------------------------------------------------------

def test_equicontinuity_zero_delta(degenerate_c4, rng):
    sch, _ = degenerate_c4
    tab = lab.equicontinuity_probe(sch, 1.0, [0.1, 0.01], [0.0], unit(rng, 4))
    assert not np.any(tab.diffs)


def test_equicontinuity_scalar_exponential():
    sch, _ = scalar_scheme(1.0, 2.0)
    taus = [1e-1, 1e-2, 1e-3, 1e-4]
    deltas = [1e-1, 1e-2, 1e-3, 1e-4]
    tab = lab.equicontinuity_probe(sch, 1.0, taus, deltas, np.array([1.0 + 0j]))
    mod = tab.modulus
    assert np.all(np.diff(mod) < 0)
    assert mod[-1] < 1e-3
    # hand oracle for one cell
    w1, _ = scalar_resolvent_oracle(1.0, 2.0, 1.0 + 1e-2, 1e-3)
    w0, _ = scalar_resolvent_oracle(1.0, 2.0, 1.0, 1e-3)
    assert tab.diffs[1, 2] == pytest.approx(abs(w1 - w0), rel=1e-9)


def test_equicontinuity_requires_nonzero_t0(degenerate_c4):
    sch, _ = degenerate_c4
    with pytest.raises(ValueError):
        lab.equicontinuity_probe(sch, 0.0, [0.1], [0.1], np.ones(4))


# -- hard invariants ------------------------------------------------------------------------

def test_hard_invariants_hold(degenerate_c4, rng):
    sch, _ = degenerate_c4
    assert lab.check_hard_invariants(sch, [unit(rng, 4)], rng, samples=100) == []


def test_target_resolvent_used_by_metric_is_contractive(degenerate_c4):
    _, fs = degenerate_c4
    for t in np.linspace(-50, 50, 11):
        assert np.linalg.norm(target_resolvent(fs, 1j * t), 2) <= 1 + 1e-12
