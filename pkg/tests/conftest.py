import numpy as np
import pytest
import scipy.linalg as sla

from trotterlab import kato
from trotterlab import operator_core as oc
from trotterlab.cli import instances as inst
from trotterlab.degenerate import form_sum, make_degenerate
from trotterlab.product import ProductScheme

EXP = kato.builtin("exp_neg")
RES = kato.builtin("resolvent")


def random_psd(rng, k, bound=5.0):
    return inst.random_psd(rng, k, bound)


def random_pair(rng, d, ka, kb, bound=5.0):
    SA = oc.Subspace(d, inst.haar_columns(rng, d, ka))
    SB = oc.Subspace(d, inst.haar_columns(rng, d, kb))
    return make_degenerate(SA, random_psd(rng, ka, bound)), make_degenerate(SB, random_psd(rng, kb, bound))


def scheme_and_fs(A, B, f=EXP, g=EXP):
    return ProductScheme(A, B, f, g), form_sum(A, B)


def scalar_scheme(a, b, f=EXP, g=EXP):
    S = oc.Subspace.full(1)
    return scheme_and_fs(make_degenerate(S, [[a]]), make_degenerate(S, [[b]]), f, g)


def unit(rng, d):
    v = inst.complex_gaussian(rng, d)
    return v / np.linalg.norm(v)


# -- independent oracles ----------------------------------------------------------

def taylor_exp(X, terms=60):
    """exp(X) by a truncated Taylor series after scaling, then repeated squaring."""
    norm = np.linalg.norm(X, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    Y = X / 2.0 ** s
    term = np.eye(X.shape[0], dtype=complex)
    acc = term.copy()
    for k in range(1, terms):
        term = term @ Y / k
        acc = acc + term
    for _ in range(s):
        acc = acc @ acc
    return acc


def sqrt_psd(M):
    # independent route to the square root: Schur-based sqrtm on the embedded matrix
    R = sla.sqrtm(M)
    return 0.5 * (R + R.conj().T)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240917))


@pytest.fixture
def degenerate_c4(rng):
    A, B = random_pair(rng, 4, 3, 3)
    return scheme_and_fs(A, B)


# -- acceptance summary lines ---------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
