"""Seeded instance generation.

Randomness comes from ``numpy.random.Philox`` seeded through ``SeedSequence``;
independent streams for operators and probe vectors are spawned from the
config seed, so adding probes never changes the operators.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .. import operator_core as oc
from ..degenerate import DegenerateOperator, FormSum, form_sum, make_degenerate, pair_to_json

RNG_ALGORITHM = "numpy.random.Philox(SeedSequence(seed).spawn)"
RNG_VERSION = 1

STREAM_OPERATORS = 0
STREAM_PROBES = 1
STREAM_INVARIANTS = 2


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed).spawn(stream + 1)[stream]))


def complex_gaussian(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_columns(rng, d: int, k: int) -> np.ndarray:
    """First ``k`` columns of a Haar unitary (QR with phase correction)."""
    if k == 0:
        return np.zeros((d, 0), dtype=np.complex128)
    Q, R = np.linalg.qr(complex_gaussian(rng, (d, d)))
    ph = np.diag(R) / np.abs(np.diag(R))
    return (Q * ph)[:, :k]


def random_psd(rng, k: int, bound: float) -> np.ndarray:
    V = haar_columns(rng, k, k)
    lam = rng.uniform(0.0, bound, k)
    H = (V * lam) @ V.conj().T
    return 0.5 * (H + H.conj().T)


@dataclass
class Instance:
    instance_id: str
    A: DegenerateOperator
    B: DegenerateOperator
    probes: list = field(default_factory=list)  # (label, unit vector)

    @cached_property
    def fs(self) -> FormSum:
        return form_sum(self.A, self.B)

    def to_json(self) -> dict:
        doc = pair_to_json(self.A, self.B)
        doc["instance_id"] = self.instance_id
        doc["probes"] = [{"label": lab, "vector": [[float(z.real), float(z.imag)] for z in v]}
                         for lab, v in self.probes]
        return doc


def content_hash(A: DegenerateOperator, B: DegenerateOperator) -> str:
    blob = json.dumps(pair_to_json(A, B), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _random_in(rng, S: oc.Subspace):
    return _unit(S.basis @ complex_gaussian(rng, S.k))


def probe_vectors(A: DegenerateOperator, B: DegenerateOperator, rng) -> list:
    """One unit vector per nonempty class plus a generic vector.

    Classes: ``hprime`` (H' = M_A ∩ M_B), ``perp_a`` / ``perp_b`` (single
    complements), ``perp_both`` (M_A^⊥ ∩ M_B^⊥) and ``generic``.
    """
    d = A.ambient_dim
    pa, pb = oc.orth_complement(A.subspace), oc.orth_complement(B.subspace)
    candidates = [
        ("hprime", oc.intersect(A.subspace, B.subspace)),
        ("perp_a", pa),
        ("perp_b", pb),
        ("perp_both", oc.intersect(pa, pb)),
    ]
    probes = []
    for label, S in candidates:
        if S.k:
            probes.append((label, _random_in(rng, S)))
    probes.append(("generic", _unit(complex_gaussian(rng, d))))
    return probes


def make_instance(A: DegenerateOperator, B: DegenerateOperator, rng, probes=None) -> Instance:
    if probes is None:
        probes = probe_vectors(A, B, rng)
    return Instance(content_hash(A, B), A, B, probes)


def gen_random_instance(seed: int, dims, spectrum_bound: float = 5.0) -> Instance:
    """Random degenerate pair: Haar subspaces, PSD parts with spectra uniform in [0, bound]."""
    if spectrum_bound <= 0:
        raise ValueError("spectrum_bound must be positive")
    d, ka, kb = (int(x) for x in dims)
    rng = rng_stream(seed, STREAM_OPERATORS)
    SA = oc.Subspace(d, haar_columns(rng, d, ka))
    SB = oc.Subspace(d, haar_columns(rng, d, kb))
    A = make_degenerate(SA, random_psd(rng, ka, spectrum_bound))
    B = make_degenerate(SB, random_psd(rng, kb, spectrum_bound))
    return make_instance(A, B, rng_stream(seed, STREAM_PROBES))


def scalar_instance(alpha: float = 1.0) -> Instance:
    S = oc.Subspace.full(1)
    A = make_degenerate(S, [[alpha]])
    B = make_degenerate(S, [[alpha]])
    return make_instance(A, B, None, probes=[("hprime", np.array([1.0 + 0j]))])


def orthogonal_instance(seed: int, d: int = 4, spectrum_bound: float = 5.0) -> Instance:
    """``M_A`` = first half of the coordinates, ``M_B`` = second half; ``H' = {0}``."""
    rng = rng_stream(seed, STREAM_OPERATORS)
    ka = d // 2
    SA = oc.Subspace.coordinate(d, range(ka))
    SB = oc.Subspace.coordinate(d, range(ka, d))
    A = make_degenerate(SA, random_psd(rng, ka, spectrum_bound))
    B = make_degenerate(SB, random_psd(rng, d - ka, spectrum_bound))
    return make_instance(A, B, rng_stream(seed, STREAM_PROBES))


def schrodinger_instance(d: int = 32, potential_max: float = 4.0) -> Instance:
    """Dirichlet second differences (norm < 4) as ``A``, harmonic potential as ``B``."""
    S = oc.Subspace.full(d)
    lap = 2.0 * np.eye(d) - np.eye(d, k=1) - np.eye(d, k=-1)
    x = np.linspace(-1.0, 1.0, d + 2)[1:-1]
    pot = potential_max * x ** 2
    A = make_degenerate(S, lap)
    B = make_degenerate(S, np.diag(pot))
    packet = np.exp(-((x + 0.3) / 0.15) ** 2) * np.exp(1j * 8.0 * x)
    smooth = np.sin(np.pi * (x + 1.0) / 2.0)
    probes = [("hprime", _unit(packet.astype(np.complex128))),
              ("hprime", _unit(smooth.astype(np.complex128)))]
    return make_instance(A, B, None, probes=probes)
