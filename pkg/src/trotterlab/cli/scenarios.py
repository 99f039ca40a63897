"""Scenario registry and the experiment runner."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from .. import lab
from ..degenerate import pair_from_json
from ..errors import ConfigError, LabError
from ..kato import COUNTEREXAMPLES, from_cli_name, validate
from ..product import ProductScheme
from . import instances as inst
from .config import ExperimentConfig, deep_merge

KATO_NAMES = ("exp", "res", "res^2", "res^8", "res^50", "cos")


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    defaults: dict


SCENARIOS = {s.name: s for s in [
    Scenario("scalar-exact", "C^1 with a = b = alpha and f = g = exp: the product is exact",
             {"instance_kind": "scalar", "dims": [1, 1, 1], "experiments": ["strong"]}),
    Scenario("nondegenerate-exp", "random 8x8 full-subspace pair, f = g = exp",
             {"dims": [8, 8, 8], "experiments": ["strong", "resolvent_metric"],
              "n_grid": {"k_lo": 6, "k_hi": 12}}),
    Scenario("nondegenerate-resolvent", "random 8x8 full-subspace pair, f = res, g = res^8",
             {"dims": [8, 8, 8], "kato_f": "res", "kato_g": "res^8", "experiments": ["strong"],
              "n_grid": {"k_lo": 6, "k_hi": 12}}),
    Scenario("degenerate-c4", "random pair on 3-dim subspaces of C^4 (H' of dimension 2)",
             {"dims": [4, 3, 3],
              "experiments": ["strong", "weak", "resolvent_metric", "poisson", "equicontinuity"],
              "n_grid": {"k_lo": 4, "k_hi": 12}}),
    Scenario("orthogonal-subspaces", "M_A orthogonal to M_B in C^4, so H' = {0} and F^n u -> 0",
             {"instance_kind": "orthogonal", "dims": [4, 2, 2], "experiments": ["strong", "weak"],
              "n_grid": {"k_lo": 0, "k_hi": 10}}),
    Scenario("schrodinger-1d", "Dirichlet Laplacian (d = 32) plus harmonic potential, split-operator use case",
             {"instance_kind": "schrodinger", "dims": [32, 32, 32], "spectrum_bound": 4.0,
              "experiments": ["strong"], "n_grid": {"k_lo": 4, "k_hi": 12}}),
    Scenario("kato-validate-all", "admissibility check of the builtin Kato-functions and the cos counterexample",
             {"instance_kind": "none", "experiments": ["validate_kato"]}),
    Scenario("poisson-boundary", "interior resolvent values recovered from imaginary-axis samples",
             {"dims": [4, 3, 3], "experiments": ["poisson"]}),
    Scenario("equicontinuity-probe", "modulus of continuity of t -> (I + S(it,tau))^-1 u uniformly in tau",
             {"dims": [4, 3, 3], "experiments": ["equicontinuity"]}),
]}


def list_scenarios():
    return [(s.name, s.description) for s in SCENARIOS.values()]


def resolve_config(document: dict) -> ExperimentConfig:
    """Merge a user document over the scenario defaults and validate."""
    name = document.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; see `lab list`", "scenario")
    base = ExperimentConfig(scenario=name).to_dict()
    merged = deep_merge(deep_merge(base, SCENARIOS[name].defaults), document)
    return ExperimentConfig.from_dict(merged)


def build_instance(cfg: ExperimentConfig) -> inst.Instance | None:
    if cfg.instance_file:
        try:
            with open(cfg.instance_file, encoding="utf-8") as fh:
                doc = json.load(fh)
            A, B = pair_from_json(doc)
        except (OSError, ValueError, KeyError, LabError) as exc:
            raise ConfigError(f"cannot load instance: {exc}", "instance_file") from exc
        return inst.make_instance(A, B, inst.rng_stream(cfg.seed, inst.STREAM_PROBES))
    kind = cfg.instance_kind
    d = cfg.dims[0]
    if kind == "none":
        return None
    if kind == "scalar":
        return inst.scalar_instance(cfg.alpha)
    if kind == "orthogonal":
        return inst.orthogonal_instance(cfg.seed, d, cfg.spectrum_bound)
    if kind == "schrodinger":
        return inst.schrodinger_instance(d, cfg.spectrum_bound)
    return inst.gen_random_instance(cfg.seed, cfg.dims, cfg.spectrum_bound)


# -- report emission ------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _workers() -> int:
    cap = os.environ.get("LAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _probe_labels(instance):
    counts = {}
    out = []
    for label, _ in instance.probes:
        i = counts.get(label, 0)
        counts[label] = i + 1
        out.append(f"{label}:{i}")
    return out


def run_strong(cfg, instance, scheme):
    ns = [2 ** k for k in range(cfg.n_grid.k_lo, cfg.n_grid.k_hi + 1)]
    vectors = [v for _, v in instance.probes]
    rep = lab.convergence_sweep(scheme, instance.fs, cfg.t_grid, ns, vectors,
                                labels=_probe_labels(instance), tol_conv=cfg.tol_conv,
                                workers=_workers())
    local = rep.local_orders()
    rows = []
    for i, t in enumerate(rep.t_values):
        for k, n in enumerate(rep.n_values):
            for j, label in enumerate(rep.labels):
                order = local[i, k, j]
                rows.append([instance.instance_id, cfg.kato_f, cfg.kato_g, float(t), int(n),
                             label, float(rep.errors[i, k, j]),
                             "" if not np.isfinite(order) else float(order), rep.flags[i][j]])
    header = ["instance_id", "scheme_f", "scheme_g", "t", "n", "vector_class", "error",
              "observed_order", "flag"]
    return "strong.csv", csv_text(header, rows), rep.violations


def run_weak(cfg, instance, scheme):
    phi = lab.profile(cfg.phi.name, cfg.phi.param)
    q = phi.default_quadrature()
    ns = [2 ** k for k in range(cfg.n_grid.k_lo, cfg.n_grid.k_hi + 1)]
    rows, violations = [], []
    for label, (_, u) in zip(_probe_labels(instance), instance.probes):
        gaps = [lab.weak_integral(scheme, instance.fs, phi, u, n, q).gap for n in ns]
        flag = lab.convergence_flag(gaps, cfg.tol_conv)
        ceiling = 2.0 * np.linalg.norm(u) * float(q.integrate(np.abs(phi(q.nodes()))))
        for n, gap in zip(ns, gaps):
            if gap > ceiling * (1 + 1e-10):
                violations.append(("weak_ceiling", label, n, gap))
            rows.append([instance.instance_id, cfg.kato_f, cfg.kato_g, phi.name, phi.param,
                         n, label, gap, flag])
    header = ["instance_id", "scheme_f", "scheme_g", "phi", "phi_param", "n", "vector_class",
              "gap", "flag"]
    return "weak.csv", csv_text(header, rows), violations


def run_metric(cfg, instance, scheme):
    wm = lab.WeightedMeasure()
    u = instance.probes[-1][1]
    violations = []
    rows = []
    for k in range(cfg.tau_grid.k_lo, cfg.tau_grid.k_hi + 1):
        tau = 2.0 ** (-k)
        m = lab.resolvent_metric(scheme, instance.fs, tau, u, wm, violations=violations)
        rows.append([instance.instance_id, tau, m, wm.T, wm.tail_bound])
    header = ["instance_id", "tau", "metric", "truncation_T", "tail_bound"]
    return "metric.csv", csv_text(header, rows), violations


def run_poisson(cfg, instance, scheme):
    from ..product import resolvent_S

    p = cfg.poisson
    z = complex(p.z_re, p.z_im)
    if p.z_re <= 0:
        raise ConfigError("interior point needs Re z > 0", "poisson.z_re")
    m = int(round(p.window / p.step))
    s = p.z_im + p.step * np.arange(-m, m + 1)
    rows = []
    for label, (_, u) in zip(_probe_labels(instance), instance.probes):
        vals = resolvent_S(scheme, 1j * s, p.tau, u)
        res = lab.poisson_convolve(s, vals, p.z_re, p.z_im)
        direct = resolvent_S(scheme, z, p.tau, u)
        err = float(np.linalg.norm(res.value - direct))
        ok = err <= 1e-4 + res.truncation_bound
        rows.append([instance.instance_id, label, p.tau, p.z_re, p.z_im, res.window, p.step, err,
                     res.truncation_bound, res.kernel_mass, "pass" if ok else "fail"])
    header = ["instance_id", "vector_class", "tau", "z_re", "z_im", "window", "step", "error",
              "truncation_bound", "kernel_mass", "flag"]
    return "poisson.csv", csv_text(header, rows), []


def run_equicontinuity(cfg, instance, scheme):
    e = cfg.equicontinuity
    taus = [2.0 ** (-k) for k in range(e.tau_k_lo, e.tau_k_hi + 1)]
    rows = []
    for label, (_, u) in zip(_probe_labels(instance), instance.probes):
        tab = lab.equicontinuity_probe(scheme, e.t0, taus, e.deltas, u)
        mod = tab.modulus
        for i, delta in enumerate(tab.deltas):
            for j, tau in enumerate(tab.taus):
                rows.append([instance.instance_id, label, e.t0, float(delta), float(tau),
                             float(tab.diffs[i, j]), float(mod[i])])
    header = ["instance_id", "vector_class", "t0", "delta", "tau", "difference", "modulus"]
    return "equicontinuity.csv", csv_text(header, rows), []


def run_validate_kato(cfg, instance, scheme):
    rows = []
    for name in KATO_NAMES:
        rep = validate(from_cli_name(name))
        worst = ["", "", "", "", ""]
        if rep.worst_violation:
            cond, point, value = rep.worst_violation
            worst = [cond, point.real, point.imag, value.real, value.imag]
        rows.append([name, rep.passed, rep.max_modulus, rep.boundary_deriv_estimate.real,
                     rep.boundary_deriv_estimate.imag, *worst, ";".join(sorted(rep.failures))])
    header = ["name", "passed", "max_modulus", "deriv_estimate_re", "deriv_estimate_im",
              "worst_condition", "worst_point_re", "worst_point_im", "worst_value_re",
              "worst_value_im", "failed_conditions"]
    # builtins must pass and counterexamples must fail
    violations = [("kato_validation", r[0]) for r in rows if r[1] == (r[0] in COUNTEREXAMPLES)]
    return "kato.csv", csv_text(header, rows), violations


RUNNERS = {
    "strong": run_strong,
    "weak": run_weak,
    "resolvent_metric": run_metric,
    "poisson": run_poisson,
    "equicontinuity": run_equicontinuity,
    "validate_kato": run_validate_kato,
}


@dataclass
class RunResult:
    files: list
    violations: list
    manifest: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def run_scenario(cfg: ExperimentConfig) -> RunResult:
    """Run the selected experiments and write reports plus ``manifest.json``."""
    instance = build_instance(cfg)
    needs_instance = [e for e in cfg.experiments if e != "validate_kato"]
    if needs_instance and instance is None:
        raise ConfigError(f"experiments {needs_instance} need an instance", "instance_kind")
    scheme = None
    violations = []
    if instance is not None:
        try:
            f, g = from_cli_name(cfg.kato_f), from_cli_name(cfg.kato_g)
        except KeyError as exc:
            raise ConfigError(f"unknown Kato-function {exc.args[0]!r}", "kato_f/kato_g") from exc
        scheme = ProductScheme(instance.A, instance.B, f, g)
        rng = inst.rng_stream(cfg.seed, inst.STREAM_INVARIANTS)
        violations += lab.check_hard_invariants(scheme, [v for _, v in instance.probes], rng,
                                                cfg.invariant_samples)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for name in cfg.experiments:
        fname, text, viol = RUNNERS[name](cfg, instance, scheme)
        (out / fname).write_text(text, encoding="utf-8")
        reports[fname] = hashlib.sha256(text.encode()).hexdigest()
        violations += viol
    if instance is not None:
        inst_text = json.dumps(instance.to_json(), sort_keys=True, indent=1)
        (out / "instance.json").write_text(inst_text, encoding="utf-8")

    body = {
        "tool": "trotterlab",
        "version": __version__,
        "rng": {"algorithm": inst.RNG_ALGORITHM, "version": inst.RNG_VERSION},
        "config": cfg.to_dict(),
        "instances": [instance.instance_id] if instance is not None else [],
        "reports": reports,
        "invariants": {"ok": not violations, "violations": [list(map(fmt, v)) for v in violations]},
    }
    body_text = json.dumps(body, sort_keys=True)
    manifest = dict(body)
    manifest["data_hash"] = hashlib.sha256(body_text.encode()).hexdigest()
    manifest["run_info"] = {"generated_at": datetime.now(timezone.utc).isoformat()}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2), encoding="utf-8")
    files = sorted(reports) + (["instance.json"] if instance is not None else []) + ["manifest.json"]
    return RunResult([str(out / f) for f in files], violations, manifest)
