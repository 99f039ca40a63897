"""Experiment configuration: a single JSON document plus dotted-path overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass

from ..errors import ConfigError

EXPERIMENTS = ("strong", "weak", "resolvent_metric", "poisson", "equicontinuity", "validate_kato")
INSTANCE_KINDS = ("random", "scalar", "orthogonal", "schrodinger", "none")


@dataclass
class PowerGrid:
    """Grid ``2^k`` (``n`` grids) or ``2^-k`` (``tau`` grids) for ``k_lo <= k <= k_hi``."""

    k_lo: int = 0
    k_hi: int = 12


@dataclass
class PhiSpec:
    name: str = "gaussian"
    param: float = 1.0


@dataclass
class PoissonSpec:
    tau: float = 0.1
    z_re: float = 0.3
    z_im: float = 0.2
    window: float = 40.0
    step: float = 0.01


@dataclass
class EquicontinuitySpec:
    t0: float = 1.0
    tau_k_lo: int = 1
    tau_k_hi: int = 4
    deltas: list = field(default_factory=lambda: [0.0, 1e-4, 1e-3, 1e-2, 1e-1])


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int = 1
    dims: list = field(default_factory=lambda: [4, 3, 3])
    spectrum_bound: float = 5.0
    instance_kind: str = "random"
    instance_file: str | None = None
    alpha: float = 1.0
    kato_f: str = "exp"
    kato_g: str = "exp"
    t_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    n_grid: PowerGrid = field(default_factory=lambda: PowerGrid(0, 12))
    tau_grid: PowerGrid = field(default_factory=lambda: PowerGrid(1, 10))
    phi: PhiSpec = field(default_factory=PhiSpec)
    poisson: PoissonSpec = field(default_factory=PoissonSpec)
    equicontinuity: EquicontinuitySpec = field(default_factory=EquicontinuitySpec)
    tol_conv: float = 1e-3
    invariant_samples: int = 50
    output_dir: str = "lab-output"
    experiments: list = field(default_factory=lambda: ["strong"])

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        if len(self.dims) != 3 or not all(isinstance(x, int) for x in self.dims):
            raise ConfigError("must be three integers [d, dim M_A, dim M_B]", "dims")
        d, ka, kb = self.dims
        if d < 1 or not (0 <= ka <= d and 0 <= kb <= d):
            raise ConfigError("need d >= 1 and 0 <= dim M_A, dim M_B <= d", "dims")
        if self.spectrum_bound <= 0:
            raise ConfigError("must be positive", "spectrum_bound")
        if self.instance_kind not in INSTANCE_KINDS:
            raise ConfigError(f"must be one of {INSTANCE_KINDS}", "instance_kind")
        for name in ("n_grid", "tau_grid"):
            g = getattr(self, name)
            if g.k_lo > g.k_hi:
                raise ConfigError("k_lo must not exceed k_hi", f"{name}.k_lo")
            if g.k_lo < 0:
                raise ConfigError("must be >= 0", f"{name}.k_lo")
        if not self.t_grid:
            raise ConfigError("must be nonempty", "t_grid")
        bad = [e for e in self.experiments if e not in EXPERIMENTS]
        if bad:
            raise ConfigError(f"unknown experiments {bad}; choose from {EXPERIMENTS}", "experiments")
        if self.phi.name not in ("gaussian", "box", "cauchy"):
            raise ConfigError("must be gaussian, box or cauchy", "phi.name")
        if self.equicontinuity.t0 == 0:
            raise ConfigError("must be nonzero", "equicontinuity.t0")
        if self.poisson.tau <= 0 or self.poisson.step <= 0:
            raise ConfigError("tau and step must be positive", "poisson")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path or "<root>")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown}", path or "<root>")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, sub)
        else:
            kwargs[name] = _coerce(known[name], value, sub)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), path or "<root>") from exc


def _coerce(f, value, path):
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        value = float(value)
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
    elif kind == "str | None":
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"expected a string or null, got {value!r}", path)
    elif kind == "list":
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", path)
    return value


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(data: dict, assignment: str) -> dict:
    """Apply ``path.to.leaf=value``; ``value`` is parsed as JSON, else kept as a string."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form path=value", "--set")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.strip().split(".")
    out = copy.deepcopy(data)
    node = out
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError("cannot descend into a non-object", path)
    node[keys[-1]] = value
    return out


def load_document(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict) or "scenario" not in data:
        raise ConfigError("config must be an object with a 'scenario' field", "scenario")
    return data
