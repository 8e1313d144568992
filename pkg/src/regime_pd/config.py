"""Experiment configuration files (TOML, ``schema = 1``).

A file describes one model family, the collocation grid, the time grid, the
barrier, the quadrature settings and where to write results.  See
``docs/config.md`` for the full schema; the bundled presets under
``regime_pd/presets`` are complete examples.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from .levy_measures import (GtsParams, RegimeModel, SyncJumpSpec, cgmy_params, kobol_params,
                            vg_params)
from .model import SwitchingModel
from .pide_operator import QuadratureConfig
from .rbf_basis import KINDS
from .regime_chain import GeneratorError, validate_generator

SCHEMA = 1
FAMILIES = {
    "vg": ("sigma", "theta", "kappa"),
    "cgmy": ("C", "G", "M", "Y"),
    "kobol": ("C", "Y", "p", "q", "lambda"),
    "custom-gts": ("c_plus", "c_minus", "beta_plus", "beta_minus", "alpha_plus", "alpha_minus"),
}
FORMATS = ("csv", "dat")


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"{path or '<config>'}:{line}" if line is not None else (path or "<config>")
        super().__init__(f"{where}: {message}")


class ValidationError(ConfigError):
    def __init__(self, field_name: str, message: str = "invalid value"):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class BondPricingUnsupported(UserWarning):
    pass


# ---------------------------------------------------------------------------
# sections

@dataclass(frozen=True)
class ModelSection:
    family: str
    params: dict                    # name -> tuple of per-regime values
    generator: tuple                # rows of Q
    eta: tuple                      # per source regime, or full H x H rows
    eta_convention: str = "mean"
    drift: tuple = ()
    diffusion: tuple = ()
    diffusion_separate: bool = False

    @property
    def H(self) -> int:
        return len(self.generator)


@dataclass(frozen=True)
class GridSection:
    x_min: float
    x_max: float
    n_x: int
    basis: str = "gaussian"
    shape_ratio: Optional[float] = 0.5      # shape = shape_ratio / h
    shape: Optional[float] = None           # absolute shape, overrides the ratio
    align_barrier: bool = True              # put the barrier half way between two nodes
    boundary_lift: bool = True              # frozen ghost Gaussians carrying u = 1 left of x_min


@dataclass(frozen=True)
class TimeSection:
    horizons: tuple
    n_steps: int
    theta: float = 0.0
    rannacher: int = 4


@dataclass(frozen=True)
class BarrierSection:
    k: float = -0.1
    liabilities: Optional[float] = None     # L
    asset_value: Optional[float] = None     # V0


@dataclass(frozen=True)
class MarketSection:
    rate: float = 0.0
    bond_pricing: bool = False


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple = FORMATS
    surface: bool = True
    surface_every: int = 1
    x_eval: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: ModelSection
    grid: GridSection
    time: TimeSection
    barrier: BarrierSection = BarrierSection()
    quadrature: QuadratureConfig = QuadratureConfig()
    market: MarketSection = MarketSection()
    output: OutputSection = OutputSection()
    description: str = ""

    @property
    def horizon(self) -> float:
        return max(self.time.horizons)

    def build_model(self) -> SwitchingModel:
        return build_model(self.model)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with whole sections or top-level fields swapped."""
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(sections)
        return ExperimentConfig(**d)


# ---------------------------------------------------------------------------
# building the model

def regime_params(family: str, values: dict) -> GtsParams:
    if family == "vg":
        return vg_params(values["sigma"], values["theta"], values["kappa"])
    if family == "cgmy":
        return cgmy_params(values["C"], values["G"], values["M"], values["Y"])
    if family == "kobol":
        return kobol_params(values["C"], values["Y"], values["p"], values["q"], values["lambda"])
    return GtsParams(values["c_plus"], values["c_minus"], values["beta_plus"],
                     values["beta_minus"], values["alpha_plus"], values["alpha_minus"])


def build_model(m: ModelSection) -> SwitchingModel:
    H = m.H
    names = FAMILIES[m.family]
    regimes = []
    for j in range(H):
        gts = regime_params(m.family, {n: m.params[n][j] for n in names})
        mu = m.drift[j] if m.drift else 0.0
        sigma = m.diffusion[j] if (m.diffusion_separate and m.diffusion) else 0.0
        regimes.append(RegimeModel(mu=mu, sigma=sigma, gts=gts))
    eta = np.asarray(m.eta, float)
    jumps = (SyncJumpSpec.from_rows(eta, m.eta_convention) if eta.ndim == 1
             else SyncJumpSpec(eta, m.eta_convention))
    return SwitchingModel.build(regimes, np.asarray(m.generator, float), jumps)


def generator_from_persistence(p) -> np.ndarray:
    """Two-state generator from one-year stay probabilities: q_jj = ln p_j, q_jk = -q_jj."""
    p = np.asarray(p, float)
    if p.size != 2:
        raise ValueError("persistence reconstruction is defined for two regimes")
    q = np.diag(np.log(p))
    q[0, 1], q[1, 0] = -q[0, 0], -q[1, 1]
    return q


# ---------------------------------------------------------------------------
# parsing and validation

def _line_of(exc: tomli.TOMLDecodeError) -> Optional[int]:
    line = getattr(exc, "lineno", None)
    if line is None:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
    return line


def _table(d: dict, key: str, required: bool = True) -> dict:
    if key not in d:
        if required:
            raise ValidationError(key, "missing section")
        return {}
    if not isinstance(d[key], dict):
        raise ValidationError(key, "expected a section")
    return d[key]


def _number(v, name: str, positive: bool = False, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(name, f"expected a number, got {v!r}")
    if integer and (not isinstance(v, int)):
        raise ValidationError(name, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ValidationError(name, "must be finite")
    if positive and v <= 0:
        raise ValidationError(name, "must be positive")
    return v


def _vector(v, name: str, n: Optional[int] = None) -> tuple:
    if not isinstance(v, list):
        raise ValidationError(name, "expected a list")
    out = tuple(float(_number(x, name)) for x in v)
    if n is not None and len(out) != n:
        raise ValidationError(name, f"expected {n} entries, got {len(out)}")
    return out


def _matrix(v, name: str, n: int) -> tuple:
    if not isinstance(v, list) or len(v) != n:
        raise ValidationError(name, f"expected {n} rows")
    return tuple(_vector(row, name, n) for row in v)


def _check_keys(d: dict, allowed, section: str):
    for key in d:
        if key not in allowed:
            raise ValidationError(f"{section}.{key}" if section else key, "unknown key")


def _parse_model(raw: dict) -> ModelSection:
    m = _table(raw, "model")
    _check_keys(m, {"family", "generator", "persistence", "drift", "diffusion",
                    "diffusion_separate", "params"}, "model")
    family = m.get("family")
    if family not in FAMILIES:
        raise ValidationError("model.family", f"expected one of {sorted(FAMILIES)}, got {family!r}")
    params_raw = _table(m, "params") if "params" in m else None
    if params_raw is None:
        raise ValidationError("model.params", "missing section")
    _check_keys(params_raw, FAMILIES[family], "model.params")

    if "generator" in m and "persistence" in m:
        raise ValidationError("model.generator", "give either generator or persistence, not both")
    if "generator" in m:
        if not isinstance(m["generator"], list) or not m["generator"]:
            raise ValidationError("model.generator", "expected a list of rows")
        H = len(m["generator"])
        gen = _matrix(m["generator"], "model.generator", H)
    elif "persistence" in m:
        p = _vector(m["persistence"], "model.persistence", 2)
        if not all(0 < x < 1 for x in p):
            raise ValidationError("model.persistence", "probabilities must lie in (0, 1)")
        H = 2
        gen = tuple(tuple(float(x) for x in row) for row in generator_from_persistence(p))
    else:
        raise ValidationError("model.generator", "missing")
    try:
        validate_generator(np.array(gen))
    except GeneratorError as exc:
        raise ValidationError("model.generator", str(exc)) from exc

    params = {}
    for name in FAMILIES[family]:
        if name not in params_raw:
            raise ValidationError(f"model.params.{name}", "missing")
        params[name] = _vector(params_raw[name], f"model.params.{name}", H)
    try:
        for j in range(H):
            regime_params(family, {n: params[n][j] for n in params})
    except ValueError as exc:
        raise ValidationError("model.params", f"regime {j + 1}: {exc}") from exc

    drift = _vector(m["drift"], "model.drift", H) if "drift" in m else ()
    diffusion = _vector(m["diffusion"], "model.diffusion", H) if "diffusion" in m else ()
    sep = m.get("diffusion_separate", False)
    if not isinstance(sep, bool):
        raise ValidationError("model.diffusion_separate", "expected true or false")
    if sep and not diffusion:
        raise ValidationError("model.diffusion", "required when diffusion_separate = true")
    if any(s < 0 for s in diffusion):
        raise ValidationError("model.diffusion", "volatilities must be non-negative")

    s = _table(raw, "sync_jump")
    _check_keys(s, {"eta", "convention"}, "sync_jump")
    if "eta" not in s:
        raise ValidationError("sync_jump.eta", "missing")
    eta_raw = s["eta"]
    if not isinstance(eta_raw, list) or len(eta_raw) != H:
        raise ValidationError("sync_jump.eta", f"expected {H} entries (one per regime) or {H} rows")
    if all(isinstance(r, list) for r in eta_raw):
        eta = _matrix(eta_raw, "sync_jump.eta", H)
    else:
        eta = _vector(eta_raw, "sync_jump.eta", H)
    conv = s.get("convention", "mean")
    if conv not in ("mean", "rate"):
        raise ValidationError("sync_jump.convention", "expected 'mean' or 'rate'")
    return ModelSection(family, params, gen, eta, conv, drift, diffusion, sep)


def _parse_grid(raw: dict) -> GridSection:
    g = _table(raw, "grid")
    _check_keys(g, {f.name for f in fields(GridSection)}, "grid")
    for key in ("x_min", "x_max", "n_x"):
        if key not in g:
            raise ValidationError(f"grid.{key}", "missing")
    x_min, x_max = float(_number(g["x_min"], "grid.x_min")), float(_number(g["x_max"], "grid.x_max"))
    if not x_min < x_max:
        raise ValidationError("grid.x_max", "must exceed x_min")
    n = _number(g["n_x"], "grid.n_x", integer=True)
    if n < 3:
        raise ValidationError("grid.n_x", "need at least 3 nodes")
    basis = g.get("basis", "gaussian")
    if basis not in KINDS:
        raise ValidationError("grid.basis", f"expected one of {KINDS}")
    ratio = g.get("shape_ratio", 0.5 if "shape" not in g else None)
    shape = g.get("shape")
    if ratio is not None:
        ratio = float(_number(ratio, "grid.shape_ratio", positive=True))
    if shape is not None:
        shape = float(_number(shape, "grid.shape", positive=True))
    flags = {}
    for key in ("align_barrier", "boundary_lift"):
        flags[key] = g.get(key, True)
        if not isinstance(flags[key], bool):
            raise ValidationError(f"grid.{key}", "expected true or false")
    return GridSection(x_min, x_max, int(n), basis, ratio, shape, **flags)


def _parse_time(raw: dict) -> TimeSection:
    t = _table(raw, "time")
    _check_keys(t, {f.name for f in fields(TimeSection)}, "time")
    if "horizons" not in t:
        raise ValidationError("time.horizons", "missing")
    hs = _vector(t["horizons"], "time.horizons")
    if not hs or any(h <= 0 for h in hs):
        raise ValidationError("time.horizons", "need at least one positive horizon")
    if list(hs) != sorted(set(hs)):
        raise ValidationError("time.horizons", "must be strictly increasing")
    if "n_steps" not in t:
        raise ValidationError("time.n_steps", "missing")
    n = _number(t["n_steps"], "time.n_steps", positive=True, integer=True)
    dtau = hs[-1] / n
    for h in hs:
        if abs(round(h / dtau) * dtau - h) > 1e-9 * h:
            raise ValidationError("time.horizons", f"horizon {h} is not a multiple of the step {dtau:g}")
    theta = float(_number(t.get("theta", 0.0), "time.theta"))
    if not 0 <= theta <= 1:
        raise ValidationError("time.theta", "must lie in [0, 1]")
    ran = _number(t.get("rannacher", 4), "time.rannacher", integer=True)
    if ran < 0 or ran % 2:
        raise ValidationError("time.rannacher", "must be a non-negative even number")
    return TimeSection(hs, int(n), theta, int(ran))


def _parse_barrier(raw: dict) -> BarrierSection:
    b = _table(raw, "barrier", required=False)
    _check_keys(b, {"k", "liabilities", "asset_value"}, "barrier")
    has_lv = "liabilities" in b or "asset_value" in b
    if has_lv:
        if "k" in b:
            raise ValidationError("barrier.k", "give either k or liabilities/asset_value, not both")
        for key in ("liabilities", "asset_value"):
            if key not in b:
                raise ValidationError(f"barrier.{key}", "missing")
        L = float(_number(b["liabilities"], "barrier.liabilities", positive=True))
        V = float(_number(b["asset_value"], "barrier.asset_value", positive=True))
        return BarrierSection(math.log(L / V), L, V)
    return BarrierSection(float(_number(b.get("k", -0.1), "barrier.k")))


def _parse_quadrature(raw: dict) -> QuadratureConfig:
    q = _table(raw, "quadrature", required=False)
    names = {f.name for f in fields(QuadratureConfig)}
    _check_keys(q, names, "quadrature")
    try:
        return QuadratureConfig(**q)
    except (TypeError, ValueError) as exc:
        raise ValidationError("quadrature", str(exc)) from exc


def _parse_market(raw: dict) -> MarketSection:
    m = _table(raw, "market", required=False)
    _check_keys(m, {"rate", "bond_pricing"}, "market")
    rate = float(_number(m.get("rate", 0.0), "market.rate"))
    bond = m.get("bond_pricing", False)
    if not isinstance(bond, bool):
        raise ValidationError("market.bond_pricing", "expected true or false")
    if bond:
        warnings.warn("bond pricing is out of scope; market.bond_pricing is ignored",
                      BondPricingUnsupported, stacklevel=3)
    return MarketSection(rate, bond)


def _parse_output(raw: dict) -> OutputSection:
    o = _table(raw, "output", required=False)
    _check_keys(o, {f.name for f in fields(OutputSection)}, "output")
    fmts = o.get("formats", list(FORMATS))
    if not isinstance(fmts, list) or any(f not in FORMATS for f in fmts):
        raise ValidationError("output.formats", f"expected a list drawn from {FORMATS}")
    every = _number(o.get("surface_every", 1), "output.surface_every", positive=True, integer=True)
    surface = o.get("surface", True)
    if not isinstance(surface, bool):
        raise ValidationError("output.surface", "expected true or false")
    directory = o.get("directory", "out")
    if not isinstance(directory, str):
        raise ValidationError("output.directory", "expected a string")
    x_eval = float(_number(o.get("x_eval", 0.0), "output.x_eval"))
    return OutputSection(directory, tuple(fmts), surface, int(every), x_eval)


def config_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw, {"schema", "name", "description", "model", "sync_jump", "grid", "time",
                      "barrier", "quadrature", "market", "output"}, "")
    if raw.get("schema") != SCHEMA:
        raise ValidationError("schema", f"expected schema = {SCHEMA}")
    name = raw.get("name", "experiment")
    if not isinstance(name, str) or not name:
        raise ValidationError("name", "expected a non-empty string")
    cfg = ExperimentConfig(
        name=name, model=_parse_model(raw), grid=_parse_grid(raw), time=_parse_time(raw),
        barrier=_parse_barrier(raw), quadrature=_parse_quadrature(raw),
        market=_parse_market(raw), output=_parse_output(raw),
        description=str(raw.get("description", "")))
    if not cfg.grid.x_min < cfg.barrier.k < cfg.grid.x_max:
        raise ValidationError("barrier.k", f"barrier {cfg.barrier.k:g} is outside the grid")
    return cfg


def loads_config(text: str, path: Optional[str] = None) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = getattr(exc, "msg", str(exc))
        raise ParseError(msg, _line_of(exc), path) from exc
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    return loads_config(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# writing

def config_to_dict(cfg: ExperimentConfig) -> dict:
    m = cfg.model
    model = {"family": m.family, "generator": [list(r) for r in m.generator],
             "diffusion_separate": m.diffusion_separate,
             "params": {k: list(v) for k, v in m.params.items()}}
    if m.drift:
        model["drift"] = list(m.drift)
    if m.diffusion:
        model["diffusion"] = list(m.diffusion)
    eta = [list(r) for r in m.eta] if m.eta and isinstance(m.eta[0], tuple) else list(m.eta)
    grid = {k: v for k, v in asdict(cfg.grid).items() if v is not None}
    b = cfg.barrier
    barrier = ({"liabilities": b.liabilities, "asset_value": b.asset_value}
               if b.liabilities is not None else {"k": b.k})
    out = asdict(cfg.output)
    out["formats"] = list(out["formats"])
    return {
        "schema": SCHEMA, "name": cfg.name, "description": cfg.description,
        "model": model,
        "sync_jump": {"eta": eta, "convention": m.eta_convention},
        "grid": grid,
        "time": {"horizons": list(cfg.time.horizons), "n_steps": cfg.time.n_steps,
                 "theta": cfg.time.theta, "rannacher": cfg.time.rannacher},
        "barrier": barrier,
        "quadrature": asdict(cfg.quadrature),
        "market": asdict(cfg.market),
        "output": out,
    }


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def write_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps_config(cfg))
    return path


# ---------------------------------------------------------------------------
# presets

def preset_names() -> list[str]:
    files = resources.files("regime_pd") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return (resources.files("regime_pd") / "presets" / f"{name}.toml").read_text()


def load_preset(name: str) -> ExperimentConfig:
    return loads_config(preset_text(name), f"preset:{name}")
