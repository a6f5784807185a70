"""Run configuration: YAML parsing, validation and normalised dumping.

A run file has up to five top-level blocks::

    scenario:
      endpoints:
        - name: death
          control: {hazard: 5.7e-4}            # or {breaks, rates} or {grid, survival}
          effect: 0.2                          # or hazard_ratio, or treatment: {...}
      dependence: {copula: gumbel, tau: 0.3}   # exactly one of tau, kappa, corr
      censoring: {study_length: 500, accrual_length: 200, accrual_shape: [1, 1],
                  dropout_hazard: 1.5e-4}
      semi_competing: false
    design: {allocation: 0.5, alpha: 0.05, power: 0.8, strata: [...]}
    sweep: {tau: [0, 0.3, 0.8], s: [500, 1000], power: [0.9, 0.8]}
    sim: {replicates: 2000, n: 1000, seed: 1}
    output: {format: csv, path: out.csv}

All durations are in days and hazards per day. Every validation failure
raises :class:`ConfigError` carrying the dotted path of the offending field.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
import yaml

from .copula import ArmJointModel, GaussianCopula, GumbelHougaard, tau_to_corr
from .survival import CensoringModel, Exponential, MarginalModel, PiecewiseExponential, Tabulated
from .winprob import ScenarioSpec

FORMATS = ("csv", "md", "txt")
ROUNDINGS = ("auto", "even", "ceil", "none")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the field, e.g. ``scenario.dependence.tau``."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


# low-level readers ---------------------------------------------------------

def _mapping(obj, path: str, allowed: set[str]) -> dict:
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected a mapping")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")
    return obj


def _number(obj, path: str, *, positive=False, nonneg=False, integer=False) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, "expected a number")
    x = float(obj)
    if not np.isfinite(x):
        raise ConfigError(path, "must be finite")
    if positive and not x > 0:
        raise ConfigError(path, "must be positive")
    if nonneg and x < 0:
        raise ConfigError(path, "must be nonnegative")
    if integer:
        if x != int(x):
            raise ConfigError(path, "must be a whole number")
        return int(x)
    return x


def _numbers(obj, path: str, **kw) -> tuple:
    if not isinstance(obj, (list, tuple)) or not obj:
        raise ConfigError(path, "expected a nonempty list")
    return tuple(_number(v, f"{path}[{i}]", **kw) for i, v in enumerate(obj))


def _flag(obj, path: str) -> bool:
    if not isinstance(obj, bool):
        raise ConfigError(path, "expected true or false")
    return obj


def _open_unit(x: float, path: str) -> float:
    if not 0 < x < 1:
        raise ConfigError(path, "must lie strictly between 0 and 1")
    return x


# scenario ------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalSpec:
    """One marginal law: constant hazard, piecewise-constant hazard or tabulated survival."""

    hazard: float | None = None
    breaks: tuple[float, ...] | None = None
    rates: tuple[float, ...] | None = None
    grid: tuple[float, ...] | None = None
    survival: tuple[float, ...] | None = None

    @classmethod
    def parse(cls, obj, path: str) -> "MarginalSpec":
        d = _mapping(obj, path, {"hazard", "breaks", "rates", "grid", "survival"})
        forms = [k for k in ("hazard", "rates", "survival") if k in d]
        if len(forms) != 1:
            raise ConfigError(path, "give exactly one of hazard, rates (with breaks), survival (with grid)")
        if "hazard" in d:
            if set(d) != {"hazard"}:
                raise ConfigError(path, "hazard cannot be combined with other fields")
            spec = cls(hazard=_number(d["hazard"], f"{path}.hazard", positive=True))
        elif "rates" in d:
            if "grid" in d:
                raise ConfigError(f"{path}.grid", "grid belongs with survival, not rates")
            breaks = _numbers(d["breaks"], f"{path}.breaks") if d.get("breaks") else ()
            spec = cls(breaks=breaks, rates=_numbers(d["rates"], f"{path}.rates", positive=True))
        else:
            if "breaks" in d:
                raise ConfigError(f"{path}.breaks", "breaks belong with rates, not survival")
            if "grid" not in d:
                raise ConfigError(f"{path}.grid", "required with survival")
            spec = cls(grid=_numbers(d["grid"], f"{path}.grid", nonneg=True),
                       survival=_numbers(d["survival"], f"{path}.survival"))
        try:
            spec.build()
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
        return spec

    def build(self, hazard_ratio: float = 1.0) -> MarginalModel:
        """The model, with every hazard multiplied by ``hazard_ratio``."""
        if self.hazard is not None:
            return Exponential(self.hazard * hazard_ratio)
        if self.rates is not None:
            return PiecewiseExponential(self.breaks, tuple(r * hazard_ratio for r in self.rates))
        return Tabulated(self.grid, tuple(s**hazard_ratio for s in self.survival))

    def to_dict(self) -> dict:
        if self.hazard is not None:
            return {"hazard": self.hazard}
        if self.rates is not None:
            return {"breaks": list(self.breaks), "rates": list(self.rates)}
        return {"grid": list(self.grid), "survival": list(self.survival)}


@dataclass(frozen=True)
class EndpointSpec:
    control: MarginalSpec
    name: str | None = None
    hazard_ratio: float | None = None
    treatment: MarginalSpec | None = None

    @classmethod
    def parse(cls, obj, path: str) -> "EndpointSpec":
        d = _mapping(obj, path, {"name", "control", "treatment", "hazard_ratio", "effect"})
        if "control" not in d:
            raise ConfigError(f"{path}.control", "required")
        control = MarginalSpec.parse(d["control"], f"{path}.control")
        given = [k for k in ("hazard_ratio", "effect", "treatment") if k in d]
        if len(given) != 1:
            raise ConfigError(path, "give exactly one of hazard_ratio, effect, treatment")
        name = d.get("name")
        if name is not None and not isinstance(name, str):
            raise ConfigError(f"{path}.name", "expected a string")
        if "treatment" in d:
            return cls(control, name, treatment=MarginalSpec.parse(d["treatment"], f"{path}.treatment"))
        if "effect" in d:
            hr = float(np.exp(-_number(d["effect"], f"{path}.effect")))
        else:
            hr = _number(d["hazard_ratio"], f"{path}.hazard_ratio", positive=True)
        try:
            control.build(hr)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
        return cls(control, name, hazard_ratio=hr)

    def models(self) -> tuple[MarginalModel, MarginalModel]:
        """(control, treatment) marginals."""
        if self.treatment is not None:
            return self.control.build(), self.treatment.build()
        return self.control.build(), self.control.build(self.hazard_ratio)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.name is not None:
            d["name"] = self.name
        d["control"] = self.control.to_dict()
        if self.treatment is not None:
            d["treatment"] = self.treatment.to_dict()
        else:
            d["hazard_ratio"] = self.hazard_ratio
        return d


def _matrix(obj, path: str, K: int) -> tuple[tuple[float, ...], ...]:
    if not isinstance(obj, (list, tuple)) or len(obj) != K:
        raise ConfigError(path, f"expected a {K} x {K} matrix")
    rows = tuple(_numbers(r, f"{path}[{i}]") for i, r in enumerate(obj))
    if any(len(r) != K for r in rows):
        raise ConfigError(path, f"expected a {K} x {K} matrix")
    return rows


@dataclass(frozen=True)
class DependenceSpec:
    copula: str = "gumbel"
    tau: float | tuple | None = None
    kappa: float | None = None
    corr: tuple | None = None

    @classmethod
    def parse(cls, obj, path: str, K: int) -> "DependenceSpec":
        d = _mapping(obj, path, {"copula", "tau", "kappa", "corr"})
        kind = d.get("copula", "gumbel")
        if kind not in ("gumbel", "gaussian"):
            raise ConfigError(f"{path}.copula", "must be gumbel or gaussian")
        given = [k for k in ("tau", "kappa", "corr") if k in d]
        if len(given) > 1 or (K > 1 and not given):
            raise ConfigError(path, "give exactly one of tau, kappa, corr")
        if "kappa" in d:
            if kind != "gumbel":
                raise ConfigError(f"{path}.kappa", "kappa is a Gumbel-Hougaard parameter")
            kappa = _number(d["kappa"], f"{path}.kappa")
            if kappa < 1:
                raise ConfigError(f"{path}.kappa", "must be at least 1")
            return cls(kind, kappa=kappa)
        if "corr" in d:
            if kind != "gaussian":
                raise ConfigError(f"{path}.corr", "a correlation matrix needs copula: gaussian")
            corr = _matrix(d["corr"], f"{path}.corr", K)
            try:
                GaussianCopula(np.array(corr))
            except ValueError as exc:
                raise ConfigError(f"{path}.corr", str(exc)) from None
            return cls(kind, corr=corr)
        tau = d.get("tau", 0.0)
        if isinstance(tau, (list, tuple)):
            if kind != "gaussian":
                raise ConfigError(f"{path}.tau", "a tau matrix needs copula: gaussian")
            tau = _matrix(tau, f"{path}.tau", K)
            try:
                GaussianCopula(tau_to_corr(np.array(tau)))
            except ValueError as exc:
                raise ConfigError(f"{path}.tau", str(exc)) from None
        else:
            tau = _number(tau, f"{path}.tau")
            check_tau(tau, kind, f"{path}.tau", K)
        return cls(kind, tau=tau)

    def build(self, K: int):
        if self.kappa is not None:
            return GumbelHougaard(self.kappa)
        if self.corr is not None:
            return GaussianCopula(np.array(self.corr))
        tau = 0.0 if self.tau is None else self.tau
        if self.copula == "gumbel":
            return GumbelHougaard.from_tau(tau)
        return GaussianCopula.from_tau(np.array(tau) if isinstance(tau, tuple) else tau, K)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"copula": self.copula}
        if self.kappa is not None:
            d["kappa"] = self.kappa
        elif self.corr is not None:
            d["corr"] = [list(r) for r in self.corr]
        else:
            d["tau"] = [list(r) for r in self.tau] if isinstance(self.tau, tuple) else self.tau
        return d


def check_tau(tau: float, kind: str, path: str, K: int = 2) -> None:
    if kind == "gumbel" and not 0 <= tau < 1:
        raise ConfigError(path, f"Kendall's tau must satisfy 0 <= tau < 1 for the Gumbel-Hougaard copula, got {tau}")
    if kind == "gaussian":
        # an exchangeable correlation matrix is positive definite iff r > -1/(K-1)
        r = float(tau_to_corr(tau)) if -1 <= tau <= 1 else float("nan")
        if not (-1 / max(K - 1, 1) < r < 1):
            raise ConfigError(path, f"tau = {tau} does not give a positive definite correlation matrix")


@dataclass(frozen=True)
class CensoringSpec:
    study_length: float
    accrual_length: float = 0.0
    accrual_shape: tuple[float, float] = (1.0, 1.0)
    dropout_hazard: float | None = None

    @classmethod
    def parse(cls, obj, path: str) -> "CensoringSpec":
        d = _mapping(obj, path, {"study_length", "accrual_length", "accrual_shape", "dropout_hazard"})
        if "study_length" not in d:
            raise ConfigError(f"{path}.study_length", "required")
        s = _number(d["study_length"], f"{path}.study_length", positive=True)
        b = _number(d.get("accrual_length", 0.0), f"{path}.accrual_length", nonneg=True)
        if b > s:
            raise ConfigError(f"{path}.accrual_length", "cannot exceed study_length")
        shape = d.get("accrual_shape", [1.0, 1.0])
        shape = _numbers(shape, f"{path}.accrual_shape", positive=True)
        if len(shape) != 2:
            raise ConfigError(f"{path}.accrual_shape", "expected two Beta shape parameters")
        drop = d.get("dropout_hazard")
        if drop is not None:
            drop = _number(drop, f"{path}.dropout_hazard", nonneg=True) or None
        return cls(s, b, shape, drop)

    def build(self, study_length: float | None = None) -> CensoringModel:
        s = self.study_length if study_length is None else study_length
        return CensoringModel(
            s, self.accrual_length, self.accrual_shape,
            Exponential(self.dropout_hazard) if self.dropout_hazard else None,
        )

    def to_dict(self) -> dict:
        return {
            "study_length": self.study_length,
            "accrual_length": self.accrual_length,
            "accrual_shape": list(self.accrual_shape),
            "dropout_hazard": self.dropout_hazard,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    endpoints: tuple[EndpointSpec, ...]
    dependence: DependenceSpec
    censoring: CensoringSpec
    semi_competing: bool = False

    @classmethod
    def parse(cls, obj, path: str = "scenario") -> "ScenarioConfig":
        d = _mapping(obj, path, {"endpoints", "dependence", "censoring", "semi_competing"})
        eps = d.get("endpoints")
        if not isinstance(eps, list) or not eps:
            raise ConfigError(f"{path}.endpoints", "expected a nonempty list")
        endpoints = tuple(EndpointSpec.parse(e, f"{path}.endpoints[{i}]") for i, e in enumerate(eps))
        dep = DependenceSpec.parse(d.get("dependence"), f"{path}.dependence", len(endpoints))
        if "censoring" not in d:
            raise ConfigError(f"{path}.censoring", "required")
        cens = CensoringSpec.parse(d["censoring"], f"{path}.censoring")
        semi = _flag(d.get("semi_competing", False), f"{path}.semi_competing")
        return cls(endpoints, dep, cens, semi)

    @property
    def K(self) -> int:
        return len(self.endpoints)

    def build(self, tau: float | None = None, study_length: float | None = None) -> ScenarioSpec:
        """The scenario, optionally with a common ``tau`` and another follow-up horizon."""
        dep = self.dependence if tau is None else DependenceSpec(self.dependence.copula, tau=float(tau))
        cop = dep.build(self.K)
        pairs = [e.models() for e in self.endpoints]
        return ScenarioSpec(
            control=ArmJointModel([p[0] for p in pairs], cop),
            treatment=ArmJointModel([p[1] for p in pairs], cop),
            censoring=self.censoring.build(study_length),
            semi_competing=self.semi_competing,
        )

    def to_dict(self) -> dict:
        return {
            "endpoints": [e.to_dict() for e in self.endpoints],
            "dependence": self.dependence.to_dict(),
            "censoring": self.censoring.to_dict(),
            "semi_competing": self.semi_competing,
        }


class ScenarioFactory:
    """Picklable ``(tau, s) -> ScenarioSpec`` for grid sweeps."""

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario

    def __call__(self, tau: float, s: float) -> ScenarioSpec:
        return self.scenario.build(tau=tau, study_length=s)


# design, sweep, sim, output -------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    """Stratum scenario: fields of ``over`` replace ``base``; censoring merges field by field."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k == "censoring" and isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **copy.deepcopy(v)}
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class StratumConfig:
    weight: float
    size: float
    scenario: ScenarioConfig


@dataclass(frozen=True)
class DesignConfig:
    allocation: float = 0.5
    alpha: float = 0.05
    power: float | None = 0.8
    n: int | None = None
    rounding: str = "auto"
    strata: tuple[StratumConfig, ...] = ()

    @classmethod
    def parse(cls, obj, path: str, scenario_raw: dict | None) -> "DesignConfig":
        d = _mapping(obj, path, {"allocation", "alpha", "power", "n", "rounding", "strata"})
        rho = _open_unit(_number(d.get("allocation", 0.5), f"{path}.allocation"), f"{path}.allocation")
        alpha = _open_unit(_number(d.get("alpha", 0.05), f"{path}.alpha"), f"{path}.alpha")
        if "power" in d and "n" in d:
            raise ConfigError(path, "give either power or n, not both")
        power, n = None, None
        if "n" in d:
            n = _number(d["n"], f"{path}.n", integer=True)
            if n < 2:
                raise ConfigError(f"{path}.n", "must be at least 2")
        else:
            power = _number(d.get("power", 0.8), f"{path}.power")
            if not alpha / 2 < power < 1:
                raise ConfigError(f"{path}.power", "must lie in (alpha/2, 1)")
        rounding = d.get("rounding", "auto")
        if rounding not in ROUNDINGS:
            raise ConfigError(f"{path}.rounding", f"must be one of {', '.join(ROUNDINGS)}")
        strata = []
        raw = d.get("strata") or []
        if not isinstance(raw, list):
            raise ConfigError(f"{path}.strata", "expected a list")
        for i, st in enumerate(raw):
            p = f"{path}.strata[{i}]"
            sd = _mapping(st, p, {"weight", "size", "scenario"})
            for key in ("weight", "size"):
                if key not in sd:
                    raise ConfigError(f"{p}.{key}", "required")
            w = _number(sd["weight"], f"{p}.weight", nonneg=True)
            size = _number(sd["size"], f"{p}.size", positive=True)
            over = _mapping(sd.get("scenario"), f"{p}.scenario",
                            {"endpoints", "dependence", "censoring", "semi_competing"})
            merged = _merge(scenario_raw or {}, over)
            strata.append(StratumConfig(w, size, ScenarioConfig.parse(merged, f"{p}.scenario")))
        if strata and sum(s.weight for s in strata) == 0:
            raise ConfigError(f"{path}.strata", "at least one stratum weight must be positive")
        return cls(rho, alpha, power, n, rounding, tuple(strata))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"allocation": self.allocation, "alpha": self.alpha}
        if self.n is not None:
            d["n"] = self.n
        else:
            d["power"] = self.power
        d["rounding"] = self.rounding
        if self.strata:
            d["strata"] = [
                {"weight": s.weight, "size": s.size, "scenario": s.scenario.to_dict()} for s in self.strata
            ]
        return d


@dataclass(frozen=True)
class SweepConfig:
    tau: tuple[float, ...]
    s: tuple[float, ...] | None = None
    power: tuple[float, ...] | None = None

    @classmethod
    def parse(cls, obj, path: str, kind: str, K: int, alpha: float) -> "SweepConfig":
        d = _mapping(obj, path, {"tau", "s", "power"})
        if "tau" not in d:
            raise ConfigError(f"{path}.tau", "required")
        taus = _numbers(d["tau"], f"{path}.tau")
        for i, t in enumerate(taus):
            check_tau(t, kind, f"{path}.tau[{i}]", K)
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ConfigError(f"{path}.tau", "must be strictly ascending")
        s = _numbers(d["s"], f"{path}.s", positive=True) if "s" in d else None
        powers = None
        if "power" in d:
            powers = _numbers(d["power"], f"{path}.power")
            for i, p in enumerate(powers):
                if not alpha / 2 < p < 1:
                    raise ConfigError(f"{path}.power[{i}]", "must lie in (alpha/2, 1)")
        return cls(taus, s, powers)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"tau": list(self.tau)}
        if self.s is not None:
            d["s"] = list(self.s)
        if self.power is not None:
            d["power"] = list(self.power)
        return d


@dataclass(frozen=True)
class SimBlock:
    replicates: int = 2000
    n: int = 1000
    seed: int = 20240101

    @classmethod
    def parse(cls, obj, path: str) -> "SimBlock":
        d = _mapping(obj, path, {"replicates", "n", "seed"})
        reps = _number(d.get("replicates", 2000), f"{path}.replicates", integer=True)
        if reps < 1:
            raise ConfigError(f"{path}.replicates", "must be at least 1")
        n = _number(d.get("n", 1000), f"{path}.n", integer=True)
        if n < 4:
            raise ConfigError(f"{path}.n", "must be at least 4")
        return cls(reps, n, parse_seed(d.get("seed", 20240101), f"{path}.seed"))

    def to_dict(self) -> dict:
        return {"replicates": self.replicates, "n": self.n, "seed": self.seed}


def parse_seed(obj, path: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int) or not 0 <= obj < 2**64:
        raise ConfigError(path, "expected an unsigned 64-bit integer")
    return obj


@dataclass(frozen=True)
class OutputConfig:
    format: str = "txt"
    path: str | None = None

    @classmethod
    def parse(cls, obj, path: str) -> "OutputConfig":
        d = _mapping(obj, path, {"format", "path"})
        fmt = d.get("format", "txt")
        if fmt not in FORMATS:
            raise ConfigError(f"{path}.format", f"must be one of {', '.join(FORMATS)}")
        out = d.get("path")
        if out is not None and not isinstance(out, str):
            raise ConfigError(f"{path}.path", "expected a string")
        return cls(fmt, out)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"format": self.format}
        if self.path is not None:
            d["path"] = self.path
        return d


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    design: DesignConfig = DesignConfig()
    sweep: SweepConfig | None = None
    sim: SimBlock | None = None
    output: OutputConfig = OutputConfig()

    @classmethod
    def from_dict(cls, raw) -> "RunConfig":
        d = _mapping(raw, "", {"scenario", "design", "sweep", "sim", "output"})
        if "scenario" not in d:
            raise ConfigError("scenario", "required")
        scenario = ScenarioConfig.parse(d["scenario"])
        design = DesignConfig.parse(d.get("design"), "design", d["scenario"])
        sweep = None
        if d.get("sweep") is not None:
            sweep = SweepConfig.parse(d["sweep"], "sweep", scenario.dependence.copula, scenario.K, design.alpha)
        sim = SimBlock.parse(d["sim"], "sim") if "sim" in d else None
        return cls(scenario, design, sweep, sim, OutputConfig.parse(d.get("output"), "output"))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"scenario": self.scenario.to_dict(), "design": self.design.to_dict()}
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        if self.sim is not None:
            d["sim"] = self.sim.to_dict()
        d["output"] = self.output.to_dict()
        return d

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, sim=replace(self.sim or SimBlock(), seed=seed))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return RunConfig.from_dict(raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
