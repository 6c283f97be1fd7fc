"""Experiment configuration: a flat INI-style sectioned key-value file.

Unknown sections or keys are errors so that typos fail fast. Example:

    [graph]
    kind = erdos_renyi
    n = 50
    q = 0.1
    seed = 7

    [mixing]
    rule = metropolis
    lazify = false

    [combiner]
    variants = ed, nids:c=0.5

    [problem]
    type = logistic
    data = data/ijcnn1
    ridge = 0.01
    prox = l1
    prox_weight = 0.01

    [run]
    alpha = 1/L
    p_list = 1, 0.5, 0.2
    iterations = 400
    seeds = 1

    [outputs]
    csv = out/run.csv
    svg = out/run.svg
    checks = false
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass(eq=False)
class GraphConfig:
    kind: str = "ring"
    n: int = 10
    q: float = 0.1
    seed: int = 0


@dataclass(eq=False)
class MixingConfig:
    rule: str = "metropolis"
    lazify: bool = False


@dataclass(eq=False)
class ProblemConfig:
    type: str = "quadratic"
    # quadratic knobs
    d: int = 5
    target_seed: int = 0
    curvature_min: float = 1.0
    curvature_max: float = 1.0
    target_scale: float = 1.0
    target_offset_scale: float = 0.0
    # logistic knobs
    data: str = ""
    ridge: float = 0.0
    map_01_labels: bool = False
    normalize: bool = False
    max_samples: int = 0
    partition_seed: int = 0
    # shared prox term
    prox: str = "none"
    prox_weight: float = 0.0


@dataclass(eq=False)
class RunConfig:
    alpha: str = "1/L"
    p_list: tuple[float, ...] = (1.0,)
    iterations: int = 100
    seeds: tuple[int, ...] = (1,)
    target_rel_err: float = 1e-6
    init: str = "zeros"
    init_seed: int = 0
    init_scale: float = 1.0
    record_kkt: bool = True


@dataclass(eq=False)
class OutputConfig:
    csv: str = "run.csv"
    svg: str = "run.svg"
    checks: bool = False


@dataclass(eq=False)
class ExperimentConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    mixing: MixingConfig = field(default_factory=MixingConfig)
    variants: tuple[str, ...] = ("ed",)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    run: RunConfig = field(default_factory=RunConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def resolve_alpha(self, big_l: float) -> float:
        raw = self.run.alpha.strip()
        if raw.lower() in ("1/l", "1/ l"):
            return 1.0 / big_l
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"alpha must be a number or '1/L', got {raw!r}") from exc


def _parse_bool(raw: str, key: str) -> bool:
    val = raw.strip().lower()
    if val in ("true", "yes", "on", "1"):
        return True
    if val in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _parse_list(raw: str, key: str, conv) -> tuple:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: list must not be empty")
    return tuple(conv(s, key) for s in items)


_SECTION_KEYS = {
    "graph": {"kind", "n", "q", "seed"},
    "mixing": {"rule", "lazify"},
    "combiner": {"variants"},
    "problem": {
        "type", "d", "target_seed", "curvature_min", "curvature_max",
        "target_scale", "target_offset_scale", "data", "ridge",
        "map_01_labels", "normalize", "max_samples", "partition_seed",
        "prox", "prox_weight",
    },
    "run": {
        "alpha", "p_list", "iterations", "seeds", "target_rel_err",
        "init", "init_seed", "init_scale", "record_kkt",
    },
    "outputs": {"csv", "svg", "checks"},
}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

    cfg = ExperimentConfig()
    if parser.has_section("graph"):
        g = parser["graph"]
        cfg.graph = GraphConfig(
            kind=g.get("kind", cfg.graph.kind).strip(),
            n=_parse_int(g.get("n", str(cfg.graph.n)), "graph.n"),
            q=_parse_float(g.get("q", str(cfg.graph.q)), "graph.q"),
            seed=_parse_int(g.get("seed", str(cfg.graph.seed)), "graph.seed"),
        )
        if cfg.graph.kind not in ("ring", "complete", "erdos_renyi"):
            raise ConfigError(f"graph.kind must be ring|complete|erdos_renyi, got {cfg.graph.kind!r}")
    if parser.has_section("mixing"):
        m = parser["mixing"]
        cfg.mixing = MixingConfig(
            rule=m.get("rule", cfg.mixing.rule).strip(),
            lazify=_parse_bool(m.get("lazify", "false"), "mixing.lazify"),
        )
        if cfg.mixing.rule != "metropolis":
            raise ConfigError(f"mixing.rule only supports 'metropolis', got {cfg.mixing.rule!r}")
    if parser.has_section("combiner"):
        raw = parser["combiner"].get("variants", "")
        cfg.variants = _parse_list(raw, "combiner.variants", lambda s, _k: s)
    if parser.has_section("problem"):
        p = parser["problem"]
        cfg.problem = ProblemConfig(
            type=p.get("type", cfg.problem.type).strip(),
            d=_parse_int(p.get("d", str(cfg.problem.d)), "problem.d"),
            target_seed=_parse_int(p.get("target_seed", "0"), "problem.target_seed"),
            curvature_min=_parse_float(p.get("curvature_min", "1.0"), "problem.curvature_min"),
            curvature_max=_parse_float(p.get("curvature_max", "1.0"), "problem.curvature_max"),
            target_scale=_parse_float(p.get("target_scale", "1.0"), "problem.target_scale"),
            target_offset_scale=_parse_float(
                p.get("target_offset_scale", "0.0"), "problem.target_offset_scale"
            ),
            data=p.get("data", "").strip(),
            ridge=_parse_float(p.get("ridge", "0.0"), "problem.ridge"),
            map_01_labels=_parse_bool(p.get("map_01_labels", "false"), "problem.map_01_labels"),
            normalize=_parse_bool(p.get("normalize", "false"), "problem.normalize"),
            max_samples=_parse_int(p.get("max_samples", "0"), "problem.max_samples"),
            partition_seed=_parse_int(p.get("partition_seed", "0"), "problem.partition_seed"),
            prox=p.get("prox", "none").strip(),
            prox_weight=_parse_float(p.get("prox_weight", "0.0"), "problem.prox_weight"),
        )
        if cfg.problem.type not in ("quadratic", "logistic"):
            raise ConfigError(f"problem.type must be quadratic|logistic, got {cfg.problem.type!r}")
        if cfg.problem.type == "logistic" and not cfg.problem.data:
            raise ConfigError("logistic problems need problem.data (path to a LIBSVM file)")
        if cfg.problem.prox not in ("none", "l1"):
            raise ConfigError(f"problem.prox must be none|l1, got {cfg.problem.prox!r}")
    if parser.has_section("run"):
        r = parser["run"]
        cfg.run = RunConfig(
            alpha=r.get("alpha", "1/L").strip(),
            p_list=_parse_list(r.get("p_list", "1"), "run.p_list", _parse_float),
            iterations=_parse_int(r.get("iterations", "100"), "run.iterations"),
            seeds=_parse_list(r.get("seeds", "1"), "run.seeds", _parse_int),
            target_rel_err=_parse_float(r.get("target_rel_err", "1e-6"), "run.target_rel_err"),
            init=r.get("init", "zeros").strip(),
            init_seed=_parse_int(r.get("init_seed", "0"), "run.init_seed"),
            init_scale=_parse_float(r.get("init_scale", "1.0"), "run.init_scale"),
            record_kkt=_parse_bool(r.get("record_kkt", "true"), "run.record_kkt"),
        )
        if any(not (0.0 < p <= 1.0) for p in cfg.run.p_list):
            raise ConfigError(f"run.p_list values must lie in (0, 1]: {cfg.run.p_list}")
        if cfg.run.iterations < 1:
            raise ConfigError("run.iterations must be >= 1")
        if cfg.run.init not in ("zeros", "random"):
            raise ConfigError(f"run.init must be zeros|random, got {cfg.run.init!r}")
    if parser.has_section("outputs"):
        o = parser["outputs"]
        cfg.outputs = OutputConfig(
            csv=o.get("csv", cfg.outputs.csv).strip(),
            svg=o.get("svg", cfg.outputs.svg).strip(),
            checks=_parse_bool(o.get("checks", "false"), "outputs.checks"),
        )
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
