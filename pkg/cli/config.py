"""
Leitura e validação dos arquivos de configuração de experimentos.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from algorithms.coarse_grain import ModelParams
from algorithms.errors import ConfigError
from data.oscillator_model import DEFAULT_FOCK_DIMS, DEFAULT_TIME_GRID, INTERIOR_EXCLUDE, WEAK_COUPLING_THRESHOLD

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
SCHEMA_DIR = Path(__file__).resolve().parent.parent / "configs" / "schema"
SWEEPABLE = ("k1", "k2", "kprime", "tau", "inv_temp")

DEFAULT_CORRESPONDENCE = {"mode": "physical", "alpha": None, "candidate": "best", "residual_sweep": False}
DEFAULT_EVOLVE = {"initial_state": "superposition", "lindblad": True, "exact": True, "phase_convention": "positive"}


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float
    sample_every: int = 1


@dataclass(frozen=True)
class SweepAxis:
    """Eixo de varredura: nome do parâmetro e lista de valores."""

    name: str
    values: tuple

    def points(self, params):
        return [params.replace(**{self.name: value}) for value in self.values]


@dataclass(frozen=True)
class Tolerances:
    interior_exclude: int = INTERIOR_EXCLUDE
    weak_coupling: float = WEAK_COUPLING_THRESHOLD
    trace_limit: float = 1e-6
    hermiticity_limit: float = 1e-6
    min_eigenvalue_limit: float = -1e-6
    population_limit: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    time_grid: TimeGrid
    sweep: SweepAxis = None
    output_dir: Path = Path("results")
    tolerances: Tolerances = Tolerances()
    constraints: dict = None
    correspondence: dict = field(default_factory=lambda: dict(DEFAULT_CORRESPONDENCE))
    evolve: dict = field(default_factory=lambda: dict(DEFAULT_EVOLVE))
    jobs: int = 1

    def sweep_points(self):
        """Lista de ModelParams (um único ponto quando não há varredura)."""
        if self.sweep is None:
            return [self.params]
        return self.sweep.points(self.params)


def load_schema(name):
    """Carrega um schema JSON de configs/schema."""
    with open(SCHEMA_DIR / name, encoding="utf-8") as f:
        return json.load(f)


def parse_sweep(text):
    """
    Converte 'NOME=v1,v2,...' em SweepAxis.

    Args:
        text: Texto no formato da opção --sweep.

    Returns:
        SweepAxis.
    """
    name, sep, values = text.partition("=")
    name = name.strip()
    if not sep or name not in SWEEPABLE:
        raise ConfigError(f"varredura inválida '{text}': use NOME=v1,v2 com NOME em {SWEEPABLE}")
    try:
        parsed = tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"valores de varredura não numéricos: '{values}'") from None
    if not parsed:
        raise ConfigError("varredura sem valores")
    return SweepAxis(name, parsed)


def _apply_overrides(raw, overrides):
    raw = json.loads(json.dumps(raw))
    if overrides.get("fock_dim") is not None:
        raw["fock_dims"] = [overrides["fock_dim"]] * 2
    if overrides.get("tau") is not None:
        raw.setdefault("model", {})["tau"] = overrides["tau"]
    if overrides.get("sweep"):
        axis = parse_sweep(overrides["sweep"])
        raw["sweep"] = {"name": axis.name, "values": list(axis.values)}
    if overrides.get("interior_exclude") is not None:
        raw.setdefault("tolerances", {})["interior_exclude"] = overrides["interior_exclude"]
    if overrides.get("out"):
        raw.setdefault("output", {})["dir"] = str(overrides["out"])
    return raw


def load_config(path, overrides=None):
    """
    Lê, aplica as opções da linha de comando, valida e constrói a configuração.

    Args:
        path: Caminho do arquivo JSON.
        overrides: Dicionário com fock_dim, tau, sweep, interior_exclude, out, jobs.

    Returns:
        ExperimentConfig com os invariantes físicos já verificados.
    """
    overrides = overrides or {}
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"não foi possível ler {path}: {e}") from e

    raw = _apply_overrides(raw, overrides)
    try:
        jsonschema.validate(instance=raw, schema=load_schema("experiment.schema.json"))
    except jsonschema.ValidationError as e:
        location = "/".join(str(p) for p in e.absolute_path) or "<raiz>"
        raise ConfigError(f"{path}: {location}: {e.message}") from e

    model = raw["model"]
    params = ModelParams(
        k1=model["k1"],
        k2=model["k2"],
        kprime=model["kprime"],
        tau=model["tau"],
        inv_temp=model["inv_temp"],
        fock_dims=tuple(raw.get("fock_dims", DEFAULT_FOCK_DIMS)),
    )
    grid = {**DEFAULT_TIME_GRID, **raw.get("time_grid", {})}
    if grid["dt"] >= grid["t_final"]:
        raise ConfigError("time_grid.dt deve ser menor que time_grid.t_final")

    sweep = None
    if "sweep" in raw:
        sweep = SweepAxis(raw["sweep"]["name"], tuple(raw["sweep"]["values"]))
        # Cada ponto passa pelos invariantes de ModelParams
        sweep.points(params)

    config = ExperimentConfig(
        params=params,
        time_grid=TimeGrid(grid["t_final"], grid["dt"], grid["sample_every"]),
        sweep=sweep,
        output_dir=Path(raw.get("output", {}).get("dir", "results")),
        tolerances=Tolerances(**raw.get("tolerances", {})),
        constraints=raw.get("constraints"),
        correspondence={**DEFAULT_CORRESPONDENCE, **raw.get("correspondence", {})},
        evolve={**DEFAULT_EVOLVE, **raw.get("evolve", {})},
        jobs=int(overrides.get("jobs") or 1),
    )
    if config.correspondence["mode"] == "synthetic" and config.correspondence["alpha"] is None:
        raise ConfigError("modo sintético exige correspondence.alpha")
    logger.info("configuração %s carregada (%d ponto(s))", path, len(config.sweep_points()))
    return config
