"""
Subcomandos da linha de comando. Cada um recebe um ExperimentConfig,
escreve seus arquivos em ``config.output_dir`` e retorna os caminhos
escritos.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np
from tqdm import tqdm

from algorithms.coarse_grain import (
    bath_state,
    chi0_column,
    dissipation_limit,
    dissipation_matrix_model,
    exact_reduced_trajectory,
    lamb_shift,
    markovian_comparison,
    system_hamiltonian,
    system_spec,
)
from algorithms.correspondence import verify
from algorithms.errors import ConfigError
from algorithms.fock import number_op
from algorithms.lindblad import MonitorLimits, build_generator, evolve_master, monitor_invariants
from algorithms.poly_mech import (
    AffineConstraint,
    PhaseLayout,
    PolyObservable,
    block_diagonalize,
    consistency_chain,
    derive_primary_constraints,
    oscillator_hamiltonian,
)
from cli.config import SCHEMA_VERSION, load_schema
from utils.metrics import complex_columns, create_results_table, expectation, format_duration, purity

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


# Escrita de arquivos

def write_json(report, path, schema_name):
    """Valida o relatório contra o schema e grava com chaves ordenadas."""
    report = {"schema_version": SCHEMA_VERSION, **report}
    jsonschema.validate(instance=report, schema=load_schema(schema_name))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(report, sort_keys=True, indent=2, allow_nan=False))
        f.write("\n")
    return path


def write_csv(rows, path, columns=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    df = create_results_table(rows, columns)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path


def run_sweep(func, points, jobs, desc):
    """Executa func em cada ponto; o resultado segue a ordem dos pontos."""
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        return list(tqdm(executor.map(func, points), total=len(points), desc=desc, disable=len(points) < 2))


def _sweep_columns(config, params):
    if config.sweep is None:
        return {}
    return {"sweep_name": config.sweep.name, "sweep_value": getattr(params, config.sweep.name)}


# constraints

def _build_hamiltonian(spec, params, layout):
    if spec == "oscillator":
        return oscillator_hamiltonian(params.k1, params.k2, params.kprime, layout)
    return PolyObservable.from_quadratic(
        layout,
        spec.get("matrix", np.zeros((layout.size, layout.size))),
        spec.get("linear"),
        spec.get("constant", 0.0),
    )


def _build_primaries(section, layout):
    if "mass_matrix" in section:
        return derive_primary_constraints(section["mass_matrix"], section.get("linear_velocity_terms"))
    primaries = []
    for k, item in enumerate(section.get("primaries", []), start=1):
        coeffs = item["coeffs"]
        if len(coeffs) != layout.size:
            raise ConfigError(f"primário {k} com {len(coeffs)} coeficientes para {layout.size} variáveis")
        primaries.append(AffineConstraint(coeffs, item.get("const", 0.0), label=f"primary_{k}"))
    return primaries


def cmd_constraints(config):
    """Executa a cadeia de Dirac e grava constraints.json."""
    section = config.constraints
    if section is None:
        raise ConfigError("a configuração não tem a seção 'constraints'")
    layout = PhaseLayout(section.get("n_dof", 2))
    h_c = _build_hamiltonian(section.get("hamiltonian", "oscillator"), config.params, layout)
    primaries = _build_primaries(section, layout)

    cs = consistency_chain(h_c, primaries)
    report = cs.to_dict()
    report["hamiltonian"] = str(h_c)
    report["blocks"] = None
    if cs.second_class_idx and cs.d_matrix is not None:
        report["blocks"] = list(block_diagonalize(cs.d_matrix).blocks)
    path = write_json(report, config.output_dir / "constraints.json", "constraints_report.schema.json")
    logger.info("%d vínculos (%d secundários) gravados em %s", len(cs.constraints), len(cs.secondaries), path)
    return [path]


# gamma

def gamma_row(params, weak_threshold=None):
    """Linha da tabela de γ para um ponto de parâmetros."""
    model = dissipation_matrix_model(params)
    gamma11_limit, regime = dissipation_limit(params)
    g = model.gamma
    row = {}
    for name, value in (("g11", g[0, 0]), ("g22", g[1, 1]), ("g12", g[0, 1]), ("g21", g[1, 0])):
        row.update(complex_columns(name, value))
    row["g11_limit"] = gamma11_limit
    row["mismatch"] = regime["mismatch"]
    row["limit_relative_error"] = regime["limit_relative_error"]
    row["min_eigenvalue"] = model.meta["min_eigenvalue"]
    row["markov_ordering"] = regime["markov_ordering"]
    row["coarse_graining_ordering"] = regime["coarse_graining_ordering"]
    if weak_threshold is not None:
        row["weak_coupling"] = abs(params.kappa) / params.omega0 <= weak_threshold
    return row


def cmd_gamma(config):
    """Grava gamma.csv com uma linha por ponto da varredura."""
    points = config.sweep_points()
    threshold = config.tolerances.weak_coupling
    rows = run_sweep(lambda p: gamma_row(p, threshold), points, config.jobs, "gamma")
    rows = [{**_sweep_columns(config, p), **row} for p, row in zip(points, rows)]
    return [write_csv(rows, config.output_dir / "gamma.csv")]


# correspond

def _verify_point(config, params):
    section = config.correspondence
    alpha = section["alpha"] if section["mode"] == "synthetic" else None
    return verify(params, section["candidate"], alpha, config.tolerances.interior_exclude)


def _sweep_summary(report):
    data = report.to_dict()
    row = {"status": data["status"]}
    row["operator_gap"] = data["operator_gap"]["relative"] if data["operator_gap"] else None
    row["c5c6_minus_c7sq"] = data["c5c6_minus_c7sq"]
    for key in ("c5", "c6", "c7"):
        row[key] = data["reduced_residuals"][key] if data["reduced_residuals"] else None
    lind = data["lindblad_identity"] or {}
    row["lindblad_half"] = lind.get("residual_half")
    row["lindblad_full"] = lind.get("residual_full")
    return row


def cmd_correspond(config):
    """Grava correspondence.json e, se pedido, a varredura de resíduos em CSV."""
    report = _verify_point(config, config.params)
    logger.info("verificação em %s", format_duration(report.execution_time))
    written = [
        write_json(report.to_dict(), config.output_dir / "correspondence.json", "correspondence_report.schema.json")
    ]
    if config.sweep is not None and config.correspondence["residual_sweep"]:
        points = config.sweep_points()
        reports = run_sweep(lambda p: _verify_point(config, p), points, config.jobs, "correspond")
        rows = [{**_sweep_columns(config, p), **_sweep_summary(r)} for p, r in zip(points, reports)]
        written.append(write_csv(rows, config.output_dir / "correspondence_sweep.csv"))
    return written


# evolve

def initial_state(name, dim):
    """Estados iniciais nomeados: 'ground', 'excited' ou 'superposition'."""
    psi = np.zeros(dim, dtype=complex)
    if name == "ground":
        psi[0] = 1.0
    elif name == "excited":
        psi[1] = 1.0
    elif name == "superposition":
        psi[:2] = 1 / math.sqrt(2)
    else:
        raise ConfigError(f"estado inicial desconhecido: {name}")
    return np.outer(psi, psi.conj())


def _state_columns(prefix, rho, n_op):
    report = monitor_invariants(rho)
    return {
        f"{prefix}trace": report["trace"],
        f"{prefix}purity": purity(rho),
        f"{prefix}n_mean": expectation(n_op, rho),
        f"{prefix}min_eigenvalue": report["min_eigenvalue"],
    }


def evolve_point(config, params):
    """
    Trajetória de Lindblad e/ou exata para um ponto de parâmetros.

    Returns:
        Tupla (linhas da tabela, maior distância de traço ou None).
    """
    section = config.evolve
    tol = config.tolerances
    grid = config.time_grid
    rho0 = initial_state(section["initial_state"], params.fock_dims[0])
    limits = MonitorLimits(tol.trace_limit, tol.hermiticity_limit, tol.min_eigenvalue_limit)
    n_op = number_op(system_spec(params), 0)
    convention = section["phase_convention"]

    lindblad = exact = None
    distances = None
    if section["lindblad"] and section["exact"]:
        comparison = markovian_comparison(
            params, rho0, grid.t_final, grid.dt, grid.sample_every, convention, limits, tol.population_limit
        )
        lindblad, exact, distances = comparison["lindblad"], comparison["exact"], comparison["trace_distance"]
        times = comparison["times"]
    elif section["lindblad"]:
        gamma = dissipation_matrix_model(params, convention)
        h_ls = lamb_shift(chi0_column(params, bath_state(params), convention), gamma.basis)
        generator = build_generator(system_hamiltonian(params), h_ls, gamma)
        lindblad = evolve_master(generator, rho0, grid.t_final, grid.dt, grid.sample_every, limits)
        times = lindblad["times"]
    elif section["exact"]:
        n_steps = int(round(grid.t_final / grid.dt))
        times = grid.dt * np.arange(0, n_steps + 1, grid.sample_every)
        exact = exact_reduced_trajectory(params, rho0, times, tol.population_limit)
    else:
        raise ConfigError("evolve: ao menos um entre 'lindblad' e 'exact' deve estar ativo")

    rows = []
    for k, t in enumerate(times):
        row = {"time": float(t)}
        if lindblad is not None:
            row.update(_state_columns("", lindblad["states"][k], n_op))
        if exact is not None:
            row.update(_state_columns("exact_", exact["states"][k], n_op))
        if distances is not None:
            row["trace_distance"] = float(distances[k])
        rows.append(row)
    max_distance = None if distances is None else float(distances.max())
    return rows, max_distance


def cmd_evolve(config):
    """Grava evolve.csv (ou um CSV por ponto e um resumo quando há varredura)."""
    points = config.sweep_points()
    results = run_sweep(lambda p: evolve_point(config, p), points, config.jobs, "evolve")
    if config.sweep is None:
        rows, _ = results[0]
        return [write_csv(rows, config.output_dir / "evolve.csv")]

    written = []
    summary = []
    for index, (params, (rows, max_distance)) in enumerate(zip(points, results)):
        written.append(write_csv(rows, config.output_dir / f"evolve_{index:03d}.csv"))
        summary.append({**_sweep_columns(config, params), "max_trace_distance": max_distance})
    written.append(write_csv(summary, config.output_dir / "evolve_summary.csv"))
    return written


COMMANDS = {
    "constraints": cmd_constraints,
    "gamma": cmd_gamma,
    "correspond": cmd_correspond,
    "evolve": cmd_evolve,
}
