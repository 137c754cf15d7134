"""
Correspondência entre vínculos clássicos de segunda classe e a dissipação
quântica do modelo de osciladores acoplados.

Lado clássico: Σ_ab D_ab χ_b φ_a, com χ_b = {φ_b, H_c}. Para o par
(φ₁, φ₂) do modelo sobra (1/η)φ₂² mais um termo fracamente nulo em φ₁.
Lado quântico: ½ Σ_αβ γ_αβ S_β† S_α sobre a base (a, a†).

Notação: K = k′²/k₂ − k₁ (negativo para |k′| < √(k₁k₂)), η = α² − Kβ²,
θ = arg γ₁₂ e g = γ₁₁.
"""
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from algorithms.coarse_grain import (
    dissipation_limit,
    limit_dissipation_matrix,
    model_spec,
    system_basis,
)
from algorithms.errors import DegenerateModelError, LayoutMismatchError
from algorithms.fock import DEFAULT_INTERIOR_EXCLUDE, interior_block, ladder_ops, weyl_quantize
from algorithms.lindblad import DissipationMatrix, to_lindblad_form
from algorithms.poly_mech import (
    AffineConstraint,
    PhaseLayout,
    classify_constraints,
    consistency_chain,
    constraint_quadratic_form,
    oscillator_hamiltonian,
)
from data.oscillator_model import PHASE_NAMES
from utils.metrics import relative_gap

logger = logging.getLogger(__name__)

ETA_TOL = 1e-12
ALIGNMENT_TOL = 1e-10
FACTOR_CONVENTIONS = ("1/(2*gamma11*eta)", "1/(gamma11*eta)")
SELECTORS = ("best", "alp1+", "alp1-", "alp2+", "alp2-")


@dataclass(frozen=True)
class CoefficientSolution:
    """Coeficientes (α, β, γ, δ) dos vínculos e os candidatos para α."""

    candidates: tuple
    beta: float
    gamma_c: float
    delta: float
    k_eff: float
    c0: float
    c1: float
    theta: float
    gamma11: float

    def real_candidates(self):
        return [c for c in self.candidates if c["alpha"] is not None]

    def select(self, selector="best"):
        """
        Escolhe um candidato real.

        Args:
            selector: 'best' (menor soma de resíduos), 'alp1+', 'alp1-',
                'alp2+', 'alp2-' ou um índice inteiro em ``candidates``.

        Returns:
            Dicionário do candidato, ou None quando não há solução real.
        """
        real = self.real_candidates()
        if isinstance(selector, int):
            chosen = self.candidates[selector]
            return chosen if chosen["alpha"] is not None else None
        if selector == "best":
            return min(real, key=lambda c: c["residual_total"], default=None)
        if selector not in SELECTORS:
            raise ValueError(f"seletor desconhecido: {selector}")
        family, sign = selector[:-1], selector[-1]
        for candidate in real:
            if candidate["family"] == family and candidate["sign"] == sign:
                return candidate
        return None

    def to_dict(self):
        return {
            "beta": self.beta,
            "gamma": self.gamma_c,
            "delta": self.delta,
            "k_eff": self.k_eff,
            "c0": self.c0,
            "c1": self.c1,
            "theta": self.theta,
            "gamma11": self.gamma11,
            "candidates": [dict(c) for c in self.candidates],
        }


@dataclass
class CorrespondenceReport:
    mode: str
    status: str
    params: dict
    candidate: dict = None
    solution: dict = None
    coefficient_residuals: dict = None
    reduced_residuals: dict = None
    identity_residual: float = None
    operator_gap: dict = None
    hermiticity: dict = None
    weak_term: dict = None
    gamma_consistency_gap: float = None
    lindblad_identity: dict = None
    regime: dict = None
    gamma: list = None
    execution_time: float = field(default=0.0, repr=False)

    def to_dict(self):
        """Dicionário serializável (sem tempo de execução, infinitos viram None)."""
        data = {
            "mode": self.mode,
            "status": self.status,
            "params": self.params,
            "candidate": self.candidate,
            "solution": self.solution,
            "coefficient_residuals": self.coefficient_residuals,
            "reduced_residuals": self.reduced_residuals,
            "c5c6_minus_c7sq": self.identity_residual,
            "operator_gap": self.operator_gap,
            "hermiticity": self.hermiticity,
            "weak_term": self.weak_term,
            "gamma_consistency_gap": self.gamma_consistency_gap,
            "lindblad_identity": self.lindblad_identity,
            "regime": self.regime,
            "gamma": self.gamma,
        }
        return _json_ready(data)


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def effective_stiffness(params):
    """K = k′²/k₂ − k₁."""
    return params.kprime ** 2 / params.k2 - params.k1


def _eta(params, alpha, beta):
    eta = alpha ** 2 - effective_stiffness(params) * beta ** 2
    direct = alpha ** 2 + (params.k1 - params.kprime ** 2 / params.k2) * beta ** 2
    if abs(eta - direct) > ETA_TOL * max(1.0, abs(direct)):
        raise RuntimeError(f"η inconsistente: {eta} ≠ {direct}")
    return eta


def _reduced_residuals(params, sol, alpha):
    """Resíduos das equações reduzidas para um α (com β da solução)."""
    k, beta = sol.k_eff, sol.beta
    eta = _eta(params, alpha, beta)
    if eta == 0:
        raise DegenerateModelError("η = 0")
    r5 = sol.c0 - k ** 2 * beta ** 2 / eta
    r6 = sol.c1 - alpha ** 2 / eta
    r7 = -0.5 * sol.gamma11 * math.sin(sol.theta) - k * alpha * beta / eta
    return eta, {"c5": abs(r5), "c6": abs(r6), "c7": abs(r7)}


def solve_coefficients(params, gamma=None):
    """
    Resolve α a partir de c₀ e c₁ com β = 1, γ = 0 e δ = (k′/k₂)β.

        c₀ = ω₀ γ₁₁ cos²(θ/2),  c₁ = γ₁₁ sin²(θ/2)/ω₀
        α² = K(1 + K/c₀)        (primeira família)
        α² = c₁K/(c₁ − 1)       (segunda família)

    Args:
        params: ModelParams.
        gamma: Matriz γ 2×2 na forma limite (padrão: forma limite do modelo).

    Returns:
        CoefficientSolution com até quatro candidatos reais; radicandos
        negativos aparecem como 'no real solution'.
    """
    if params.kprime ** 2 >= params.k1 * params.k2:
        raise DegenerateModelError("k′² deve ser menor que k₁k₂")
    if gamma is None:
        gamma = limit_dissipation_matrix(params).gamma
    gamma = np.asarray(gamma, dtype=complex)
    g = float(gamma[0, 0].real)
    if g <= 0:
        raise DegenerateModelError(f"γ₁₁ = {g:.3g}: acoplamento nulo não determina os vínculos")
    theta = float(np.angle(gamma[0, 1]))
    w0 = params.omega0
    k = effective_stiffness(params)
    beta = 1.0
    c0 = w0 * g * math.cos(theta / 2) ** 2
    c1 = g * math.sin(theta / 2) ** 2 / w0

    radicands = {
        "alp1": k * (1 + k / c0) if c0 > 0 else -math.inf,
        "alp2": c1 * k / (c1 - 1) if c1 != 1 else -math.inf,
    }
    base = CoefficientSolution((), beta, 0.0, params.kprime / params.k2 * beta, k, c0, c1, theta, g)
    candidates = []
    for family, radicand in radicands.items():
        if radicand < 0:
            logger.info("%s sem solução real (radicando %.6g)", family, radicand)
            candidates.append({
                "family": family, "sign": None, "alpha": None, "status": "no real solution",
                "radicand": radicand, "eta": None, "residuals": None, "residual_total": None,
            })
            continue
        root = math.sqrt(radicand)
        for sign, alpha in (("+", root), ("-", -root)):
            eta, residuals = _reduced_residuals(params, base, alpha)
            candidates.append({
                "family": family, "sign": sign, "alpha": alpha, "status": "ok",
                "radicand": radicand, "eta": eta, "residuals": residuals,
                "residual_total": sum(residuals.values()),
            })
    return CoefficientSolution(tuple(candidates), beta, 0.0, base.delta, k, c0, c1, theta, g)


def identity_residual(sol, candidate):
    """
    |c₀c₁ − c₇²| com c₇ = Kαβ/η tirado do candidato resolvido.

    Zera quando o candidato satisfaz as equações de c₅ e c₆; com apenas uma
    delas satisfeita sobra c₀·r₆ (primeira família) ou c₁·r₅ (segunda).

    Args:
        sol: CoefficientSolution.
        candidate: Candidato real de sol.candidates.

    Returns:
        Resíduo absoluto.
    """
    c7 = sol.k_eff * candidate["alpha"] * sol.beta / candidate["eta"]
    return float(abs(sol.c0 * sol.c1 - c7 ** 2))


def synthetic_dissipation(params, alpha, beta=1.0):
    """
    γ na forma limite construída para satisfazer as equações reduzidas
    exatamente para (α, β) dados.

        g cos²(θ/2) = K²β²/(ηω₀),  g sin²(θ/2) = ω₀α²/η,  sinal de θ = −sinal(Kαβ)

    Returns:
        DissipationMatrix sobre (a, a†).
    """
    k = effective_stiffness(params)
    eta = _eta(params, alpha, beta)
    if eta <= 0:
        raise DegenerateModelError(f"η = {eta:.3g} não positivo")
    w0 = params.omega0
    cos_part = k ** 2 * beta ** 2 / (eta * w0)
    sin_part = w0 * alpha ** 2 / eta
    g = cos_part + sin_part
    half_theta = -np.sign(k * alpha * beta) * math.atan(math.sqrt(sin_part / cos_part))
    phase = np.exp(2j * half_theta)
    gamma = g * np.array([[1.0, phase], [np.conj(phase), 1.0]])
    meta = {"alpha": alpha, "beta": beta, "eta": eta, "theta": 2 * half_theta, "g": g}
    return DissipationMatrix(gamma=gamma, basis=system_basis(params), meta=meta)


def build_constraints(sol, params, alpha=None):
    """
    Vínculos do modelo para um candidato real.

        φ₁ = αx₁ + β(p₁ + (k′/k₂)p₂)
        φ₂ = (k₁ − k′²/k₂)βx₁ − αp₁

    O par é conferido contra a cadeia de consistência aplicada a φ₁.

    Returns:
        Tupla (φ₁, φ₂) de AffineConstraint.
    """
    if alpha is None:
        chosen = sol.select("best")
        if chosen is None:
            raise DegenerateModelError("nenhum candidato real para α")
        alpha = chosen["alpha"]
    beta = sol.beta
    phi1 = AffineConstraint([alpha, beta, sol.gamma_c, sol.delta], label="phi1")
    phi2 = AffineConstraint([-sol.k_eff * beta, -alpha, 0.0, 0.0], label="phi2")

    cosine = chain_alignment(phi1, phi2, params)
    if abs(abs(cosine) - 1) > ALIGNMENT_TOL:
        raise RuntimeError(f"secundário da cadeia não é paralelo a φ₂ (cosseno {cosine:.12g})")
    return phi1, phi2


def chain_alignment(phi1, phi2, params):
    """Cosseno entre φ₂ e o secundário produzido por consistency_chain(φ₁)."""
    h_c = oscillator_hamiltonian(params.k1, params.k2, params.kprime, PhaseLayout(2, PHASE_NAMES))
    cs = consistency_chain(h_c, [phi1])
    if len(cs.secondaries) != 1:
        raise RuntimeError(f"esperado um secundário, obtidos {len(cs.secondaries)}")
    secondary = cs.secondaries[0].coeffs
    return float(secondary @ phi2.coeffs / (np.linalg.norm(secondary) * np.linalg.norm(phi2.coeffs)))


def _constraint_polys(phi1, phi2, h_c):
    layout = h_c.layout
    cs = classify_constraints(layout, (phi1,), (phi2,))
    form = constraint_quadratic_form(cs, h_c)
    return phi1.to_poly(layout), phi2.to_poly(layout), form


def weak_term_operator(phi1, phi2, spec, h_c):
    """Quantização de Weyl de D₁₂χ₂φ₁ no espaço sistema⊗banho."""
    _, _, form = _constraint_polys(phi1, phi2, h_c)
    return weyl_quantize(form["terms"][(0, 1)], spec)


def classical_lhs_operator(phi1, phi2, eta, spec, h_c, exclude=DEFAULT_INTERIOR_EXCLUDE):
    """
    Lado clássico quantizado.

    Args:
        phi1: Vínculo φ₁ (envolve o banho via p₂).
        phi2: Vínculo φ₂ (apenas variáveis do sistema).
        eta: η = −{φ₁, φ₂}.
        spec: FockSpec de dois modos (sistema, banho).
        h_c: Hamiltoniano canônico no layout de dois graus de liberdade.
        exclude: Níveis descartados no bloco interior.

    Returns:
        Tupla (operador (1/η)φ̂₂² no sistema, norma espectral do termo fraco
        no bloco interior de sistema⊗banho).
    """
    if eta == 0:
        raise DegenerateModelError("η = 0")
    if np.any(phi2.coeffs[2:]):
        raise LayoutMismatchError("φ₂ deve envolver apenas variáveis do sistema")
    _, phi2_poly, form = _constraint_polys(phi1, phi2, h_c)
    reduced_poly = phi2_poly ** 2 * (1.0 / eta)
    if not form["terms"][(1, 0)].allclose(reduced_poly, atol=1e-9 * max(1.0, reduced_poly.max_abs_coefficient())):
        logger.warning("termo D₂₁χ₁φ₂ difere de φ₂²/η: η informado inconsistente")

    reduced = weyl_quantize(reduced_poly, spec.subspec([0]))
    weak = weyl_quantize(form["terms"][(0, 1)], spec)
    weak_norm = float(np.linalg.norm(interior_block(weak, spec, exclude), 2))
    return reduced, weak_norm


def quantum_rhs_operator(gamma, spec):
    """
    ½ Σ_αβ γ_αβ S_β† S_α = ½[γ₁₁a†a + γ₂₂aa† + γ₁₂a² + γ₂₁(a†)²].

    Args:
        gamma: DissipationMatrix sobre (a, a†).
        spec: FockSpec do sistema (um modo).

    Returns:
        Operador no espaço do sistema.
    """
    a, a_dag, _, _ = ladder_ops(spec.subspec([0]), 0)
    if len(gamma.basis) != 2 or gamma.basis[0].shape != a.shape:
        raise LayoutMismatchError("a base deve ser (a, a†) na dimensão do sistema")
    if np.abs(gamma.basis[0] - a).max() > 1e-12 or np.abs(gamma.basis[1] - a_dag).max() > 1e-12:
        raise LayoutMismatchError("a base deve ser (a, a†)")
    g = gamma.gamma
    return 0.5 * (g[0, 0] * a_dag @ a + g[1, 1] * a @ a_dag + g[0, 1] * a @ a + g[1, 0] * a_dag @ a_dag)


def coefficient_equations(gamma, omega0):
    """
    Coeficientes de x², p², xp e px em ½ Σ γ_αβ S_β† S_α (m = 1).

    Returns:
        Dicionário com valores complexos.
    """
    g = np.asarray(gamma, dtype=complex)
    g11, g12, g21, g22 = g[0, 0], g[0, 1], g[1, 0], g[1, 1]
    return {
        "x2": omega0 / 4 * (g11 + g22 + g12 + g21),
        "p2": (g11 + g22 - g12 - g21) / (4 * omega0),
        "xp": 0.25j * (g11 - g22 + g12 - g21),
        "px": 0.25j * (-g11 + g22 + g12 - g21),
    }


def classical_coefficients(phi2, eta):
    """Coeficientes de x², p², xp e px em (1/η)φ₂² com ordenação de Weyl."""
    cx, cp = phi2.coeffs[0], phi2.coeffs[1]
    return {"x2": cx ** 2 / eta, "p2": cp ** 2 / eta, "xp": cx * cp / eta, "px": cx * cp / eta}


def lindblad_constraint_identity(params, sol, gamma=None, alpha=None, exclude=DEFAULT_INTERIOR_EXCLUDE):
    """
    Compara L₁L₁† com φ̂₂²/(2γ₁₁η) e com φ̂₂²/(γ₁₁η) no bloco interior.

    Returns:
        Dicionário com os dois resíduos relativos, a convenção preferida e
        as taxas da forma diagonal.
    """
    if gamma is None:
        gamma = limit_dissipation_matrix(params)
    g = float(gamma.gamma[0, 0].real)
    if g <= 0:
        raise DegenerateModelError("γ₁₁ = 0")
    form = to_lindblad_form(gamma)
    l1 = form.jump_ops[0]
    l1l1 = l1 @ l1.conj().T

    phi1, phi2 = build_constraints(sol, params, alpha)
    eta = _eta(params, float(phi1.coeffs[0]), sol.beta)
    layout = PhaseLayout(2, PHASE_NAMES)
    phi2_sq = weyl_quantize(phi2.to_poly(layout) ** 2, model_spec(params).subspec([0]))

    dims = (params.fock_dims[0],)
    target = interior_block(l1l1, dims, exclude)
    residuals = {}
    for name, factor in zip(FACTOR_CONVENTIONS, (1 / (2 * g * eta), 1 / (g * eta))):
        _, residuals[name] = relative_gap(interior_block(factor * phi2_sq, dims, exclude), target)
    preferred = min(residuals, key=residuals.get)
    return {
        "residual_half": residuals[FACTOR_CONVENTIONS[0]],
        "residual_full": residuals[FACTOR_CONVENTIONS[1]],
        "preferred": preferred,
        "rates": form.rates.tolist(),
        "eta": eta,
    }


def _low_lying_max(op, dims, levels=2):
    idx = [np.ravel_multi_index(level, dims) for level in itertools.product(range(levels), repeat=len(dims))]
    return float(np.abs(np.asarray(op)[np.ix_(idx, idx)]).max())


def verify(params, candidate_selector="best", synthetic_alpha=None, interior_exclude=DEFAULT_INTERIOR_EXCLUDE):
    """
    Monta os dois lados da correspondência e mede todos os resíduos.

    No modo físico γ vem da forma limite do modelo; no modo sintético γ é
    construído a partir de ``synthetic_alpha`` (β = 1).

    Args:
        params: ModelParams.
        candidate_selector: Seletor passado a CoefficientSolution.select.
        synthetic_alpha: α do modo sintético (None para o modo físico).
        interior_exclude: Níveis descartados no bloco interior.

    Returns:
        CorrespondenceReport.
    """
    start_time = time.time()
    mode = "physical" if synthetic_alpha is None else "synthetic"
    _, regime = dissipation_limit(params)
    report = CorrespondenceReport(mode=mode, status="ok", params=params.to_dict(), regime=regime)
    report.gamma_consistency_gap = regime["mismatch"]

    if mode == "physical":
        if params.kprime == 0:
            report.status = "degenerate"
            logger.warning("k′ = 0: γ nulo, correspondência degenerada")
            report.execution_time = (time.time() - start_time) * 1000
            return report
        gamma = limit_dissipation_matrix(params)
    else:
        gamma = synthetic_dissipation(params, synthetic_alpha)
    report.gamma = [[[float(v.real), float(v.imag)] for v in row] for row in gamma.gamma]

    sol = solve_coefficients(params, gamma.gamma)
    report.solution = sol.to_dict()
    candidate = sol.select(candidate_selector)
    if candidate is None:
        report.status = "no_real_solution"
        logger.warning("nenhum candidato real para o seletor %s", candidate_selector)
        report.execution_time = (time.time() - start_time) * 1000
        return report
    report.candidate = dict(candidate)
    alpha, eta = candidate["alpha"], candidate["eta"]

    phi1, phi2 = build_constraints(sol, params, alpha)
    spec = model_spec(params)
    h_c = oscillator_hamiltonian(params.k1, params.k2, params.kprime, PhaseLayout(2, PHASE_NAMES))
    lhs, weak_norm = classical_lhs_operator(phi1, phi2, eta, spec, h_c, interior_exclude)
    rhs = quantum_rhs_operator(gamma, spec)

    sys_dims = (spec.dims[0],)
    lhs_in = interior_block(lhs, sys_dims, interior_exclude)
    rhs_in = interior_block(rhs, sys_dims, interior_exclude)
    absolute, relative = relative_gap(lhs_in, rhs_in)
    report.operator_gap = {"absolute": absolute, "relative": relative}
    report.hermiticity = {
        "lhs": float(np.abs(lhs_in - lhs_in.conj().T).max()),
        "rhs": float(np.abs(rhs_in - rhs_in.conj().T).max()),
    }

    weak = weak_term_operator(phi1, phi2, spec, h_c)
    report.weak_term = {
        "interior_norm": weak_norm,
        "full_norm": float(np.linalg.norm(weak, 2)),
        "low_lying_max": _low_lying_max(weak, spec.dims),
    }

    quantum = coefficient_equations(gamma.gamma, params.omega0)
    classical = classical_coefficients(phi2, eta)
    report.coefficient_residuals = {
        f"c{i}": float(abs(quantum[key] - classical[key]))
        for i, key in enumerate(("x2", "p2", "xp", "px"), start=1)
    }
    report.reduced_residuals = dict(candidate["residuals"])
    report.identity_residual = identity_residual(sol, candidate)
    report.lindblad_identity = lindblad_constraint_identity(params, sol, gamma, alpha, interior_exclude)

    report.execution_time = (time.time() - start_time) * 1000
    logger.info("verificação %s concluída: gap relativo %.3g", mode, relative)
    return report
