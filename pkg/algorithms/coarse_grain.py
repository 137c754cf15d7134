"""
Dinâmica reduzida por coarse-graining: integrais Γ, matriz de dissipação do
modelo de osciladores acoplados, representação de Kraus, matriz χ, Lamb
shift e a dinâmica reduzida exata usada como referência.

Modelo: H = ω₀(a†a + ½) + ω_B(b†b + ½) + κ(a + a†)(b + b†), com
κ = −k′/(2√(ω₀ω_B)). Base do sistema: S₁ = a, S₂ = a†. Operadores do
banho: B₁ = b, B₂ = b†.
"""
import dataclasses
import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from algorithms.errors import ConfigError, LayoutMismatchError, NotPhysicalError, TruncationError
from algorithms.fock import (
    FockSpec,
    ZERO_TEMPERATURE,
    check_density_matrix,
    gram_matrix,
    hs_basis,
    is_hermitian,
    is_unitary,
    ladder_ops,
    partial_trace,
    propagate,
    propagator,
    thermal_state,
    to_identity_normalized,
)
from algorithms.lindblad import DissipationMatrix, build_generator, evolve_master
from data.oscillator_model import WEAK_COUPLING_THRESHOLD
from utils.metrics import trace_distance

logger = logging.getLogger(__name__)

PHASE_CONVENTIONS = {"positive": 1.0, "heisenberg": -1.0}
KRAUS_WEIGHT_CUTOFF = 1e-14
COMPLETENESS_TOL = 1e-10
POPULATION_LIMIT = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Constantes de mola, tempo de coarse-graining, temperatura do banho e truncagens."""

    k1: float
    k2: float
    kprime: float
    tau: float
    inv_temp: float
    fock_dims: tuple = (16, 4)

    def __post_init__(self):
        object.__setattr__(self, "fock_dims", tuple(int(n) for n in self.fock_dims))
        if self.k1 <= 0 or self.k2 <= 0:
            raise ConfigError(f"k1 e k2 devem ser positivos (k1 = {self.k1}, k2 = {self.k2})")
        if self.tau <= 0:
            raise ConfigError(f"tau deve ser positivo, recebido {self.tau}")
        if not self.inv_temp > 0:
            raise ConfigError(f"inv_temp deve ser positivo, recebido {self.inv_temp}")
        if abs(self.kprime) >= math.sqrt(self.k1 * self.k2):
            raise ConfigError("acoplamento instável: |k′| deve ser menor que √(k1·k2)")
        if len(self.fock_dims) != 2 or min(self.fock_dims) < 2:
            raise ConfigError(f"fock_dims inválido: {self.fock_dims}")

    @classmethod
    def from_frequencies(cls, omega0, omega_b, kprime, tau, inv_temp, fock_dims=(16, 4)):
        return cls(omega0 ** 2, omega_b ** 2, kprime, tau, inv_temp, fock_dims)

    @property
    def omega0(self):
        return math.sqrt(self.k1)

    @property
    def omega_b(self):
        return math.sqrt(self.k2)

    @property
    def kappa(self):
        return -self.kprime / (2 * math.sqrt(self.omega0 * self.omega_b))

    @property
    def tau_b(self):
        return 1 / self.omega_b

    @property
    def tau_0(self):
        return 1 / self.omega0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "k1": self.k1,
            "k2": self.k2,
            "kprime": self.kprime,
            "tau": self.tau,
            "inv_temp": self.inv_temp,
            "fock_dims": list(self.fock_dims),
        }


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Operadores K_lm = √p_m ⟨l|U|m⟩ no espaço do sistema."""

    ops: np.ndarray
    labels: tuple
    weights: np.ndarray

    def completeness_residual(self):
        total = np.einsum("kji,kjl->il", self.ops.conj(), self.ops)
        return float(np.abs(total - np.eye(total.shape[0])).max())


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    chi: np.ndarray
    t: float

    def apply(self, rho, basis):
        """Σ χ_αβ S_α ρ S_β†."""
        stack = np.asarray(basis)
        return np.einsum("ab,aij,jk,blk->il", self.chi, stack, rho, stack.conj())


def _phase_sign(convention):
    try:
        return PHASE_CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"convenção de fase desconhecida: {convention}") from None


# Funções Γ

def gamma_sinc(omega, tau):
    """
    Γ(ω, τ) = (1/τ)∫₀^τ e^{iωt} dt = e^{iωτ/2} sinc(ωτ/2), sinc(x) = sin x / x.

    Args:
        omega: Frequência (escalar ou array).
        tau: Tempo de integração (> 0).

    Returns:
        Valor complexo (ou array).
    """
    if tau <= 0:
        raise ValueError("tau deve ser positivo")
    x = np.asarray(omega) * tau / 2
    # np.sinc é normalizado: sinc(y) = sin(πy)/(πy)
    value = np.exp(1j * x) * np.sinc(x / np.pi)
    return complex(value) if value.ndim == 0 else value


def average_exponential_product(p_terms, q_terms, t):
    """(1/t)∫₀^t p(t′)q(t′)dt′ para somas de exponenciais [(amplitude, frequência), ...]."""
    total = 0j
    for amp_p, freq_p in p_terms:
        for amp_q, freq_q in q_terms:
            total += amp_p * amp_q * gamma_sinc(freq_p + freq_q, t)
    return total


def gamma_tensor(p_coeffs, q_coeffs, t):
    """
    Tensor Γ^{αγ}_{βδ}(t) = (1/t)∫₀^t p_βα(t′) q_δγ(t′) dt′.

    Args:
        p_coeffs: Lista aninhada [β][α] de somas de exponenciais.
        q_coeffs: Lista aninhada [δ][γ] de somas de exponenciais.
        t: Tempo (> 0).

    Returns:
        Array complexo indexado por [α, γ, β, δ].
    """
    n_beta, n_alpha = len(p_coeffs), len(p_coeffs[0])
    n_delta, n_gamma = len(q_coeffs), len(q_coeffs[0])
    out = np.zeros((n_alpha, n_gamma, n_beta, n_delta), dtype=complex)
    for beta in range(n_beta):
        for alpha in range(n_alpha):
            for delta in range(n_delta):
                for gamma in range(n_gamma):
                    out[alpha, gamma, beta, delta] = average_exponential_product(
                        p_coeffs[beta][alpha], q_coeffs[delta][gamma], t
                    )
    return out


def bose_occupation(omega, inv_temp):
    """⟨b†b⟩ = 1/(e^{βω} − 1); zero na temperatura nula."""
    if inv_temp == ZERO_TEMPERATURE:
        return 0.0
    return 1.0 / math.expm1(inv_temp * omega)


def model_coupling_tensor(params, t, convention="positive"):
    """
    G[α, γ] = Σ_βδ λ_βδ Γ^{αγ}_{βδ}(t) para o modelo, com λ_βδ = κ.

    Na convenção 'positive' S_α(t) = S_α e^{+iω_α t}; na 'heisenberg' o sinal
    das frequências é trocado.
    """
    s = _phase_sign(convention)
    w0, wb = params.omega0, params.omega_b
    p_coeffs = [[[(1.0, s * w0)], []], [[], [(1.0, -s * w0)]]]
    q_coeffs = [[[(1.0, s * wb)], []], [[], [(1.0, -s * wb)]]]
    couplings = np.full((2, 2), params.kappa)
    return np.einsum("agbd,bd->ag", gamma_tensor(p_coeffs, q_coeffs, t), couplings)


# Hamiltonianos do modelo

def model_spec(params):
    return FockSpec(params.fock_dims, (params.omega0, params.omega_b))


def system_spec(params):
    return model_spec(params).subspec([0])


def bath_spec(params):
    return model_spec(params).subspec([1])


def system_basis(params):
    """Base (S₁, S₂) = (a, a†) no espaço do sistema."""
    a, a_dag, _, _ = ladder_ops(system_spec(params), 0)
    return (a, a_dag)


def system_hamiltonian(params):
    a, a_dag, _, _ = ladder_ops(system_spec(params), 0)
    return params.omega0 * (a_dag @ a + 0.5 * np.eye(a.shape[0]))


def bath_hamiltonian(params):
    b, b_dag, _, _ = ladder_ops(bath_spec(params), 0)
    return params.omega_b * (b_dag @ b + 0.5 * np.eye(b.shape[0]))


def bath_state(params):
    return thermal_state(bath_spec(params), 0, params.inv_temp)


def free_hamiltonian(params):
    """H_S ⊗ I + I ⊗ H_B."""
    n_s, n_b = params.fock_dims
    return np.kron(system_hamiltonian(params), np.eye(n_b)) + np.kron(np.eye(n_s), bath_hamiltonian(params))


def interaction_hamiltonian(params):
    """κ(a + a†)⊗(b + b†), idêntico a −k′x₁x₂."""
    spec = model_spec(params)
    a, a_dag, _, _ = ladder_ops(spec, 0)
    b, b_dag, _, _ = ladder_ops(spec, 1)
    return params.kappa * (a + a_dag) @ (b + b_dag)


def total_hamiltonian(params):
    return free_hamiltonian(params) + interaction_hamiltonian(params)


# Matriz de dissipação

def dissipation_matrix_model(params, convention="positive"):
    """
    Matriz γ 2×2 do modelo sobre a base (a, a†).

        γ_ij = τ Σ_γγ′ G[i,γ] ⟨B_γ B_γ′†⟩ G[j,γ′]*

    com ⟨b b†⟩ = n̄ + 1 e ⟨b† b⟩ = n̄.

    Args:
        params: ModelParams.
        convention: 'positive' ou 'heisenberg'.

    Returns:
        DissipationMatrix (com diagnósticos em ``meta``).
    """
    g = model_coupling_tensor(params, params.tau, convention)
    occupation = bose_occupation(params.omega_b, params.inv_temp)
    correlations = np.diag([occupation + 1.0, occupation])
    gamma = params.tau * np.einsum("ag,gh,bh->ab", g, correlations, g.conj())

    lowest = float(linalg.eigvalsh(gamma)[0])
    psd = lowest >= -1e-8
    if not psd:
        logger.warning("γ do modelo não é PSD (autovalor mínimo %.3g): fora do regime", lowest)
    meta = {
        "convention": convention,
        "bose_occupation": occupation,
        "min_eigenvalue": lowest,
        "psd": psd,
    }
    return DissipationMatrix(gamma=gamma, basis=system_basis(params), meta=meta)


def dissipation_limit(params, convention="positive"):
    """
    Forma limite γ₁₁ = τ|κ|² coth(βω_B/2) sinc²(ω_Bτ/2) e diagnósticos de regime.

    Returns:
        Tupla (gamma11_limit, relatório).
    """
    w0, wb, tau = params.omega0, params.omega_b, params.tau
    coth = 1.0 if params.inv_temp == ZERO_TEMPERATURE else 1.0 / math.tanh(params.inv_temp * wb / 2)
    sinc = float(np.sinc(wb * tau / 2 / np.pi))
    gamma11_limit = tau * params.kappa ** 2 * coth * sinc ** 2

    full = dissipation_matrix_model(params, convention).gamma
    gamma11, gamma22 = float(full[0, 0].real), float(full[1, 1].real)
    if gamma11 > 0:
        mismatch = abs(gamma11 - gamma22) / gamma11
        limit_error = abs(gamma11_limit - gamma11) / gamma11
    else:
        mismatch = limit_error = 0.0
    tau_s = 1 / gamma11_limit if gamma11_limit > 0 else math.inf

    report = {
        "gamma11_limit": gamma11_limit,
        "gamma11": gamma11,
        "gamma22": gamma22,
        "mismatch": mismatch,
        "limit_relative_error": limit_error,
        "sinc_argument": wb * tau / 2,
        "tau_b": params.tau_b,
        "tau_0": params.tau_0,
        "tau": tau,
        "tau_s": tau_s,
        "markov_ordering": params.tau_b < params.tau_0,
        "coarse_graining_ordering": params.tau_b < tau < tau_s,
    }
    if not report["markov_ordering"]:
        logger.warning("ordem markoviana violada: 1/ω_B = %.3g ≥ 1/ω₀ = %.3g", params.tau_b, params.tau_0)
    if not report["coarse_graining_ordering"]:
        logger.warning("ordem de coarse-graining violada: τ_B = %.3g, τ = %.3g, τ_s = %.3g", params.tau_b, tau, tau_s)
    return gamma11_limit, report


def limit_dissipation_matrix(params, convention="positive", gamma11=None):
    """γ limite: γ₁₁ = γ₂₂, γ₁₂ = γ₂₁* = γ₁₁ e^{±iω₀τ}."""
    if gamma11 is None:
        gamma11, _ = dissipation_limit(params, convention)
    phase = np.exp(1j * _phase_sign(convention) * params.omega0 * params.tau)
    gamma = gamma11 * np.array([[1.0, phase], [np.conj(phase), 1.0]])
    return DissipationMatrix(gamma=gamma, basis=system_basis(params), meta={"convention": convention})


# Kraus, OSR e χ

def kraus_from_unitary(u_total, bath_state, system_dim=None):
    """
    Operadores de Kraus K_lm = √p_m ⟨l|U|m⟩ na base própria do banho.

    Args:
        u_total: Unitária em sistema⊗banho.
        bath_state: Matriz densidade do banho.
        system_dim: Dimensão do sistema (deduzida se None).

    Returns:
        KrausSet.
    """
    u = np.asarray(u_total)
    rho_b = np.asarray(bath_state)
    if not is_unitary(u):
        raise NotPhysicalError("operador total não é unitário")
    if not is_hermitian(rho_b):
        raise NotPhysicalError("estado do banho não hermitiano")
    n_b = rho_b.shape[0]
    n_s = system_dim or u.shape[0] // n_b
    if n_s * n_b != u.shape[0]:
        raise LayoutMismatchError(f"dimensões {u.shape[0]} ≠ {n_s}·{n_b}")

    off_diagonal = rho_b - np.diag(np.diag(rho_b))
    if np.abs(off_diagonal).max() == 0:
        weights, vectors = np.diag(rho_b).real, np.eye(n_b)
    else:
        weights, vectors = linalg.eigh(rho_b)

    blocks = u.reshape(n_s, n_b, n_s, n_b)
    ops, labels, kept = [], [], []
    for m in range(n_b):
        if weights[m] <= KRAUS_WEIGHT_CUTOFF:
            continue
        column = np.einsum("slth,h->slt", blocks, vectors[:, m])
        for l in range(n_b):
            op = math.sqrt(weights[m]) * column[:, l, :]
            if np.abs(op).max() == 0:
                continue
            ops.append(op)
            labels.append((l, m))
            kept.append(weights[m])

    kraus = KrausSet(ops=np.array(ops), labels=tuple(labels), weights=np.array(kept))
    residual = kraus.completeness_residual()
    if residual > COMPLETENESS_TOL:
        logger.warning("completude de Kraus com resíduo %.3g", residual)
    return kraus


def osr_apply(kraus, rho_s):
    """Σ K ρ K†."""
    rho_s = np.asarray(rho_s)
    if rho_s.shape != kraus.ops.shape[1:]:
        raise LayoutMismatchError(f"estado {rho_s.shape} para Kraus {kraus.ops.shape[1:]}")
    return np.einsum("kij,jl,kml->im", kraus.ops, rho_s, kraus.ops.conj())


def chi_from_kraus(kraus, basis, t=0.0):
    """
    Matriz χ_αβ = Σ_i b_iα b*_iβ com b_iα = Tr(S_α† K_i).

    Args:
        kraus: KrausSet.
        basis: Base ortonormal completa (por exemplo hs_basis).
        t: Tempo associado.

    Returns:
        ChiMatrix.
    """
    stack = np.asarray(basis)
    dim = kraus.ops.shape[1]
    if stack.shape != (dim * dim, dim, dim):
        raise LayoutMismatchError(f"base com forma {stack.shape} para dimensão {dim}")
    if np.abs(gram_matrix(stack) - np.eye(dim * dim)).max() > 1e-10:
        raise NotPhysicalError("base não ortonormal")
    b = np.einsum("aij,kij->ka", stack.conj(), kraus.ops)
    return ChiMatrix(chi=b.T @ b.conj(), t=t)


def interaction_picture_kraus(params, t):
    """Kraus exatos da unitária na representação de interação U₀†(t)U(t)."""
    u0 = propagate(free_hamiltonian(params), t)
    u = propagate(total_hamiltonian(params), t)
    return kraus_from_unitary(u0.conj().T @ u, bath_state(params))


def first_order_kraus(params, t, convention="positive", weak_threshold=WEAK_COUPLING_THRESHOLD):
    """
    Coeficientes de primeira ordem b_{lm,α} = −it√p_m Σ_γ ⟨l|B_γ|m⟩ G[α,γ](t).

    Args:
        params: ModelParams.
        t: Tempo (> 0).
        convention: 'positive' ou 'heisenberg' (a segunda coincide com a
            representação de interação exata).
        weak_threshold: Limite de |κ|/ω₀ para o regime de acoplamento fraco.

    Returns:
        Dicionário com coeficientes [l, m, α], operadores K⁽¹⁾_lm, pesos p_m
        e o diagnóstico de acoplamento fraco.
    """
    spec_b = bath_spec(params)
    weights = np.diag(bath_state(params)).real
    b, b_dag, _, _ = ladder_ops(spec_b, 0)
    bath_ops = np.array([b, b_dag])
    g = model_coupling_tensor(params, t, convention)
    coefficients = -1j * t * np.einsum("glm,ag->lma", bath_ops, g) * np.sqrt(weights)[None, :, None]
    operators = np.einsum("lma,aij->lmij", coefficients, np.array(system_basis(params)))

    ratio = abs(params.kappa) / params.omega0
    weak = ratio <= weak_threshold
    if not weak:
        logger.warning("|κ|/ω₀ = %.3g acima do limite de acoplamento fraco %.3g", ratio, weak_threshold)
    return {
        "coefficients": coefficients,
        "operators": operators,
        "weights": weights,
        "coupling_ratio": ratio,
        "weak_coupling": weak,
    }


def chi0_column(params, bath_rho, convention="positive"):
    """⟨χ̇_α0⟩ = −i Σ_γ ⟨B_γ⟩ G[α,γ](τ) para α = 1, 2."""
    b, b_dag, _, _ = ladder_ops(bath_spec(params), 0)
    moments = np.array([np.trace(bath_rho @ b), np.trace(bath_rho @ b_dag)])
    g = model_coupling_tensor(params, params.tau, convention)
    return -1j * g @ moments


def lamb_shift(chi_dot_col, basis):
    """H_LS = (i/2) Σ_α (⟨χ̇_α0⟩ S_α − h.c.)."""
    h = np.zeros_like(np.asarray(basis[0]), dtype=complex)
    for coeff, op in zip(chi_dot_col, basis):
        h += coeff * op - np.conj(coeff) * op.conj().T
    return 0.5j * h


# Dinâmica exata

def _top_population(rho_total, dims):
    populations = np.diag(rho_total).real.reshape(dims)
    return float(max(populations[-1, :].sum(), populations[:, -1].sum()))


def exact_reduced_trajectory(params, rho_s0, times, population_limit=POPULATION_LIMIT):
    """
    Propaga ρ_S ⊗ ρ_B com o Hamiltoniano total e traça o banho em cada tempo.

    Returns:
        Dicionário com tempos, estados reduzidos e população do nível mais
        alto de cada modo.
    """
    spec = model_spec(params)
    rho_s0 = check_density_matrix(rho_s0)
    if rho_s0.shape != (spec.dims[0], spec.dims[0]):
        raise LayoutMismatchError(f"estado {rho_s0.shape} para N_S = {spec.dims[0]}")
    rho_total0 = np.kron(rho_s0, bath_state(params))
    evolve = propagator(total_hamiltonian(params))

    states, top = [], []
    for t in times:
        u = evolve(t)
        rho_total = u @ rho_total0 @ u.conj().T
        top.append(_top_population(rho_total, spec.dims))
        states.append(partial_trace(rho_total, spec, [0]))

    worst = max(top)
    if worst >= population_limit:
        raise TruncationError(
            f"população {worst:.3g} no nível mais alto; aumente fock_dims para "
            f"({spec.dims[0] + 4}, {spec.dims[1] + 4})"
        )
    return {
        "times": np.asarray(times, dtype=float),
        "states": np.array(states),
        "top_population": np.array(top),
        "max_top_population": worst,
    }


def truncation_grid(params, t):
    """Grade em [0, t] com passo ≤ π/(4‖H‖), fina o bastante para ver picos de população."""
    norm = linalg.norm(total_hamiltonian(params), 2)
    n_steps = max(8, math.ceil(4 * abs(t) * norm / math.pi))
    return np.linspace(0.0, t, n_steps + 1)


def exact_reduced_dynamics(params, rho_s0, t, population_limit=POPULATION_LIMIT):
    """
    ρ_S(t) = Tr_B[U(ρ_S ⊗ ρ_B)U†].

    Args:
        params: ModelParams.
        rho_s0: Estado inicial do sistema.
        t: Instante final ou sequência de instantes.
        population_limit: População máxima tolerada no nível mais alto.

    Returns:
        ρ_S(t) para um instante; array de estados, um por instante pedido,
        para uma sequência. A truncagem é verificada em cada instante pedido
        e, para um instante único, em toda a grade de truncation_grid.
    """
    if np.ndim(t) == 0:
        trajectory = exact_reduced_trajectory(params, rho_s0, truncation_grid(params, t), population_limit)
        return trajectory["states"][-1]
    return exact_reduced_trajectory(params, rho_s0, np.asarray(t, dtype=float), population_limit)["states"]


def _fixed_basis_rhs(chi_dot, ops, rho0):
    """−i[Q̇, ρ₀] + Σ_{α,β≥1} χ̇_αβ (S_α ρ₀ S_β† − ½{S_β†S_α, ρ₀}), com S₀ = I."""
    rest = np.asarray(ops[1:])
    q_dot = 0.5j * (
        np.einsum("b,bij->ij", chi_dot[1:, 0], rest)
        - np.einsum("b,bji->ij", chi_dot[0, 1:], rest.conj())
    )
    out = -1j * (q_dot @ rho0 - rho0 @ q_dot)
    block = chi_dot[1:, 1:]
    out += np.einsum("ab,aij,jk,blk->il", block, rest, rho0, rest.conj())
    anti = np.einsum("ab,bjk,ajl->kl", block, rest.conj(), rest)
    out -= 0.5 * (anti @ rho0 + rho0 @ anti)
    return out


def validate_fixed_basis_osr(params, t_grid, rho_s0=None, basis=None):
    """
    Verifica a equação de OSR em base fixa com χ̇ por diferenças centrais.

    O lado direito é comparado com a derivada por diferenças finitas de
    ρ_S(t) e com a derivada exata Tr_B(−i[H, ρ_T(t)]).

    Args:
        params: ModelParams.
        t_grid: Grade uniforme com pelo menos 3 pontos.
        rho_s0: Estado inicial (padrão (|0⟩ + |1⟩)/√2).
        basis: Base ortonormal com S₀ = I/√d (padrão hs_basis).

    Returns:
        Dicionário com espaçamento, tempos interiores e resíduos.
    """
    start_time = time.time()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 3:
        raise ValueError("a grade precisa de pelo menos 3 pontos")
    steps = np.diff(t_grid)
    spacing = float(steps[0])
    if spacing <= 0 or not np.allclose(steps, spacing, rtol=1e-9, atol=0):
        raise ValueError("a grade deve ser uniforme e crescente")

    spec = model_spec(params)
    n_s = spec.dims[0]
    basis = hs_basis(n_s) if basis is None else [np.asarray(op) for op in basis]
    if np.abs(basis[0] - np.eye(n_s) / np.sqrt(n_s)).max() > 1e-12:
        raise ValueError("o primeiro elemento da base deve ser I/√d")
    if rho_s0 is None:
        psi = np.zeros(n_s, dtype=complex)
        psi[:2] = 1 / np.sqrt(2)
        rho_s0 = np.outer(psi, psi.conj())
    rho_s0 = check_density_matrix(rho_s0)

    rho_b = bath_state(params)
    rho_total0 = np.kron(rho_s0, rho_b)
    h_total = total_hamiltonian(params)
    evolve = propagator(h_total)

    chis, reduced, derivatives = [], [], []
    for t in t_grid:
        u = evolve(t)
        chi = chi_from_kraus(kraus_from_unitary(u, rho_b), basis, t).chi
        chis.append(to_identity_normalized(chi, n_s))
        rho_total = u @ rho_total0 @ u.conj().T
        reduced.append(partial_trace(rho_total, spec, [0]))
        derivatives.append(partial_trace(-1j * (h_total @ rho_total - rho_total @ h_total), spec, [0]))

    ops = [np.eye(n_s, dtype=complex)] + list(basis[1:])
    residual_fd, residual_exact = [], []
    for k in range(1, t_grid.size - 1):
        chi_dot = (chis[k + 1] - chis[k - 1]) / (2 * spacing)
        rhs = _fixed_basis_rhs(chi_dot, ops, rho_s0)
        finite_difference = (reduced[k + 1] - reduced[k - 1]) / (2 * spacing)
        residual_fd.append(float(np.abs(rhs - finite_difference).max()))
        residual_exact.append(float(np.abs(rhs - derivatives[k]).max()))

    return {
        "spacing": spacing,
        "times": t_grid[1:-1],
        "residual_fd": np.array(residual_fd),
        "residual_exact": np.array(residual_exact),
        "max_residual": max(residual_exact),
        "max_residual_fd": max(residual_fd),
        "execution_time": (time.time() - start_time) * 1000,
    }


def markovian_comparison(
    params, rho_s0, t_final, dt, sample_every=1, convention="positive", limits=None,
    population_limit=POPULATION_LIMIT,
):
    """
    Evolui a equação de Lindblad com γ do modelo e compara com a dinâmica
    reduzida exata nos mesmos instantes.

    Returns:
        Dicionário com as duas trajetórias e a distância de traço por amostra.
    """
    gamma = dissipation_matrix_model(params, convention)
    h_ls = lamb_shift(chi0_column(params, bath_state(params), convention), gamma.basis)
    generator = build_generator(system_hamiltonian(params), h_ls, gamma)
    lindblad = evolve_master(generator, rho_s0, t_final, dt, sample_every, limits)
    exact = exact_reduced_trajectory(params, rho_s0, lindblad["times"], population_limit)
    distances = np.array([trace_distance(a, b) for a, b in zip(lindblad["states"], exact["states"])])
    return {
        "times": lindblad["times"],
        "lindblad": lindblad,
        "exact": exact,
        "trace_distance": distances,
        "max_trace_distance": float(distances.max()),
    }

