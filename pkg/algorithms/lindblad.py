"""
Gerador GKS, forma diagonal de Lindblad e integração da equação mestra.

    L[ρ] = −i[H, ρ] + Σ_αβ γ_αβ (S_α ρ S_β† − ½{S_β† S_α, ρ})
"""
import functools
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from algorithms.errors import LayoutMismatchError, NotPhysicalError, NumericalBreachError
from algorithms.fock import HERMITIAN_TOL, check_density_matrix, is_hermitian
from utils.metrics import purity

logger = logging.getLogger(__name__)

PSD_TOL = 1e-8
RATE_TOL = 1e-10
STIFFNESS_GUIDELINE = 0.1


@dataclass(frozen=True, eq=False)
class DissipationMatrix:
    """Matriz de dissipação γ_αβ sobre uma base de operadores S_α."""

    gamma: np.ndarray
    basis: tuple
    hermitian_tol: float = HERMITIAN_TOL
    psd_tol: float = PSD_TOL
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=complex).reshape(len(self.basis), len(self.basis))
        basis = tuple(np.asarray(op, dtype=complex) for op in self.basis)
        shapes = {op.shape for op in basis}
        if len(shapes) > 1 or any(len(s) != 2 or s[0] != s[1] for s in shapes):
            raise LayoutMismatchError("operadores da base com formas diferentes")
        if gamma.size and np.abs(gamma - gamma.conj().T).max() > self.hermitian_tol:
            raise NotPhysicalError("matriz de dissipação não hermitiana")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self):
        return self.basis[0].shape[0] if self.basis else None

    def min_eigenvalue(self):
        if not self.gamma.size:
            return 0.0
        return float(linalg.eigvalsh(0.5 * (self.gamma + self.gamma.conj().T))[0])

    def is_psd(self):
        return self.min_eigenvalue() >= -self.psd_tol


@dataclass(frozen=True, eq=False)
class LindbladForm:
    """Taxas γ̃_c, operadores de salto L_c = Σ_a S_a u_ac e a unitária u."""

    rates: np.ndarray
    jump_ops: tuple
    u: np.ndarray

    def as_dissipation(self, skip_zero=True):
        keep = [c for c, rate in enumerate(self.rates) if rate > RATE_TOL or not skip_zero]
        return DissipationMatrix(
            gamma=np.diag(self.rates[keep]).astype(complex),
            basis=tuple(self.jump_ops[c] for c in keep),
        )


@dataclass(frozen=True, eq=False)
class MonitorLimits:
    """Limites que interrompem a integração."""

    trace_drift: float = 1e-6
    hermiticity: float = 1e-6
    min_eigenvalue: float = -1e-6


@dataclass(frozen=True, eq=False)
class GKSGenerator:
    h_total: np.ndarray
    dissipation: DissipationMatrix

    def __post_init__(self):
        h = np.asarray(self.h_total, dtype=complex)
        if not is_hermitian(h):
            raise NotPhysicalError("Hamiltoniano total não hermitiano")
        object.__setattr__(self, "h_total", h)

    @property
    def dim(self):
        return self.h_total.shape[0]

    def _channels(self):
        gamma = self.dissipation.gamma
        basis = self.dissipation.basis
        for a in range(len(basis)):
            for b in range(len(basis)):
                if gamma[a, b] != 0:
                    yield gamma[a, b], basis[a], basis[b]

    def __call__(self, rho):
        h = self.h_total
        out = -1j * (h @ rho - rho @ h)
        for rate, s_a, s_b in self._channels():
            s_b_dag = s_b.conj().T
            anti = s_b_dag @ s_a
            out += rate * (s_a @ rho @ s_b_dag - 0.5 * (anti @ rho + rho @ anti))
        return out

    @functools.cached_property
    def superoperator(self):
        """Matriz d²×d² na vetorização por linhas: vec(AρB) = (A ⊗ Bᵀ) vec(ρ)."""
        d = self.dim
        eye = np.eye(d)
        h = self.h_total
        superop = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for rate, s_a, s_b in self._channels():
            anti = s_b.conj().T @ s_a
            superop += rate * (
                np.kron(s_a, s_b.conj()) - 0.5 * (np.kron(anti, eye) + np.kron(eye, anti.T))
            )
        return superop


def build_generator(h_s, h_ls, gamma):
    """
    Monta o gerador com H = H_S + H_LS.

    Args:
        h_s: Hamiltoniano do sistema.
        h_ls: Hamiltoniano de Lamb shift (None para zero).
        gamma: DissipationMatrix.

    Returns:
        GKSGenerator.
    """
    h_s = np.asarray(h_s, dtype=complex)
    h_ls = np.zeros_like(h_s) if h_ls is None else np.asarray(h_ls, dtype=complex)
    if h_s.shape != h_ls.shape:
        raise LayoutMismatchError(f"H_S {h_s.shape} e H_LS {h_ls.shape} incompatíveis")
    if gamma.dim is not None and gamma.dim != h_s.shape[0]:
        raise LayoutMismatchError(f"base de dimensão {gamma.dim} para H de dimensão {h_s.shape[0]}")
    lowest = gamma.min_eigenvalue()
    if lowest < -gamma.psd_tol:
        raise NotPhysicalError(f"matriz de dissipação não é PSD: autovalor mínimo {lowest:.3g}")
    return GKSGenerator(h_s + h_ls, gamma)


def to_lindblad_form(gamma):
    """
    Diagonaliza γ = u γ̃ u† e define L_c = Σ_a S_a u_ac.

    Taxas em [−PSD_TOL, 0) são levadas a zero; as taxas saem em ordem
    decrescente.
    """
    if not gamma.gamma.size:
        return LindbladForm(np.zeros(0), (), np.zeros((0, 0), dtype=complex))
    rates, u = linalg.eigh(0.5 * (gamma.gamma + gamma.gamma.conj().T))
    order = np.argsort(rates)[::-1]
    rates, u = rates[order], u[:, order]
    if rates[-1] < -gamma.psd_tol:
        raise NotPhysicalError(f"matriz de dissipação não é PSD: autovalor mínimo {rates[-1]:.3g}")
    rates = np.where(rates < 0, 0.0, rates)
    jump_ops = np.einsum("aij,ac->cij", np.asarray(gamma.basis), u)
    return LindbladForm(rates=rates, jump_ops=tuple(jump_ops), u=u)


def monitor_invariants(rho):
    """
    Diagnósticos escalares de uma matriz densidade.

    Returns:
        Dicionário com traço, desvio do traço, resíduo de hermiticidade,
        autovalor mínimo e pureza.
    """
    rho = np.asarray(rho)
    trace = complex(np.trace(rho))
    return {
        "trace": trace.real,
        "trace_drift": abs(trace - 1),
        "hermiticity": float(np.abs(rho - rho.conj().T).max()),
        "min_eigenvalue": float(linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]),
        "purity": purity(rho),
    }


def evolve_master(gen, rho0, t_final, dt, sample_every=1, limits=None):
    """
    Integra dρ/dt = L[ρ] com RK4 de passo fixo sobre ρ vetorizado.

    Args:
        gen: GKSGenerator.
        rho0: Matriz densidade inicial.
        t_final: Tempo final.
        dt: Passo.
        sample_every: Intervalo (em passos) entre amostras.
        limits: MonitorLimits (padrão se None).

    Returns:
        Dicionário com tempos, estados amostrados, monitores, dt·‖H‖
        (``stiffness``, com ``stiffness_ok`` abaixo de 0.1) e tempo de execução.
    """
    start_time = time.time()
    rho0 = check_density_matrix(rho0)
    if rho0.shape != gen.h_total.shape:
        raise LayoutMismatchError(f"estado {rho0.shape} para gerador de dimensão {gen.dim}")
    limits = limits or MonitorLimits()
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final deve ser maior que dt")
    stiffness = dt * linalg.norm(gen.h_total, 2)
    stiffness_ok = bool(stiffness < STIFFNESS_GUIDELINE)
    if not stiffness_ok:
        logger.warning("dt·‖H‖ = %.3g acima de %g; passo pode ser grande demais", stiffness, STIFFNESS_GUIDELINE)

    d = gen.dim
    superop = gen.superoperator
    times, states, monitors = [], [], []

    def record(step, vec):
        rho = vec.reshape(d, d)
        report = monitor_invariants(rho)
        t = step * dt
        if report["trace_drift"] > limits.trace_drift:
            raise NumericalBreachError(f"desvio de traço {report['trace_drift']:.3g} em t = {t:g}")
        if report["hermiticity"] > limits.hermiticity:
            raise NumericalBreachError(f"resíduo de hermiticidade {report['hermiticity']:.3g} em t = {t:g}")
        if report["min_eigenvalue"] < limits.min_eigenvalue:
            raise NumericalBreachError(f"autovalor mínimo {report['min_eigenvalue']:.3g} em t = {t:g}")
        report["time"] = t
        times.append(t)
        states.append(rho.copy())
        monitors.append(report)

    vec = rho0.astype(complex).reshape(-1)
    record(0, vec)
    for step in range(1, n_steps + 1):
        k1 = superop @ vec
        k2 = superop @ (vec + 0.5 * dt * k1)
        k3 = superop @ (vec + 0.5 * dt * k2)
        k4 = superop @ (vec + dt * k3)
        vec = vec + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % sample_every == 0 or step == n_steps:
            record(step, vec)

    return {
        "times": np.array(times),
        "states": np.array(states),
        "monitors": monitors,
        "steps": n_steps,
        "stiffness": float(stiffness),
        "stiffness_ok": stiffness_ok,
        "execution_time": (time.time() - start_time) * 1000,
    }
