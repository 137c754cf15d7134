"""
Operadores no espaço de Fock truncado.

Convenções: ħ = 1, m = 1, x = (a + a†)/√(2ω), p = i√(ω/2)(a† − a).
No produto tensorial o modo 0 (sistema) vem primeiro e o modo 1 (banho)
depois.
"""
import functools
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from algorithms.errors import LayoutMismatchError, NotPhysicalError, TruncationError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-9
TAIL_TOL = 1e-8
DEFAULT_INTERIOR_EXCLUDE = 2
ZERO_TEMPERATURE = math.inf


@dataclass(frozen=True)
class FockSpec:
    """Truncagens N_k e frequências ω_k de cada modo."""

    dims: tuple
    frequencies: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        frequencies = tuple(float(w) for w in self.frequencies)
        if not dims or len(dims) != len(frequencies):
            raise ValueError("dims e frequencies devem ter o mesmo tamanho")
        if min(dims) < 2:
            raise ValueError("cada modo precisa de pelo menos 2 níveis")
        if min(frequencies) <= 0:
            raise ValueError("frequências devem ser positivas")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "frequencies", frequencies)

    @property
    def n_modes(self):
        return len(self.dims)

    @property
    def total_dim(self):
        return math.prod(self.dims)

    def subspec(self, modes):
        modes = list(modes)
        return FockSpec(tuple(self.dims[k] for k in modes), tuple(self.frequencies[k] for k in modes))


# Verificações

def is_hermitian(op, tol=HERMITIAN_TOL):
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and np.abs(op - op.conj().T).max() <= tol


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    return np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol


def check_density_matrix(rho, tol=HERMITIAN_TOL, min_eigenvalue=-1e-8):
    """Levanta NotPhysicalError se rho não for uma matriz densidade válida."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise LayoutMismatchError(f"matriz densidade deve ser quadrada, forma {rho.shape}")
    if not is_hermitian(rho, tol):
        raise NotPhysicalError("matriz densidade não hermitiana")
    if abs(np.trace(rho) - 1) > tol:
        raise NotPhysicalError(f"traço {np.trace(rho).real:.12g} diferente de 1")
    lowest = linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lowest < min_eigenvalue:
        raise NotPhysicalError(f"autovalor mínimo {lowest:.3g} negativo")
    return rho


# Operadores

def _single_mode_ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)


def tensor(ops):
    """Produto de Kronecker na ordem dos modos."""
    ops = [np.asarray(op) for op in ops]
    if not ops:
        raise ValueError("lista de operadores vazia")
    for op in ops:
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise LayoutMismatchError(f"operador não quadrado: {op.shape}")
    return functools.reduce(np.kron, ops)


def embed(spec, mode, op):
    """Coloca um operador de um modo no espaço total (identidade nos outros)."""
    if op.shape != (spec.dims[mode], spec.dims[mode]):
        raise LayoutMismatchError(f"operador {op.shape} para modo com N = {spec.dims[mode]}")
    return tensor([op if k == mode else np.eye(n) for k, n in enumerate(spec.dims)])


def ladder_ops(spec, mode):
    """
    Operadores a, a†, x e p do modo indicado no espaço total.

    Args:
        spec: FockSpec.
        mode: Índice do modo.

    Returns:
        Tupla (a, a_dag, x, p).
    """
    if not 0 <= mode < spec.n_modes:
        raise IndexError(f"modo {mode} fora do intervalo")
    a = embed(spec, mode, _single_mode_ladder(spec.dims[mode]))
    a_dag = a.conj().T
    omega = spec.frequencies[mode]
    x = (a + a_dag) / np.sqrt(2 * omega)
    p = 1j * np.sqrt(omega / 2) * (a_dag - a)
    return a, a_dag, x, p


def number_op(spec, mode):
    a, a_dag, _, _ = ladder_ops(spec, mode)
    return a_dag @ a


def partial_trace(rho, dims, keep):
    """
    Traço parcial mantendo os modos em ``keep``.

    Args:
        rho: Matriz no espaço total.
        dims: FockSpec ou sequência de dimensões por modo.
        keep: Conjunto de índices de modos mantidos.

    Returns:
        Matriz reduzida nos modos mantidos (na ordem original).
    """
    dims = tuple(dims.dims if isinstance(dims, FockSpec) else dims)
    total = math.prod(dims)
    rho = np.asarray(rho)
    if rho.shape != (total, total):
        raise LayoutMismatchError(f"matriz {rho.shape} para dimensão total {total}")
    keep = sorted(set(keep))
    if any(not 0 <= k < len(dims) for k in keep):
        raise IndexError(f"modos inválidos: {keep}")

    current = rho.reshape(dims + dims)
    n_axes = len(dims)
    for k in sorted((k for k in range(len(dims)) if k not in keep), reverse=True):
        current = np.trace(current, axis1=k, axis2=k + n_axes)
        n_axes -= 1
    kept = math.prod(dims[k] for k in keep)
    return current.reshape(kept, kept)


def thermal_state(spec, mode, inv_temp, tail_tol=TAIL_TOL):
    """
    Estado térmico p_m ∝ e^{−β ω m} renormalizado nos níveis mantidos.

    ``inv_temp = ZERO_TEMPERATURE`` devolve o vácuo.
    """
    n = spec.dims[mode]
    omega = spec.frequencies[mode]
    if inv_temp == ZERO_TEMPERATURE:
        populations = np.zeros(n)
        populations[0] = 1.0
        return np.diag(populations).astype(complex)
    if not (inv_temp > 0 and math.isfinite(inv_temp)):
        raise ValueError(f"inv_temp deve ser positivo e finito (ou ZERO_TEMPERATURE), recebido {inv_temp}")

    x = inv_temp * omega
    # Peso da distribuição geométrica acima do último nível
    tail = math.exp(-x * n)
    if tail >= tail_tol:
        suggested = math.ceil(-math.log(tail_tol) / x) + 1
        raise TruncationError(
            f"cauda térmica {tail:.3g} ≥ {tail_tol:g} com N = {n}; use N ≥ {suggested}"
        )
    weights = np.exp(-x * np.arange(n))
    return np.diag(weights / weights.sum()).astype(complex)


def propagator(h):
    """Retorna t -> e^{−iHt} a partir de uma única diagonalização de H."""
    h = np.asarray(h)
    if not is_hermitian(h):
        raise NotPhysicalError("Hamiltoniano não hermitiano")
    energies, vectors = linalg.eigh(0.5 * (h + h.conj().T))

    def evolve(t):
        u = (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T
        deviation = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
        if deviation > UNITARY_TOL:
            logger.warning("desvio de unitariedade %.3g em t = %g", deviation, t)
        return u

    return evolve


def propagate(h, t):
    """U = e^{−iHt} por autodecomposição hermitiana."""
    return propagator(h)(t)


def weyl_quantize(poly, spec):
    """
    Quantização de Weyl de um polinômio de grau ≤ 2.

    O modo k do FockSpec corresponde ao par (q_k, p_k) do layout. Produtos
    mistos são simetrizados: x p -> ½(x̂p̂ + p̂x̂).
    """
    if poly.degree() > 2:
        raise ValueError(f"grau {poly.degree()} não suportado na quantização")
    factors_by_index = []
    for mode in range(poly.layout.n_dof):
        if mode < spec.n_modes:
            _, _, x, p = ladder_ops(spec, mode)
            factors_by_index += [x, p]
        else:
            factors_by_index += [None, None]

    result = np.zeros((spec.total_dim, spec.total_dim), dtype=complex)
    for monomial, coeff in poly.terms.items():
        factors = [factors_by_index[i] for i, power in enumerate(monomial) for _ in range(power)]
        if any(f is None for f in factors):
            raise LayoutMismatchError("monômio usa um modo ausente do FockSpec")
        if not factors:
            term = np.eye(spec.total_dim)
        elif len(factors) == 1:
            term = factors[0]
        else:
            term = 0.5 * (factors[0] @ factors[1] + factors[1] @ factors[0])
        result += float(coeff) * term
    return result


def hs_basis(dim):
    """
    Base ortonormal de Hilbert-Schmidt com S₀ = I/√dim.

    Demais elementos: matrizes de Gell-Mann generalizadas normalizadas
    (simétricas, antissimétricas e diagonais sem traço).
    """
    if dim < 2:
        raise ValueError("dim deve ser pelo menos 2")
    basis = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
    for j, k in itertools.combinations(range(dim), 2):
        sym = np.zeros((dim, dim), dtype=complex)
        sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
        anti = np.zeros((dim, dim), dtype=complex)
        anti[j, k] = -1j / np.sqrt(2)
        anti[k, j] = 1j / np.sqrt(2)
        basis += [sym, anti]
    for level in range(1, dim):
        diagonal = np.zeros(dim)
        diagonal[:level] = 1.0
        diagonal[level] = -level
        basis.append(np.diag(diagonal / np.sqrt(level * (level + 1))).astype(complex))
    return basis


def gram_matrix(basis):
    stack = np.asarray(basis)
    return np.einsum("aij,bij->ab", stack.conj(), stack)


def basis_coefficients(op, basis):
    """Coeficientes c_α = Tr(S_α† op)."""
    return np.einsum("aij,ij->a", np.asarray(basis).conj(), op)


def to_identity_normalized(chi, dim):
    """Reescala linha/coluna 0 de χ para a convenção S₀ = I."""
    chi = np.array(chi, dtype=complex)
    chi[0, :] /= np.sqrt(dim)
    chi[:, 0] /= np.sqrt(dim)
    return chi


def interior_indices(dims, exclude=DEFAULT_INTERIOR_EXCLUDE):
    """Índices do bloco interior (sem os ``exclude`` níveis mais altos de cada modo)."""
    dims = tuple(dims.dims if isinstance(dims, FockSpec) else dims)
    if any(n - exclude < 1 for n in dims):
        raise ValueError(f"exclude = {exclude} esvazia o bloco interior para dims {dims}")
    levels = itertools.product(*(range(n - exclude) for n in dims))
    return np.array([np.ravel_multi_index(level, dims) for level in levels])


def interior_block(op, dims, exclude=DEFAULT_INTERIOR_EXCLUDE):
    idx = interior_indices(dims, exclude)
    return np.asarray(op)[np.ix_(idx, idx)]
