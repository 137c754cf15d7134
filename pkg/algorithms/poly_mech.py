"""
Álgebra polinomial no espaço de fase e algoritmo de vínculos de Dirac.

O módulo trata Hamiltonianos de grau ≤ 2 com vínculos afins. Nesse caso
todo parêntese entre vínculos é constante, todo vínculo secundário é afim
e o teste de igualdade fraca se reduz a álgebra linear.

Ordem das variáveis: (q₁, p₁, q₂, p₂, ...), com nomes padrão x1, p1, x2, p2.
"""
import logging
import time
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType

import numpy as np
from scipy import linalg

from algorithms.errors import (
    ConstraintViolationError,
    FirstClassConstraintError,
    InconsistentDynamicsError,
    LayoutMismatchError,
    SingularConstraintMatrixError,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
SPAN_TOL = 1e-10
CONDITION_LIMIT = 1e12
SURFACE_TOL = 1e-9
SIGN_CONVENTION = "chi_b = {phi_b, H_c}_P"

_SCALAR_TYPES = (int, float, Fraction, np.integer, np.floating)


def _as_python(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class PhaseLayout:
    """Disposição das coordenadas canônicas (q_i, p_i) intercaladas."""

    n_dof: int
    names: tuple = ()

    def __post_init__(self):
        if self.n_dof < 1:
            raise ValueError("n_dof deve ser pelo menos 1")
        names = tuple(self.names)
        if not names:
            names = tuple(
                name for i in range(1, self.n_dof + 1) for name in (f"x{i}", f"p{i}")
            )
        if len(names) != 2 * self.n_dof:
            raise ValueError(f"esperados {2 * self.n_dof} nomes, recebidos {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("nomes de variáveis repetidos")
        object.__setattr__(self, "names", names)

    @property
    def size(self):
        return 2 * self.n_dof

    def q_index(self, i):
        return 2 * i

    def p_index(self, i):
        return 2 * i + 1

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"variável desconhecida: {name}") from None


class PolyObservable:
    """
    Polinômio esparso sobre as variáveis de um PhaseLayout.

    Os termos são um mapa expoente -> coeficiente sem coeficientes nulos.
    Coeficientes inteiros ou Fraction mantêm a aritmética exata.
    """

    __slots__ = ("_layout", "_terms")

    def __init__(self, layout, terms=None):
        self._layout = layout
        clean = {}
        for monomial, coeff in (terms or {}).items():
            monomial = tuple(int(e) for e in monomial)
            if len(monomial) != layout.size or min(monomial, default=0) < 0:
                raise ValueError(f"monômio inválido para {layout.size} variáveis: {monomial}")
            coeff = _as_python(coeff)
            clean[monomial] = clean.get(monomial, 0) + coeff
        self._terms = {m: c for m, c in clean.items() if c != 0}

    # Construtores
    @classmethod
    def zero(cls, layout):
        return cls(layout)

    @classmethod
    def constant(cls, layout, value):
        return cls(layout, {(0,) * layout.size: value})

    @classmethod
    def variable(cls, layout, key, coeff=1):
        index = layout.index(key) if isinstance(key, str) else int(key)
        if not 0 <= index < layout.size:
            raise IndexError(f"índice de variável fora do intervalo: {index}")
        monomial = [0] * layout.size
        monomial[index] = 1
        return cls(layout, {tuple(monomial): coeff})

    @classmethod
    def from_affine(cls, layout, coeffs, const=0):
        if len(coeffs) != layout.size:
            raise LayoutMismatchError(f"vetor com {len(coeffs)} entradas para {layout.size} variáveis")
        terms = {(0,) * layout.size: const}
        for index, coeff in enumerate(coeffs):
            monomial = [0] * layout.size
            monomial[index] = 1
            terms[tuple(monomial)] = coeff
        return cls(layout, terms)

    @classmethod
    def from_quadratic(cls, layout, matrix, linear=None, const=0):
        """
        Constrói ½ zᵀMz + g·z + c.

        Args:
            layout: PhaseLayout das variáveis z.
            matrix: Matriz M (apenas a parte simétrica contribui).
            linear: Vetor g (opcional).
            const: Constante c.

        Returns:
            PolyObservable de grau ≤ 2.
        """
        m = np.asarray(matrix, dtype=float)
        if m.shape != (layout.size, layout.size):
            raise LayoutMismatchError(f"matriz {m.shape} incompatível com {layout.size} variáveis")
        terms = {(0,) * layout.size: const}
        for i in range(layout.size):
            for j in range(i, layout.size):
                monomial = [0] * layout.size
                monomial[i] += 1
                monomial[j] += 1
                coeff = 0.5 * m[i, i] if i == j else 0.5 * (m[i, j] + m[j, i])
                terms[tuple(monomial)] = coeff
        if linear is not None:
            for index, coeff in enumerate(linear):
                monomial = [0] * layout.size
                monomial[index] = 1
                terms[tuple(monomial)] = coeff
        return cls(layout, terms)

    @property
    def layout(self):
        return self._layout

    @property
    def terms(self):
        return MappingProxyType(self._terms)

    # Aritmética
    def _coerce(self, other):
        if isinstance(other, PolyObservable):
            if other.layout != self.layout:
                raise LayoutMismatchError("observáveis com PhaseLayout diferentes")
            return other
        if isinstance(other, _SCALAR_TYPES):
            return PolyObservable.constant(self.layout, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self._terms)
        for monomial, coeff in other._terms.items():
            terms[monomial] = terms.get(monomial, 0) + coeff
        return PolyObservable(self.layout, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyObservable(self.layout, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, _SCALAR_TYPES):
            return PolyObservable(self.layout, {m: c * _as_python(other) for m, c in self._terms.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                monomial = tuple(e1 + e2 for e1, e2 in zip(m1, m2))
                terms[monomial] = terms.get(monomial, 0) + c1 * c2
        return PolyObservable(self.layout, terms)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("expoente deve ser inteiro não negativo")
        result = PolyObservable.constant(self.layout, 1)
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, PolyObservable):
            return NotImplemented
        return self.layout == other.layout and self._terms == other._terms

    __hash__ = None

    # Consultas
    def degree(self):
        """Grau total; -1 para o polinômio nulo."""
        return max((sum(m) for m in self._terms), default=-1)

    def is_zero(self):
        return not self._terms

    def coefficient(self, monomial):
        return self._terms.get(tuple(monomial), 0)

    def constant_term(self):
        return self.coefficient((0,) * self.layout.size)

    def max_abs_coefficient(self):
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def derivative(self, index):
        terms = {}
        for monomial, coeff in self._terms.items():
            power = monomial[index]
            if power:
                reduced = list(monomial)
                reduced[index] -= 1
                terms[tuple(reduced)] = coeff * power
        return PolyObservable(self.layout, terms)

    def evaluate(self, point):
        point = np.asarray(point)
        if point.shape != (self.layout.size,):
            raise LayoutMismatchError(f"ponto com forma {point.shape}")
        total = 0.0
        for monomial, coeff in self._terms.items():
            total += coeff * np.prod(point ** np.array(monomial))
        return total

    def chop(self, tol):
        return PolyObservable(self.layout, {m: c for m, c in self._terms.items() if abs(c) > tol})

    def allclose(self, other, atol=1e-12):
        return (self - other).max_abs_coefficient() <= atol

    def linear_part(self):
        """Retorna (vetor de coeficientes, constante) de um polinômio de grau ≤ 1."""
        if self.degree() > 1:
            raise ValueError(f"polinômio de grau {self.degree()} não é afim")
        coeffs = np.zeros(self.layout.size)
        for monomial, coeff in self._terms.items():
            if sum(monomial):
                coeffs[monomial.index(1)] = float(coeff)
        return coeffs, float(self.constant_term())

    def quadratic_part(self):
        """Retorna (M, g, c) com o polinômio = ½ zᵀMz + g·z + c."""
        if self.degree() > 2:
            raise ValueError(f"polinômio de grau {self.degree()} não é quadrático")
        size = self.layout.size
        m = np.zeros((size, size))
        g = np.zeros(size)
        for monomial, coeff in self._terms.items():
            idx = [i for i, e in enumerate(monomial) for _ in range(e)]
            if len(idx) == 2:
                i, j = idx
                if i == j:
                    m[i, i] += 2.0 * coeff
                else:
                    m[i, j] += coeff
                    m[j, i] += coeff
            elif len(idx) == 1:
                g[idx[0]] += coeff
        return m, g, float(self.constant_term())

    def to_dict(self):
        return {
            "text": str(self),
            "terms": [[list(m), float(c)] for m, c in sorted(self._terms.items())],
        }

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        ordered = sorted(self._terms.items(), key=lambda item: (-sum(item[0]), item[0]))
        for monomial, coeff in ordered:
            factors = []
            for name, power in zip(self.layout.names, monomial):
                if power == 1:
                    factors.append(name)
                elif power > 1:
                    factors.append(f"{name}^{power}")
            value = f"{float(coeff):.12g}"
            parts.append("*".join([value] + factors) if factors else value)
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"PolyObservable({self})"


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    """Vínculo afim φ(z) = coeffs·z + const ≈ 0."""

    coeffs: np.ndarray
    const: float = 0.0
    label: str = ""

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0 or coeffs.size % 2:
            raise ValueError("coeficientes devem formar um vetor de tamanho 2·n_dof")
        if not np.any(coeffs):
            raise ValueError("vínculo sem parte linear")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "const", float(self.const))

    @property
    def n_dof(self):
        return self.coeffs.size // 2

    @classmethod
    def from_poly(cls, poly, label=""):
        coeffs, const = poly.linear_part()
        return cls(coeffs, const, label)

    def to_poly(self, layout=None):
        layout = layout or PhaseLayout(self.n_dof)
        if layout.size != self.coeffs.size:
            raise LayoutMismatchError("vínculo e layout com tamanhos diferentes")
        return PolyObservable.from_affine(layout, self.coeffs, self.const)

    def evaluate(self, point):
        return float(self.coeffs @ np.asarray(point, dtype=float) + self.const)

    def augmented(self):
        return np.append(self.coeffs, self.const)

    def to_dict(self):
        return {"label": self.label, "coeffs": self.coeffs.tolist(), "const": self.const}


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """
    Resultado do algoritmo de Dirac: vínculos, multiplicadores, C e D.

    Quando as combinações de primeira classe não são linhas isoladas de C,
    ``rebased`` guarda os vínculos reescritos (segunda classe seguida de
    primeira classe); C, D e os índices de classe se referem a essa lista.
    """

    layout: PhaseLayout
    primaries: tuple
    secondaries: tuple
    multipliers: tuple
    c_matrix: np.ndarray
    d_matrix: object
    first_class_idx: tuple
    second_class_idx: tuple
    sign_convention: str = SIGN_CONVENTION
    rebased: tuple = ()

    @property
    def constraints(self):
        return self.rebased or self.primaries + self.secondaries

    def second_class_constraints(self):
        return [self.constraints[i] for i in self.second_class_idx]

    def first_class_constraints(self):
        return [self.constraints[i] for i in self.first_class_idx]

    def residual(self, point):
        """Maior |φ_a(z)| sobre todos os vínculos."""
        return max((abs(phi.evaluate(point)) for phi in self.constraints), default=0.0)

    def to_dict(self):
        return {
            "layout": list(self.layout.names),
            "sign_convention": self.sign_convention,
            "primaries": [phi.to_dict() for phi in self.primaries],
            "secondaries": [phi.to_dict() for phi in self.secondaries],
            "rebased": [phi.to_dict() for phi in self.rebased] if self.rebased else None,
            "first_class": list(self.first_class_idx),
            "second_class": list(self.second_class_idx),
            "c_matrix": self.c_matrix.tolist(),
            "d_matrix": None if self.d_matrix is None else self.d_matrix.tolist(),
            "multipliers": [
                "undetermined" if lam is None else lam.to_dict() for lam in self.multipliers
            ],
        }


@dataclass(frozen=True, eq=False)
class BlockDiagonalD:
    """Forma OᵀDO = B com blocos 2×2 [[0, b], [-b, 0]]."""

    o_matrix: np.ndarray
    blocks: tuple

    def block_matrix(self):
        n = self.o_matrix.shape[0]
        b = np.zeros((n, n))
        for k, value in enumerate(self.blocks):
            b[2 * k, 2 * k + 1] = value
            b[2 * k + 1, 2 * k] = -value
        return b

    def reconstruct(self):
        return self.o_matrix @ self.block_matrix() @ self.o_matrix.T


# Auxiliares de álgebra linear

def _null_space(matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return np.eye(matrix.shape[1])
    return linalg.null_space(matrix, rcond=RANK_RTOL)


def _fix_sign(vector):
    vector = np.array(vector, dtype=float)
    vector[np.abs(vector) < 1e-15] = 0.0
    if vector[np.argmax(np.abs(vector))] < 0:
        vector = -vector
    return vector


def _span_residual(columns, target):
    if not columns:
        return float(np.linalg.norm(target))
    basis = np.column_stack([c / np.linalg.norm(c) for c in columns])
    solution = linalg.lstsq(basis, target)[0]
    return float(np.linalg.norm(basis @ solution - target))


def _weak_status(coeffs, const, constraints):
    """Classifica uma expressão afim: 'weak', 'inconsistent' ou 'new'."""
    target = np.append(coeffs, const)
    norm = np.linalg.norm(target)
    if norm <= SPAN_TOL:
        return "weak"
    target = target / norm
    if _span_residual([phi.augmented() for phi in constraints], target) < SPAN_TOL:
        return "weak"
    linear = target[:-1]
    linear_columns = [phi.coeffs for phi in constraints]
    if np.linalg.norm(linear) < SPAN_TOL or _span_residual(linear_columns, linear) < SPAN_TOL:
        return "inconsistent"
    return "new"


def _constraint_matrix(constraints, layout):
    polys = [phi.to_poly(layout) for phi in constraints]
    t = len(polys)
    c = np.zeros((t, t))
    for a in range(t):
        for b in range(t):
            bracket = poisson_bracket(polys[a], polys[b])
            if bracket.degree() > 0:
                raise RuntimeError("parêntese entre vínculos afins não é constante")
            c[a, b] = float(bracket.constant_term())
    return c


def _rebase_constraints(constraints, null):
    """
    Reescreve os vínculos na base (complemento ortogonal, espaço nulo de C).

    Returns:
        Tupla (vínculos de segunda classe seguidos dos de primeira classe,
        número de vínculos de segunda classe).
    """
    complement = _null_space(null.T)
    rows = np.array([phi.augmented() for phi in constraints])
    rebased, n_second = [], 0
    for kind, columns in (("second_class", complement), ("first_class", null)):
        for k in range(columns.shape[1]):
            combined = _fix_sign(columns[:, k]) @ rows
            combined[np.abs(combined) < 1e-14 * max(1.0, np.abs(combined).max())] = 0.0
            if np.linalg.norm(combined[:-1]) < SPAN_TOL:
                if abs(combined[-1]) > SPAN_TOL:
                    raise InconsistentDynamicsError(
                        f"vínculos incompatíveis: a combinação exige {combined[-1]:.6g} ≈ 0"
                    )
                logger.warning("vínculo redundante descartado na mudança de base")
                continue
            rebased.append(AffineConstraint(combined[:-1], combined[-1], label=f"{kind}_{k + 1}"))
            n_second += kind == "second_class"
    return tuple(rebased), n_second


def _hamiltonian_brackets(constraints, h_c):
    chis = []
    for phi in constraints:
        chi = poisson_bracket(phi.to_poly(h_c.layout), h_c)
        if chi.degree() > 1:
            raise RuntimeError("vínculo secundário não afim")
        chis.append(chi.linear_part())
    return chis


# Operações

def poisson_bracket(a, b):
    """
    Parêntese de Poisson {a, b} = Σ_i (∂a/∂q_i ∂b/∂p_i − ∂a/∂p_i ∂b/∂q_i).

    Args:
        a: PolyObservable.
        b: PolyObservable no mesmo layout.

    Returns:
        PolyObservable com o resultado exato nos coeficientes.
    """
    if a.layout != b.layout:
        raise LayoutMismatchError("observáveis com PhaseLayout diferentes")
    layout = a.layout
    result = PolyObservable.zero(layout)
    for i in range(layout.n_dof):
        q, p = layout.q_index(i), layout.p_index(i)
        result = result + a.derivative(q) * b.derivative(p) - a.derivative(p) * b.derivative(q)
    return result


def oscillator_hamiltonian(k1, k2, kprime, layout=None):
    """H_c = ½p₁² + ½k₁x₁² + ½p₂² + ½k₂x₂² − k′x₁x₂."""
    layout = layout or PhaseLayout(2)
    m = np.diag([k1, 1.0, k2, 1.0])
    m[0, 2] = m[2, 0] = -kprime
    return PolyObservable.from_quadratic(layout, m)


def derive_primary_constraints(lagrangian_mass_matrix, linear_velocity_terms=None):
    """
    Vínculos primários de uma Lagrangiana quadrática nas velocidades.

    Com p = W·q̇ + A·q + c, cada direção nula v de W produz o vínculo
    v·p − v·(A·q + c) ≈ 0.

    Args:
        lagrangian_mass_matrix: Hessiana W (simétrica).
        linear_velocity_terms: Vetor c (constante) ou matriz A (n×n).

    Returns:
        Lista de AffineConstraint, vazia quando W tem posto completo.
    """
    w = np.atleast_2d(np.asarray(lagrangian_mass_matrix, dtype=float))
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"W deve ser quadrada, forma {w.shape}")
    if not np.allclose(w, w.T, rtol=0.0, atol=1e-12):
        raise ValueError("W não é simétrica")

    coupling = np.zeros((n, n))
    offset = np.zeros(n)
    if linear_velocity_terms is not None:
        terms = np.asarray(linear_velocity_terms, dtype=float)
        if terms.shape == (n,):
            offset = terms
        elif terms.shape == (n, n):
            coupling = terms
        else:
            raise ValueError(f"termos lineares com forma inválida {terms.shape}")

    null = _null_space(w)
    constraints = []
    for k in range(null.shape[1]):
        v = _fix_sign(null[:, k])
        coeffs = np.zeros(2 * n)
        coeffs[1::2] = v
        coeffs[0::2] = -coupling.T @ v
        constraints.append(AffineConstraint(coeffs, -float(v @ offset), label=f"primary_{k + 1}"))
    logger.debug("Hessiana %dx%d com %d direções nulas", n, n, len(constraints))
    return constraints


def classify_constraints(layout, primaries, secondaries=(), multipliers=None):
    """
    Monta C_ab = {φ_a, φ_b}, separa primeira e segunda classe e inverte C
    no bloco de segunda classe.

    Os índices de primeira classe geram o espaço nulo de C. Se esse espaço
    não for gerado por linhas nulas isoladas, os vínculos são reescritos na
    base (complemento, espaço nulo) e guardados em ``rebased``.
    """
    primaries, secondaries = tuple(primaries), tuple(secondaries)
    constraints = primaries + secondaries
    for phi in constraints:
        if phi.coeffs.size != layout.size:
            raise LayoutMismatchError("vínculo e layout com tamanhos diferentes")
    c = _constraint_matrix(constraints, layout)
    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    if np.abs(c + c.T).max(initial=0.0) > 1e-12 * scale:
        raise RuntimeError("matriz C não é antissimétrica")

    first = tuple(i for i in range(len(constraints)) if np.abs(c[i]).max() <= RANK_RTOL * scale)
    rebased = ()
    if constraints:
        null = _null_space(c)
        if null.shape[1] != len(first):
            rebased, n_second = _rebase_constraints(constraints, null)
            c = _constraint_matrix(rebased, layout)
            c[n_second:, :] = 0.0
            c[:, n_second:] = 0.0
            first = tuple(range(n_second, len(rebased)))
            logger.info("%d combinações de primeira classe após a mudança de base", len(first))
    second = tuple(i for i in range(len(rebased or constraints)) if i not in first)

    d = None
    if second:
        block = c[np.ix_(second, second)]
        cond = np.linalg.cond(block)
        if np.isfinite(cond) and cond <= CONDITION_LIMIT:
            d = np.linalg.inv(block)
            d = 0.5 * (d - d.T)
        else:
            logger.warning("bloco de segunda classe singular (cond = %.3g)", cond)

    if multipliers is None:
        multipliers = (None,) * len(primaries)
    return ConstraintSystem(
        layout=layout,
        primaries=primaries,
        secondaries=secondaries,
        multipliers=tuple(multipliers),
        c_matrix=c,
        d_matrix=d,
        first_class_idx=first,
        second_class_idx=second,
        rebased=rebased,
    )


def consistency_chain(h_c, primaries):
    """
    Algoritmo de Dirac: exige φ̇_n ≈ 0 para todos os vínculos até o fechamento.

    Em cada passagem as condições χ_n + Σ_m C_nm λ_m ≈ 0 são separadas em
    combinações sem multiplicadores (espaço nulo à esquerda de C_nm) e no
    resto, que determina os λ_m. Cada combinação sem multiplicador é uma
    identidade (caso a) ou um novo vínculo (caso c); uma constante não nula
    torna a dinâmica inconsistente.

    Args:
        h_c: Hamiltoniano canônico (grau ≤ 2).
        primaries: Lista de AffineConstraint primários.

    Returns:
        ConstraintSystem completo, com multiplicadores resolvidos.
    """
    layout = h_c.layout
    if h_c.degree() > 2:
        raise ValueError("o Hamiltoniano deve ter grau ≤ 2")
    primaries = list(primaries)
    for phi in primaries:
        if phi.coeffs.size != layout.size:
            raise LayoutMismatchError("vínculo e layout com tamanhos diferentes")
    n_primary = len(primaries)
    if n_primary == 0:
        return classify_constraints(layout, (), ())

    constraints = list(primaries)
    for _ in range(layout.size + 1):
        chis = _hamiltonian_brackets(constraints, h_c)
        a = _constraint_matrix(constraints, layout)[:, :n_primary]
        left_null = _null_space(a.T)
        found = []
        for k in range(left_null.shape[1]):
            w = _fix_sign(left_null[:, k])
            coeffs = sum(w_n * chi[0] for w_n, chi in zip(w, chis))
            const = float(sum(w_n * chi[1] for w_n, chi in zip(w, chis)))
            status = _weak_status(coeffs, const, constraints + found)
            if status == "weak":
                continue
            if status == "inconsistent":
                raise InconsistentDynamicsError(
                    f"dinâmica inconsistente: a condição de consistência exige {const:.6g} ≈ 0"
                )
            label = f"secondary_{len(constraints) + len(found) - n_primary + 1}"
            found.append(AffineConstraint(coeffs, const, label=label))
            logger.debug("novo vínculo %s", label)
        if not found:
            break
        constraints.extend(found)
    else:
        raise RuntimeError("a cadeia de consistência não fechou")

    # Multiplicadores: λ = −A⁺χ, indeterminados nas direções nulas de A
    chis = _hamiltonian_brackets(constraints, h_c)
    a = _constraint_matrix(constraints, layout)[:, :n_primary]
    pseudo = np.linalg.pinv(a, rcond=RANK_RTOL)
    null_a = _null_space(a)
    multipliers = []
    for m in range(n_primary):
        if null_a.size and np.abs(null_a[m]).max() > 1e-8:
            multipliers.append(None)
            continue
        coeffs = -sum(pseudo[m, n] * chi[0] for n, chi in enumerate(chis))
        const = -sum(pseudo[m, n] * chi[1] for n, chi in enumerate(chis))
        lam = PolyObservable.from_affine(layout, coeffs, const)
        multipliers.append(lam.chop(1e-14 * max(1.0, lam.max_abs_coefficient())))

    cs = classify_constraints(layout, constraints[:n_primary], constraints[n_primary:], multipliers)
    logger.info(
        "cadeia fechada: %d primários, %d secundários, %d de primeira classe",
        len(cs.primaries), len(cs.secondaries), len(cs.first_class_idx),
    )
    return cs


def dirac_bracket(a, b, cs):
    """
    Parêntese de Dirac {a,b}* = {a,b} − {a,φ_α} D_αβ {φ_β,b}.

    Args:
        a: PolyObservable.
        b: PolyObservable.
        cs: ConstraintSystem apenas com vínculos de segunda classe.

    Returns:
        PolyObservable.
    """
    if a.layout != b.layout or a.layout != cs.layout:
        raise LayoutMismatchError("observáveis e vínculos com PhaseLayout diferentes")
    plain = poisson_bracket(a, b)
    if not cs.constraints:
        return plain
    if cs.first_class_idx:
        raise FirstClassConstraintError(
            f"vínculos de primeira classe {list(cs.first_class_idx)}: fixe o gauge antes"
        )
    if cs.d_matrix is None:
        raise SingularConstraintMatrixError("matriz C singular no bloco de segunda classe")

    phis = [phi.to_poly(cs.layout) for phi in cs.second_class_constraints()]
    left = [poisson_bracket(a, phi) for phi in phis]
    right = [poisson_bracket(phi, b) for phi in phis]
    correction = PolyObservable.zero(cs.layout)
    for i, left_i in enumerate(left):
        for j, right_j in enumerate(right):
            if cs.d_matrix[i, j] != 0:
                correction = correction + (left_i * right_j) * float(cs.d_matrix[i, j])
    scale = max(1.0, plain.max_abs_coefficient(), correction.max_abs_coefficient())
    return (plain - correction).chop(1e-12 * scale)


def _flow_matrix(h_c, cs):
    layout = h_c.layout
    generator = np.zeros((layout.size, layout.size))
    drift = np.zeros(layout.size)
    for i in range(layout.size):
        velocity = dirac_bracket(PolyObservable.variable(layout, i), h_c, cs)
        generator[i], drift[i] = velocity.linear_part()
    return generator, drift


def evolve_constrained(initial, h_c, cs, t_final, dt):
    """
    Integra ż = {z, H_c}* com RK4 de passo fixo.

    Args:
        initial: Ponto inicial na superfície de vínculos.
        h_c: Hamiltoniano de grau ≤ 2.
        cs: ConstraintSystem (pode ser vazio).
        t_final: Tempo final.
        dt: Passo de integração.

    Returns:
        Dicionário com tempos, estados e resíduo dos vínculos por passo.
    """
    start_time = time.time()
    if cs.layout != h_c.layout:
        raise LayoutMismatchError("Hamiltoniano e vínculos com PhaseLayout diferentes")
    if h_c.degree() > 2:
        raise ValueError("o Hamiltoniano deve ter grau ≤ 2")
    z0 = np.asarray(initial, dtype=float)
    if z0.shape != (h_c.layout.size,):
        raise LayoutMismatchError(f"ponto inicial com forma {z0.shape}")
    if cs.residual(z0) > SURFACE_TOL:
        raise ConstraintViolationError(
            f"ponto inicial fora da superfície de vínculos (resíduo {cs.residual(z0):.3g})"
        )
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final deve ser maior que dt")

    generator, drift = _flow_matrix(h_c, cs)

    def flow(z):
        return generator @ z + drift

    states = np.empty((n_steps + 1, z0.size))
    residuals = np.empty(n_steps + 1)
    states[0] = z0
    residuals[0] = cs.residual(z0)
    z = z0
    for step in range(1, n_steps + 1):
        k1 = flow(z)
        k2 = flow(z + 0.5 * dt * k1)
        k3 = flow(z + 0.5 * dt * k2)
        k4 = flow(z + dt * k3)
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        states[step] = z
        residuals[step] = cs.residual(z)

    return {
        "times": dt * np.arange(n_steps + 1),
        "states": states,
        "constraint_residual": residuals,
        "max_residual": float(residuals.max()),
        "steps": n_steps,
        "execution_time": (time.time() - start_time) * 1000,
    }


def block_diagonalize(d_matrix):
    """
    Forma de Schur real de uma matriz antissimétrica: OᵀDO = B.

    Args:
        d_matrix: Matriz real antissimétrica.

    Returns:
        BlockDiagonalD com O ortogonal e os valores b_k dos blocos 2×2.
    """
    d = np.atleast_2d(np.asarray(d_matrix, dtype=float))
    n = d.shape[0]
    if d.shape != (n, n):
        raise ValueError(f"matriz deve ser quadrada, forma {d.shape}")
    scale = max(1.0, float(np.abs(d).max(initial=0.0)))
    if np.abs(d + d.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("matriz não é antissimétrica")

    t, z = linalg.schur(d, output="real")
    pairs, singles = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > RANK_RTOL * scale:
            pairs.append((i, 0.5 * (t[i, i + 1] - t[i + 1, i])))
            i += 2
        else:
            singles.append(i)
            i += 1

    order = [k for start, _ in pairs for k in (start, start + 1)] + singles
    blocks = [value for _, value in pairs] + [0.0] * (len(singles) // 2)
    result = BlockDiagonalD(o_matrix=z[:, order], blocks=tuple(float(b) for b in blocks))

    residual = np.abs(result.o_matrix.T @ d @ result.o_matrix - result.block_matrix()).max(initial=0.0)
    if residual > 1e-10 * scale:
        raise RuntimeError(f"decomposição em blocos com resíduo {residual:.3g}")
    return result


def constraint_quadratic_form(cs, h_c):
    """
    Forma clássica Σ_ab D_ab χ_b φ_a com χ_b = {φ_b, H_c}.

    Returns:
        Dicionário com o total e cada termo indexado por (a, b) no bloco
        de segunda classe.
    """
    if cs.d_matrix is None or cs.first_class_idx:
        raise FirstClassConstraintError("a forma exige apenas vínculos de segunda classe")
    phis = [phi.to_poly(cs.layout) for phi in cs.second_class_constraints()]
    chis = [poisson_bracket(phi, h_c) for phi in phis]
    terms = {}
    total = PolyObservable.zero(cs.layout)
    for a, phi_a in enumerate(phis):
        for b, chi_b in enumerate(chis):
            term = (chi_b * phi_a) * float(cs.d_matrix[a, b])
            terms[(a, b)] = term
            total = total + term
    return {"total": total, "terms": terms}


def rotate_constraints(cs, h_c, bd):
    """
    Vínculos rotacionados Φ_c = Σ_a O_ac φ_a e Φ̇_d = Σ_b O_bd χ_b.

    Returns:
        Dicionário com as listas 'phi', 'phi_dot' e a forma Σ Φ_c B_cd Φ̇_d.
    """
    phis = [phi.to_poly(cs.layout) for phi in cs.second_class_constraints()]
    chis = [poisson_bracket(phi, h_c) for phi in phis]
    o = bd.o_matrix
    if o.shape[0] != len(phis):
        raise LayoutMismatchError("O e vínculos com dimensões diferentes")
    zero = PolyObservable.zero(cs.layout)
    rotated = [sum((phis[a] * float(o[a, c]) for a in range(len(phis))), zero) for c in range(len(phis))]
    rotated_dot = [sum((chis[b] * float(o[b, d]) for b in range(len(chis))), zero) for d in range(len(chis))]
    b_matrix = bd.block_matrix()
    form = zero
    for c, phi_c in enumerate(rotated):
        for d, chi_d in enumerate(rotated_dot):
            if b_matrix[c, d] != 0:
                form = form + (phi_c * chi_d) * float(b_matrix[c, d])
    return {"phi": rotated, "phi_dot": rotated_dot, "form": form}
