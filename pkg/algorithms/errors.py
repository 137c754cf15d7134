"""
Exceções usadas pelos módulos de simulação.

Cada classe corresponde a um tipo de falha que a linha de comando traduz
para um código de saída (ver ``cli.main.EXIT_CODES``).
"""


class SimulationError(Exception):
    """Classe base de todos os erros do pacote."""


class LayoutMismatchError(SimulationError, ValueError):
    """Observáveis ou matrizes definidos sobre espaços incompatíveis."""


class InconsistentDynamicsError(SimulationError):
    """A cadeia de consistência exige uma constante não nula ≈ 0."""


class FirstClassConstraintError(SimulationError):
    """Há vínculos de primeira classe; é preciso fixar o gauge."""


class SingularConstraintMatrixError(SimulationError):
    """Matriz C mal condicionada no bloco de segunda classe."""


class ConstraintViolationError(SimulationError, ValueError):
    """Ponto do espaço de fase fora da superfície de vínculos."""


class DegenerateModelError(SimulationError):
    """Modelo degenerado (por exemplo acoplamento nulo, γ₁₁ = 0)."""


class NotPhysicalError(SimulationError, ValueError):
    """Operador não hermitiano, não unitário ou não positivo além da tolerância."""


class TruncationError(SimulationError):
    """A truncagem do espaço de Fock não é suficiente."""


class NumericalBreachError(SimulationError):
    """Um monitor de integração ultrapassou o limite configurado."""


class ConfigError(SimulationError, ValueError):
    """Configuração ilegível, inválida pelo schema ou fisicamente inválida."""
