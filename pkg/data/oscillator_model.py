"""
Parâmetros de referência do modelo de dois osciladores acoplados
(sistema com frequência ω₀, banho de um único oscilador com frequência ω_B).

k₁ = ω₀², k₂ = ω_B², H_I = −k′x₁x₂.
"""

PHASE_NAMES = ("x1", "p1", "x2", "p2")

# Regime ω_B ≫ ω₀ com τ grande (sinc em regime oscilatório)
REPRESENTATIVE_MODEL = {
    "k1": 1.0,
    "k2": 10000.0,
    "kprime": 0.1,
    "tau": 0.5,
    "inv_temp": 1.0,
}

# Mesmo acoplamento com ω_B·τ = 1, onde γ₁₁ ≈ γ₂₂
MARKOV_MODEL = {
    "k1": 1.0,
    "k2": 10000.0,
    "kprime": 0.1,
    "tau": 0.01,
    "inv_temp": 1.0,
}

# Modelo pequeno para comparar Lindblad com a dinâmica exata
COMPARISON_MODEL = {
    "k1": 1.0,
    "k2": 100.0,
    "kprime": 0.6,
    "tau": 0.1,
    "inv_temp": 1.0,
}

DEFAULT_FOCK_DIMS = (16, 4)
COMPARISON_FOCK_DIMS = (6, 6)

# Grade temporal padrão (em unidades de 1/ω₀)
DEFAULT_TIME_GRID = {
    "t_final": 2.0,
    "dt": 0.001,
    "sample_every": 10,
}

WEAK_COUPLING_THRESHOLD = 0.1
INTERIOR_EXCLUDE = 2
