"""Error channels of the two-qubit recycling experiment.

Every gate or wait of duration ``t_g`` is followed (or preceded, see the
protocol module) by an amplitude-and-phase damping channel built from the
measured coherence times:

    K1 = [[1, 0], [0, sqrt(1 - gamma - lambda)]]
    K2 = [[0, sqrt(gamma)], [0, 0]]
    K3 = [[0, 0], [0, sqrt(lambda)]]

    gamma  = 1 - exp(-t_g / T1)
    lambda = exp(-t_g / T1) * (1 - exp(-2 t_g / T_phi))
    T_phi  = 2 T1 T2* / (2 T1 - T2*)

Readout is a symmetric-error POVM: outcome i occurs with probability
Tr[rho F_i] and updates the state to M_i rho M_i^dagger / Tr[rho F_i], with

    F_0 = (1-p)|0><0| + p|1><1|,   M_0 = sqrt(1-p)|0><0| + sqrt(p)|1><1|

and F_1, M_1 with the roles of |0> and |1> swapped.  Reset traces out the
recycled qubit, re-prepares |0>, and applies a stochastic bit flip with the
reset error probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import KrausChannel, embed_operator, num_qubits, partial_trace, tensor


@dataclass(frozen=True)
class QubitNoise:
    """Per-qubit coherence, gate-time, and readout-error parameters (times in seconds)."""

    t1: float
    t2_star: float
    t_pi2: float
    t_pi: float
    p_err_m: float

    def __post_init__(self):
        for name in ("t1", "t2_star", "t_pi2", "t_pi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.p_err_m <= 1:
            raise ValueError(f"p_err_m must be in [0, 1], got {self.p_err_m}")
        if self.t2_star > 2 * self.t1:
            raise ValueError(
                f"t2_star={self.t2_star} exceeds 2*t1={2 * self.t1}; "
                "dephasing time would be negative")


@dataclass(frozen=True)
class NoiseParams:
    """Full simulation parameter set: two qubits plus shared timings and errors.

    ``t_a_wait`` is how long qubit A idles per cycle while B is read out and
    reset (measurement time + reset time + the two resonator-relaxation
    waits).  ``p_err_ini`` is B's reset error, ``p_thermal`` the steady-state
    excited population heralding has to filter out.
    """

    qubit_a: QubitNoise
    qubit_b: QubitNoise
    t_cnot: float
    t_buffer: float
    t_meas_a: float
    t_meas_b: float
    t_reset: float
    t_a_wait: float
    t_m_wait: float
    t_r_wait: float
    p_err_ini: float
    p_thermal: float

    def __post_init__(self):
        for name in ("t_cnot", "t_buffer", "t_meas_a", "t_meas_b", "t_reset",
                     "t_a_wait", "t_m_wait", "t_r_wait"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("p_err_ini", "p_thermal"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")


def table_s1() -> NoiseParams:
    """Device parameter set used throughout: the measured values of the experiment."""
    return NoiseParams(
        qubit_a=QubitNoise(t1=20e-6, t2_star=29e-6, t_pi2=20e-9, t_pi=40e-9,
                           p_err_m=0.050),
        qubit_b=QubitNoise(t1=20e-6, t2_star=27e-6, t_pi2=20e-9, t_pi=40e-9,
                           p_err_m=0.053),
        t_cnot=296e-9,
        t_buffer=6e-9,
        t_meas_a=750e-9,
        t_meas_b=750e-9,
        t_reset=300e-9,
        t_a_wait=1.45e-6,
        t_m_wait=0.2e-6,
        t_r_wait=0.2e-6,
        p_err_ini=0.03,
        p_thermal=0.03,
    )


def dephasing_time(t1: float, t2_star: float) -> float:
    """Pure-dephasing time T_phi = 2 T1 T2* / (2 T1 - T2*)."""
    if t2_star > 2 * t1:
        raise ValueError(f"t2_star={t2_star} exceeds 2*t1={2 * t1}")
    return 2 * t1 * t2_star / (2 * t1 - t2_star)


def damping_probabilities(t_g: float, t1: float, t2_star: float) -> tuple[float, float]:
    """(gamma, lambda) of the amplitude-and-phase damping channel over t_g."""
    if t_g < 0:
        raise ValueError(f"gate time must be >= 0, got {t_g}")
    if t_g == 0:
        return 0.0, 0.0
    t_phi = dephasing_time(t1, t2_star)
    decay = math.exp(-t_g / t1)
    gamma = 1.0 - decay
    lam = decay * (1.0 - math.exp(-2.0 * t_g / t_phi))
    return gamma, lam


def apd_channel(t_g: float, t1: float, t2_star: float) -> KrausChannel:
    """Single-qubit amplitude-and-phase damping channel for a gate of duration t_g."""
    gamma, lam = damping_probabilities(t_g, t1, t2_star)
    k1 = np.array([[1, 0], [0, math.sqrt(max(0.0, 1.0 - gamma - lam))]], dtype=complex)
    k2 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    k3 = np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex)
    return KrausChannel([k1, k2, k3])


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Symmetric-error readout: POVM pair (f0, f1) and update pair (m0, m1)."""

    f0: np.ndarray
    f1: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    p_err_m: float

    def __post_init__(self):
        if np.any(self.f0 + self.f1 != np.eye(2)):
            raise ValueError("POVM does not sum to the identity")
        for m, f in ((self.m0, self.f0), (self.m1, self.f1)):
            if not np.allclose(m.conj().T @ m, f, atol=1e-12):
                raise ValueError("update operators do not reproduce the POVM")


def measurement_model(p_err_m: float) -> MeasurementModel:
    """Build the readout model for a given assignment error probability."""
    if not 0 <= p_err_m <= 1:
        raise ValueError(f"p_err_m must be in [0, 1], got {p_err_m}")
    p = p_err_m
    f0 = np.diag([1 - p, p]).astype(complex)
    f1 = np.eye(2, dtype=complex) - f0  # completeness exact by construction
    m0 = np.diag([math.sqrt(1 - p), math.sqrt(p)]).astype(complex)
    m1 = np.diag([math.sqrt(p), math.sqrt(1 - p)]).astype(complex)
    return MeasurementModel(f0=f0, f1=f1, m0=m0, m1=m1, p_err_m=p)


def measurement_branches(rho: np.ndarray, qubit: int,
                         model: MeasurementModel) -> list[np.ndarray]:
    """Both unnormalized post-measurement states [M_i rho M_i^dagger for i in 0, 1].

    The trace of branch i is the outcome probability times the trace of the
    input, so probability-weighted branch states go through unchanged.
    """
    n = num_qubits(np.asarray(rho))
    out = []
    for m in (model.m0, model.m1):
        full = embed_operator(m, n, [qubit])
        out.append(full @ rho @ full.conj().T)
    return out


def measure(rho: np.ndarray, qubit: int, model: MeasurementModel,
            randomness: float) -> tuple[int, np.ndarray, float]:
    """Sample one noisy readout of ``qubit``.

    Args:
        rho: normalized density matrix.
        qubit: which qubit to read out.
        model: readout POVM/update model.
        randomness: a uniform [0, 1) draw owned by the caller.

    Returns:
        (outcome bit, renormalized post-measurement state, outcome probability).
    """
    if not 0 <= randomness < 1:
        raise ValueError(f"randomness must be a uniform draw in [0, 1), got {randomness}")
    branches = measurement_branches(rho, qubit, model)
    p0 = min(max(float(np.trace(branches[0]).real), 0.0), 1.0)
    outcome = 0 if randomness < p0 else 1
    post = branches[outcome]
    prob = p0 if outcome == 0 else 1.0 - p0
    return outcome, post / np.trace(post), prob


def reset_channel(rho: np.ndarray, p_err_ini: float) -> np.ndarray:
    """Reset qubit B (index 1) of a two-qubit state.

    B is traced out and replaced with |0><0|, then a stochastic bit flip with
    probability ``p_err_ini`` models the imperfect reset.  A's reduced state
    is untouched.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"reset_channel expects a two-qubit state, got shape {rho.shape}")
    if not 0 <= p_err_ini <= 1:
        raise ValueError(f"p_err_ini must be in [0, 1], got {p_err_ini}")
    fresh = np.diag([1 - p_err_ini, p_err_ini]).astype(complex)
    return np.kron(partial_trace(rho, [0]), fresh)


def thermal_qubit(p_excited: float) -> np.ndarray:
    """Single-qubit steady state with the given excited population."""
    if not 0 <= p_excited <= 1:
        raise ValueError(f"p_excited must be in [0, 1], got {p_excited}")
    return np.diag([1 - p_excited, p_excited]).astype(complex)


def thermal_initial_state(p_thermal: float, n: int) -> np.ndarray:
    """Product of n thermal qubits: [(1-p)|0><0| + p|1><1|]^(x) n."""
    return tensor(*([thermal_qubit(p_thermal)] * n))
