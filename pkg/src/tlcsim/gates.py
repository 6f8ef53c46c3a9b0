"""Gate catalog, linear-cluster-state construction, and circuit identities.

The linear cluster state (LCS) on n qubits is the graph state of the 1-D
chain: Hadamards on every qubit of ``|0...0>`` followed by CZ between each
adjacent pair.  It is stabilized by the generators ``Z_{k-1} X_k Z_{k+1}``
(boundary Z factors dropped).

The circuit identity that drives the whole two-qubit recycling scheme is

    CZ (I (x) H) |psi>_A |0>_B  =  SWAP (H (x) I) CNOT |psi>_A |0>_B

with A as the CNOT control.  Consecutive SWAPs cancel, so attaching a fresh
chain neighbour costs one CNOT plus one Hadamard on the surviving qubit;
``verify_eq2_identity`` checks the identity state-by-state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

from .linalg import check_state_vector, embed_operator, tensor

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SX = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2
CZ = np.diag([1, 1, 1, -1]).astype(complex)
#: control = qubit 0 (most significant), target = qubit 1
CNOT = np.array([[1, 0, 0, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1],
                 [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1]], dtype=complex)

PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

for _m in (I2, X, Y, Z, H, SX, CZ, CNOT, SWAP):
    _m.setflags(write=False)


def phase_gate(theta: float) -> np.ndarray:
    """Z rotation exp(-i theta/2 sigma_Z) = diag(e^{-i theta/2}, e^{+i theta/2})."""
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def pauli_matrix(word: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``"XZI"`` (qubit 0 first)."""
    try:
        return reduce(np.kron, [PAULI[c] for c in word])
    except KeyError as exc:
        raise ValueError(f"invalid Pauli letter {exc} in {word!r}") from None


def basis_rotation(basis: str) -> np.ndarray:
    """Pre-measurement rotation mapping a Pauli eigenbasis onto the Z basis.

    Z: identity.  X: H.  Y: phase_gate(-pi/2) then H, i.e. the matrix
    ``H @ phase_gate(-pi/2)``.  With R the returned matrix,
    ``R P R^dagger = Z`` for the requested Pauli P, so measuring Z after R
    is the same as measuring P before it.
    """
    if basis == "Z":
        return I2.copy()
    if basis == "X":
        return H.copy()
    if basis == "Y":
        return H @ phase_gate(-np.pi / 2)
    raise ValueError(f"unknown basis {basis!r}, expected one of X, Y, Z")


_FIXED_GATES = {
    "H": H, "X": X, "SX": SX, "PAULI_X": X, "PAULI_Y": Y, "PAULI_Z": Z,
    "CZ": CZ, "CNOT": CNOT, "SWAP": SWAP,
}


@dataclass(frozen=True)
class Gate:
    """One gate instance in a circuit; ``kind`` "Z" takes a rotation angle."""

    kind: str
    targets: tuple[int, ...]
    theta: float | None = None

    def matrix(self) -> np.ndarray:
        if self.kind == "Z":
            if self.theta is None:
                raise ValueError("Z gate needs a rotation angle")
            return phase_gate(self.theta)
        try:
            return _FIXED_GATES[self.kind]
        except KeyError:
            raise ValueError(f"unknown gate kind {self.kind!r}") from None


@dataclass(frozen=True)
class Measure:
    """Z-basis readout of one qubit after rotating ``basis`` onto Z."""

    qubit: int
    basis: str = "Z"


@dataclass(frozen=True)
class Reset:
    """Discard one qubit's state and re-prepare it in |0>."""

    qubit: int


CircuitOp = Union[Gate, Measure, Reset]


@dataclass(frozen=True)
class Circuit:
    """An ordered list of gates, measurements, and resets on n qubits."""

    n: int
    ops: tuple[CircuitOp, ...]

    def __post_init__(self):
        for op in self.ops:
            idx = op.targets if isinstance(op, Gate) else (op.qubit,)
            if any(q < 0 or q >= self.n for q in idx):
                raise ValueError(f"{op} addresses a qubit outside 0..{self.n - 1}")


def ideal_lcs(n: int) -> np.ndarray:
    """State vector of the n-qubit linear cluster state.

    H on every qubit of |0...0>, then CZ on each adjacent pair
    (0,1), (1,2), ..., (n-2, n-1).  All amplitudes have magnitude 2^{-n/2}.
    """
    if not 2 <= n <= 10:
        raise ValueError(f"qubit count {n} outside supported range 2..10")
    plus = H @ np.array([1, 0], dtype=complex)
    psi = tensor(*([plus] * n))
    for i in range(n - 1):
        psi = embed_operator(CZ, n, [i, i + 1]) @ psi
    return psi


def lcs_stabilizer_generators(n: int) -> list[str]:
    """Stabilizer generators of the chain graph state as Pauli words."""
    gens = []
    for k in range(n):
        word = ["I"] * n
        word[k] = "X"
        if k > 0:
            word[k - 1] = "Z"
        if k < n - 1:
            word[k + 1] = "Z"
        gens.append("".join(word))
    return gens


def spatial_lcs_circuit(n: int, bases: Sequence[str] | None = None) -> Circuit:
    """Chain-graph-state preparation circuit with per-qubit measurements.

    Builds the state qubit-by-qubit (each CZ may be delayed past earlier
    measurements, so qubit i is measured right after CZ(i, i+1)), which is
    the ordering the two-qubit recycling protocol inherits.
    """
    if n < 2:
        raise ValueError(f"need at least 2 qubits, got {n}")
    if bases is None:
        bases = ("Z",) * n
    if len(bases) != n:
        raise ValueError(f"expected {n} bases, got {len(bases)}")
    ops: list[CircuitOp] = [Gate("H", (0,))]
    for i in range(n - 1):
        ops.append(Gate("H", (i + 1,)))
        ops.append(Gate("CZ", (i, i + 1)))
        ops.append(Measure(i, bases[i]))
    ops.append(Measure(n - 1, bases[n - 1]))
    return Circuit(n, tuple(ops))


def simulate_circuit(circuit: Circuit) -> dict[str, float]:
    """Noiseless outcome distribution of a circuit, measurement order = op order.

    Enumerates every measurement branch of the state vector and returns the
    joint probability of each outcome string (one character per Measure op).
    """
    n = circuit.n
    psi0 = np.zeros(2**n, dtype=complex)
    psi0[0] = 1.0
    branches: list[tuple[np.ndarray, str]] = [(psi0, "")]
    for op in circuit.ops:
        if isinstance(op, Gate):
            full = embed_operator(op.matrix(), n, op.targets)
            branches = [(full @ psi, bits) for psi, bits in branches]
        elif isinstance(op, Measure):
            rot = embed_operator(basis_rotation(op.basis), n, [op.qubit])
            new = []
            for psi, bits in branches:
                psi = rot @ psi
                t = psi.reshape([2] * n)
                for outcome in (0, 1):
                    part = np.zeros_like(t)
                    idx = [slice(None)] * n
                    idx[op.qubit] = outcome
                    part[tuple(idx)] = t[tuple(idx)]
                    new.append((part.reshape(-1), bits + str(outcome)))
            branches = new
        elif isinstance(op, Reset):
            new = []
            for psi, bits in branches:
                t = psi.reshape([2] * n)
                for outcome in (0, 1):
                    part = np.zeros_like(t)
                    src = [slice(None)] * n
                    src[op.qubit] = outcome
                    dst = [slice(None)] * n
                    dst[op.qubit] = 0
                    part[tuple(dst)] = t[tuple(src)]
                    if np.any(part):
                        new.append((part.reshape(-1), bits))
            branches = new
        else:
            raise ValueError(f"unsupported circuit op {op}")
    dist: dict[str, float] = {}
    for psi, bits in branches:
        p = float(np.linalg.norm(psi) ** 2)
        dist[bits] = dist.get(bits, 0.0) + p
    return dist


def verify_eq2_identity(psi: np.ndarray, atol: float = 1e-12) -> bool:
    """Check the SWAP-elimination identity on one single-qubit state.

    Compares CZ (I (x) H) |psi>|0> against SWAP (H (x) I) CNOT |psi>|0>
    amplitude-wise (CNOT control = first qubit).
    """
    psi = check_state_vector(psi)
    if psi.shape[0] != 2:
        raise ValueError("identity is defined for single-qubit input states")
    inp = np.kron(psi, np.array([1, 0], dtype=complex))
    lhs = CZ @ tensor(I2, H) @ inp
    rhs = SWAP @ tensor(H, I2) @ CNOT @ inp
    return bool(np.abs(lhs - rhs).max() <= atol)


def eq2_max_deviation(states: Iterable[np.ndarray]) -> float:
    """Largest amplitude deviation of the SWAP-elimination identity over states."""
    worst = 0.0
    for psi in states:
        inp = np.kron(np.asarray(psi, dtype=complex), np.array([1, 0], dtype=complex))
        lhs = CZ @ tensor(I2, H) @ inp
        rhs = SWAP @ tensor(H, I2) @ CNOT @ inp
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
