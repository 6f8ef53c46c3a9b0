"""Dense complex linear algebra for few-qubit states, operators, and channels.

Everything in this package works on plain ``numpy`` arrays of dtype
``complex128``: state vectors are 1-D arrays of length ``2**n``, density
matrices and operators are square 2-D arrays.  Hilbert-space dimensions stay
tiny (``d <= 64``), so all storage is dense and all routines favour clarity
over asymptotic cleverness.

Qubit ordering is big-endian throughout: qubit 0 is the most significant bit
of a computational-basis index, i.e. ``tensor(a, b)`` puts ``a`` on qubit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

#: tolerance for algebraic identities (trace, hermiticity, completeness)
ATOL_ALGEBRA = 1e-10
#: how far below zero an eigenvalue may sit before a matrix is rejected as non-PSD
ATOL_PSD = 1e-8


def num_qubits(a: np.ndarray) -> int:
    """Number of qubits of a state vector or square operator; rejects non-power-of-two sizes."""
    dim = a.shape[0]
    n = dim.bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    if a.ndim == 2 and a.shape[0] != a.shape[1]:
        raise ValueError(f"operator is not square: shape {a.shape}")
    return n


def check_state_vector(psi: np.ndarray, atol: float = ATOL_ALGEBRA) -> np.ndarray:
    """Validate a pure state: 1-D, power-of-two length, unit norm."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state vector must be 1-D, got ndim={psi.ndim}")
    num_qubits(psi)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state vector norm {norm} deviates from 1 by more than {atol}")
    return psi


def is_hermitian(m: np.ndarray, atol: float = ATOL_ALGEBRA) -> bool:
    return bool(np.all(np.abs(m - m.conj().T) <= atol))


def check_density_matrix(rho: np.ndarray, atol: float = ATOL_ALGEBRA,
                         atol_psd: float = ATOL_PSD) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, PSD up to numerical noise."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2:
        raise ValueError(f"density matrix must be 2-D, got ndim={rho.ndim}")
    num_qubits(rho)
    if not is_hermitian(rho, atol):
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix trace {tr} deviates from 1 by more than {atol}")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -atol_psd:
        raise ValueError(f"density matrix has eigenvalue {w.min()} below -{atol_psd}")
    return rho


def check_operator(u: np.ndarray) -> np.ndarray:
    """Validate a square operator on a power-of-two dimension."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2:
        raise ValueError(f"operator must be 2-D, got ndim={u.ndim}")
    num_qubits(u)
    return u


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of state vectors or of operators (big-endian: first factor = qubit 0)."""
    if not factors:
        raise ValueError("tensor requires at least one factor")
    ndim = factors[0].ndim
    if any(f.ndim != ndim for f in factors):
        raise ValueError("tensor operands must all be vectors or all be matrices")
    return reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors])


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the kept qubits (in ascending index order).

    Args:
        rho: density matrix on n qubits.
        keep: nonempty subset of qubit indices to retain.
    """
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep indices {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    for q in sorted(traced, reverse=True):
        t = np.trace(t, axis1=q, axis2=t.ndim // 2 + q)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def embed_operator(u: np.ndarray, n: int, targets: Sequence[int]) -> np.ndarray:
    """Expand an operator acting on ``targets`` to the full n-qubit space.

    ``targets`` lists which global qubit each operator qubit acts on,
    in operator qubit order (operator qubit 0 -> targets[0], ...).
    """
    u = check_operator(u)
    targets = list(targets)
    k = num_qubits(u)
    if k != len(targets):
        raise ValueError(f"operator acts on {k} qubits but {len(targets)} targets given")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"targets {targets} out of range for {n} qubits")
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(u, np.eye(2 ** (n - k), dtype=complex))
    # slot i of `full` currently holds global qubit (targets + rest)[i]
    slot_of = np.argsort(targets + rest)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(slot_of) + [n + s for s in slot_of])
    return t.reshape(2**n, 2**n)


def apply_unitary(rho: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Conjugate ``rho`` by ``u`` embedded on the target qubits: U rho U^dagger."""
    rho = np.asarray(rho, dtype=complex)
    full = embed_operator(u, num_qubits(rho), targets)
    return full @ rho @ full.conj().T


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A completely positive trace-preserving map given by Kraus operators.

    Completeness (sum_m K_m^dagger K_m = identity) is enforced at
    construction; every noise process in this package is one of these.
    """

    operators: tuple[np.ndarray, ...]

    def __init__(self, operators: Sequence[np.ndarray]):
        ops = tuple(check_operator(k) for k in operators)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if any(k.shape[0] != dim for k in ops):
            raise ValueError("Kraus operators must share one dimension")
        total = sum(k.conj().T @ k for k in ops)
        if not np.allclose(total, np.eye(dim), atol=ATOL_ALGEBRA):
            dev = np.abs(total - np.eye(dim)).max()
            raise ValueError(f"Kraus completeness violated by {dev:.3e}")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n(self) -> int:
        return num_qubits(self.operators[0])


def apply_channel(rho: np.ndarray, channel: KrausChannel,
                  targets: Sequence[int]) -> np.ndarray:
    """Apply a Kraus channel to the target qubits: sum_m K_m rho K_m^dagger."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho)
    out = np.zeros_like(rho)
    for k in channel.operators:
        full = embed_operator(k, n, targets)
        out += full @ rho @ full.conj().T
    return out


def eigh(m: np.ndarray, atol: float = ATOL_PSD) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Returns ``(w, v)`` with ``m = v @ diag(w) @ v.conj().T``.  Rejects
    inputs that are not Hermitian within ``atol``.
    """
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, atol):
        raise ValueError("eigh requires a Hermitian matrix")
    return np.linalg.eigh(m)


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """Fidelity <psi| rho |psi> of a state against a pure target."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if rho.shape[0] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: rho {rho.shape[0]}, psi {psi.shape[0]}")
    val = psi.conj() @ rho @ psi
    if abs(val.imag) > ATOL_ALGEBRA:
        raise ValueError(f"fidelity has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# random objects for property tests and demos

def random_state_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state on n qubits."""
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary on n qubits (QR of a Ginibre matrix)."""
    d = 2**n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix on n qubits (normalized Wishart)."""
    d = 2**n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
