"""The two-qubit recycling protocol that grows a linear cluster state in time.

Physical register: qubit A (index 0) survives the whole run, qubit B
(index 1) is measured and reset once per cycle.  A run for n logical qubits
is

    [herald]  measure A and B, keep only runs that report (0, 0)
    [prep]    H on A
    cycle k = 0 .. n-2:
        CNOT (A control, B target), then H on A
        rotate B into the requested basis and measure it   -> bit x_k
        final cycle: also rotate and measure A             -> bit x_{n-1}
        otherwise:   A idles for t_a_wait, B is reset to |0>

which reproduces, bit for bit, measuring the n-qubit chain graph state in
the same bases: B's cycle-k outcome plays spatial qubit k and A's final
outcome plays qubit n-1.

Noise model (when a :class:`~tlcsim.noise.NoiseParams` is supplied): every
gate slot is accompanied by amplitude-and-phase damping on both qubits over
the slot duration (gate time + inter-gate buffer); by default the damping
follows the slot's unitary (``noise_position="after"``), the alternative
order is available as ``"before"``.  Pre-measurement basis rotations are
virtual-Z/compiled pulses folded into the slot, so they act instantaneously
after the slot damping, immediately before the readout POVM.  While B is
read out and reset, A accrues damping over ``t_a_wait``; B is rebuilt by the
reset channel so it accrues nothing extra.  Readout uses the symmetric-error
POVM, reset the trace-out-and-bit-flip channel, and heralded runs start from
the two-qubit thermal state.  Without heralding the run starts from |00>.

Three independent evaluation routes are provided and cross-checked by the
test suite: exact branch enumeration (:func:`run_protocol_enumerated`),
seeded Monte Carlo sampling (:func:`run_protocol_shots`), and a
deferred-measurement picture (:func:`effective_state`) that condenses the
whole run into one n-qubit density matrix.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .gates import CNOT, H, basis_rotation, pauli_matrix
from .linalg import (KrausChannel, apply_channel, apply_unitary, embed_operator,
                     partial_trace, tensor)
from .noise import (MeasurementModel, NoiseParams, apd_channel, measurement_branches,
                    measurement_model, reset_channel, thermal_qubit)

_CHUNK_SHOTS = 4096
_BASES = ("X", "Y", "Z")


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol run: n logical qubits need n-1 measure-and-reset cycles.

    ``bases[i]`` is the measurement basis of logical qubit i (B in cycle i
    for i < n-1, A's final readout for i = n-1).  ``noise=None`` runs the
    ideal circuit.  ``noise_position`` picks whether slot damping follows or
    precedes each slot's unitary.
    """

    n: int
    bases: tuple[str, ...]
    noise: NoiseParams | None = None
    heralding: bool = True
    shots: int = 1
    seed: int = 0
    noise_position: str = "after"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2 logical qubits, got {self.n}")
        object.__setattr__(self, "bases", tuple(self.bases))
        if len(self.bases) != self.n:
            raise ValueError(f"expected {self.n} bases, got {len(self.bases)}")
        if any(b not in _BASES for b in self.bases):
            raise ValueError(f"bases must be from {_BASES}, got {self.bases}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.noise_position not in ("after", "before"):
            raise ValueError(f"noise_position must be 'after' or 'before', "
                             f"got {self.noise_position!r}")


@dataclass(frozen=True)
class ShotRecord:
    """One protocol run: heralding bits, the time-ordered outcome bits, and
    whether the run survives heralding post-selection."""

    index: int
    herald: tuple[int, int]
    outcomes: tuple[int, ...]
    accepted: bool


@dataclass(frozen=True)
class OutcomeDistribution:
    """Exact joint outcome distribution of a protocol configuration.

    ``probabilities`` maps each outcome string ``x_0 ... x_{n-1}`` to its
    probability conditioned on heralding acceptance; they sum to one.
    ``acceptance_probability`` is the heralding success probability (1.0
    when heralding is off or the run is noiseless).  ``final_states``, when
    requested, holds the normalized two-qubit state just before the final
    cycle's measurements, keyed by the earlier outcomes ``x_0 .. x_{n-2}``.
    """

    n: int
    bases: tuple[str, ...]
    probabilities: dict[str, float]
    acceptance_probability: float
    final_states: dict[str, np.ndarray] | None = None


# ---------------------------------------------------------------------------
# scalar route: single-state cycle and exact branch enumeration

def _qubit_channels(noise: NoiseParams, t_a: float, t_b: float) -> list[tuple[KrausChannel, int]]:
    out = []
    if t_a > 0:
        out.append((apd_channel(t_a, noise.qubit_a.t1, noise.qubit_a.t2_star), 0))
    if t_b > 0:
        out.append((apd_channel(t_b, noise.qubit_b.t1, noise.qubit_b.t2_star), 1))
    return out


def _slot(rho: np.ndarray, unitaries: Sequence[tuple[np.ndarray, Sequence[int]]],
          duration: float, noise: NoiseParams | None, position: str) -> np.ndarray:
    """One timing slot: circuit unitaries plus damping on both qubits over ``duration``."""
    def damp(r):
        if noise is None:
            return r
        for ch, q in _qubit_channels(noise, duration, duration):
            r = apply_channel(r, ch, [q])
        return r

    if position == "before":
        rho = damp(rho)
    for u, targets in unitaries:
        rho = apply_unitary(rho, u, targets)
    if position == "after":
        rho = damp(rho)
    return rho


def _cycle_to_rotations(rho: np.ndarray, basis_b: str, basis_a: str | None,
                        noise: NoiseParams | None, position: str) -> np.ndarray:
    """CNOT slot, Hadamard slot, then the instantaneous pre-measurement rotations."""
    t_buf = noise.t_buffer if noise is not None else 0.0
    t_cnot = noise.t_cnot if noise is not None else 0.0
    t_1q = noise.qubit_a.t_pi2 if noise is not None else 0.0
    rho = _slot(rho, [(CNOT, (0, 1))], t_cnot + t_buf, noise, position)
    rho = _slot(rho, [(H, (0,))], t_1q + t_buf, noise, position)
    rho = apply_unitary(rho, basis_rotation(basis_b), [1])
    if basis_a is not None:
        rho = apply_unitary(rho, basis_rotation(basis_a), [0])
    return rho


def _models(noise: NoiseParams | None) -> tuple[MeasurementModel, MeasurementModel]:
    if noise is None:
        ideal = measurement_model(0.0)
        return ideal, ideal
    return measurement_model(noise.qubit_a.p_err_m), measurement_model(noise.qubit_b.p_err_m)


def _post_cycle(rho: np.ndarray, noise: NoiseParams | None) -> np.ndarray:
    """Non-final cycle tail: A idles while B is read out and reset."""
    if noise is not None:
        rho = apply_channel(
            rho, apd_channel(noise.t_a_wait, noise.qubit_a.t1, noise.qubit_a.t2_star), [0])
        rho = reset_channel(rho, noise.p_err_ini)
    else:
        rho = reset_channel(rho, 0.0)
    return rho


def prepared_state(noise: NoiseParams | None, heralding: bool,
                   noise_position: str = "after") -> tuple[np.ndarray, float]:
    """Heralded two-qubit input state with A in |+>, and the acceptance probability."""
    if noise is not None and heralding:
        rho = tensor(thermal_qubit(noise.p_thermal), thermal_qubit(noise.p_thermal))
        model_a, model_b = _models(noise)
        rho = measurement_branches(rho, 0, model_a)[0]
        rho = measurement_branches(rho, 1, model_b)[0]
        acceptance = float(np.trace(rho).real)
        rho = rho / np.trace(rho)
    else:
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        acceptance = 1.0
    t_buf = noise.t_buffer if noise is not None else 0.0
    t_1q = noise.qubit_a.t_pi2 if noise is not None else 0.0
    rho = _slot(rho, [(H, (0,))], t_1q + t_buf, noise, noise_position)
    return rho, acceptance


def run_cycle(state: np.ndarray, basis: str, *, noise: NoiseParams | None = None,
              is_final: bool = False, basis_a: str | None = None,
              rng: np.random.Generator | None = None,
              noise_position: str = "after") -> tuple[tuple[int, ...], np.ndarray]:
    """Run one measure-and-reset cycle on a normalized two-qubit state.

    Measures B in ``basis``; in the final cycle also measures A in
    ``basis_a``.  Measurement outcomes are sampled with uniform draws from
    ``rng`` (the caller owns all randomness).  Returns the sampled bits --
    ``(x_b,)`` or ``(x_b, x_a)`` -- and the normalized next state: the
    post-reset state for a non-final cycle, the post-measurement state for
    the final one.
    """
    if is_final and basis_a is None:
        raise ValueError("final cycle needs basis_a for qubit A's measurement")
    rng = rng if rng is not None else np.random.default_rng()
    model_a, model_b = _models(noise)
    rho = _cycle_to_rotations(np.asarray(state, dtype=complex), basis,
                              basis_a if is_final else None, noise, noise_position)
    from .noise import measure

    x_b, rho, _ = measure(rho, 1, model_b, rng.random())
    if is_final:
        x_a, rho, _ = measure(rho, 0, model_a, rng.random())
        return (x_b, x_a), rho
    rho = _post_cycle(rho, noise)
    return (x_b,), rho


def run_protocol_enumerated(cfg: ProtocolConfig,
                            keep_final_states: bool = False) -> OutcomeDistribution:
    """Exact outcome distribution by following every measurement branch.

    Branch states are carried unnormalized (probability equals trace), so no
    branch ever divides by a near-zero probability; probabilities are read
    off at the end.  With heralding, only the accepted herald branch is
    evolved and the returned distribution is conditioned on acceptance.
    """
    if cfg.n > 8:
        raise ValueError(f"enumeration supports n <= 8, got {cfg.n}")
    rho0, acceptance = prepared_state(cfg.noise, cfg.heralding, cfg.noise_position)
    model_a, model_b = _models(cfg.noise)
    branches: list[tuple[np.ndarray, str]] = [(rho0, "")]
    final_states: dict[str, np.ndarray] = {}
    for k in range(cfg.n - 1):
        final = k == cfg.n - 2
        new: list[tuple[np.ndarray, str]] = []
        for rho, bits in branches:
            rho = _cycle_to_rotations(rho, cfg.bases[k],
                                      cfg.bases[cfg.n - 1] if final else None,
                                      cfg.noise, cfg.noise_position)
            if final and keep_final_states:
                final_states[bits] = rho / np.trace(rho)
            for x_b, rho_b in enumerate(measurement_branches(rho, 1, model_b)):
                if final:
                    for x_a, rho_ab in enumerate(measurement_branches(rho_b, 0, model_a)):
                        new.append((rho_ab, bits + f"{x_b}{x_a}"))
                else:
                    new.append((_post_cycle(rho_b, cfg.noise), bits + str(x_b)))
        branches = new
    probs = {bits: float(np.trace(rho).real) for rho, bits in branches}
    total = sum(probs.values())
    probs = {bits: p / total for bits, p in sorted(probs.items())}
    return OutcomeDistribution(n=cfg.n, bases=cfg.bases, probabilities=probs,
                               acceptance_probability=acceptance,
                               final_states=final_states if keep_final_states else None)


# ---------------------------------------------------------------------------
# vectorized Monte Carlo route
#
# States are carried as row-major vectorizations vec(rho) of length 16, so a
# map rho -> A rho B is the matrix kron(A, B.T) acting on vec(rho), and each
# deterministic stretch of the protocol collapses into a single 16x16 matrix.

def _sop_unitary(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def _sop_kraus(ops: Iterable[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in ops)


def _sop_qubit_channel(ch: KrausChannel, qubit: int) -> np.ndarray:
    return _sop_kraus(embed_operator(k, 2, [qubit]) for k in ch.operators)


def _sop_reset(p_err_ini: float) -> np.ndarray:
    """Superoperator of the B-reset channel, built column-by-column."""
    out = np.zeros((16, 16), dtype=complex)
    for i in range(4):
        for j in range(4):
            basis = np.zeros((4, 4), dtype=complex)
            basis[i, j] = 1.0
            red = basis.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
            fresh = np.diag([1 - p_err_ini, p_err_ini]).astype(complex)
            out[:, 4 * i + j] = np.kron(red, fresh).reshape(-1)
    return out


@dataclass(frozen=True, eq=False)
class _MeasureStep:
    """Sampling point of the compiled program: POVM probabilities and updates."""

    qubit: int
    f0_vec: np.ndarray      # p0 = Re( states . f0_vec )
    update0: np.ndarray     # 16x16, unnormalized branch update for outcome 0
    update1: np.ndarray


@dataclass(frozen=True, eq=False)
class _Program:
    init: np.ndarray                     # vec of the initial two-qubit state
    steps: tuple                         # _MeasureStep | 16x16 superop matrices
    herald_measurements: int             # leading measure steps that are heralds


def _compile_program(cfg: ProtocolConfig) -> _Program:
    noise = cfg.noise
    model_a, model_b = _models(noise)
    t_buf = noise.t_buffer if noise is not None else 0.0
    t_cnot = (noise.t_cnot if noise is not None else 0.0) + t_buf
    t_1q = (noise.qubit_a.t_pi2 if noise is not None else 0.0) + t_buf

    def slot_sop(unitaries: list[tuple[np.ndarray, list[int]]], duration: float) -> np.ndarray:
        damp = np.eye(16, dtype=complex)
        if noise is not None and duration > 0:
            for ch, q in _qubit_channels(noise, duration, duration):
                damp = _sop_qubit_channel(ch, q) @ damp
        gate = np.eye(16, dtype=complex)
        for u, targets in unitaries:
            gate = _sop_unitary(embed_operator(u, 2, targets)) @ gate
        return damp @ gate if cfg.noise_position == "after" else gate @ damp

    def measure_step(qubit: int, model: MeasurementModel) -> _MeasureStep:
        f0 = embed_operator(model.f0, 2, [qubit])
        u0 = _sop_unitary(embed_operator(model.m0, 2, [qubit]))
        u1 = _sop_unitary(embed_operator(model.m1, 2, [qubit]))
        return _MeasureStep(qubit=qubit, f0_vec=f0.T.reshape(-1), update0=u0, update1=u1)

    steps: list = []
    if noise is not None and cfg.heralding:
        init = tensor(thermal_qubit(noise.p_thermal), thermal_qubit(noise.p_thermal))
        steps.append(measure_step(0, model_a))
        steps.append(measure_step(1, model_b))
        herald_measurements = 2
    else:
        init = np.zeros((4, 4), dtype=complex)
        init[0, 0] = 1.0
        herald_measurements = 0

    pending = slot_sop([(H, [0])], t_1q)
    for k in range(cfg.n - 1):
        final = k == cfg.n - 2
        pending = slot_sop([(CNOT, [0, 1])], t_cnot) @ pending
        pending = slot_sop([(H, [0])], t_1q) @ pending
        pending = _sop_unitary(embed_operator(basis_rotation(cfg.bases[k]), 2, [1])) @ pending
        if final:
            pending = _sop_unitary(
                embed_operator(basis_rotation(cfg.bases[cfg.n - 1]), 2, [0])) @ pending
        steps.append(pending)
        pending = None
        steps.append(measure_step(1, model_b))
        if final:
            steps.append(measure_step(0, model_a))
        else:
            post = np.eye(16, dtype=complex)
            if noise is not None:
                post = _sop_qubit_channel(
                    apd_channel(noise.t_a_wait, noise.qubit_a.t1, noise.qubit_a.t2_star), 0)
                post = _sop_reset(noise.p_err_ini) @ post
            else:
                post = _sop_reset(0.0)
            pending = post
    return _Program(init=init.reshape(-1), steps=tuple(steps),
                    herald_measurements=herald_measurements)


_TRACE_VEC = np.eye(4, dtype=complex).reshape(-1)


def _run_chunk(program: _Program, batch: int, rng: np.random.Generator) -> np.ndarray:
    """Simulate ``batch`` shots; returns all measured bits, one row per shot."""
    states = np.tile(program.init, (batch, 1))
    bits: list[np.ndarray] = []
    for step in program.steps:
        if isinstance(step, _MeasureStep):
            p0 = np.clip((states @ step.f0_vec).real, 0.0, 1.0)
            outcome = rng.random(batch) >= p0
            out0 = states @ step.update0.T
            out1 = states @ step.update1.T
            states = np.where(outcome[:, None], out1, out0)
            norm = (states @ _TRACE_VEC).real
            states /= norm[:, None]
            bits.append(outcome.astype(np.uint8))
        else:
            states = states @ step.T
    return np.stack(bits, axis=1)


def _simulate_shots(cfg: ProtocolConfig, shots: int, *, key_prefix: tuple[int, ...] = (),
                    workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All shot outcomes as arrays: herald bits (S, 2), outcome bits (S, n), accepted (S,).

    Shots are split into fixed-size chunks, and chunk c draws from a
    generator seeded by (cfg.seed, *key_prefix, c), so results are
    byte-identical for any worker count.
    """
    program = _compile_program(cfg)
    n_chunks = (shots + _CHUNK_SHOTS - 1) // _CHUNK_SHOTS

    def one(c: int) -> np.ndarray:
        size = min(_CHUNK_SHOTS, shots - c * _CHUNK_SHOTS)
        ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=key_prefix + (c,))
        return _run_chunk(program, size, np.random.Generator(np.random.PCG64(ss)))

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(c) for c in range(n_chunks)]
    all_bits = np.concatenate(parts, axis=0)
    nh = program.herald_measurements
    herald = all_bits[:, :nh] if nh else np.zeros((shots, 2), dtype=np.uint8)
    outcomes = all_bits[:, nh:]
    accepted = ~herald.any(axis=1)
    return herald[:, :2] if nh else herald, outcomes, accepted


def run_protocol_shots(cfg: ProtocolConfig, workers: int = 1) -> list[ShotRecord]:
    """Seeded Monte Carlo sampling of ``cfg.shots`` protocol runs.

    Every run is simulated and recorded whether or not its herald accepts;
    downstream estimation uses only accepted records.  Identical seeds give
    identical record lists for any worker count.
    """
    herald, outcomes, accepted = _simulate_shots(cfg, cfg.shots, workers=workers)
    return [ShotRecord(index=i,
                       herald=(int(herald[i, 0]), int(herald[i, 1])),
                       outcomes=tuple(int(b) for b in outcomes[i]),
                       accepted=bool(accepted[i]))
            for i in range(cfg.shots)]


def run_protocol_shot_counts(cfg: ProtocolConfig, reps: int = 1, *,
                             key_prefix: tuple[int, ...] = (),
                             workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Histogram form of :func:`run_protocol_shots` for estimation pipelines.

    Runs ``reps * cfg.shots`` shots and bins the accepted runs of each
    repetition over the 2^n outcome strings (big-endian bit packing).
    Returns ``(counts, n_accepted, n_total)`` with shapes (reps, 2^n),
    (reps,), (reps,).
    """
    herald, outcomes, accepted = _simulate_shots(cfg, reps * cfg.shots,
                                                 key_prefix=key_prefix, workers=workers)
    weights = 1 << np.arange(cfg.n - 1, -1, -1, dtype=np.int64)
    packed = outcomes.astype(np.int64) @ weights
    counts = np.zeros((reps, 2**cfg.n), dtype=np.int64)
    n_accepted = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        lo, hi = r * cfg.shots, (r + 1) * cfg.shots
        sel = packed[lo:hi][accepted[lo:hi]]
        counts[r] = np.bincount(sel, minlength=2**cfg.n)
        n_accepted[r] = sel.size
    return counts, n_accepted, np.full(reps, cfg.shots, dtype=np.int64)


def time_to_space_mapping(records: Sequence[ShotRecord]) -> list[str]:
    """Outcome strings in spatial order: cycle-k B bit at slot k, final A bit last."""
    return ["".join(str(b) for b in rec.outcomes) for rec in records]


# ---------------------------------------------------------------------------
# deferred-measurement route

def heralding_acceptance_probability(noise: NoiseParams) -> float:
    """Closed-form probability that both herald readouts report 0.

    Per qubit this is Tr[F_0 rho_thermal] = (1-p_th)(1-p_err) + p_th p_err.
    """
    def one(p_err: float) -> float:
        return (1 - noise.p_thermal) * (1 - p_err) + noise.p_thermal * p_err

    return one(noise.qubit_a.p_err_m) * one(noise.qubit_b.p_err_m)


def _readout_shrink_channel(p_err_m: float) -> KrausChannel:
    """Depolarizing channel scaling every Pauli expectation by (1 - 2 p_err_m).

    This is exactly what the symmetric-error POVM does to estimated
    expectation values, folded into the state instead of the estimator.
    """
    from .gates import X, Y, Z

    s = p_err_m / 2.0
    ops = [np.sqrt(1 - 3 * s) * np.eye(2, dtype=complex),
           np.sqrt(s) * X, np.sqrt(s) * Y, np.sqrt(s) * Z]
    return KrausChannel(ops)


def effective_state(cfg: ProtocolConfig, include_readout_error: bool = True) -> np.ndarray:
    """The n-qubit density matrix the protocol effectively prepares.

    Deferred-measurement picture: instead of measuring B at cycle k, its
    pre-rotation state is parked in register k; the reset hands B a fresh
    state, so parking commutes with everything later.  Register n-1 is A
    itself.  All slot damping, heralding conditioning, and reset errors are
    applied where the two-qubit run applies them.

    With ``include_readout_error`` each register is additionally passed
    through a depolarizing channel shrinking Pauli expectations by
    (1 - 2 p_err_m) of the qubit that physically read it out, which makes
    the Pauli expectations of the returned matrix exactly equal to the
    infinite-shot limit of the tomography estimates.
    """
    n = cfg.n
    noise = cfg.noise
    a = n - 1          # register of qubit A after reordering; working index below
    # working register order: [A, slot_0, ..., slot_{n-2}]
    if noise is not None and cfg.heralding:
        model_a, model_b = _models(noise)
        qa = measurement_branches(thermal_qubit(noise.p_thermal).copy()[None][0], 0, model_a)[0] \
            if False else None
    # heralded single-qubit conditional states
    if noise is not None and cfg.heralding:
        model_a, model_b = _models(noise)
        qa = model_a.m0 @ thermal_qubit(noise.p_thermal) @ model_a.m0.conj().T
        qb = model_b.m0 @ thermal_qubit(noise.p_thermal) @ model_b.m0.conj().T
        qa = qa / np.trace(qa)
        qb = qb / np.trace(qb)
    else:
        qa = np.diag([1.0, 0.0]).astype(complex)
        qb = np.diag([1.0, 0.0]).astype(complex)
    regs = [qa, qb] + [np.diag([1.0, 0.0]).astype(complex)] * (n - 2)
    rho = tensor(*regs)

    t_buf = noise.t_buffer if noise is not None else 0.0
    t_cnot = (noise.t_cnot if noise is not None else 0.0) + t_buf
    t_1q = (noise.qubit_a.t_pi2 if noise is not None else 0.0) + t_buf

    def damp(rho, duration, qubits):
        if noise is None or duration <= 0:
            return rho
        for q, (t1, t2s) in qubits:
            rho = apply_channel(rho, apd_channel(duration, t1, t2s), [q])
        return rho

    def slot(rho, u, targets, duration, b_reg):
        qubits = [(0, (noise.qubit_a.t1, noise.qubit_a.t2_star)),
                  (b_reg, (noise.qubit_b.t1, noise.qubit_b.t2_star))] if noise else []
        if cfg.noise_position == "before":
            rho = damp(rho, duration, qubits)
        if u is not None:
            rho = apply_unitary(rho, u, targets)
        if cfg.noise_position == "after":
            rho = damp(rho, duration, qubits)
        return rho

    rho = slot(rho, H, [0], t_1q, 1)
    for k in range(n - 1):
        b_reg = k + 1
        final = k == n - 2
        rho = slot(rho, CNOT, [0, b_reg], t_cnot, b_reg)
        rho = slot(rho, H, [0], t_1q, b_reg)
        if not final:
            if noise is not None:
                rho = apply_channel(
                    rho, apd_channel(noise.t_a_wait, noise.qubit_a.t1,
                                     noise.qubit_a.t2_star), [0])
                flip = np.zeros((2, 2), dtype=complex)
                flip[0, 1] = flip[1, 0] = 1.0
                full = embed_operator(flip, n, [b_reg + 1])
                rho = (1 - noise.p_err_ini) * rho + noise.p_err_ini * (full @ rho @ full.conj().T)
    # logical order: slot k -> register k+1 for k < n-1, logical n-1 -> A (register 0)
    perm = list(range(1, n)) + [0]
    t = rho.reshape([2] * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    rho = np.ascontiguousarray(t.reshape(2**n, 2**n))
    if include_readout_error and noise is not None:
        shrink_b = _readout_shrink_channel(noise.qubit_b.p_err_m)
        shrink_a = _readout_shrink_channel(noise.qubit_a.p_err_m)
        for q in range(n - 1):
            rho = apply_channel(rho, shrink_b, [q])
        rho = apply_channel(rho, shrink_a, [n - 1])
    return rho


# ---------------------------------------------------------------------------
# record and distribution serialization

def format_records(records: Sequence[ShotRecord]) -> str:
    """Line-oriented record dump: ``<herald bits> <outcome bits> <0|1 accepted>``."""
    lines = [f"{r.herald[0]}{r.herald[1]} "
             f"{''.join(str(b) for b in r.outcomes)} "
             f"{int(r.accepted)}" for r in records]
    return "\n".join(lines) + "\n"


def format_distribution_csv(dist: OutcomeDistribution) -> str:
    """CSV dump of an exact outcome distribution: ``string,probability``."""
    lines = ["string,probability"]
    lines += [f"{bits},{p:.12g}" for bits, p in sorted(dist.probabilities.items())]
    return "\n".join(lines) + "\n"
