"""Shared test oracles: dense matrix embeddings built by explicit bit
arithmetic, independent of the simulator's tensor-contraction path."""

from __future__ import annotations

import numpy as np

from qwgan.circuits import Circuit, GateKind, GateOp, NativeCircuit, gate_matrix


def dense_gate(mat: np.ndarray, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Embed a 2x2 or 4x4 gate matrix into the full 2^n space by looping
    over basis columns (qubit 0 = least-significant bit)."""
    dim = 2**n_qubits
    full = np.zeros((dim, dim), dtype=complex)
    if len(targets) == 1:
        q = targets[0]
        for col in range(dim):
            b = (col >> q) & 1
            base = col & ~(1 << q)
            for b_out in range(2):
                full[base | (b_out << q), col] += mat[b_out, b]
        return full
    t0, t1 = targets
    for col in range(dim):
        b0 = (col >> t0) & 1
        b1 = (col >> t1) & 1
        base = col & ~(1 << t0) & ~(1 << t1)
        local_in = 2 * b0 + b1
        for b0_out in range(2):
            for b1_out in range(2):
                row = base | (b0_out << t0) | (b1_out << t1)
                full[row, col] += mat[2 * b0_out + b1_out, local_in]
    return full


def dense_unitary(circuit, theta=None) -> np.ndarray:
    """Full-circuit unitary as an explicit dense matrix chain."""
    dim = 2**circuit.n_qubits
    u = np.eye(dim, dtype=complex)
    for op in circuit.ops:
        u = dense_gate(gate_matrix(op, theta), op.targets, circuit.n_qubits) @ u
    return u


def unitaries_equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-8) -> bool:
    k = np.unravel_index(np.argmax(np.abs(a)), a.shape)
    if abs(a[k]) < 1e-12 or abs(b[k]) < 1e-12:
        return np.max(np.abs(a - b)) < atol
    phase = (b[k] / abs(b[k])) / (a[k] / abs(a[k]))
    return np.max(np.abs(a * phase - b)) < atol


_PARAM_KINDS = (GateKind.RX, GateKind.RZ, GateKind.RXX)


def random_circuit(rng: np.random.Generator, n_qubits: int, n_ops: int,
                   include_cnot: bool = True):
    """Random circuit over {Rx, Rz, Rxx, CNOT} with every parametric gate
    owning one fresh slot; returns (circuit, theta)."""
    ops = []
    slot = 0
    kinds = list(_PARAM_KINDS) + ([GateKind.CNOT] if include_cnot else [])
    for _ in range(n_ops):
        kind = kinds[rng.integers(len(kinds))]
        if kind in (GateKind.RXX, GateKind.CNOT):
            if n_qubits < 2:
                kind = GateKind.RX
        if kind in (GateKind.RXX, GateKind.CNOT) and n_qubits >= 2:
            q = rng.choice(n_qubits, size=2, replace=False)
            targets = (int(q[0]), int(q[1]))
        else:
            targets = (int(rng.integers(n_qubits)),)
        if kind is GateKind.CNOT:
            ops.append(GateOp(kind, targets))
        else:
            ops.append(GateOp(kind, targets, param_slots=(slot,)))
            slot += 1
    theta = rng.uniform(-np.pi, np.pi, size=slot)
    return Circuit(n_qubits, tuple(ops), slot), theta
