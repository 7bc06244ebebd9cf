"""Rewriting standard-gate circuits for trapped-ion execution.

Two lowering routes are provided: CNOT decomposition of Rxx gates
(doubles the two-qubit gate count) and native-gate conversion to
{GPI, GPI2, VirtualZ, MS} (keeps one entangling gate per Rxx).
Both are exact up to global phase.
"""

from __future__ import annotations

import re

import numpy as np

from .circuits import (
    Circuit,
    GateKind,
    GateOp,
    NATIVE_KINDS,
    NativeCircuit,
)


class UnsupportedGateError(ValueError):
    """A gate kind the requested lowering cannot handle."""


def decompose_rxx_cnot(gate: GateOp) -> list[GateOp]:
    """Rxx(theta) on (a, b) -> [CNOT(a,b), Rx(theta) on a, CNOT(a,b)].

    Conjugating X on the CNOT's control propagates it to X (x) X, so the
    Rx must sit on the control qubit for the identity to hold exactly.
    """
    if gate.kind is not GateKind.RXX:
        raise ValueError(f"expected an Rxx gate, got {gate.kind.value}")
    a, b = gate.targets
    cnot = GateOp(GateKind.CNOT, (a, b))
    rx = GateOp(GateKind.RX, (a,), param_slots=gate.param_slots, params=gate.params)
    return [cnot, rx, cnot]


def decompose_circuit_cnot(circuit: Circuit) -> Circuit:
    """Rewrite every Rxx through decompose_rxx_cnot; other gates pass through."""
    ops: list[GateOp] = []
    for op in circuit.ops:
        if op.kind is GateKind.RXX:
            ops.extend(decompose_rxx_cnot(op))
        else:
            ops.append(op)
    return Circuit(circuit.n_qubits, tuple(ops), circuit.n_params)


def to_native(circuit: Circuit, theta: np.ndarray) -> NativeCircuit:
    """Bind theta and lower {Rx, Rz, Rxx} onto the native gate set.

    Rx(t)  -> GPI2(-pi/2), VirtualZ(t), GPI2(pi/2)   (a Z rotation in the
              Ry(pi/2) frame; GPI2(+-pi/2) equals Ry(+-pi/2) exactly)
    Rz(t)  -> VirtualZ(t)
    Rxx(t) -> MS(0, 0, t)                             (one entangler each)
    """
    theta = np.asarray(theta, dtype=float)
    if len(theta) != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {len(theta)}")
    ops: list[GateOp] = []
    provenance: list[int] = []
    for i, op in enumerate(circuit.ops):
        angle = op.angles(theta)
        q = op.targets
        if op.kind is GateKind.RX:
            emitted = [
                GateOp(GateKind.GPI2, q, params=(-np.pi / 2,)),
                GateOp(GateKind.VIRTUAL_Z, q, params=(angle[0],)),
                GateOp(GateKind.GPI2, q, params=(np.pi / 2,)),
            ]
        elif op.kind is GateKind.RZ:
            emitted = [GateOp(GateKind.VIRTUAL_Z, q, params=(angle[0],))]
        elif op.kind is GateKind.RXX:
            emitted = [GateOp(GateKind.MS, q, params=(0.0, 0.0, angle[0]))]
        else:
            raise UnsupportedGateError(
                f"cannot lower gate kind {op.kind.value} to native gates"
            )
        ops.extend(emitted)
        provenance.extend([i] * len(emitted))
    return NativeCircuit(circuit.n_qubits, tuple(ops), tuple(provenance))


def two_qubit_count(circuit: Circuit | NativeCircuit) -> int:
    return sum(1 for op in circuit.ops if op.n_targets == 2)


def single_qubit_count(circuit: Circuit | NativeCircuit) -> int:
    return sum(1 for op in circuit.ops if op.n_targets == 1)


def gate_counts(circuit: Circuit | NativeCircuit) -> dict[str, int]:
    counts: dict[str, int] = {}
    for op in circuit.ops:
        counts[op.kind.value] = counts.get(op.kind.value, 0) + 1
    return counts


def estimate_runtime(
    circuit: Circuit | NativeCircuit, t1q: float = 135.0, t2q: float = 600.0
) -> float:
    """Serial execution time in microseconds (defaults: measured trapped-ion
    gate speeds, 135 us single-qubit and 600 us two-qubit)."""
    n2 = two_qubit_count(circuit)
    n1 = len(circuit.ops) - n2
    return n1 * t1q + n2 * t2q


# --- text serialization ----------------------------------------------------
#
# Header `qubits=<n> params=<k>`, then one gate per line:
#   KIND q0[,q1] slot0[,slot1]
# Bound angles (native circuits) are written as `=<repr>` fields instead of
# slot indices, and a trailing `@<i>` records provenance.  repr round-trips
# floats bit-exactly.

_HEADER_RE = re.compile(r"^qubits=(\d+) params=(\d+)$")
_KINDS = {k.value: k for k in GateKind}


def serialize_circuit(circuit: Circuit | NativeCircuit) -> str:
    lines = [f"qubits={circuit.n_qubits} params={circuit.n_params}"]
    provenance = getattr(circuit, "provenance", ())
    for i, op in enumerate(circuit.ops):
        fields = [op.kind.value, ",".join(str(q) for q in op.targets)]
        if op.param_slots:
            fields.append(",".join(str(s) for s in op.param_slots))
        elif op.params:
            fields.append(",".join("=" + repr(v) for v in op.params))
        if provenance:
            fields.append(f"@{provenance[i]}")
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit | NativeCircuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty circuit text")
    header = _HEADER_RE.match(lines[0])
    if header is None:
        raise ValueError(f"bad circuit header: {lines[0]!r}")
    n_qubits, n_params = int(header.group(1)), int(header.group(2))

    ops: list[GateOp] = []
    provenance: list[int] = []
    for ln in lines[1:]:
        fields = ln.split(" ")
        if fields and fields[-1].startswith("@"):
            provenance.append(int(fields.pop()[1:]))
        if len(fields) not in (2, 3):
            raise ValueError(f"bad gate line: {ln!r}")
        kind = _KINDS.get(fields[0])
        if kind is None:
            raise ValueError(f"unknown gate kind {fields[0]!r}")
        targets = tuple(int(q) for q in fields[1].split(","))
        slots: tuple[int, ...] = ()
        params: tuple[float, ...] = ()
        if len(fields) == 3:
            parts = fields[2].split(",")
            if parts[0].startswith("="):
                params = tuple(float(p[1:]) for p in parts)
            else:
                slots = tuple(int(p) for p in parts)
        ops.append(GateOp(kind, targets, param_slots=slots, params=params))

    if provenance and len(provenance) != len(ops):
        raise ValueError("provenance tags must cover every gate or none")
    all_native_bound = all(
        op.kind in NATIVE_KINDS and not op.param_slots for op in ops
    )
    if n_params == 0 and ops and all_native_bound:
        return NativeCircuit(n_qubits, tuple(ops), tuple(provenance))
    return Circuit(n_qubits, tuple(ops), n_params)


def save_circuit(circuit: Circuit | NativeCircuit, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_circuit(circuit))


def load_circuit(path: str) -> Circuit | NativeCircuit:
    with open(path) as fh:
        return parse_circuit(fh.read())
