"""Parameterized gate circuits and the Born-machine ansatz.

Conventions used throughout the package:

* Qubit 0 is the least-significant bit of a basis-state index, so the
  bitstring read off a sampled index is a direct latent-vector read.
* Rotations follow R_g(theta) = exp(-i * theta * G / 2) for generators
  G in {X, Z, X (x) X}.
* For two-qubit gates the local 4x4 matrix is written with targets[0]
  as the first tensor factor (most-significant local bit); CNOT has
  control = targets[0], target = targets[1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class GateKind(str, Enum):
    RX = "Rx"
    RZ = "Rz"
    RXX = "Rxx"
    CNOT = "CNOT"
    GPI = "GPI"
    GPI2 = "GPI2"
    VIRTUAL_Z = "VirtualZ"
    MS = "MS"


NATIVE_KINDS = frozenset({GateKind.GPI, GateKind.GPI2, GateKind.VIRTUAL_Z, GateKind.MS})

# Angle arity per kind.  MS accepts (phi0, phi1) with an implied fully
# entangling pi/2 rotation, or (phi0, phi1, angle) for a partial rotation.
_ARITY = {
    GateKind.RX: (1, 1),
    GateKind.RZ: (1, 1),
    GateKind.RXX: (1, 1),
    GateKind.CNOT: (0, 0),
    GateKind.GPI: (1, 1),
    GateKind.GPI2: (1, 1),
    GateKind.VIRTUAL_Z: (1, 1),
    GateKind.MS: (2, 3),
}

_N_TARGETS = {
    GateKind.RX: 1,
    GateKind.RZ: 1,
    GateKind.RXX: 2,
    GateKind.CNOT: 2,
    GateKind.GPI: 1,
    GateKind.GPI2: 1,
    GateKind.VIRTUAL_Z: 1,
    GateKind.MS: 2,
}


class Connectivity(str, Enum):
    FULL = "full"
    REDUCED = "reduced"


@dataclass(frozen=True)
class GateOp:
    """One gate application: angles come from shared parameter slots or
    from bound constants, never both."""

    kind: GateKind
    targets: tuple[int, ...]
    param_slots: tuple[int, ...] = ()
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.targets) != _N_TARGETS[self.kind]:
            raise ValueError(
                f"{self.kind.value} takes {_N_TARGETS[self.kind]} target(s), "
                f"got {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate target qubits in {self.targets}")
        if self.param_slots and self.params:
            raise ValueError("gate cannot mix parameter slots and bound constants")
        lo, hi = _ARITY[self.kind]
        n = len(self.param_slots) if self.param_slots else len(self.params)
        if not (lo <= n <= hi):
            raise ValueError(f"{self.kind.value} takes {lo}..{hi} angles, got {n}")

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def angles(self, theta: np.ndarray) -> tuple[float, ...]:
        """Resolve this gate's angle arguments against a parameter vector."""
        if self.param_slots:
            return tuple(float(theta[s]) for s in self.param_slots)
        return self.params


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a shared parameter vector of size n_params."""

    n_qubits: int
    ops: tuple[GateOp, ...]
    n_params: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        referenced = set()
        for op in self.ops:
            for q in op.targets:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"target {q} out of range for {self.n_qubits} qubits")
            for s in op.param_slots:
                if not 0 <= s < self.n_params:
                    raise ValueError(f"parameter slot {s} out of range (n_params={self.n_params})")
                referenced.add(s)
        if referenced != set(range(self.n_params)):
            missing = sorted(set(range(self.n_params)) - referenced)
            raise ValueError(f"unreferenced parameter slots: {missing}")


@dataclass(frozen=True)
class NativeCircuit:
    """Fully bound circuit restricted to the trapped-ion native gate set.

    ``provenance[i]`` is the index of the source-circuit op that native
    op ``i`` was lowered from.
    """

    n_qubits: int
    ops: tuple[GateOp, ...]
    provenance: tuple[int, ...] = field(default=())

    n_params = 0  # bound circuits carry no free parameters

    def __post_init__(self):
        for op in self.ops:
            if op.kind not in NATIVE_KINDS:
                raise ValueError(f"non-native gate {op.kind.value} in NativeCircuit")
            if op.param_slots:
                raise ValueError("NativeCircuit gates must be fully bound")
        if self.provenance and len(self.provenance) != len(self.ops):
            raise ValueError("provenance length must match op count")


# --- gate matrices ---------------------------------------------------------

def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex)


def rxx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), -1j * np.sin(theta / 2)
    return np.array(
        [[c, 0, 0, s], [0, c, s, 0], [0, s, c, 0], [s, 0, 0, c]], dtype=complex
    )


CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def gpi_matrix(phi: float) -> np.ndarray:
    return np.array(
        [[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]], dtype=complex
    )


def gpi2_matrix(phi: float) -> np.ndarray:
    return np.array(
        [[1, -1j * np.exp(-1j * phi)], [-1j * np.exp(1j * phi), 1]], dtype=complex
    ) / np.sqrt(2)


def virtual_z_matrix(theta: float) -> np.ndarray:
    # Identical to Rz; the published 1/sqrt(2) prefactor would break unitarity.
    return rz_matrix(theta)


def ms_matrix(phi0: float, phi1: float, angle: float = np.pi / 2) -> np.ndarray:
    """Moelmer-Soerensen gate: exp(-i*angle/2 * X_phi0 (x) X_phi1), fully
    entangling at the default angle pi/2."""
    c = np.cos(angle / 2)
    s = -1j * np.sin(angle / 2)
    a, b = phi0 + phi1, phi0 - phi1
    return np.array(
        [
            [c, 0, 0, s * np.exp(-1j * a)],
            [0, c, s * np.exp(-1j * b), 0],
            [0, s * np.exp(1j * b), c, 0],
            [s * np.exp(1j * a), 0, 0, c],
        ],
        dtype=complex,
    )


def gate_matrix(op: GateOp, theta: np.ndarray | None = None) -> np.ndarray:
    """Resolve the (2x2 or 4x4) unitary for one gate op."""
    args = op.angles(np.asarray(theta) if theta is not None else np.empty(0))
    kind = op.kind
    if kind is GateKind.RX:
        return rx_matrix(args[0])
    if kind is GateKind.RZ:
        return rz_matrix(args[0])
    if kind is GateKind.RXX:
        return rxx_matrix(args[0])
    if kind is GateKind.CNOT:
        return CNOT_MATRIX
    if kind is GateKind.GPI:
        return gpi_matrix(args[0])
    if kind is GateKind.GPI2:
        return gpi2_matrix(args[0])
    if kind is GateKind.VIRTUAL_Z:
        return virtual_z_matrix(args[0])
    if kind is GateKind.MS:
        return ms_matrix(*args) if len(args) == 3 else ms_matrix(args[0], args[1])
    raise ValueError(f"unknown gate kind {kind!r}")


# --- ansatz ----------------------------------------------------------------

def entangler_pairs(n_qubits: int, connectivity: Connectivity) -> list[tuple[int, int]]:
    """Qubit pairs receiving an Rxx in one region-2 block."""
    if connectivity is Connectivity.FULL:
        return [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]
    # reduced: next three nearest neighbours
    return [(i, i + d) for d in (1, 2, 3) for i in range(n_qubits - d)]


def build_qcbm_ansatz(
    n_qubits: int, layers: int = 1, connectivity: Connectivity | str = Connectivity.FULL
) -> Circuit:
    """Born-machine ansatz: single-qubit Rx+Rz walls around Rxx entangling
    blocks; each extra layer appends another entangling block and wall.
    Every gate owns a distinct parameter slot."""
    if n_qubits < 2:
        raise ValueError("ansatz needs n_qubits >= 2")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    connectivity = Connectivity(connectivity)

    ops: list[GateOp] = []
    slot = 0

    def rot_wall():
        nonlocal slot
        for q in range(n_qubits):
            ops.append(GateOp(GateKind.RX, (q,), param_slots=(slot,)))
            ops.append(GateOp(GateKind.RZ, (q,), param_slots=(slot + 1,)))
            slot += 2

    pairs = entangler_pairs(n_qubits, connectivity)

    rot_wall()  # region 1
    for _ in range(layers):
        for (i, j) in pairs:  # region 2
            ops.append(GateOp(GateKind.RXX, (i, j), param_slots=(slot,)))
            slot += 1
        rot_wall()  # region 3

    return Circuit(n_qubits=n_qubits, ops=tuple(ops), n_params=slot)


def init_params(n_params: int, seed: int) -> np.ndarray:
    """Near-identity start: uniform on [-0.01, 0.01]."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.01, 0.01, size=n_params)
