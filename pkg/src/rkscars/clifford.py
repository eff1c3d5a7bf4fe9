"""Clifford preparation circuits for stabilizer states, with a tableau simulator.

Qubit ``j`` is bit ``j`` of a configuration word.  The tableau follows the
Aaronson-Gottesman layout: rows ``0..n-1`` are destabilizers, rows ``n..2n-1``
stabilizers, each row a Pauli ``(-1)^r X^x Z^z`` with ``Y`` on sites where both
bits are set, matching :class:`~rkscars.diagnostics.PauliString`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import gf2
from .diagnostics import PauliString, StateVector, pauli_expectation
from .stabilizer_form import CanonicalStabilizerForm

SINGLE_QUBIT = ("x", "h", "z", "s", "sdg")
TWO_QUBIT = ("cx", "cz")
VERIFY_TOL = 1e-9


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        arity = 1 if self.name in SINGLE_QUBIT else 2 if self.name in TWO_QUBIT else None
        if arity is None:
            raise ValueError(f"unsupported gate {self.name!r}")
        if len(self.qubits) != arity:
            raise ValueError(f"{self.name} takes {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.name} endpoints must differ")

    def to_json(self) -> dict:
        if self.name == "cx":
            return {"g": "cx", "c": self.qubits[0], "t": self.qubits[1]}
        if self.name == "cz":
            return {"g": "cz", "a": self.qubits[0], "b": self.qubits[1]}
        return {"g": self.name, "q": self.qubits[0]}

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        if d["g"] == "cx":
            return cls("cx", (d["c"], d["t"]))
        if d["g"] == "cz":
            return cls("cz", (d["a"], d["b"]))
        return cls(d["g"], (d["q"],))


@dataclass
class CliffordCircuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        if any(not 0 <= q < self.n_qubits for q in gate.qubits):
            raise ValueError(f"gate {gate} acts outside {self.n_qubits} qubits")

    def append(self, name: str, *qubits: int) -> "CliffordCircuit":
        gate = Gate(name, tuple(int(q) for q in qubits))
        self._check(gate)
        self.gates.append(gate)
        return self

    def x(self, q):
        return self.append("x", q)

    def h(self, q):
        return self.append("h", q)

    def z(self, q):
        return self.append("z", q)

    def s(self, q):
        return self.append("s", q)

    def sdg(self, q):
        return self.append("sdg", q)

    def cx(self, c, t):
        return self.append("cx", c, t)

    def cz(self, a, b):
        return self.append("cz", a, b)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.name] = out.get(g.name, 0) + 1
        return out

    def support(self) -> int:
        mask = 0
        for g in self.gates:
            for q in g.qubits:
                mask |= 1 << q
        return mask

    def to_json(self) -> dict:
        return {"n": self.n_qubits, "gates": [g.to_json() for g in self.gates]}

    @classmethod
    def from_json(cls, data: dict | str) -> "CliffordCircuit":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["n"], [Gate.from_json(g) for g in data["gates"]])


def compose_parallel(circuits: Iterable[CliffordCircuit]) -> CliffordCircuit:
    """Concatenate circuits acting on pairwise disjoint qubit sets."""
    circuits = list(circuits)
    if not circuits:
        raise ValueError("nothing to compose")
    n = circuits[0].n_qubits
    used = 0
    out = CliffordCircuit(n)
    for c in circuits:
        if c.n_qubits != n:
            raise ValueError("register sizes differ")
        if c.support() & used:
            raise ValueError("circuits overlap; parallel composition needs disjoint supports")
        used |= c.support()
        out.gates.extend(c.gates)
    return out


# ---------------------------------------------------------------------------
# synthesis


def synthesize_two_branch(b0: int, b1: int, n: int) -> CliffordCircuit:
    """Circuit preparing ``(|b0> - |b1>)/sqrt(2)`` up to global phase from ``|0...0>``.

    The pivot is the lowest differing qubit where ``b0`` is 0, so the final ``Z``
    puts the minus sign on the ``b1`` branch.  If ``b0`` is 1 on every differing
    qubit the roles swap, which only flips the global sign.
    """
    if b0 == b1:
        raise ValueError("branches must differ")
    if (b0 | b1) >> n:
        raise ValueError("branch word exceeds the register")
    diff = b0 ^ b1
    if not diff & ~b0:
        b0, b1 = b1, b0
    pivot = gf2.pivot((diff & ~b0) & -(diff & ~b0))
    circ = CliffordCircuit(n)
    for j in range(n):
        if (b0 >> j) & 1:
            circ.x(j)
    circ.h(pivot)
    for j in range(n):
        if j != pivot and (diff >> j) & 1:
            circ.cx(pivot, j)
    circ.z(pivot)
    return circ


def synthesize_from_canonical_form(form: CanonicalStabilizerForm) -> CliffordCircuit:
    """H on pivots, S and CZ phases, CNOT fan-out of generators, X layer for the offset."""
    n = form.n_qubits
    pivots = form.pivots
    if len(set(pivots)) != len(pivots):
        raise ValueError("generators do not have distinct pivots")
    circ = CliffordCircuit(n)
    for p in pivots:
        circ.h(p)
    for p, m in zip(pivots, form.linear):
        for _ in range(m % 4):
            circ.s(p)
    for i, j in zip(*np.nonzero(form.quadratic)):
        circ.cz(pivots[i], pivots[j])
    pivot_mask = sum(1 << p for p in pivots)
    for p, g in zip(pivots, form.generators):
        rest = g & ~pivot_mask
        for j in range(n):
            if (rest >> j) & 1:
                circ.cx(p, j)
    for j in range(n):
        if (form.offset >> j) & 1:
            circ.x(j)
    return circ


# ---------------------------------------------------------------------------
# tableau simulation


@dataclass
class StabilizerTableau:
    n: int
    x: np.ndarray = field(repr=False)  # bool [2n, n]
    z: np.ndarray = field(repr=False)  # bool [2n, n]
    r: np.ndarray = field(repr=False)  # bool [2n]

    @classmethod
    def zero_state(cls, n: int) -> "StabilizerTableau":
        eye = np.eye(n, dtype=bool)
        zeros = np.zeros((n, n), dtype=bool)
        return cls(n, np.vstack([eye, zeros]), np.vstack([zeros, eye]), np.zeros(2 * n, dtype=bool))

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.n, self.x.copy(), self.z.copy(), self.r.copy())

    # gate updates on all 2n rows at once
    def h(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def sdg(self, a: int) -> None:
        for _ in range(3):
            self.s(a)

    def xgate(self, a: int) -> None:
        self.r ^= self.z[:, a]

    def zgate(self, a: int) -> None:
        self.r ^= self.x[:, a]

    def cx(self, a: int, b: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, b] & ~(self.x[:, b] ^ self.z[:, a])
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def apply(self, gate: Gate) -> None:
        ops = {"x": self.xgate, "z": self.zgate, "h": self.h, "s": self.s, "sdg": self.sdg, "cx": self.cx, "cz": self.cz}
        ops[gate.name](*gate.qubits)

    def _row(self, i: int) -> tuple[int, PauliString]:
        bits = 1 << np.arange(self.n, dtype=object)
        xmask = int(np.sum(bits[self.x[i]])) if self.x[i].any() else 0
        zmask = int(np.sum(bits[self.z[i]])) if self.z[i].any() else 0
        return (-1 if self.r[i] else 1), PauliString(xmask, zmask)

    def stabilizers(self) -> list[tuple[int, PauliString]]:
        """``(sign, Pauli)`` for each stabilizer generator."""
        return [self._row(i) for i in range(self.n, 2 * self.n)]

    def destabilizers(self) -> list[tuple[int, PauliString]]:
        return [self._row(i) for i in range(self.n)]

    def stabilizer_labels(self) -> list[str]:
        return [("-" if s < 0 else "+") + p.label(self.n) for s, p in self.stabilizers()]

    def check(self) -> None:
        """Raise unless the stabilizer rows commute and are independent."""
        xs, zs = self.x[self.n :].astype(np.int64), self.z[self.n :].astype(np.int64)
        sym = (xs @ zs.T + zs @ xs.T) % 2
        if sym.any():
            raise AssertionError("stabilizer generators do not commute")
        rows = [int("".join("1" if b else "0" for b in np.concatenate([x, z])), 2) for x, z in zip(xs, zs)]
        if gf2.rank(rows) != self.n:
            raise AssertionError("stabilizer generators are dependent")


def simulate(circuit: CliffordCircuit) -> StabilizerTableau:
    tab = StabilizerTableau.zero_state(circuit.n_qubits)
    for gate in circuit.gates:
        tab.apply(gate)
    return tab


# ---------------------------------------------------------------------------
# statevector reference


def simulate_statevector(circuit: CliffordCircuit) -> np.ndarray:
    """Brute-force ``2^n`` simulation; index bit ``j`` is qubit ``j``."""
    n = circuit.n_qubits
    if n > 20:
        raise ValueError("statevector reference is limited to 20 qubits")
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    idx = np.arange(1 << n)
    for gate in circuit.gates:
        q = gate.qubits
        bit = (idx >> q[0]) & 1
        if gate.name == "x":
            psi = psi[idx ^ (1 << q[0])]
        elif gate.name == "z":
            psi = psi * (1 - 2 * bit)
        elif gate.name == "s":
            psi = psi * np.where(bit, 1j, 1)
        elif gate.name == "sdg":
            psi = psi * np.where(bit, -1j, 1)
        elif gate.name == "h":
            partner = psi[idx ^ (1 << q[0])]
            psi = (np.where(bit, -psi, psi) + partner) / np.sqrt(2)
        elif gate.name == "cx":
            psi = psi[np.where(bit, idx ^ (1 << q[1]), idx)]
        elif gate.name == "cz":
            psi = psi * (1 - 2 * (bit & ((idx >> q[1]) & 1)))
    return psi


def dense_pauli_expectation(psi: np.ndarray, pauli: PauliString) -> float:
    idx = np.arange(len(psi))
    signs = 1 - 2 * (np.bitwise_count(idx & pauli.zmask) & 1).astype(np.int64)
    value = np.vdot(psi[idx ^ pauli.xmask], signs * psi) * 1j ** pauli.phase_exponent()
    if abs(value.imag) > 1e-10:
        raise ArithmeticError(f"Pauli expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Verification:
    passed: bool
    expectations: tuple[float, ...]
    generators: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.passed


def verify_preparation(tableau: StabilizerTableau, target, tol: float = VERIFY_TOL) -> Verification:
    """Signed expectation of every stabilizer generator on ``target``; pass iff all are +1."""
    if isinstance(target, StateVector):
        if target.n_qubits != tableau.n:
            raise ValueError("tableau and target have different register sizes")
        target.check_normalized(1e-10)
        expect = lambda p: pauli_expectation(target, p)  # noqa: E731
    else:
        psi = np.asarray(target)
        if psi.shape != (1 << tableau.n,):
            raise ValueError("dense target does not match the tableau register")
        if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            raise ValueError("target is not normalised")
        expect = lambda p: dense_pauli_expectation(psi, p)  # noqa: E731
    values = tuple(float(s * expect(p)) for s, p in tableau.stabilizers())
    passed = all(abs(v - 1.0) <= tol for v in values)
    return Verification(passed, values, tuple(tableau.stabilizer_labels()))


def export_qasm(circuit: CliffordCircuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    for g in circuit.gates:
        lines.append(f"{g.name} " + ",".join(f"q[{q}]" for q in g.qubits) + ";")
    return "\n".join(lines) + "\n"


def parse_qasm(text: str) -> CliffordCircuit:
    """Inverse of :func:`export_qasm` for the same restricted grammar."""
    n = None
    gates = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("OPENQASM", "include")):
            continue
        if line.startswith("qreg"):
            n = int(line[line.index("[") + 1 : line.index("]")])
            continue
        name, args = line.rstrip(";").split(None, 1)
        qubits = tuple(int(a.strip()[2:-1]) for a in args.split(","))
        gates.append(Gate(name, qubits))
    if n is None:
        raise ValueError("missing qreg declaration")
    return CliffordCircuit(n, gates)
