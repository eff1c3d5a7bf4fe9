"""Per-state complexity markers.

Pauli strings use the symplectic convention ``P(a, b) = i^{|a & b|} X^a Z^b`` so
that ``P|x> = i^{|a & b|} (-1)^{b.x} |x ^ a>``; letters per site are I, X, Z, Y
for ``(a_j, b_j) = (0,0), (1,0), (0,1), (1,1)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .lattice import GaugeSector

logger = logging.getLogger(__name__)

EXACT_SRE_MAX_QUBITS = 16
DIRECT_SRE_MAX_QUBITS = 8
NORM_TOL = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Amplitudes over the configurations of a gauge sector."""

    sector: GaugeSector
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amps)
        if amps.shape != (len(self.sector),):
            raise ValueError(f"amplitude vector has shape {amps.shape}, sector has {len(self.sector)} states")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis_state(cls, sector: GaugeSector, config: int) -> "StateVector":
        amps = np.zeros(len(sector))
        amps[sector.index_of(config)] = 1.0
        return cls(sector, amps)

    @classmethod
    def from_dict(cls, sector: GaugeSector, amplitudes: dict) -> "StateVector":
        dtype = complex if any(isinstance(v, complex) for v in amplitudes.values()) else float
        amps = np.zeros(len(sector), dtype=dtype)
        for word, amp in amplitudes.items():
            amps[sector.index_of(word)] = amp
        return cls(sector, amps)

    @property
    def n_qubits(self) -> int:
        return self.sector.geometry.N

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        return StateVector(self.sector, self.amps / self.norm)

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm - 1.0) > tol:
            raise ValueError(f"state is not normalised (norm = {self.norm!r})")

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.nonzero(np.abs(self.amps) > tol)[0]

    def as_dict(self, tol: float = 0.0) -> dict[int, complex]:
        """Sparse amplitudes over the full ``2^N`` register."""
        return {int(self.sector.configs[i]): self.amps[i] for i in self.support(tol)}

    def to_dense(self) -> np.ndarray:
        N = self.n_qubits
        if N > 26:
            raise ValueError(f"refusing to allocate a 2^{N} register")
        out = np.zeros(1 << N, dtype=self.amps.dtype)
        out[self.sector.configs.astype(np.int64)] = self.amps
        return out

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amps, other.amps))


@dataclass(frozen=True)
class PauliString:
    xmask: int
    zmask: int

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """``label[j]`` acts on qubit ``j``."""
        xmask = zmask = 0
        for j, ch in enumerate(label.upper()):
            if ch in "XY":
                xmask |= 1 << j
            if ch in "ZY":
                zmask |= 1 << j
            if ch not in "IXYZ":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(xmask, zmask)

    def label(self, n: int) -> str:
        letters = "IXZY"
        return "".join(letters[((self.xmask >> j) & 1) | (((self.zmask >> j) & 1) << 1)] for j in range(n))

    def phase_exponent(self) -> int:
        return gf2.popcount(self.xmask & self.zmask) % 4


@dataclass(frozen=True)
class Bipartition:
    maskA: int
    n_qubits: int

    def __post_init__(self):
        k = gf2.popcount(self.maskA)
        if self.maskA >> self.n_qubits or not 0 < k < self.n_qubits:
            raise ValueError("bipartition must split the register into two nonempty parts")

    def complement(self) -> "Bipartition":
        return Bipartition(((1 << self.n_qubits) - 1) ^ self.maskA, self.n_qubits)


def half_system_cut(sector: GaugeSector) -> Bipartition:
    g = sector.geometry
    return Bipartition(g.half_cut_mask(), g.N)


def _parity(words: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(words) & 1).astype(np.int8)


# ---------------------------------------------------------------------------
# Pauli expectations


def pauli_expectation(state: StateVector, pauli: PauliString, imag_tol: float = 1e-10) -> float:
    """``<psi|P|psi>`` for a Hermitian Pauli string."""
    state.check_normalized()
    sector = state.sector
    support = state.support()
    words = sector.configs[support]
    shifted = words ^ np.uint64(pauli.xmask)
    pos = np.searchsorted(sector.configs, shifted)
    pos = np.minimum(pos, len(sector) - 1)
    present = sector.configs[pos] == shifted
    if not present.any():
        return 0.0
    amp_x = state.amps[support][present]
    amp_y = state.amps[pos[present]]
    signs = 1 - 2 * _parity(words[present] & np.uint64(pauli.zmask)).astype(float)
    total = np.sum(np.conj(amp_y) * amp_x * signs) * (1j ** pauli.phase_exponent())
    if abs(total.imag) > imag_tol:
        raise ArithmeticError(f"Pauli expectation has imaginary residue {total.imag:.3e}")
    return float(total.real)


# ---------------------------------------------------------------------------
# fast Walsh-Hadamard transform


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis (length 2^m)."""
    a = np.array(a, copy=True)
    n = a.shape[-1]
    if n & (n - 1):
        raise ValueError("transform length must be a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        v = a.reshape(*lead, n // (2 * h), 2, h)
        lo = v[..., 0, :].copy()
        v[..., 0, :] += v[..., 1, :]
        v[..., 1, :] = lo - v[..., 1, :]
        h *= 2
    return a


# ---------------------------------------------------------------------------
# stabilizer Renyi entropy


def _pauli_moment_direct(psi: np.ndarray, n_qubits: int, power: float) -> float:
    """Sum of |<P>|^power over all 4^N strings, one X-mask at a time."""
    dim = 1 << n_qubits
    x = np.arange(dim, dtype=np.uint64)
    signs = 1 - 2 * _parity(x[:, None] & x[None, :]).astype(float)  # [b, x]
    total = 0.0
    for a in range(dim):
        corr = np.conj(psi[x ^ np.uint64(a)]) * psi
        phases = 1j ** (np.bitwise_count(x & np.uint64(a)) % 4)  # indexed by b
        values = phases * (signs @ corr)
        total += float(np.sum(np.abs(values) ** power))
    return total


def _pauli_moment_support(state: StateVector, power: float, batch: int = 64) -> float:
    """Restrict to X-masks in the difference set of the support; FWHT over 2^N."""
    N = state.n_qubits
    idx = state.support()
    order = np.argsort(state.sector.configs[idx])
    words = state.sector.configs[idx][order].astype(np.int64)
    amps = state.amps[idx][order]
    diffs = np.unique((words[:, None] ^ words[None, :]).ravel())
    dim = 1 << N
    total = 0.0
    for start in range(0, len(diffs), batch):
        chunk = diffs[start : start + batch]
        partner = words[None, :] ^ chunk[:, None]  # [a, x]
        pos = np.minimum(np.searchsorted(words, partner), len(words) - 1)
        hit = words[pos] == partner
        g = np.zeros((len(chunk), dim), dtype=amps.dtype)
        rows = np.broadcast_to(np.arange(len(chunk))[:, None], hit.shape)[hit]
        cols = np.broadcast_to(words[None, :], hit.shape)[hit]
        g[rows, cols] = np.conj(amps[pos[hit]]) * np.broadcast_to(amps[None, :], hit.shape)[hit]
        total += float(np.sum(np.abs(fwht(g)) ** power))
    return total


def _pauli_moment_subspace(state: StateVector, power: float, batch: int = 256) -> float:
    """Same sum evaluated in coordinates of the F2 span of the support.

    With the support inside ``x0 + V`` (``dim V = r``), ``|f_a(b)|`` depends on
    ``b`` only through its ``r`` inner products with a basis of ``V``; every such
    class holds ``2^(N - r)`` strings.
    """
    N = state.n_qubits
    idx = state.support()
    words = [int(w) for w in state.sector.configs[idx]]
    amps = state.amps[idx]
    x0 = words[0]
    basis = gf2.echelon_basis(w ^ x0 for w in words)
    r = len(basis)
    coords = np.array([gf2.coordinates(w ^ x0, basis) for w in words], dtype=np.int64)
    size = 1 << r
    psi = np.zeros(size, dtype=amps.dtype)
    psi[coords] = amps
    diffs = np.unique((coords[:, None] ^ coords[None, :]).ravel())
    ar = np.arange(size)
    total = 0.0
    for start in range(0, len(diffs), batch):
        chunk = diffs[start : start + batch]
        g = np.conj(psi[ar[None, :] ^ chunk[:, None]]) * psi[None, :]
        total += float(np.sum(np.abs(fwht(g)) ** power))
    return total * 2.0 ** (N - r)


SRE_STRATEGIES = ("direct", "support", "subspace")


def pauli_moment(state: StateVector, power: float = 4.0, strategy: str = "subspace") -> float:
    """``sum_P |<psi|P|psi>|^power`` over the full N-qubit Pauli group."""
    state.check_normalized()
    N = state.n_qubits
    if strategy == "direct":
        if N > DIRECT_SRE_MAX_QUBITS:
            raise ValueError(f"direct Pauli sweep is limited to N <= {DIRECT_SRE_MAX_QUBITS} (N={N})")
        return _pauli_moment_direct(state.to_dense(), N, power)
    if N > EXACT_SRE_MAX_QUBITS:
        raise ValueError(
            f"exact SRE needs N <= {EXACT_SRE_MAX_QUBITS} qubits (N={N}); use multifractal_flatness instead"
        )
    if strategy == "support":
        return _pauli_moment_support(state, power)
    if strategy == "subspace":
        return _pauli_moment_subspace(state, power)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {SRE_STRATEGIES}")


def _sre_from_moment(moment: float, n_qubits: int, order: int) -> float:
    value = math.log(moment / 2.0**n_qubits) / (1 - order)
    if value < -1e-10:
        raise ArithmeticError(f"negative stabilizer entropy {value:.3e}")
    return value if value > 0 else 0.0


def _check_order(order: int) -> None:
    if order < 2 or int(order) != order:
        raise ValueError("order must be an integer >= 2")


def stabilizer_renyi_entropy(state: StateVector, order: int = 2, strategy: str = "subspace") -> float:
    """``M_n = ln(sum_P |<P>|^{2n} / 2^N) / (1 - n)``, natural log."""
    _check_order(order)
    return _sre_from_moment(pauli_moment(state, 2 * order, strategy), state.n_qubits, order)


def stabilizer_renyi_entropy_dense(psi: np.ndarray, order: int = 2) -> float:
    """Same quantity for a dense ``2^n`` vector (index bit ``j`` = qubit ``j``), by full sweep."""
    _check_order(order)
    psi = np.asarray(psi)
    n = len(psi).bit_length() - 1
    if len(psi) != 1 << n or n > DIRECT_SRE_MAX_QUBITS:
        raise ValueError(f"need a 2^n vector with n <= {DIRECT_SRE_MAX_QUBITS}")
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise ValueError("state is not normalised")
    return _sre_from_moment(_pauli_moment_direct(psi, n, 2 * order), n, order)


# ---------------------------------------------------------------------------
# participation and entanglement


def multifractal_flatness(state: StateVector) -> float:
    state.check_normalized()
    p = np.abs(state.amps) ** 2
    value = float(np.sum(p**3) - np.sum(p**2) ** 2)
    if value > -1e-12:
        return value if value > 0 else 0.0
    return value


def schmidt_values(state: StateVector, cut: Bipartition) -> np.ndarray:
    idx = state.support()
    words = state.sector.configs[idx]
    maskA = np.uint64(cut.maskA)
    left, row = np.unique(words & maskA, return_inverse=True)
    right, col = np.unique(words & ~maskA, return_inverse=True)
    mat = np.zeros((len(left), len(right)), dtype=state.amps.dtype)
    mat[row, col] = state.amps[idx]
    return np.linalg.svd(mat, compute_uv=False)


def entanglement_entropy(state: StateVector, cut: Bipartition | None = None) -> float:
    """Von Neumann entropy of the reduced state on ``cut.maskA`` (natural log)."""
    state.check_normalized()
    if cut is None:
        cut = half_system_cut(state.sector)
    if cut.n_qubits != state.n_qubits:
        raise ValueError("bipartition does not match the register size")
    p = schmidt_values(state, cut) ** 2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class ReportRow:
    index: int
    energy: float
    kinetic: float
    pot_even: float
    pot_odd: float
    flatness: float
    entanglement: float
    sre: float | None


def _quadratic_forms(matrix, vectors: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("ij,ij->j", vectors.conj(), matrix @ vectors))


def spectrum_report(spectrum, cut: Bipartition | None = None, sre_enabled: bool = True) -> list[ReportRow]:
    """Energy, operator expectations and complexity markers for every eigenvector."""
    from .lattice import Parity
    from .operators import build_kinetic, build_potential

    sector = spectrum.sector
    if len(spectrum.eigenvalues) == 0:
        return []
    if cut is None:
        cut = half_system_cut(sector)
    V = spectrum.eigenvectors
    kin = _quadratic_forms(build_kinetic(sector).matrix, V)
    even = _quadratic_forms(build_potential(sector, Parity.EVEN).matrix, V)
    odd = _quadratic_forms(build_potential(sector, Parity.ODD).matrix, V)
    use_sre = sre_enabled and sector.geometry.N <= EXACT_SRE_MAX_QUBITS
    rows = []
    for i, E in enumerate(spectrum.eigenvalues):
        state = StateVector(sector, V[:, i])
        rows.append(
            ReportRow(
                i,
                float(E),
                float(kin[i]),
                float(even[i]),
                float(odd[i]),
                multifractal_flatness(state),
                entanglement_entropy(state, cut),
                stabilizer_renyi_entropy(state) if use_sre else None,
            )
        )
    return rows
