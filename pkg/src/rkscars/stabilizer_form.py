"""Canonical affine-subspace form of stabilizer states.

A stabilizer state on ``n`` qubits is written as

    |psi> = 2^{-k/2} sum_{t in F2^k} i^{m.t} (-1)^{sum_{i<j} B_ij t_i t_j} |x0 + sum_i t_i g_i>

with the generators ``g_i`` in reduced echelon form (pivot = highest set bit,
each pivot present in exactly one generator and cleared in ``x0``), so ``x0``
is the numerically smallest support word.  ``m`` lives in Z4 and ``B`` is a
strictly upper triangular F2 matrix.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .diagnostics import StateVector

MAG_RTOL = 1e-8
PHASE_ATOL = 1e-6


class NotStabilizerReason(enum.Enum):
    NON_UNIFORM_MAGNITUDES = "NonUniformMagnitudes"
    SUPPORT_NOT_POWER_OF_TWO = "SupportNotPowerOfTwo"
    SUPPORT_NOT_AFFINE = "SupportNotAffine"
    PHASE_NOT_FOURTH_ROOT = "PhaseNotFourthRoot"
    PHASE_NOT_QUADRATIC = "PhaseNotQuadratic"


@dataclass(frozen=True)
class NotStabilizer:
    reason: NotStabilizerReason
    detail: str = ""

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CanonicalStabilizerForm:
    n_qubits: int
    offset: int
    generators: tuple[int, ...]
    linear: tuple[int, ...]
    quadratic: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = len(self.generators)
        B = np.asarray(self.quadratic, dtype=np.int8).reshape(k, k)
        object.__setattr__(self, "quadratic", B)
        if len(self.linear) != k:
            raise ValueError("linear part must have one Z4 entry per generator")
        if np.any(np.tril(B)) or not np.all((B == 0) | (B == 1)):
            raise ValueError("quadratic part must be strictly upper triangular over F2")
        limit = 1 << self.n_qubits
        for g in self.generators:
            if not 0 < g < limit:
                raise ValueError(f"generator {g:#x} outside the {self.n_qubits}-qubit register")
        if not 0 <= self.offset < limit:
            raise ValueError("offset outside the register")
        if list(self.generators) != gf2.echelon_basis(self.generators):
            raise ValueError("generators are not in reduced echelon form")
        if any((self.offset >> gf2.pivot(g)) & 1 for g in self.generators):
            raise ValueError("offset has a pivot bit set")

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def pivots(self) -> list[int]:
        return [gf2.pivot(g) for g in self.generators]

    def uses_imaginary_phases(self) -> bool:
        return any(m % 2 for m in self.linear)

    def phase_exponent(self, t: int) -> int:
        """Z4 exponent of the amplitude at coordinate ``t``."""
        e = sum(self.linear[i] for i in range(self.k) if (t >> i) & 1)
        for i, j in zip(*np.nonzero(self.quadratic)):
            if (t >> i) & 1 and (t >> j) & 1:
                e += 2
        return e % 4

    def points(self) -> list[tuple[int, int]]:
        """``(word, phase exponent)`` for every point of the support."""
        return [
            (gf2.span_element(t, list(self.generators), self.offset), self.phase_exponent(t))
            for t in range(1 << self.k)
        ]

    def amplitudes(self) -> dict[int, complex]:
        scale = 2.0 ** (-self.k / 2)
        return {word: scale * (1j**e) for word, e in self.points()}

    def to_json(self) -> dict:
        n = self.n_qubits
        bits = lambda w: format(w, f"0{n}b")  # noqa: E731
        return {
            "n": n,
            "x0": bits(self.offset),
            "generators": [bits(g) for g in self.generators],
            "m": [int(m) for m in self.linear],
            "B_pairs": [[int(i), int(j)] for i, j in zip(*np.nonzero(self.quadratic))],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "CanonicalStabilizerForm":
        if isinstance(data, str):
            data = json.loads(data)
        k = len(data["generators"])
        B = np.zeros((k, k), dtype=np.int8)
        for i, j in data["B_pairs"]:
            B[i, j] = 1
        return cls(
            n_qubits=data["n"],
            offset=int(data["x0"], 2),
            generators=tuple(int(g, 2) for g in data["generators"]),
            linear=tuple(int(m) % 4 for m in data["m"]),
            quadratic=B,
        )


def _z4_exponent(phase: complex, tol: float) -> int | None:
    angle = np.angle(phase)
    e = int(np.rint(angle / (np.pi / 2))) % 4
    diff = abs((angle - e * np.pi / 2 + np.pi) % (2 * np.pi) - np.pi)
    return e if diff <= tol else None


def extract_canonical_form_from_amplitudes(
    amplitudes: dict[int, complex], n_qubits: int, tol: float = MAG_RTOL, phase_tol: float = PHASE_ATOL
) -> CanonicalStabilizerForm | NotStabilizer:
    """Decide whether a sparse normalised vector is a stabilizer state."""
    if not amplitudes:
        raise ValueError("empty state")
    mags = {w: abs(a) for w, a in amplitudes.items()}
    top = max(mags.values())
    # tol is an absolute cut for the support and a relative one for uniformity
    support = sorted(w for w, m in mags.items() if m > tol)
    size = len(support)
    target = 1.0 / np.sqrt(size)
    for w in support:
        if abs(mags[w] - target) > tol * max(target, top):
            return NotStabilizer(
                NotStabilizerReason.NON_UNIFORM_MAGNITUDES, f"|amp|={mags[w]:.3e} vs {target:.3e}"
            )
    if size & (size - 1):
        return NotStabilizer(NotStabilizerReason.SUPPORT_NOT_POWER_OF_TWO, f"|support|={size}")

    x0 = support[0]
    generators = gf2.echelon_basis(w ^ x0 for w in support)
    k = len(generators)
    if 1 << k != size:
        return NotStabilizer(NotStabilizerReason.SUPPORT_NOT_AFFINE, f"span has rank {k}, support {size}")
    coords = {}
    for w in support:
        t = gf2.coordinates(w ^ x0, generators)
        if t is None or t in coords:
            return NotStabilizer(NotStabilizerReason.SUPPORT_NOT_AFFINE, f"word {w:#x}")
        coords[t] = w

    ref = amplitudes[x0] / abs(amplitudes[x0])
    exps = {}
    for t, w in coords.items():
        e = _z4_exponent(amplitudes[w] / ref, phase_tol)
        if e is None:
            return NotStabilizer(NotStabilizerReason.PHASE_NOT_FOURTH_ROOT, f"word {w:#x}")
        exps[t] = e

    linear = tuple(exps[1 << i] for i in range(k))
    B = np.zeros((k, k), dtype=np.int8)
    for i, j in itertools.combinations(range(k), 2):
        q = (exps[(1 << i) | (1 << j)] - linear[i] - linear[j]) % 4
        if q % 2:
            return NotStabilizer(NotStabilizerReason.PHASE_NOT_QUADRATIC, f"pair ({i},{j}) has odd cross term")
        B[i, j] = q // 2
    form = CanonicalStabilizerForm(n_qubits, x0, tuple(generators), linear, B)
    for t, e in exps.items():
        if form.phase_exponent(t) != e:
            return NotStabilizer(NotStabilizerReason.PHASE_NOT_QUADRATIC, f"cubic phase at t={t:b}")
    return form


def extract_canonical_form(
    state: StateVector, tol: float = MAG_RTOL, phase_tol: float = PHASE_ATOL
) -> CanonicalStabilizerForm | NotStabilizer:
    state.check_normalized(1e-10)
    return extract_canonical_form_from_amplitudes(state.as_dict(), state.n_qubits, tol, phase_tol)


def is_stabilizer_state(state: StateVector, tol: float = MAG_RTOL) -> bool:
    return isinstance(extract_canonical_form(state, tol), CanonicalStabilizerForm)


def synthesize_state(form: CanonicalStabilizerForm, sector=None) -> StateVector | dict[int, complex]:
    """Amplitudes obeying the form; a :class:`StateVector` when a sector is given."""
    amps = form.amplitudes()
    if sector is None:
        return amps
    if sector.geometry.N != form.n_qubits:
        raise ValueError("form and sector disagree on the register size")
    missing = [w for w in amps if w not in sector]
    if missing:
        raise ValueError(f"support word {missing[0]:#x} is not in the gauge sector")
    real = all(abs(a.imag) < 1e-15 for a in amps.values())
    vec = np.zeros(len(sector), dtype=float if real else complex)
    for w, a in amps.items():
        vec[sector.index_of(w)] = a.real if real else a
    return StateVector(sector, vec)


def global_phase_aligned(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm distance between ``a`` and ``b`` after the best global phase."""
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))
