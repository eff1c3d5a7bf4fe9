"""Kinetic, potential and Hamiltonian matrices over a gauge sector.

Matrices keep exact integer entries (``scipy.sparse.csr_matrix`` of ``int64``)
until they are diagonalised.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lattice import GaugeSector, Parity, flippability_table, plaquette_patterns, sublattice_of_plaquettes

logger = logging.getLogger(__name__)


class OperatorKind(enum.Enum):
    KINETIC = "kinetic"
    POTENTIAL_EVEN = "potential_even"
    POTENTIAL_ODD = "potential_odd"
    POTENTIAL = "potential"
    HAMILTONIAN = "hamiltonian"


class SectorClosureError(RuntimeError):
    """A plaquette flip produced a configuration outside the sector."""


class DiagonalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SectorOperator:
    sector: GaugeSector
    kind: OperatorKind
    matrix: sp.csr_matrix = field(repr=False)
    coupling: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class Spectrum:
    sector: GaugeSector
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    coupling: float

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _flip_targets(sector: GaugeSector) -> tuple[np.ndarray, np.ndarray]:
    """Rows and flipped-column indices for every (config, active plaquette) pair."""
    geometry = sector.geometry
    active = flippability_table(geometry, sector.configs)
    masks, _, _ = plaquette_patterns(geometry)
    rows, plaqs = np.nonzero(active)
    flipped = sector.configs[rows] ^ masks[plaqs]
    try:
        cols = sector.indices_of(flipped)
    except KeyError as exc:
        raise SectorClosureError(str(exc)) from exc
    return rows, cols


def build_kinetic(sector: GaugeSector) -> SectorOperator:
    """``-sum_p (U_p + U_p^dag)``: entry -1 between configurations one flip apart."""
    if len(sector) == 0:
        raise ValueError("empty sector")
    rows, cols = _flip_targets(sector)
    data = -np.ones(len(rows), dtype=np.int64)
    n = len(sector)
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=np.int64)
    return SectorOperator(sector, OperatorKind.KINETIC, matrix)


def flippable_count_arrays(sector: GaugeSector) -> tuple[np.ndarray, np.ndarray]:
    """Active plaquettes per configuration on the even and odd sublattice."""
    active = flippability_table(sector.geometry, sector.configs)
    parity = sublattice_of_plaquettes(sector.geometry)
    even = active[:, parity == 0].sum(axis=1).astype(np.int64)
    odd = active[:, parity == 1].sum(axis=1).astype(np.int64)
    return even, odd


def build_potential(sector: GaugeSector, parity="both") -> SectorOperator:
    even, odd = flippable_count_arrays(sector)
    if isinstance(parity, str) and parity.lower() == "both":
        diag, kind = even + odd, OperatorKind.POTENTIAL
    elif Parity.parse(parity) is Parity.EVEN:
        diag, kind = even, OperatorKind.POTENTIAL_EVEN
    else:
        diag, kind = odd, OperatorKind.POTENTIAL_ODD
    matrix = sp.diags(diag, format="csr", dtype=np.int64)
    return SectorOperator(sector, kind, matrix)


def build_hamiltonian(sector: GaugeSector, coupling: float = 1.0) -> SectorOperator:
    kinetic = build_kinetic(sector).matrix
    potential = build_potential(sector).matrix
    if float(coupling).is_integer():
        matrix = (kinetic + int(coupling) * potential).tocsr()
    else:
        matrix = (kinetic.astype(float) + coupling * potential.astype(float)).tocsr()
    return SectorOperator(sector, OperatorKind.HAMILTONIAN, matrix, coupling=float(coupling))


def diagonalize(op: SectorOperator) -> Spectrum:
    """Full dense symmetric eigendecomposition (LAPACK ``syevr``)."""
    dense = op.matrix.toarray().astype(float)
    if not np.array_equal(dense, dense.T):
        raise ValueError("operator is not symmetric")
    try:
        evals, evecs = scipy.linalg.eigh(dense, driver="evr")
    except np.linalg.LinAlgError as exc:
        fro = np.linalg.norm(dense)
        raise DiagonalizationError(
            f"eigensolver failed for {op.kind.value} of dim {op.dim} (||M||_F={fro:.3e}): {exc}"
        ) from exc
    coupling = op.coupling if op.coupling is not None else 0.0
    return Spectrum(op.sector, evals, evecs, coupling)


def residuals(op: SectorOperator, spectrum: Spectrum) -> np.ndarray:
    """``||M v - E v||_2`` for every eigenpair."""
    mv = op.matrix @ spectrum.eigenvectors
    return np.linalg.norm(mv - spectrum.eigenvectors * spectrum.eigenvalues[None, :], axis=0)


def check_spectrum(op: SectorOperator, spectrum: Spectrum, rtol: float = 1e-10) -> tuple[float, float]:
    """Return (max residual / ||M||_F, orthonormality defect); raise if out of bounds."""
    fro = max(sp.linalg.norm(op.matrix.astype(float)), 1.0)
    res = residuals(op, spectrum).max(initial=0.0) / fro
    V = spectrum.eigenvectors
    ortho = np.abs(V.T @ V - np.eye(V.shape[1])).max(initial=0.0)
    if res > rtol or ortho > rtol:
        raise DiagonalizationError(f"spectrum check failed: residual {res:.2e}, orthonormality {ortho:.2e}")
    return float(res), float(ortho)


def expectation(op: SectorOperator, amps: np.ndarray) -> float:
    """``<v|M|v>`` for a normalised amplitude vector over the sector."""
    amps = np.asarray(getattr(amps, "amps", amps))
    if amps.shape != (op.dim,):
        raise ValueError(f"state has shape {amps.shape}, operator has dim {op.dim}")
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"state is not normalised (norm={norm!r})")
    value = np.vdot(amps, op.matrix @ amps)
    return float(value.real)


def commutator_norm(a: SectorOperator, b: SectorOperator) -> float:
    comm = (a.matrix @ b.matrix - b.matrix @ a.matrix).astype(float)
    return float(sp.linalg.norm(comm))
