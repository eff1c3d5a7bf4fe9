"""Stabilizer scars inside degenerate eigenspaces.

Pipeline per degenerate energy sector:

1. split the sector into joint eigenspaces of the kinetic operator and the two
   sublattice potentials with integer eigenvalues (exact null spaces, so every
   vector of a returned subspace satisfies the eigen-relations);
2. search each joint subspace for vectors of canonical stabilizer form by
   enumerating affine supports inside the subspace's weight profile;
3. keep a maximum mutually orthogonal subset of the stabilizer vectors and
   complete it to an orthonormal basis of the sector.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import gf2
from .diagnostics import (
    EXACT_SRE_MAX_QUBITS,
    StateVector,
    entanglement_entropy,
    half_system_cut,
    multifractal_flatness,
    stabilizer_renyi_entropy,
)
from .lattice import GaugeSector, Parity
from .operators import Spectrum, build_kinetic, build_potential
from .stabilizer_form import (
    CanonicalStabilizerForm,
    extract_canonical_form_from_amplitudes,
    synthesize_state,
)

logger = logging.getLogger(__name__)

INTEGER_TOL = 1e-8
RESIDUAL_TOL = 1e-8
K_CAP = 6
OTHER_K_CAP = 2
MAX_SUPPORTS = 500_000
PHASE_CAP = 1 << 16


class SearchCapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DegenerateSector:
    energy: float
    members: np.ndarray = field(repr=False)
    coupling: float
    start: int = 0

    @property
    def dim(self) -> int:
        return self.members.shape[1]


@dataclass(frozen=True)
class JointSubspace:
    """Joint eigenspace of (kinetic, even potential, odd potential) with integer labels."""

    energy: float
    kinetic: int
    pot_even: int
    pot_odd: int
    basis: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def sublattice_parity(self, M: int) -> Parity | None:
        if (self.pot_even, self.pot_odd) == (M, 0):
            return Parity.EVEN
        if (self.pot_even, self.pot_odd) == (0, M):
            return Parity.ODD
        return None

    def is_sublattice(self, M: int) -> bool:
        return self.sublattice_parity(M) is not None and self.kinetic in (-2, 0, 2)


@dataclass
class ScarRecord:
    state: StateVector
    energy: float
    kin_eigenvalue: int
    active_parity: Parity
    form: CanonicalStabilizerForm
    flatness: float | None = None
    entanglement: float | None = None
    sre: float | None = None
    origin: str = "numeric"
    pairing: tuple | None = None

    @property
    def support_size(self) -> int:
        return 1 << self.form.k

    def to_json(self) -> dict:
        out = {
            "E": round(float(self.energy), 12),
            "n": int(self.kin_eigenvalue),
            "parity": self.active_parity.name.lower(),
            "support_size": self.support_size,
            "form": self.form.to_json(),
            "markers": {
                "flatness": _fmt(self.flatness),
                "svn": _fmt(self.entanglement),
                "m2": _fmt(self.sre),
            },
            "origin": self.origin,
        }
        if self.pairing is not None:
            out["pairing"] = [list(p) for p in self.pairing]
        return out


def _fmt(x):
    return None if x is None else float(f"{x:.12e}")


# ---------------------------------------------------------------------------
# clustering and joint eigenspaces


def cluster_spectrum(spectrum: Spectrum, cluster_tol: float | None = None) -> list[DegenerateSector]:
    """Greedy gap clustering of the ascending eigenvalues."""
    E = spectrum.eigenvalues
    if len(E) and np.any(np.diff(E) < 0):
        raise ValueError("eigenvalues must be sorted")
    sectors = []
    start = 0
    for i in range(1, len(E) + 1):
        tol = cluster_tol if cluster_tol is not None else 1e-9 * max(1.0, abs(E[i - 1]))
        if i == len(E) or E[i] - E[i - 1] > tol:
            block = spectrum.eigenvectors[:, start:i]
            sectors.append(DegenerateSector(float(np.mean(E[start:i])), block, spectrum.coupling, start))
            start = i
    return sectors


def null_space(A: np.ndarray, tol: float = RESIDUAL_TOL) -> np.ndarray:
    if A.shape[1] == 0:
        return np.zeros((0, 0))
    _, s, vt = np.linalg.svd(A, full_matrices=A.shape[0] < A.shape[1])
    rank = int(np.sum(s > tol))
    return vt[rank:].conj().T


def _integer_eigenvalues(values: np.ndarray, tol: float) -> list[int]:
    ints = np.rint(values)
    return sorted({int(v) for v, r in zip(ints, values) if abs(r - v) <= tol})


@dataclass(frozen=True)
class SectorOperators:
    kinetic: object
    pot_even: object
    pot_odd: object
    M: int

    @classmethod
    def build(cls, sector: GaugeSector) -> "SectorOperators":
        g = sector.geometry
        return cls(
            build_kinetic(sector).matrix.astype(float),
            build_potential(sector, Parity.EVEN).matrix.astype(float),
            build_potential(sector, Parity.ODD).matrix.astype(float),
            g.n_plaquettes // 2,
        )


def _refine(Q: np.ndarray, ops: list, labels: list, tol: float, out: list) -> None:
    if not ops:
        out.append((tuple(labels), Q))
        return
    op = ops[0]
    OQ = op @ Q
    projected = Q.conj().T @ OQ
    values = np.linalg.eigvalsh((projected + projected.conj().T) / 2)
    for mu in _integer_eigenvalues(values, tol):
        coeffs = null_space(OQ - mu * Q, tol)
        if coeffs.shape[1]:
            sub = Q @ coeffs
            # re-orthonormalise against accumulated round-off
            sub, _ = np.linalg.qr(sub)
            _refine(sub, ops[1:], labels + [mu], tol, out)


def find_integer_joint_eigenvectors(
    sec: DegenerateSector,
    ops: SectorOperators,
    patterns: str = "sublattice",
    tol: float = INTEGER_TOL,
) -> list[JointSubspace]:
    """Joint integer eigenspaces of (O_kin, O_pot_even, O_pot_odd) inside a sector.

    ``patterns="sublattice"`` keeps only (M, 0) / (0, M) potential patterns with
    kinetic eigenvalue in {0, +-2}; ``"all"`` keeps every integer triple.
    """
    found: list = []
    _refine(sec.members, [ops.kinetic, ops.pot_even, ops.pot_odd], [], tol, found)
    subspaces = [JointSubspace(sec.energy, n, a, b, Q) for (n, a, b), Q in found]
    if patterns == "sublattice":
        subspaces = [s for s in subspaces if s.is_sublattice(ops.M)]
    elif patterns != "all":
        raise ValueError(f"unknown pattern filter {patterns!r}")
    return subspaces


# ---------------------------------------------------------------------------
# stabilizer vectors inside a subspace


def _affine_subspaces(points: list[int], k: int, budget: list[int]) -> list[tuple[int, ...]]:
    """All affine subspaces of size ``2^k`` contained in ``points`` (sorted tuples)."""
    pool = set(points)
    level = {(x,) for x in points}
    for _ in range(k):
        nxt = set()
        for A in sorted(level):
            x0 = A[0]
            members = set(A)
            for y in points:
                if y <= x0 or y in members:
                    continue
                shift = y ^ x0
                image = [a ^ shift for a in A]
                if all(z in pool and z > x0 for z in image):
                    cand = tuple(sorted(A + tuple(image)))
                    if cand in nxt:
                        continue
                    nxt.add(cand)
                    budget[0] -= 1
                    if budget[0] <= 0:
                        warnings.warn("affine support enumeration cap reached", SearchCapWarning, stacklevel=3)
                        return sorted(s for s in nxt if len(s) == 1 << k)
        level = nxt
        if not level:
            return []
    return sorted(level)


def _support_form(support: tuple[int, ...]) -> tuple[int, list[int], list[int]]:
    """Offset, echelon generators and per-point coordinates of an affine support."""
    x0 = support[0]
    gens = gf2.echelon_basis(w ^ x0 for w in support)
    coords = [gf2.coordinates(w ^ x0, gens) for w in support]
    return x0, gens, coords


def _phase_candidates(k: int, cap: int):
    """All (m, B) exponent tables as a matrix of Z4 exponents over ``t``; None if over cap."""
    pairs = list(itertools.combinations(range(k), 2))
    total = 4**k * 2 ** len(pairs)
    if total > cap:
        return None
    t = np.arange(1 << k)
    tbits = (t[:, None] >> np.arange(k)[None, :]) & 1  # [t, i]
    ms = np.array(list(itertools.product(range(4), repeat=k)), dtype=np.int64).reshape(-1, k)
    lin = ms @ tbits.T  # [m, t]
    if pairs:
        bs = np.array(list(itertools.product((0, 1), repeat=len(pairs))), dtype=np.int64)
        pair_prod = np.stack([tbits[:, i] * tbits[:, j] for i, j in pairs], axis=1)  # [t, pair]
        quad = 2 * (bs @ pair_prod.T)  # [B, t]
    else:
        quad = np.zeros((1, 1 << k), dtype=np.int64)
    return (lin[:, None, :] + quad[None, :, :]).reshape(-1, 1 << k) % 4


def _weights(Q: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(Q) ** 2, axis=1)


def stabilizer_search_in_subspace(
    Q: np.ndarray,
    sector: GaugeSector,
    k_cap: int = K_CAP,
    tol: float = RESIDUAL_TOL,
    max_supports: int = MAX_SUPPORTS,
    phase_cap: int = PHASE_CAP,
    stop_when_spanning: bool = False,
) -> list[tuple[StateVector, CanonicalStabilizerForm]]:
    """Every stabilizer vector (up to phase) in ``span(Q)`` with support at most ``2^k_cap``.

    With ``stop_when_spanning`` the search ends after the first support size at
    which the vectors found so far contain an orthonormal basis of the subspace;
    larger supports cannot change a maximum orthogonal selection then.

    A unit vector of the subspace with amplitude modulus ``2^{-k/2}`` at ``x``
    forces ``w(x) = ||Q[x]||^2 >= 2^{-k}``, which bounds the candidate supports.
    """
    Q = np.asarray(Q)
    if Q.ndim != 2 or Q.shape[1] == 0:
        raise ValueError("subspace must have at least one basis vector")
    configs = sector.configs
    n = sector.geometry.N
    w = _weights(Q)
    union = np.nonzero(w > tol**2)[0]
    results: list[tuple[StateVector, CanonicalStabilizerForm]] = []
    dim = Q.shape[1]

    def consider(amps_full: np.ndarray) -> None:
        norm = np.linalg.norm(amps_full)
        if norm < tol:
            return
        amps_full = amps_full / norm
        proj = Q @ (Q.conj().T @ amps_full)
        if np.linalg.norm(amps_full - proj) > tol:
            return
        nz = np.nonzero(np.abs(amps_full) > tol)[0]
        amps = {int(configs[i]): complex(amps_full[i]) for i in nz}
        form = extract_canonical_form_from_amplitudes(amps, n)
        if not isinstance(form, CanonicalStabilizerForm):
            return
        for prev, _ in results:
            if abs(abs(np.vdot(prev.amps, amps_full)) - 1.0) < tol:
                return
        # store the exact vector of the form; it is within tol of the subspace
        results.append((synthesize_state(form, sector), form))

    if dim == 1:
        consider(Q[:, 0])
        return results

    for k in range(0, k_cap + 1):
        budget = [max_supports]
        size = 1 << k
        if size > len(union):
            break
        eligible = union[w[union] >= 1.0 / size - 1e-9]
        if len(eligible) < size:
            continue
        words = [int(configs[i]) for i in eligible]
        index_of = dict(zip(words, eligible.tolist()))
        supports = [(w0,) for w0 in words] if k == 0 else _affine_subspaces(words, k, budget)
        for support in supports:
            rows = [index_of[x] for x in support]
            QA = Q[rows]
            _, s, vt = np.linalg.svd(QA, full_matrices=False)
            inside = int(np.sum(1.0 - s <= 1e-10))
            if inside == 0:
                continue
            coeffs = vt[:inside].conj().T
            if inside == 1:
                consider(Q @ coeffs[:, 0])
                continue
            x0, gens, coords = _support_form(support)
            table = _phase_candidates(k, phase_cap)
            if table is None:
                warnings.warn(
                    f"phase enumeration for a {size}-point support exceeds the cap; skipped",
                    SearchCapWarning,
                    stacklevel=2,
                )
                continue
            # amplitudes over the support ordered by coordinate t
            order = np.argsort(coords)
            ordered_rows = np.array(rows)[order]
            cand = (1j**table) / np.sqrt(size)  # [candidate, t]
            QA_t = Q[ordered_rows]  # [t, d]
            # in-support part of the projection residual; consider() checks the rest
            resid = np.linalg.norm(cand - (cand @ QA_t.conj()) @ QA_t.T, axis=1)
            for c in np.nonzero(resid <= tol)[0]:
                full = np.zeros(len(configs), dtype=complex)
                full[ordered_rows] = cand[c]
                consider(full)
        if stop_when_spanning and len(_greedy_orthogonal([r[0].amps for r in results], tol)) == dim:
            break
    return results


# ---------------------------------------------------------------------------
# orthogonal selection and completion


def _greedy_orthogonal(vectors: list[np.ndarray], tol: float = RESIDUAL_TOL) -> list[int]:
    chosen: list[int] = []
    for i, v in enumerate(vectors):
        if all(abs(np.vdot(vectors[j], v)) <= tol for j in chosen):
            chosen.append(i)
    return chosen


def max_orthogonal_subset(
    vectors: list[np.ndarray], tol: float = RESIDUAL_TOL, dim: int | None = None
) -> list[int]:
    """Indices of a largest mutually orthogonal subset (lexicographically first among ties).

    ``dim`` bounds the answer: a greedy pass that reaches it is already optimal
    and lexicographically first, so the clique search is skipped.
    """
    m = len(vectors)
    if m == 0:
        return []
    if dim is None:
        dim = len(vectors[0])
    greedy = _greedy_orthogonal(vectors, tol)
    if len(greedy) == min(dim, m):
        return greedy
    V = np.array(vectors)
    G = np.abs(V.conj() @ V.T)
    graph = nx.Graph()
    graph.add_nodes_from(range(m))
    graph.add_edges_from((i, j) for i in range(m) for j in range(i + 1, m) if G[i, j] <= tol)
    if graph.number_of_edges() == m * (m - 1) // 2:
        return list(range(m))
    best: list[int] = []
    for clique in nx.find_cliques(graph):
        clique = sorted(clique)
        if len(clique) > len(best) or (len(clique) == len(best) and clique < best):
            best = clique
    return best


def rref_basis(Q: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Reduced row echelon basis of ``span(Q)`` as columns; independent of the basis of Q."""
    R = np.array(Q.T, dtype=Q.dtype, copy=True)
    rows, cols = R.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        others = np.arange(rows) != r
        R[others] -= np.outer(R[others, c], R[r])
        r += 1
    return R[:r].T


def orthonormalize_and_complete(found: list[np.ndarray], members: np.ndarray, tol: float = RESIDUAL_TOL):
    """Orthonormal basis of span(members): mutually orthogonal ``found`` first, then a sparse completion.

    Returns ``(basis, n_kept)`` where the first ``n_kept`` columns are vectors of
    ``found`` (only those orthogonal to all earlier kept ones are used, so they are
    not altered by the orthogonalisation).
    """
    d = members.shape[1]
    dtype = np.result_type(members, *[np.asarray(f) for f in found]) if found else members.dtype
    basis: list[np.ndarray] = []
    for f in found:
        f = np.asarray(f, dtype=dtype)
        f = f / np.linalg.norm(f)
        if all(abs(np.vdot(b, f)) <= tol for b in basis):
            basis.append(f)
        if len(basis) == d:
            break
    kept = len(basis)
    for cand in rref_basis(members).T:
        if len(basis) == d:
            break
        v = np.asarray(cand, dtype=dtype)
        for _ in range(2):
            for b in basis:
                v = v - np.vdot(b, v) * b
        norm = np.linalg.norm(v)
        if norm >= tol:
            basis.append(v / norm)
    out = np.array(basis).T if basis else np.zeros((members.shape[0], 0), dtype=dtype)
    return out, kept


# ---------------------------------------------------------------------------
# full scan


@dataclass
class StabilizerRecord:
    """Stabilizer eigenvector with its joint labels; scars are the sublattice ones."""

    state: StateVector
    form: CanonicalStabilizerForm
    subspace: JointSubspace


@dataclass
class SectorResult:
    sector: DegenerateSector
    subspaces: list[JointSubspace]
    stabilizers: list[StabilizerRecord]
    selected: list[int]
    basis: np.ndarray = field(repr=False)


def _sort_key(item: tuple[StateVector, CanonicalStabilizerForm]):
    state, form = item
    words = sorted(w for w, _ in form.points())
    return (form.k, words)


def analyze_sector(
    sec: DegenerateSector,
    ops: SectorOperators,
    sector: GaugeSector,
    k_cap: int = K_CAP,
    other_k_cap: int = OTHER_K_CAP,
) -> SectorResult:
    subspaces = find_integer_joint_eigenvectors(sec, ops, patterns="all")
    # sublattice subspaces first, then by labels
    subspaces.sort(key=lambda s: (not s.is_sublattice(ops.M), s.kinetic, -s.pot_even, -s.pot_odd))
    records: list[StabilizerRecord] = []
    for sub in subspaces:
        cap = k_cap if sub.is_sublattice(ops.M) else other_k_cap
        found = stabilizer_search_in_subspace(sub.basis, sector, k_cap=cap, stop_when_spanning=True)
        found.sort(key=_sort_key)
        records.extend(StabilizerRecord(s, f, sub) for s, f in found)
    selected: list[int] = []
    # joint subspaces with different labels are mutually orthogonal
    for sub in subspaces:
        idx = [i for i, r in enumerate(records) if r.subspace is sub]
        chosen = max_orthogonal_subset([records[i].state.amps for i in idx], dim=sub.dim)
        selected.extend(idx[c] for c in chosen)
    basis, kept = orthonormalize_and_complete([records[i].state.amps for i in selected], sec.members)
    assert kept == len(selected)
    return SectorResult(sec, subspaces, records, selected, basis)


@dataclass
class ScanResult:
    sector: GaugeSector
    spectrum: Spectrum
    sectors: list[SectorResult]
    scars: list[ScarRecord]
    trivial: list[StabilizerRecord]
    canonical: Spectrum

    @property
    def count(self) -> int:
        return len(self.scars)


def scan_all(
    spectrum: Spectrum,
    cluster_tol: float | None = None,
    k_cap: int = K_CAP,
    other_k_cap: int = OTHER_K_CAP,
    markers: bool = True,
    sre: bool | None = None,
) -> ScanResult:
    """Run the sector pipeline over the whole spectrum and collect scar records."""
    sector = spectrum.sector
    ops = SectorOperators.build(sector)
    if sre is None:
        sre = sector.geometry.N <= EXACT_SRE_MAX_QUBITS
    results = []
    scars: list[ScarRecord] = []
    trivial: list[StabilizerRecord] = []
    columns = []
    energies = []
    cut = half_system_cut(sector)
    for sec in cluster_spectrum(spectrum, cluster_tol):
        if sec.dim == 1 and abs(sec.energy - round(sec.energy)) > INTEGER_TOL:
            # a non-integer simple eigenvalue cannot host integer joint labels
            res = SectorResult(sec, [], [], [], sec.members)
        else:
            res = analyze_sector(sec, ops, sector, k_cap, other_k_cap)
        results.append(res)
        columns.append(res.basis)
        energies.extend([sec.energy] * res.basis.shape[1])
        for i in res.selected:
            rec = res.stabilizers[i]
            parity = rec.subspace.sublattice_parity(ops.M)
            if rec.subspace.is_sublattice(ops.M):
                scar = ScarRecord(
                    rec.state, sec.energy, rec.subspace.kinetic, parity, rec.form, origin="numeric"
                )
                if markers:
                    attach_markers(scar, cut, sre)
                scars.append(scar)
            else:
                trivial.append(rec)
    V = np.concatenate(columns, axis=1)
    canonical = Spectrum(sector, np.array(energies), V, spectrum.coupling)
    return ScanResult(sector, spectrum, results, scars, trivial, canonical)


def attach_markers(scar: ScarRecord, cut=None, sre: bool = True) -> ScarRecord:
    scar.flatness = multifractal_flatness(scar.state)
    scar.entanglement = entanglement_entropy(scar.state, cut)
    if sre and scar.state.n_qubits <= EXACT_SRE_MAX_QUBITS:
        scar.sre = stabilizer_renyi_entropy(scar.state)
    return scar


def rotate_sector_members(spectrum: Spectrum, rng: np.random.Generator, cluster_tol: float | None = None) -> Spectrum:
    """Apply an independent random orthogonal rotation inside every degenerate sector."""
    V = spectrum.eigenvectors.copy()
    for sec in cluster_spectrum(spectrum, cluster_tol):
        if sec.dim > 1:
            R, _ = np.linalg.qr(rng.normal(size=(sec.dim, sec.dim)))
            V[:, sec.start : sec.start + sec.dim] = sec.members @ R
    return Spectrum(spectrum.sector, spectrum.eigenvalues, V, spectrum.coupling)
