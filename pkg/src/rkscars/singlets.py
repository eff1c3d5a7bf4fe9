"""Analytic O_kin = 0 scars: products of logical singlets on dimerised plaquettes.

On a configuration where every plaquette of one sublattice is flippable, each
such plaquette carries a logical qubit spanned by its clockwise (C) and
anticlockwise (A) states.  Plaquettes of one sublattice share no links, so a
C/A word over them fixes the whole configuration.  A dimer pairing ``D`` gives

    prod_{(p,q) in D} (|C>_p |A>_q - |A>_p |C>_q) / sqrt(2)

expanded at configuration level; every branch must keep the other sublattice
inactive, otherwise the pairing is rejected.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import StateVector, half_system_cut, pauli_expectation, PauliString
from .lattice import GaugeSector, Parity, PlaquetteState, plaquette_state
from .operators import build_kinetic, build_potential
from .scar_search import RESIDUAL_TOL, ScarRecord, attach_markers, max_orthogonal_subset
from .stabilizer_form import CanonicalStabilizerForm, extract_canonical_form


@dataclass(frozen=True)
class SublatticeConfigSet:
    sector: GaugeSector
    parity: Parity
    plaquettes: tuple  # plaquette ids of the active sublattice, ascending
    configs: tuple  # configuration words
    labels: tuple  # C/A word per config: bit j set <=> plaquettes[j] clockwise
    by_label: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.configs)

    def label_string(self, label: int) -> str:
        return "".join("C" if (label >> j) & 1 else "A" for j in range(len(self.plaquettes)))


@dataclass(frozen=True)
class DimerPairing:
    parity: Parity
    pairs: tuple  # ((p, q), ...) with p < q, plaquette ids

    def __post_init__(self):
        flat = [p for pair in self.pairs for p in pair]
        if len(flat) != len(set(flat)):
            raise ValueError("each plaquette must belong to exactly one dimer")


class InvalidReason(enum.Enum):
    MISSING_BRANCH = "MissingBranch"


@dataclass(frozen=True)
class Invalid:
    reason: InvalidReason
    missing: tuple = ()

    def __bool__(self) -> bool:
        return False


def build_sublattice_config_set(sector: GaugeSector, parity) -> SublatticeConfigSet:
    parity = Parity.parse(parity)
    g = sector.geometry
    active = tuple(g.plaquette_id(p) for p in g.plaquettes() if g.sublattice(p) is parity)
    inactive = [g.plaquette_coords(i) for i in range(g.n_plaquettes) if i not in active]
    configs, labels = [], []
    for c in sector.config_list():
        states = [plaquette_state(g, c, g.plaquette_coords(i)) for i in active]
        if any(s is PlaquetteState.INACTIVE for s in states):
            continue
        if any(plaquette_state(g, c, q) is not PlaquetteState.INACTIVE for q in inactive):
            continue
        label = sum(1 << j for j, s in enumerate(states) if s is PlaquetteState.CLOCKWISE)
        configs.append(c)
        labels.append(label)
    by_label = dict(zip(labels, configs))
    if len(by_label) != len(configs):
        raise AssertionError("C/A labels are not unique across the configuration set")
    return SublatticeConfigSet(sector, parity, active, tuple(configs), tuple(labels), by_label)


def perfect_matchings(items):
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in perfect_matchings(rest[:i] + rest[i + 1 :]):
            yield ((first, partner),) + tail


def all_pairings(config_set: SublatticeConfigSet) -> list[DimerPairing]:
    return [DimerPairing(config_set.parity, m) for m in perfect_matchings(config_set.plaquettes)]


def singlet_branches(config_set: SublatticeConfigSet, pairing: DimerPairing) -> list[tuple[int, int]]:
    """``(C/A label, sign)`` for each branch of the singlet product."""
    pos = {p: j for j, p in enumerate(config_set.plaquettes)}
    covered = sorted(p for pair in pairing.pairs for p in pair)
    if covered != sorted(config_set.plaquettes):
        raise ValueError("pairing does not cover the active sublattice")
    branches = []
    for choice in itertools.product((0, 1), repeat=len(pairing.pairs)):
        label, sign = 0, 1
        for (p, q), ac in zip(pairing.pairs, choice):
            # ac = 0: C on p, A on q (+); ac = 1: A on p, C on q (-)
            label |= 1 << (pos[q] if ac else pos[p])
            sign = -sign if ac else sign
        branches.append((label, sign))
    return branches


def build_singlet_state(config_set: SublatticeConfigSet, pairing: DimerPairing) -> StateVector | Invalid:
    if pairing.parity is not config_set.parity:
        raise ValueError("pairing and configuration set are on different sublattices")
    branches = singlet_branches(config_set, pairing)
    missing = tuple(label for label, _ in branches if label not in config_set.by_label)
    if missing:
        return Invalid(InvalidReason.MISSING_BRANCH, missing)
    sector = config_set.sector
    amps = np.zeros(len(sector))
    scale = 2.0 ** (-len(pairing.pairs) / 2)
    for label, sign in branches:
        amps[sector.index_of(config_set.by_label[label])] = sign * scale
    return StateVector(sector, amps)


def logical_pair_expectations(state: StateVector, pair) -> tuple[float, float]:
    """``(<Z_p Z_q>, <X_p X_q>)`` for logical plaquette operators.

    ``X_p X_q`` flips both plaquettes, i.e. the Pauli X string on their eight
    links; ``Z_p`` is +1 on C and -1 on A.
    """
    g = state.sector.geometry
    p, q = pair
    xx = pauli_expectation(state, PauliString(g.plaquette_mask(g.plaquette_coords(p)) | g.plaquette_mask(g.plaquette_coords(q)), 0))
    zz = 0.0
    for i in state.support():
        c = int(state.sector.configs[i])
        zp = 1 if plaquette_state(g, c, g.plaquette_coords(p)) is PlaquetteState.CLOCKWISE else -1
        zq = 1 if plaquette_state(g, c, g.plaquette_coords(q)) is PlaquetteState.CLOCKWISE else -1
        zz += zp * zq * abs(state.amps[i]) ** 2
    return zz, xx


def dimers_crossing(pairing: DimerPairing, geometry, cut_mask: int) -> int:
    """Dimers whose two plaquettes' link sets fall on different sides of a cut.

    A dimer is counted once its links meet both sides of the bipartition.
    """
    count = 0
    for p, q in pairing.pairs:
        mask = geometry.plaquette_mask(geometry.plaquette_coords(p)) | geometry.plaquette_mask(
            geometry.plaquette_coords(q)
        )
        if mask & cut_mask and mask & ~cut_mask:
            count += 1
    return count


@dataclass
class SingletCensus:
    """All pairings tried on one sublattice and the outcome of each."""

    config_set: SublatticeConfigSet
    valid: list[tuple[DimerPairing, StateVector]]
    invalid: list[tuple[DimerPairing, Invalid]]

    def span_rank(self, tol: float = RESIDUAL_TOL) -> int:
        if not self.valid:
            return 0
        A = np.array([s.amps for _, s in self.valid])
        return int(np.linalg.matrix_rank(A, tol))


def singlet_census(sector: GaugeSector, parity) -> SingletCensus:
    config_set = build_sublattice_config_set(sector, parity)
    valid, invalid = [], []
    if len(config_set.plaquettes) % 2 or not len(config_set):
        return SingletCensus(config_set, valid, invalid)
    seen: list[np.ndarray] = []
    for pairing in all_pairings(config_set):
        state = build_singlet_state(config_set, pairing)
        if isinstance(state, Invalid):
            invalid.append((pairing, state))
            continue
        if any(abs(abs(np.dot(prev, state.amps)) - 1.0) < RESIDUAL_TOL for prev in seen):
            continue
        seen.append(state.amps)
        valid.append((pairing, state))
    return SingletCensus(config_set, valid, invalid)


def _canonical_order(items):
    # by support words, the same ordering scar_search uses
    def key(item):
        _, state = item
        return sorted(int(w) for w in state.sector.configs[state.support()])

    return sorted(items, key=key)


def enumerate_scar_states(sector: GaugeSector, coupling: float = 1.0, markers: bool = True) -> list[ScarRecord]:
    """Verified singlet-product scars, a maximum mutually orthogonal subset per sublattice."""
    g = sector.geometry
    M = g.n_plaquettes // 2
    K = build_kinetic(sector).matrix
    V = {Parity.EVEN: build_potential(sector, Parity.EVEN).matrix, Parity.ODD: build_potential(sector, Parity.ODD).matrix}
    cut = half_system_cut(sector)
    records = []
    for parity in (Parity.EVEN, Parity.ODD):
        census = singlet_census(sector, parity)
        items = _canonical_order(census.valid)
        chosen = max_orthogonal_subset([s.amps for _, s in items])
        for i in chosen:
            pairing, state = items[i]
            verify_singlet_state(state, K, V[parity], V[parity.__class__(1 - parity)], M)
            form = extract_canonical_form(state)
            if not isinstance(form, CanonicalStabilizerForm):
                raise AssertionError(f"singlet state is not a stabilizer state: {form}")
            rec = ScarRecord(state, coupling * M, 0, parity, form, origin="analytic", pairing=pairing.pairs)
            if markers:
                attach_markers(rec, cut)
            records.append(rec)
    return records


def verify_singlet_state(state: StateVector, K, V_active, V_inactive, M: int, tol: float = RESIDUAL_TOL) -> None:
    v = state.amps
    checks = {
        "kinetic": np.linalg.norm(K @ v),
        "active potential": np.linalg.norm(V_active @ v - M * v),
        "inactive potential": np.linalg.norm(V_inactive @ v),
    }
    bad = {k: r for k, r in checks.items() if r > tol}
    if bad:
        raise AssertionError(f"singlet state fails eigen-relations: {bad}")


def dimer_branch_words(geometry, pair) -> tuple[int, int]:
    """``(|C>_p |A>_q, |A>_p |C>_q)`` restricted to the eight links of the dimer."""
    p, q = (geometry.plaquette_links[i] for i in pair)
    # clockwise = (bottom, right) up, anticlockwise = (top, left) up
    cw = lambda links: (1 << links[0]) | (1 << links[1])  # noqa: E731
    acw = lambda links: (1 << links[2]) | (1 << links[3])  # noqa: E731
    return cw(p) | acw(q), acw(p) | cw(q)


def synthesize_singlet_product(geometry, pairing: DimerPairing):
    """One two-branch circuit per dimer, composed in parallel on disjoint links."""
    from .clifford import compose_parallel, synthesize_two_branch

    circuits = []
    for pair in pairing.pairs:
        b0, b1 = dimer_branch_words(geometry, pair)
        circuits.append(synthesize_two_branch(b0, b1, geometry.N))
    return compose_parallel(circuits)
