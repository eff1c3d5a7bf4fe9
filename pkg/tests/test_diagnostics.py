import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import hadamard

from rkscars.clifford import CliffordCircuit, simulate_statevector
from rkscars.diagnostics import (
    SRE_STRATEGIES,
    Bipartition,
    PauliString,
    StateVector,
    entanglement_entropy,
    fwht,
    half_system_cut,
    multifractal_flatness,
    pauli_expectation,
    pauli_moment,
    stabilizer_renyi_entropy,
    stabilizer_renyi_entropy_dense,
)
from rkscars.stabilizer_form import is_stabilizer_state

from .conftest import scan, sector, spectrum

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}


def pauli_matrix(label):
    # qubit j is bit j of the index, so it is the rightmost kron factor for j = 0
    return reduce(np.kron, [PAULI[ch] for ch in reversed(label)])


def random_state(sec, rng, complex_=True):
    v = rng.normal(size=len(sec)) + (1j * rng.normal(size=len(sec)) if complex_ else 0)
    return StateVector(sec, v / np.linalg.norm(v))


def test_pauli_label_round_trip():
    p = PauliString.from_label("IXYZ")
    assert p.xmask == 0b0110 and p.zmask == 0b1100
    assert p.label(4) == "IXYZ"
    with pytest.raises(ValueError):
        PauliString.from_label("IQ")


def test_pauli_expectation_against_matrices(sector22):
    rng = np.random.default_rng(3)
    state = random_state(sector22, rng)
    psi = state.to_dense()
    for _ in range(60):
        label = "".join(rng.choice(list("IXYZ"), size=8))
        ref = np.vdot(psi, pauli_matrix(label) @ psi).real
        assert pauli_expectation(state, PauliString.from_label(label)) == pytest.approx(ref, abs=1e-12)


def test_pauli_expectation_examples(sector22):
    c = sector22.config_list()[5]
    fock = StateVector.basis_state(sector22, c)
    assert pauli_expectation(fock, PauliString(0, 0)) == 1.0
    for j in range(8):
        assert pauli_expectation(fock, PauliString(0, 1 << j)) == (-1) ** ((c >> j) & 1)
    scar = scan(2, 2).scars[0].state
    assert pauli_expectation(scar, PauliString((1 << 8) - 1, 0)) == pytest.approx(-1.0, abs=1e-12)


def test_fwht_matches_hadamard_matrix():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 16))
    np.testing.assert_allclose(fwht(a), a @ hadamard(16).T, atol=1e-12)
    with pytest.raises(ValueError):
        fwht(np.ones(6))


def test_sre_single_qubit_oracle():
    psi = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
    assert stabilizer_renyi_entropy_dense(psi) == pytest.approx(-math.log(3 / 4), abs=1e-12)


def test_sre_zero_for_fock_and_2x2_scars(sector22):
    assert stabilizer_renyi_entropy(StateVector.basis_state(sector22, 0)) == 0.0
    for scar in scan(2, 2).scars:
        assert stabilizer_renyi_entropy(scar.state) <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_strategy_equivalence_and_purity(sector22, seed):
    state = random_state(sector22, np.random.default_rng(seed), complex_=seed % 2 == 0)
    moments = [pauli_moment(state, 4, s) for s in SRE_STRATEGIES]
    assert max(moments) - min(moments) <= 1e-9
    for s in SRE_STRATEGIES:
        assert pauli_moment(state, 2, s) / 2**8 == pytest.approx(1.0, abs=1e-10)


def test_strategy_equivalence_on_eigenstates():
    sp = spectrum(2, 2)
    for i in range(len(sp)):
        state = StateVector(sp.sector, sp.eigenvectors[:, i])
        values = [stabilizer_renyi_entropy(state, strategy=s) for s in SRE_STRATEGIES]
        assert max(values) - min(values) <= 1e-9


def test_sre_limits(sector22):
    big = sector(4, 4)
    with pytest.raises(ValueError, match="flatness"):
        stabilizer_renyi_entropy(StateVector.basis_state(big, 0))
    with pytest.raises(ValueError):
        stabilizer_renyi_entropy(StateVector(sector22, np.ones(18)))
    with pytest.raises(ValueError):
        stabilizer_renyi_entropy(StateVector.basis_state(sector22, 0), strategy="bogus")
    with pytest.raises(ValueError):
        stabilizer_renyi_entropy(StateVector.basis_state(sector22, 0), order=1)


gates = st.lists(
    st.tuples(st.sampled_from(["h", "s", "sdg", "x", "z", "cx", "cz"]), st.integers(0, 3), st.integers(0, 3)),
    max_size=25,
)


@settings(max_examples=30, deadline=None)
@given(gates)
def test_sre_clifford_invariance(ops):
    circ = CliffordCircuit(4)
    for name, a, b in ops:
        if name in ("cx", "cz"):
            if a != b:
                circ.append(name, a, b)
        else:
            circ.append(name, a)
    assert stabilizer_renyi_entropy_dense(simulate_statevector(circ)) <= 1e-10


def test_flatness_examples(sector22):
    assert multifractal_flatness(StateVector.basis_state(sector22, 0)) == 0.0
    v = np.zeros(18)
    v[[1, 4, 7]] = 1 / np.sqrt(3)
    assert abs(multifractal_flatness(StateVector(sector22, v))) <= 1e-15
    v[[1, 4, 7]] = [0.6, 0.8, 0.0]
    assert multifractal_flatness(StateVector(sector22, v)) > 1e-3


def dense_entropy(state, maskA):
    n = state.n_qubits
    psi = state.to_dense()
    A = [j for j in range(n) if (maskA >> j) & 1]
    B = [j for j in range(n) if not (maskA >> j) & 1]
    idx = np.arange(1 << n)
    rows = sum(((idx >> q) & 1) << i for i, q in enumerate(A))
    cols = sum(((idx >> q) & 1) << i for i, q in enumerate(B))
    M = np.zeros((1 << len(A), 1 << len(B)), dtype=psi.dtype)
    M[rows, cols] = psi
    p = np.linalg.svd(M, compute_uv=False) ** 2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def test_entanglement_against_dense_svd(sector22):
    rng = np.random.default_rng(7)
    cut = half_system_cut(sector22)
    for _ in range(5):
        state = random_state(sector22, rng)
        assert entanglement_entropy(state, cut) == pytest.approx(dense_entropy(state, cut.maskA), abs=1e-12)
        assert entanglement_entropy(state, cut) == pytest.approx(entanglement_entropy(state, cut.complement()), abs=1e-10)


def test_entanglement_examples(sector22):
    assert entanglement_entropy(StateVector.basis_state(sector22, 0)) == 0.0
    for scar in scan(2, 2).scars:
        assert entanglement_entropy(scar.state) == pytest.approx(math.log(2), abs=1e-10)
    with pytest.raises(ValueError):
        Bipartition(0, 8)
    with pytest.raises(ValueError):
        Bipartition(0xFF, 8)


@pytest.mark.parametrize("Lx,Ly", [(2, 2), (4, 2)])
def test_stabilizer_entropies_quantized(Lx, Ly):
    result = scan(Lx, Ly)
    V = result.canonical.eigenvectors
    for i in range(V.shape[1]):
        state = StateVector(result.sector, V[:, i])
        if is_stabilizer_state(state):
            s = entanglement_entropy(state) / math.log(2)
            assert abs(s - round(s)) <= 1e-8


def test_sre_zero_implies_flat():
    result = scan(2, 2)
    V = result.canonical.eigenvectors
    for i in range(V.shape[1]):
        state = StateVector(result.sector, V[:, i])
        m2 = stabilizer_renyi_entropy(state)
        assert m2 >= 0
        if m2 <= 1e-10:
            assert multifractal_flatness(state) <= 1e-10


def test_spectrum_report_rows():
    from rkscars.diagnostics import spectrum_report
    from rkscars.report import CSV_HEADER, report_csv

    spec = spectrum(2, 2, 0.7)
    rows = spectrum_report(spec)
    assert [r.index for r in rows] == list(range(18))
    for r in rows:
        assert r.energy == pytest.approx(r.kinetic + 0.7 * (r.pot_even + r.pot_odd), abs=1e-10)
        assert r.sre is not None and r.sre >= 0 and r.flatness >= 0
    text = report_csv(rows).splitlines()
    assert text[0] == ",".join(CSV_HEADER) and len(text) == 19
    assert all(r.sre is None for r in spectrum_report(spec, sre_enabled=False))
