import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rkscars.clifford import (
    CliffordCircuit,
    Gate,
    StabilizerTableau,
    compose_parallel,
    dense_pauli_expectation,
    export_qasm,
    parse_qasm,
    simulate,
    simulate_statevector,
    synthesize_from_canonical_form,
    synthesize_two_branch,
    verify_preparation,
)
from rkscars.stabilizer_form import CanonicalStabilizerForm

from .conftest import scan
from .test_stabilizer_form import as_vector, forms


@st.composite
def circuits(draw):
    n = draw(st.integers(1, 8))
    circ = CliffordCircuit(n)
    names = ["x", "h", "z", "s", "sdg"] + (["cx", "cz"] if n > 1 else [])
    for _ in range(draw(st.integers(0, 40))):
        name = draw(st.sampled_from(names))
        if name in ("cx", "cz"):
            a = draw(st.integers(0, n - 1))
            b = draw(st.integers(0, n - 2))
            circ.append(name, a, b if b < a else b + 1)
        else:
            circ.append(name, draw(st.integers(0, n - 1)))
    return circ


@settings(max_examples=200, deadline=None)
@given(circuits())
def test_tableau_matches_statevector(circ):
    tab = simulate(circ)
    tab.check()
    psi = simulate_statevector(circ)
    for sign, p in tab.stabilizers():
        assert sign * dense_pauli_expectation(psi, p) == pytest.approx(1.0, abs=1e-9)
    assert verify_preparation(tab, psi).passed


def test_zero_state_is_stabilized_by_z():
    assert simulate(CliffordCircuit(3)).stabilizer_labels() == ["+ZII", "+IZI", "+IIZ"]


def test_hadamard_gives_x():
    (sign, p), = simulate(CliffordCircuit(1).h(0)).stabilizers()
    assert sign == 1 and p.xmask == 1 and p.zmask == 0
    (sign, p), = simulate(CliffordCircuit(1).h(0).z(0)).stabilizers()
    assert sign == -1 and p.xmask == 1 and p.zmask == 0


def test_two_branch_single_qubit():
    circ = synthesize_two_branch(0, 1, 1)
    assert [g.name for g in circ.gates] == ["h", "z"]
    np.testing.assert_allclose(simulate_statevector(circ), np.array([1, -1]) / np.sqrt(2), atol=1e-12)


def test_two_branch_bell_pair():
    circ = synthesize_two_branch(0b00, 0b11, 2)
    assert [(g.name, g.qubits) for g in circ.gates] == [("h", (0,)), ("cx", (0, 1)), ("z", (0,))]
    np.testing.assert_allclose(simulate_statevector(circ), np.array([1, 0, 0, -1]) / np.sqrt(2), atol=1e-12)


@given(st.integers(2, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1), st.integers(0, (1 << n) - 1))))
@settings(max_examples=100, deadline=None)
def test_two_branch_random(args):
    n, b0, b1 = args
    if b0 == b1:
        with pytest.raises(ValueError):
            synthesize_two_branch(b0, b1, n)
        return
    psi = simulate_statevector(synthesize_two_branch(b0, b1, n))
    target = np.zeros(1 << n)
    target[b0], target[b1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert abs(abs(np.vdot(target, psi)) - 1) < 1e-12


def test_2x2_scar_two_branch_shape():
    for rec in scan(2, 2).scars:
        b0, b1 = sorted(rec.form.amplitudes())
        circ = synthesize_two_branch(b0, b1, 8)
        assert circ.counts() == {"x": bin(b0).count("1"), "h": 1, "cx": 7, "z": 1}
        assert verify_preparation(simulate(circ), rec.state).passed


def test_dropping_the_phase_gate_fails_verification():
    rec = scan(2, 2).scars[0]
    b0, b1 = sorted(rec.form.amplitudes())
    circ = synthesize_two_branch(b0, b1, 8)
    plus = CliffordCircuit(8, [g for g in circ.gates if g.name != "z"])
    result = verify_preparation(simulate(plus), rec.state)
    assert not result.passed
    assert any(v == pytest.approx(-1.0, abs=1e-9) for v in result.expectations)
    assert sum(v == pytest.approx(1.0, abs=1e-9) for v in result.expectations) == 7


def test_cz_form_k2():
    B = np.array([[0, 1], [0, 0]], dtype=np.int8)
    form = CanonicalStabilizerForm(3, 0b000, (0b110, 0b001), (0, 0), B)
    circ = synthesize_from_canonical_form(form)
    assert circ.counts().get("cz") == 1
    want = as_vector(form.amplitudes(), 3)
    assert abs(abs(np.vdot(want, simulate_statevector(circ))) - 1) < 1e-12
    assert verify_preparation(simulate(circ), want).passed


@settings(max_examples=150, deadline=None)
@given(forms())
def test_canonical_form_circuits_random(form):
    circ = synthesize_from_canonical_form(form)
    want = as_vector(form.amplitudes(), form.n_qubits)
    assert verify_preparation(simulate(circ), want).passed


def test_scar_circuits_from_canonical_form():
    for Lx in (2, 4):
        for rec in scan(Lx, 2).scars:
            assert verify_preparation(simulate(synthesize_from_canonical_form(rec.form)), rec.state).passed


def test_qasm_grammar_and_round_trip():
    circ = CliffordCircuit(3).h(0).s(1).sdg(2).cx(0, 2).cz(1, 2).x(1).z(0)
    text = export_qasm(circ)
    lines = text.splitlines()
    assert lines[:3] == ["OPENQASM 2.0;", 'include "qelib1.inc";', "qreg q[3];"]
    assert lines[3:] == ["h q[0];", "s q[1];", "sdg q[2];", "cx q[0],q[2];", "cz q[1],q[2];", "x q[1];", "z q[0];"]
    assert parse_qasm(text) == circ


def test_empty_circuit_qasm_is_header_only():
    assert export_qasm(CliffordCircuit(4)).splitlines() == ["OPENQASM 2.0;", 'include "qelib1.inc";', "qreg q[4];"]
    with pytest.raises(ValueError):
        parse_qasm("h q[0];")


def test_json_round_trip():
    circ = CliffordCircuit(4).h(0).cx(0, 3).cz(1, 2).s(2)
    data = circ.to_json()
    assert data["gates"][1] == {"g": "cx", "c": 0, "t": 3}
    assert data["gates"][2] == {"g": "cz", "a": 1, "b": 2}
    assert CliffordCircuit.from_json(data) == circ


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("t", (0,))
    with pytest.raises(ValueError):
        Gate("cx", (1, 1))
    with pytest.raises(ValueError):
        CliffordCircuit(2).h(2)


def test_compose_parallel():
    a = CliffordCircuit(4).h(0).cx(0, 1)
    b = CliffordCircuit(4).h(2).cx(2, 3)
    both = compose_parallel([a, b])
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    # qubits (3,2) are the high index bits
    np.testing.assert_allclose(simulate_statevector(both), np.kron(bell, bell), atol=1e-12)
    assert verify_preparation(simulate(both), np.kron(bell, bell)).passed
    with pytest.raises(ValueError):
        compose_parallel([a, CliffordCircuit(4).x(1)])


def test_verify_rejects_bad_targets():
    tab = StabilizerTableau.zero_state(2)
    with pytest.raises(ValueError):
        verify_preparation(tab, np.ones(4))
    with pytest.raises(ValueError):
        verify_preparation(tab, np.ones(8) / np.sqrt(8))
