import json

import numpy as np
import pytest

from bellfilter.polarization import Basis, TwoPhotonState, psi_minus_phi, state_from_label, to_bell_basis
from bellfilter.superop import (
    ChoiMatrix,
    DiagnosisError,
    KrausSet,
    NotCompletelyPositiveError,
    SuperMatrix,
    apply,
    apply_matrix,
    choi_apply,
    choi_to_kraus,
    choi_to_matrix,
    compose,
    conjugate_by_phase_shifter,
    ideal_filter,
    identity,
    kraus_to_choi,
    kraus_to_matrix,
    leading_projector_phase,
    matrix_to_choi,
    normalize_superoperator,
    repair,
    superop_from_function,
    superop_from_json,
    superop_to_json,
    unitary_superop,
)

from . import oracles


def projector_map(psi):
    p = oracles.proj(psi)
    return SuperMatrix(oracles.superop_matrix(lambda r: p @ r @ p))


def random_process(rng, n_ops=3):
    ops = oracles.random_kraus(rng, n_ops)
    return ops, SuperMatrix(oracles.superop_matrix(lambda r: oracles.kraus_apply(ops, r)))


# -- apply ------------------------------------------------------------------------


def test_apply_identity(rng):
    rho = oracles.random_density(rng)
    out = apply(identity(), TwoPhotonState(rho))
    assert np.allclose(out.matrix, rho, atol=1e-15)


def test_apply_ideal_filter_mixed_input():
    out = apply(ideal_filter(), TwoPhotonState(np.eye(4) / 4, Basis.BELL))
    expect = np.zeros((4, 4))
    expect[0, 0] = 0.25
    assert np.allclose(out.matrix, expect, atol=1e-15)
    assert out.basis == Basis.BELL


def test_apply_ideal_filter_blocks_hh():
    out = apply(ideal_filter(Basis.COMPUTATIONAL), state_from_label("HH"))
    assert np.max(np.abs(out.matrix)) < 1e-15


def test_apply_basis_mismatch():
    with pytest.raises(ValueError, match="basis"):
        apply(ideal_filter(Basis.BELL), state_from_label("HV"))


def test_ideal_filter_matches_projector_oracle():
    m = oracles.superop_matrix(lambda r: oracles.proj(oracles.BELL["Psi-"]) @ r @ oracles.proj(oracles.BELL["Psi-"]))
    assert np.allclose(ideal_filter(Basis.COMPUTATIONAL).m, m, atol=1e-15)


def test_supermatrix_basis_change_consistent(rng):
    ops, e = random_process(rng)
    rho = oracles.random_density(rng)
    via_bell = apply(e.in_basis(Basis.BELL), to_bell_basis(TwoPhotonState(rho)))
    direct = oracles.to_bell(oracles.kraus_apply(ops, rho))
    assert np.allclose(via_bell.matrix, direct, atol=1e-12)
    assert np.max(np.abs(e.in_basis(Basis.BELL).in_basis(Basis.COMPUTATIONAL).m - e.m)) < 1e-12


def test_apply_output_physical(rng):
    for _ in range(20):
        _, e = random_process(rng, n_ops=int(rng.integers(1, 5)))
        rho = oracles.random_density(rng, rank=int(rng.integers(1, 5)), trace=rng.uniform(0.2, 1))
        out = apply(e, TwoPhotonState(rho)).matrix
        assert np.max(np.abs(out - out.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(out).min() > -1e-8
        assert -1e-12 <= np.trace(out).real <= np.trace(rho).real + 1e-9


# -- Choi / Kraus ---------------------------------------------------------------------


def test_identity_choi():
    c = matrix_to_choi(identity())
    expect = np.zeros((16, 16))
    for i in range(4):
        for j in range(4):
            e = np.zeros((4, 4))
            e[i, j] = 1
            expect += np.kron(e, e)
    assert np.allclose(c.c, expect, atol=1e-15)
    assert np.linalg.matrix_rank(c.c) == 1
    assert np.trace(c.c).real == pytest.approx(4)


def test_ideal_filter_choi_rank_one():
    p = oracles.proj(oracles.BELL["Psi-"])
    expect = oracles.choi(lambda r: p @ r @ p)
    c = matrix_to_choi(ideal_filter(Basis.COMPUTATIONAL))
    assert np.allclose(c.c, expect, atol=1e-15)
    assert np.linalg.matrix_rank(c.c, tol=1e-12) == 1


def test_choi_matches_oracle_and_round_trips(rng):
    for _ in range(10):
        ops, e = random_process(rng)
        c = matrix_to_choi(e)
        assert np.allclose(c.c, oracles.choi(lambda r: oracles.kraus_apply(ops, r)), atol=1e-13)
        assert np.linalg.norm(choi_to_matrix(c).m - e.m) < 1e-12
        rho = oracles.random_density(rng)
        assert np.allclose(choi_apply(c, rho), oracles.kraus_apply(ops, rho), atol=1e-13)


def test_choi_kraus_index_convention():
    k = np.arange(16, dtype=complex).reshape(4, 4) / 30
    c = kraus_to_choi(KrausSet((k,))).c.reshape(4, 4, 4, 4)
    for i in range(4):
        for j in range(4):
            e = np.zeros((4, 4))
            e[i, j] = 1
            assert np.allclose(c[:, i, :, j], k @ e @ k.conj().T)


def test_choi_to_kraus_ideal_filter():
    k = choi_to_kraus(matrix_to_choi(ideal_filter(Basis.COMPUTATIONAL)))
    assert len(k) == 1
    op = k.operators[0]
    target = oracles.proj(oracles.BELL["Psi-"])
    phase = np.vdot(op.ravel(), target.ravel())
    assert abs(abs(phase) - 1) < 1e-12
    assert np.allclose(op * phase, target, atol=1e-12)


def test_choi_to_kraus_unitary(rng):
    u = oracles.random_unitary(rng)
    k = choi_to_kraus(matrix_to_choi(unitary_superop(u)))
    assert len(k) == 1
    op = k.operators[0]
    phase = np.vdot(op.ravel(), u.ravel()) / 4
    assert abs(abs(phase) - 1) < 1e-12
    assert np.allclose(op * phase, u, atol=1e-12)


def test_choi_to_kraus_reassembles(rng):
    for n_ops in (1, 2, 5, 16):
        _, e = random_process(rng, n_ops)
        c = matrix_to_choi(e)
        k = choi_to_kraus(c)
        assert len(k) == n_ops
        w = k.weights
        assert np.all(np.diff(w) <= 0)
        assert np.linalg.norm(kraus_to_choi(k).c - c.c) < 1e-8
        s = sum(op.conj().T @ op for op in k.operators)
        assert np.linalg.eigvalsh(np.eye(4) - s).min() > -1e-8
        assert np.linalg.norm(kraus_to_matrix(k).m - e.m) < 1e-10


def test_choi_to_kraus_rejects_non_cp():
    m = -identity().m  # the negated identity is not CP
    with pytest.raises(NotCompletelyPositiveError):
        choi_to_kraus(matrix_to_choi(SuperMatrix(m)))


def test_choi_physicality_checks(rng):
    _, e = random_process(rng)
    c = matrix_to_choi(e)
    assert c.is_psd() and c.is_trace_nonincreasing()
    assert e.is_cp() and e.is_trace_nonincreasing()
    assert not SuperMatrix(2 * identity().m).is_trace_nonincreasing()
    assert np.allclose(c.partial_trace_output(), (sum(k.conj().T @ k for k in choi_to_kraus(c).operators)).T)


# -- phase diagnosis --------------------------------------------------------------------


def kraus_of_projector(psi):
    return KrausSet((oracles.proj(psi),))


@pytest.mark.parametrize(
    "psi, phi",
    [
        (oracles.BELL["Psi-"], 0.0),
        (psi_minus_phi(0.84 * np.pi), 0.84 * np.pi),
        (oracles.BELL["Psi+"], np.pi),
    ],
)
def test_leading_projector_phase_examples(psi, phi):
    diag = leading_projector_phase(kraus_of_projector(psi))
    assert abs(np.angle(np.exp(1j * (diag.phi - phi)))) < 1e-12
    assert diag.weight == pytest.approx(1.0, abs=1e-12)


def test_leading_projector_phase_range():
    for phi in np.linspace(-np.pi + 0.01, np.pi, 17):
        got = leading_projector_phase(kraus_of_projector(psi_minus_phi(phi))).phi
        assert -np.pi < got <= np.pi
        assert got == pytest.approx(phi, abs=1e-12)


def test_leading_projector_phase_refuses_off_span():
    with pytest.raises(DiagnosisError) as err:
        leading_projector_phase(kraus_of_projector(oracles.BELL["Phi+"]))
    assert err.value.weight < 0.9


def test_leading_projector_phase_refuses_product_state():
    with pytest.raises(DiagnosisError):
        leading_projector_phase(kraus_of_projector(oracles.ket2("HV")))


def test_leading_projector_phase_refuses_without_dominant_operator():
    ops = (oracles.proj(oracles.BELL["Psi-"]), 0.9 * oracles.proj(oracles.BELL["Psi+"]))
    with pytest.raises(DiagnosisError, match="dominant"):
        leading_projector_phase(KrausSet(ops))


# -- phase shifter and repair -----------------------------------------------------------------


def test_phase_shifter_zero_is_identity(rng):
    _, e = random_process(rng)
    assert np.allclose(conjugate_by_phase_shifter(e, 0.0).m, e.m, atol=1e-15)


def test_phase_shifter_matches_oracle(rng):
    ops, e = random_process(rng)
    phi = 1.1
    u = np.diag([1, 1, np.exp(-1j * phi), 1])

    def shifted(r):
        return u.conj().T @ oracles.kraus_apply(ops, u @ r @ u.conj().T) @ u

    assert np.allclose(conjugate_by_phase_shifter(e, phi).m, oracles.superop_matrix(shifted), atol=1e-13)


def test_repair_twisted_projector():
    phi0 = 0.84 * np.pi
    e = projector_map(psi_minus_phi(phi0))
    fixed = repair(e, phi0).in_basis(Basis.BELL).m
    expect = np.zeros((16, 16))
    expect[0, 0] = 1
    assert np.max(np.abs(fixed - expect)) < 1e-12
    # the same repair through the explicit shifter needs the opposite sign
    assert np.allclose(conjugate_by_phase_shifter(e, -phi0).m, repair(e, phi0).m)


def test_phase_shifter_preserves_cp_and_singular_values(rng):
    for _ in range(5):
        _, e = random_process(rng)
        phi = rng.uniform(-np.pi, np.pi)
        e2 = conjugate_by_phase_shifter(e, phi)
        assert e.is_cp() and e2.is_cp()
        assert np.allclose(np.linalg.svd(e2.m, compute_uv=False), np.linalg.svd(e.m, compute_uv=False), atol=1e-12)


# -- compose and normalize -------------------------------------------------------------------


def test_compose_with_identity(rng):
    _, e = random_process(rng)
    assert np.array_equal(compose(identity(), e).m, e.m)
    assert np.array_equal(compose(e, identity()).m, e.m)


def test_compose_unitary_inverse(rng):
    u = oracles.random_unitary(rng)
    e = compose(unitary_superop(u), unitary_superop(u.conj().T))
    assert np.max(np.abs(e.m - np.eye(16))) < 1e-12


def test_compose_order(rng):
    ops1, e1 = random_process(rng)
    ops2, e2 = random_process(rng)
    rho = oracles.random_density(rng)
    want = oracles.kraus_apply(ops2, oracles.kraus_apply(ops1, rho))
    assert np.allclose(apply_matrix(compose(e2, e1), rho), want, atol=1e-13)


def test_compose_basis_mismatch():
    with pytest.raises(ValueError):
        compose(identity(Basis.BELL), identity())


def test_normalize_examples():
    ideal = ideal_filter()
    assert np.allclose(normalize_superoperator(ideal).m, ideal.m, atol=1e-15)
    assert np.allclose(normalize_superoperator(SuperMatrix(2 * ideal.m, Basis.BELL)).m, ideal.m, atol=1e-15)
    with pytest.raises(ValueError, match="degenerate"):
        normalize_superoperator(SuperMatrix(np.zeros((16, 16))))


def test_normalize_pins_mixed_trace(rng):
    _, e = random_process(rng)
    out = apply_matrix(normalize_superoperator(e), np.eye(4) / 4)
    assert np.trace(out).real == pytest.approx(0.25, abs=1e-14)


def test_superop_from_function_is_linear(rng):
    ops, e = random_process(rng)
    f = superop_from_function(lambda r: oracles.kraus_apply(ops, r))
    assert np.array_equal(f.m, e.m)


# -- serialization ----------------------------------------------------------------------------------


def test_json_round_trips(rng):
    _, e = random_process(rng)
    c = matrix_to_choi(e.in_basis(Basis.BELL))
    k = choi_to_kraus(matrix_to_choi(e))
    for obj in (e, c, k):
        back = superop_from_json(json.loads(json.dumps(superop_to_json(obj))))
        assert type(back) is type(obj)
        assert back.basis == obj.basis
    assert np.array_equal(superop_from_json(superop_to_json(e)).m, e.m)
    assert np.array_equal(superop_from_json(superop_to_json(c)).c, c.c)
    back_k = superop_from_json(superop_to_json(k))
    assert all(np.array_equal(a, b) for a, b in zip(back_k.operators, k.operators))


def test_json_rejects_unknown_form():
    with pytest.raises(ValueError):
        superop_from_json({"form": "ptm", "basis": "bell"})


def test_choi_type_checks():
    with pytest.raises(ValueError):
        ChoiMatrix(np.triu(np.ones((16, 16))))
