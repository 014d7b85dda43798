import itertools

import numpy as np
import pytest

from entcert.channel import KrausChannel, apply_extended, channels_equal, identity_channel, unitary_channel, validate
from entcert.correct import (
    Method,
    approx_report,
    certify,
    certify_local,
    knill_laflamme_residual,
    optimized_recovery,
    petz_recovery,
    re_output,
    recover_local,
    synthesize_recovery,
    verify_recovery,
)
from entcert.errors import NotCorrectable
from entcert.families import (
    bell_state, code_instance, dephasing, depolarizing, noisy_instance, repetition_bitflip,
    repetition_state, two_sided_instance,
)
from entcert.linalg import PureState, SystemShape, mutual_information, partial_trace
from entcert.optimize import OptimizerConfig
from entcert.sampling import random_kraus, random_unitary

from conftest import h2

FAST = OptimizerConfig(restarts=4)
BELL = bell_state()


def test_re_output_examples():
    re = re_output(identity_channel(2), BELL)
    assert re.shape.labels == ("R", "E") and re.shape.dims == (2, 1)
    assert np.allclose(re.matrix, np.eye(2) / 2)
    assert abs(mutual_information(re_output(depolarizing(1.0), BELL), "R") - 2) < 1e-9
    re = re_output(dephasing(0.5), BELL)
    assert abs(mutual_information(re, "R") - 1) < 1e-9
    # classical correlations: the state is diagonal in some product basis, so it has no coherences after dephasing E
    assert re.shape.dims == (2, 2)


def test_re_output_product_for_unitary(rng):
    re = re_output(unitary_channel(random_unitary(2, rng)), BELL)
    assert abs(mutual_information(re, "R")) < 1e-12 if re.shape.dims[1] > 1 else True


def test_certify_examples():
    c = certify(identity_channel(2), BELL, cfg=FAST)
    assert c.correctable and abs(c.coherent_info - 1) < 1e-12
    assert abs(c.eof_value - 1) < 1e-9 and abs(c.s_q - 1) < 1e-12
    c = certify(depolarizing(1.0), BELL, cfg=FAST)
    assert not c.correctable
    assert abs(c.coherent_info + 1) < 1e-12 and c.eof_value < 1e-6
    assert abs(c.re_mutual_info - 2) < 1e-9
    for p in (0.01, 0.3, 0.99):
        c = certify(repetition_bitflip(p), repetition_state(), cfg=FAST)
        assert c.correctable and c.kl_residual < 1e-12
        assert c.coherent_info <= c.eof_value + 1e-6 <= c.s_q + 2e-6


def test_certify_dimension_mismatch():
    with pytest.raises(ValueError):
        certify(identity_channel(3), BELL)


def test_knill_laflamme_residual_repetition():
    rho_q = partial_trace(repetition_state(), "Q")
    assert knill_laflamme_residual(repetition_bitflip(0.3), rho_q) < 1e-12
    assert knill_laflamme_residual(depolarizing(0.5), partial_trace(BELL, "Q")) > 0.1


def test_synthesize_recovery_examples(rng):
    rec = synthesize_recovery(identity_channel(2), BELL)
    assert rec.method is Method.SCHMIDT_BLOCK and channels_equal(rec.channel, identity_channel(2))
    u = random_unitary(2, rng)
    rec = synthesize_recovery(unitary_channel(u), BELL)
    assert channels_equal(rec.channel, unitary_channel(u.conj().T))
    ch = repetition_bitflip(0.3)
    rec = synthesize_recovery(ch, repetition_state())
    validate(rec.channel)
    assert verify_recovery(ch, rec, repetition_state()) >= 1 - 1e-9


def test_synthesize_recovery_refuses_noisy_input():
    with pytest.raises(NotCorrectable):
        synthesize_recovery(depolarizing(0.3), BELL)


def test_petz_recovery_examples():
    rho_q = partial_trace(BELL, "Q")
    rec = petz_recovery(identity_channel(2), rho_q)
    assert channels_equal(rec.channel, identity_channel(2))
    ch = repetition_bitflip(0.3)
    psi = repetition_state()
    rec = petz_recovery(ch, partial_trace(psi, "Q"))
    validate(rec.channel)
    f_petz = verify_recovery(ch, rec, psi)
    f_block = verify_recovery(ch, synthesize_recovery(ch, psi), psi)
    assert f_petz >= 1 - 1e-9 and abs(f_petz - f_block) < 1e-9
    assert verify_recovery(depolarizing(1.0), petz_recovery(depolarizing(1.0), rho_q), BELL) < 1


def test_verify_recovery_examples(rng):
    assert abs(verify_recovery(identity_channel(2), identity_channel(2), BELL) - 1) < 1e-12
    dep = depolarizing(1.0)
    best = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        rec = KrausChannel(tuple(random_kraus(2, 2, n, rng)), 2, 2)
        best = max(best, verify_recovery(dep, rec, BELL))
    _, f_opt = optimized_recovery(dep, BELL, FAST)
    assert best <= 0.25 + 1e-9 and f_opt <= 0.25 + 1e-9
    assert abs(f_opt - 0.25) < 1e-6
    with pytest.raises(ValueError):
        verify_recovery(dep, identity_channel(3), BELL)


def test_approx_report_examples():
    r = approx_report(identity_channel(2), BELL, FAST)
    assert abs(r.epsilon) < 1e-12 and r.fidelity_bound == 1.0 and abs(r.achieved_fidelity - 1) < 1e-12
    r = approx_report(dephasing(0.01), BELL, FAST)
    assert abs(r.epsilon - h2(0.01)) < 1e-9 and abs(r.epsilon - 0.0807931) < 1e-6
    assert abs(r.fidelity_bound - (1 - 2 * np.sqrt(h2(0.01)))) < 1e-9 and abs(r.fidelity_bound - 0.43152) < 1e-4
    assert r.bound_met and r.achieved_fidelity > r.fidelity_bound
    r = approx_report(dephasing(0.5), BELL, FAST)
    assert abs(r.epsilon - 1) < 1e-9 and r.fidelity_bound == 0.0 and r.bound_met
    assert 0 <= r.achieved_fidelity <= 1


def test_approx_report_monotone_in_noise():
    fids = []
    for p in (0.1, 0.01, 0.001):
        r = approx_report(dephasing(p), BELL, FAST)
        assert r.achieved_fidelity > r.fidelity_bound
        fids.append(r.achieved_fidelity)
    assert fids[0] <= fids[1] <= fids[2]


def test_certify_local_examples(rng):
    idc = identity_channel(2)
    assert certify_local(idc, idc, BELL, cfg=FAST).correctable
    u, v = unitary_channel(random_unitary(2, rng)), unitary_channel(random_unitary(2, rng))
    assert certify_local(u, v, BELL, cfg=FAST).correctable
    assert not certify_local(depolarizing(0.5), idc, BELL, cfg=FAST).correctable


def test_recover_local_examples(rng):
    idc = identity_channel(2)
    rr, rq = recover_local(idc, idc, BELL)
    assert channels_equal(rr.channel, idc) and channels_equal(rq.channel, idc)
    ur, uq = random_unitary(2, rng), random_unitary(2, rng)
    rr, rq = recover_local(unitary_channel(ur), unitary_channel(uq), BELL)
    assert channels_equal(rr.channel, unitary_channel(ur.conj().T))
    assert channels_equal(rq.channel, unitary_channel(uq.conj().T))
    psi = repetition_state()
    noise_r = unitary_channel(random_unitary(2, rng))
    rr, rq = recover_local(noise_r, repetition_bitflip(0.3), psi)
    back = apply_extended(rq.channel, apply_extended(rr.channel, apply_extended(
        repetition_bitflip(0.3), apply_extended(noise_r, psi.density(), "R"), "Q"), "R"), "Q")
    assert np.vdot(psi.amplitudes, back.matrix @ psi.amplitudes).real >= 1 - 1e-8
    with pytest.raises(NotCorrectable):
        recover_local(depolarizing(0.5), idc, BELL)


def test_local_maps_commute_in_any_interleaving(rng):
    for _ in range(3):
        ch_r, ch_q, psi = two_sided_instance(rng)
        rec_r, rec_q = recover_local(ch_r, ch_q, psi)
        maps = {"Er": (ch_r, "R"), "Eq": (ch_q, "Q"), "Dr": (rec_r.channel, "R"), "Dq": (rec_q.channel, "Q")}
        outputs = []
        for order in itertools.permutations(maps):
            # each side must see its noise before its recovery
            if order.index("Er") > order.index("Dr") or order.index("Eq") > order.index("Dq"):
                continue
            rho = psi.density()
            for key in order:
                c, lab = maps[key]
                rho = apply_extended(c, rho, lab)
            outputs.append(rho.matrix)
        assert len(outputs) == 6
        for m in outputs[1:]:
            assert np.max(np.abs(m - outputs[0])) < 1e-10


def test_small_corpus_criteria_agree():
    rng = np.random.default_rng(7)
    for _ in range(6):
        inst = code_instance(rng)
        c = certify(inst.channel, inst.input, cfg=FAST)
        assert c.correctable and c.re_mutual_info < 1e-6 and c.kl_residual < 1e-7
        for rec in (synthesize_recovery(inst.channel, inst.input),
                    petz_recovery(inst.channel, partial_trace(inst.input, "Q"))):
            assert verify_recovery(inst.channel, rec, inst.input) >= 1 - 1e-8
    for _ in range(6):
        inst = noisy_instance(rng)
        c = certify(inst.channel, inst.input, cfg=FAST, skip_eof=True)
        assert not c.correctable and c.re_mutual_info >= 1e-6 and c.kl_residual >= 1e-7
        with pytest.raises(NotCorrectable):
            synthesize_recovery(inst.channel, inst.input)


def test_reference_label_may_come_second():
    psi = PureState(BELL.amplitudes, SystemShape((2, 2), ("Q", "R")))
    c = certify(dephasing(0.2), psi, target="Q", cfg=FAST)
    assert abs(c.coherent_info - (1 - h2(0.2))) < 1e-9
