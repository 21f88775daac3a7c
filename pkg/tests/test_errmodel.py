import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpvlab import errmodel, exact_search
from qpvlab.errmodel import (
    DecoderConflictError,
    balanced_check,
    d2_piecewise_p_err,
    ddc_satisfied,
    multibase_d1_p_err,
    p_err,
    pgm_p_err,
    synthesize_decoder,
    teleport_d2_p_err,
)
from qpvlab.qcore import (
    AttackStrategy,
    H,
    I2,
    CNOT,
    ProtocolSpec,
    kron,
    output_states,
    rotation_matrix,
    teleport_attack,
)

from conftest import random_unitary


def identity_strategy(d):
    return AttackStrategy(d=d, u=np.eye(d), v=np.eye(2 * d))


def d2_exact_strategy():
    return AttackStrategy(d=2, u=H, v=kron(H, I2) @ CNOT)


class TestPErr:
    def test_classical_protocol_identity(self):
        report = p_err(identity_strategy(2), ProtocolSpec.single(0.0))
        assert report.p_err == 0.0
        assert report.is_exact

    def test_identity_at_quarter_pi(self):
        # only the rotated basis contributes, min{1/2, 1/2} on its support
        for d in (1, 2, 3):
            report = p_err(identity_strategy(d), ProtocolSpec.single(math.pi / 4))
            assert abs(report.p_err - 0.25) < 1e-12

    def test_identity_oracle_brute_force(self, rng):
        # independent recomputation straight from the definition
        d, theta = 3, 0.77
        strategy = AttackStrategy(
            d=d, u=random_unitary(rng, d), v=random_unitary(rng, 2 * d)
        )
        protocol = ProtocolSpec.single(theta)
        table = output_states(strategy, protocol)
        total = 0.0
        for b in range(2):
            for s in range(d):
                for u in range(2 * d):
                    probs = [
                        abs(table.amplitudes[b, x, s, u]) ** 2 for x in (0, 1)
                    ]
                    total += min(probs)
        expect = total / (2 * 2 * d)
        assert abs(p_err(strategy, protocol).p_err - expect) < 1e-12

    def test_d2_exact_strategy(self):
        report = p_err(d2_exact_strategy(), ProtocolSpec.single(math.pi / 4))
        assert report.p_err < 1e-12

    def test_d4_explicit_solution(self):
        d, theta, u, v = exact_search.EXPLICIT_SOLUTIONS["d4-first"]()
        strategy = AttackStrategy(d=d, u=u, v=v)
        assert p_err(strategy, ProtocolSpec.single(theta)).p_err < 1e-12

    def test_range_bounds(self, rng):
        for _ in range(20):
            d = int(rng.integers(1, 4))
            strategy = AttackStrategy(
                d=d, u=random_unitary(rng, d), v=random_unitary(rng, 2 * d)
            )
            value = p_err(strategy, ProtocolSpec.single(rng.uniform(0, 1.5))).p_err
            assert 0.0 <= value <= 0.5

    def test_json_dict(self):
        report = p_err(identity_strategy(2), ProtocolSpec.single(0.0))
        d = report.to_json_dict()
        assert d["p_err"] == 0.0 and d["is_exact"] is True


class TestDdc:
    def test_identity_at_zero(self):
        ok, worst = ddc_satisfied(identity_strategy(2), ProtocolSpec.single(0.0))
        assert ok and worst < 1e-15

    def test_identity_at_quarter_pi(self):
        ok, worst = ddc_satisfied(
            identity_strategy(2), ProtocolSpec.single(math.pi / 4)
        )
        assert not ok
        assert abs(worst - 0.5) < 1e-12

    def test_d6_explicit(self):
        d, theta, u, v = exact_search.EXPLICIT_SOLUTIONS["d6"]()
        strategy = AttackStrategy(d=d, u=u, v=v)
        ok, _ = ddc_satisfied(strategy, ProtocolSpec.single(theta), tol=1e-10)
        assert ok

    def test_exactness_iff_ddc(self, rng):
        # a strategy is exact exactly when every outcome pins down x
        strategy = AttackStrategy(
            d=2, u=random_unitary(rng, 2), v=random_unitary(rng, 4)
        )
        protocol = ProtocolSpec.single(0.5)
        ok, _ = ddc_satisfied(strategy, protocol)
        assert ok == (p_err(strategy, protocol).p_err < 1e-12)


class TestDecoder:
    def test_classical_readout(self):
        decoder = synthesize_decoder(identity_strategy(3), ProtocolSpec.single(0.0))
        for b in range(2):
            for s in range(3):
                for u in range(6):
                    if decoder.reachable[b, s, u]:
                        assert decoder(b, s, u) == u // 3

    def test_teleport_decoder_replay(self):
        strategy = teleport_attack(math.pi / 4)
        protocol = ProtocolSpec.single(math.pi / 4)
        decoder = synthesize_decoder(strategy, protocol)
        table = output_states(strategy, protocol)
        p = table.probabilities()
        for b in range(2):
            for x in range(2):
                for s in range(2):
                    for u in range(4):
                        if p[b, x, s, u] > 1e-12:
                            assert decoder(b, s, u) == x

    def test_conflict_raises(self):
        with pytest.raises(DecoderConflictError) as exc:
            synthesize_decoder(identity_strategy(2), ProtocolSpec.single(math.pi / 4))
        assert exc.value.conflicts

    def test_unreachable_raises(self):
        decoder = synthesize_decoder(identity_strategy(2), ProtocolSpec.single(0.0))
        unreachable = np.argwhere(~decoder.reachable)
        b, s, u = unreachable[0]
        with pytest.raises(KeyError):
            decoder(b, s, u)


class TestBalanced:
    def test_explicit_solution_balanced(self):
        d, theta, u, v = exact_search.EXPLICIT_SOLUTIONS["d4-first"]()
        strategy = AttackStrategy(d=d, u=u, v=v)
        assert balanced_check(strategy, ProtocolSpec.single(theta)) < 1e-10

    def test_identity_unbalanced(self):
        got = balanced_check(identity_strategy(2), ProtocolSpec.single(math.pi / 4))
        assert abs(got - 0.5) < 1e-12


class TestClosedForms:
    def test_pgm_curve(self):
        assert pgm_p_err(0.0) == 0.0
        assert abs(pgm_p_err(math.pi / 8) - math.sin(math.pi / 16) ** 2) < 1e-15

    def test_teleport_curve_zero_at_quarter_pi(self):
        assert abs(teleport_d2_p_err(math.pi / 4)) < 1e-15

    def test_piecewise_crossover(self):
        # the two branches agree at theta = pi/8
        t = math.pi / 8
        assert abs(pgm_p_err(t) - teleport_d2_p_err(t)) < 1e-15
        assert d2_piecewise_p_err(0.1) == pgm_p_err(0.1)
        assert d2_piecewise_p_err(0.7) == teleport_d2_p_err(0.7)

    def test_multibase_values(self):
        # n=2 coincides with the PGM value at pi/4
        assert abs(multibase_d1_p_err(2) - pgm_p_err(math.pi / 4)) < 1e-15
        assert abs(multibase_d1_p_err(6) - 0.17802472457031054) < 1e-12

    def test_multibase_rejects_small_n(self):
        with pytest.raises(ValueError):
            multibase_d1_p_err(1)

    @given(st.integers(2, 64))
    def test_multibase_monotone_to_half(self, n):
        assert 0 < multibase_d1_p_err(n) < multibase_d1_p_err(n + 1) < 0.5
