import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from quincunx.hilbert import LatticeParams, ModeSpace, coherent_state_truncated, fock_state, phase_state
from quincunx.measurement import (
    GridError,
    default_grid,
    hermite_functions,
    homodyne_injection_readout,
    phase_distribution,
    qpd,
    quadrature_moments,
    reduce_field,
    rotate_quadrature,
    rw_variance_stderr,
    variance_curve,
)
from quincunx.walk import WalkConfig, coin_state, run_ideal_walk, sample_rw_displacements

from oracles import (
    coin_resolved_probs,
    hermite_closed_form,
    partial_trace_coin,
    phase_vec,
    random_density,
)

PLUS, MINUS = coin_state("+"), coin_state("-")


class TestReduceField:
    def test_product_state(self, space8):
        rho_f = random_density(8, np.random.default_rng(0))
        joint = np.kron(rho_f, np.outer(PLUS, PLUS))
        assert np.array_equal(reduce_field(joint), rho_f)

    def test_cross_terms_vanish(self):
        v = (np.kron(phase_vec(8, 0), PLUS) + np.kron(phase_vec(8, 1), MINUS)) / math.sqrt(2)
        out = reduce_field(np.outer(v, v.conj()))
        p0, p1 = phase_vec(8, 0), phase_vec(8, 1)
        ref = 0.5 * (np.outer(p0, p0.conj()) + np.outer(p1, p1.conj()))
        assert np.abs(out - ref).max() < 1e-15

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_loop_partial_trace(self, seed):
        rho = random_density(24, np.random.default_rng(seed))
        out = reduce_field(rho)
        assert abs(np.trace(out) - np.trace(rho)) < 1e-12
        assert np.abs(out - partial_trace_coin(rho, 12)).max() < 1e-15
        assert np.linalg.eigvalsh(out).min() > -1e-12


class TestPhaseDistribution:
    def test_phase_eigenstate(self, space8):
        p = phase_distribution(phase_state(space8, 3).projector(), space8).probabilities
        expected = np.zeros(8)
        expected[3] = 1
        assert np.abs(p - expected).max() < 1e-12

    @pytest.mark.parametrize("n", [4, 7])
    def test_matches_coin_resolved_sum(self, space8, n):
        psi = run_ideal_walk(WalkConfig(LatticeParams(1.0, 8), n), phase_state(space8, 0))[-1]
        p = phase_distribution(reduce_field(np.outer(psi, psi.conj())), space8).probabilities
        assert np.abs(p - coin_resolved_probs(psi, 8)).max() < 1e-12

    def test_coherent_state_peaks_at_origin(self, space31, coherent5):
        p = phase_distribution(coherent5.projector(), space31).probabilities
        assert np.argmax(p) == 0
        assert p.sum() == pytest.approx(1, abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_normalized(self, seed):
        space = ModeSpace(13)
        p = phase_distribution(random_density(13, np.random.default_rng(seed)), space).probabilities
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1, abs=1e-10)


class TestHermite:
    def test_ground_state_at_origin(self):
        assert hermite_functions([0.0], 1)[0, 0] == pytest.approx(math.pi**-0.25, abs=1e-12)

    def test_first_excited_odd(self):
        assert hermite_functions([0.0], 2)[1, 0] == 0.0

    def test_grid_orthonormal(self):
        x = np.linspace(-12, 12, 1201)
        phi = hermite_functions(x, 31)
        gram = trapezoid(phi[:, None, :] * phi[None, :, :], x, axis=-1)
        assert np.abs(gram - np.eye(31)).max() < 1e-6

    @pytest.mark.parametrize("n", [0, 1, 5, 17, 30])
    def test_closed_form(self, n):
        x = np.linspace(-9, 9, 181)
        assert np.abs(hermite_functions(x, 31)[n] - hermite_closed_form(x, n)).max() < 1e-10

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            hermite_functions([0.0], 65)


class TestQPD:
    @pytest.mark.parametrize("angle", [0.0, 0.7, np.pi / 2])
    def test_vacuum(self, space31, angle):
        q = qpd(fock_state(space31, 0).projector(), angle, None, space31)
        assert q.mean == pytest.approx(0, abs=1e-12)
        assert q.variance == pytest.approx(0.5, abs=1e-6)
        gauss = np.exp(-q.grid**2) / math.sqrt(math.pi)
        assert np.abs(q.density - gauss).max() < 1e-12

    def test_coherent_marginals_when_truncation_negligible(self):
        # d=64 holds alpha=5 to ~1e-9; exact coherent marginals apply.
        space = ModeSpace(64)
        rho = coherent_state_truncated(space, 5.0).projector()
        q = qpd(rho, np.pi / 2, None, space)
        assert q.mean == pytest.approx(0, abs=1e-3)
        assert q.variance == pytest.approx(0.5, abs=5e-3)
        q0 = qpd(rho, 0.0, None, space)
        assert q0.mean == pytest.approx(math.sqrt(2) * 5, abs=1e-2)

    def test_truncated_coherent_d31(self, space31, coherent5):
        # Frozen from the operator-moment path; grid integration cross-checks below.
        q = qpd(coherent5.projector(), np.pi / 2, None, space31)
        assert q.mean == pytest.approx(0, abs=1e-12)
        assert q.variance == pytest.approx(2.0780951668442, rel=1e-10)

    def test_narrow_grid_rejected(self, space31, coherent5):
        with pytest.raises(GridError):
            qpd(coherent5.projector(), 0.0, np.linspace(-3, 3, 301), space31)

    def test_default_grid_covers_top_level(self, space31):
        g = default_grid(space31)
        assert g[-1] >= math.sqrt(2 * 30 + 1) + 5
        assert g[0] == -g[-1]
        assert default_grid(ModeSpace(8))[-1] == 12.0

    def test_rotation_consistency(self, space31, coherent5):
        rho = coherent5.projector()
        a = 0.9
        q_a = qpd(rho, a, None, space31)
        q_0 = qpd(rotate_quadrature(rho, a, space31), 0.0, None, space31)
        assert np.abs(q_a.density - q_0.density).max() < 1e-12
        assert q_a.variance == pytest.approx(q_0.variance, abs=1e-12)

    def test_invariants_on_walk_states(self, reference_walks, space31):
        for key in ("qw", "rw"):
            for m, rho in enumerate(reference_walks[key]):
                q = qpd(rho, np.pi / 2, None, space31)
                assert q.density.min() > -1e-10
                assert trapezoid(q.density, q.grid) == pytest.approx(1, abs=1e-4)
                gm, gv = q.grid_moments()
                assert gv == pytest.approx(q.variance, rel=1e-3)
                assert gm == pytest.approx(q.mean, abs=1e-3 * max(1.0, abs(q.mean)))

    def test_invariants_on_lossy_states(self, reference_walks, space31):
        for rho in reference_walks["open"][0.05]:
            q = qpd(reduce_field(rho), 0.3, None, space31)
            assert q.density.min() > -1e-10
            assert trapezoid(q.density, q.grid) == pytest.approx(1, abs=1e-4)
            assert q.grid_moments()[1] == pytest.approx(q.variance, rel=1e-3)


class TestPhaseQuadratureRelation:
    def test_small_angle_relation_on_initial_state(self, space31, coherent5):
        rho = coherent5.projector()
        p = phase_distribution(rho, space31).probabilities
        th = np.angle(np.exp(2j * np.pi * np.arange(31) / 31))
        var_theta = np.sum(p * th**2) - np.sum(p * th) ** 2
        n_bar = np.trace(space31.number_op @ rho).real
        v = quadrature_moments(rho, np.pi / 2, space31)[1]
        assert n_bar * var_theta == pytest.approx(v, rel=0.2)

    def test_rotated_coherent_relation_over_rw_steps(self, reference_walks, space31):
        # p = sqrt(2)|alpha| sin(theta) for a rotated coherent state: Var(p) ~ 1/2 + 2 n_bar <sin^2>.
        th = 2 * np.pi * np.arange(31) / 31
        for rho in reference_walks["rw"][:11]:
            p = phase_distribution(rho, space31).probabilities
            n_bar = np.trace(space31.number_op @ rho).real
            pred = 0.5 + 2 * n_bar * np.sum(p * np.sin(th) ** 2)
            assert quadrature_moments(rho, np.pi / 2, space31)[1] == pytest.approx(pred, rel=0.2)


class TestHomodyne:
    def test_destructive_minus_alpha(self, space31):
        # |-alpha>_d = R(pi)|alpha>_d
        psi = coherent_state_truncated(space31, 2.0).amplitudes * np.exp(1j * np.pi * space31.levels)
        n = homodyne_injection_readout(np.outer(psi, psi.conj()), 2.0, [0.0], space31)
        assert n[0] <= 0.05

    def test_constructive_and_opposite(self, space31):
        rho = coherent_state_truncated(space31, 2.0).projector()
        n0, npi = homodyne_injection_readout(rho, 2.0, [0.0, np.pi], space31)
        assert n0 == pytest.approx(16, abs=0.2)
        assert npi == pytest.approx(0, abs=0.05)

    def test_phase_scan_follows_coherent_addition(self, space31):
        rho = coherent_state_truncated(space31, 2.0).projector()
        phis = np.linspace(0, 2 * np.pi, 9)
        n = homodyne_injection_readout(rho, 2.0, phis, space31)
        assert np.allclose(n, np.abs(2.0 + 2.0 * np.exp(1j * phis)) ** 2, atol=0.2)


class TestVarianceCurve:
    def test_series_shape_and_values(self, reference_walks, space31):
        curve = variance_curve(reference_walks["rw"], space=space31)
        assert [m for m, _ in curve] == list(range(16))
        assert curve[3][1] == pytest.approx(
            quadrature_moments(reference_walks["rw"][3], np.pi / 2, space31)[1])

    def test_empty(self):
        with pytest.raises(ValueError):
            variance_curve([])

    def test_stderr_shrinks(self, coherent5, space31):
        disp = sample_rw_displacements(8, 4000, seed=2)
        se_full = rw_variance_stderr(coherent5.amplitudes, disp, np.pi / 2, space31)
        se_part = rw_variance_stderr(coherent5.amplitudes, disp[:1000], np.pi / 2, space31)
        assert se_full[0] < 1e-12
        assert np.all(se_full[1:] > 0)
        assert np.allclose(se_part[1:] / se_full[1:], 2, rtol=0.15)
