import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnmimo.harness import load_tuned_lif, random_instance
from snnmimo.qubo import QuboInstance, enumerate_bits, objective
from snnmimo.snn import (
    LifParams,
    NetworkState,
    SpikeRaster,
    attempt_noise,
    attempt_rng,
    best_of_attempts,
    decode,
    detect,
    init_network,
    initial_state,
    run,
    step,
)


def instance(Q, quad_diag=None):
    Q = np.asarray(Q, float)
    if quad_diag is None:
        quad_diag = np.full(len(Q), np.nan)
    return QuboInstance(Q, 0.0, math.sqrt(2), np.asarray(quad_diag, float))


def state(n, u=0.0, i=0.0):
    return NetworkState(np.full(n, float(u)), np.full(n, float(i)), np.zeros(n, dtype=bool))


class TestParams:
    def test_defaults(self):
        p = LifParams()
        assert (p.dt, p.tau, p.R, p.u_th, p.u_rst, p.T) == (1.0, 10.0, 1.0, 1.0, 0.0, 200)
        assert p.i0 == 2.0
        assert p.R * p.i0 > p.u_th

    @pytest.mark.parametrize(
        "kw",
        [
            {"dt": 10.0},
            {"dt": 0.0},
            {"u_th": 0.0},
            {"T": 0},
            {"decode_window": 0.0},
            {"decode_window": 1.5},
            {"sigma_v_sq": -1.0},
            {"diagonal": "bogus"},
            {"noise_mode": "bogus"},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            LifParams(**kw)

    def test_dict_round_trip(self):
        p = load_tuned_lif(multi_attempt=True)
        assert LifParams.from_dict(p.to_dict()) == p
        with pytest.raises(ValueError):
            LifParams.from_dict({"bogus": 1})


class TestInitNetwork:
    def test_zero(self):
        net = init_network(instance(np.zeros((3, 3))))
        np.testing.assert_array_equal(net.weights, 0)
        np.testing.assert_array_equal(net.coupling, 0)

    def test_negated_identity(self):
        net = init_network(instance(-2 * np.eye(2)), normalize=False)
        np.testing.assert_array_equal(net.weights, 2 * np.eye(2))
        np.testing.assert_array_equal(net.coupling, 2 * np.eye(2))

    def test_four_neurons(self):
        Q = np.array([[-3.0, 1, 2, -1], [1, -1, 0.5, 2], [2, 0.5, 4, 1], [-1, 2, 1, -2]])
        net = init_network(instance(Q))
        np.testing.assert_array_equal(net.weights, -Q)
        np.testing.assert_allclose(net.coupling * net.scale, -Q)
        assert net.scale == 4.0

    @pytest.mark.parametrize("diagonal", ["self", "split"])
    def test_energy_preserved_by_diagonal_split(self, diagonal):
        rng = np.random.default_rng(1)
        _, _, inst = random_instance(8, 3, 5.0, rng)
        net = init_network(inst, diagonal)
        bits = enumerate_bits(6).astype(float)
        # network energy of a bit pattern, in QUBO units
        e_net = -(np.einsum("ki,ij,kj->k", bits, net.coupling, bits) + 2 * bits @ net.drive) * net.scale
        np.testing.assert_allclose(e_net, objective(inst, bits), rtol=1e-9, atol=1e-9)

    def test_split_needs_quadratic_diagonal(self):
        with pytest.raises(ValueError):
            init_network(instance(np.eye(2)), "split")


class TestStep:
    def test_first_step_potential(self):
        p = LifParams(u_th=1e9, tau=10.0, R=2.0)
        net = init_network(instance(np.zeros((1, 1))))
        new, spikes = step(net, state(1, u=0.0, i=3.0), p)
        assert new.u[0] == pytest.approx(0.1 * 2.0 * 3.0)
        assert spikes[0] == 0

    def test_fires_at_threshold(self):
        p = LifParams()
        net = init_network(instance(np.zeros((1, 1))))
        # R * I == u == u_th keeps u on the threshold exactly
        new, spikes = step(net, state(1, u=1.0, i=1.0), p)
        assert spikes[0] == 1
        assert new.u[0] == p.u_rst

    def test_just_below_threshold(self):
        p = LifParams()
        net = init_network(instance(np.zeros((1, 1))))
        _, spikes = step(net, state(1, u=np.nextafter(1.0, 0), i=np.nextafter(1.0, 0)), p)
        assert spikes[0] == 0

    def test_constant_current_convergence(self):
        p = LifParams(u_th=1e9, dt=1.0, tau=7.0, R=1.5)
        net = init_network(instance(np.zeros((1, 1))))
        s = state(1, u=0.0, i=2.0)
        prev = -np.inf
        for t in range(1, 400):
            s, _ = step(net, s, p)
            expected = 1.5 * 2.0 * (1 - (1 - 1 / 7) ** t)
            assert s.u[0] == pytest.approx(expected, rel=1e-12, abs=1e-12)
            assert s.u[0] >= prev
            prev = s.u[0]
        assert s.u[0] == pytest.approx(3.0, rel=1e-12)

    def test_spikes_reach_targets_next_step(self):
        # neuron 0 fires, neuron 1 receives -Q_10 one step later
        Q = np.array([[0.0, -0.5], [-0.5, 0.0]])
        p = LifParams(u_th=1.0)
        net = init_network(instance(Q), normalize=False)
        s = NetworkState(np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.zeros(2, bool))
        s, spikes = step(net, s, p)
        assert list(spikes) == [1, 0]
        assert s.i_syn[1] == 0.0
        s, _ = step(net, s, p)
        assert s.i_syn[1] == 0.5

    def test_shape_mismatch(self):
        net = init_network(instance(np.zeros((2, 2))))
        with pytest.raises(ValueError):
            step(net, state(3), LifParams())


class TestRun:
    def test_periodic_firing_without_synapses(self):
        p = LifParams(T=60)
        raster = run(init_network(instance(np.zeros((3, 3)))), p)
        # closed-form first passage of u = R i0 (1 - (1 - dt/tau)^t) over u_th
        period = math.ceil(math.log(1 - p.u_th / (p.R * p.i0)) / math.log(1 - p.dt / p.tau))
        expected = np.zeros(p.T, dtype=np.int8)
        expected[period - 1 :: period] = 1
        for i in range(3):
            np.testing.assert_array_equal(raster.spikes[:, i], expected)

    def test_mutual_inhibition(self):
        Q = np.array([[-2.0, 6.0], [6.0, -1.0]])
        p = LifParams(T=200)
        raster = run(init_network(instance(Q)), p)
        tail = raster.spikes[-50:].sum(axis=0)
        assert np.count_nonzero(tail) <= 1
        assert tail[0] > 0

    def test_single_step_shape(self):
        raster = run(init_network(instance(np.zeros((4, 4)))), LifParams(T=1))
        assert raster.spikes.shape == (1, 4)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        _, _, inst = random_instance(8, 4, 3.0, rng)
        p = load_tuned_lif(multi_attempt=True)
        net = init_network(inst, p.diagonal)
        a = run(net, p, np.random.default_rng(99))
        b = run(net, p, np.random.default_rng(99))
        np.testing.assert_array_equal(a.spikes, b.spikes)

    def test_rng_and_predrawn_noise_agree(self):
        _, _, inst = random_instance(8, 4, 3.0, np.random.default_rng(4))
        p = load_tuned_lif(multi_attempt=True)
        net = init_network(inst, p.diagonal)
        a = run(net, p, attempt_rng(5, 0))
        b = run(net, p, noise=attempt_noise(5, 1, p, 8)[0])
        np.testing.assert_array_equal(a.spikes, b.spikes)

    def test_broadcast_attempts_match_single_runs(self):
        _, _, inst = random_instance(8, 4, 3.0, np.random.default_rng(4))
        p = load_tuned_lif(multi_attempt=True)
        net = init_network(inst, p.diagonal)
        noise = attempt_noise(11, 3, p, 8)
        batch = run(net, p, noise=noise)
        for a in range(3):
            single = run(net, p, noise=noise[a])
            np.testing.assert_array_equal(decode(batch, p)[a], decode(single, p))

    def test_noise_changes_dynamics(self):
        _, _, inst = random_instance(8, 4, 0.0, np.random.default_rng(8))
        base = load_tuned_lif()
        net = init_network(inst, base.diagonal)
        quiet = run(net, base)
        for mode in ("synapse", "neuron"):
            noisy = run(net, base.with_(sigma_v_sq=0.5, noise_mode=mode), np.random.default_rng(0))
            assert not np.array_equal(quiet.spikes, noisy.spikes)

    def test_non_finite_state_is_fatal(self):
        with pytest.raises(FloatingPointError):
            run(init_network(instance(np.zeros((2, 2)))), LifParams(i0=float("inf")))

    def test_current_decay(self):
        # with full decay and no synapses the current vanishes after one step
        p = LifParams(current_decay=0.0, T=20)
        raster = run(init_network(instance(np.zeros((2, 2)))), p)
        assert raster.spikes.sum() == 0


class TestTraces:
    @pytest.fixture
    def traced(self):
        _, _, inst = random_instance(8, 4, 2.0, np.random.default_rng(17))
        p = LifParams(T=120)
        net = init_network(inst)
        return net, p, run(net, p, trace=True)

    def test_threshold_semantics(self, traced):
        _, p, r = traced
        fired = r.spikes.astype(bool)
        assert fired.any()
        assert np.all(r.potentials[fired] >= p.u_th)
        assert np.all(r.potentials[~fired] < p.u_th)

    def test_membrane_recurrence(self, traced):
        net, p, r = traced
        k = p.dt / p.tau
        for i in range(net.n):
            u = p.u_rst
            for t in range(p.T):
                u = u + k * (p.R * r.currents[t, i] - u)
                assert abs(u - r.potentials[t, i]) <= 1e-12 * max(1.0, abs(u))
                if r.spikes[t, i]:
                    u = p.u_rst

    def test_current_accumulation(self, traced):
        net, p, r = traced
        i_prev = np.full(net.n, p.i0)
        prev_spikes = np.zeros(net.n)
        for t in range(p.T):
            expected = i_prev + net.coupling @ prev_spikes + net.drive
            np.testing.assert_allclose(r.currents[t], expected, rtol=1e-12, atol=1e-12)
            i_prev, prev_spikes = r.currents[t], r.spikes[t].astype(float)

    def test_reset_after_spike(self):
        _, _, inst = random_instance(8, 4, 2.0, np.random.default_rng(17))
        p = LifParams(T=80)
        net = init_network(inst)
        s = initial_state(net, p)
        seen = 0
        for _ in range(p.T):
            s, spikes = step(net, s, p)
            fired = spikes.astype(bool)
            seen += fired.sum()
            assert np.all(s.u[fired] == p.u_rst)
        assert seen > 0


class TestDecode:
    def test_four_neuron_example(self):
        rng = np.random.default_rng(0)
        spikes = np.zeros((200, 4), dtype=np.int8)
        spikes[:, 1] = rng.random(200) < 0.75
        spikes[:, 3] = rng.random(200) < 0.75
        spikes[::50, 0] = 1
        np.testing.assert_array_equal(decode(SpikeRaster(spikes), LifParams()), [0, 1, 0, 1])

    def test_silent(self):
        np.testing.assert_array_equal(decode(np.zeros((10, 3)), LifParams(T=10)), [0, 0, 0])

    def test_half_rate_is_zero(self):
        spikes = np.zeros((10, 1), dtype=np.int8)
        spikes[::2] = 1
        assert decode(spikes, LifParams(T=10))[0] == 0
        spikes[1] = 1
        assert decode(spikes, LifParams(T=10))[0] == 1

    def test_window(self):
        spikes = np.zeros((10, 1), dtype=np.int8)
        spikes[7:] = 1
        p = LifParams(T=10, decode_window=0.5)
        assert decode(spikes, p)[0] == 1
        assert decode(spikes, p.with_(decode_window=1.0))[0] == 0
        # ceil(0.25 * 10) = 3 steps
        assert decode(spikes, p.with_(decode_window=0.25))[0] == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            decode(np.zeros((0, 3)), LifParams())

    def test_text_round_trip(self):
        spikes = (np.random.default_rng(1).random((12, 5)) < 0.4).astype(np.int8)
        text = SpikeRaster(spikes).to_text()
        assert text.splitlines()[0] == "".join(map(str, spikes[0]))
        np.testing.assert_array_equal(SpikeRaster.from_text(text).spikes, spikes)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.floats(0.05, 1.0))
def test_decode_monotone_in_spikes(seed, T, window):
    rng = np.random.default_rng(seed)
    spikes = (rng.random((T, 4)) < 0.5).astype(np.int8)
    p = LifParams(T=T, decode_window=window)
    before = decode(spikes, p)
    t, i = rng.integers(0, T), rng.integers(0, 4)
    spikes[t, i] = 1
    after = decode(spikes, p)
    assert after[i] >= before[i]


class TestDetect:
    def test_single_deterministic_attempt_is_run_plus_decode(self):
        _, _, inst = random_instance(8, 4, 3.0, np.random.default_rng(2))
        p = load_tuned_lif()
        bits, val = detect(inst, p, attempts=1, seed=7)
        ref = decode(run(init_network(inst, p.diagonal), p), p)
        np.testing.assert_array_equal(bits, ref)
        assert val == pytest.approx(objective(inst, ref))

    def test_more_attempts_never_worse(self):
        rng = np.random.default_rng(6)
        p = load_tuned_lif(multi_attempt=True).with_(sigma_v_sq=0.05)
        for _ in range(5):
            _, _, inst = random_instance(16, 8, 0.0, rng)
            vals = [detect(inst, p, attempts=a, seed=3)[1] for a in (1, 2, 5, 10)]
            assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_zero_attempts(self):
        _, _, inst = random_instance(4, 2, 3.0, np.random.default_rng(2))
        with pytest.raises(ValueError):
            detect(inst, LifParams(), attempts=0)

    def test_noiseless_recovery_split(self):
        rng = np.random.default_rng(10)
        p = load_tuned_lif()
        for _ in range(100):
            bits, _, inst = random_instance(16, 4, None, rng)
            np.testing.assert_array_equal(detect(inst, p)[0], bits)


class TestBestOfAttempts:
    def test_prefix_budgets(self):
        Q = np.diag([-1.0, 2.0])
        bits = np.array([[1, 1], [0, 0], [1, 0], [1, 0]])
        picked = best_of_attempts(Q, bits, [1, 2, 3, 4])
        np.testing.assert_array_equal(picked[1], [1, 1])
        np.testing.assert_array_equal(picked[2], [0, 0])
        np.testing.assert_array_equal(picked[3], [1, 0])
        np.testing.assert_array_equal(picked[4], [1, 0])

    def test_budget_out_of_range(self):
        with pytest.raises(ValueError):
            best_of_attempts(np.eye(2), np.zeros((3, 2)), [4])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_dominance(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 5))
        Q = A + A.T
        bits = rng.integers(0, 2, (12, 5))
        full = best_of_attempts(Q, bits, [12])[12]
        best_full = full @ Q @ full
        subset = rng.choice(12, size=rng.integers(1, 12), replace=False)
        assert best_full <= min(b @ Q @ b for b in bits[subset]) + 1e-12
