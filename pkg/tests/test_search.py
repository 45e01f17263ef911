import numpy as np
import pytest

from twentyq.channels import ChannelModel, SizeFunction
from twentyq.infodensity import capacity, empirical_info_density
from twentyq.kinematics import SlotSchedule, TargetState, quantized_trajectory
from twentyq.montecarlo import draw_state
from twentyq.querying import generate_codebook
from twentyq.search import (_pick, mi_decode, mi_scores, nn_decode, observe, run_trial, trial_streams)
from twentyq.trajectories import TrajectorySet, enumerate_first_slot


def one_slot(n, v):
    return SlotSchedule((n,), 1, v)


def test_pick_ties_lowest_index():
    assert _pick(np.array([1.0, 3.0, 3.0, 2.0]), True, 1e-9)[0] == 1
    assert _pick(np.array([5.0, 1.0, 1.0]), False, 0.0)[0] == 1
    k, score, margin = _pick(np.array([2.0]), True, 1e-9)
    assert k == 0 and margin == float("inf")


def test_single_candidate(bsc):
    sched = one_slot(4, 0.0)
    ts = enumerate_first_slot(sched, 2)
    single = TrajectorySet(4, 2, ts.entries[3:4], ts.witness_s[3:4], ts.witness_v[3:4])
    cb = generate_codebook(sched, 2, 0.4, 1)
    y = np.ones(4)
    assert mi_decode(0, single, cb, y, 0.4, bsc)[0] == 0
    assert nn_decode(0, single, cb, y)[0] == 0


def test_empty_candidates(bsc):
    sched = one_slot(3, 0.0)
    empty = TrajectorySet(3, 2, np.zeros((0, 3, 1), dtype=np.int32), np.zeros((0, 1)), np.zeros((0, 1)))
    cb = generate_codebook(sched, 2, 0.4, 1)
    with pytest.raises(ValueError):
        mi_decode(0, empty, cb, np.zeros(3), 0.4, bsc)
    with pytest.raises(ValueError):
        nn_decode(0, empty, cb, np.zeros(3))


def test_mi_matches_exhaustive_rescoring(bsc):
    sched = one_slot(4, 0.25)
    M, p = 2, 0.3
    ts = enumerate_first_slot(sched, M)
    for seed in range(20):
        cb_seed, rng = trial_streams([seed])
        cb = generate_codebook(sched, M, p, cb_seed)
        y = observe(cb, bsc, draw_state(sched, rng), sched, rng)[0]
        cw = cb.codewords(0, ts.entries)
        scores = [empirical_info_density(bsc, p, bsc.state(p), cw[k], y) for k in range(len(ts))]
        best = max(scores)
        want = next(k for k, s in enumerate(scores) if s >= best - 1e-9 * max(1, abs(best)))
        assert mi_decode(0, ts, cb, y, p, bsc)[0] == want
        np.testing.assert_allclose(mi_scores(0, ts, cb, y, p, bsc), scores, atol=1e-12)


def test_nn_exact_codeword_wins():
    sched = one_slot(6, 0.1)
    ts = enumerate_first_slot(sched, 3)
    cb = generate_codebook(sched, 3, 0.5, 4)
    cw = cb.codewords(0, ts.entries)
    _, first_idx, counts = np.unique(cw, axis=0, return_index=True, return_counts=True)
    k = int(first_idx[np.flatnonzero(counts == 1)[0]])
    res = nn_decode(0, ts, cb, cw[k].astype(float))
    assert res[0] == k and res[4] == 0.0


@pytest.mark.parametrize("kind", ["bsc", "awgn"])
def test_decoder_equivalence(kind, bsc, awgn):
    ch = bsc if kind == "bsc" else awgn
    sched = one_slot(8, 0.1)
    M = 2
    p = capacity(ch).p_star
    ts = enumerate_first_slot(sched, M)
    for seed in range(200):
        cb_seed, rng = trial_streams([seed, 1])
        cb = generate_codebook(sched, M, p, cb_seed)
        y = observe(cb, ch, draw_state(sched, rng), sched, rng)[0]
        assert mi_decode(0, ts, cb, y, p, ch)[0] == nn_decode(0, ts, cb, y)[0]


def test_noiseless_true_trajectory_wins():
    ch = ChannelModel.bsc(1e-12, SizeFunction(2.0, 0.5))
    sched = one_slot(10, 0.05)
    M, p = 2, 0.5
    ts = enumerate_first_slot(sched, M)
    rng = np.random.default_rng(0)
    for seed in range(30):
        state = draw_state(sched, rng)
        cb = generate_codebook(sched, M, p, seed)
        y = observe(cb, ch, state, sched, rng)[0]
        truth = quantized_trajectory(state, sched, M)[0]
        cw = cb.codewords(0, ts.entries)
        tk = int(np.flatnonzero(np.all(ts.entries == truth[None], axis=(1, 2)))[0])
        if np.sum(np.all(cw == cw[tk], axis=1)) == 1:
            assert mi_decode(0, ts, cb, y, p, ch)[0] == tk


def test_stationary_noiseless_search_recovers_cell():
    ch = ChannelModel.bsc(1e-12, SizeFunction(2.0, 0.5))
    sched = one_slot(12, 0.0)
    M = 3
    for seed in range(20):
        state = TargetState([np.random.default_rng(seed).random()], [[0.0]])
        out = run_trial(sched, M, 0.5, ch, state, seed)
        cells = quantized_trajectory(state, sched, M)[0]
        assert np.array_equal(out.slots[0].entry, cells)


def test_excess_flag_definition(bsc):
    sched = SlotSchedule((6, 10), 1, 0.05)
    rng = np.random.default_rng(3)
    for seed in range(20):
        out = run_trial(sched, 4, 0.3, bsc, draw_state(sched, rng), seed)
        assert out.excess == (out.max_error > out.delta + 1e-12)
        assert out.errors.shape == (11,)
        assert out.delta == 3 / 4


def test_success_geometry(bsc):
    # all witnesses in their neighborhoods => no excess at delta = (B + 1) / M
    sched = SlotSchedule((6, 10), 1, 0.05)
    rng = np.random.default_rng(4)
    seen = 0
    for seed in range(150):
        out = run_trial(sched, 4, 0.3, bsc, draw_state(sched, rng), seed)
        if all(s.in_neighborhood for s in out.slots):
            seen += 1
            assert not out.excess
    assert seen > 0


def test_mismatched_first_slot(bsc):
    sched = one_slot(5, 0.0)
    ts = enumerate_first_slot(one_slot(4, 0.0), 2)
    with pytest.raises(ValueError):
        run_trial(sched, 2, 0.3, bsc, TargetState([0.5]), 0, first_slot=ts)


def test_unknown_decoder(bsc):
    sched = one_slot(4, 0.0)
    with pytest.raises(ValueError):
        run_trial(sched, 2, 0.3, bsc, TargetState([0.5]), 0, decoder="map")


def test_trial_is_pure(bsc):
    sched = SlotSchedule((5, 8), 1, 0.1)
    state = TargetState([0.4], [[0.05], [-0.1]])
    a = run_trial(sched, 3, 0.3, bsc, state, [1, 2, 3])
    b = run_trial(sched, 3, 0.3, bsc, state, [1, 2, 3])
    assert np.array_equal(a.errors, b.errors)
    assert [s.index for s in a.slots] == [s.index for s in b.slots]


def excess_rate(ch, sched, M, trials, seed, p=0.3):
    ts = enumerate_first_slot(sched, M)
    rng = np.random.default_rng(seed)
    hits = sum(run_trial(sched, M, p, ch, draw_state(sched, rng), [seed, i], first_slot=ts).excess
               for i in range(trials))
    return hits / trials


def test_monotone_in_noise_bsc():
    sched = one_slot(10, 0.02)
    rates = [excess_rate(ChannelModel.bsc(z, SizeFunction(2.0, 0.5)), sched, 4, 300, 5)
             for z in (0.02, 0.1, 0.2)]
    se = [np.sqrt(max(r, 1 / 300) * (1 - r) / 300) for r in rates]
    for i in range(2):
        assert rates[i] <= rates[i + 1] + 3 * (se[i] + se[i + 1])
    assert rates[0] < rates[2]


def test_monotone_in_noise_awgn():
    sched = one_slot(10, 0.02)
    rates = [excess_rate(ChannelModel.awgn(s, SizeFunction(2.0, 0.5)), sched, 4, 300, 6)
             for s in (0.2, 0.6, 1.5)]
    se = [np.sqrt(max(r, 1 / 300) * (1 - r) / 300) for r in rates]
    for i in range(2):
        assert rates[i] <= rates[i + 1] + 3 * (se[i] + se[i + 1])
    assert rates[0] < rates[2]
