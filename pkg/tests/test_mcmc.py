import math

import numpy as np
import pytest

from ergmphase.graph import DyadClass, DyadGroup, Graph, ModelParams, PhysicalParams, bernoulli_bounds, classify_dyad
from ergmphase.mcmc import (
    ChainConfig,
    ChainState,
    EventTally,
    TransitionCaptureError,
    acceptance_probability,
    bernoulli_graph,
    capture_transition_trajectories,
    crossing,
    gibbs_step,
    make_rng,
    mean_order_parameter_experiment,
    metropolis_step,
    run_chain,
    tabulate_event_rates,
    tnt_step,
)
from oracles import exact_graph_law, sampler_tv, total_variation

PAPER_THETA = ModelParams(-1.631, -5.502)


# single steps


def test_zero_theta_always_accepts():
    g = bernoulli_graph(12, 0.3, make_rng(1))
    st = ChainState(g)
    for i, j in [(0, 1), (2, 7), (3, 11)]:
        assert acceptance_probability(st, i, j, ModelParams(0, 0)) == 1.0
    rng = make_rng(2)
    assert all(metropolis_step(st, ModelParams(0, 0), rng) for _ in range(200))
    res = run_chain(ChainConfig(N=12, params=ModelParams(0, 0), proposal="metropolis", burn_in=0, steps=5000, thin=100))
    assert res.accepted == 5000


def test_pp_formation_probability():
    st = ChainState(Graph.from_edges(4, [(0, 1), (2, 3)]))
    assert classify_dyad(Graph.from_edges(4, [(0, 1), (2, 3)]), 0, 2) == DyadClass.PP
    p = acceptance_probability(st, 0, 2, PAPER_THETA)
    assert p == pytest.approx(math.exp(-12.635), rel=1e-9)


def test_dissolution_reverses_formation():
    theta = ModelParams(-0.8, -1.3)
    g = Graph.from_edges(5, [(0, 1), (2, 3)])
    st = ChainState(g)
    up = acceptance_probability(st, 1, 2, theta)
    st.toggle(1, 2)
    down = acceptance_probability(st, 1, 2, theta)
    logit = theta.theta_e + 2 * theta.theta_c
    assert up == pytest.approx(min(1, math.exp(logit)))
    assert down == pytest.approx(min(1, math.exp(-logit)))


def test_tnt_empty_graph_uses_dyad_branch():
    st = ChainState(Graph(6))
    D = st.n_dyads
    # forward proposal 1/D, reverse (1/2)(1/1) + (1/2)(1/D)
    want = math.exp(-1.0) * (0.5 + 0.5 / D) / (1.0 / D)
    assert acceptance_probability(st, 0, 1, ModelParams(-1, 0), "tnt") == pytest.approx(min(1, want))
    rng = make_rng(0)
    for _ in range(50):
        before = st.t_e
        tnt_step(st, ModelParams(-50, 0), rng)
        assert st.t_e == before == 0


def test_gibbs_step_probability():
    theta = ModelParams(-0.4, -0.9)
    st = ChainState(Graph(5))
    p = acceptance_probability(st, 0, 1, theta, "gibbs")
    assert p == pytest.approx(1 / (1 + math.exp(0.4)))
    assert isinstance(gibbs_step(st, theta, make_rng(0)), bool)


def test_steps_keep_state_consistent():
    rng = make_rng(5)
    st = ChainState(bernoulli_graph(15, 0.2, rng))
    for step in (metropolis_step, tnt_step, gibbs_step):
        for _ in range(2000):
            step(st, ModelParams(-1, -0.5), rng)
        g = st.to_graph()
        g.recount()
        assert (g.t_e, g.t_c) == (st.t_e, st.t_c)
        assert sorted(map(tuple, st.elist[: st.t_e].tolist())) == sorted(
            tuple(sorted(e)) for e in g.edges()
        )


# stationary law


@pytest.mark.parametrize("proposal", ["metropolis", "tnt", "gibbs"])
def test_small_graph_law(proposal):
    assert sampler_tv(4, ModelParams(-1, -1), proposal, 2_000_000) < 0.01


def test_tnt_uniform_density():
    res = run_chain(
        ChainConfig(N=4, params=ModelParams(0, 0), proposal="tnt", burn_in=1000, steps=1_001_000, thin=1000, seed=3),
        track_dyads=True,
    )
    assert res.dyad_on_fraction.mean() == pytest.approx(0.5, abs=0.01)
    t_e_law = np.bincount(res.t_e, minlength=7) / len(res.t_e)
    binom = np.array([math.comb(6, k) for k in range(7)]) / 64
    assert total_variation(t_e_law, binom) < 0.03


def test_order_parameter_limits():
    lo = run_chain(ChainConfig(N=40, params=ModelParams(-8, -8), burn_in=50_000, steps=60_000, thin=1000, seed=1))
    assert np.all(lo.m == 1.0)
    hi = run_chain(ChainConfig(N=100, params=ModelParams(0, 0), burn_in=200_000, steps=300_000, thin=10_000, seed=1))
    assert hi.m.mean() < 0.01


def test_rate_ordering_from_tabulated_proposals():
    res = run_chain(ChainConfig(N=30, params=ModelParams(-1.5, -1.2), proposal="metropolis",
                                burn_in=10_000, steps=2_000_000, thin=10_000, seed=4))
    acc = res.formation_acceptance()
    group = {g: np.nansum([res.formation_accepts[c] for c in DyadClass if c.group == g])
             / np.nansum([res.formation_proposals[c] for c in DyadClass if c.group == g]) for g in DyadGroup}
    assert group[DyadGroup.PP] < group[DyadGroup.PI_PC] < group[DyadGroup.II_IC_CC]
    assert acc[DyadClass.II] == pytest.approx(math.exp(-1.5), rel=0.05)


def test_marginals_within_bounds():
    theta = ModelParams(-1.0, -0.7)
    lo, hi = bernoulli_bounds(theta)
    res = run_chain(ChainConfig(N=8, params=theta, burn_in=10_000, steps=1_010_000, thin=10_000, seed=9),
                    track_dyads=True)
    f = res.dyad_on_fraction
    assert np.all(f > lo - 0.02) and np.all(f < hi + 0.02)


# reproducibility


def test_seed_determinism():
    cfg = ChainConfig(N=30, params=PhysicalParams(0.7, 3.373), burn_in=1000, steps=101_000, thin=500, seed=11)
    a, b = run_chain(cfg), run_chain(cfg)
    assert np.array_equal(a.t_e, b.t_e) and np.array_equal(a.t_c, b.t_c)
    assert a.final == b.final
    c = run_chain(ChainConfig(**{**cfg.__dict__, "seed": 12}))
    assert not np.array_equal(a.t_e, c.t_e)


def test_experiment_independent_of_threads():
    kw = dict(phi_c=3.373, N=20, ratios=[0.5, 1.2], reps=4, T_c=1.348, burn_in=20_000, seed=5)
    one = mean_order_parameter_experiment(**kw, workers=1)
    two = mean_order_parameter_experiment(**kw, workers=3)
    assert np.array_equal(one.draws, two.draws)
    lo_ci, hi_ci = one.ci
    assert np.all(lo_ci <= one.mean) and np.all(one.mean <= hi_ci)


def test_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(N=5, params=PAPER_THETA, burn_in=10, steps=5)
    with pytest.raises(ValueError):
        ChainConfig(N=5, params=PAPER_THETA, proposal="nope")
    with pytest.raises(ValueError):
        ChainConfig(N=5, params=PAPER_THETA, density=1.5)
    with pytest.raises(ValueError):
        ChainConfig(N=5, params=PAPER_THETA, thin=0)


def test_crossing():
    assert crossing([0, 1, 2], [1.0, 0.6, 0.0], 0.5) == pytest.approx(1 + 0.1 / 0.6)
    assert crossing([0, 1], [1.0, 0.9]) is None


# trajectories and event rates

NEAR_FLIP = PhysicalParams(1.0, 3.373)  # N=30: T/T_c about 0.74


def test_capture_replay_and_subsampling():
    full = capture_transition_trajectories(NEAR_FLIP, 30, 2, step_cap=2_000_000, every=1, seed=8)
    sub = capture_transition_trajectories(NEAR_FLIP, 30, 2, step_cap=2_000_000, every=5, seed=8)
    for a, b in zip(full.trajectories, sub.trajectories):
        assert a.completed and b.completed and a.steps == b.steps
        assert np.array_equal(a.records[4::5], b.records)
        assert np.allclose(a.replay(), a.records["m"])
        with pytest.raises(ValueError):
            b.replay()
        assert a.final_m <= 0.05
        # classes are evaluated with the focal edge absent
        g = a.start.copy()
        for rec in a.records[:500]:
            assert classify_dyad(g, int(rec["i"]), int(rec["j"])) == rec["cls"]
            assert g.has_edge(int(rec["i"]), int(rec["j"])) != rec["formed"]
            g.toggle(int(rec["i"]), int(rec["j"]))


def test_capture_abort_and_start_check():
    with pytest.raises(TransitionCaptureError, match="step cap"):
        capture_transition_trajectories(PhysicalParams(0.3, 3.373), 30, 2, step_cap=10_000, seed=1)
    with pytest.raises(ValueError):
        capture_transition_trajectories(NEAR_FLIP, 3, 1, start=Graph.from_edges(3, [(0, 1), (1, 2)]))


def test_event_tally_properties():
    res = capture_transition_trajectories(NEAR_FLIP, 30, 3, step_cap=2_000_000, seed=2)
    t = tabulate_event_rates(res.trajectories, bin_width=0.05)
    assert t.edges[0] == 0.0 and t.edges[-1] == 1.0
    assert np.all(t.counts.sum(axis=1) <= t.exposure)
    for what in list(DyadClass) + [DyadGroup.II_IC_CC, DyadGroup.PI_PC, DyadGroup.PP]:
        r = t.rate(what)[t.populated]
        lo, hi = t.interval(what)
        assert np.all((0 <= r) & (r <= 1))
        assert np.all(lo[t.populated] <= r) and np.all(r <= hi[t.populated])
    assert np.all(np.isnan(t.rate(DyadClass.II)[~t.populated]))
    with pytest.raises(ValueError):
        tabulate_event_rates(res.trajectories, bin_width=0.03)
    with pytest.raises(ValueError):
        tabulate_event_rates([])


def test_jeffreys_shrinkage_for_unseen_class():
    t = EventTally(np.array([0.0, 0.5, 1.0]), np.zeros((2, 6), dtype=np.int64), np.array([0, 40]))
    assert t.rate(DyadClass.PP)[1] == pytest.approx(0.5 / 41)
    lo, hi = t.interval(DyadClass.PP)
    assert lo[1] == pytest.approx(0.0, abs=1e-4) and 0 < hi[1] < 0.1
    assert math.isnan(t.rate(DyadClass.PP)[0])


def test_desk_scale_capture_anchor():
    # N=50, T/T_c = 0.9: pilot run kept 10 of 11 chains from the empty graph within 10^7 steps
    res = capture_transition_trajectories(PhysicalParams(0.9 * 0.87169008456663, 3.373), 50, 10,
                                          step_cap=10_000_000, seed=0)
    assert res.attempts == 11
    assert res.discarded_final_m == [0.92]
