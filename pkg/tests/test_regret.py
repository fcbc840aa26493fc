import math

import numpy as np
import pytest

from agnoctl.errors import ConfigError
from agnoctl.filtering import DiscretePrior
from agnoctl.regret import (CostVector, MinimaxConfig, RegretKind, cost_vector,
                            dyadic_net, epsilon_efficiency_certificate,
                            minimax_prior_search, regret, regret_profile,
                            worst_case_regret)
from agnoctl.simulate import (CertaintyEquivalentStrategy, KnownAStrategy,
                              Partition, ZeroStrategy)

PART = Partition.from_dt(1.0, 2e-3)


# -- RegretKind -------------------------------------------------------------

def test_regret_kind_validation():
    with pytest.raises(ConfigError):
        RegretKind("quadratic")
    with pytest.raises(ConfigError):
        RegretKind.hybrid(0.0)
    with pytest.raises(ConfigError):
        RegretKind("hybrid")
    assert RegretKind.hybrid(1.0).gamma == 1.0


# -- single-point regret -----------------------------------------------------

def test_self_regret_additive_is_zero():
    r = regret(KnownAStrategy(0.5, 1.0), 0.5, RegretKind.additive(), 1.0, 1.0,
               PART, 20000, 17)
    assert abs(r.value) <= max(3.0 * r.std_error, 0.02)


def test_self_regret_multiplicative_is_one():
    r = regret(KnownAStrategy(0.5, 1.0), 0.5, RegretKind.multiplicative(), 1.0, 1.0,
               PART, 20000, 17)
    assert abs(r.value - 1.0) <= max(3.0 * r.std_error, 0.02)


def test_hybrid_large_gamma_washes_out_cost():
    r = regret(KnownAStrategy(0.5, 1.0), 0.5, RegretKind.hybrid(1e6), 1.0, 1.0,
               PART, 2000, 17)
    assert r.value == pytest.approx(0.0, abs=1e-4)


# -- worst-case regret -------------------------------------------------------

def test_worst_case_singleton_net():
    sup, argmax, profile = worst_case_regret(
        KnownAStrategy(0.7, 1.0), [0.7], RegretKind.additive(), 1.0, 1.0,
        PART, 5000, 23)
    assert argmax == [0.7]
    assert len(profile) == 1
    assert sup == profile[0].value


def test_worst_case_of_neutral_strategy():
    # the a = 0 controller pays its largest excess at the extreme drifts
    sup, argmax, profile = worst_case_regret(
        KnownAStrategy(0.0, 1.0), [-1.0, 0.0, 1.0], RegretKind.multiplicative(),
        1.0, 1.0, PART, 20000, 29)
    assert 0.0 not in argmax
    assert sup >= 1.0 - 0.02


def test_profile_rejects_empty_net():
    with pytest.raises(ConfigError):
        regret_profile(ZeroStrategy(), [], RegretKind.additive(), 1.0, 1.0,
                       PART, 100, 0)


def test_threaded_profile_matches_serial(monkeypatch):
    args = (KnownAStrategy(0.0, 1.0), [-1.0, 0.0, 1.0], RegretKind.additive(),
            1.0, 1.0, Partition.from_dt(1.0, 1e-2), 500, 5)
    monkeypatch.delenv("AGNOCTL_THREADS", raising=False)
    serial = regret_profile(*args)
    monkeypatch.setenv("AGNOCTL_THREADS", "2")
    threaded = regret_profile(*args)
    assert [r.value for r in serial] == [r.value for r in threaded]


# -- cost vectors and efficiency certificates --------------------------------

def test_cost_vector_validation():
    with pytest.raises(ConfigError):
        CostVector(np.array([0.0, 1.0]), np.array([1.0]), np.array([0.1]))
    with pytest.raises(ConfigError):
        CostVector(np.array([0.0]), np.array([-1.0]), np.array([0.1]))


def test_certificate_self_unfalsified():
    net = [-1.0, 0.0, 1.0]
    cv = cost_vector(KnownAStrategy(0.0, 1.0), net, PART, 1.0, 2000, 37)
    assert epsilon_efficiency_certificate(cv, [cv], eps=0.05) == "unfalsified"


def test_certificate_detects_uniform_domination():
    net = np.array([-1.0, 0.0, 1.0])
    good = cost_vector(KnownAStrategy(0.0, 1.0), net, PART, 1.0, 2000, 41)
    bloated = CostVector(net, good.values + 1.0, good.std_errors)
    assert epsilon_efficiency_certificate(bloated, [good], eps=0.5) == "violated"


def test_certificate_rejects_mismatched_nets():
    a = CostVector(np.array([0.0]), np.array([1.0]), np.array([0.1]))
    b = CostVector(np.array([1.0]), np.array([1.0]), np.array([0.1]))
    with pytest.raises(ConfigError):
        epsilon_efficiency_certificate(a, [b], eps=0.1)


# -- nets --------------------------------------------------------------------

def test_dyadic_net_structure():
    net = dyadic_net(1.0, 4)
    assert net.size == 33
    assert net[0] == -1.0 and net[-1] == 1.0
    assert 0.0 in net
    np.testing.assert_allclose(np.diff(net), 2.0 ** -4)

    coarse = dyadic_net(1.0, 3)
    assert set(coarse).issubset(set(net))


# -- minimax search ----------------------------------------------------------

def test_minimax_rejects_bad_input(coarse_grid):
    with pytest.raises(ConfigError):
        minimax_prior_search([], RegretKind.additive(), 1.0, 1.0, MinimaxConfig())
    with pytest.raises(ConfigError):
        minimax_prior_search([-1.0, 1.0], RegretKind.additive(), 1.0, 1.0,
                             MinimaxConfig(grid=None))


def test_minimax_singleton_base_case():
    sol = minimax_prior_search([0.7], RegretKind.additive(), 1.0, 1.0,
                               MinimaxConfig(n_paths=5000, dt=5e-3, seed=3))
    assert sol.certified and sol.rounds == 0
    assert sol.prior.atoms.tolist() == [0.7] and sol.prior.weights.tolist() == [1.0]
    assert isinstance(sol.strategy, KnownAStrategy)
    # the optimal known-a strategy competes against itself: regret about 0
    assert abs(sol.sup_regret) <= max(3.0 * sol.regret_stderrs[0], 0.02)
    assert sol.equalization_gap == 0.0


@pytest.fixture(scope="module")
def small_minimax(coarse_grid):
    cfg = MinimaxConfig(epsilon=0.1, grid=coarse_grid, n_paths=4000,
                        dt=5e-3, seed=7)
    return minimax_prior_search([-0.5, 0.5], RegretKind.hybrid(1.0), 1.0, 1.0, cfg)


def test_minimax_symmetric_two_point(small_minimax):
    sol = small_minimax
    assert sol.certified
    assert sol.equalization_gap <= 0.1 + 2.0 * math.sqrt(2.0) * sol.regret_stderrs.max()
    # the prior-averaged regret of the Bayes strategy never exceeds the sup
    on_support = np.isin(sol.net, sol.prior.atoms)
    avg = float(np.sum(sol.prior.weights * sol.regret_values[on_support]))
    assert avg <= sol.sup_regret + 1e-12


def test_minimax_solution_not_dominated(small_minimax):
    sol = small_minimax
    net = sol.net
    part = Partition.from_dt(1.0, 5e-3)
    mine = cost_vector(sol.strategy, net, part, 1.0, 4000, 7)
    challengers = [
        cost_vector(CertaintyEquivalentStrategy(sol.prior, 1.0), net, part, 1.0, 4000, 7),
        cost_vector(KnownAStrategy(0.0, 1.0), net, part, 1.0, 4000, 7),
        cost_vector(KnownAStrategy(0.5, 1.0), net, part, 1.0, 4000, 7),
    ]
    assert epsilon_efficiency_certificate(mine, challengers, eps=0.05) == "unfalsified"


def test_minimax_report_and_rows(small_minimax):
    rows = list(small_minimax.csv_rows())
    assert len(rows) == small_minimax.net.size
    text = small_minimax.report()
    assert "certified: True" in text
    assert "profile:" in text


# -- qualitative shape of regret profiles ------------------------------------

def test_profile_interpolates_between_net_refinements():
    strat = KnownAStrategy(0.0, 1.0)
    kind = RegretKind.additive()
    coarse_net = np.linspace(-1.0, 1.0, 9)
    fine_net = np.linspace(-1.0, 1.0, 17)
    coarse = regret_profile(strat, coarse_net, kind, 1.0, 1.0, PART, 2000, 53)
    fine = regret_profile(strat, fine_net, kind, 1.0, 1.0, PART, 2000, 53)
    interp = np.interp(fine_net, coarse_net, [r.value for r in coarse])
    for got, want, r in zip([r.value for r in fine], interp, fine):
        assert abs(got - want) <= max(5.0 * r.std_error, 0.02)


def test_regret_grows_outside_prior_support():
    # a strategy tuned to drifts in [-1, 1] pays more as the true drift
    # moves further outside that range
    prior_strat = CertaintyEquivalentStrategy(
        DiscretePrior.from_pairs([(-1.0, 0.5), (1.0, 0.5)]), 1.0)
    kind = RegretKind.additive()
    values = [regret(prior_strat, a, kind, 1.0, 1.0, PART, 2000, 59).value
              for a in (1.5, 2.0, 2.5)]
    assert values[0] < values[1] < values[2]
