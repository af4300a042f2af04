import numpy as np
import pytest
from conftest import dirichlet

from rilco.errors import DomainError
from rilco.mdp import (expected_return, occupancy_exact, policy_from_density, random_mdp,
                       snapshot_policies)
from rilco import suite
from rilco.risk import Classifier, fit_classifier_exact
from rilco.verify import (check_inequality_region, density_matching_optimum, fit_gap,
                          inequality_sweep, kappa_estimate, theorem1_gap)


def test_alpha_one_returns_the_expert(grid, snaps, densities):
    rho_e, rho_n = densities
    pi = density_matching_optimum(rho_e, rho_n, 1.0)
    visited = rho_e.sum(axis=1) > 0
    assert np.allclose(pi.probs[visited], snaps[0].probs[visited], atol=1e-12)


def test_equal_densities_return_the_common_policy(densities):
    rho_e, _ = densities
    pi = density_matching_optimum(rho_e, rho_e, 0.5)
    assert np.allclose(pi.probs, policy_from_density(rho_e).probs, atol=1e-15)


def test_mixture_optimum_equals_policy_of_mixture(densities):
    rho_e, rho_n = densities
    pi = density_matching_optimum(rho_e, rho_n, 0.6)
    assert np.allclose(pi.probs, policy_from_density(0.6 * rho_e + 0.4 * rho_n).probs, atol=1e-12)


def test_gridworld_round_trip_and_ordering(grid, snaps, densities):
    rho_e, rho_n = densities
    pi = density_matching_optimum(rho_e, rho_n, 0.6)
    target = 0.6 * rho_e + 0.4 * rho_n
    assert np.max(np.abs(occupancy_exact(grid, pi).density - target)) < 1e-9
    ret = expected_return(grid, pi)
    assert max(expected_return(grid, p) for p in snaps[1:]) < ret < expected_return(grid, snaps[0])


def test_random_mdp_round_trips():
    rng = np.random.default_rng(0)
    for i in range(50):
        m = random_mdp(int(rng.integers(3, 10)), int(rng.integers(2, 4)), 0.9, i)
        sn = snapshot_policies(m)
        e = occupancy_exact(m, sn[0]).density
        n = occupancy_exact(m, sn[3]).density
        alpha = rng.uniform(0.5, 1.0)
        pi = density_matching_optimum(e, n, alpha)
        assert np.max(np.abs(occupancy_exact(m, pi).density - (alpha * e + (1 - alpha) * n))) < 1e-9


@pytest.mark.parametrize("alpha", [0.0, -0.2, 1.5])
def test_alpha_domain(densities, alpha):
    with pytest.raises(DomainError):
        density_matching_optimum(*densities, alpha)


@pytest.mark.parametrize("args,passed", [
    ((0.51, 1.0, 0.5), True), ((0.6, 1.0, 0.0), False), ((0.9, 0.0, 0.0), True),
    ((0.9, 0.0, 0.7), True), ((0.9, 0.0, 1.0), True)])
def test_inequality_examples(args, passed):
    assert check_inequality_region(*args).passed is passed


def test_inequality_domain():
    with pytest.raises(DomainError):
        check_inequality_region(0.7, 1.2, 0.5)


def test_inequality_grid_pass_everywhere_iff_half():
    lams, ok = inequality_sweep(101)
    assert np.array_equal(ok, lams >= 0.5)
    assert not ok[0]


def test_gap_zero_when_densities_agree(densities):
    rho_e, _ = densities
    g = fit_classifier_exact("ap", rho_e, rho_e)
    assert theorem1_gap(g, rho_e, rho_e) == 0.0


def test_disjoint_support_sigmoid_gap_approaches_one():
    e = np.zeros((6, 2))
    e[:3] = 1 / 6
    n = np.zeros((6, 2))
    n[3:] = 1 / 6
    gap, g = fit_gap(e, n, "sigmoid", weight_decay=0.0, max_iter=100_000)
    assert gap > 0.99
    assert np.all(g.scores[:3] > 0) and np.all(g.scores[3:] < 0)


def test_gridworld_gap_is_positive(densities):
    gap, _ = fit_gap(*densities, "ap")
    assert gap > 0.05


def test_gap_positive_on_random_pairs():
    rng = np.random.default_rng(1)
    done = 0
    while done < 20:
        e, n = dirichlet(rng, (10, 3)), dirichlet(rng, (10, 3))
        if 0.5 * np.abs(e - n).sum() <= 0.1:
            continue
        assert fit_gap(e, n, "ap")[0] > 0
        done += 1


def test_unhinged_gap_with_weight_decay(densities):
    gap, g = fit_gap(*densities, "unhinged", weight_decay=1e-2)
    assert gap > 0 and np.all(np.isfinite(g.scores))


def test_kappa_examples(grid, densities):
    e, n = densities
    assert kappa_estimate(e, e, n) == (1.0, 0.0)
    k, r = kappa_estimate(0.3 * e + 0.7 * n, e, n)
    assert abs(k - 0.3) < 1e-12 and r < 1e-12
    uniform = occupancy_exact(grid, np.full(grid.shape, 1 / grid.n_actions)).density
    k, r = kappa_estimate(uniform, e, n)
    assert 0.0 <= k <= 1.0 and r >= 0.0


def test_kappa_is_clipped(densities):
    e, n = densities
    assert kappa_estimate(2 * e - n, e, n)[0] == 1.0
    assert kappa_estimate(2 * n - e, e, n)[0] == 0.0


def test_kappa_degenerate_segment(densities):
    with pytest.raises(DomainError):
        kappa_estimate(densities[0], densities[0], densities[0])


def test_registered_checks_pass_on_the_gridworld(grid):
    reg = suite.registry(grid, rollouts=20_000)
    for name in ("symmetry", "lemma1", "density_matching", "inequality", "theorem1", "kappa"):
        for rep in reg[name]():
            assert rep.passed, rep.line()


def test_report_formatting():
    rep = check_inequality_region(0.6, 1.0, 0.0)
    assert rep.line().startswith("FAIL inequality_region")
    assert rep.csv_row()[1] == 0
