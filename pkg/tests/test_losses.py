import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from rilco.errors import DomainError
from rilco.losses import KINDS, LossSpec, eval_loss, eval_loss_grad, normalize, symmetry_defect

SYMMETRIC = {"sigmoid": 1.0, "unhinged": 2.0, "nlogistic": 1.0, "nhinge": 1.0, "ap": 1.0}
finite = st.floats(-50, 50, allow_nan=False)


# high-precision oracles, independent of the numpy implementation
def mp_logistic(z):
    return mp.log(1 + mp.e ** (-z))


def mp_sigmoid(z):
    return 1 / (1 + mp.e ** z)


def mp_ap(z):
    a, b = mp_logistic(z), mp_logistic(-z)
    return a / (a + b) / 2 + mp_sigmoid(z) / 2


def test_symmetry_constants():
    for kind, c in SYMMETRIC.items():
        assert LossSpec(kind).symmetry_constant == c
    assert LossSpec("logistic").symmetry_constant is None
    assert not LossSpec("hinge").is_symmetric


def test_unknown_kind_rejected():
    with pytest.raises(DomainError):
        LossSpec("squared")


@pytest.mark.parametrize("kind,z,expected", [
    ("ap", 0.0, 0.5),
    ("unhinged", 1.0, 0.0),
    ("sigmoid", 0.0, 0.5),
    ("nlogistic", 0.0, 0.5),
    ("nhinge", 2.0, 0.0),
    ("nhinge", -2.0, 1.0),
])
def test_closed_form_points(kind, z, expected):
    assert eval_loss(kind, z) == pytest.approx(expected, abs=1e-15)


def test_logistic_matches_mpmath_oracle():
    # frozen from mpmath at 50 digits: log(1 + exp(-3.2))
    assert eval_loss("logistic", 3.2) == pytest.approx(0.039953333162430357063, rel=1e-14)
    with mp.workdps(50):
        for z in np.linspace(-30, 30, 61):
            assert eval_loss("logistic", z) == pytest.approx(float(mp_logistic(mp.mpf(z))), rel=1e-13)


def test_ap_matches_mpmath_oracle():
    assert eval_loss("ap", 1.7) == pytest.approx(0.11844611566636928694, rel=1e-13)
    assert eval_loss("ap", 1.7) + eval_loss("ap", -1.7) == pytest.approx(1.0, abs=1e-15)
    with mp.workdps(50):
        for z in np.linspace(-40, 40, 81):
            assert eval_loss("ap", z) == pytest.approx(float(mp_ap(mp.mpf(z))), rel=1e-12, abs=1e-300)


def test_normalized_logistic_value():
    assert eval_loss(normalize("logistic"), 1.3) == pytest.approx(0.13524476271589116954, rel=1e-13)
    assert eval_loss("nlogistic", 1.3) + eval_loss("nlogistic", -1.3) == pytest.approx(1.0, abs=1e-15)


def test_normalize_only_for_base_losses():
    assert normalize("hinge") == LossSpec("nhinge")
    with pytest.raises(DomainError):
        normalize("sigmoid")


def test_ap_is_mean_of_nlogistic_and_sigmoid():
    z = np.linspace(-50, 50, 10001)
    combo = 0.5 * eval_loss("nlogistic", z) + 0.5 * eval_loss("sigmoid", z)
    assert np.max(np.abs(eval_loss("ap", z) - combo)) < 1e-12


def test_stable_at_extreme_margins():
    z = np.array([-500.0, -100.0, 100.0, 500.0])
    for kind in KINDS:
        v = eval_loss(kind, z)
        assert np.all(np.isfinite(v)), kind
    assert eval_loss("logistic", -500.0) == pytest.approx(500.0)
    assert eval_loss("logistic", 500.0) >= 0.0


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_nonfinite_margin_is_domain_error(bad):
    with pytest.raises(DomainError):
        eval_loss("ap", bad)
    with pytest.raises(DomainError):
        eval_loss_grad("ap", bad)


def test_scalar_in_scalar_out():
    assert isinstance(eval_loss("sigmoid", 0.3), float)
    assert eval_loss("sigmoid", np.zeros(3)).shape == (3,)


@given(finite)
def test_symmetric_losses_sum_to_constant(z):
    for kind, c in SYMMETRIC.items():
        assert abs(eval_loss(kind, z) + eval_loss(kind, -z) - c) <= 1e-9


def test_symmetry_defect_statistic():
    grid = np.arange(-100, 101) * 0.1
    assert symmetry_defect("sigmoid", grid) < 1e-12
    assert symmetry_defect("ap", grid) < 1e-9
    assert symmetry_defect("logistic", [2.0]) > 0.1
    with pytest.raises(DomainError):
        symmetry_defect("ap", [])


def test_gradient_points():
    assert eval_loss_grad("sigmoid", 0.0) == pytest.approx(-0.25)
    assert np.all(eval_loss_grad("unhinged", np.linspace(-9, 9, 7)) == -1.0)
    assert eval_loss_grad("ap", 0.7) == pytest.approx(-0.25087641702426528141, rel=1e-10)


def test_hinge_kink_uses_right_derivative():
    assert eval_loss_grad("hinge", 1.0) == 0.0
    assert eval_loss_grad("hinge", 0.999) == -1.0


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_matches_finite_difference(kind):
    h = 1e-5
    z = np.linspace(-20, 20, 4001)
    if kind in ("hinge", "nhinge"):
        z = z[np.abs(np.abs(z) - 1.0) >= 1e-3]
    fd = (eval_loss(kind, z + h) - eval_loss(kind, z - h)) / (2 * h)
    g = eval_loss_grad(kind, z)
    assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(1.0, np.abs(g)))


@pytest.mark.parametrize("kind", sorted(SYMMETRIC))
def test_symmetric_gradient_is_even(kind):
    # differentiating l(z) + l(-z) = c gives l'(z) = l'(-z)
    z = np.linspace(-20, 20, 2001)
    if kind == "nhinge":
        z = z[np.abs(np.abs(z) - 1.0) >= 1e-3]
    assert np.max(np.abs(eval_loss_grad(kind, z) - eval_loss_grad(kind, -z))) < 1e-9


@pytest.mark.parametrize("kind", ["sigmoid", "logistic", "ap", "unhinged", "nlogistic"])
def test_monotone_non_increasing(kind):
    v = eval_loss(kind, np.linspace(-50, 50, 20001))
    assert np.all(np.diff(v) <= 1e-15)


def test_callable_spec():
    ap = LossSpec("ap")
    assert ap(0.0) == 0.5
    assert ap.grad(0.0) == eval_loss_grad("ap", 0.0)
    assert LossSpec("nhinge").base == "hinge"
    assert math.isclose(LossSpec("unhinged")(-1.0), 2.0)
