import math

import pytest

from levyfluct import (
    BadParameterError,
    constant_A,
    decomposition_residual,
    dual_lifetime_masses,
    entrance_constants,
    entrance_law_laplace,
    intensity_cross_before,
    intensity_negative_start,
    intensity_stay_positive,
    intensity_table,
    intensity_total,
    intensity_total_infinite,
    intensity_upper_creep,
    inverse_local_time,
    occupation_overshoot_identity,
    overshoot_mass,
    subordinator_drift,
)


# ---------------------------------------------------------------------------
# the decomposition table
# ---------------------------------------------------------------------------


EXACT_B = {
    "total": 3.75,
    "upperCreep": 1.0,
    "stayPositiveForever": 1.0,
    "crossBefore": 0.25,
    "negativeStartFinite": 1.0,
    "negativeStartInfinite": 0.0,
    "crossAfter": 0.5,
}


def test_mixed_model_table_exact(engine_b):
    table = intensity_table(engine_b, 2.5).as_dict()
    for key, val in EXACT_B.items():
        assert table[key] == pytest.approx(val, abs=1e-10), key
    assert abs(table["residual"]) <= 1e-8


def test_table_keys_are_stable(engine_b):
    assert list(intensity_table(engine_b, 2.5).as_dict()) == [
        "beta", "total", "upperCreep", "stayPositiveForever", "crossBefore",
        "negativeStartFinite", "negativeStartInfinite", "crossAfter", "residual",
    ]


def test_partition_residual_small_across_models(
        engine_bm0, engine_bm_up, engine_bm_down, engine_b, engine_stable):
    for engine in (engine_bm0, engine_bm_up, engine_bm_down, engine_b, engine_stable):
        for beta in (0.1, 0.5, 2.5, 10.0):
            res = decomposition_residual(engine, beta)
            total = intensity_total(engine, beta)
            assert abs(res) <= 1e-6 * total


def test_total_is_speed_of_inverse(engine_b):
    m = engine_b.model
    beta = 2.5
    assert intensity_total(engine_b, beta) == pytest.approx(
        m.psi_prime(m.phi(beta)), rel=1e-12)


def test_stay_positive_is_positive_mean_only(engine_bm0, engine_bm_up, engine_bm_down):
    assert intensity_stay_positive(engine_bm0) == 0.0
    assert intensity_stay_positive(engine_bm_up) == pytest.approx(1.0, rel=1e-12)
    assert intensity_stay_positive(engine_bm_down) == 0.0


def test_negative_start_split(engine_bm_down, engine_bm_up):
    # drift to -inf: some excursions never come back up
    down = intensity_negative_start(engine_bm_down, 2.5)
    assert down.infinite > 0.0
    assert down.finite + down.infinite == pytest.approx(down.total, rel=1e-12)
    up = intensity_negative_start(engine_bm_up, 2.5)
    assert up.infinite == 0.0


def test_negative_start_total_is_gaussian_mass(engine_b):
    # (sigma2/2) * phi(beta): only the Gaussian part can start downward
    m = engine_b.model
    for beta in (0.5, 2.5):
        got = intensity_negative_start(engine_b, beta).total
        assert got == pytest.approx(0.5 * m.sigma2 * m.phi(beta), rel=1e-10)


def test_no_jump_crossings_without_jumps(engine_bm0):
    table = intensity_table(engine_bm0, 2.5).as_dict()
    assert table["crossBefore"] == 0.0
    assert table["crossAfter"] == 0.0


def test_cross_before_unimodal_shape(engine_b):
    # phi/(1+phi)^2 for unit-rate exponential jumps, maximal where phi = 1
    m = engine_b.model
    for beta in (0.5, 2.5, 10.0):
        phib = m.phi(beta)
        assert intensity_cross_before(engine_b, beta) == pytest.approx(
            phib / (1.0 + phib) ** 2, rel=1e-8)


def test_upper_creep_needs_gaussian_part(engine_stable, engine_b):
    assert intensity_upper_creep(engine_stable, 2.5) == 0.0
    assert intensity_upper_creep(engine_b, 2.5) > 0.0


def test_infinite_lifetime_limits(engine_b):
    # beta -> 0 the total tends to the unkilled value psi'(phi(0))
    m = engine_b.model
    assert intensity_total_infinite(engine_b) == pytest.approx(
        m.psi_prime(m.phi(0.0)), rel=1e-12)
    small = intensity_total(engine_b, 1e-10)
    assert small == pytest.approx(intensity_total_infinite(engine_b), rel=1e-6)


def test_beta_rejected_when_not_positive(engine_b):
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(BadParameterError):
            intensity_table(engine_b, bad)


# ---------------------------------------------------------------------------
# dual lifetimes and entrance law
# ---------------------------------------------------------------------------


def test_dual_lifetime_product(engine_b):
    for beta in (0.5, 2.5):
        up, down = dual_lifetime_masses(engine_b, beta)
        assert up * down == pytest.approx(beta, rel=1e-12)
        assert up == pytest.approx(engine_b.model.phi(beta), rel=1e-12)


def test_entrance_constants_mixed_model(engine_b):
    m = engine_b.model
    c = entrance_constants(engine_b, 2.5)
    slope = m.phi_prime(2.5) * m.phi(2.5)
    assert c.c_neg == pytest.approx(1.0 / slope, rel=1e-10)
    assert c.c_pos == pytest.approx(1.0 / (1.0 - slope), rel=1e-10)


def test_entrance_constants_internal_relation(engine_bm0, engine_b):
    # c_stay couples the other two: phi'(beta) * c_pos
    for engine in (engine_bm0, engine_b):
        m = engine.model
        c = entrance_constants(engine, 1.5)
        assert c.c_stay == pytest.approx(m.phi_prime(1.5) * c.c_pos, rel=1e-12)
        assert c.c_neg > 0.0 and c.c_pos > 0.0


def test_entrance_law_positive_weight(engine_b):
    law = entrance_law_laplace(engine_b, 1.0, lambda x: 1.0, (-5.0, 5.0))
    assert law.full_line > 0.0
    assert law.positive_part > 0.0
    only_pos = entrance_law_laplace(engine_b, 1.0, lambda x: 1.0, (0.0, 5.0))
    assert only_pos.positive_part == pytest.approx(law.positive_part, rel=1e-8)


def test_entrance_law_needs_finite_support(engine_b):
    with pytest.raises(BadParameterError):
        entrance_law_laplace(engine_b, 1.0, lambda x: 1.0, (0.0, math.inf))


# ---------------------------------------------------------------------------
# overshoot and local time
# ---------------------------------------------------------------------------


def test_overshoot_mass_finite_for_exponential_jumps(engine_b):
    m = overshoot_mass(engine_b)
    assert not m.infinite
    # integral of u e^{-u} du = 1
    assert m.value == pytest.approx(1.0, rel=1e-8)


def test_overshoot_mass_infinite_for_oscillating_stable(engine_stable):
    m = overshoot_mass(engine_stable)
    assert m.infinite and math.isinf(m.value)


def test_occupation_identity_cross_check(engine_b):
    direct, via = occupation_overshoot_identity(engine_b)
    assert via == pytest.approx(direct, rel=1e-6)


def test_occupation_identity_rejects_infinite_mass(engine_stable):
    with pytest.raises(BadParameterError):
        occupation_overshoot_identity(engine_stable)


def test_inverse_local_time_exponent(engine_b):
    m = engine_b.model
    for lam in (0.5, 2.5):
        assert inverse_local_time(engine_b, lam) == pytest.approx(
            m.psi_prime(m.phi(lam)), rel=1e-12)


def test_inverse_local_time_has_no_drift(engine_bm0, engine_b, engine_stable):
    for e in (engine_bm0, engine_b, engine_stable):
        assert subordinator_drift(e) <= 1e-6


def test_constant_a_by_regime(engine_bm0, engine_b, engine_stable, engine_tempered):
    assert constant_A(engine_bm0) == pytest.approx(1.0, rel=1e-9)
    assert constant_A(engine_b) == 0.0          # positive mean
    assert constant_A(engine_stable) == 0.0     # oscillating, infinite variance
    m = engine_tempered.model
    assert constant_A(engine_tempered) == pytest.approx(
        1.0 / m.psi_second(0.0), rel=1e-9)
