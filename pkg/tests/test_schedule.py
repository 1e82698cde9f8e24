import numpy as np
import pytest

import latentvsr as lv
from latentvsr import errors


def test_variance_preserving_identity(default_schedule):
    s = default_schedule
    assert np.max(np.abs(s.alphas**2 + s.sigmas**2 - 1.0)) < 1e-6


def test_monotone_alpha_sigma():
    for kind in ("linear", "scaled_linear"):
        s = lv.make_schedule(kind)
        assert np.all(np.diff(s.alphas) <= 0)
        assert np.all(np.diff(s.sigmas) >= 0)
        assert s.alpha(1) > s.alpha(s.t_train)
        assert s.sigma(1) < s.sigma(s.t_train)


def test_two_step_linear_cumulative_product():
    s = lv.make_schedule(
        "linear", 2, beta_start=0.1, beta_end=0.2, num_inference_steps=2
    )
    assert s.alpha(2) == pytest.approx(np.sqrt(0.9 * 0.8), abs=1e-12)
    assert s.alpha(0) == 1.0 and s.sigma(0) == 0.0


def test_bad_beta_endpoints_rejected():
    with pytest.raises(errors.InvalidParameter):
        lv.make_schedule("linear", 10, beta_start=0.0, beta_end=0.5)
    with pytest.raises(errors.InvalidParameter):
        lv.make_schedule("linear", 10, beta_start=0.1, beta_end=1.5)
    with pytest.raises(errors.InvalidParameter):
        lv.make_schedule("linear", 1)
    with pytest.raises(errors.InvalidParameter):
        lv.make_schedule("cosine")


def test_inference_steps_strictly_descending(default_schedule):
    steps = default_schedule.inference_steps
    assert len(steps) == 30
    assert all(a > b for a, b in zip(steps, steps[1:]))
    assert steps[0] == 1000 and steps[-1] == 1


def test_propagation_positions_validated(default_schedule):
    with pytest.raises(errors.InvalidParameter):
        default_schedule.with_steps(
            default_schedule.inference_steps, frozenset({30})
        )


def test_placement_positions_match_28_step_reference():
    assert sorted(lv.placement_positions("early", 28)) == [4, 5, 6, 7]
    assert sorted(lv.placement_positions("middle", 28)) == [14, 15, 16, 17]
    assert sorted(lv.placement_positions("late", 28)) == [24, 25, 26, 27]
    assert lv.placement_positions("none", 28) == frozenset()


# --- elementwise algebra -------------------------------------------------------


def test_diffuse_endpoints(default_schedule, rng):
    z = rng.standard_normal((2, 3, 4, 4))
    eps = rng.standard_normal((2, 3, 4, 4))
    assert np.array_equal(lv.diffuse(default_schedule, z, 0, eps), z)
    assert np.array_equal(
        lv.diffuse(default_schedule, z, 500, np.zeros_like(z)),
        default_schedule.alpha(500) * z,
    )


def test_diffuse_hand_value():
    s = _make_alpha_sigma_schedule()
    # alpha=0.6, sigma=0.8 at the probe step
    out = lv.diffuse(s, np.ones((1, 1, 1, 1)), _PROBE_T, -np.ones((1, 1, 1, 1)))
    assert out[0, 0, 0, 0] == pytest.approx(0.6 * 1 + 0.8 * -1, abs=1e-9)


def test_v_target_endpoints_and_hand_value(default_schedule, rng):
    z = rng.standard_normal((1, 2, 3, 3))
    eps = rng.standard_normal((1, 2, 3, 3))
    v0 = lv.v_target(default_schedule, z, eps, 0)
    assert np.array_equal(v0, eps)
    s = _make_alpha_sigma_schedule(alpha=np.sqrt(0.5))
    v = lv.v_target(s, np.ones((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), _PROBE_T)
    assert abs(v[0, 0, 0, 0]) < 1e-12


def test_round_trip_recovers_z_and_eps(default_schedule, rng):
    for _ in range(50):
        t = int(rng.integers(1, default_schedule.t_train + 1))
        shape = tuple(rng.integers(1, 5, size=4))
        z = rng.standard_normal(shape)
        eps = rng.standard_normal(shape)
        z_t = lv.diffuse(default_schedule, z, t, eps)
        v = lv.v_target(default_schedule, z, eps, t)
        z0 = lv.predict_z0(default_schedule, z_t, v, t)
        assert np.max(np.abs(z0 - z)) < 1e-6
        eps_hat = lv.predict_eps(default_schedule, z_t, z0, t)
        assert np.max(np.abs(eps_hat - eps)) < 1e-6


def test_predict_z0_hand_value():
    s = _make_alpha_sigma_schedule()
    out = lv.predict_z0(s, np.ones((1, 1, 1, 1)), np.full((1, 1, 1, 1), 0.5), _PROBE_T)
    assert out[0, 0, 0, 0] == pytest.approx(0.6 * 1 - 0.8 * 0.5, abs=1e-9)


def test_predict_eps_hand_value_and_zero_sigma():
    s = _make_alpha_sigma_schedule()
    out = lv.predict_eps(s, np.ones((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), _PROBE_T)
    assert out[0, 0, 0, 0] == pytest.approx((1 - 0.6) / 0.8, abs=1e-9)
    with pytest.raises(errors.DivisionByZeroStep):
        lv.predict_eps(s, np.ones((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), 0)


def test_ddim_step_hand_value():
    s = _make_alpha_sigma_schedule(alpha=0.6, alpha_prev=0.8)
    z_t = np.ones((1, 1, 1, 1))
    z0 = np.zeros((1, 1, 1, 1))
    out = lv.ddim_step(s, z_t, z0, _PROBE_T, _PROBE_T_PREV)
    # eps = (1 - 0.6*0)/0.8 = 1.25; out = 0.8*0 + 0.6*1.25
    assert out[0, 0, 0, 0] == pytest.approx(0.75, abs=1e-9)
    with pytest.raises(errors.InvalidParameter):
        lv.ddim_step(s, z_t, z0, _PROBE_T_PREV, _PROBE_T)


def test_ddim_step_to_clean_state_is_projection(default_schedule, rng):
    z0 = rng.standard_normal((1, 1, 2, 2))
    z_t = rng.standard_normal((1, 1, 2, 2))
    out = lv.ddim_step(default_schedule, z_t, z0, 500, 0)
    assert np.array_equal(out, z0)


def test_iterated_ddim_converges_to_oracle_target(default_schedule, rng):
    target = rng.standard_normal((1, 2, 4, 4))
    steps = default_schedule.inference_steps
    z = rng.standard_normal(target.shape)
    for i, t in enumerate(steps):
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        z = lv.ddim_step(default_schedule, z, target, t, t_prev)
    assert np.max(np.abs(z - target)) < 1e-4


def test_cfg_combine_contract(rng):
    v_u = rng.standard_normal((2, 1, 3, 3))
    v_c = rng.standard_normal((2, 1, 3, 3))
    assert np.array_equal(lv.cfg_combine(v_u, v_c, 1.0), v_c)
    assert np.array_equal(lv.cfg_combine(v_u, v_c, 0.0), v_u)
    out = lv.cfg_combine(np.zeros((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), 2.0)
    assert out[0, 0, 0, 0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(errors.InvalidParameter):
        lv.cfg_combine(v_u, v_c, -0.5)


def test_cfg_combine_affine_in_scale(rng):
    v_u = rng.standard_normal((1, 1, 4, 4))
    v_c = rng.standard_normal((1, 1, 4, 4))
    a = lv.cfg_combine(v_u, v_c, 0.25)
    b = lv.cfg_combine(v_u, v_c, 0.75)
    mid = lv.cfg_combine(v_u, v_c, 0.5)
    assert np.max(np.abs((a + b) / 2 - mid)) < 1e-12


def test_noise_input_contract(default_schedule, rng):
    x = rng.random((2, 3, 4, 4))
    eps = rng.standard_normal(x.shape)
    assert np.array_equal(lv.noise_input(default_schedule, x, 0, eps), x)
    with pytest.raises(errors.NoiseLevelOutOfRange):
        lv.noise_input(default_schedule, x, 351, eps)
    with pytest.raises(errors.NoiseLevelOutOfRange):
        lv.noise_input(default_schedule, x, -1, eps)
    # monotone deviation in tau
    d100 = np.mean((lv.noise_input(default_schedule, x, 100, eps) - x) ** 2)
    d300 = np.mean((lv.noise_input(default_schedule, x, 300, eps) - x) ** 2)
    assert d300 > d100


def test_noise_input_hand_value():
    s = _make_alpha_sigma_schedule(alpha=0.9)
    sigma = float(np.sqrt(1 - 0.81))
    out = lv.noise_input(
        s, np.ones((1, 1, 1, 1)), _PROBE_T, np.ones((1, 1, 1, 1)),
        tau_max=s.t_train - 1,
    )
    assert out[0, 0, 0, 0] == pytest.approx(0.9 + sigma, abs=1e-9)


def test_shape_mismatch_raised(default_schedule):
    with pytest.raises(errors.ShapeMismatch):
        lv.diffuse(default_schedule, np.zeros((1, 1, 2, 2)), 5, np.zeros((1, 1, 3, 3)))


def test_prompt_embedding_deterministic():
    a = lv.prompt_embedding_from_seed(7)
    b = lv.prompt_embedding_from_seed(7)
    c = lv.prompt_embedding_from_seed(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_condition_null_prompt_distinct_from_zero():
    null = lv.Condition(prompt_embedding=None)
    zero = lv.Condition(prompt_embedding=np.zeros(16))
    assert null.prompt_embedding is None
    assert zero.prompt_embedding is not None


# --- helpers ----------------------------------------------------------------

_PROBE_T = 2
_PROBE_T_PREV = 1


def _make_alpha_sigma_schedule(alpha=0.6, alpha_prev=None):
    """Tiny hand-built schedule placing a chosen alpha at step 2 (and
    optionally at step 1) for hand-value checks."""
    alphas = np.array(
        [1.0, 0.9 if alpha_prev is None else alpha_prev, alpha, alpha * 0.5]
    )
    sigmas = np.sqrt(1.0 - alphas**2)
    return lv.NoiseSchedule(
        alphas=alphas, sigmas=sigmas, t_train=3, inference_steps=(2, 1)
    )
