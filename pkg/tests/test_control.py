import math

import numpy as np
import pytest

from swarmgather.control import (
    Action,
    AnalyticalController,
    RandomController,
    StationaryController,
    analytical_action,
    clamp_action,
    random_action,
    smallest_sector,
    stationary_action,
    wrap_angle,
)
from swarmgather.sensing import Observation


def obs_from_degrees(*degrees):
    rad = np.deg2rad(degrees)
    return Observation(np.stack([np.cos(rad), np.sin(rad)], axis=1))


def test_sector_single_neighbor():
    sector = smallest_sector(obs_from_degrees(0))
    assert sector.span == pytest.approx(0.0, abs=1e-12)
    assert sector.extreme_a == pytest.approx(0.0, abs=1e-12)
    assert sector.extreme_b == pytest.approx(0.0, abs=1e-12)


def test_sector_right_angle():
    sector = smallest_sector(obs_from_degrees(0, 90))
    assert sector.span == pytest.approx(math.pi / 2, abs=1e-12)
    assert sorted((sector.extreme_a, sector.extreme_b)) == pytest.approx(
        [0.0, math.pi / 2], abs=1e-12
    )


def test_sector_three_evenly_spread():
    # gaps are all 120 degrees; span is the 240-degree complement
    sector = smallest_sector(obs_from_degrees(0, 120, 240))
    assert sector.span == pytest.approx(np.deg2rad(240), abs=1e-9)


def test_sector_empty_observation_rejected():
    with pytest.raises(ValueError):
        smallest_sector(Observation(np.zeros((0, 2))))


def test_analytical_single_neighbor_full_speed():
    action = analytical_action(obs_from_degrees(0))
    assert action.alpha == pytest.approx(0.0, abs=1e-12)
    assert action.sigma == pytest.approx(1.0, abs=1e-12)


def test_analytical_surrounded_stays_put():
    action = analytical_action(obs_from_degrees(0, 120, 240))
    assert action.sigma == 0.0


def test_analytical_exactly_pi_span_is_surrounded():
    action = analytical_action(obs_from_degrees(0, 90, 180))
    assert action.sigma == 0.0


def test_analytical_narrow_pair():
    # sum of two unit vectors at 0 and 170 degrees
    action = analytical_action(obs_from_degrees(0, 170))
    assert action.alpha == pytest.approx(np.deg2rad(85), abs=1e-9)
    assert action.sigma == pytest.approx(math.cos(np.deg2rad(85)), abs=1e-9)


def test_analytical_empty_observation_is_stationary():
    action = analytical_action(Observation(np.zeros((0, 2))))
    assert action.sigma == 0.0


def test_sector_rotation_equivariance():
    rng = np.random.default_rng(21)
    for _ in range(200):
        k = int(rng.integers(1, 8))
        angles = rng.uniform(-math.pi, math.pi, size=k)
        theta = float(rng.uniform(-math.pi, math.pi))
        base = smallest_sector(
            Observation(np.stack([np.cos(angles), np.sin(angles)], axis=1))
        )
        rotated = smallest_sector(
            Observation(
                np.stack([np.cos(angles + theta), np.sin(angles + theta)], axis=1)
            )
        )
        assert rotated.span == pytest.approx(base.span, abs=1e-9)
        for extreme, rotated_extreme in (
            (base.extreme_a, rotated.extreme_a),
            (base.extreme_b, rotated.extreme_b),
        ):
            delta = wrap_angle(rotated_extreme - extreme - theta)
            assert abs(delta) < 1e-9


def test_analytical_permutation_invariance():
    rng = np.random.default_rng(8)
    for _ in range(100):
        k = int(rng.integers(1, 7))
        angles = rng.uniform(-math.pi, math.pi, size=k)
        obs = Observation(np.stack([np.cos(angles), np.sin(angles)], axis=1))
        base = analytical_action(obs)
        shuffled = analytical_action(Observation(rng.permutation(obs.bearings)))
        assert shuffled.alpha == pytest.approx(base.alpha, abs=1e-9)
        assert shuffled.sigma == pytest.approx(base.sigma, abs=1e-9)


def test_stationary_action():
    assert stationary_action().sigma == 0.0
    controller = StationaryController()
    assert controller.act(obs_from_degrees(10, 20)).sigma == 0.0


def test_random_action_replay():
    a = [random_action(np.random.default_rng(5)) for _ in range(10)]
    b = [random_action(np.random.default_rng(5)) for _ in range(10)]
    assert a == b


def test_random_action_ranges():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        action = random_action(rng)
        assert -math.pi < action.alpha <= math.pi
        assert 0.0 <= action.sigma <= 1.0
    # bulk check of the same draw formulas, one million samples
    rng = np.random.default_rng(2)
    alphas = math.pi - rng.uniform(0.0, 2.0 * math.pi, size=1_000_000)
    sigmas = rng.uniform(0.0, 1.0, size=1_000_000)
    assert (-math.pi < alphas).all() and (alphas <= math.pi).all()
    assert (0.0 <= sigmas).all() and (sigmas <= 1.0).all()


def test_controllers_share_action_interface():
    obs = [obs_from_degrees(0), obs_from_degrees(45, 90)]
    for controller in (AnalyticalController(), StationaryController(), RandomController(3)):
        actions = controller.act_all(obs)
        assert len(actions) == 2
        for action in actions:
            assert -math.pi < action.alpha <= math.pi
            assert 0.0 <= action.sigma <= 1.0


def test_clamp_action():
    clamped = clamp_action(Action(alpha=4.0 * math.pi + 0.5, sigma=1.7))
    assert clamped.alpha == pytest.approx(0.5, abs=1e-12)
    assert clamped.sigma == 1.0
    clamped = clamp_action(Action(alpha=-math.pi, sigma=-0.2))
    assert clamped.alpha == pytest.approx(math.pi, abs=1e-12)
    assert clamped.sigma == 0.0
