import math

import numpy as np
import pytest

from swarmgather.errors import ContractViolationError, DegenerateBearingError
from swarmgather.geometry import SwarmState
from swarmgather.sensing import (
    IMAGE_SIZE,
    Observation,
    observe,
    observe_all,
    pack_image,
    project,
    rasterize,
    unpack_image,
)


def pixel_oracle(observation):
    """Per-pixel brute force: test every pixel of the grid against all blocks."""

    def centers():
        for k in range(len(observation)):
            ux, uy = observation.bearings[k]
            row = 37 - round_half_away(35 * uy)
            col = 37 + round_half_away(35 * ux)
            yield row, col

    def round_half_away(x):
        return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)

    blocks = list(centers())
    image = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    for r in range(IMAGE_SIZE):
        for c in range(IMAGE_SIZE):
            for br, bc in blocks:
                if abs(r - br) <= 1 and abs(c - bc) <= 1:
                    image[r, c] = 1
                    break
    return image


def random_observation(rng, k):
    angles = rng.uniform(-math.pi, math.pi, size=k)
    return Observation(np.stack([np.cos(angles), np.sin(angles)], axis=1))


def test_observe_isolated_agent():
    state = SwarmState(np.array([[0.0, 0.0], [1000.0, 0.0]]))
    assert len(observe(state, 0, 50.0)) == 0


def test_observe_single_neighbor_due_east():
    state = SwarmState(np.array([[0.0, 0.0], [10.0, 0.0]]))
    obs = observe(state, 0, 50.0)
    np.testing.assert_allclose(obs.bearings, [[1.0, 0.0]], atol=1e-12)


def test_observe_three_visible_neighbors():
    # agent 3 sees agents 0..2 but not the far-away agent 4
    positions = np.array(
        [[10.0, 0.0], [0.0, 20.0], [-15.0, -5.0], [0.0, 0.0], [200.0, 200.0]]
    )
    state = SwarmState(positions)
    obs = observe(state, 3, 50.0)
    assert len(obs) == 3
    expected = []
    for j in (0, 1, 2):
        delta = positions[j] - positions[3]
        expected.append(delta / np.linalg.norm(delta))
    got = sorted(map(tuple, obs.bearings))
    want = sorted(map(tuple, expected))
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_observe_coincident_raises_or_drops():
    state = SwarmState(np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0]]))
    with pytest.raises(DegenerateBearingError):
        observe(state, 0, 50.0)
    obs, dropped = observe(state, 0, 50.0, drop_coincident=True)
    assert dropped == 1
    assert len(obs) == 1


def test_observe_all_returns_one_observation_per_agent():
    state = SwarmState(np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]))
    all_obs = observe_all(state, 50.0)
    assert len(all_obs) == 3
    assert all(len(o) == 2 for o in all_obs)


@pytest.mark.parametrize(
    "bearing, expected",
    [
        ((1.0, 0.0), (37, 72)),
        ((0.0, 1.0), (2, 37)),
        ((0.6, 0.8), (9, 58)),
    ],
)
def test_project_examples(bearing, expected):
    assert project(bearing) == expected


def test_project_always_leaves_room_for_blocks():
    rng = np.random.default_rng(0)
    for k in range(2000):
        obs = random_observation(rng, 1)
        row, col = project(obs.bearings[0])
        assert 1 <= row <= 73
        assert 1 <= col <= 73


def test_rasterize_empty_is_all_zero():
    image = rasterize(Observation(np.zeros((0, 2))))
    assert image.sum() == 0


def test_rasterize_single_east_bearing():
    image = rasterize(Observation(np.array([[1.0, 0.0]])))
    assert image.sum() == 9
    assert image[36:39, 71:74].all()


def test_rasterize_duplicate_bearings_or_together():
    one = rasterize(Observation(np.array([[1.0, 0.0]])))
    two = rasterize(Observation(np.array([[1.0, 0.0], [1.0, 0.0]])))
    np.testing.assert_array_equal(one, two)


def test_rasterize_matches_pixel_oracle():
    rng = np.random.default_rng(101)
    for _ in range(1000):
        obs = random_observation(rng, int(rng.integers(0, 8)))
        np.testing.assert_array_equal(rasterize(obs), pixel_oracle(obs))


def test_pixel_count_bounds():
    rng = np.random.default_rng(5)
    for _ in range(300):
        k = int(rng.integers(1, 10))
        image = rasterize(random_observation(rng, k))
        assert 9 <= image.sum() <= 9 * k


def test_permutation_invariance():
    rng = np.random.default_rng(77)
    for _ in range(100):
        obs = random_observation(rng, 6)
        image = rasterize(obs)
        shuffled = Observation(rng.permutation(obs.bearings))
        np.testing.assert_array_equal(rasterize(shuffled), image)


def test_quarter_turn_rotation_consistency():
    rng = np.random.default_rng(9)
    obs = random_observation(rng, 5)
    image = rasterize(obs)
    rotated = obs.bearings.copy()
    for quarter in range(1, 4):
        # 90 degrees counterclockwise: (ux, uy) -> (-uy, ux)
        rotated = np.stack([-rotated[:, 1], rotated[:, 0]], axis=1)
        np.testing.assert_array_equal(
            rasterize(Observation(rotated)), np.rot90(image, k=quarter)
        )


def test_pack_round_trip():
    rng = np.random.default_rng(31)
    for _ in range(50):
        image = rasterize(random_observation(rng, int(rng.integers(0, 6))))
        payload = pack_image(image)
        assert len(payload) == 750
        np.testing.assert_array_equal(unpack_image(payload), image)


def test_pack_is_msb_first():
    image = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    image[0, 0] = 1
    payload = pack_image(image)
    assert payload[0] == 0b1000_0000


def test_pack_rejects_wrong_shape():
    with pytest.raises(ContractViolationError):
        pack_image(np.zeros((10, 10), dtype=np.uint8))
    with pytest.raises(ContractViolationError):
        unpack_image(b"\x00" * 10)
