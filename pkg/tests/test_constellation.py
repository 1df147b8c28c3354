import json

import numpy as np
import pytest

from swarmgather.constellation import ConstellationSpec, generate, load, save
from swarmgather.errors import ScenarioFormatError
from swarmgather.geometry import SwarmState
from swarmgather.visibility import build_graph

from test_visibility import bfs_components


def connected_by_bfs(state, v):
    graph = build_graph(state, v)
    return len(bfs_components(state.n, graph.edges)) == 1


def test_single_agent():
    state = generate(ConstellationSpec(n_agents=1, seed=123))
    assert state.n == 1
    np.testing.assert_array_equal(state.positions, [[0.0, 0.0]])


def test_challenging_is_connected_under_v_eff():
    spec = ConstellationSpec(n_agents=10, visibility=50.0, visibility_ratio=0.75, seed=99)
    state = generate(spec)
    assert connected_by_bfs(state, 37.5)


def test_marginal_is_connected_under_v_eff():
    spec = ConstellationSpec(n_agents=20, visibility=50.0, visibility_ratio=1.0, seed=4)
    state = generate(spec)
    assert connected_by_bfs(state, 50.0)


@pytest.mark.parametrize("vr", [0.5, 0.75, 1.0])
def test_batch_connected_and_separated(vr):
    for seed in range(60):
        spec = ConstellationSpec(n_agents=10, visibility=50.0, visibility_ratio=vr, seed=seed)
        state = generate(spec)
        assert connected_by_bfs(state, spec.v_eff)
        diff = state.positions[:, None, :] - state.positions[None, :, :]
        dists = np.sqrt((diff * diff).sum(axis=-1))
        np.fill_diagonal(dists, np.inf)
        assert dists.min() >= spec.min_separation


def test_same_seed_is_bit_exact():
    spec = ConstellationSpec(n_agents=15, seed=2024)
    a = generate(spec)
    b = generate(spec)
    assert a.positions.tobytes() == b.positions.tobytes()


def test_different_seeds_differ():
    base = dict(n_agents=12, visibility=50.0, visibility_ratio=0.75)
    a = generate(ConstellationSpec(seed=1, **base))
    b = generate(ConstellationSpec(seed=2, **base))
    assert a.positions.tobytes() != b.positions.tobytes()


def test_mean_radius_grows_with_vr():
    # harder (higher VR) constellations are more stretched on average
    means = []
    for vr in (0.5, 0.75, 1.0):
        radii = []
        for seed in range(200):
            state = generate(
                ConstellationSpec(n_agents=10, visibility=50.0, visibility_ratio=vr, seed=seed)
            )
            center = state.positions.mean(axis=0)
            radii.append(np.sqrt(((state.positions - center) ** 2).sum(axis=1)).max())
        means.append(np.mean(radii))
    assert means[0] <= means[1] <= means[2]


def test_round_trip_is_bit_exact(tmp_path):
    for seed in range(100):
        spec = ConstellationSpec(n_agents=8, visibility=50.0, visibility_ratio=0.75, seed=seed)
        state = generate(spec)
        path = tmp_path / f"scenario_{seed}.json"
        save(state, spec, path)
        loaded_state, loaded_spec = load(path)
        assert loaded_spec == spec
        assert loaded_state.positions.tobytes() == state.positions.tobytes()


def test_empty_file_is_a_parse_error(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    with pytest.raises(ScenarioFormatError, match="empty"):
        load(path)


def test_version_mismatch_is_explicit(tmp_path):
    spec = ConstellationSpec(n_agents=3, seed=0)
    state = generate(spec)
    path = tmp_path / "scenario.json"
    save(state, spec, path)
    doc = json.loads(path.read_text())
    doc["version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioFormatError, match="version"):
        load(path)


def test_malformed_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1, "n": oops}')
    with pytest.raises(ScenarioFormatError, match="line"):
        load(path)


def test_missing_field(tmp_path):
    path = tmp_path / "missing.json"
    path.write_text('{"version": 1, "n": 2}')
    with pytest.raises(ScenarioFormatError, match="missing field"):
        load(path)


def test_wrong_position_count(tmp_path):
    path = tmp_path / "short.json"
    doc = {
        "version": 1,
        "n": 3,
        "V": 50.0,
        "VR": 0.75,
        "seed": 0,
        "min_separation": 1.0,
        "positions": [[0.0, 0.0]],
    }
    path.write_text(json.dumps(doc))
    with pytest.raises(ScenarioFormatError, match="positions"):
        load(path)


def test_spec_validation():
    with pytest.raises(ValueError):
        ConstellationSpec(n_agents=0)
    with pytest.raises(ValueError):
        ConstellationSpec(n_agents=5, visibility_ratio=0.0)
    with pytest.raises(ValueError):
        ConstellationSpec(n_agents=5, visibility_ratio=1.5)
    with pytest.raises(ValueError):
        ConstellationSpec(n_agents=5, visibility=2.0, visibility_ratio=0.5, min_separation=1.5)


def test_roundtrip_of_state_not_from_generator(tmp_path):
    spec = ConstellationSpec(n_agents=2, seed=7)
    state = SwarmState(np.array([[0.123456789012345, -9.87654321e-3], [1.0, 2.0]]))
    path = tmp_path / "custom.json"
    save(state, spec, path)
    loaded_state, _ = load(path)
    assert loaded_state.positions.tobytes() == state.positions.tobytes()
