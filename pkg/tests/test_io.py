import json
from datetime import datetime

import numpy as np
import pytest

from salsa_rl.autoencoder import init_autoencoder
from salsa_rl.envs import default_config, make_env
from salsa_rl.io import (
    BundleError, ModelBundle, canonical_json, export_trajectory, file_sha256, load_autoencoder, load_bundle,
    load_trajectory, make_run_dir, read_json, read_trajectory_csv, save_autoencoder, save_bundle, write_json,
    write_manifest,
)
from salsa_rl.nn import init_mlp
from salsa_rl.policy import ActionMask, SalsaPolicy, init_dynamics_net, policy_step, replay_actions, rollout
from salsa_rl.trainer import default_train_config


def _bundle(seed=0, env_id="pendulum"):
    rng = np.random.default_rng(seed)
    env = make_env(env_id)
    ae = init_autoencoder(env.action_dim, 3, env.action_low, env.action_high, rng)
    ae.frozen = True
    ae.heldout_mse = 1.5e-6
    pol = SalsaPolicy(ae, init_dynamics_net(env.obs_dim, 3, rng, (16, 16), final_scale=0.5))
    critic = init_mlp([env.obs_dim + env.action_dim, 16, 1], rng)
    return ModelBundle(env_id, pol, critic, default_config(env_id), default_train_config(env_id), {"note": "x"})


def test_bundle_round_trip_is_byte_identical(tmp_path):
    b = _bundle()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_bundle(p1, b)
    loaded = load_bundle(p1)
    save_bundle(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()
    assert loaded.content_hash == b.content_hash
    s = np.array([0.3, -0.2, 1.0])
    a1, _ = policy_step(b.policy, s, [0.1])
    a2, _ = policy_step(loaded.policy, s, [0.1])
    assert np.array_equal(a1, a2)
    assert loaded.train_config == b.train_config and loaded.env_config == b.env_config


def test_tampered_bundle_rejected(tmp_path):
    p = tmp_path / "a.json"
    save_bundle(p, _bundle())
    doc = read_json(p)
    doc["dynamics"]["layers"][0]["weight"][0] += 1e-9
    write_json(p, doc)
    with pytest.raises(BundleError, match="hash"):
        load_bundle(p)


def test_version_and_kind_checked(tmp_path):
    p = tmp_path / "a.json"
    save_bundle(p, _bundle())
    doc = read_json(p)
    doc["format_version"] = 99
    write_json(p, doc)
    with pytest.raises(BundleError, match="version"):
        load_bundle(p)
    q = tmp_path / "ae.json"
    save_autoencoder(q, _bundle().policy.autoencoder, "pendulum")
    with pytest.raises(BundleError, match="expected"):
        load_bundle(q)
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "junk.json")


def test_autoencoder_round_trip(tmp_path):
    ae = _bundle().policy.autoencoder
    p = tmp_path / "ae.json"
    save_autoencoder(p, ae, "pendulum", {"epochs": 3})
    back, body = load_autoencoder(p)
    assert body["extra"] == {"epochs": 3} and body["h_d"] == 3
    assert back.heldout_mse == ae.heldout_mse
    for la, lb in zip(ae.encoder.layers + ae.decoder.layers, back.encoder.layers + back.decoder.layers):
        assert np.array_equal(la.weight, lb.weight) and np.array_equal(la.bias, lb.bias)


def test_non_finite_values_are_strict_json():
    text = canonical_json({"a": float("inf"), "b": [float("-inf"), float("nan")], "c": np.float64(0.1)})
    assert json.loads(text) == {"a": "inf", "b": ["-inf", "nan"], "c": 0.1}


def test_floats_round_trip_exactly():
    xs = np.random.default_rng(0).normal(size=1000) * 10.0 ** np.arange(-300, 300, 0.6)
    assert np.array_equal(np.array(json.loads(canonical_json(xs))), xs)


def test_trajectory_export_replays(tmp_path):
    b = _bundle()
    env = make_env("pendulum")
    traj = rollout(env, b.policy, horizon=60, seed=4, mask=ActionMask.parse("10:20"))
    csv_path, json_path = export_trajectory(tmp_path / "traj", traj, {"bundle": "x"})
    cols = read_trajectory_csv(csv_path)
    assert list(cols)[:4] == ["t", "state_0", "state_1", "state_2"]
    assert np.array_equal(cols["action_0"], traj.actions[:, 0])
    assert np.array_equal(cols["state_2"], traj.observations[:, 2])
    back = load_trajectory(csv_path)
    assert np.array_equal(back.A, traj.A) and np.array_equal(back.masked, traj.masked)
    # replaying the recorded actions from the recorded initial state reproduces the states exactly
    replay = replay_actions(make_env("pendulum"), back.initial_state, back.actions)
    assert np.array_equal(replay, traj.states)
    side = read_json(json_path)
    assert side["extra"] == {"bundle": "x"} and len(side["rho"]) == 60


def test_run_dir_and_manifest(tmp_path):
    now = datetime(2026, 1, 2, 3, 4, 5)
    d1 = make_run_dir(tmp_path, 7, now)
    d2 = make_run_dir(tmp_path, 7, now)
    assert d1.name == "20260102T030405_seed7" and d1 != d2
    inp = tmp_path / "in.json"
    inp.write_text("{}")
    m = read_json(write_manifest(d1, "train", ["train", "--env", "pendulum"], {"k": 1}, 7,
                                 inputs={"ae": inp}, outputs={"bundle": d1 / "bundle.json"}, status="ok"))
    assert m["inputs"]["ae"]["sha256"] == file_sha256(inp)
    assert m["seed"] == 7 and m["status"] == "ok" and m["argv"][0] == "train"
    assert "numpy" in m["versions"]
