import itertools

import numpy as np
import pytest

from dmfrl.checkpoint import Checkpoint, KindError, load_checkpoint
from dmfrl.config import ConfigError, ExperimentConfig
from dmfrl.ddpg import AgentConfig
from dmfrl.harness import (
    CSV_HEADER,
    MetricsRow,
    benchmark,
    cell_name,
    evaluate,
    mean_success_at,
    read_metrics,
    summarize,
    train,
    variant_names,
    world_config,
    write_metrics,
)
from dmfrl.numkit import MLP
from dmfrl.pushworld import OBS_DIM, PushWorld


def tiny_exp(**kw):
    defaults = dict(
        env_variant="push-env-1",
        method="tfs",
        reward_mode="mgr",
        episodes=4,
        eval_every=2,
        eval_episodes=2,
        seeds=(1,),
        train_steps_per_episode=2,
        agent=AgentConfig(batch_size=16, hidden_dims=(16, 16)),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def counting_clock():
    counter = itertools.count()
    return lambda: float(next(counter))


def zero_actor_checkpoint():
    net = MLP([15, 8, 2], ["relu", "tanh"])
    for p in net.parameters():
        p[...] = 0.0
    return Checkpoint.from_mlp(net, "mlp_actor")


# -- variants ------------------------------------------------------------------


def test_variant_registry_complete():
    names = variant_names()
    assert len(names) == 12
    for name in names:
        cfg = world_config(name)
        world = PushWorld(cfg)
        _, obs = world.reset(0)
        assert obs.vector.shape == (OBS_DIM,)


def test_variant_parameters():
    assert world_config("push-env-1").friction == 0.5
    assert world_config("push-env-2").object_shape == "flat_box"
    assert world_config("push-env-3").obstacle is not None
    assert world_config("slide-base-b").task == "slide"
    assert world_config("slide-base-b").friction == 0.7


def test_variant_overrides_apply():
    cfg = world_config("push-env-1", {"friction": 0.3, "noise_std": 0.0})
    assert cfg.friction == 0.3
    assert cfg.noise_std == 0.0


def test_unknown_variant_rejected():
    with pytest.raises(ConfigError):
        world_config("push-env-9")
    with pytest.raises(ConfigError):
        world_config("swim-env-1")


# -- metrics csv -------------------------------------------------------------------


def test_metrics_roundtrip(tmp_path):
    rows = [MetricsRow(1, 50, 0.25, -31.5, 12.345), MetricsRow(1, 100, 0.5, -20.0, 25.0)]
    path = tmp_path / "m.csv"
    write_metrics(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == CSV_HEADER
    back = read_metrics(path)
    assert back[0].success_rate == 0.25
    assert back[1].avg_return == -20.0
    assert back[0].episode == 50


# -- train ------------------------------------------------------------------------------


def test_zero_episode_train_returns_initialized_agent(tmp_path):
    exp = tiny_exp(episodes=0)
    ckpt, rows = train(exp, seed=3, ckpt_path=tmp_path / "a.ckpt")
    assert rows == []
    # identical to a freshly initialized agent under the same seed
    ckpt2, _ = train(exp, seed=3)
    assert np.array_equal(ckpt.params, ckpt2.params)
    assert (tmp_path / "a.ckpt").exists()
    assert (tmp_path / "a.ckpt.critic").exists()


def test_metrics_row_count_is_floor_episodes_over_eval_every():
    exp = tiny_exp(episodes=5, eval_every=2)
    _, rows = train(exp, seed=1)
    assert len(rows) == 2
    assert [r.episode for r in rows] == [2, 4]


def test_train_deterministic_metrics_bytes(tmp_path):
    exp = tiny_exp()
    p1, p2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
    train(exp, seed=7, metrics_path=p1, clock=counting_clock())
    train(exp, seed=7, metrics_path=p2, clock=counting_clock())
    assert p1.read_bytes() == p2.read_bytes()


def test_train_checkpoint_deterministic(tmp_path):
    exp = tiny_exp()
    c1, _ = train(exp, seed=11)
    c2, _ = train(exp, seed=11)
    assert np.array_equal(c1.params, c2.params)
    assert c1.content_hash() == c2.content_hash()
    c3, _ = train(exp, seed=12)
    assert not np.array_equal(c1.params, c3.params)


def test_train_smoke_metrics_well_formed(tmp_path):
    exp = tiny_exp(reward_mode="sparse")
    _, rows = train(exp, seed=2, metrics_path=tmp_path / "m.csv")
    back = read_metrics(tmp_path / "m.csv")
    assert len(back) == len(rows)
    for r in rows:
        assert 0.0 <= r.success_rate <= 1.0
        assert r.avg_return <= 0.0
        assert r.wall_time_s >= 0.0


def test_transfer_method_starts_from_primitive(tmp_path):
    base = tiny_exp(env_variant="push-base-a")
    prim_path = tmp_path / "prim.ckpt"
    prim_ckpt, _ = train(base, seed=5, ckpt_path=prim_path)

    exp = tiny_exp(method="transfer", primitive_checkpoints=(str(prim_path),), episodes=0)
    warm, _ = train(exp, seed=6)
    assert np.array_equal(warm.params, prim_ckpt.params)


def test_dmf_methods_record_provenance(tmp_path):
    paths = []
    hashes = []
    for i, variant in enumerate(["push-base-a", "push-base-b", "push-base-c"]):
        p = tmp_path / f"prim{i}.ckpt"
        ckpt, _ = train(tiny_exp(env_variant=variant, episodes=1, eval_every=5), seed=i, ckpt_path=p)
        paths.append(str(p))
        hashes.append(load_checkpoint(p).content_hash())

    exp2 = tiny_exp(method="dmf2", primitive_checkpoints=tuple(paths[:2]), episodes=0)
    fused2, _ = train(exp2, seed=9)
    assert fused2.kind == "fusion_actor"
    assert fused2.arch["source_ids"] == hashes[:2]
    assert fused2.arch["n"] == 2

    exp3 = tiny_exp(method="dmf3", primitive_checkpoints=tuple(paths), episodes=0)
    fused3, _ = train(exp3, seed=9)
    assert fused3.arch["source_ids"] == hashes
    assert fused3.arch["n"] == 3
    # fused feature width: head input is 3d regardless of n
    assert fused2.arch["head_layer_dims"][0] == fused3.arch["head_layer_dims"][0]


def test_dmf_training_preserves_primitives(tmp_path):
    p = tmp_path / "prim.ckpt"
    train(tiny_exp(env_variant="push-base-a", episodes=1, eval_every=5), seed=0, ckpt_path=p)
    prim_first_weight = load_checkpoint(p).to_mlp().weights[0]

    exp = tiny_exp(method="dmf2", primitive_checkpoints=(str(p), str(p)), episodes=3, eval_every=5)
    fused, _ = train(exp, seed=1)
    rebuilt = fused.to_fusion()
    for prim in rebuilt.primitives:
        assert np.array_equal(prim.weight, prim_first_weight)


# -- evaluate ----------------------------------------------------------------------------


def test_zero_actor_never_succeeds_return_minus_fifty():
    ckpt = zero_actor_checkpoint()
    sr, ret = evaluate(ckpt, "push-env-1", n_episodes=20, seed=4, gamma=1.0, reward_mode="sparse")
    assert sr == 0.0
    assert ret == -50.0


def test_evaluate_reproducible():
    ckpt = zero_actor_checkpoint()
    a = evaluate(ckpt, "push-env-2", n_episodes=1, seed=8, gamma=0.9, reward_mode="mgr")
    b = evaluate(ckpt, "push-env-2", n_episodes=1, seed=8, gamma=0.9, reward_mode="mgr")
    assert a == b


def test_evaluate_rejects_critic():
    critic = Checkpoint.from_mlp(MLP([17, 8, 1]), "critic")
    with pytest.raises(KindError):
        evaluate(critic, "push-env-1", n_episodes=1, seed=0)


def test_evaluate_fusion_checkpoint(tmp_path):
    p = tmp_path / "prim.ckpt"
    train(tiny_exp(env_variant="push-base-a", episodes=1, eval_every=5), seed=0, ckpt_path=p)
    exp = tiny_exp(method="dmf2", primitive_checkpoints=(str(p), str(p)), episodes=0)
    fused, _ = train(exp, seed=1)
    sr, ret = evaluate(fused, "push-env-1", n_episodes=3, seed=2)
    assert 0.0 <= sr <= 1.0


# -- benchmark ----------------------------------------------------------------------------


def test_benchmark_single_cell(tmp_path):
    exp = tiny_exp(seeds=(1, 2))
    results = benchmark([exp], tmp_path / "out", clock=counting_clock())
    assert len(results) == 1
    res = results[0]
    assert not res.failed
    assert len(res.rows) == 2 * 2  # two seeds, two eval points
    for seed in (1, 2):
        run_csv = tmp_path / "out" / f"{cell_name(exp)}_seed{seed}.csv"
        assert run_csv.exists()
        back = read_metrics(run_csv)
        assert [r.episode for r in back] == [2, 4]
    assert (tmp_path / "out" / "summary.csv").exists()
    assert (tmp_path / "out" / "summary.txt").exists()


def test_benchmark_summary_matches_hand_aggregation(tmp_path):
    exp = tiny_exp(seeds=(1, 2, 3))
    results = benchmark([exp], tmp_path / "out")
    res = results[0]
    per_seed = []
    for seed in (1, 2, 3):
        rows = read_metrics(tmp_path / "out" / f"{cell_name(exp)}_seed{seed}.csv")
        per_seed.append({r.episode: r.success_rate for r in rows})
    for episode in (2, 4):
        hand_mean = sum(d[episode] for d in per_seed) / 3
        assert mean_success_at(res.rows, episode) == pytest.approx(hand_mean, abs=1e-12)
    summary_csv = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert summary_csv[0] == "cell,seeds,sr@2,sr@4,status"
    cells = summary_csv[1].split(",")
    assert cells[0] == cell_name(exp)
    assert float(cells[2]) == pytest.approx(mean_success_at(res.rows, 2), abs=5e-4)


def test_benchmark_partial_failure_marks_cell(tmp_path):
    good = tiny_exp(seeds=(1,))
    bad = tiny_exp(method="transfer", primitive_checkpoints=("missing.ckpt",), seeds=(1,))
    results = benchmark([good, bad], tmp_path / "out")
    assert not results[0].failed
    assert results[1].failed
    assert "FileNotFoundError" in results[1].failed[0][1]
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "FAILED" in summary
    assert "ok" in summary


def test_summarize_with_synthetic_rows():
    exp = tiny_exp(seeds=(1, 2))
    rows = [
        MetricsRow(1, 50, 0.2, -40.0, 1.0),
        MetricsRow(2, 50, 0.4, -35.0, 1.0),
        MetricsRow(1, 100, 0.6, -25.0, 2.0),
        MetricsRow(2, 100, 0.8, -15.0, 2.0),
    ]
    from dmfrl.harness import CellResult

    csv_text, txt = summarize([CellResult(cell_name(exp), exp, rows, [])])
    assert "sr@50" in csv_text and "sr@100" in csv_text
    line = csv_text.splitlines()[1].split(",")
    assert line[2] == "0.300"
    assert line[3] == "0.700"
    assert "0.300" in txt
