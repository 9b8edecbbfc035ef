import numpy as np
import pytest

from dmfrl.checkpoint import load_checkpoint, save_checkpoint, Checkpoint
from dmfrl.cli import build_parser, expand_matrix, main
from dmfrl.config import ConfigError, parse_config_text
from dmfrl.numkit import MLP

TINY = """
env=push-env-1
method=tfs
reward=mgr
episodes=2
eval_every=1
eval_episodes=1
agent.batch_size=8
agent.hidden_dims=8,8
train_steps_per_episode=1
"""


def write_tiny_config(tmp_path, extra=""):
    path = tmp_path / "exp.cfg"
    path.write_text(TINY + extra)
    return path


def make_actor_ckpt(tmp_path, name, seed=0):
    net = MLP([15, 8, 2], ["relu", "tanh"], rng=np.random.default_rng(seed))
    path = tmp_path / name
    save_checkpoint(path, Checkpoint.from_mlp(net, "mlp_actor"))
    return path


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "dmfrl" in capsys.readouterr().out


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for sub in ("train", "fuse", "evaluate", "benchmark"):
        assert sub in out


def test_train_writes_checkpoint_and_metrics(tmp_path, capsys):
    cfg = write_tiny_config(tmp_path)
    out = tmp_path / "agent.ckpt"
    rc = main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out)])
    assert rc == 0
    assert out.exists()
    assert (tmp_path / "agent.ckpt.critic").exists()
    assert (tmp_path / "agent.ckpt.metrics.csv").exists()
    assert "final success rate" in capsys.readouterr().out


def test_train_seed_env_var_and_flag_priority(tmp_path, monkeypatch):
    cfg = write_tiny_config(tmp_path)
    out_env = tmp_path / "env.ckpt"
    out_flag = tmp_path / "flag.ckpt"
    out_default = tmp_path / "default.ckpt"

    monkeypatch.setenv("DMFRL_SEED", "3")
    main(["train", "--config", str(cfg), "--out", str(out_env)])
    main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out_flag)])
    monkeypatch.delenv("DMFRL_SEED")
    main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out_default)])

    h_env = load_checkpoint(out_env).content_hash()
    h_flag = load_checkpoint(out_flag).content_hash()
    assert h_env == h_flag  # env var supplied the same seed as the flag

    monkeypatch.setenv("DMFRL_SEED", "99")
    out_override = tmp_path / "override.ckpt"
    main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out_override)])
    assert load_checkpoint(out_override).content_hash() == h_flag  # flag wins


def test_fuse_records_sources(tmp_path, capsys):
    a = make_actor_ckpt(tmp_path, "a.ckpt", seed=1)
    b = make_actor_ckpt(tmp_path, "b.ckpt", seed=2)
    out = tmp_path / "fused.ckpt"
    rc = main(["fuse", "--inputs", str(a), str(b), "--out", str(out), "--seed", "0"])
    assert rc == 0
    fused = load_checkpoint(out)
    assert fused.kind == "fusion_actor"
    assert fused.arch["n"] == 2
    assert fused.arch["source_ids"] == [
        load_checkpoint(a).content_hash(),
        load_checkpoint(b).content_hash(),
    ]
    assert "fused 2 primitives" in capsys.readouterr().out


def test_fuse_requires_two_inputs(tmp_path, capsys):
    a = make_actor_ckpt(tmp_path, "a.ckpt")
    rc = main(["fuse", "--inputs", str(a), "--out", str(tmp_path / "f.ckpt")])
    assert rc == 2
    assert "two" in capsys.readouterr().err


def test_evaluate_prints_metrics(tmp_path, capsys):
    a = make_actor_ckpt(tmp_path, "a.ckpt")
    rc = main(
        ["evaluate", "--ckpt", str(a), "--env", "push-env-1", "--episodes", "2", "--seed", "5"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "success_rate=" in out
    assert "avg_return=" in out


def test_evaluate_unknown_env_fails_cleanly(tmp_path, capsys):
    a = make_actor_ckpt(tmp_path, "a.ckpt")
    rc = main(["evaluate", "--ckpt", str(a), "--env", "moon-env-1", "--episodes", "1"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_evaluate_missing_checkpoint(tmp_path, capsys):
    rc = main(["evaluate", "--ckpt", str(tmp_path / "nope.ckpt"), "--env", "push-env-1"])
    assert rc == 2


def test_benchmark_runs_matrix(tmp_path, capsys):
    cfg = tmp_path / "matrix.cfg"
    cfg.write_text(TINY + "methods=tfs\nrewards=sparse,mgr\nseeds=1\n")
    out_dir = tmp_path / "bench"
    rc = main(["benchmark", "--config", str(cfg), "--out-dir", str(out_dir)])
    assert rc == 0
    assert (out_dir / "summary.txt").exists()
    out = capsys.readouterr().out
    assert "push-env-1_tfs_sparse: ok" in out
    assert "push-env-1_tfs_mgr: ok" in out


def test_benchmark_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "matrix.cfg"
    cfg.write_text(TINY + "methods=transfer\nprimitives=missing.ckpt\nseeds=1\n")
    rc = main(["benchmark", "--config", str(cfg), "--out-dir", str(tmp_path / "bench")])
    assert rc == 1
    assert "FAILED" in capsys.readouterr().out


def test_expand_matrix_covers_product(tmp_path):
    a = make_actor_ckpt(tmp_path, "a.ckpt", seed=1)
    b = make_actor_ckpt(tmp_path, "b.ckpt", seed=2)
    kv = parse_config_text(
        f"""
        envs=push-env-1,push-env-2
        methods=tfs,transfer,dmf2
        rewards=sparse,mgr
        primitives={a},{b}
        seeds=1,2
        episodes=2
        eval_every=1
        eval_episodes=1
        """
    )
    matrix = expand_matrix(kv)
    assert len(matrix) == 2 * 3 * 2
    methods = {(m.env_variant, m.method, m.reward_mode) for m in matrix}
    assert ("push-env-2", "dmf2", "mgr") in methods
    for m in matrix:
        if m.method == "dmf2":
            assert m.primitive_checkpoints == (str(a), str(b))
        if m.method == "transfer":
            assert m.primitive_checkpoints == (str(a),)


def test_expand_matrix_insufficient_primitives():
    kv = parse_config_text("methods=dmf3\nprimitives=a.ckpt\n")
    with pytest.raises(ConfigError):
        expand_matrix(kv)


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
