"""End-user command behavior via the click runner."""
import json

from click.testing import CliRunner

from spotsched.cli import main
from spotsched.cluster import ON_DEMAND, SPOT, ClusterSpec, NodeSpec, save_cluster
from spotsched.harness import COMPARISON_HEADER, CURVE_HEADER
from spotsched.workflow import load_workflow


def invoke(args):
    return CliRunner().invoke(main, args)


def test_help_lists_commands():
    result = invoke(["--help"])
    assert result.exit_code == 0
    for cmd in ("train", "compare", "generate"):
        assert cmd in result.output


def test_generate_writes_workflow_files(tmp_path):
    out = tmp_path / "wl"
    result = invoke(["generate", "--count", "4", "--seed", "9", "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = sorted(out.glob("*.json"))
    assert [f.name for f in files] == [f"wf-{i:03d}.json" for i in range(4)]
    for f in files:
        load_workflow(f)
    assert "wrote 4 workflow files" in result.output


def test_generate_reruns_are_byte_identical(tmp_path):
    for sub in ("one", "two"):
        result = invoke(["generate", "--count", "3", "--seed", "7", "--out", str(tmp_path / sub)])
        assert result.exit_code == 0, result.output
    one = sorted((tmp_path / "one").glob("*.json"))
    two = sorted((tmp_path / "two").glob("*.json"))
    assert [f.name for f in one] == [f.name for f in two]
    for a, b in zip(one, two):
        assert a.read_bytes() == b.read_bytes()


def test_generate_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "wl.json"
    cfg.write_text(json.dumps({"count": 9, "parallelism": [2]}), encoding="utf-8")
    out = tmp_path / "out"
    result = invoke(["generate", "--config", str(cfg), "--count", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert len(list(out.glob("*.json"))) == 2


def test_generate_rejects_bad_config(tmp_path):
    cfg = tmp_path / "wl.json"
    cfg.write_text('{"bogus": 1}', encoding="utf-8")
    result = invoke(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 1
    assert "unknown fields" in result.output


def test_train_then_compare_pipeline(tmp_path):
    train_out = tmp_path / "run"
    result = invoke(["train", "--episodes", "2", "--seed", "3", "--out", str(train_out)])
    assert result.exit_code == 0, result.output
    assert (train_out / "checkpoint.json").exists()
    curve = (train_out / "training_curve.csv").read_text(encoding="utf-8").splitlines()
    assert curve[0] == ",".join(CURVE_HEADER)
    assert len(curve) == 3  # header + one line per episode
    assert "trained 2 episodes" in result.output

    cmp_out = tmp_path / "cmp"
    result = invoke([
        "compare",
        "--schedulers", "agent,random",
        "--checkpoint", str(train_out / "checkpoint.json"),
        "--seeds", "1,2",
        "--out", str(cmp_out),
    ])
    assert result.exit_code == 0, result.output
    table = (cmp_out / "summary.txt").read_text(encoding="utf-8")
    assert "agent" in table and "random" in table
    rows = (cmp_out / "comparison.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == ",".join(COMPARISON_HEADER)
    assert len(rows) == 5  # header + 2 schedulers x 2 seeds


def test_compare_baselines_only(tmp_path):
    out = tmp_path / "cmp"
    result = invoke(["compare", "--seeds", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    table = (out / "summary.txt").read_text(encoding="utf-8")
    for name in ("random", "k8-default", "on-demand"):
        assert name in table


def test_compare_agent_requires_checkpoint(tmp_path):
    result = invoke(["compare", "--schedulers", "agent", "--out", str(tmp_path / "x")])
    assert result.exit_code == 2
    assert "--checkpoint" in result.output


def test_compare_unknown_scheduler(tmp_path):
    result = invoke(["compare", "--schedulers", "metal", "--out", str(tmp_path / "x")])
    assert result.exit_code == 1
    assert "unknown scheduler" in result.output


def test_compare_bad_seeds(tmp_path):
    result = invoke(["compare", "--seeds", "1,x", "--out", str(tmp_path / "x")])
    assert result.exit_code == 2
    assert "--seeds" in result.output


def test_missing_cluster_file_is_a_usage_error(tmp_path):
    result = invoke(["train", "--cluster", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_compare_checkpoint_cluster_mismatch(tmp_path):
    train_out = tmp_path / "run"
    result = invoke(["train", "--episodes", "1", "--out", str(train_out)])
    assert result.exit_code == 0, result.output
    other = ClusterSpec(nodes=(
        NodeSpec(id="s0", flavor="f", cpu=2.0, mem_gb=8.0, rate=2.0,
                 pricing_class=SPOT, price_per_hour=0.03),
        NodeSpec(id="o0", flavor="f", cpu=2.0, mem_gb=8.0, rate=2.0,
                 pricing_class=ON_DEMAND, price_per_hour=0.06),
    ))
    cluster_file = tmp_path / "small.json"
    save_cluster(other, cluster_file)
    result = invoke([
        "compare",
        "--cluster", str(cluster_file),
        "--schedulers", "agent",
        "--checkpoint", str(train_out / "checkpoint.json"),
        "--seeds", "1",
        "--out", str(tmp_path / "cmp"),
    ])
    assert result.exit_code == 1
    assert "does not match" in result.output
