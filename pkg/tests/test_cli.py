import json

import pytest
from click.testing import CliRunner

from promptrack.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def world_file(tmp_path_factory, runner):
    path = tmp_path_factory.mktemp("cli") / "world.json"
    result = runner.invoke(
        main, ["gen-world", "--seed", "5", "--frames", "10", "--grid", "10", "--out", str(path)]
    )
    assert result.exit_code == 0, result.output
    return path


class TestGenWorld:
    def test_writes_scenario_and_annotations(self, runner, tmp_path):
        out = tmp_path / "w.json"
        ann = tmp_path / "ann.json"
        result = runner.invoke(
            main,
            ["gen-world", "--seed", "2", "--frames", "6", "--out", str(out), "--annotations", str(ann)],
        )
        assert result.exit_code == 0, result.output
        assert out.exists() and ann.exists()
        doc = json.loads(ann.read_text())
        assert set(doc) == {"categories", "annotations", "images"}


class TestTrack:
    def test_oracle_track_is_perfect(self, runner, world_file, tmp_path):
        out = tmp_path / "tracks.jsonl"
        result = runner.invoke(
            main, ["track", "--scenario", str(world_file), "--oracle", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "CA-MOTA    1.0000" in result.output
        assert out.read_text().count("\n") > 0

    def test_missing_weights_file_exits_2(self, runner, world_file, tmp_path):
        result = runner.invoke(
            main,
            ["track", "--scenario", str(world_file), "--weights", str(tmp_path / "nope.npz"),
             "--out", str(tmp_path / "t.jsonl")],
        )
        assert result.exit_code == 2
        assert "not found" in result.output

    def test_neither_weights_nor_oracle_exits_2(self, runner, world_file, tmp_path):
        result = runner.invoke(
            main, ["track", "--scenario", str(world_file), "--out", str(tmp_path / "t.jsonl")]
        )
        assert result.exit_code == 2

    def test_timings_flag_prints_per_frame_lines(self, runner, world_file, tmp_path):
        result = runner.invoke(
            main,
            ["track", "--scenario", str(world_file), "--oracle", "--timings",
             "--mode", "simplified", "--out", str(tmp_path / "t.jsonl")],
        )
        assert result.exit_code == 0, result.output
        timing_lines = [l for l in result.output.splitlines() if l.startswith("frame ") and l.endswith("s")]
        assert len(timing_lines) == 10

    def test_schedule_file(self, runner, world_file, tmp_path):
        schedule = tmp_path / "schedule.json"
        schedule.write_text(json.dumps([[0, "person. car. dog. ball"], [5, "person"]]))
        out = tmp_path / "tracks.jsonl"
        result = runner.invoke(
            main,
            ["track", "--scenario", str(world_file), "--oracle", "--schedule", str(schedule),
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output


class TestEval:
    def test_perfect_self_evaluation(self, runner, world_file, tmp_path):
        tracks = tmp_path / "gt.jsonl"
        runner.invoke(main, ["track", "--scenario", str(world_file), "--oracle", "--out", str(tracks)])
        result = runner.invoke(
            main, ["eval", "--gt", str(tracks), "--pred", str(tracks), "--class-agnostic"]
        )
        assert result.exit_code == 0, result.output
        assert "CA-MOTA  1.0000" in result.output

    def test_malformed_prediction_file(self, runner, world_file, tmp_path):
        tracks = tmp_path / "gt.jsonl"
        runner.invoke(main, ["track", "--scenario", str(world_file), "--oracle", "--out", str(tracks)])
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"frame": 0, "id": 1}\n')
        result = runner.invoke(main, ["eval", "--gt", str(tracks), "--pred", str(bad)])
        assert result.exit_code == 2
        assert "malformed" in result.output


class TestTrainCommand:
    def test_short_training_run_writes_checkpoint_and_csv(self, runner, tmp_path):
        world = tmp_path / "tiny.json"
        runner.invoke(main, ["gen-world", "--seed", "3", "--frames", "6", "--grid", "8", "--out", str(world)])
        weights = tmp_path / "weights.npz"
        csv = tmp_path / "loss.csv"
        result = runner.invoke(
            main,
            ["train", "--scenario", str(world), "--epochs", "1", "--out", str(weights),
             "--loss-csv", str(csv)],
        )
        assert result.exit_code == 0, result.output
        assert weights.exists()
        assert csv.read_text().startswith("epoch,alignment,objectness,giou,total")

    def test_resume_roundtrip(self, runner, tmp_path):
        world = tmp_path / "tiny.json"
        runner.invoke(main, ["gen-world", "--seed", "3", "--frames", "6", "--grid", "8", "--out", str(world)])
        first = tmp_path / "first.npz"
        result = runner.invoke(main, ["train", "--scenario", str(world), "--epochs", "1", "--out", str(first)])
        assert result.exit_code == 0, result.output
        second = tmp_path / "second.npz"
        result = runner.invoke(
            main,
            ["train", "--scenario", str(world), "--epochs", "1", "--resume", str(first),
             "--out", str(second)],
        )
        assert result.exit_code == 0, result.output
        assert "10 optimizer steps" in result.output  # 5 pairs x 2 epochs total
