import json

import numpy as np
import pytest

from cakaudio.audio_io import read_wav, write_wav
from cakaudio.cli import main
from cakaudio.trainer import load_checkpoint, new_checkpoint, save_checkpoint

from conftest import build_two_texture_corpus, noise_clip


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clicorpus")
    build_two_texture_corpus(root, n_tones=2, n_noise=2, seconds=0.5, sr=44100)
    return root


class TestIngestCommand:
    def test_builds_sidecar(self, corpus_dir, capsys):
        rc = main(["ingest", str(corpus_dir), "--segment-seconds", "0.5"])
        assert rc == 0
        assert (corpus_dir / "corpus_index.json").is_file()
        assert "indexed 4 segments" in capsys.readouterr().out

    def test_empty_directory_fails_with_code(self, tmp_path, capsys):
        rc = main(["ingest", str(tmp_path)])
        assert rc == 1
        assert capsys.readouterr().err.startswith("ERR:EMPTY_CORPUS:")


class TestTrainCommand:
    def test_short_training_run(self, corpus_dir, tmp_path, capsys):
        ckpt = tmp_path / "out.json"
        metrics = tmp_path / "m.csv"
        rc = main(
            [
                "train", str(corpus_dir),
                "--segment-seconds", "0.5",
                "--epochs", "2",
                "--batch", "2",
                "--steps-per-epoch", "1",
                "--crop", "32x32",
                "--ckpt", str(ckpt),
                "--metrics", str(metrics),
            ]
        )
        assert rc == 0
        assert load_checkpoint(ckpt).epoch == 2
        lines = metrics.read_text().strip().splitlines()
        assert len(lines) == 3
        header = lines[0].split(",")
        temp_col = header.index("temperature")
        assert float(lines[1].split(",")[temp_col]) == 2.0
        assert float(lines[2].split(",")[temp_col]) == 20.0


class TestApplyCommand:
    def test_processes_audio(self, tmp_path, capsys):
        ckpt_path = tmp_path / "c.json"
        save_checkpoint(new_checkpoint(seed=2), ckpt_path)
        src = tmp_path / "in.wav"
        write_wav(noise_clip(0.2, 44100, seed=7), src)
        out = tmp_path / "out.wav"
        rc = main(["apply", str(src), "--control", "0.5", "--ckpt", str(ckpt_path), "-o", str(out)])
        assert rc == 0
        assert len(read_wav(out)) > 0

    def test_out_of_range_control_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["apply", "x.wav", "--control", "1.5", "--ckpt", "c", "-o", "y.wav"])
        assert exc_info.value.code == 2
        assert "control must lie in [0, 1]" in capsys.readouterr().err

    def test_missing_checkpoint_reports_code(self, tmp_path, capsys):
        src = tmp_path / "in.wav"
        write_wav(noise_clip(0.1, 44100), src)
        rc = main(["apply", str(src), "--control", "0.1", "--ckpt", str(tmp_path / "nope"), "-o", "y.wav"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("ERR:IO_FAILURE:")

    def test_corrupt_checkpoint_reports_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        src = tmp_path / "in.wav"
        write_wav(noise_clip(0.1, 44100), src)
        rc = main(["apply", str(src), "--control", "0.1", "--ckpt", str(bad), "-o", "y.wav"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("ERR:CORRUPT_CHECKPOINT:")


class TestInspectCommand:
    def test_json_output(self, tmp_path, capsys):
        ckpt_path = tmp_path / "c.json"
        ckpt = new_checkpoint(seed=3)
        ckpt.effect.kernel.data[:] = np.arange(9).reshape(3, 3) / 100.0
        save_checkpoint(ckpt, ckpt_path)
        rc = main(["inspect", "--ckpt", str(ckpt_path), "--json"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(np.asarray(doc["kernel"]), ckpt.effect.kernel.data)

    def test_human_output(self, tmp_path, capsys):
        ckpt_path = tmp_path / "c.json"
        save_checkpoint(new_checkpoint(seed=3), ckpt_path)
        rc = main(["inspect", "--ckpt", str(ckpt_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "detector kernel" in out and "band response" in out


class TestUsage:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 2

    def test_unknown_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["transmogrify"])
        assert exc_info.value.code == 2
