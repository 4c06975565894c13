import numpy as np
import pytest

from aec.audio import load_wav
from aec.synth import FAMILIES, SynthConfig, generate_synthetic, synth_clip


class TestSynthClip:
    def test_clip_length_and_rate(self):
        config = SynthConfig(n_classes=13, clips_per_class=1)
        clip = synth_clip(config, 0, 0, seed=3)
        assert clip.samples.size == 80000
        assert clip.sample_rate_hz == 16000

    def test_deterministic_per_triple(self):
        config = SynthConfig()
        a = synth_clip(config, 4, 7, seed=9)
        b = synth_clip(config, 4, 7, seed=9)
        assert np.array_equal(a.samples, b.samples)
        c = synth_clip(config, 4, 7, seed=10)
        assert not np.array_equal(a.samples, c.samples)

    def test_distinct_families(self):
        config = SynthConfig()
        clips = [synth_clip(config, c, 0, seed=1).samples for c in range(13)]
        for i in range(13):
            for j in range(i + 1, 13):
                assert not np.array_equal(clips[i], clips[j])

    def test_amplitude_within_range(self):
        config = SynthConfig()
        for c in range(13):
            clip = synth_clip(config, c, 0, seed=2)
            assert np.abs(clip.samples).max() <= 0.9 + 1e-12


class TestGenerate:
    def test_file_count_and_shape(self, synth_corpus):
        manifest, out_dir = synth_corpus
        assert len(manifest.entries) == 5 * 8
        wavs = sorted(p for p in out_dir.iterdir() if p.suffix == ".wav")
        assert len(wavs) == 40
        clip = load_wav(wavs[0])
        assert clip.samples.size == 80000

    def test_bit_identical_regeneration(self, tmp_path):
        config = SynthConfig(n_classes=3, clips_per_class=2)
        generate_synthetic(config, seed=5, out_dir=tmp_path / "a")
        generate_synthetic(config, seed=5, out_dir=tmp_path / "b")
        for p in sorted((tmp_path / "a").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name

    def test_manifest_labels_match_files(self, synth_corpus):
        manifest, _ = synth_corpus
        for e in manifest.entries:
            assert e.label in e.clip_id
            assert e.path.endswith(".wav")

    def test_class_count_bounds(self):
        with pytest.raises(ValueError):
            SynthConfig(n_classes=1)
        with pytest.raises(ValueError):
            SynthConfig(n_classes=len(FAMILIES) + 1)
