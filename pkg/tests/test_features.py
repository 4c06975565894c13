import numpy as np
import pytest

from aec.audio import AudioClip
from aec.errors import DecodeError
from aec.features import (
    FeatureMatrix,
    MelParams,
    hz_to_mel,
    log_mel_frames,
    log_mel_segments,
    mel_filterbank,
    mel_to_hz,
    mfcc_zcr,
    pool_utterance,
    read_embeddings,
    write_embeddings,
    zero_crossing_rate,
)


def white_noise_clip(duration_s=5.0, sample_rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    return AudioClip(0.1 * rng.standard_normal(int(duration_s * sample_rate)), sample_rate)


def expected_peak_band(freq, mel: MelParams):
    """Band whose triangle is tallest at freq, from the mel-scale formula."""
    edges = mel_to_hz(np.linspace(hz_to_mel(mel.fmin_hz), hz_to_mel(mel.fmax_hz), mel.n_mels + 2))
    weights = []
    for j in range(mel.n_mels):
        lo, center, hi = edges[j], edges[j + 1], edges[j + 2]
        if lo < freq <= center:
            weights.append((freq - lo) / (center - lo))
        elif center < freq < hi:
            weights.append((hi - freq) / (hi - center))
        else:
            weights.append(0.0)
    return int(np.argmax(weights))


class TestLogMel:
    def test_frame_count_formula(self):
        for n in (400, 401, 80000, 12345):
            clip = white_noise_clip(duration_s=n / 16000)
            frames = log_mel_frames(clip)
            assert frames.n == (n - 400) // 160 + 1

    def test_five_second_clip_yields_five_segments(self):
        segments = log_mel_segments(white_noise_clip(5.0))
        assert segments.n == 5
        assert segments.dims == 128

    def test_white_noise_values_above_floor(self):
        mel = MelParams()
        frames = log_mel_frames(white_noise_clip(2.0), mel)
        assert np.isfinite(frames.values).all()
        assert (frames.values > np.log(mel.log_floor)).all()

    def test_pure_tone_peaks_in_expected_band(self, tone_1khz):
        mel = MelParams()
        frames = log_mel_frames(tone_1khz, mel)
        band_means = frames.values.mean(axis=0)
        assert int(band_means.argmax()) == expected_peak_band(1000.0, mel)

    def test_filterbank_weights_bounded(self):
        mel = MelParams()
        fb = mel_filterbank(mel, 16000, 512)
        assert (fb >= 0).all()
        assert (fb.sum(axis=0) <= 1 + 1e-6).all()
        assert fb.max() == pytest.approx(1.0, abs=0.1)

    def test_band_above_nyquist_rejected(self):
        clip = white_noise_clip(2.0, sample_rate=8000)
        with pytest.raises(ValueError):
            log_mel_segments(clip, MelParams(fmax_hz=8000.0))

    def test_clip_shorter_than_segment_rejected(self):
        with pytest.raises(ValueError):
            log_mel_segments(white_noise_clip(1.0))

    def test_deterministic(self):
        clip = white_noise_clip(3.0)
        a = log_mel_segments(clip).values
        b = log_mel_segments(clip).values
        assert np.array_equal(a, b)


class TestPooling:
    def test_mean_of_two_rows(self):
        pooled = pool_utterance(FeatureMatrix([[0.0, 2.0], [2.0, 0.0]], "segment"))
        assert pooled == pytest.approx([1.0, 1.0])

    def test_single_row_identity(self):
        row = np.array([[3.0, -1.0, 2.0]])
        assert pool_utterance(FeatureMatrix(row, "segment")) == pytest.approx(row[0])

    def test_identical_rows(self):
        rows = np.tile([1.5, -0.5], (7, 1))
        assert pool_utterance(FeatureMatrix(rows, "segment")) == pytest.approx([1.5, -0.5])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        rows = rng.normal(size=(11, 6))
        perm = rng.permutation(11)
        a = pool_utterance(FeatureMatrix(rows, "segment"))
        b = pool_utterance(FeatureMatrix(rows[perm], "segment"))
        assert a == pytest.approx(b)


class TestMfccZcr:
    def test_output_dimension(self):
        vec = mfcc_zcr(white_noise_clip(2.0))
        assert vec.shape == (28,)

    def test_zcr_alternating(self):
        frame = np.tile([1.0, -1.0], 100)
        assert zero_crossing_rate(frame) == pytest.approx((200 - 1) / 200)

    def test_zcr_constant_zero(self):
        assert zero_crossing_rate(np.zeros(50)) == 0.0
        assert zero_crossing_rate(np.ones(50)) == 0.0

    def test_deterministic(self):
        clip = white_noise_clip(2.0)
        assert np.array_equal(mfcc_zcr(clip), mfcc_zcr(clip))


class TestFeatureMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[1.0, np.inf]]))

    def test_rejects_bad_role(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.ones((1, 1)), row_role="frame")


class TestEmbeddingExchange:
    def test_binary_roundtrip_1024(self, tmp_path):
        rng = np.random.default_rng(2)
        rows = rng.normal(size=(3, 1024)).astype(np.float32).astype(np.float64)
        ids = ["a", "b", "c"]
        path = tmp_path / "emb.bin"
        write_embeddings(path, ids, FeatureMatrix(rows))
        got_ids, matrix = read_embeddings(path)
        assert got_ids == ids
        assert matrix.values.shape == (3, 1024)
        assert np.array_equal(matrix.values, rows)

    def test_header_contents(self, tmp_path):
        path = tmp_path / "emb.bin"
        write_embeddings(path, ["x"], FeatureMatrix(np.zeros((1, 4))))
        head = path.read_bytes().split(b"\n", 1)[0]
        assert head == b"AEC-EMB v1 dim=4 count=1"

    def test_csv_reader(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("clip1,1.0,2.0,3.0\nclip2,4.0,5.0,6.0\n")
        ids, matrix = read_embeddings(path)
        assert ids == ["clip1", "clip2"]
        assert np.array_equal(matrix.values, [[1, 2, 3], [4, 5, 6]])

    def test_csv_dimension_mismatch(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("clip1,1.0,2.0\nclip2,4.0\n")
        with pytest.raises(DecodeError):
            read_embeddings(path)

    def test_nonfinite_names_clip(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("good,1.0,2.0\nbroken,nan,2.0\n")
        with pytest.raises(DecodeError, match="broken"):
            read_embeddings(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("same,1.0\nsame,2.0\n")
        with pytest.raises(DecodeError, match="duplicate"):
            read_embeddings(path)

    def test_empty_body_with_header(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"AEC-EMB v1 dim=4 count=0\n")
        with pytest.raises(DecodeError, match="no rows"):
            read_embeddings(path)

    def test_truncated_binary(self, tmp_path):
        path = tmp_path / "emb.bin"
        write_embeddings(path, ["a", "b"], FeatureMatrix(np.ones((2, 8))))
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(DecodeError, match="truncated"):
            read_embeddings(path)
