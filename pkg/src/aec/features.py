"""Fixed-length utterance features.

Three routes to a per-clip vector: log-mel segment statistics pooled to
utterance level, a spectral MFCC+ZCR baseline, and ingestion of embeddings
computed elsewhere (AEC-EMB exchange format).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from .audio import AudioClip
from .errors import DecodeError

ROW_ROLES = ("stft-frame", "segment", "utterance")

EMB_MAGIC = "AEC-EMB v1"


@dataclass
class FeatureMatrix:
    """Real (n x d) feature rows with a tag for what each row represents."""

    values: np.ndarray
    row_role: str = "utterance"

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("feature matrix must be (n >= 1) x (d >= 1)")
        if not np.isfinite(self.values).all():
            raise ValueError("feature matrix contains non-finite values")
        if self.row_role not in ROW_ROLES:
            raise ValueError(f"row_role must be one of {ROW_ROLES}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


@dataclass
class MelParams:
    """STFT and mel filterbank settings."""

    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 64
    fmin_hz: float = 50.0
    fmax_hz: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mels < 2:
            raise ValueError("need at least 2 mel bands")
        if not 0.0 <= self.fmin_hz < self.fmax_hz:
            raise ValueError("need 0 <= fmin < fmax")
        if self.log_floor <= 0.0:
            raise ValueError("log floor must be positive")

    def frame_length(self, sample_rate_hz: int) -> int:
        return int(round(self.window_ms * sample_rate_hz / 1000.0))

    def hop_length(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(mel: MelParams, sample_rate_hz: int, n_fft: int) -> np.ndarray:
    """Triangular mel filterbank (n_mels x n_fft//2+1), peaks at 1."""
    if mel.fmax_hz > sample_rate_hz / 2.0:
        raise ValueError(
            f"mel fmax {mel.fmax_hz} Hz above Nyquist {sample_rate_hz / 2.0} Hz"
        )
    edges_hz = mel_to_hz(
        np.linspace(hz_to_mel(mel.fmin_hz), hz_to_mel(mel.fmax_hz), mel.n_mels + 2)
    )
    bin_hz = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate_hz)
    fb = np.zeros((mel.n_mels, bin_hz.size))
    for j in range(mel.n_mels):
        lo, center, hi = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[j] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def _frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Frames as rows: floor((N - frame) / hop) + 1 of them."""
    if samples.size < frame_len:
        raise ValueError("clip shorter than one analysis frame")
    n_frames = (samples.size - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return samples[idx]


def log_mel_frames(clip: AudioClip, mel: MelParams | None = None) -> FeatureMatrix:
    """Per-STFT-frame log-mel energies (natural log with additive floor)."""
    mel = mel or MelParams()
    frame_len = mel.frame_length(clip.sample_rate_hz)
    hop = mel.hop_length(clip.sample_rate_hz)
    frames = _frame_signal(clip.samples, frame_len, hop)
    n_fft = 1 << (frame_len - 1).bit_length()
    window = get_window("hann", frame_len, fftbins=True)
    power = np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1)) ** 2
    fb = mel_filterbank(mel, clip.sample_rate_hz, n_fft)
    return FeatureMatrix(np.log(power @ fb.T + mel.log_floor), row_role="stft-frame")


def log_mel_segments(
    clip: AudioClip,
    mel: MelParams | None = None,
    segment_s: float = 1.5,
    overlap: float = 0.5,
) -> FeatureMatrix:
    """Segment rows: per-mel-band mean and std over each segment's frames.

    Segments cover segment_s seconds with hop (1 - overlap) * segment_s; a
    trailing partial segment is dropped so the statistics stay unbiased.
    """
    mel = mel or MelParams()
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    logmel = log_mel_frames(clip, mel).values
    seg_frames = int(round(segment_s * 1000.0 / mel.hop_ms))
    seg_hop = int(round((1.0 - overlap) * segment_s * 1000.0 / mel.hop_ms))
    if seg_hop < 1:
        raise ValueError("segment overlap too close to 1")
    if logmel.shape[0] < seg_frames:
        raise ValueError(
            f"clip yields {logmel.shape[0]} STFT frames, short of one "
            f"{seg_frames}-frame segment"
        )
    n_segments = (logmel.shape[0] - seg_frames) // seg_hop + 1
    rows = np.empty((n_segments, 2 * mel.n_mels))
    for s in range(n_segments):
        block = logmel[s * seg_hop : s * seg_hop + seg_frames]
        rows[s] = np.concatenate([block.mean(axis=0), block.std(axis=0)])
    return FeatureMatrix(rows, row_role="segment")


def pool_utterance(segments: FeatureMatrix) -> np.ndarray:
    """Average segment rows into one utterance vector."""
    if segments.n < 1:
        raise ValueError("cannot pool an empty feature matrix")
    return segments.values.mean(axis=0)


def zero_crossing_rate(frame: np.ndarray) -> float:
    """Fraction of consecutive sample pairs with strictly opposite sign."""
    frame = np.asarray(frame, dtype=np.float64)
    crossings = np.count_nonzero(frame[:-1] * frame[1:] < 0.0)
    return crossings / frame.size


def mfcc_zcr(
    clip: AudioClip, mel: MelParams | None = None, n_mfcc: int = 13
) -> np.ndarray:
    """Baseline feature: frame MFCCs plus ZCR, pooled by mean and std.

    Per frame: DCT-II of the log-mel vector truncated to n_mfcc
    coefficients, plus the frame's zero-crossing rate. The utterance vector
    concatenates the per-coefficient mean and std, dimension 2*(n_mfcc+1).
    """
    mel = mel or MelParams()
    if not 1 <= n_mfcc <= mel.n_mels:
        raise ValueError("n_mfcc must lie in [1, n_mels]")
    logmel = log_mel_frames(clip, mel).values
    coeffs = dct(logmel, type=2, norm="ortho", axis=1)[:, :n_mfcc]
    frames = _frame_signal(
        clip.samples,
        mel.frame_length(clip.sample_rate_hz),
        mel.hop_length(clip.sample_rate_hz),
    )
    zcr = (frames[:, :-1] * frames[:, 1:] < 0.0).sum(axis=1) / frames.shape[1]
    per_frame = np.hstack([coeffs, zcr[:, None]])
    return np.concatenate([per_frame.mean(axis=0), per_frame.std(axis=0)])


# ---------------------------------------------------------------------------
# Embedding exchange format (AEC-EMB v1)
#
# Binary: header line "AEC-EMB v1 dim=<d> count=<n>\n", then n records of
# "<clip_id>\t" followed by d little-endian float32 values. Text: CSV rows
# "<clip_id>,v1,...,vd". Readers accept both; the writer emits binary.
# ---------------------------------------------------------------------------


def write_embeddings(path, ids: list[str], matrix: FeatureMatrix) -> None:
    if len(ids) != matrix.n:
        raise ValueError("one clip id required per embedding row")
    if len(set(ids)) != len(ids):
        raise ValueError("clip ids must be unique")
    with open(path, "wb") as fh:
        fh.write(f"{EMB_MAGIC} dim={matrix.dims} count={matrix.n}\n".encode())
        rows = matrix.values.astype("<f4")
        for clip_id, row in zip(ids, rows):
            if "\t" in clip_id or "\n" in clip_id:
                raise ValueError(f"clip id {clip_id!r} contains a separator")
            fh.write(clip_id.encode() + b"\t" + row.tobytes())


def read_embeddings(path) -> tuple[list[str], FeatureMatrix]:
    """Read an AEC-EMB file (binary or CSV); returns (ids, utterance rows)."""
    with open(path, "rb") as fh:
        head = fh.readline()
        if head.startswith(EMB_MAGIC.encode()):
            return _read_embeddings_binary(path, head, fh)
    return _read_embeddings_csv(path)


def _read_embeddings_binary(path, head: bytes, fh) -> tuple[list[str], FeatureMatrix]:
    fields = dict(
        part.split("=", 1) for part in head.decode().strip().split() if "=" in part
    )
    try:
        dim, count = int(fields["dim"]), int(fields["count"])
    except (KeyError, ValueError) as exc:
        raise DecodeError(f"bad AEC-EMB header in {path}: {head!r}") from exc
    if dim < 1:
        raise DecodeError(f"bad embedding dimension {dim} in {path}")
    if count < 1:
        raise DecodeError(f"no rows in embedding file {path}")
    ids: list[str] = []
    rows = np.empty((count, dim))
    record_bytes = 4 * dim
    for i in range(count):
        clip_id = bytearray()
        while True:
            ch = fh.read(1)
            if not ch:
                raise DecodeError(f"truncated embedding file {path} at record {i}")
            if ch == b"\t":
                break
            clip_id.extend(ch)
        blob = fh.read(record_bytes)
        if len(blob) != record_bytes:
            raise DecodeError(f"truncated embedding row {clip_id.decode()!r} in {path}")
        ids.append(clip_id.decode())
        rows[i] = np.frombuffer(blob, dtype="<f4")
    return _validate_embeddings(path, ids, rows)


def _read_embeddings_csv(path) -> tuple[list[str], FeatureMatrix]:
    ids: list[str] = []
    rows: list[np.ndarray] = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DecodeError(f"{path}:{lineno}: expected clip_id,v1,...,vd")
            try:
                values = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DecodeError(f"{path}:{lineno}: non-numeric value") from exc
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise DecodeError(
                    f"{path}:{lineno}: row has {values.size} values, expected {dim}"
                )
            ids.append(parts[0])
            rows.append(values)
    if not rows:
        raise DecodeError(f"no rows in embedding file {path}")
    return _validate_embeddings(path, ids, np.vstack(rows))


def _validate_embeddings(path, ids, rows) -> tuple[list[str], FeatureMatrix]:
    seen = set()
    for clip_id in ids:
        if clip_id in seen:
            raise DecodeError(f"duplicate clip id {clip_id!r} in {path}")
        seen.add(clip_id)
    bad = ~np.isfinite(rows).all(axis=1)
    if bad.any():
        first = ids[int(np.argmax(bad))]
        raise DecodeError(f"non-finite embedding for clip {first!r} in {path}")
    return ids, FeatureMatrix(rows, row_role="utterance")
