"""Audio loading and perceptual preprocessing.

Clips are resampled to a common rate, DC-corrected, and loudness-aligned by
measuring A-weighted levels on short frames and applying one clip-wide gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, get_window, resample_poly

from .errors import DecodeError, SilentClipError

SUPPORTED_RATES = (8000, 16000, 44100, 48000)

# Level measurement: 50 ms frames, 25 ms hop, clip-wide gain toward the
# median frame level. Frames below SILENCE_DBFS are ignored; a clip with no
# frame above it is rejected instead of amplified.
LEVEL_FRAME_S = 0.050
LEVEL_HOP_S = 0.025
SILENCE_DBFS = -80.0

# Polyphase resampler: Kaiser-windowed sinc, 64 taps per phase (odd total
# length so the group delay is an integer at the upsampled rate).
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6


@dataclass
class AudioClip:
    """Mono audio: float samples in [-1, 1] plus their sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("clip must hold at least one mono sample")
        if not np.isfinite(self.samples).all():
            raise ValueError("clip contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class LoudnessReport:
    """Measured per-frame A-weighted levels and the gain that was applied.

    frame_levels_dba holds the pre-gain level of each 50 ms frame in dB re
    full scale; silent frames are -inf.
    """

    frame_levels_dba: np.ndarray
    clip_gain_db: float


def load_wav(path) -> AudioClip:
    """Read a PCM WAV file (16/32-bit int, float, or 8-bit) as a mono clip.

    Multi-channel audio is averaged to mono; integer samples are scaled to
    [-1, 1] by the type's full-scale magnitude.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise DecodeError(f"WAV file {path} holds no audio samples")

    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        samples = data / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise DecodeError(f"unsupported WAV sample format {data.dtype} in {path}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(samples=samples, sample_rate_hz=int(rate))


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM WAV."""
    scaled = np.round(np.clip(clip.samples, -1.0, 1.0) * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype(np.int16)
    wavfile.write(path, clip.sample_rate_hz, pcm)


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    """Rational polyphase resampling with a Kaiser-windowed sinc filter."""
    if target_hz <= 0:
        raise ValueError("target rate must be positive")
    if clip.sample_rate_hz == target_hz:
        return clip
    g = math.gcd(target_hz, clip.sample_rate_hz)
    up, down = target_hz // g, clip.sample_rate_hz // g
    taps = RESAMPLE_TAPS_PER_PHASE * up + 1
    cutoff = 1.0 / max(up, down)
    h = firwin(taps, cutoff, window=("kaiser", RESAMPLE_KAISER_BETA))
    out = resample_poly(clip.samples, up, down, window=h)
    return AudioClip(samples=out, sample_rate_hz=target_hz)


def a_weight_gain(freq_hz) -> np.ndarray:
    """Linear A-curve magnitude, normalized to exactly 1 at 1 kHz.

    Analog magnitude response of the IEC 61672 A-weighting filter evaluated
    at the given frequencies (Hz).
    """
    f2 = np.square(np.asarray(freq_hz, dtype=np.float64))
    num = (12194.0**2) * f2 * f2
    den = (
        (f2 + 20.6**2)
        * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2))
        * (f2 + 12194.0**2)
    )
    return num / den / _RA_1KHZ


def _ra_unnormalized(f: float) -> float:
    f2 = f * f
    num = (12194.0**2) * f2 * f2
    den = (
        (f2 + 20.6**2)
        * math.sqrt((f2 + 107.7**2) * (f2 + 737.9**2))
        * (f2 + 12194.0**2)
    )
    return num / den


_RA_1KHZ = _ra_unnormalized(1000.0)


def a_weighted_level(frame: np.ndarray, sample_rate_hz: int) -> float | None:
    """A-weighted RMS level of one frame in dB re full scale.

    The frame is Hann-windowed, its power spectrum weighted by the squared
    A-curve magnitude, and the result folded back to an RMS estimate
    (window energy compensated). Returns None for a silent (zero-power)
    frame.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size < 64:
        raise ValueError("frame too short for level measurement (need >= 64 samples)")
    n = frame.size
    window = get_window("hann", n, fftbins=True)
    spectrum = np.fft.rfft(frame * window)
    power = np.abs(spectrum) ** 2
    # rfft halves the spectrum; double interior bins for Parseval
    scale = np.full(power.shape, 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    weighted = power * scale * np.square(a_weight_gain(freqs))
    mean_square = weighted.sum() / (n * np.square(window).sum())
    if mean_square <= 0.0:
        return None
    return 10.0 * math.log10(mean_square)


def measure_frame_levels(clip: AudioClip) -> np.ndarray:
    """A-weighted level of each 50 ms frame (25 ms hop); -inf where silent."""
    frame_len = int(round(LEVEL_FRAME_S * clip.sample_rate_hz))
    hop = int(round(LEVEL_HOP_S * clip.sample_rate_hz))
    if clip.samples.size < frame_len:
        raise ValueError(
            f"clip of {clip.samples.size} samples is shorter than one "
            f"{frame_len}-sample level-measurement frame"
        )
    n_frames = (clip.samples.size - frame_len) // hop + 1
    levels = np.empty(n_frames)
    for i in range(n_frames):
        level = a_weighted_level(
            clip.samples[i * hop : i * hop + frame_len], clip.sample_rate_hz
        )
        levels[i] = -np.inf if level is None else level
    return levels


def preprocess(
    clip: AudioClip,
    target_hz: int = 16000,
    target_level_dba: float = -26.0,
) -> tuple[AudioClip, LoudnessReport]:
    """Resample, remove DC offset, and align loudness.

    One scalar gain is applied so the median A-weighted frame level reaches
    target_level_dba; per-frame gains would distort event envelopes. Clips
    whose frames are all below the silence threshold are rejected.
    """
    if target_hz not in SUPPORTED_RATES:
        raise ValueError(f"target rate must be one of {SUPPORTED_RATES}")
    out = resample(clip, target_hz)
    samples = out.samples - out.samples.mean()
    out = AudioClip(samples=samples, sample_rate_hz=target_hz)

    levels = measure_frame_levels(out)
    audible = levels[levels > SILENCE_DBFS]
    if audible.size == 0:
        raise SilentClipError(
            f"all {levels.size} frames below {SILENCE_DBFS:.0f} dBFS; no gain applied"
        )
    gain_db = target_level_dba - float(np.median(audible))
    samples = out.samples * (10.0 ** (gain_db / 20.0))
    # gain does not move the mean away from zero, but keep it exact
    samples = samples - samples.mean()
    return (
        AudioClip(samples=samples, sample_rate_hz=target_hz),
        LoudnessReport(frame_levels_dba=levels, clip_gain_db=gain_db),
    )
