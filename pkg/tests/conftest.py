import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aec.audio import AudioClip


def sine_clip(freq_hz, duration_s=5.0, sample_rate=16000, amplitude=0.5):
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate)


@pytest.fixture(scope="session")
def tone_1khz():
    return sine_clip(1000.0)


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """Small shared synthetic corpus: 5 classes x 8 clips."""
    from aec.synth import SynthConfig, generate_synthetic

    out = tmp_path_factory.mktemp("corpus")
    manifest = generate_synthetic(
        SynthConfig(n_classes=5, clips_per_class=8), seed=13, out_dir=out
    )
    return manifest, out
