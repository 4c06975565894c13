"""Audio event classification pipeline: perceptual preprocessing, log-mel
and embedding features, feature normalization, and three decision models
(ladder network, ELM, SVM) with a benchmark harness."""

__version__ = "0.1.0"

from .audio import AudioClip, LoudnessReport, a_weighted_level, load_wav, preprocess, write_wav
from .elm import ElmModel, KernelSpec, eval_kernel, predict_elm, train_kernel_elm, train_random_elm
from .errors import AecError, ConvergenceError, DecodeError, SilentClipError
from .features import (
    FeatureMatrix,
    MelParams,
    log_mel_segments,
    mfcc_zcr,
    pool_utterance,
    read_embeddings,
    write_embeddings,
)
from .harness import (
    AnnotationRecord,
    DatasetManifest,
    EvalReport,
    ExperimentReport,
    ManifestEntry,
    consensus_label,
    evaluate,
    human_accuracy,
    make_splits,
    read_manifest,
    run_experiment,
    write_manifest,
)
from .ladder import (
    LadderBatch,
    LadderConfig,
    LadderModel,
    init_ladder,
    ladder_forward,
    ladder_loss,
    predict_ladder,
    train_ladder,
)
from .normalize import NormStats, apply_normalization, fit_norm_stats, length_normalize
from .svm import BinarySvm, SvmModel, predict_svm, train_binary_svm, train_ova_svm
from .synth import SynthConfig, generate_synthetic
