"""Command-line entry point for the full pipeline.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. Every
run prints its resolved parameter set; all randomness flows from --seed
(falling back to the AEC_SEED environment variable, then 0).
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from . import __version__
from .audio import load_wav, preprocess, write_wav
from .elm import (
    ELM_MAGIC,
    KernelSpec,
    load_elm,
    predict_elm,
    save_elm,
    train_kernel_elm,
    train_random_elm,
)
from .errors import AecError
from .features import MelParams, FeatureMatrix, write_embeddings
from .harness import (
    DatasetManifest,
    ExperimentReport,
    FoldResult,
    ManifestEntry,
    compute_features,
    consensus_label,
    evaluate,
    human_accuracy,
    read_annotations,
    read_manifest,
    run_experiment,
    write_manifest,
)
from .ladder import (
    LADDER_MAGIC,
    LadderBatch,
    LadderConfig,
    load_ladder,
    predict_ladder,
    save_ladder,
    train_ladder,
)
from .normalize import apply_normalization, fit_norm_stats, load_norm_stats, save_norm_stats
from .report import render_report
from .svm import SVM_MAGIC, load_svm, predict_svm, save_svm, train_ova_svm
from .synth import SynthConfig, generate_synthetic


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> _Parser:
    parser = _Parser(prog="aec", description=__doc__)
    parser.add_argument("--version", action="version", version=f"aec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    def common(p):
        p.add_argument("--config", help="flat key=value file; flags override it")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default: AEC_SEED env var, then 0)")

    p = sub.add_parser("prep", help="resample, remove DC offset, align loudness")
    common(p)
    p.add_argument("--in", dest="in_path", help="input WAV file")
    p.add_argument("--out", dest="out_path", help="output WAV file")
    p.add_argument("--manifest", help="process every clip of a manifest instead")
    p.add_argument("--outdir", help="output folder for manifest mode")
    p.add_argument("--rate", type=int, default=16000, help="target sample rate")
    p.add_argument("--target-dba", type=float, default=-26.0,
                   help="median A-weighted frame level to aim for (dBFS)")

    p = sub.add_parser("features", help="extract utterance features to an AEC-EMB file")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["logmel-pooled", "mfcc-zcr"], default="logmel-pooled")
    p.add_argument("--out", dest="out_path", required=True)
    _add_mel_flags(p)

    p = sub.add_parser("fit-norm", help="fit whitening statistics on training rows")
    common(p)
    p.add_argument("--features", required=True, help="AEC-EMB feature file")
    p.add_argument("--manifest", help="restrict fitting to split=train rows")
    p.add_argument("--out", dest="out_path", required=True)

    p = sub.add_parser("train", help="train one classifier on the training split")
    common(p)
    p.add_argument("--model", choices=["ladder", "elm", "svm"], required=True)
    p.add_argument("--features", required=True, help="AEC-EMB feature file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", dest="out_path", required=True)
    p.add_argument("--norm-stats", help="AEC-NORM file to apply before training")
    _add_model_flags(p)

    p = sub.add_parser("eval", help="evaluate a model or a predictions file")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None,
                   help="entries to score: test, train, fold-k, or all "
                        "(default: test when present, else all)")
    p.add_argument("--model-file", help="trained AEC model file")
    p.add_argument("--features", help="AEC-EMB feature file (model mode)")
    p.add_argument("--norm-stats", help="AEC-NORM file to apply before predicting")
    p.add_argument("--predictions", help="CSV clip_id,label to score instead of a model")
    p.add_argument("--out", dest="out_path", help="folder for the report bundle")

    p = sub.add_parser("experiment", help="end-to-end protocol with a report bundle")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features-mode", choices=["logmel-pooled", "mfcc-zcr", "embeddings"],
                   default="logmel-pooled")
    p.add_argument("--embeddings", help="AEC-EMB file for --features-mode embeddings")
    norm = p.add_mutually_exclusive_group()
    norm.add_argument("--normalize", dest="normalization", action="store_const",
                      const="normalized", help="whiten + length-normalize (default)")
    norm.add_argument("--raw", dest="normalization", action="store_const",
                      const="raw", help="use features as-is")
    p.set_defaults(normalization="normalized")
    p.add_argument("--model", choices=["ladder", "elm", "svm"], default="ladder")
    p.add_argument("--split", default="holdout:0.7",
                   help="holdout[:train_fraction] or kfold[:k]")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    p.add_argument("--out", dest="out_path", required=True, help="report folder")
    _add_mel_flags(p)
    _add_model_flags(p)

    p = sub.add_parser("synth", help="generate the synthetic benchmark corpus")
    common(p)
    p.add_argument("--out", dest="out_path", required=True)
    p.add_argument("--classes", type=int, default=13)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--clip-seconds", type=float, default=5.0)
    p.add_argument("--snr-db", type=float, default=20.0)

    p = sub.add_parser("human-acc", help="judge accuracy from a 3-judge annotation CSV")
    common(p)
    p.add_argument("--annotations", required=True)

    return parser


def _add_mel_flags(p):
    p.add_argument("--n-mels", type=int, default=64)
    p.add_argument("--window-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=10.0)
    p.add_argument("--fmin", type=float, default=50.0)
    p.add_argument("--fmax", type=float, default=8000.0)
    p.add_argument("--n-mfcc", type=int, default=13)


def _add_model_flags(p):
    g = p.add_argument_group("ladder options")
    g.add_argument("--hidden-dims", type=_csv_ints, default=(2048, 1024, 256),
                   help="comma-separated hidden layer widths")
    g.add_argument("--sigma", type=float, default=0.2, help="encoder noise std-dev")
    g.add_argument("--denoise-costs", type=_csv_floats, default=None,
                   help="per-layer weights, input layer first")
    g.add_argument("--epochs", type=int, default=101)
    g.add_argument("--batch-size", type=int, default=100)
    g.add_argument("--learning-rate", type=float, default=0.002)
    g = p.add_argument_group("elm/svm options")
    g.add_argument("--elm-variant", choices=["kernel", "random"], default="kernel")
    g.add_argument("--kernel", choices=["linear", "polynomial", "rbf"], default=None,
                   help="default: polynomial for elm, linear for svm")
    g.add_argument("--gamma", type=float, default=None, help="rbf width (default 1/d)")
    g.add_argument("--degree", type=int, default=2, help="polynomial degree")
    g.add_argument("--coef0", type=float, default=1.0, help="polynomial offset")
    g.add_argument("--C", type=float, default=None, dest="C",
                   help="regularization (default: 100 for elm, 10 for svm)")
    g.add_argument("--hidden-multiplier", type=int, default=10,
                   help="random-ELM hidden nodes per input dimension")
    g.add_argument("--tol", type=float, default=1e-3, help="SVM KKT tolerance")


# ---------------------------------------------------------------------------
# Config file and parameter echo
# ---------------------------------------------------------------------------


def _apply_config(args, parser: _Parser, argv) -> None:
    if not getattr(args, "config", None):
        return
    overrides = {}
    with open(args.config, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{args.config}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            overrides[key.strip().replace("-", "_")] = value.strip()
    explicit = {
        a[2:].split("=", 1)[0].replace("-", "_") for a in argv if a.startswith("--")
    }
    actions = {a.dest: a for a in parser._actions}
    for key, raw in overrides.items():
        if key not in actions:
            raise ValueError(f"{args.config}: unknown option {key!r}")
        if key in explicit:
            continue
        action = actions[key]
        if isinstance(action.const, str):  # store_const flags (e.g. normalization)
            setattr(args, key, raw)
        elif action.type is not None:
            setattr(args, key, action.type(raw))
        else:
            setattr(args, key, raw)


def _resolve_seed(args) -> None:
    if getattr(args, "seed", None) is None:
        args.seed = int(os.environ.get("AEC_SEED", "0"))


def _echo_params(args) -> None:
    print("resolved parameters:")
    for key in sorted(vars(args)):
        if key in ("command", "config"):
            continue
        print(f"  {key} = {getattr(args, key)}")


def _mel_from_args(args) -> MelParams:
    return MelParams(
        window_ms=args.window_ms, hop_ms=args.hop_ms, n_mels=args.n_mels,
        fmin_hz=args.fmin, fmax_hz=args.fmax,
    )


def _model_params_from_args(args) -> dict:
    if args.model == "ladder":
        params = {
            "hidden_dims": args.hidden_dims,
            "noise_sigma": args.sigma,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
        }
        if args.denoise_costs is not None:
            params["denoise_costs"] = args.denoise_costs
        return params
    if args.model == "elm":
        return {
            "variant": args.elm_variant,
            "kernel_kind": args.kernel or "polynomial",
            "gamma": args.gamma,
            "degree": args.degree,
            "coef0": args.coef0,
            "C": args.C if args.C is not None else 100.0,
            "hidden_multiplier": args.hidden_multiplier,
        }
    return {
        "kernel_kind": args.kernel or "linear",
        "gamma": args.gamma,
        "degree": args.degree,
        "coef0": args.coef0,
        "C": args.C if args.C is not None else 10.0,
        "tol": args.tol,
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_prep(args) -> int:
    if args.manifest:
        if not args.outdir:
            raise ValueError("--manifest mode needs --outdir")
        manifest = read_manifest(args.manifest)
        os.makedirs(args.outdir, exist_ok=True)
        entries = []
        for e in manifest.entries:
            clip, loudness = preprocess(load_wav(e.path), args.rate, args.target_dba)
            out_path = os.path.join(args.outdir, f"{e.clip_id}.wav")
            write_wav(out_path, clip)
            entries.append(ManifestEntry(e.clip_id, f"{e.clip_id}.wav", e.label, e.split))
            print(f"{e.clip_id}: gain {loudness.clip_gain_db:+.2f} dB -> {out_path}")
        write_manifest(
            os.path.join(args.outdir, "manifest.csv"),
            DatasetManifest(entries=entries, class_names=manifest.class_names),
        )
        return 0
    if not args.in_path or not args.out_path:
        raise ValueError("prep needs --in and --out (or --manifest and --outdir)")
    clip, loudness = preprocess(load_wav(args.in_path), args.rate, args.target_dba)
    write_wav(args.out_path, clip)
    print(
        f"{args.in_path}: gain {loudness.clip_gain_db:+.2f} dB over "
        f"{loudness.frame_levels_dba.size} frames -> {args.out_path}"
    )
    return 0


def _cmd_features(args) -> int:
    manifest = read_manifest(args.manifest)
    mel = _mel_from_args(args)
    rows = compute_features(manifest, args.mode, mel=mel)
    ids = [e.clip_id for e in manifest.entries]
    write_embeddings(args.out_path, ids, FeatureMatrix(rows, row_role="utterance"))
    print(f"wrote {rows.shape[0]} x {rows.shape[1]} features to {args.out_path}")
    return 0


def _features_for_manifest(features_path, manifest: DatasetManifest) -> np.ndarray:
    return compute_features(manifest, "embeddings", embeddings_path=features_path)


def _cmd_fit_norm(args) -> int:
    if args.manifest:
        manifest = read_manifest(args.manifest)
        if any(e.split == "train" for e in manifest.entries):
            manifest = DatasetManifest(
                entries=[e for e in manifest.entries if e.split == "train"],
                class_names=manifest.class_names,
            )
        rows = _features_for_manifest(args.features, manifest)
    else:
        from .features import read_embeddings

        _, matrix = read_embeddings(args.features)
        rows = matrix.values
    stats = fit_norm_stats(rows)
    save_norm_stats(args.out_path, stats)
    print(f"fitted {stats.d}-dim statistics on {rows.shape[0]} rows -> {args.out_path}")
    return 0


def _training_view(manifest: DatasetManifest) -> DatasetManifest:
    if any(e.split == "train" for e in manifest.entries):
        return DatasetManifest(
            entries=[e for e in manifest.entries if e.split == "train"],
            class_names=manifest.class_names,
        )
    return manifest


def _cmd_train(args) -> int:
    manifest = read_manifest(args.manifest)
    train_view = _training_view(manifest)
    X = _features_for_manifest(args.features, train_view)
    if args.norm_stats:
        X = apply_normalization(X, load_norm_stats(args.norm_stats))
    y = train_view.labels_as_indices()
    n_classes = train_view.n_classes
    if args.model == "ladder":
        config = LadderConfig(
            layer_dims=(X.shape[1], *args.hidden_dims, n_classes),
            noise_sigma=args.sigma,
            denoise_costs=args.denoise_costs,
            batch_size=args.batch_size,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            seed=args.seed,
        )
        model, history = train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        save_ladder(args.out_path, model)
        print(f"final training loss {history[-1]['total']:.4f}")
    elif args.model == "elm":
        C = args.C if args.C is not None else 100.0
        if args.elm_variant == "kernel":
            spec = KernelSpec(args.kernel or "polynomial", args.gamma, args.degree, args.coef0)
            model = train_kernel_elm(X, y, spec, C, n_classes=n_classes)
        else:
            model = train_random_elm(
                X, y, hidden_multiplier=args.hidden_multiplier, C=C,
                seed=args.seed, n_classes=n_classes,
            )
        save_elm(args.out_path, model)
    else:
        spec = KernelSpec(args.kernel or "linear", args.gamma, args.degree, args.coef0)
        model = train_ova_svm(
            X, y, spec, C=args.C if args.C is not None else 10.0,
            tol=args.tol, n_classes=n_classes,
        )
        save_svm(args.out_path, model)
    print(f"trained {args.model} on {X.shape[0]} rows -> {args.out_path}")
    return 0


def _load_any_model(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip().decode(errors="replace")
    if magic == LADDER_MAGIC:
        return "ladder", load_ladder(path)
    if magic == ELM_MAGIC:
        return "elm", load_elm(path)
    if magic == SVM_MAGIC:
        return "svm", load_svm(path)
    raise ValueError(f"{path}: unrecognized model file (header {magic!r})")


def _eval_view(manifest: DatasetManifest, split: str | None) -> DatasetManifest:
    if split is None:
        split = "test" if any(e.split == "test" for e in manifest.entries) else "all"
    if split == "all":
        return manifest
    entries = [e for e in manifest.entries if e.split == split]
    if not entries:
        raise ValueError(f"no manifest entries with split {split!r}")
    return DatasetManifest(entries=entries, class_names=manifest.class_names)


def _cmd_eval(args) -> int:
    manifest = read_manifest(args.manifest)
    view = _eval_view(manifest, args.split)
    truth = view.labels_as_indices()
    if args.predictions:
        import csv as _csv

        with open(args.predictions, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["clip_id", "label"]:
                raise ValueError(f"{args.predictions}: expected header clip_id,label")
            pred_by_id = {}
            for row in reader:
                if not row:
                    continue
                if len(row) != 2:
                    raise ValueError(f"{args.predictions}: expected 2 columns, got {row}")
                pred_by_id[row[0]] = row[1]
        if len(pred_by_id) != len(view.entries):
            raise ValueError(
                f"predictions cover {len(pred_by_id)} clips but the manifest "
                f"selection has {len(view.entries)}"
            )
        index = {name: i for i, name in enumerate(view.class_names)}
        try:
            pred = np.array([index[pred_by_id[e.clip_id]] for e in view.entries])
        except KeyError as exc:
            raise ValueError(f"prediction refers to unknown clip or label: {exc}") from exc
        mode_desc = f"predictions {args.predictions}"
    else:
        if not args.model_file or not args.features:
            raise ValueError("eval needs --model-file with --features, or --predictions")
        kind, model = _load_any_model(args.model_file)
        X = _features_for_manifest(args.features, view)
        if args.norm_stats:
            X = apply_normalization(X, load_norm_stats(args.norm_stats))
        if kind == "ladder":
            pred, _ = predict_ladder(model, X)
        elif kind == "elm":
            pred, _ = predict_elm(model, X)
        else:
            pred, _ = predict_svm(model, X)
        mode_desc = f"{kind} model {args.model_file}"
    result = evaluate(pred, truth, view.n_classes)
    print(f"weighted accuracy {result.weighted_accuracy:.4f} on {truth.size} clips ({mode_desc})")
    if args.out_path:
        experiment = ExperimentReport(
            params={"mode": "eval", "source": mode_desc, "split": args.split,
                    "manifest": args.manifest, "seed": args.seed},
            class_names=list(view.class_names),
            folds=[FoldResult(name="eval", report=result, n_train=0, n_test=truth.size)],
            mean_accuracy=result.weighted_accuracy,
            std_accuracy=0.0,
            pooled_confusion=result.confusion,
        )
        paths = render_report(experiment, args.out_path)
        print(f"report bundle in {args.out_path} ({len(paths)} files)")
    return 0


def _cmd_experiment(args) -> int:
    manifest = read_manifest(args.manifest)
    report = run_experiment(
        manifest,
        feature_mode=args.features_mode,
        embeddings_path=args.embeddings,
        normalization=args.normalization,
        model=args.model,
        model_params=_model_params_from_args(args),
        split_mode=args.split,
        seed=args.seed,
        jobs=args.jobs,
        mel=_mel_from_args(args),
    )
    paths = render_report(report, args.out_path)
    for fold in report.folds:
        print(f"{fold.name}: weighted accuracy {fold.report.weighted_accuracy:.4f}")
    print(
        f"mean weighted accuracy {report.mean_accuracy:.4f} "
        f"(std {report.std_accuracy:.4f})"
    )
    print(f"report bundle in {args.out_path} ({len(paths)} files)")
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(
        n_classes=args.classes,
        clips_per_class=args.per_class,
        clip_s=args.clip_seconds,
        snr_db=args.snr_db,
    )
    manifest = generate_synthetic(config, args.seed, args.out_path)
    print(
        f"wrote {len(manifest.entries)} clips over {config.n_classes} classes "
        f"to {args.out_path}"
    )
    return 0


def _cmd_human_acc(args) -> int:
    records = read_annotations(args.annotations)
    accuracy = human_accuracy(records)
    consensus = sum(1 for r in records if consensus_label(r) != "no-consensus")
    print(f"records: {len(records)}")
    print(f"with consensus: {consensus}")
    print(f"human accuracy: {accuracy:.6f}")
    return 0


_COMMANDS = {
    "prep": _cmd_prep,
    "features": _cmd_features,
    "fit-norm": _cmd_fit_norm,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "synth": _cmd_synth,
    "human-acc": _cmd_human_acc,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        sub = next(
            a for a in parser._subparsers._group_actions
        ).choices[args.command]
        _apply_config(args, sub, argv)
        _resolve_seed(args)
        _echo_params(args)
        return _COMMANDS[args.command](args)
    except _UsageError:
        return 1
    except (ValueError, FileNotFoundError, NotADirectoryError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # runtime failures
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
