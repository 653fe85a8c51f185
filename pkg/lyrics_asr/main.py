"""Command-line entry point: ``python -m lyrics_asr.main <command> ...``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from lyrics_asr import __version__
from lyrics_asr.config import settings
from lyrics_asr.exceptions import DataError, LyricsASRError, UsageError
from lyrics_asr.utils.config_loader import get_dotted, load_config_file, merge_config, validate_config
from lyrics_asr.utils.logging_utils import set_run_id, setup_logging

logger = logging.getLogger(__name__)

FEATURES_FILE = "features.json"
CMVN_FILE = "cmvn.npz"
VOCAB_FILE = "vocab.txt"


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: error: {message}\n")


def _merged(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None,
            flags: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return merge_config(base or {}, load_config_file(args.config), args.set, flags)


def _load_vocab(path: Optional[str], manifest, unit: str = "char"):
    from lyrics_asr.corpus import build_vocabulary, read_vocabulary

    if path:
        return read_vocabulary(path, unit)
    return build_vocabulary(manifest, unit)


def _metrics(args: argparse.Namespace, run: str):
    port = getattr(args, "metrics_port", None)
    if port is None and not settings.ENABLE_METRICS:
        return None
    from evaluation.metrics_collector import MetricsCollector
    from evaluation.metrics_server import start_metrics_server

    start_metrics_server(port=port)
    return MetricsCollector(run=run, command=args.command)


# ============================================================================
# COMMANDS
# ============================================================================


def cmd_prepare(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import build_vocabulary, manifest_from_directory, write_manifest, write_vocabulary

    manifest = manifest_from_directory(args.data_dir, args.sample_rate)
    out_dir = Path(args.output_dir)
    write_manifest(manifest, out_dir / "manifest.tsv")
    vocab = build_vocabulary(manifest, args.unit)
    write_vocabulary(vocab, out_dir / VOCAB_FILE)
    logger.info(f"Prepared {len(manifest)} utterances and {len(vocab)} tokens in {out_dir}")


def cmd_synth(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import (
        build_vocabulary,
        generate_synthetic_corpus,
        generate_synthetic_music,
        save_audio,
        write_vocabulary,
    )

    manifest, store = generate_synthetic_corpus(args.n_utts, args.vocab_size, args.seed, args.style,
                                                args.dev_fraction, args.test_fraction)
    out_dir = Path(args.output_dir)
    manifest = store.save(out_dir, manifest)
    write_vocabulary(build_vocabulary(manifest), out_dir / VOCAB_FILE)
    if args.music_seconds > 0:
        music = generate_synthetic_music(int(args.music_seconds * manifest.sample_rate), manifest.sample_rate,
                                         args.seed)
        save_audio(music, out_dir / "music.wav")
    logger.info(f"Synthetic corpus written to {out_dir}")


def cmd_mix(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import load_audio, mix_manifest, read_manifest

    manifest = read_manifest(args.manifest)
    music = load_audio(args.music, expected_rate=manifest.sample_rate)
    mix_manifest(manifest, music, args.snr, args.output_dir, args.seed)


def cmd_extract(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import read_manifest
    from lyrics_asr.features import FeatureConfig, FeatureExtractor, StackArchiveWriter

    manifest = read_manifest(args.manifest)
    data = _merged(args, flags={"features.source": args.source, "features.n_layers": args.n_layers,
                                "features.seed": args.seed})
    feature_cfg = validate_config(FeatureConfig, data.get("features", {}))
    extractor = FeatureExtractor(feature_cfg, manifest)
    with StackArchiveWriter(args.output) as writer:
        for utt_id in sorted(manifest.ids()):
            writer.add(utt_id, extractor.raw(utt_id))


def cmd_train(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import read_manifest, write_vocabulary
    from lyrics_asr.features import FeatureConfig, FeatureExtractor
    from lyrics_asr.models import build_model
    from lyrics_asr.presets import TRAIN_MODEL_PAIRING, loss_spec_for, model_config_for, train_preset
    from lyrics_asr.training import TrainConfig, TrainingData, make_examples, train

    config = _merged(args, flags={"train.preset": args.train_preset, "model.preset": args.preset,
                                  "train.seed": args.seed, "features.archive_path": args.features})
    if args.features and "source" not in config.get("features", {}):
        config["features"]["source"] = "archive"
    train_name = get_dotted(config, "train.preset", "desk-transformer")
    model_name = get_dotted(config, "model.preset", TRAIN_MODEL_PAIRING.get(train_name))
    if model_name is None:
        raise UsageError(f"No model preset pairs with training preset '{train_name}'; pass --preset")

    manifest = read_manifest(args.manifest)
    vocab = _load_vocab(args.vocab, manifest)
    feature_cfg = validate_config(FeatureConfig, config.get("features", {}))
    extractor = FeatureExtractor(feature_cfg, manifest)
    cmvn = extractor.fit_cmvn(manifest.ids("train"))
    data = TrainingData(make_examples(manifest, "train", vocab, extractor),
                        make_examples(manifest, "dev", vocab, extractor))

    model_overrides = {key: value for key, value in config.get("model", {}).items() if key != "preset"}
    model_cfg = model_config_for(model_name, extractor.feature_dim, len(vocab), extractor.num_layers,
                                 args.seed, model_overrides)
    train_cfg = validate_config(TrainConfig, merge_config(train_preset(train_name), config.get("train", {})))
    loss_spec = loss_spec_for(model_cfg, config.get("loss"))

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_vocabulary(vocab, out_dir / VOCAB_FILE)
    if cmvn is not None:
        cmvn.save(out_dir / CMVN_FILE)
    (out_dir / FEATURES_FILE).write_text(json.dumps(feature_cfg.model_dump(mode="json"), indent=2, sort_keys=True),
                                         encoding="utf-8")

    model = build_model(model_cfg)
    result = train(model, data, train_cfg, loss_spec, output_dir=str(out_dir),
                   observer=_metrics(args, f"{model_name}-{args.seed}"))
    logger.info(f"Best epoch {result.best_epoch}, final dev loss {result.final_dev_loss:.4f}; "
                f"model saved to {result.checkpoint_path}")


def cmd_lm_train(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import read_manifest
    from lyrics_asr.lm import (
        NeuralLanguageModel,
        NeuralLMConfig,
        build_neural_lm,
        perplexity,
        save_neural_lm,
        train_neural_lm,
        train_ngram,
        write_arpa,
    )
    from lyrics_asr.presets import NGRAM_DISCOUNT, lm_preset

    manifest = read_manifest(args.manifest)
    vocab = _load_vocab(args.vocab, manifest)
    sequences = [ids for ids in (vocab.tokenize(entry.transcript) for entry in manifest.split("train")) if ids]
    dev = [ids for ids in (vocab.tokenize(entry.transcript) for entry in manifest.split("dev")) if ids]

    if args.kind == "ngram":
        lm = train_ngram(sequences, len(vocab), order=args.order, discount=args.discount or NGRAM_DISCOUNT)
        write_arpa(lm, args.output, vocab.tokens)
    else:
        values = merge_config(lm_preset(args.kind), _merged(args).get("lm", {}), flags={"seed": args.seed})
        lm_cfg = validate_config(NeuralLMConfig, values)
        module = build_neural_lm(lm_cfg, len(vocab))
        train_neural_lm(module, sequences, steps=args.steps, lr=args.lr, seed=args.seed)
        save_neural_lm(args.output, module, lm_cfg, len(vocab), {"preset": args.kind})
        lm = NeuralLanguageModel(module, len(vocab))
    if dev:
        logger.info(f"Dev perplexity: {perplexity(lm, dev):.3f}")


def cmd_decode(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import read_manifest, read_vocabulary
    from lyrics_asr.decoding import BeamConfig, decode_corpus, write_nbest
    from lyrics_asr.features import FeatureConfig, FeatureExtractor, GlobalCMVN
    from lyrics_asr.lm import load_language_model
    from lyrics_asr.models import load_model

    model_dir = Path(args.model_dir)
    model, _ = load_model(str(model_dir / "model.pt"))
    vocab = read_vocabulary(model_dir / VOCAB_FILE)
    manifest = read_manifest(args.manifest)
    feature_cfg = FeatureConfig.model_validate_json((model_dir / FEATURES_FILE).read_text(encoding="utf-8"))
    if args.features:
        feature_cfg = validate_config(FeatureConfig, {**feature_cfg.model_dump(mode="json"),
                                                      "source": "archive", "archive_path": args.features})
    extractor = FeatureExtractor(feature_cfg, manifest)
    if (model_dir / CMVN_FILE).exists():
        extractor.cmvn = GlobalCMVN.load(model_dir / CMVN_FILE)

    lm = load_language_model(args.lm, vocab.tokens) if args.lm else None
    flags = {"beam_size": args.beam_size, "lm_weight": args.lm_weight if lm is not None else 0.0,
             "ctc_weight": args.ctc_weight, "length_bonus": args.length_bonus, "nbest": args.nbest}
    data = _merged(args, flags={f"beam.{key}": value for key, value in flags.items()})
    beam = validate_config(BeamConfig, data.get("beam", {}))
    results = decode_corpus(model, vocab, extractor, manifest.ids(args.split), beam, lm,
                            args.num_workers or settings.NUM_WORKERS, greedy=args.greedy)

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "hyp.txt", "w", encoding="utf-8") as f:
        for result in results:
            f.write(f"{result.utt_id}\t{result.text}\n")
    if not args.greedy:
        write_nbest([record for result in results for record in result.nbest_records(vocab)],
                    str(out_dir / "nbest.txt"))
    logger.info(f"Wrote hypotheses for {len(results)} utterances to {out_dir}")


def _read_hypotheses(path: str) -> Dict[str, str]:
    from lyrics_asr.decoding import best_texts, read_nbest

    if not Path(path).exists():
        raise DataError(f"Hypothesis file not found: {path}")
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines and len(lines[0].split("\t")) == 6:
        return best_texts(read_nbest(path))
    hyps = {}
    for line in lines:
        if line:
            utt_id, _, text = line.partition("\t")
            hyps[utt_id] = text
    return hyps


def cmd_score(args: argparse.Namespace) -> None:
    from lyrics_asr.corpus import read_manifest
    from evaluation.scoring import score_corpus, write_score_report

    manifest = read_manifest(args.manifest)
    report = score_corpus(manifest.transcripts(args.split), _read_hypotheses(args.hyp), args.unit)
    if args.output:
        write_score_report(report, args.output)
    print(f"{'WER' if args.unit == 'word' else 'CER'} {report.error_rate:.2f}% "
          f"(N={report.ref_len} S={report.substitutions} D={report.deletions} I={report.insertions})")


def cmd_experiment(args: argparse.Namespace) -> None:
    from evaluation.experiments import load_experiment_spec, run_experiment

    flags = {"seed": args.seed, "output": args.output, "work_dir": args.work_dir}
    spec = load_experiment_spec(args.config, tuple(args.set), flags)
    collector = _metrics(args, spec.name)
    report = run_experiment(spec, collector)
    failed = [row["row"] for row in report["rows"] if row["status"] == "failed"]
    if failed:
        logger.warning(f"Failed rows: {failed}")


def cmd_report(args: argparse.Namespace) -> None:
    from evaluation.attention import plot_attention_archive
    from evaluation.report_generator import ReportGenerator

    reports = [ReportGenerator.load_report(path) for path in args.inputs]
    if len(reports) == 1:
        content = ReportGenerator.generate_experiment_report(reports[0], args.output)
    else:
        content = ReportGenerator.generate_comparison_report(reports, args.output)
    if not args.output:
        print(content)
    if args.plot_attention:
        plot_attention_archive(args.plot_attention, args.plot_output or args.plot_attention, args.max_plots)


# ============================================================================
# PARSER
# ============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitArgumentParser(
        prog="lyrics_asr",
        description="End-to-end lyrics recognition toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Desk-scale synthetic corpus with background music
  python -m lyrics_asr.main synth --output-dir data/synth --n-utts 60 --seed 1 --music-seconds 10

  # Train the desk transformer on mel features
  python -m lyrics_asr.main train --manifest data/synth/manifest.tsv --output-dir exp/desk --seed 1

  # Decode and score the test split
  python -m lyrics_asr.main decode --model-dir exp/desk --manifest data/synth/manifest.tsv --split test \\
      --output-dir exp/desk/test
  python -m lyrics_asr.main score --manifest data/synth/manifest.tsv --split test --hyp exp/desk/test/hyp.txt

  # Run an experiment from YAML
  python -m lyrics_asr.main experiment --config configs/experiments/lm_ablation.yaml --seed 1
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a dotted config key (repeatable)")
    common.add_argument("--log-level", type=str, default=settings.LOG_LEVEL, help="Logging level")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable debug output")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=ToolkitArgumentParser)

    p = sub.add_parser("prepare", parents=[common], help="Build manifest and vocabulary from a directory")
    p.add_argument("--data-dir", required=True, help="Root with train/dev/test subdirectories")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--sample-rate", type=int, help="Expected sample rate")
    p.add_argument("--unit", choices=["char", "word"], default="char")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", parents=[common], help="Generate a synthetic corpus")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--n-utts", type=int, default=60)
    p.add_argument("--vocab-size", type=int, default=6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--style", choices=["random", "chorus"], default="random")
    p.add_argument("--dev-fraction", type=float, default=0.2)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--music-seconds", type=float, default=0.0, help="Also write synthetic music.wav")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", parents=[common], help="Mix background music into every utterance")
    p.add_argument("--manifest", required=True)
    p.add_argument("--music", required=True, help="Music WAV at the manifest sample rate")
    p.add_argument("--snr", type=float, required=True, help="Target voice-to-music SNR in dB")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("extract", parents=[common], help="Extract feature stacks into an archive")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True, help="Archive path (index written beside it)")
    p.add_argument("--source", choices=["mel", "pseudo-ssl"], default=None)
    p.add_argument("--n-layers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="Train a recognizer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", help="Vocabulary file (built from the train split when omitted)")
    p.add_argument("--features", help="Stack archive to train on (default: features.* config)")
    p.add_argument("--preset", help="Model preset")
    p.add_argument("--train-preset", help="Training preset")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--metrics-port", type=int, help="Expose prometheus metrics on this port")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("lm-train", parents=[common], help="Train a language model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", help="Vocabulary file")
    p.add_argument("--kind", default="ngram", help="'ngram' or a neural LM preset")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--discount", type=float, default=None)
    p.add_argument("--steps", type=int, default=600)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="ARPA file (ngram) or checkpoint (neural)")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("decode", parents=[common], help="Decode a manifest split")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--features", help="Stack archive (default: the training feature config)")
    p.add_argument("--lm", help="ARPA file or neural LM checkpoint")
    p.add_argument("--beam-size", type=int)
    p.add_argument("--lm-weight", type=float)
    p.add_argument("--ctc-weight", type=float)
    p.add_argument("--length-bonus", type=float)
    p.add_argument("--nbest", type=int)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--num-workers", type=int)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", parents=[common], help="Score hypotheses against a manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--hyp", required=True, help="'utt_id<TAB>text' file or an N-best file")
    p.add_argument("--unit", choices=["word", "char"], default="word")
    p.add_argument("--output", help="Per-utterance TSV (markdown written beside it)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("experiment", parents=[common], help="Run an experiment")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", help="JSON report path")
    p.add_argument("--work-dir", help="Working directory")
    p.add_argument("--metrics-port", type=int, help="Expose prometheus metrics on this port")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", parents=[common], help="Render markdown from JSON reports")
    p.add_argument("inputs", nargs="+", help="Experiment report JSON files")
    p.add_argument("--output", help="Markdown output (stdout when omitted)")
    p.add_argument("--plot-attention", help="Attention export directory to plot")
    p.add_argument("--plot-output", help="Directory for PNG plots")
    p.add_argument("--max-plots", type=int, default=20)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("lyrics_asr", "DEBUG" if args.verbose else args.log_level)
    seed = getattr(args, "seed", None)
    set_run_id(f"{args.command}-{seed}" if seed is not None else None)

    try:
        args.func(args)
    except LyricsASRError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
