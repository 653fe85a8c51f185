"""Experiment drivers: feature/model comparison, LM ablation and background-music ablation."""

import json
import logging
import re
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from lyrics_asr.corpus.manifest import Manifest, Split, read_manifest
from lyrics_asr.corpus.mixing import mix_manifest
from lyrics_asr.corpus.synthetic import CorpusStyle, generate_synthetic_corpus, generate_synthetic_music
from lyrics_asr.corpus.vocabulary import Vocabulary, build_vocabulary
from lyrics_asr.decoding.hypothesis import BeamConfig
from lyrics_asr.decoding.recognize import DecodeResult, decode_corpus
from lyrics_asr.exceptions import ConfigError
from lyrics_asr.features.extractor import FeatureConfig, FeatureExtractor, FeatureSource
from lyrics_asr.lm.base import LanguageModel, perplexity
from lyrics_asr.lm.neural import NeuralLanguageModel, NeuralLMConfig, build_neural_lm, train_neural_lm
from lyrics_asr.lm.ngram import train_ngram
from lyrics_asr.models.recognizer import RecognizerModel, build_model
from lyrics_asr.presets import (
    ASSUMED_FIELDS,
    LM_WEIGHT,
    MUSIC_ABLATION_SNRS,
    NGRAM_DISCOUNT,
    TRAIN_MODEL_PAIRING,
    lm_preset,
    loss_spec_for,
    model_config_for,
    train_preset,
)
from lyrics_asr.training.data import TrainingData, make_examples
from lyrics_asr.training.trainer import TrainConfig, TrainResult, train
from lyrics_asr.utils.config_loader import load_config_file, merge_config, validate_config
from lyrics_asr.utils.seeding import derive_seed

from evaluation.attention import collapse_summary, export_attention
from evaluation.config import config
from evaluation.metrics_collector import MetricsCollector
from evaluation.report_generator import ReportGenerator
from evaluation.scoring import score_corpus

logger = logging.getLogger(__name__)

_NGRAM_NAME = re.compile(r"^(\d+)-gram$")

# ============================================================================
# EXPERIMENT SPECIFICATION
# ============================================================================


class ExperimentKind(str, Enum):
    MAIN = "main"
    LM_ABLATION = "lm-ablation"
    MUSIC_ABLATION = "music-ablation"


class TrainCondition(str, Enum):
    """Music ablation: one probe per mix level, or one clean-trained probe for all."""
    MATCHED = "matched"
    CLEAN = "clean"


class CorpusSpec(BaseModel):
    """A manifest on disk, or the parameters of a synthetic corpus."""

    manifest: Optional[str] = Field(None, description="Manifest path; synthetic corpus when unset")
    n_utts: int = Field(60, ge=3, description="Synthetic utterances")
    vocab_size: int = Field(6, ge=2, le=26, description="Synthetic letters")
    style: CorpusStyle = Field(CorpusStyle.RANDOM, description="random or chorus")
    dev_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    test_fraction: float = Field(0.2, ge=0.0, lt=1.0)


class ExperimentSpec(BaseModel):
    """Everything a run needs; together with ``seed`` it fixes the report."""

    name: str = Field(..., min_length=1, description="Experiment name")
    kind: ExperimentKind
    seed: int = Field(..., description="Run seed")
    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    features: List[FeatureConfig] = Field(default_factory=lambda: [FeatureConfig()])
    model_presets: List[str] = Field(default_factory=lambda: ["desk-transformer"], min_length=1)
    train_preset: Optional[str] = Field(None, description="Training preset (default: paired with the model)")
    train: Dict[str, Any] = Field(default_factory=dict, description="TrainConfig overrides")
    model: Dict[str, Any] = Field(default_factory=dict, description="Model preset overrides")
    lms: List[str] = Field(default_factory=lambda: ["4-gram", "recurrent", "transformer"])
    lm_presets: Dict[str, str] = Field(
        default_factory=lambda: {"recurrent": "desk-recurrent", "transformer": "desk-transformer"})
    lm_steps: int = Field(600, ge=1, description="Neural LM training steps")
    lm_weight: float = Field(LM_WEIGHT, gt=0.0, le=1.0)
    snrs: List[float] = Field(default_factory=lambda: list(MUSIC_ABLATION_SNRS))
    train_condition: TrainCondition = TrainCondition.MATCHED
    beam: BeamConfig = Field(default_factory=lambda: BeamConfig(beam_size=4, lm_weight=0.0))
    eval_splits: List[str] = Field(default_factory=lambda: ["dev", "test"], min_length=1)
    num_workers: int = Field(1, ge=1)
    work_dir: str = Field(str(config.RESULTS_DIR), description="Directory for models, mixes and attention exports")
    output: Optional[str] = Field(None, description="JSON report path (markdown written beside it)")

    @model_validator(mode="after")
    def _check(self) -> "ExperimentSpec":
        if self.corpus.manifest and not Path(self.corpus.manifest).exists():
            raise ValueError(f"manifest {self.corpus.manifest} does not exist")
        for feature in self.features:
            if feature.source == FeatureSource.ARCHIVE and not Path(feature.archive_path).exists():
                raise ValueError(f"feature archive {feature.archive_path} does not exist")
        for split in self.eval_splits:
            Split(split)
        if self.kind == ExperimentKind.LM_ABLATION:
            for name in self.lms:
                if not _NGRAM_NAME.match(name) and name not in self.lm_presets:
                    raise ValueError(f"LM '{name}' is neither '<n>-gram' nor a key of lm_presets")
        if self.kind == ExperimentKind.MUSIC_ABLATION:
            if not self.snrs:
                raise ValueError("music-ablation needs at least one SNR")
            if any(feature.source == FeatureSource.ARCHIVE for feature in self.features[:1]):
                raise ValueError("music-ablation recomputes features from mixed audio; archives are not allowed")
        return self


def load_experiment_spec(path: Optional[str], overrides: Tuple[str, ...] = (),
                         flags: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """
    YAML file < ``--set`` overrides < dedicated flags, validated.

    A top-level ``experiment:`` section is unwrapped first, so override keys
    address spec fields directly (``seed=3``, ``corpus.n_utts=20``).
    """
    file_config = load_config_file(path)
    file_config = file_config.get("experiment", file_config)
    return validate_config(ExperimentSpec, merge_config({}, file_config, overrides, flags))


# ============================================================================
# SHARED STEPS
# ============================================================================


class _Corpus:
    """Manifest plus vocabulary, with audio rooted on disk."""

    def __init__(self, manifest: Manifest, vocab: Vocabulary):
        self.manifest = manifest
        self.vocab = vocab

    def splits(self, wanted: List[str]) -> List[str]:
        return [split for split in wanted if self.manifest.split(split)]


def _load_corpus(spec: ExperimentSpec, work_dir: Path) -> _Corpus:
    if spec.corpus.manifest:
        manifest = read_manifest(spec.corpus.manifest)
        logger.info(f"Using manifest {spec.corpus.manifest} ({len(manifest)} utterances)")
    else:
        corpus_seed = derive_seed(spec.seed, "corpus")
        manifest, store = generate_synthetic_corpus(
            spec.corpus.n_utts, spec.corpus.vocab_size, corpus_seed, spec.corpus.style,
            spec.corpus.dev_fraction, spec.corpus.test_fraction,
        )
        manifest = store.save(work_dir / "corpus", manifest)
    manifest.require_splits("train", "dev")
    return _Corpus(manifest, build_vocabulary(manifest))


def _train_preset_name(spec: ExperimentSpec, model_preset: str) -> str:
    if spec.train_preset:
        return spec.train_preset
    for name, paired in TRAIN_MODEL_PAIRING.items():
        if paired == model_preset:
            return name
    raise ConfigError(f"No training preset pairs with model preset '{model_preset}'; set train_preset")


def _train_acoustic(
    spec: ExperimentSpec,
    corpus: _Corpus,
    manifest: Manifest,
    feature_cfg: FeatureConfig,
    model_preset: str,
    out_dir: Path,
    collector: Optional[MetricsCollector],
) -> Tuple[RecognizerModel, FeatureExtractor, TrainResult]:
    extractor = FeatureExtractor(feature_cfg, manifest)
    extractor.fit_cmvn(manifest.ids("train"))
    data = TrainingData(
        make_examples(manifest, "train", corpus.vocab, extractor),
        make_examples(manifest, "dev", corpus.vocab, extractor),
    )
    model_cfg = model_config_for(model_preset, extractor.feature_dim, len(corpus.vocab), extractor.num_layers,
                                 derive_seed(spec.seed, "model", model_preset), spec.model)
    model = build_model(model_cfg)
    values = merge_config(train_preset(_train_preset_name(spec, model_preset)), spec.train)
    values["seed"] = spec.seed
    train_cfg = validate_config(TrainConfig, values)
    result = train(model, data, train_cfg, loss_spec_for(model_cfg), output_dir=str(out_dir), observer=collector)
    return model, extractor, result


def _decode_split(spec: ExperimentSpec, model: RecognizerModel, vocab: Vocabulary, extractor: FeatureExtractor,
                  manifest: Manifest, split: str, lm: Optional[LanguageModel] = None,
                  collector: Optional[MetricsCollector] = None) -> Tuple[float, List[DecodeResult]]:
    beam = spec.beam.model_copy(update={"lm_weight": spec.lm_weight if lm is not None else 0.0})
    if collector is not None:
        collector.start_decoding()
    results = decode_corpus(model, vocab, extractor, manifest.ids(split), beam, lm, spec.num_workers)
    if collector is not None:
        collector.end_decoding("beam", len(results))
    report = score_corpus(manifest.transcripts(split), {r.utt_id: r.text for r in results})
    return report.error_rate, results


def _train_summary(result: TrainResult) -> Dict[str, Any]:
    return {
        "epochs": len(result.history),
        "best_epoch": result.best_epoch,
        "final_dev_loss": result.final_dev_loss,
        "stopped_early": result.stopped_early,
        "retained_epochs": result.retained_epochs,
        "dev_loss_curve": [record.dev_loss for record in result.history],
    }


def _run_row(experiment: str, row: Dict[str, Any], body: Callable[[], Dict[str, Any]],
             collector: Optional[MetricsCollector]) -> Dict[str, Any]:
    try:
        row.update(body())
        row["status"] = "ok"
    except Exception as e:
        logger.error(f"Experiment {experiment} row {row.get('row')} failed: {e}", exc_info=True)
        row["status"] = "failed"
        row["error"] = f"{type(e).__name__}: {e}"
    if collector is not None:
        collector.record_run(experiment, row["status"])
        for split, value in row.get("wer", {}).items():
            collector.record_wer(experiment, row["row"], split, value)
    return row


# ============================================================================
# EXPERIMENT KINDS
# ============================================================================


def _run_main(spec: ExperimentSpec, corpus: _Corpus, work_dir: Path,
              collector: Optional[MetricsCollector]) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    rows = []
    splits = corpus.splits(spec.eval_splits)
    for feature_cfg in spec.features:
        for preset in spec.model_presets:
            row_id = f"{feature_cfg.tag}/{preset}"

            def body(feature_cfg=feature_cfg, preset=preset, row_id=row_id) -> Dict[str, Any]:
                model, extractor, result = _train_acoustic(spec, corpus, corpus.manifest, feature_cfg, preset,
                                                           work_dir / row_id.replace("/", "_"), collector)
                wer = {split: _decode_split(spec, model, corpus.vocab, extractor, corpus.manifest, split,
                                            collector=collector)[0] for split in splits}
                fusion = result.history[-1].fusion_weights if result.history else None
                return {"wer": wer, "train": _train_summary(result), "fusion_weights": fusion,
                        "parameters": model.parameter_count()}

            rows.append(_run_row(spec.name, {"row": row_id, "features": feature_cfg.tag, "preset": preset},
                                 body, collector))

    best: Dict[str, Dict[str, Any]] = {}
    for row in rows:
        if row["status"] != "ok" or not row["wer"]:
            continue
        split = splits[0]
        current = best.get(row["features"])
        if current is None or row["wer"][split] < current["wer"]:
            best[row["features"]] = {"preset": row["preset"], "split": split, "wer": row["wer"][split]}
    return rows, {"best_downstream": best}


def _build_lm(spec: ExperimentSpec, name: str, vocab: Vocabulary, sequences: List[List[int]]) -> LanguageModel:
    match = _NGRAM_NAME.match(name)
    if match:
        return train_ngram(sequences, len(vocab), order=int(match.group(1)), discount=NGRAM_DISCOUNT)
    values = lm_preset(spec.lm_presets[name])
    values["seed"] = derive_seed(spec.seed, "lm", name)
    lm_cfg = validate_config(NeuralLMConfig, values)
    module = build_neural_lm(lm_cfg, len(vocab))
    train_neural_lm(module, sequences, steps=spec.lm_steps, seed=lm_cfg.seed)
    return NeuralLanguageModel(module, len(vocab))


def _run_lm_ablation(spec: ExperimentSpec, corpus: _Corpus, work_dir: Path,
                     collector: Optional[MetricsCollector]) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    splits = corpus.splits(spec.eval_splits)
    preset = spec.model_presets[0]
    feature_cfg = spec.features[0]
    acoustic: Dict[str, Any] = {}
    try:
        model, extractor, result = _train_acoustic(spec, corpus, corpus.manifest, feature_cfg, preset,
                                                   work_dir / "acoustic", collector)
        acoustic = {"features": feature_cfg.tag, "preset": preset, "train": _train_summary(result)}
    except Exception as e:
        logger.error(f"Acoustic model for {spec.name} failed: {e}", exc_info=True)
        acoustic = {"features": feature_cfg.tag, "preset": preset, "error": f"{type(e).__name__}: {e}"}
        model = None

    sequences = [corpus.vocab.tokenize(entry.transcript) for entry in corpus.manifest.split("train")]
    sequences = [sequence for sequence in sequences if sequence]
    dev_sequences = [corpus.vocab.tokenize(entry.transcript) for entry in corpus.manifest.split("dev")]
    dev_sequences = [sequence for sequence in dev_sequences if sequence]
    rows = []
    for name in spec.lms:

        def body(name=name) -> Dict[str, Any]:
            if model is None:
                raise RuntimeError("acoustic model unavailable")
            lm = _build_lm(spec, name, corpus.vocab, sequences)
            wer = {split: _decode_split(spec, model, corpus.vocab, extractor, corpus.manifest, split, lm,
                                        collector)[0] for split in splits}
            return {"wer": wer, "dev_perplexity": perplexity(lm, dev_sequences)}

        rows.append(_run_row(spec.name, {"row": name, "lm": name, "lm_weight": spec.lm_weight}, body, collector))
    return rows, {"acoustic_model": acoustic}


def _run_music_ablation(spec: ExperimentSpec, corpus: _Corpus, work_dir: Path,
                        collector: Optional[MetricsCollector]) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    splits = corpus.splits(spec.eval_splits)
    preset = spec.model_presets[0]
    feature_cfg = spec.features[0]
    music = generate_synthetic_music(10 * corpus.manifest.sample_rate, corpus.manifest.sample_rate,
                                     derive_seed(spec.seed, "music"))
    conditions: List[Tuple[str, Optional[float]]] = [("clean", None)]
    conditions += [(f"snr{snr:+g}", snr) for snr in spec.snrs]

    manifests: Dict[str, Manifest] = {}
    clean_model: Optional[Tuple[RecognizerModel, FeatureExtractor, TrainResult]] = None
    rows = []
    for condition, snr in conditions:

        def body(condition=condition, snr=snr) -> Dict[str, Any]:
            nonlocal clean_model
            if snr is None:
                manifest = corpus.manifest
            else:
                manifest = mix_manifest(corpus.manifest, music, snr, work_dir / "mix" / condition,
                                        derive_seed(spec.seed, "mix", condition))
            manifests[condition] = manifest
            if spec.train_condition == TrainCondition.MATCHED or snr is None:
                trained = _train_acoustic(spec, corpus, manifest, feature_cfg, preset,
                                          work_dir / f"model_{condition}", collector)
                if snr is None:
                    clean_model = trained
            elif clean_model is None:
                raise RuntimeError("clean-trained model unavailable")
            else:
                trained = clean_model
            model, extractor, result = trained
            if spec.train_condition == TrainCondition.CLEAN and snr is not None:
                # Clean-trained probe: features of the mixed audio, normalized with clean statistics
                eval_extractor = FeatureExtractor(feature_cfg, manifest)
                eval_extractor.cmvn = extractor.cmvn
                extractor = eval_extractor

            wer, attention = {}, {}
            for split in splits:
                wer[split], results = _decode_split(spec, model, corpus.vocab, extractor, manifest, split,
                                                    collector=collector)
                records = [(r.utt_id, model.cross_attention(r.tokens, model.encode(extractor(r.utt_id))))
                           for r in results]
                summaries = export_attention(records, work_dir / "attention" / condition / split)
                attention[split] = collapse_summary(summaries)
                if collector is not None:
                    collector.record_collapse(spec.name, condition, attention[split]["collapsed"])
            return {"wer": wer, "attention": attention, "train": _train_summary(result)}

        rows.append(_run_row(spec.name, {"row": condition, "condition": condition, "snr_db": snr}, body, collector))

    clean = rows[0]
    paired = []
    for row in rows[1:]:
        if clean["status"] != "ok" or row["status"] != "ok":
            continue
        paired.append({"condition": row["condition"], "snr_db": row["snr_db"],
                       "wer_delta": {split: row["wer"][split] - clean["wer"][split] for split in row["wer"]}})
    return rows, {"train_condition": spec.train_condition.value, "paired": paired}


_RUNNERS = {
    ExperimentKind.MAIN: _run_main,
    ExperimentKind.LM_ABLATION: _run_lm_ablation,
    ExperimentKind.MUSIC_ABLATION: _run_music_ablation,
}


def run_experiment(spec: ExperimentSpec, collector: Optional[MetricsCollector] = None) -> Dict[str, Any]:
    """
    Run one experiment; a failing row is marked ``failed`` and the others continue.

    Args:
        spec: Validated experiment specification
        collector: Optional prometheus collector

    Returns:
        Report dictionary (also written to ``spec.output`` as JSON plus markdown)
    """
    work_dir = Path(spec.work_dir) / spec.name
    work_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running {spec.kind.value} experiment '{spec.name}' with seed {spec.seed}")
    corpus = _load_corpus(spec, work_dir)
    rows, summary = _RUNNERS[spec.kind](spec, corpus, work_dir, collector)

    report = {
        "name": spec.name,
        "kind": spec.kind.value,
        "seed": spec.seed,
        "corpus": {
            "source": spec.corpus.manifest or "synthetic",
            "utterances": {split: len(corpus.manifest.split(split)) for split in ("train", "dev", "test")},
            "vocab_size": len(corpus.vocab),
        },
        "eval_splits": corpus.splits(spec.eval_splits),
        "assumed_fields": {preset: ASSUMED_FIELDS.get(preset, []) for preset in spec.model_presets},
        "rows": rows,
        "summary": summary,
    }
    failed = sum(1 for row in rows if row["status"] == "failed")
    logger.info(f"Experiment '{spec.name}' finished: {len(rows) - failed} rows ok, {failed} failed")
    if spec.output:
        write_report(report, spec.output)
    return report


def write_report(report: Dict[str, Any], path: str) -> Path:
    """JSON (sorted keys, no timestamps) and its markdown rendering beside it."""
    json_path = Path(path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    ReportGenerator.generate_experiment_report(report, str(json_path.with_suffix(".md")))
    logger.info(f"Experiment report saved to {json_path}")
    return json_path
