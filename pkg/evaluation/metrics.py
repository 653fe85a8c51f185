"""Prometheus metrics definitions for training, decoding and experiments."""

from prometheus_client import Counter, Gauge, Histogram, Info


# Training Metrics
training_steps_total = Counter(
    'lyrics_asr_training_steps_total',
    'Total number of optimizer steps',
    ['run']
)

training_epoch_duration_seconds = Histogram(
    'lyrics_asr_training_epoch_duration_seconds',
    'Duration of training epochs in seconds',
    ['run'],
    buckets=[1, 5, 10, 30, 60, 300, 900, 3600]
)

training_loss = Gauge(
    'lyrics_asr_training_loss',
    'Latest loss by split',
    ['run', 'split']
)

training_learning_rate = Gauge(
    'lyrics_asr_training_learning_rate',
    'Current learning rate',
    ['run']
)

fusion_layer_weight = Gauge(
    'lyrics_asr_fusion_layer_weight',
    'Softmax weight of each feature-stack layer',
    ['run', 'layer']
)

# Decoding Metrics
decoded_utterances_total = Counter(
    'lyrics_asr_decoded_utterances_total',
    'Total number of decoded utterances',
    ['mode']
)

decoding_duration_seconds = Histogram(
    'lyrics_asr_decoding_duration_seconds',
    'Duration of corpus decoding runs in seconds',
    ['mode'],
    buckets=[0.1, 0.5, 1, 5, 10, 30, 60, 300]
)

# Experiment Metrics
corpus_wer = Gauge(
    'lyrics_asr_corpus_wer',
    'Corpus WER (percent) of an experiment row',
    ['experiment', 'row', 'split']
)

attention_collapse_total = Counter(
    'lyrics_asr_attention_collapse_total',
    'Utterances whose decoder attention collapsed onto one frame',
    ['experiment', 'condition']
)

experiment_runs_total = Counter(
    'lyrics_asr_experiment_runs_total',
    'Experiment sub-runs by status',
    ['experiment', 'status']
)

# Toolkit Info
toolkit_info = Info(
    'lyrics_asr_toolkit',
    'Information about the running toolkit'
)


def initialize_toolkit_info(version: str, command: str):
    """Initialize toolkit info metric."""
    toolkit_info.info({
        'version': version,
        'command': command,
    })
