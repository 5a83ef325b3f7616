"""actionseq: feature-sequence to action-sequence translation.

A small numpy library implementing two recurrent machine-translation
architectures (an LSTM encoder-decoder and a GRU encoder-decoder with
additive attention), two stacked-LSTM baselines, teacher-forced training
with hand-derived gradients verified by finite differences, sequence
metrics, a seeded synthetic dataset, two-stage video captioning, and
attention-derived temporal action localization.
"""

from .caption import (
    CaptionPipeline,
    action_scores,
    build_pipeline,
    caption_loss,
    generate_caption,
    train_pipeline,
)
from .cells import GruCellParams, LstmCellParams, gru_step, lstm_step
from .localize import LocalizationGrid, evaluate_localization, localize
from .metrics import MetricReport, bleu, frame_map, rouge_l, seq_item_accuracy
from .numkit import cross_entropy, grad_check, softmax
from .synthdata import Dataset, Sample, SyntheticSpec, generate, load_dataset, load_external, save_dataset
from .train import TrainingConfig, sequence_loss, train_model
from .translate import (
    GRU_AA,
    LSTM_ED,
    LSTM_MEAN,
    LSTM_SS,
    VARIANTS,
    AttentionTrace,
    FeatureSequence,
    Prediction,
    Seq2SeqModel,
    attention,
    build_model,
    context_vector,
    decode_greedy,
    encode,
    forward_baseline,
    load_model,
    save_model,
    translate,
)
from .vocab import Vocabulary

__version__ = "0.1.0"
