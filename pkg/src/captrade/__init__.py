"""Caption accuracy/diversity metrics, mixture-KL bounds, an SCST baseline
simulator and accuracy/diversity trade-off rates."""

from .corpus import Caption, CaptionSet, ReferenceSet, tokenize, load_caption_file, load_reference_file
from .ngram_metrics import DfStats, compute_df, cider, bleu, rouge_l, div_n, mbleu, uniqueness
from .spectral import cider_kernel, self_cider
from .tradeoff import TradeoffPoint, tpr, tcr, zero_tpr_boundary, tradeoff_report

__version__ = "0.1.0"
