from .model import BOS_ID, DEFAULT_VOCAB_SIZE, EOS_ID, PAD_ID, TokenizerError, TokenizerModel
from .pretok import Pretoken, pretokenize
from .train import train_bpe, train_from_counts

__all__ = [
    "BOS_ID",
    "DEFAULT_VOCAB_SIZE",
    "EOS_ID",
    "PAD_ID",
    "Pretoken",
    "TokenizerError",
    "TokenizerModel",
    "pretokenize",
    "train_bpe",
    "train_from_counts",
]
