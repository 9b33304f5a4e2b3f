"""Corpus preparation toolkit: ingest, cleanse, dedup, balance, tokenizer training,
tokenizer benchmarking and pretraining data prep."""

from __future__ import annotations

__version__ = "0.1.0"
