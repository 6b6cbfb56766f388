"""Phoneme-level prosody discretization: F0/duration extraction, label
vocabularies, note quantization and a mixture-of-logistics attention kernel."""

__version__ = "0.1.0"
