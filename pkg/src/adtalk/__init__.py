"""Vocalisation-graph features and Real AdaBoost classification of dialogues."""

__version__ = "0.1.0"
