"""Procedural synthetic counting-VQA dataset generation and evaluation."""

__version__ = "0.1.0"
