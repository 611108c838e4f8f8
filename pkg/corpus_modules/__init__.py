# corpus_modules/__init__.py
"""Synthetic multimodal emotion corpus"""
