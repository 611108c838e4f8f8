# models/__init__.py
"""Data models: utterance samples, model specs, parameters and checkpoints"""
