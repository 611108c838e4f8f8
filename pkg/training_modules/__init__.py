# training_modules/__init__.py
"""Adversarial training recipe: RMSProp, joint loss, early stopping, selection, grid search"""
