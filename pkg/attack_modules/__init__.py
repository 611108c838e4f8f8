# attack_modules/__init__.py
"""Attacker probes and the two attack protocols run against trained models"""
