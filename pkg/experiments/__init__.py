"""Experiment configuration, scenario catalog, orchestration and reports"""
