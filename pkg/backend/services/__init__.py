"""
Experiment orchestration, model registry and run artifacts.
"""
