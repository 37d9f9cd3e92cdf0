"""Generalized planning through feature abstractions: STRIPS instances,
features, abstract actions, qualitative numerical projections and a
strong-cyclic FOND planner with a termination check.
"""
__version__ = "0.1.0"
