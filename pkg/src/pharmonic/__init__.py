"""Rotationally symmetric p-harmonic maps between model manifolds."""
