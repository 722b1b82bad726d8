"""Toolkit for interpreting and evaluating controllability of a 2-D reduced
expressive latent space: acoustic feature extraction, trend regression,
objective distortion metrics, and a grid-based perceptual experiment harness."""

__version__ = "0.1.0"
