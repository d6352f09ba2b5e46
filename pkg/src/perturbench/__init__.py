"""perturbench: desk-scale adversarial robustness evaluation.

Toy differentiable classifiers (CNN and ViT), an Lp attack suite,
preprocessing defenses, perceptual and spectral analysis tools, adaptive
expectation-over-transformation attacks, and a reproducible experiment
harness.
"""

__version__ = "0.1.0"
