"""SE(3) trajectory diffusion toolkit.

Lie-group primitives, an interpolation-based forward/reverse diffusion
process on SE(3), equivariant-by-construction denoisers, synthetic
equivariant manipulation tasks with training/evaluation harnesses, and an
exact finite-group verifier for the equivariant Markov chain layouts.
"""

__version__ = "0.1.0"
