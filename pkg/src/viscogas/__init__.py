"""Viscous flux-approximate solutions of the polytropic gas system with
variable entropy: pointwise model algebra, weak entropy kernels, a
method-of-lines solver, a-priori estimate monitors and weak-form verifiers."""

__version__ = "0.1.0"
