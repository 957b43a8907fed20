"""Numerical lab for adiabatic gluing of disk-flow-disk configurations.

Modules:
    target    chart geometry (flat C^n, projective chart) and Morse data
    cylinder  grids, sections, mode decomposition, weights and norms
    flow      gradient segments, flow differentials, transversality, index
    preglue   cutoffs, adiabatic parameters, approximate-solution assembly
    floer_op  perturbed Cauchy-Riemann operator and its linearization
    inverse   mode-wise right inverses, zero-mode matching, splicing
    newton    quantitative Newton correction of approximate solutions
    decay     three-interval exponential-decay diagnostics
    adiabatic Karcher means, renormalization, adiabatic distance
    examples  the explicit projective-space adiabatic family
    cli       command-line entry points
"""

__version__ = "0.1.0"
