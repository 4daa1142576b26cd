"""Charged scalar resonances of de Sitter-Reissner-Nordstrom black holes.

``background`` holds the geometry, ``reduction`` the closed-form
second-order calculus, ``spectral`` the collocation solver and ``modes``
the end-to-end pipeline that cross-checks the two.
"""

__version__ = "0.1.0"
