"""Random alternating-shear maps on the two-torus: dynamics, exponents, control and mixing."""

__version__ = "0.1.0"
