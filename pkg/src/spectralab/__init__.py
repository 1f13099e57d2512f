"""spectralab: coupling-resonance and singular-spectrum stability numerics
on finite-dimensional self-adjoint operator models."""

__version__ = "0.1.0"
