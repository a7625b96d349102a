"""Elliptic Gaudin model at desk scale.

Layers, bottom up:

``elliptic``
    Odd Jacobi theta function, its logarithmic derivative, and the
    quasi-periodic kernel ``w_c``, all evaluated as truncated Taylor jets.
``liealg``
    Type A root systems, Chevalley generators in the defining
    representation, finite irreducibles, truncated dual Verma modules.
``diffop``
    Matrix-coefficient differential operators in the Cartan coordinates,
    with composition, commutators, and application to jet functions.
``gaudin``
    The face-type elliptic Gaudin transfer matrix, the Weyl-Kac
    denominator, and the commutativity certificate.
``bethe``
    Bethe equations, a damped Newton solver, Bethe covectors, and the
    eigenvalue check for the transfer matrix.
``cli``
    Configuration files, report emission, and the verification commands.
"""

from . import elliptic, liealg, diffop, gaudin, bethe, cli

__all__ = ["elliptic", "liealg", "diffop", "gaudin", "bethe", "cli"]
__version__ = "0.1.0"
