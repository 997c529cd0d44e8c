"""High-precision two-copy statistical model of noisy random quantum circuits.

Engines: a dense 2^N oracle (:mod:`xebstat.model`), the permutation-reduced
all-to-all transfer matrix (:mod:`xebstat.alltoall`) and an MPS/TEBD plus
Krylov engine for 1D brickwork circuits (:mod:`xebstat.mps`, :mod:`xebstat.krylov`).
"""

from .precision import PrecisionContext

__all__ = ["PrecisionContext"]
__version__ = "0.1.0"
