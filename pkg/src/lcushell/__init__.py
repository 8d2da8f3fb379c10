"""Statevector emulation of a second-quantized nuclear shell model solved by
LCU gradient descent.

Modules: ``orbits`` (single-particle basis), ``meanfield`` (Woods-Saxon one-body
field), ``interactions`` (pairing and Coulomb), ``pauli`` (Jordan-Wigner mapping),
``statevec`` (dense emulation of the T = I - 2 gamma H iteration), ``oracle``
(exact sector diagonalization), ``solver``, ``fitting``, ``resources`` and ``cli``.
"""

__version__ = "0.1.0"
