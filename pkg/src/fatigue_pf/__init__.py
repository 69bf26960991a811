"""Phase-field fatigue coupled to multi-surface cyclic plasticity.

Modules, from the bottom up: ``tensor`` (symmetric 3x3 tensors in 6-vector
form), ``constitutive`` (energies, stresses, driving forces), ``matpoint``
(homogeneous point driver), ``fem`` (quadrilateral assembly), ``solver``
(staggered minimization over a mesh), ``loading``, ``io`` and ``cli``.
"""

__version__ = "0.1.0"
