"""Valley-splitting mapping by spin-coherent conveyor-mode shuttling.

Forward simulation of singlet-triplet probe experiments in Si/SiGe and the
inverse analysis that recovers valley-splitting landscapes from them.
"""

__version__ = "0.1.0"
