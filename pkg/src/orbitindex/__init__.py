"""Index identities for periodic orbits of a planar magnetic system."""

__version__ = "0.1.0"
