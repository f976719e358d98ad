"""uvforge: coarse-to-fine UV texture generation for untextured meshes."""

__version__ = "0.1.0"
