"""
altisplat

Altitude-progressive Gaussian splatting: a scene reconstructed from aerial
images is refined stage by stage with fixed novel views rendered closer to
the ground.
"""

__version__ = '0.1.0'
