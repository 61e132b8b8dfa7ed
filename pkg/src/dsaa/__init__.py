"""Desk-scale driving-signal-aware avatar model.

A small numpy implementation of a conditional VAE avatar whose latent code
is explicitly disentangled from the driving signals (body pose, face state,
view), with spatially localized conditioning, linear blend skinning and an
ambient-occlusion driven quasi-shadow branch.  Training is inverse rendering
against procedurally generated multi-view data with a known hidden factor.
"""

__version__ = "0.1.0"
