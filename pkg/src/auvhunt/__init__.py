"""Multi-AUV underwater pursuit-evasion lab.

A planar hunting game between speed-limited hunter AUVs and an evading
target, with a shallow-water acoustic channel model, a covert-communication
budget audited at every step, an offline dataset pipeline, and a
diffusion-based multi-agent policy trained and executed on top of a
minimal from-scratch autodiff kernel.
"""

from . import acoustics, amadp, covert, dataset, environment, kinematics, nncore, policies
from .seeds import derive_rng, derive_seed

__version__ = "0.1.0"

__all__ = [
    "acoustics",
    "amadp",
    "covert",
    "dataset",
    "environment",
    "kinematics",
    "nncore",
    "policies",
    "derive_rng",
    "derive_seed",
    "__version__",
]
