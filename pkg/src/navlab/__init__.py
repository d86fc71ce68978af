"""navlab: an image-goal navigation laboratory.

Procedural raycast worlds, a from-scratch differentiable encoder stack with
four goal/observation fusion mechanisms, a recurrent actor-critic trained
with PPO, and an evaluation harness for SR/SPL and activation-map panels.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
