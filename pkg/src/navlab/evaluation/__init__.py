"""Episode runner and navigation metrics (SR, SPL), plus CAM panel export."""

from .metrics import EpisodeResult, evaluate_episodes, run_episode, spl, success_rate
from .panels import export_cam_panels

__all__ = ["EpisodeResult", "evaluate_episodes", "export_cam_panels",
           "run_episode", "spl", "success_rate"]
