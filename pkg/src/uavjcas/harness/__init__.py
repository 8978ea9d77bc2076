from .config import ExperimentConfig, load_config
from .runner import EpisodeMetrics, evaluate_sweep, run_episode, run_episodes
