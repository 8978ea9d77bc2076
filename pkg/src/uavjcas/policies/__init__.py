from .heuristics import RandomPolicy, SweepPolicy, lawnmower_direction, random_policy
from .mlp import MlpPolicy, PolicyWeights, load_weights, mlp_forward, save_weights
from .ppo import PPOConfig, RolloutBatch, compute_gae, ppo_update
