"""Branching deep Q-learning agent and its parts."""

from .dqn import (BranchingAgent, NonFiniteLoss, double_target, epsilon_at,
                  greedy_indices, make_ddqn_baseline, masked_joint_argmax, td_update)
from .nn import Adam, Layer, QNetwork, soft_update
from .replay import PrioritizedReplay, SumTree, UniformReplay

__all__ = [
    "Adam", "BranchingAgent", "Layer", "NonFiniteLoss", "PrioritizedReplay", "QNetwork",
    "SumTree", "UniformReplay", "double_target", "epsilon_at", "greedy_indices",
    "make_ddqn_baseline", "masked_joint_argmax", "soft_update", "td_update",
]
