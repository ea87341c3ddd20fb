"""
One episode of the data-collection environment
==============================================

A scripted loop around the start point, with the MMSE oracle doing the
beamforming. Each slot prints who was scheduled, what was collected and how
the reward splits into its parts.
"""

import numpy as np

from uavcollect import config as C
from uavcollect.env import DataCollectionEnv
from uavcollect.harness import circling_policy, indices_to_action

cfg = C.desk_profile(run__algo="fbs",
                     scenario__node_positions="500,500; 540,520; 470,460; 800,200; 150,850")
env = DataCollectionEnv(cfg, beam_mode="mmse")
policy = circling_policy(env, distance_index=1, turn=1)

obs = env.reset(seed=0)
print("observation length", len(obs), "branches", env.branch_sizes())

done = False
total = 0.0
while not done:
    idx = policy(obs, env.action_mask())
    obs, r, done, info = env.step(indices_to_action(idx, env.k, env.uses_beam_actions))
    rec = info.record
    total += r
    if rec["slot"] % 5 == 1 or done:
        x, y = rec["position"]
        print(f"slot {rec['slot']:2d}  at ({x:6.1f}, {y:6.1f})  scheduled {rec['scheduled']}  "
              f"Mbit {np.sum(rec['volume']) / 1e6:8.1f}  reward parts {rec['reward']}")

print("episode reward", round(total, 2))
