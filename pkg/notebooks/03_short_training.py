"""
Short training runs
===================

Forty episodes of each algorithm at desk scale, then a frozen-policy
evaluation on held-out seeds. The full 300-episode comparison lives in the
acceptance suite; this is only a quick look at the artifacts.
"""

import os
import tempfile

import numpy as np

from uavcollect import config as C
from uavcollect import harness

out = tempfile.mkdtemp(prefix="uavcollect-demo-")
for algo in ("fbs", "alo", "ddqn", "rla"):
    cfg = C.desk_profile(run__algo=algo, run__episodes=40)
    art = harness.train(cfg, seed=0, out_dir=os.path.join(out, algo))
    rew = np.array([row["reward"] for row in art.rows])
    ev = harness.evaluate(art.checkpoint, 3)["summary"]
    print(f"{algo:5s} reward first10 {rew[:10].mean():8.1f} last10 {rew[-10:].mean():8.1f}  "
          f"eval SDC {ev['sdc_mean']:.3e} bits  Jain {ev['jain_mean']:.3f}")

print("artifacts in", out)
print(sorted(os.listdir(os.path.join(out, "rla"))))

# %% trajectories as CSV for external plotting
paths = harness.export_traces(os.path.join(out, "rla", "trace.jsonl"), os.path.join(out, "traj"),
                              C.desk_profile().scenario.limits())
print(len(paths), "trajectory files, e.g.", os.path.basename(paths[-1]))
