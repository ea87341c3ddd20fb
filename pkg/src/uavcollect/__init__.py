"""Simulator and optimiser for multi-antenna UAV data collection from ground IoT nodes.

Modules: ``scenario`` (geometry and kinematics), ``channel`` (multipath
array channel), ``link`` (SINR, volumes, fairness, efficiency),
``beamforming`` (SCA over the lifted problem, MMSE oracle, codebooks),
``env`` (the MDP), ``agent`` (branching DQN variants), ``harness``
(train/evaluate/sweep and run artifacts) and ``cli``.
"""

__version__ = "0.1.0"
