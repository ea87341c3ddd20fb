"""
Receive beamforming for one slot
================================

Three nodes transmit to an 8-antenna UAV at the same time. We compare the
successive convex approximation over the lifted problem with the closed-form
MMSE combiners and with the best codewords of a DFT codebook.
"""

import numpy as np

from uavcollect import beamforming as bf

rng = np.random.default_rng(0)
m, s = 8, 3
scale = np.sqrt(10 ** rng.uniform(-9, -7, s))
h = (rng.standard_normal((m, s)) + 1j * rng.standard_normal((m, s))) / np.sqrt(2) * scale
inst = bf.BeamInstance(h, powers=np.full(s, 0.1), noise_power=1e-13)

# %% SCA from the matched-filter start
sca = bf.sca_optimize(inst)
print("SCA rates      ", np.round(sca.rates, 4))
print("iterations     ", sca.diagnostics["iterations"])
print("objective path ", np.round(sca.diagnostics["objective_history"], 4))

# %% the closed-form oracle gives the same per-node rates
mmse = bf.mmse_beamformers(inst)
print("MMSE rates     ", np.round(mmse.rates, 4))
print("max difference ", np.max(np.abs(sca.rates - mmse.rates)))

# %% a 16-entry codebook loses a little
cb = bf.build_dft_codebook(m, 16)
idx = [bf.best_codeword(inst, k, cb) for k in range(s)]
print("codebook rates ", np.round(bf.codebook_beamformers(inst, cb, idx).rates, 4), "indices", idx)

# %% the instance round-trips through JSON (complex entries as [re, im])
doc = bf.solve_json(inst.to_json(), "mmse")
print("JSON combiner of node 0, first entry:", doc["beamformers"][0][0])
