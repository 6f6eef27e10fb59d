"""
Train a tiny spiking localizer, then stress it
==============================================

A short run on a reduced synthetic set: rate coding, T=4, a few epochs.
Afterwards the model is evaluated under Gaussian noise at every severity and
its energy is estimated from the measured spike rates.
"""

import numpy as np

from spikeloc import energy
from spikeloc.codec import CodingScheme
from spikeloc.data import generate, split
from spikeloc.evaluation import encode_corrupted, sweep
from spikeloc.net import Network, snn_tiny, train

samples = generate(600, 150, seed=0)
train_set, val_set = split(samples, "train"), split(samples, "val")
scheme = CodingScheme("rate", 4)

net = Network(snn_tiny(timesteps=4), seed=0)
result = train(net, train_set, val_set, scheme, epochs=6,
               log=lambda r: print(f"epoch {r['epoch']}  loss {r['train_loss']:.4f}  val mIoU {r['val_miou']:.2f}"))
best = result.checkpoint.network()
print("best val mIoU %.2f at epoch %d" % (result.best_val_miou, result.checkpoint.epoch))

###############################################################################
# Relative accuracy drop under Gaussian noise, severities 1 to 5.

report = sweep(best, val_set, scheme, ("gaussian_noise",))
print("clean mIoU %.2f" % report.miou_clean)
print("RAD per severity", np.round(report.rad_matrix()["gaussian_noise"], 2))
print("mRAD %.2f" % report.mrad_vector()["gaussian_noise"])

###############################################################################
# Energy: FLOPs of the equivalent ANN at 4.6 pJ per MAC against
# rate-scaled accumulates at 0.9 pJ.

stats = energy.collect_spike_stats(best, encode_corrupted(val_set, scheme))
rep = energy.energy_report(best.spec, stats)
for row in rep.rows:
    print(f"  {row['name']:14s} FLOPs {row['flops_ann']:8d}  Rs {row['rs']:.3f}")
print(f"E_ANN {rep.e_ann_mj:.3e} mJ  E_SNN {rep.e_snn_mj:.3e} mJ  ratio {rep.ratio:.2f}")
