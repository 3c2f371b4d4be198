"""Histogram Loss for regression.

Scalar targets are projected onto a fixed histogram and a softmax head is
trained with cross-entropy to that projection; the prediction is the
histogram mean. The package also carries the baseline losses, a from-scratch
MLP with exact gradients and an experiment harness.
"""

from .binning import (
    BinGrid,
    Gaussian,
    OneBin,
    UniformMix,
    erf,
    expected_value,
    locate_bin,
    make_bin_grid,
    project,
    project_gaussian,
    project_onebin,
    project_uniform_mix,
)
from .losses import LossSpec, hl_grad_logits, hl_loss, l1_loss, l2_loss, l2_softmax_loss, loss_eval, prop1_bound
from .model import Architecture, Network, backprop, extract_representation, forward, init_network, softmax

__version__ = "0.1.0"
