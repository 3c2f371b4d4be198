"""
Turning a scalar target into a histogram
========================================

A label y becomes a distribution over bins. Three choices are available:
a truncated Gaussian around y, all mass on y's bin, or y's bin plus a thin
uniform floor.
"""

import numpy as np

from histloss.binning import Gaussian, OneBin, UniformMix, expected_value, make_bin_grid, project

grid = make_bin_grid(0.0, 10.0, 10)
y = 4.3

for target in (Gaussian(sigma=grid.width), Gaussian(sigma=0.25 * grid.width), OneBin(), UniformMix(eps=0.02)):
    p = project(grid, y, target)
    print(f"{target!r:32} mean={expected_value(grid, p):.3f}")
    print("   ", np.array2string(p, precision=3, suppress_small=True))

# a narrow Gaussian collapses onto the containing bin
narrow = project(grid, y, Gaussian(1e-6 * grid.width))
print("max gap to one-hot at sigma=1e-6 width:", np.max(np.abs(narrow - project(grid, y, OneBin()))))
