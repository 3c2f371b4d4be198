"""Named run settings for the CT Position experiments.

``desk`` fits a desktop budget: a 10000/2500 subsample of the 80/20 split and
150 epochs. ``full`` uses every row and 1000 epochs.
"""

from __future__ import annotations

from .training import RunConfig

CT_SUPPORT = (0.0, 100.0)

PRESETS = {
    "desk": {
        "hidden_dims": (192, 192, 192, 192),
        "epochs": 150,
        "bins": 100,
        "support": CT_SUPPORT,
        "n_train": 10_000,
        "n_test": 2_500,
    },
    "full": {
        "hidden_dims": (192, 192, 192, 192),
        "epochs": 1000,
        "bins": 100,
        "support": CT_SUPPORT,
        "n_train": None,
        "n_test": None,
    },
}

# seeds used for the multi-seed comparisons
DESK_SEEDS = (0, 1, 2, 3, 4)


def preset_config(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig(**{**PRESETS[name], **overrides})
