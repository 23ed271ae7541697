"""Bundled experiment presets.

Each preset names an operator (as JSON), a datum, an optional source and
oracle, and default numerical parameters.  ``kinds`` holds per-experiment
overrides of those defaults.  :func:`preset_config` turns a preset into an
:class:`~schauder_lab.experiments.ExperimentConfig`.
"""

from __future__ import annotations

import copy

HEAT_1D = {"family": "affine", "N": 1, "T": 1.0, "Q": 1.0, "name": "heat-1d"}
OU_1D = {"family": "affine", "N": 1, "T": 1.0, "Q": 1.0, "B": -1.0, "name": "ou-1d"}

#: Datum scale of the rough step used by the smoothing study (twice the mesh width).
SMOOTHING_H = 1.0 / 1024
SMOOTHING_PAIRS = (
    {"alpha": 0.0, "beta": 1.0, "datum": {"name": "tanh_step", "scale": 2 * SMOOTHING_H}},
    {"alpha": 0.0, "beta": 2.0, "datum": {"name": "tanh_step", "scale": 2 * SMOOTHING_H}},
    {"alpha": 1.0, "beta": 2.0, "datum": {"name": "abs_gaussian"}},
    {"alpha": 0.0, "beta": 3.0, "datum": {"name": "tanh_step", "scale": 2 * SMOOTHING_H},
     "tol": 0.25},
)
SMOOTHING_NUMERICS = {
    "h": SMOOTHING_H, "tau": 2e-6, "radii": (4.0, 8.0),
    "time_ladder": tuple(2.0 ** -k for k in range(7, 15)), "pairs": SMOOTHING_PAIRS,
}

TWO_STAGE_T = 5.0
TWO_STAGE_WIDTH = 6.0
TWO_STAGE_Q = {"profile": "piecewise_constant", "jumps": [TWO_STAGE_T / 2], "values": [1.0, 2.0]}

PRESETS = {
    "heat-1d": {
        "description": "u_t = u_xx on the line",
        "operator": HEAT_1D,
        "datum": {"name": "gaussian", "width": 1.0},
        "oracle": {"name": "heat_gaussian", "width": 1.0},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (4.0, 8.0, 16.0)},
        "kinds": {"smoothing": SMOOTHING_NUMERICS},
    },
    "ou-1d": {
        "description": "Ornstein-Uhlenbeck operator u_xx - x u_x",
        "operator": OU_1D,
        "datum": {"name": "gaussian", "width": 1.0},
        "oracle": {"name": "ou_gaussian", "width": 1.0},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (4.0, 8.0, 16.0)},
        "kinds": {},
    },
    "heat-forced": {
        "description": "heat equation forced by sin(x) exp(-t)",
        "operator": HEAT_1D,
        "datum": {"name": "gaussian", "width": 1.0},
        "source": {"name": "sin_decay"},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (8.0, 16.0, 32.0),
                     "quad_step": 0.05},
        "kinds": {},
    },
    "ou-forced": {
        "description": "Ornstein-Uhlenbeck operator forced by cos(x)(1+t)",
        "operator": OU_1D,
        "datum": {"name": "gaussian", "width": 1.0},
        "source": {"name": "cos_linear"},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (8.0, 16.0, 32.0),
                     "quad_step": 0.05},
        "kinds": {},
    },
    "sect4-example-continuous": {
        "description": "polynomial-weight example p=1, q=2, r=1 with constant b0=-1, c0=1/2",
        "operator": {"family": "poly_example", "N": 1, "T": 1.0, "p": 1, "q": 2, "r": 1,
                     "Q0": 1.0, "b0": -1.0, "c0": 0.5, "regime": "continuous"},
        "datum": {"name": "gaussian", "width": 1.0},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (4.0, 8.0, 16.0)},
        "kinds": {},
    },
    "sect4-example-measurable": {
        "description": "polynomial-weight example with b0 and the Q0 scale jumping at t=1/2",
        "operator": {"family": "poly_example", "N": 1, "T": 1.0, "p": 1, "q": 2, "r": 1,
                     "Q0": {"matrix": [[1.0]],
                            "scale": {"profile": "piecewise_constant", "jumps": [0.5],
                                      "values": [1.0, 1.5]}},
                     "b0": {"profile": "piecewise_constant", "jumps": [0.5],
                            "values": [-1.0, -2.0]},
                     "c0": 0.5, "regime": "measurable"},
        "datum": {"name": "gaussian", "width": 1.0},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (4.0, 8.0, 16.0),
                     "n_ladder": (4.0, 16.0, 64.0, 256.0)},
        "kinds": {},
    },
    "sect4-example-mutant": {
        "description": "negative control: diffusion weight p=2 exceeds drift weight q=1",
        "operator": {"family": "poly_example", "N": 1, "T": 1.0, "p": 2, "q": 1, "r": 0,
                     "Q0": 2.0, "b0": -1.0, "c0": 0.0, "validate": False},
        "datum": {"name": "gaussian", "width": 1.0},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (4.0, 8.0, 16.0)},
        "kinds": {},
    },
    "two-stage-heat": {
        "description": "heat equation whose diffusivity doubles at t=T/2",
        "operator": {"family": "affine", "N": 1, "T": TWO_STAGE_T, "Q": 1.0,
                     "Q_profile": TWO_STAGE_Q, "name": "two-stage-heat"},
        "datum": {"name": "gaussian", "width": TWO_STAGE_WIDTH},
        "oracle": {"name": "heat_gaussian", "width": TWO_STAGE_WIDTH, "q_profile": TWO_STAGE_Q},
        "numerics": {"h": 1.0 / 32, "tau": 1e-3, "radii": (8.0, 16.0, 32.0, 64.0),
                     "n_ladder": (4.0, 16.0, 64.0, 256.0), "oracle_tol": 5e-3},
        "kinds": {},
    },
}


def preset_names():
    return sorted(PRESETS)


def preset_config(name: str, kind: str, **overrides):
    """Experiment config for preset ``name`` and experiment ``kind``.

    Keyword arguments override any field of the resulting config.
    """
    from .experiments import ExperimentConfig

    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")
    pre = PRESETS[name]
    fields = {"kind": kind, "operator": copy.deepcopy(pre["operator"]),
              "datum": copy.deepcopy(pre["datum"]), "source": copy.deepcopy(pre.get("source")),
              "oracle": copy.deepcopy(pre.get("oracle")), "preset": name}
    fields.update(copy.deepcopy(pre["numerics"]))
    fields.update(copy.deepcopy(pre["kinds"].get(kind, {})))
    fields.update(overrides)
    return ExperimentConfig.from_json(fields)
