"""Named model configurations used by the command line and the test-suite."""
import copy

from .model import ModelParams, params_from_dict

_TRUNC_STABLE_2D = {"variant": "truncated", "radius": 5.0,
                    "inner": {"variant": "coordinate_stable", "theta": [0.6, 0.6],
                              "weight": [0.5, 0.5]}}

PRESETS = {
    # two coupled coordinates with different stability indices
    "reference2d": {"m": 2, "b": [0.5, 0.5], "beta": [[-1.0, 0.2], [0.3, -1.5]],
                    "sigma": [1.0, 1.0], "alpha": [1.3, 1.7], "levy": _TRUNC_STABLE_2D},
    # same drift with equal indices (used by the Euler rate experiment)
    "reference2d-equal": {"m": 2, "b": [0.5, 0.5], "beta": [[-1.0, 0.2], [0.3, -1.5]],
                          "sigma": [1.0, 1.0], "alpha": [1.5, 1.5],
                          "levy": _TRUNC_STABLE_2D},
    # no drift immigration; all mass near 0 comes from the subordinator
    "boundary2d": {"m": 2, "b": [0.0, 0.0], "beta": [[-1.0, 0.2], [0.3, -1.5]],
                   "sigma": [1.0, 1.0], "alpha": [1.5, 1.5],
                   "levy": {"variant": "coordinate_stable", "theta": [0.7, 0.7],
                            "weight": [0.5, 0.5]}},
    "reference1d": {"m": 1, "b": [0.5], "beta": [[-1.0]], "sigma": [1.0], "alpha": [1.5],
                    "levy": {"variant": "truncated", "radius": 5.0,
                             "inner": {"variant": "coordinate_stable", "theta": [0.6],
                                       "weight": [0.5]}}},
    # no jumps, no immigration: the Riccati equation has a closed form
    "pure1d": {"m": 1, "b": [0.0], "beta": [[-1.0]], "sigma": [1.0], "alpha": [1.5],
               "levy": {"variant": "zero"}},
}


def preset_dict(name):
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        from .errors import ValidationError
        raise ValidationError(f"unknown model preset {name!r}; "
                              f"choose from {sorted(PRESETS)}") from None


def preset(name) -> ModelParams:
    return params_from_dict(preset_dict(name))
