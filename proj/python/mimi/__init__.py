"""Python bindings for low-rank plus sparse main-effects imputation of mixed data."""

import json

try:
    from . import _mimi
except ImportError:
    import _mimi

Error = _mimi.Error
SolverError = _mimi.SolverError
Frame = _mimi.Frame

__all__ = ["Error", "SolverError", "Frame", "frame", "read_csv", "lambda_anchors", "fit",
           "impute", "simulate"]


def _dump(obj):
    if obj is None:
        return ""
    return obj if isinstance(obj, str) else json.dumps(obj)


def frame(values, mask, names, types):
    """Frame from a float array, a 0/1 mask and per-column names and types."""
    import numpy as np

    return _mimi.frame_from_arrays(np.asarray(values, dtype=float),
                                   np.asarray(mask, dtype=np.uint8), list(names), list(types))


def read_csv(text, schema=None):
    return _mimi.read_csv(text, _dump(schema))


def lambda_anchors(df, dictionary=None):
    return _mimi.lambda_anchors(df, _dump(dictionary or {"type": "none"}))


def fit(df, dictionary=None, lambda1=0.0, lambda2=0.0, **config):
    config.update(lambda1=lambda1, lambda2=lambda2)
    out = _mimi.fit(df, _dump(dictionary or {"type": "none"}), _dump(config))
    out["report"] = json.loads(out["report"])
    return out


def impute(df, dictionary=None, lambda1=0.0, lambda2=0.0, round_binary=False, **config):
    config.update(lambda1=lambda1, lambda2=lambda2)
    return _mimi.impute(df, _dump(dictionary or {"type": "none"}), _dump(config), round_binary)


def simulate(**design):
    out = _mimi.simulate(_dump(design))
    out["dictionary"] = json.loads(out["dictionary"])
    return out
