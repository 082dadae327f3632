"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import InputDomainError

N_JOINTS = 3


def check_finite(x, name="input"):
    """Return ``x`` as a float array, raising if any entry is not finite."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputDomainError(f"{name} contains non-finite values")
    return arr


def check_joint_vector(x, name="vector", allow_batch=True):
    """Validate a joint-space vector (or a batch of them, last axis = joints).

    Complex input is passed through untouched so that complex-step
    differentiation can flow through the model functions.
    """
    if np.iscomplexobj(x):
        arr = np.asarray(x)
    else:
        arr = check_finite(x, name)
    if arr.ndim == 0 or arr.shape[-1] != N_JOINTS:
        raise InputDomainError(
            f"{name} must have {N_JOINTS} entries on its last axis, got shape {arr.shape}"
        )
    if not allow_batch and arr.ndim != 1:
        raise InputDomainError(f"{name} must be a single {N_JOINTS}-vector")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InputDomainError(f"{name} must be finite and > 0, got {value}")
    return value


def check_uniform_grid(t, name="t", rtol=1e-6):
    """Validate a strictly increasing, uniformly spaced time grid."""
    t = check_finite(t, name)
    if t.ndim != 1 or t.size < 2:
        raise InputDomainError(f"{name} must be a 1-D grid with at least 2 samples")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise InputDomainError(f"{name} must be strictly increasing")
    if np.ptp(dt) > rtol * max(abs(dt.mean()), 1e-300) + 1e-12:
        raise InputDomainError(f"{name} must be uniformly spaced")
    return t
