"""Bias-corrected first/second-moment updates over the cloud arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from splatting.backward import GradientBundle
from splatting.scene import FIELD_NAMES, PER_GAUSSIAN_FIELDS, GaussianCloud, normalize_quaternions

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-15

TRAINABLE = FIELD_NAMES + ("global_light",)


def exponential_lr(lr_init: float, lr_final: float, step: int, max_steps: int) -> float:
    """Log-linear interpolation from lr_init at step 0 to lr_final at max_steps."""
    if max_steps <= 0:
        return lr_init
    t = min(max(step / max_steps, 0.0), 1.0)
    return math.exp(math.log(lr_init) * (1.0 - t) + math.log(lr_final) * t)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, cloud: GaussianCloud) -> "AdamState":
        shapes = {name: (len(cloud),) + tail for name, tail in PER_GAUSSIAN_FIELDS}
        shapes["global_light"] = (3,)
        return cls(
            m={name: np.zeros(shape) for name, shape in shapes.items()},
            v={name: np.zeros(shape) for name, shape in shapes.items()},
            step=0,
        )

    def remap(self, origin: np.ndarray, fresh: np.ndarray) -> "AdamState":
        """Moments for a densified cloud: row i copies origin[i], fresh rows start at zero."""
        keep = ~np.asarray(fresh, dtype=bool)
        m, v = {}, {}
        for name in FIELD_NAMES:
            m[name] = self.m[name][origin] * _row_mask(keep, self.m[name].ndim)
            v[name] = self.v[name][origin] * _row_mask(keep, self.v[name].ndim)
        m["global_light"] = self.m["global_light"].copy()
        v["global_light"] = self.v["global_light"].copy()
        return AdamState(m=m, v=v, step=self.step)

    def reset(self, name: str) -> None:
        self.m[name] = np.zeros_like(self.m[name])
        self.v[name] = np.zeros_like(self.v[name])


def _row_mask(keep: np.ndarray, ndim: int) -> np.ndarray:
    return keep.reshape((-1,) + (1,) * (ndim - 1)).astype(np.float64)


def step(
    cloud: GaussianCloud,
    grads: GradientBundle,
    state: AdamState,
    lrs: Mapping[str, float | np.ndarray],
) -> tuple[GaussianCloud, AdamState]:
    """One update of every trainable array, then the parameter projections.

    Quaternions are renormalized, visibility is clipped to [0, 1] and lights to >= 0.
    """
    grads.check_finite()
    t = state.step + 1
    bias1 = 1.0 - BETA1**t
    bias2 = 1.0 - BETA2**t
    new_m, new_v, updated = {}, {}, {}
    for name, g in grads.items():
        m = BETA1 * state.m[name] + (1.0 - BETA1) * g
        v = BETA2 * state.v[name] + (1.0 - BETA2) * g * g
        new_m[name], new_v[name] = m, v
        lr = lrs.get(name, 0.0)
        current = cloud.global_light if name == "global_light" else getattr(cloud, name)
        updated[name] = current - lr * (m / bias1) / (np.sqrt(v / bias2) + EPSILON)

    if len(cloud):
        updated["rotations"] = normalize_quaternions(updated["rotations"])
    updated["visibility"] = np.clip(updated["visibility"], 0.0, 1.0)
    updated["local_light"] = np.maximum(updated["local_light"], 0.0)
    updated["global_light"] = np.maximum(updated["global_light"], 0.0)
    return cloud.replace_arrays(**updated), AdamState(m=new_m, v=new_v, step=t)
