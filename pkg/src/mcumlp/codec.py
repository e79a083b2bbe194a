"""Affine map between physical targets and the sigmoid output band."""

from dataclasses import dataclass

import numpy as np

from .errors import CodecError
from .matrix import DTYPE

OUT_LO = 0.1
OUT_HI = 0.9


@dataclass(frozen=True)
class TargetCodec:
    """Maps ``[t_min, t_max]`` onto ``[out_lo, out_hi]`` and back."""

    t_min: float
    t_max: float
    out_lo: float = OUT_LO
    out_hi: float = OUT_HI

    def __post_init__(self):
        if not self.out_lo < self.out_hi:
            raise CodecError(f"output band [{self.out_lo}, {self.out_hi}] is empty")
        if not self.t_min < self.t_max:
            raise CodecError(f"degenerate target range [{self.t_min}, {self.t_max}]")

    @classmethod
    def fit(cls, targets, out_lo=OUT_LO, out_hi=OUT_HI):
        targets = np.asarray(targets, dtype=np.float64)
        return cls(float(targets.min()), float(targets.max()), out_lo, out_hi)

    @property
    def _scale(self):
        return (self.out_hi - self.out_lo) / (self.t_max - self.t_min)

    def encode(self, targets):
        t = np.asarray(targets, dtype=np.float64)
        return (self.out_lo + (t - self.t_min) * self._scale).astype(DTYPE)

    def decode(self, outputs):
        y = np.asarray(outputs, dtype=np.float64)
        return self.t_min + (y - self.out_lo) / self._scale
