"""Noise-channel kernel shared by the mean-field solver, AMP, and theory.

The two Gaussian channels enter every large-N formula only through

    Q(x) = x**2 / (2*delta2) + x**3 / (3*delta3)

and its first two derivatives.  An infinite variance switches the
corresponding channel off (its coupling 1/delta is zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError


@dataclass(frozen=True)
class KernelQ:
    delta2: float
    delta3: float

    def __post_init__(self):
        if not self.delta2 > 0:
            raise ParameterError(f"delta2 must be positive, got {self.delta2}")
        if not self.delta3 > 0:
            raise ParameterError(f"delta3 must be positive, got {self.delta3}")

    @property
    def a2(self) -> float:
        """Matrix-channel coupling 1/delta2 (0 when the channel is off)."""
        return 0.0 if math.isinf(self.delta2) else 1.0 / self.delta2

    @property
    def a3(self) -> float:
        """Tensor-channel coupling 1/delta3 (0 when the channel is off)."""
        return 0.0 if math.isinf(self.delta3) else 1.0 / self.delta3

    def q(self, x):
        return 0.5 * self.a2 * x * x + self.a3 * x * x * x / 3.0

    def qp(self, x):
        return self.a2 * x + self.a3 * x * x

    def qpp(self, x):
        return self.a2 + 2.0 * self.a3 * x
