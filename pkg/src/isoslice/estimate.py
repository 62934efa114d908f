"""Monte Carlo result record."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Estimate:
    """A scalar estimate with its standard error.

    For Monte Carlo means ``std_error`` is the sample standard deviation over
    sqrt(n_samples); nonlinear statistics use a batch jackknife.  Grid-based
    quantities store a resolution error instead and set ``seed`` to None.
    """

    value: float
    std_error: float = 0.0
    n_samples: int = 0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "std_error", float(self.std_error))
        object.__setattr__(self, "n_samples", int(self.n_samples))
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")

    def __float__(self):
        return self.value

    def within(self, target, k=3.0, other_error=0.0):
        """True if ``target`` lies within k combined standard errors."""
        err = (self.std_error ** 2 + float(other_error) ** 2) ** 0.5
        return abs(self.value - float(target)) <= k * err

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "n": self.n_samples, "seed": self.seed}

    @classmethod
    def exact(cls, value):
        return cls(value, 0.0, 0, None)
