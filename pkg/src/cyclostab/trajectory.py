"""Container for time-stamped simulation output."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class Trajectory:
    """Time-stamped states; ``states[k]`` is an ``(n, N)`` field or a flat ODE state."""

    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.states):
            raise ValidationError("times and states must have matching length")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("time stamps must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]
