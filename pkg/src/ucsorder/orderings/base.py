from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


class OrderingError(RuntimeError):
    """An ordering method could not produce a valid result."""


@dataclass(frozen=True, eq=False)
class Embedding1D:
    """Per-vertex real value from which an ordering is derived.

    ``info`` carries method diagnostics (eigenvalue and residual, KL trace,
    achieved perplexities, ...).
    """

    value: np.ndarray
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float)
        if not np.all(np.isfinite(value)):
            raise OrderingError("embedding contains non-finite values")
        value.setflags(write=False)
        object.__setattr__(self, "value", value)
