from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class TimeSeries:
    """Observation times (days) and values, optionally grouped into blocks."""

    times: np.ndarray
    values: np.ndarray
    block_ids: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DataError("times and values must be 1-d arrays of equal length")
        if self.block_ids is not None:
            self.block_ids = np.asarray(self.block_ids, dtype=np.int64)
            if self.block_ids.shape != self.times.shape:
                raise DataError("block_ids must match times")

    def __len__(self) -> int:
        return self.times.size

    def blocks(self) -> np.ndarray:
        if self.block_ids is None:
            return np.zeros(self.times.size, dtype=np.int64)
        return self.block_ids

    def block_starts(self) -> np.ndarray:
        """Boolean mask of the first observation of each block."""
        b = self.blocks()
        first = np.ones(b.size, dtype=bool)
        first[1:] = b[1:] != b[:-1]
        return first
