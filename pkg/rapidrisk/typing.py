from typing import Callable, Sequence, Union

import numpy as np

from .dataset import Dataset

Grid = Union[Sequence[float], np.ndarray]
"""A sequence of thresholds (tau or epsilon values)."""

Synthesizer = Callable[[Dataset, int], Dataset]
"""A synthesizer: (training data, seed) -> one released dataset with the same schema."""
