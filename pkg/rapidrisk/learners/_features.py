from __future__ import annotations

from typing import Any, Dict, List, Sequence

import numpy as np

from .. import _terms as terms
from ..dataset import Dataset, SchemaMismatch
from ..dtypes import Categorical, ColumnKind, Continuous


class FeatureSpace:
    """
    Encodes the quasi-identifier columns of a Dataset as a float matrix, with
    every constant needed to do so again at prediction time.

    Categorical columns become level codes. A missing categorical value gets the
    extra code len(levels), so it behaves like one more level; a label the
    training data never had gets code -1, which trees route to their larger
    child and the one-hot design leaves all-zero. Continuous columns are
    median-imputed with training medians.
    """

    def __init__(
        self,
        qi: Sequence[str],
        kinds: Sequence[ColumnKind],
        medians: Sequence[float],
        means: Sequence[float],
        scales: Sequence[float],
    ) -> None:
        self.qi: List[str] = list(qi)
        self.kinds: List[ColumnKind] = list(kinds)
        self.medians = np.asarray(medians, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.scales = np.asarray(scales, dtype=np.float64)

    @classmethod
    def fit(cls, data: Dataset, qi: Sequence[str]) -> FeatureSpace:
        kinds = [data.kind(name) for name in qi]
        medians, means, scales = [], [], []
        for name, kind in zip(qi, kinds):
            if kind.is_categorical:
                medians.append(0.0)
                means.append(0.0)
                scales.append(1.0)
                continue
            vec = data.column(name)
            present = vec[~np.isnan(vec)]
            med = float(np.median(present)) if len(present) else 0.0
            filled = np.where(np.isnan(vec), med, vec)
            sd = float(np.std(filled)) if len(filled) else 0.0
            medians.append(med)
            means.append(float(np.mean(filled)) if len(filled) else 0.0)
            scales.append(sd if sd > 0 else 1.0)
        return cls(qi, kinds, medians, means, scales)

    @property
    def n_features(self) -> int:
        return len(self.qi)

    @property
    def is_categorical(self) -> np.ndarray:
        return np.array([k.is_categorical for k in self.kinds], dtype=bool)

    @property
    def n_codes(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: Number of codes per feature (levels plus the missing
            code) for categorical features, 0 for continuous ones.

        """
        return np.array(
            [len(k) + 1 if isinstance(k, Categorical) else 0 for k in self.kinds],
            dtype=np.int64,
        )

    def raw(self, data: Dataset) -> np.ndarray:
        """
        Args:
            data (Dataset): Rows holding every quasi-identifier column.

        Returns:
            np.ndarray: n x p float matrix of level codes and imputed reals.

        Raises:
            SchemaMismatch: If a column is absent or changed kind.

        """
        out = np.empty((data.n, self.n_features), dtype=np.float64)
        for j, (name, kind) in enumerate(zip(self.qi, self.kinds)):
            if name not in data.schema:
                raise SchemaMismatch(f"Rows lack the quasi-identifier column {name!r}.")
            theirs = data.kind(name)
            if theirs.is_categorical != kind.is_categorical:
                raise SchemaMismatch(
                    f"Column {name!r} is {theirs} here but was {kind} at training time."
                )
            vec = data.column(name)
            if isinstance(kind, Categorical):
                assert isinstance(theirs, Categorical)
                if theirs == kind:
                    remap = np.arange(len(kind))
                else:
                    remap = np.array(
                        [kind.levels.index(lv) if lv in kind.levels else -1 for lv in theirs.levels]
                    )
                codes = np.where(vec < 0, len(kind), remap[np.clip(vec, 0, None)])
                out[:, j] = codes
            else:
                out[:, j] = np.where(np.isnan(vec), self.medians[j], vec)
        return out

    def design(self, data: Dataset) -> np.ndarray:
        """
        Returns:
            np.ndarray: The one-hot / z-scored design matrix, without intercept.

        """
        raw = self.raw(data)
        blocks = []
        for j, kind in enumerate(self.kinds):
            if isinstance(kind, Categorical):
                codes = raw[:, j].astype(np.int64)
                block = np.zeros((data.n, len(kind) + 1))
                seen = codes >= 0
                block[np.flatnonzero(seen), codes[seen]] = 1.0
                blocks.append(block)
            else:
                blocks.append(((raw[:, j] - self.means[j]) / self.scales[j])[:, None])
        if not blocks:
            return np.zeros((data.n, 0))
        return np.hstack(blocks)

    def design_names(self) -> List[str]:
        names: List[str] = []
        for name, kind in zip(self.qi, self.kinds):
            if isinstance(kind, Categorical):
                names.extend(f"{name}={lv}" for lv in (*kind.levels, "<missing>"))
            else:
                names.append(name)
        return names

    def to_dict(self) -> Dict[str, Any]:
        return {
            "qi": self.qi,
            "kinds": [k.to_dict() for k in self.kinds],
            "medians": self.medians.tolist(),
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> FeatureSpace:
        return cls(
            raw["qi"],
            [kind_from_dict(k) for k in raw["kinds"]],
            raw["medians"],
            raw["means"],
            raw["scales"],
        )


def kind_from_dict(raw: Dict[str, Any]) -> ColumnKind:
    if raw[terms.KIND] == terms.CATEGORICAL:
        return Categorical(raw[terms.LEVELS])
    return Continuous()
