"""Min-max normalization fitted on training rows only.

One set of per-column (min, max) pairs is fitted over the training rows of
every household together, so in particular the energy column is scaled
identically for all households and model parameters remain comparable and
averageable across clients.  Constant columns (min == max) are mapped to
0.0 and reported, since they carry no information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .features import DesignMatrix


@dataclass(frozen=True)
class NormalizationParams:
    columns: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if len(self.mins) != len(self.columns) or len(self.maxs) != len(self.columns):
            raise ValidationError("mins/maxs must align with columns")
        if np.any(self.maxs < self.mins):
            raise ValidationError("max must be >= min per column")

    @property
    def scales(self) -> np.ndarray:
        """1/(max-min) per column, 0.0 where the column is constant."""
        span = self.maxs - self.mins
        out = np.zeros_like(span)
        nonzero = span > 0
        out[nonzero] = 1.0 / span[nonzero]
        return out

    @property
    def degenerate(self) -> tuple:
        """Names of constant columns, which normalize to 0.0."""
        return tuple(c for c, lo, hi in zip(self.columns, self.mins, self.maxs)
                     if lo == hi)

    @property
    def energy_range(self) -> float:
        """max - min of the energy column; multiplies normalised errors back to kWh."""
        return float(self.maxs[0] - self.mins[0])

    def to_dict(self) -> dict:
        return {"columns": list(self.columns),
                "mins": [float(v) for v in self.mins],
                "maxs": [float(v) for v in self.maxs]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(d["columns"]),
                   np.asarray(d["mins"], dtype=np.float64),
                   np.asarray(d["maxs"], dtype=np.float64))


def fit_normalizer(matrices, train_ends) -> NormalizationParams:
    """Fit per-column (min, max) over the training rows of all households.

    `train_ends[i]` is the exclusive end of the training split in
    `matrices[i]`; later rows are left out so nothing leaks from validation
    or test data into the scaling.
    """
    matrices = list(matrices)
    train_ends = list(train_ends)
    if not matrices or len(matrices) != len(train_ends):
        raise ValidationError("need one train_end per matrix")
    columns = matrices[0].columns
    segments = []
    for m, end in zip(matrices, train_ends):
        if m.columns != columns:
            raise ValidationError("all matrices must share the same columns")
        if not 0 < end <= len(m):
            raise ValidationError("train_end out of range")
        segments.append(m.values[:end])
    stacked = np.concatenate(segments, axis=0)
    return NormalizationParams(columns, stacked.min(axis=0), stacked.max(axis=0))


def normalize(matrix: DesignMatrix, params: NormalizationParams) -> DesignMatrix:
    """Map each column through (v - min) / (max - min); constants go to 0."""
    if matrix.columns != params.columns:
        raise ValidationError("matrix columns do not match the normalizer")
    values = (matrix.values - params.mins) * params.scales
    return DesignMatrix(columns=matrix.columns, values=values, hours=matrix.hours)


def denormalize_column(values, params: NormalizationParams, column: str):
    """Inverse map for one column; constant columns return their min."""
    if column not in params.columns:
        raise ValidationError(f"unknown column {column!r}")
    i = params.columns.index(column)
    span = params.maxs[i] - params.mins[i]
    return np.asarray(values, dtype=np.float64) * span + params.mins[i]
