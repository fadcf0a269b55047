"""Observation matrices and CSV ingestion."""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataLoadError, InvalidData
from .log import get_logger

logger = get_logger(__name__)

LABEL_COLUMN = 'label'


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """n x p matrix of finite observations with optional column names."""

    values: np.ndarray
    col_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidData(f"expected a non-empty n x p matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidData("data contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        if self.col_names is not None:
            names = tuple(str(c) for c in self.col_names)
            if len(names) != values.shape[1]:
                raise InvalidData(f"{len(names)} column names for {values.shape[1]} columns")
            object.__setattr__(self, 'col_names', names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> List[str]:
        if self.col_names is not None:
            return list(self.col_names)
        return [f"V{j + 1}" for j in range(self.p)]

    def columns(self, idx: Iterable[int]) -> np.ndarray:
        """Columns ``idx`` (0-based, sorted) as an n x |idx| array."""
        return self.values[:, sorted(idx)]

    def subset(self, idx: Iterable[int]) -> "DataMatrix":
        idx = sorted(idx)
        names = tuple(self.names[j] for j in idx)
        return DataMatrix(self.values[:, idx], names)

    def permute_columns(self, rng: np.random.Generator) -> "DataMatrix":
        """Copy with every column permuted independently (gap-statistic reference)."""
        values = np.column_stack([rng.permutation(col) for col in self.values.T])
        return DataMatrix(values, self.col_names)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=self.names)


def load_csv(path: Union[str, Path], label_column: str = LABEL_COLUMN) -> Tuple[DataMatrix, Optional[np.ndarray]]:
    """Read a comma-separated file with a header row.

    A column named ``label_column`` is returned separately and excluded from
    the data matrix. Every other cell must parse as a finite number.
    """
    path = Path(path)
    if not path.is_file():
        raise DataLoadError(f"file '{path}' not found")
    try:
        frame = pd.read_csv(path, sep=',', decimal='.', encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataLoadError(f"cannot parse '{path}': {e}") from e

    labels = None
    if label_column in frame.columns:
        labels = pd.factorize(frame.pop(label_column), sort=True)[0]
        if np.any(labels < 0):
            raise DataLoadError(f"missing values in column '{label_column}'")

    if frame.shape[1] == 0:
        raise DataLoadError(f"'{path}' has no data column")
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    missing = numeric.isna().any(axis=0)
    if missing.any():
        col = numeric.columns[missing.to_numpy()][0]
        raise DataLoadError(f"non-numeric or missing cell in column '{col}' of '{path}'")
    try:
        data = DataMatrix(numeric.to_numpy(dtype=float), tuple(numeric.columns))
    except InvalidData as e:
        raise DataLoadError(str(e)) from e
    logger.info(f"loaded {data.n} x {data.p} matrix from {path}")
    return data, labels


def save_csv(data: DataMatrix, path: Union[str, Path], labels: Optional[Sequence[int]] = None,
             label_column: str = LABEL_COLUMN) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = data.to_frame()
    if labels is not None:
        frame[label_column] = np.asarray(labels, dtype=int)
    frame.to_csv(path, index=False, float_format='%.10g')
    return path
