"""
Base Results Class

Per-epoch training history: one row per epoch, written as CSV and summarised
into KPIs for run manifests.
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd


class BaseResults:
    """
    Collects per-epoch rows of a training run.

    The column order is fixed by `columns`; extra diagnostic keys are logged
    but not written to the CSV.
    """

    def __init__(self, columns: List[str]):
        """
        Initialize the results handler.

        Args:
            columns: CSV columns, in order
        """
        self.columns = list(columns)
        self.rows: List[Dict[str, Any]] = []
        self.metadata = {
            'created_at': datetime.now().isoformat(),
            'status': 'running'
        }

    def add_row(self, row: Dict[str, Any]) -> None:
        self.rows.append({column: row.get(column) for column in self.columns})

    def set_status(self, status: str) -> None:
        self.metadata['status'] = status
        self.metadata['updated_at'] = datetime.now().isoformat()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def calculate_kpis(self) -> Dict[str, Any]:
        """
        Summary values: final and best loss per loss column, epochs run, total wall time.
        """
        frame = self.to_frame()
        kpis: Dict[str, Any] = {'epochs': len(frame), 'status': self.metadata['status']}
        if frame.empty:
            return kpis
        for column in self.columns:
            if column in ('epoch', 'wall_ms'):
                continue
            values = pd.to_numeric(frame[column], errors='coerce')
            if values.notna().any():
                kpis[f'final_{column}'] = float(values.iloc[-1])
                kpis[f'min_{column}'] = float(np.nanmin(values))
        if 'wall_ms' in frame:
            kpis['total_wall_ms'] = float(frame['wall_ms'].sum())
        return kpis
