"""
Plot data export: accuracy per round, one column per method.
"""

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from app.harness.archive import MetricsArchive
from app.harness.presets import method_sort_key


def accuracy_table(archives: Sequence[MetricsArchive]) -> Dict[str, List[Optional[float]]]:
    """
    Per-round accuracy of each method, averaged over its archives (seeds).

    Rounds a method never reached are None.
    """
    grouped: Dict[str, List[List[float]]] = defaultdict(list)
    for archive in archives:
        grouped[archive.config.preset].append(archive.accuracies)

    length = max((len(acc) for runs in grouped.values() for acc in runs), default=0)
    table: Dict[str, List[Optional[float]]] = {}
    for method in sorted(grouped, key=method_sort_key):
        column: List[Optional[float]] = []
        for index in range(length):
            values = [acc[index] for acc in grouped[method] if index < len(acc)]
            column.append(float(np.mean(values)) if values else None)
        table[method] = column
    return table


def export_plot_csv(archives: Sequence[MetricsArchive], path: Optional[Union[str, Path]] = None) -> str:
    """
    Render the accuracy table as CSV with header round,<methods>.

    Args:
        archives: Runs to include
        path: Also write the CSV here when given

    Returns:
        The CSV text
    """
    table = accuracy_table(archives)
    methods = list(table)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["round", *methods])
    length = max((len(column) for column in table.values()), default=0)
    for index in range(length):
        row = [index + 1]
        for method in methods:
            value = table[method][index]
            row.append("" if value is None else f"{value:.6f}")
        writer.writerow(row)

    text = buffer.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text
