"""
Report rendering: a results table in the usual text-motion retrieval layout
and a machine-readable record file.
"""

import json
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from .protocols import ProtocolResult
from .retrieval_metrics import RECALL_KS, EvalReport


def _direction_columns(prefix: str, report: EvalReport) -> Dict[str, float]:
    row = {f"{prefix} MedR": report.medr}
    row.update({f"{prefix} R@{k}": report.recalls[k] for k in RECALL_KS})
    return row


def results_frame(results: Sequence[ProtocolResult]) -> pd.DataFrame:
    """One row per protocol: t2m MedR, R@k | m2t MedR, R@k | Rsum | m2m mAP, nDCG."""
    rows = []
    for r in results:
        row = {"protocol": r.protocol}
        row.update(_direction_columns("t2m", r.t2m))
        row.update(_direction_columns("m2t", r.m2t))
        row["Rsum"] = r.rsum
        if r.m2m is not None:
            row["m2m mAP"] = r.m2m.map
            row["m2m nDCG"] = r.m2m.ndcg
        rows.append(row)
    return pd.DataFrame(rows).set_index("protocol")


def render_table(results: Sequence[ProtocolResult], precision: int = 2) -> str:
    frame = results_frame(results)
    return frame.to_string(float_format=lambda v: f"{v:.{precision}f}", na_rep="-")


def result_records(results: Sequence[ProtocolResult]) -> List[Dict]:
    records = []
    for r in results:
        for report in (r.t2m, r.m2t, r.m2m):
            if report is None:
                continue
            record = {
                "protocol": r.protocol,
                "direction": report.direction,
                "n_queries": report.n_queries,
            }
            if report.recalls:
                record.update({f"R@{k}": report.recalls[k] for k in RECALL_KS})
                record.update({"MedR": report.medr, "MeanR": report.meanr})
            if report.map is not None:
                record.update({"mAP": report.map, "nDCG": report.ndcg})
            record["Rsum"] = r.rsum
            records.append(record)
    return records


def write_records(path: Union[str, Path], results: Sequence[ProtocolResult]) -> Path:
    """JSON lines, one record per (protocol, direction)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in result_records(results):
            f.write(json.dumps(record) + "\n")
    return path
