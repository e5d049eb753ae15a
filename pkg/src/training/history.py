"""
Per-term training metric history and its plot.
"""

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


@dataclass
class MetricHistory:
    """Line-delimited records {epoch, step, term, value}, optionally mirrored to a file."""
    path: Optional[Path] = None
    records: List[Dict] = field(default_factory=list)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def log(self, epoch: int, term: str, value: float, step: Optional[int] = None) -> None:
        record = {"epoch": epoch, "step": step, "term": term, "value": float(value)}
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")

    def series(self, term: str, epoch_level: bool = True) -> List[Dict]:
        return [r for r in self.records
                if r["term"] == term and (r["step"] is None) == epoch_level]

    def terms(self) -> List[str]:
        return sorted({r["term"] for r in self.records})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MetricHistory":
        records = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines()
                   if line.strip()]
        return cls(path=None, records=records)


def plot_history(history: MetricHistory, output: Union[str, Path]) -> Path:
    """One panel per epoch-level term."""
    by_term = defaultdict(list)
    for r in history.records:
        if r["step"] is None:
            by_term[r["term"]].append((r["epoch"], r["value"]))

    terms = sorted(by_term)
    fig, axes = plt.subplots(len(terms) or 1, 1, figsize=(8, 2.2 * max(len(terms), 1)), squeeze=False)
    for ax, term in zip(axes[:, 0], terms):
        epochs, values = zip(*by_term[term])
        ax.plot(epochs, values, linewidth=1.2)
        ax.set_ylabel(term)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("epoch")
    fig.tight_layout()

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=100)
    plt.close(fig)
    return output
