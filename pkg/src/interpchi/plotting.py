"""PNG figures drawn from report rows (or from a report CSV on disk).

Rows with a ``t`` value become a curve of value against ``t`` per method, on a
log axis; the remaining rows become a bar chart of ``|value|`` against the
tolerance.  Usage from the shell: ``python -m interpchi.plotting report.csv out.png``.
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _float(s: str):
    return None if s == "" else float(s)


def _rows_from_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_rows(rows: list[dict], path: str | Path, title: str = "") -> Path:
    """Draw ``rows`` (dicts with the CSV columns) to ``path``."""
    curves: dict[str, list[tuple[float, float, float | None]]] = defaultdict(list)
    bars = []
    for r in rows:
        t, v, tol = _float(r["t"]), float(r["value"]), _float(r["tolerance"])
        if t is None:
            bars.append((r["method"], v, tol, r["pass"]))
        else:
            curves[r["method"]].append((t, v, tol))
    panels = int(bool(curves)) + int(bool(bars))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, max(panels, 1), figsize=(4.2 * max(panels, 1), 3.0), squeeze=False)
        axes = list(axes[0])
        if curves:
            ax = axes.pop(0)
            lo, hi = [], []
            for method, pts in sorted(curves.items()):
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, label=method)
                tol = max((p[2] or 0.0) for p in pts)
                mid = round(pts[-1][1])
                lo.append(min(min(p[1] for p in pts), mid - tol))
                hi.append(max(max(p[1] for p in pts), mid + tol))
                if tol:
                    ax.axhspan(mid - tol, mid + tol, color="0.9", zorder=0)
            pad = 0.1 * (max(hi) - min(lo)) or 0.5
            ax.set_ylim(min(lo) - pad, max(hi) + pad)
            ax.ticklabel_format(axis="y", useOffset=False)
            ax.set_xscale("log")
            ax.set_xlabel("t")
            ax.set_ylabel("value")
            ax.legend(frameon=False)
        if bars:
            ax = axes.pop(0)
            names = [b[0] for b in bars]
            vals = [max(abs(b[1]), 1e-300) for b in bars]
            colors = ["tab:red" if b[3] == "false" else "tab:blue" for b in bars]
            y = range(len(bars))
            ax.barh(y, vals, color=colors)
            tols = [(i, b[2]) for i, b in enumerate(bars) if b[2]]
            if tols:
                ax.plot([t for _, t in tols], [i for i, _ in tols], "k|", ms=10, label="tolerance")
                ax.legend(frameon=False)
            ax.set_yticks(list(y), names)
            scale = vals + [t for _, t in tols]
            if max(scale) / min(scale) > 1e3:
                ax.set_xscale("log")
            ax.set_xlabel("|value|")
        if title:
            fig.suptitle(title)
        path = Path(path)
        # no software/version stamp, so identical reports give identical PNG bytes
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def plot_report(report, path: str | Path) -> Path:
    rows = [c.as_row() for c in report.checks]
    return plot_rows(rows, path, report.command)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m interpchi.plotting REPORT.csv OUT.png", file=sys.stderr)
        return 2
    plot_rows(_rows_from_csv(argv[0]), argv[1], Path(argv[0]).stem)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
