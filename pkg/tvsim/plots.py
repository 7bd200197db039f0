"""
Static SVG line charts rendered from a metrics CSV.

Four panels, each a self-contained file: train_loss.svg, test_losses.svg,
kq_projections.svg, v_projections.svg. Every series is one `<polyline>`
with a `data-series` attribute naming its CSV column; blank cells are
skipped. A CSV without rows still yields the axes.
"""
# tvsim/plots.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import quoteattr

from tvsim.train_log import read_metrics_csv

logger = logging.getLogger(__name__)

WIDTH = 640
HEIGHT = 360
PAD = 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Panel:
    filename: str
    title: str
    prefixes: tuple[str, ...]


PANELS = (
    Panel("train_loss.svg", "train cross-entropy", ("train_ce",)),
    Panel("test_losses.svg", "test 0-1 loss", ("test01_",)),
    Panel("kq_projections.svg", "key-query projections", ("aKQa_", "bKQb_")),
    Panel("v_projections.svg", "value projections", ("aVa_", "bVb_")),
)


def _columns_for(panel: Panel, header: list[str]) -> list[str]:
    return [c for c in header if any(c == p or c.startswith(p) for p in panel.prefixes) and c != "epoch"]


def _series(rows: list[dict[str, float | None]], column: str) -> list[tuple[float, float]]:
    pts = []
    for row in rows:
        x, y = row.get("epoch"), row.get(column)
        if x is not None and y is not None:
            pts.append((float(x), float(y)))
    return pts


def _span(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if hi == lo:
        return lo - 0.5, hi + 0.5
    return lo, hi


def render_panel(panel: Panel, header: list[str], rows: list[dict[str, float | None]]) -> str:
    columns = _columns_for(panel, header)
    data = {c: _series(rows, c) for c in columns}
    x_lo, x_hi = _span([x for pts in data.values() for x, _ in pts])
    y_lo, y_hi = _span([y for pts in data.values() for _, y in pts])

    def sx(x: float) -> float:
        return PAD + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * PAD)

    def sy(y: float) -> float:
        return HEIGHT - PAD - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" font-size="14" text-anchor="middle">{panel.title}</text>',
        f'<line class="axis" x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line class="axis" x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 16}" font-size="10">{x_lo:g}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 16}" font-size="10" text-anchor="end">{x_hi:g}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" font-size="10" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" font-size="10" text-anchor="end">{y_hi:.3g}</text>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 8}" font-size="11" text-anchor="middle">epoch</text>',
    ]
    for i, (column, pts) in enumerate(data.items()):
        if not pts:
            continue
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline data-series={quoteattr(column)} points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{WIDTH - PAD + 4}" y="{PAD + 12 * i}" font-size="9" fill="{color}">{column}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(metrics_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Writes the four panels; raises ValueError when the CSV is malformed."""
    header, rows = read_metrics_csv(metrics_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for panel in PANELS:
        path = out / panel.filename
        path.write_text(render_panel(panel, header, rows), encoding="utf-8")
        written.append(path)
    logger.info("wrote %d plots to %s (%d rows)", len(written), out, len(rows))
    return written
