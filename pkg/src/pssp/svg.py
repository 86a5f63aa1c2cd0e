"""Self-contained SVG chart writers (no rendering dependency).

Charts are deliberately simple: one bar chart, one multi-series line chart,
and a small square heatmap, each a single well-formed SVG document.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def _text(x: float, y: float, s: str, anchor: str = "start", size: int = 11) -> str:
    return f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}">{escape(str(s))}</text>'


def _rebin(pairs: list[tuple], max_bars: int) -> list[tuple]:
    """Aggregate integer-keyed pairs into at most max_bars ranges."""
    keys = [int(k) for k, _ in pairs]
    lo, hi = min(keys), max(keys)
    span = hi - lo + 1
    width = -(-span // max_bars)
    bins: dict[int, int] = {}
    for k, count in pairs:
        b = (int(k) - lo) // width
        bins[b] = bins.get(b, 0) + count
    return [
        (f"{lo + b * width}-{lo + (b + 1) * width - 1}", bins[b]) for b in sorted(bins)
    ]


def bar_chart(pairs: list[tuple], title: str, path: str | Path, max_bars: int = 60) -> None:
    """Vertical bar chart of (label, count) pairs."""
    if len(pairs) > max_bars:
        pairs = _rebin(pairs, max_bars)
    width, height = 720, 360
    left, right, top, bottom = 60, 10, 30, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    peak = max((c for _, c in pairs), default=1) or 1
    bw = plot_w / max(len(pairs), 1)
    body = [_text(width / 2, 18, title, anchor="middle", size=13)]
    for i, (label, count) in enumerate(pairs):
        h = plot_h * count / peak
        x = left + i * bw
        y = top + plot_h - h
        body.append(
            f'<rect x="{x + 1:.1f}" y="{y:.1f}" width="{max(bw - 2, 1):.1f}" '
            f'height="{h:.1f}" fill="#4878a8"/>'
        )
        if len(pairs) <= 30:
            body.append(_text(x + bw / 2, height - bottom + 14, label, anchor="middle"))
        elif i % max(len(pairs) // 12, 1) == 0:
            body.append(_text(x + bw / 2, height - bottom + 14, label, anchor="middle", size=9))
    body.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{width - right}" y2="{top + plot_h}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>')
    body.append(_text(left - 5, top + 10, str(peak), anchor="end"))
    body.append(_text(left - 5, top + plot_h, "0", anchor="end"))
    Path(path).write_text(_doc(width, height, body), encoding="utf-8")


_LINE_COLORS = ["#4878a8", "#c05050", "#50a060", "#a070c0"]


def line_chart(
    x: list, series: dict[str, list[float]], title: str, path: str | Path, ylabel: str = ""
) -> None:
    """Multi-series line chart over a shared x axis, with a legend."""
    width, height = 720, 360
    left, right, top, bottom = 70, 10, 30, 40
    plot_w, plot_h = width - left - right, height - top - bottom
    all_vals = [v for vals in series.values() for v in vals] or [0.0, 1.0]
    lo, hi = min(all_vals), max(all_vals)
    if hi == lo:
        hi = lo + 1.0
    xs = [float(v) for v in x]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def px(v: float) -> float:
        return left + plot_w * (v - x_lo) / (x_hi - x_lo)

    def py(v: float) -> float:
        return top + plot_h * (1.0 - (v - lo) / (hi - lo))

    body = [_text(width / 2, 18, title, anchor="middle", size=13)]
    for si, (name, vals) in enumerate(series.items()):
        color = _LINE_COLORS[si % len(_LINE_COLORS)]
        points = " ".join(f"{px(xv):.1f},{py(v):.1f}" for xv, v in zip(xs, vals))
        body.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(
            f'<rect x="{left + 10 + si * 150}" y="{top + 4}" width="10" height="10" fill="{color}"/>'
        )
        body.append(_text(left + 24 + si * 150, top + 13, name))
    body.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{width - right}" y2="{top + plot_h}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>')
    body.append(_text(left - 5, top + 10, f"{hi:.3f}", anchor="end"))
    body.append(_text(left - 5, top + plot_h, f"{lo:.3f}", anchor="end"))
    body.append(_text(left, height - 8, str(x[0]), anchor="middle"))
    body.append(_text(width - right, height - 8, str(x[-1]), anchor="middle"))
    if ylabel:
        body.append(_text(12, top + plot_h / 2, ylabel, size=10))
    Path(path).write_text(_doc(width, height, body), encoding="utf-8")


def heatmap(
    matrix, row_labels: list[str], col_labels: list[str], title: str, path: str | Path
) -> None:
    """Square-cell heatmap with per-cell counts (confusion matrix style)."""
    rows, cols = len(row_labels), len(col_labels)
    cell = 90
    left, top = 80, 60
    width = left + cols * cell + 20
    height = top + rows * cell + 40
    peak = max(max(row) for row in matrix) or 1
    body = [_text(width / 2, 20, title, anchor="middle", size=13)]
    body.append(_text(width / 2, 38, "rows: true, columns: predicted", anchor="middle", size=10))
    for j, lab in enumerate(col_labels):
        body.append(_text(left + j * cell + cell / 2, top - 8, lab, anchor="middle"))
    for i, lab in enumerate(row_labels):
        body.append(_text(left - 10, top + i * cell + cell / 2 + 4, lab, anchor="end"))
        for j in range(cols):
            value = matrix[i][j]
            shade = int(255 - 175 * (value / peak))
            body.append(
                f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},255)" stroke="black"/>'
            )
            body.append(
                _text(left + j * cell + cell / 2, top + i * cell + cell / 2 + 4, str(value), anchor="middle")
            )
    Path(path).write_text(_doc(width, height, body), encoding="utf-8")
