"""A tiny SVG line-chart writer for loss and sparsity curves."""

import math
from xml.sax.saxutils import escape


def line_chart(series, path, title="", xlabel="step", ylabel="", logy=False, width=640, height=400):
    """Write ``series`` (a dict label -> list of y values, x = index) as an SVG file."""
    pad = 50
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    pts = {}
    for label, ys in series.items():
        vals = [(i, math.log10(y) if logy else y) for i, y in enumerate(ys)
                if (y > 0 or not logy) and math.isfinite(y)]
        pts[label] = vals
    allx = [x for v in pts.values() for x, _ in v] or [0, 1]
    ally = [y for v in pts.values() for _, y in v] or [0, 1]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" '
           f'text-anchor="middle">{escape(("log10 " if logy else "") + ylabel)}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-size="10">{y0:.3g}</text>',
           f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-size="10">{y1:.3g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 14}" text-anchor="end" font-size="10">{x1:g}</text>']
    for k, (label, vals) in enumerate(pts.items()):
        color = colors[k % len(colors)]
        if vals:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in vals)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 14 * (k + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
