"""Bare-bones static SVG line plots (no plotting dependency)."""
from __future__ import annotations

import numpy as np

W, H, PAD = 480, 320, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_plot(path, series, title="", xlabel="", ylabel="", opacity=1.0):
    """Write ``series`` (a list of ``(x, y)`` or ``(x, y, color)``) to an SVG file."""
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = xs[ok].min(), xs[ok].max()
    y0, y1 = ys[ok].min(), ys[ok].max()
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return PAD + (np.asarray(x) - x0) / (x1 - x0) * (W - 2 * PAD)

    def py(y):
        return H - PAD - (np.asarray(y) - y0) / (y1 - y0) * (H - 2 * PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="12" y="{H / 2}" font-size="11" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">{x0:.3g}</text>',
        f'<text x="{W - PAD}" y="{H - PAD + 14}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 8}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, s in enumerate(series):
        color = s[2] if len(s) > 2 else COLORS[i % len(COLORS)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(s[0]), py(s[1])) if np.isfinite(a) and np.isfinite(b))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-opacity="{opacity}" points="{pts}"/>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
