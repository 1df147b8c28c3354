"""SVG rendering of episode traces: agent paths, start/end markers.

Output bytes are deterministic for a given trace (fixed float formatting,
no timestamps).
"""

from __future__ import annotations

CANVAS = 640
MARGIN = 40
PALETTE_STEP = 47  # degrees between consecutive agent hues


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_trace(header: dict, records: list, path, visibility_disc: bool = False) -> None:
    """Write an SVG 1.1 file for a trace read by engine.read_trace."""
    initial = [tuple(p) for p in header["positions"]]
    n = len(initial)
    paths = [[initial[i]] for i in range(n)]
    for record in records:
        for i, point in enumerate(record["positions"]):
            paths[i].append(tuple(point))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f"<!-- swarmgather trace: n={n} steps={len(records)} "
        f"outcome={header.get('outcome', 'unknown')} -->",
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    if not records and not initial:
        lines.append("<!-- empty trace -->")
        lines.append("</svg>")
        _write(path, lines)
        return

    xs = [p[0] for track in paths for p in track]
    ys = [p[1] for track in paths for p in track]
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    if visibility_disc:
        v = float(header.get("v", 50.0))
        cx = sum(p[0] for p in initial) / n
        cy = sum(p[1] for p in initial) / n
        min_x, max_x = min(min_x, cx - v), max(max_x, cx + v)
        min_y, max_y = min(min_y, cy - v), max(max_y, cy + v)
    span = max(max_x - min_x, max_y - min_y, 1e-9)
    scale = (CANVAS - 2 * MARGIN) / span

    def to_px(point):
        # y-up world to y-down screen
        px = MARGIN + (point[0] - min_x) * scale
        py = CANVAS - MARGIN - (point[1] - min_y) * scale
        return px, py

    if visibility_disc:
        cx, cy = to_px((sum(p[0] for p in initial) / n, sum(p[1] for p in initial) / n))
        radius = float(header.get("v", 50.0)) * scale
        lines.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(radius)}" '
            'fill="none" stroke="#bbbbbb" stroke-dasharray="6,4" stroke-width="1"/>'
        )

    for i, track in enumerate(paths):
        hue = (i * PALETTE_STEP) % 360
        color = f"hsl({hue},70%,45%)"
        if any(p != track[0] for p in track):
            points = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in map(to_px, track))
            lines.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" '
                'stroke-width="1.2" stroke-opacity="0.85"/>'
            )
        start = to_px(track[0])
        end = to_px(track[-1])
        lines.append(
            f'<circle cx="{_fmt(start[0])}" cy="{_fmt(start[1])}" r="4" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        lines.append(
            f'<circle cx="{_fmt(end[0])}" cy="{_fmt(end[1])}" r="3" fill="{color}"/>'
        )
    lines.append("</svg>")
    _write(path, lines)


def _write(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
