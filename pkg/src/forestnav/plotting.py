"""Static SVG rendering of a forest map with a flown trajectory.

World Y points up; SVG Y points down, so rows are mirrored on output. Trees
are the only ``<circle>`` elements and the path is the only ``<polyline>``,
which keeps the output easy to inspect and to test.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .forest import ForestMap

PX_PER_M = 8.0


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def render_svg(
    fmap: ForestMap,
    trajectory: list[dict],
    goal_x: float | None = 30.0,
    title: str | None = None,
) -> str:
    cfg = fmap.config
    lo = cfg.origin
    hi = lo + cfg.grid_extent * cfg.cell_side
    xs = [r["x"] for r in trajectory]
    ys = [r["y"] for r in trajectory]
    x0, x1 = min([lo, *xs]), max([hi, *xs])
    y0, y1 = min([lo, *ys]), max([hi, *ys])
    w = (x1 - x0) * PX_PER_M
    h = (y1 - y0) * PX_PER_M

    def sx(x: float) -> float:
        return (x - x0) * PX_PER_M

    def sy(y: float) -> float:
        return (y1 - y) * PX_PER_M

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w)}" height="{_f(h)}" '
        f'viewBox="0 0 {_f(w)} {_f(h)}">',
        f'<rect x="0" y="0" width="{_f(w)}" height="{_f(h)}" fill="#f4f1e8"/>',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")

    grid = []
    for k in range(cfg.grid_extent + 1):
        c = lo + k * cfg.cell_side
        grid.append(f"M{_f(sx(c))} {_f(sy(lo))}V{_f(sy(hi))}")
        grid.append(f"M{_f(sx(lo))} {_f(sy(c))}H{_f(sx(hi))}")
    out.append(f'<path d="{"".join(grid)}" stroke="#c9c2ad" stroke-width="1" fill="none"/>')

    out.append('<g fill="#3f6b35" stroke="#23401d" stroke-width="0.5">')
    for t in fmap.trees():
        out.append(f'<circle cx="{_f(sx(t.center.x))}" cy="{_f(sy(t.center.y))}" r="{_f(t.radius * PX_PER_M)}"/>')
    out.append("</g>")

    if goal_x is not None:
        out.append(
            f'<line x1="{_f(sx(goal_x))}" y1="{_f(sy(y0))}" x2="{_f(sx(goal_x))}" y2="{_f(sy(y1))}" '
            'stroke="#b8860b" stroke-width="2" stroke-dasharray="8 6"/>'
        )

    if trajectory:
        pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="2"/>')
        s = 6.0
        out.append(
            f'<rect x="{_f(sx(xs[0]) - s)}" y="{_f(sy(ys[0]) - s)}" width="{_f(2 * s)}" height="{_f(2 * s)}" '
            'fill="#1f4e9c"/>'
        )
        ex, ey = sx(xs[-1]), sy(ys[-1])
        out.append(
            f'<path d="M{_f(ex - s)} {_f(ey - s)}L{_f(ex + s)} {_f(ey + s)}M{_f(ex - s)} {_f(ey + s)}L{_f(ex + s)} {_f(ey - s)}" '
            'stroke="#1f4e9c" stroke-width="2.5"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
