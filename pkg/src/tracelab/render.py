"""SVG drawings of tiling systems and norm breakdowns."""
from __future__ import annotations

from xml.sax.saxutils import escape

from .functions import NormReport
from .tilings import BLUE, TilingSystem

FILL = {BLUE: "#4a78c2", "yellow": "#f2c94c", None: "#dddddd"}


def _svg(width: float, height: float, body: list[str]) -> str:
    return ("<svg xmlns=\"http://www.w3.org/2000/svg\" "
            f"width=\"{width:g}\" height=\"{height:g}\" viewBox=\"0 0 {width:g} {height:g}\">\n"
            + "\n".join(body) + "\n</svg>\n")


def system_svg(system: TilingSystem, size: float = 480.0) -> str:
    """One <g> layer per stage; cubes filled by color, selected cubes outlined.

    In one dimension each stage is a horizontal strip; in two dimensions the
    stages sit side by side.  Higher dimensions are not drawn.
    """
    win = system.window
    if win.n > 2:
        raise ValueError("only n = 1 or 2 can be drawn")
    px = size / win.M
    body = []
    S = len(system.stages)
    strip = 40.0
    gap = 12.0
    for s, (stage, chosen) in enumerate(zip(system.stages, system.selected)):
        keep = set(chosen)
        body.append(f"<g id=\"stage-{s}\" class=\"stage\">")
        for c in stage.cubes:
            side = float(c.side) * px
            fill = FILL.get(stage.colors.get(c), FILL[None])
            stroke = "stroke=\"#000\" stroke-width=\"1.5\"" if c in keep else \
                "stroke=\"#666\" stroke-width=\"0.5\""
            if win.n == 1:
                x, y, w, h = c.index[0] * side, s * (strip + gap), side, strip
            else:
                x = s * (size + gap) + c.index[0] * side
                y = c.index[1] * side
                w = h = side
            body.append(f"<rect x=\"{x:.4f}\" y=\"{y:.4f}\" width=\"{w:.4f}\" "
                        f"height=\"{h:.4f}\" fill=\"{fill}\" {stroke}/>")
        body.append("</g>")
    if win.n == 1:
        return _svg(size, S * (strip + gap), body)
    return _svg(S * (size + gap), size, body)


def report_svg(report: NormReport, width: float = 640.0, bar: float = 18.0,
               grouped: bool = True) -> str:
    """Horizontal bars, one per term (or per label group)."""
    items = list(report.groups().items()) if grouped else list(report.breakdown)
    top = max([abs(v) for _, v in items] + [1e-300])
    label_w = 160.0
    body = [f"<text x=\"4\" y=\"14\" font-size=\"12\">{escape(report.name)} = "
            f"{report.value:.6g}</text>"]
    for i, (label, v) in enumerate(items):
        y = 24 + i * (bar + 4)
        w = (width - label_w - 80) * abs(v) / top
        body.append(f"<text x=\"4\" y=\"{y + bar - 5:.1f}\" font-size=\"11\">"
                    f"{escape(label)}</text>")
        body.append(f"<rect x=\"{label_w}\" y=\"{y}\" width=\"{w:.4f}\" height=\"{bar}\" "
                    f"fill=\"#4a78c2\"/>")
        body.append(f"<text x=\"{label_w + w + 4:.1f}\" y=\"{y + bar - 5:.1f}\" "
                    f"font-size=\"11\">{v:.4g}</text>")
    return _svg(width, 30 + len(items) * (bar + 4), body)
