"""ROC overlay plots as standalone SVG text, plus an AUC summary table."""

from xml.sax.saxutils import escape

from .evaluation import relative_error_reduction, trapezoid_area

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_SIZE = 360
_MARGIN = 50


def _xy(fpr, tpr):
    return _MARGIN + fpr * _SIZE, _MARGIN + (1.0 - tpr) * _SIZE


def roc_svg(curves, labels, title="ROC"):
    """Render one ``<path>`` per curve over a dashed chance diagonal.

    Coordinates are printed with two decimals so output is byte-stable.
    """
    if len(curves) != len(labels):
        raise ValueError("need one label per curve")
    legend_h = 18 * len(curves)
    width = _SIZE + 2 * _MARGIN
    height = _SIZE + 2 * _MARGIN + legend_h + 10
    x0, y0 = _xy(0.0, 0.0)
    x1, y1 = _xy(1.0, 1.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(title)}</title>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE}" height="{_SIZE}" fill="none" stroke="#000"/>',
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
        'stroke="#999" stroke-dasharray="4 4"/>',
    ]
    for t in range(0, 11, 2):
        v = t / 10
        x, _ = _xy(v, 0.0)
        _, y = _xy(0.0, v)
        out.append(f'<text x="{x:.2f}" y="{y0 + 16:.2f}" text-anchor="middle">{v:.1f}</text>')
        out.append(f'<text x="{x0 - 6:.2f}" y="{y + 4:.2f}" text-anchor="end">{v:.1f}</text>')
    out.append(f'<text x="{_MARGIN + _SIZE / 2:.2f}" y="{y0 + 34:.2f}" text-anchor="middle">'
               'False positive rate</text>')
    out.append(f'<text transform="translate(14 {_MARGIN + _SIZE / 2:.2f}) rotate(-90)" '
               'text-anchor="middle">True positive rate</text>')
    for i, (curve, label) in enumerate(zip(curves, labels)):
        color = COLORS[i % len(COLORS)]
        pts = [_xy(f, t) for f, t in zip(curve.fpr, curve.tpr)]
        d = "M" + " L".join(f"{x:.2f} {y:.2f}" for x, y in pts)
        out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = _MARGIN + _SIZE + 50 + 18 * i
        out.append(f'<rect x="{_MARGIN}" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{_MARGIN + 18}" y="{ly}">'
                   f'{escape(label)} (AUC {trapezoid_area(curve):.4f})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary_rows(curves, labels, baseline_auc=None):
    rows = []
    for curve, label in zip(curves, labels):
        a = trapezoid_area(curve)
        red = None if baseline_auc is None else relative_error_reduction(a, baseline_auc)
        rows.append((label, a, red))
    return rows


def format_summary(rows, baseline_auc=None):
    head = f"{'model':<24} {'auc':>8}"
    if baseline_auc is not None:
        head += f" {'error reduction vs ' + format(baseline_auc, '.3f'):>28}"
    lines = [head]
    for label, a, red in rows:
        line = f"{label:<24} {a:>8.4f}"
        if red is not None:
            line += f" {red * 100:>27.1f}%"
        lines.append(line)
    return "\n".join(lines) + "\n"
