"""Dependency-free SVG figures for single runs and the strategy x case batch.

Every figure is a pure function of the result arrays: axis ranges come from
data extents, so identical results give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from pathlib import Path

import numpy as np

from . import _kernels as K
from .output import atomic_write
from .scenario import CASE_LABELS, CASES, STRATEGIES

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
STRATEGY_COLORS = dict(zip(STRATEGIES, ("#2ca02c", "#9467bd", "#1f77b4", "#d62728")))
WEIGHT_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c")
WEIGHT_LABELS = ("alpha_ev", "alpha_dc", "alpha_bess")
MAX_POINTS = 1500


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def nice_range(lo: float, hi: float, pad: float = 0.05) -> tuple[float, float]:
    """Padded axis range; a flat series gets a symmetric window around its value."""
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return 0.0, 1.0
    span = hi - lo
    if span <= 1e-12 * max(1.0, abs(hi)):
        half = max(abs(hi) * 1e-3, 0.5) if hi != 0 else 0.5
        return lo - half, hi + half
    return lo - pad * span, hi + pad * span


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** np.floor(np.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = np.ceil(lo / step) * step
    return np.round(np.arange(start, hi + step * 1e-9, step) / step) * step + 0.0


def _decimate(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).round().astype(int))
    # keep the extremes so nadirs stay on the plot
    idx = np.unique(np.concatenate([idx, [int(np.argmin(y)), int(np.argmax(y))]]))
    return x[idx], y[idx]


@dataclass
class Panel:
    """One axes box; collects SVG elements in data coordinates."""

    x: float
    y: float
    w: float
    h: float
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlim: tuple = (0.0, 1.0)
    ylim: tuple = (0.0, 1.0)
    items: list = field(default_factory=list)
    legend: list = field(default_factory=list)

    def px(self, xv):
        x0, x1 = self.xlim
        return self.x + (np.asarray(xv, dtype=float) - x0) / (x1 - x0) * self.w

    def py(self, yv):
        y0, y1 = self.ylim
        return self.y + self.h - (np.asarray(yv, dtype=float) - y0) / (y1 - y0) * self.h

    def line(self, xs, ys, color, label=None, width=1.4, dash=None):
        xs, ys = _decimate(np.asarray(xs, float), np.asarray(ys, float))
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(self.px(xs), self.py(ys)))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{d} points="{pts}"/>')
        if label:
            self.legend.append((label, color))

    def band(self, xs, lo, hi, color, label=None):
        xs, lo, hi = (np.asarray(a, float) for a in (xs, lo, hi))
        if len(xs) > MAX_POINTS:
            idx = np.unique(np.linspace(0, len(xs) - 1, MAX_POINTS).round().astype(int))
            xs, lo, hi = xs[idx], lo[idx], hi[idx]
        top = [f"{_num(a)},{_num(b)}" for a, b in zip(self.px(xs), self.py(hi))]
        bot = [f"{_num(a)},{_num(b)}" for a, b in zip(self.px(xs[::-1]), self.py(lo[::-1]))]
        self.items.append(f'<polygon fill="{color}" fill-opacity="0.75" stroke="none" points="{" ".join(top + bot)}"/>')
        if label:
            self.legend.append((label, color))

    def bar(self, x0, x1, value, color, label=None):
        base = min(max(0.0, self.ylim[0]), self.ylim[1])
        ya, yb = float(self.py(base)), float(self.py(value))
        xa, xb = float(self.px(x0)), float(self.px(x1))
        self.items.append(
            f'<rect x="{_num(xa)}" y="{_num(min(ya, yb))}" width="{_num(xb - xa)}" '
            f'height="{_num(abs(ya - yb))}" fill="{color}"/>'
        )
        if label and (label, color) not in self.legend:
            self.legend.append((label, color))

    def hline(self, yv, color="#888", dash="4,3"):
        y = _num(float(self.py(yv)))
        self.items.append(
            f'<line x1="{_num(self.x)}" x2="{_num(self.x + self.w)}" y1="{y}" y2="{y}" '
            f'stroke="{color}" stroke-dasharray="{dash}"/>'
        )

    def render(self, xticks=True, xticklabels=None) -> str:
        out = [f'<rect x="{_num(self.x)}" y="{_num(self.y)}" width="{_num(self.w)}" height="{_num(self.h)}" '
               'fill="white" stroke="#333"/>']
        for v in _ticks(*self.ylim):
            y = _num(float(self.py(v)))
            out.append(f'<line x1="{_num(self.x - 4)}" x2="{_num(self.x)}" y1="{y}" y2="{y}" stroke="#333"/>')
            out.append(f'<text x="{_num(self.x - 6)}" y="{y}" text-anchor="end" dominant-baseline="middle">{v:.6g}</text>')
        if xticklabels:
            for xv, text in xticklabels:
                out.append(f'<text x="{_num(float(self.px(xv)))}" y="{_num(self.y + self.h + 14)}" '
                           f'text-anchor="middle">{escape(text)}</text>')
        elif xticks:
            for v in _ticks(*self.xlim):
                x = _num(float(self.px(v)))
                yb = self.y + self.h
                out.append(f'<line x1="{x}" x2="{x}" y1="{_num(yb)}" y2="{_num(yb + 4)}" stroke="#333"/>')
                out.append(f'<text x="{x}" y="{_num(yb + 14)}" text-anchor="middle">{v:.6g}</text>')
        clip = f"clip{int(self.x)}_{int(self.y)}"
        out.append(f'<clipPath id="{clip}"><rect x="{_num(self.x)}" y="{_num(self.y)}" '
                   f'width="{_num(self.w)}" height="{_num(self.h)}"/></clipPath>')
        out.append(f'<g clip-path="url(#{clip})">')
        out.extend(self.items)
        out.append("</g>")
        if self.title:
            out.append(f'<text x="{_num(self.x + self.w / 2)}" y="{_num(self.y - 8)}" text-anchor="middle" '
                       f'font-weight="bold">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{_num(self.x + self.w / 2)}" y="{_num(self.y + self.h + 32)}" '
                       f'text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cx, cy = self.x - 52, self.y + self.h / 2
            out.append(f'<text x="{_num(cx)}" y="{_num(cy)}" text-anchor="middle" '
                       f'transform="rotate(-90 {_num(cx)} {_num(cy)})">{escape(self.ylabel)}</text>')
        if self.legend:
            out.append(f'<rect x="{_num(self.x + self.w - 122)}" y="{_num(self.y + 3)}" width="118" '
                       f'height="{14 * len(self.legend) + 4}" fill="white" fill-opacity="0.85" stroke="#ccc"/>')
        for i, (label, color) in enumerate(self.legend):
            lx, ly = self.x + self.w - 118, self.y + 12 + 14 * i
            out.append(f'<rect x="{_num(lx)}" y="{_num(ly - 5)}" width="12" height="8" fill="{color}"/>')
            out.append(f'<text x="{_num(lx + 16)}" y="{_num(ly)}" dominant-baseline="middle">{escape(label)}</text>')
        return "\n".join(out)


def _document(width: int, height: int, body: list[str], title: str = "") -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">')
    parts = [head, f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:g}" y="18" text-anchor="middle" font-size="13" '
                     f'font-weight="bold">{escape(title)}</text>')
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _grid(nrows: int, ncols: int, pw=360, ph=200, mx=80, my=60, top=40):
    panels = []
    for r in range(nrows):
        for c in range(ncols):
            panels.append((mx + c * (pw + mx), top + my / 2 + r * (ph + my), pw, ph))
    return panels, ncols * (pw + mx) + 30, top + nrows * (ph + my) + 20


def _extent(arrays) -> tuple[float, float]:
    vals = np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(1)
    return float(vals.min()), float(vals.max())


def _dc_power(s: np.ndarray) -> np.ndarray:
    return s[:, K.C_UPS] + s[:, K.C_IT]


# -- single run ---------------------------------------------------------------

def run_figure(result, stacked: bool = True) -> str:
    """Frequency, resource power and participation weights of one run."""
    s = result.samples
    t = s[:, K.C_T]
    boxes, width, height = _grid(3, 1, pw=640, ph=180)
    xl = nice_range(t[0], t[-1], 0.0)

    fp = Panel(*boxes[0], title="COI frequency", ylabel="f (Hz)", xlim=xl,
               ylim=nice_range(*_extent([s[:, K.C_F]])))
    fp.line(t, s[:, K.C_F], PALETTE[0])

    channels = (("EV", s[:, K.C_EV]), ("UPS", s[:, K.C_UPS]), ("IT relief", s[:, K.C_IT]),
                ("BESS", s[:, K.C_BESS]), ("total", s[:, K.C_TOTAL]))
    pp = Panel(*boxes[1], title="FFR power", ylabel="P (MW)", xlim=xl,
               ylim=nice_range(*_extent([c for _, c in channels])))
    for (label, y), color in zip(channels, PALETTE):
        pp.line(t, y, color, label, width=2.0 if label == "total" else 1.2)

    a = s[:, K.C_A_EV:K.C_A_B + 1]
    wp = Panel(*boxes[2], title="participation weights", xlabel="t (s)", ylabel="alpha",
               xlim=xl, ylim=(0.0, 1.05))
    if stacked:
        base = np.zeros(len(t))
        for j in range(3):
            wp.band(t, base, base + a[:, j], WEIGHT_COLORS[j], WEIGHT_LABELS[j])
            base = base + a[:, j]
    else:
        for j in range(3):
            wp.line(t, a[:, j], WEIGHT_COLORS[j], WEIGHT_LABELS[j])

    body = [fp.render(), pp.render(), wp.render()]
    sc = result.scenario
    title = f"case {sc.case_id} ({CASE_LABELS[sc.case_id]}), {sc.strategy.kind}"
    return _document(width, height, body, title)


def write_run_plot(path, result, stacked: bool = True):
    return atomic_write(path, run_figure(result, stacked))


# -- batch comparison -----------------------------------------------------------

def frequency_figure(results: dict) -> str:
    """One panel per case, one trace per strategy."""
    boxes, width, height = _grid(2, 2)
    body = []
    for box, case_id in zip(boxes, CASES):
        cells = [(k, results[(k, case_id)]) for k in STRATEGIES if (k, case_id) in results]
        if not cells:
            continue
        t = cells[0][1].samples[:, K.C_T]
        p = Panel(*box, title=f"case {case_id}: {CASE_LABELS[case_id]}", xlabel="t (s)", ylabel="f (Hz)",
                  xlim=nice_range(t[0], t[-1], 0.0),
                  ylim=nice_range(*_extent([r.samples[:, K.C_F] for _, r in cells])))
        for kind, r in cells:
            p.line(r.samples[:, K.C_T], r.samples[:, K.C_F], STRATEGY_COLORS[kind], kind)
        body.append(p.render())
    return _document(width, height, body, "frequency response by strategy")


def power_figure(results: dict, case_id: int = 4) -> str:
    """Resource power trajectories, one panel per strategy."""
    boxes, width, height = _grid(2, 2)
    body = []
    present = [k for k in STRATEGIES if (k, case_id) in results]
    arrays = []
    for k in present:
        s = results[(k, case_id)].samples
        arrays += [s[:, K.C_EV], _dc_power(s), s[:, K.C_BESS], s[:, K.C_TOTAL]]
    ylim = nice_range(*_extent(arrays))
    for box, kind in zip(boxes, present):
        s = results[(kind, case_id)].samples
        t = s[:, K.C_T]
        p = Panel(*box, title=f"{kind}, case {case_id}", xlabel="t (s)", ylabel="P (MW)",
                  xlim=nice_range(t[0], t[-1], 0.0), ylim=ylim)
        p.line(t, s[:, K.C_EV], PALETTE[0], "EV")
        p.line(t, _dc_power(s), PALETTE[1], "DC")
        p.line(t, s[:, K.C_BESS], PALETTE[2], "BESS")
        p.line(t, s[:, K.C_TOTAL], "#000", "total", width=2.0)
        body.append(p.render())
    return _document(width, height, body, "FFR power by strategy")


def weights_figure(results: dict, case_id: int = 4, stacked: bool = True) -> str:
    """Participation weight trajectories, one panel per strategy."""
    boxes, width, height = _grid(2, 2)
    body = []
    for box, kind in zip(boxes, [k for k in STRATEGIES if (k, case_id) in results]):
        s = results[(kind, case_id)].samples
        t = s[:, K.C_T]
        a = s[:, K.C_A_EV:K.C_A_B + 1]
        p = Panel(*box, title=f"{kind}, case {case_id}", xlabel="t (s)", ylabel="alpha",
                  xlim=nice_range(t[0], t[-1], 0.0), ylim=(0.0, 1.05))
        base = np.zeros(len(t))
        for j in range(3):
            if stacked:
                p.band(t, base, base + a[:, j], WEIGHT_COLORS[j], WEIGHT_LABELS[j])
                base = base + a[:, j]
            else:
                p.line(t, a[:, j], WEIGHT_COLORS[j], WEIGHT_LABELS[j])
        body.append(p.render())
    return _document(width, height, body, "participation weights")


METRIC_PANELS = (
    ("nadir_hz", "frequency nadir (Hz)", lambda m: m.nadir_hz),
    ("rocof_hz_per_s", "|RoCoF| (Hz/s)", lambda m: abs(m.rocof_hz_per_s)),
    ("recovery_time_s", "recovery time (s)", lambda m: m.recovery_time_s if m.recovery_time_s is not None else np.nan),
    ("ffr_energy_mwh", "FFR energy (MWh)", lambda m: m.ffr_energy_mwh),
)


def metrics_figure(results: dict) -> str:
    """Four bar panels: per metric, cases grouped along x, one bar per strategy."""
    boxes, width, height = _grid(2, 2)
    body = []
    kinds = [k for k in STRATEGIES if any((k, c) in results for c in CASES)]
    nb = max(len(kinds), 1)
    for box, (_, label, get) in zip(boxes, METRIC_PANELS):
        vals = {(k, c): get(results[(k, c)].metrics) for k in kinds for c in CASES if (k, c) in results}
        finite = [v for v in vals.values() if np.isfinite(v)] or [0.0]
        lo, hi = min(finite), max(finite)
        if label.startswith("frequency"):
            ylim = nice_range(lo, hi, 0.25)
        else:
            ylim = (0.0, nice_range(0.0, hi)[1])
        p = Panel(*box, title=label, xlim=(0.5, len(CASES) + 0.5), ylim=ylim)
        for (k, c), v in vals.items():
            if not np.isfinite(v):
                continue
            j = kinds.index(k)
            x0 = c - 0.4 + 0.8 * j / nb
            p.bar(x0, x0 + 0.8 / nb, v, STRATEGY_COLORS[k], k)
        body.append(p.render(xticklabels=[(c, f"case {c}") for c in CASES]))
    return _document(width, height, body, "metric comparison")


BATCH_FIGURES = {
    "fig5.svg": frequency_figure,
    "fig6.svg": power_figure,
    "fig7.svg": weights_figure,
    "fig8.svg": metrics_figure,
}


def render_plots(results: dict, out_dir) -> list:
    """Write fig5..fig8 for a (strategy, case) -> RunResult mapping."""
    if not results:
        raise ValueError("no results to plot")
    out_dir = Path(out_dir)
    return [atomic_write(out_dir / name, make(results)) for name, make in BATCH_FIGURES.items()]
