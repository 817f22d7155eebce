"""Correspondence analysis of a nonnegative contingency table.

With ``P = N / n``, row masses ``r`` and column masses ``c``, the matrix of
standardised residuals ``S = (P - r c^T) / sqrt(r c^T)`` is decomposed as
``U diag(sv) V^T``. Principal coordinates are ``F = diag(r)^-1/2 U diag(sv)``
for rows and ``G = diag(c)^-1/2 V diag(sv)`` for columns. Within each
dimension the column with the largest absolute coordinate is made
nonnegative, which fixes the SVD sign ambiguity.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

# singular values at or below this are numerical noise: every CA singular
# value lies in [0, 1], so an absolute threshold is meaningful
RANK_TOL = 1e-12


class CAError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class CAResult:
    row_labels: tuple
    col_labels: tuple
    F: np.ndarray
    G: np.ndarray
    sv: np.ndarray
    r: np.ndarray
    c: np.ndarray
    dropped_rows: tuple = ()
    dropped_cols: tuple = ()

    @property
    def dims(self) -> int:
        return int(self.sv.shape[0])

    @property
    def inertia(self) -> np.ndarray:
        return self.sv ** 2

    @property
    def total_inertia(self) -> float:
        return float(np.sum(self.inertia))

    @property
    def explained(self) -> np.ndarray:
        t = self.total_inertia
        return self.inertia / t if t > 0 else np.zeros_like(self.sv)

    def plane(self, which: str = "row") -> np.ndarray:
        """First two principal coordinates, zero-padded when fewer dimensions exist."""
        X = self.F if which == "row" else self.G
        out = np.zeros((X.shape[0], 2))
        k = min(2, X.shape[1])
        out[:, :k] = X[:, :k]
        return out


def correspondence_analysis(N, row_labels: Sequence[Hashable] | None = None,
                            col_labels: Sequence[Hashable] | None = None) -> CAResult:
    N = np.asarray(N, dtype=np.float64)
    if N.ndim != 2:
        raise CAError("INVALID_INPUT", "expected a 2-d table")
    if not np.all(np.isfinite(N)):
        raise CAError("INVALID_INPUT", "table has non-finite cells")
    if np.any(N < 0):
        raise CAError("INVALID_INPUT", "table has negative cells")
    rl = tuple(row_labels) if row_labels is not None else tuple(range(N.shape[0]))
    cl = tuple(col_labels) if col_labels is not None else tuple(range(N.shape[1]))
    if len(rl) != N.shape[0] or len(cl) != N.shape[1]:
        raise CAError("INVALID_INPUT", "label count does not match table shape")

    keep_r = N.sum(axis=1) > 0
    keep_c = N.sum(axis=0) > 0
    dropped_rows = tuple(l for l, k in zip(rl, keep_r) if not k)
    dropped_cols = tuple(l for l, k in zip(cl, keep_c) if not k)
    if keep_r.sum() < 2 or keep_c.sum() < 2:
        raise CAError("DEGENERATE", "need at least two nonzero rows and two nonzero columns")
    N = N[keep_r][:, keep_c]
    rl = tuple(l for l, k in zip(rl, keep_r) if k)
    cl = tuple(l for l, k in zip(cl, keep_c) if k)

    P = N / N.sum()
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    E = np.outer(r, c)
    S = (P - E) / np.sqrt(E)
    U, sv, Vt = np.linalg.svd(S, full_matrices=False)
    k = int(np.sum(sv > RANK_TOL))
    k = min(k, min(N.shape) - 1)
    U = U[:, :k]
    V = Vt[:k].T
    sv = sv[:k]

    # sign fixed on the principal column coordinates, the ones that get plotted
    Vc = V / np.sqrt(c)[:, None]
    for d in range(k):
        j = int(np.argmax(np.abs(Vc[:, d])))
        if Vc[j, d] < 0:
            U[:, d] = -U[:, d]
            V[:, d] = -V[:, d]

    F = U * sv / np.sqrt(r)[:, None]
    G = V * sv / np.sqrt(c)[:, None]
    return CAResult(rl, cl, F, G, sv, r, c, dropped_rows, dropped_cols)


def chi_square(N) -> float:
    """Pearson chi-square statistic of a table (zero rows/columns ignored)."""
    N = np.asarray(N, dtype=np.float64)
    N = N[N.sum(axis=1) > 0][:, N.sum(axis=0) > 0]
    E = np.outer(N.sum(axis=1), N.sum(axis=0)) / N.sum()
    return float(np.sum((N - E) ** 2 / E))


@dataclass(frozen=True)
class Trajectory:
    city: str
    points: tuple[tuple[int, float, float], ...]

    @property
    def years(self) -> list[int]:
        return [p[0] for p in self.points]


def trajectories(result: CAResult, cities: Iterable[str]) -> list[Trajectory]:
    """Year-ordered path of each city's row points in the first principal plane.

    Row labels must be ``(city, year)`` pairs. Cities without any row are
    skipped with a warning.
    """
    plane = result.plane("row")
    by_city: dict[str, list[tuple[int, float, float]]] = {}
    for (city, year), (x, y) in zip(result.row_labels, plane.tolist()):
        by_city.setdefault(city, []).append((int(year), x, y))
    out = []
    for city in cities:
        pts = by_city.get(city)
        if not pts:
            log.warning("city %s has no rows in the analysis; skipped", city)
            continue
        out.append(Trajectory(city, tuple(sorted(pts))))
    return out


@dataclass(frozen=True)
class Nearest:
    row: Hashable
    rank: int
    col: Hashable
    distance: float


def ca_report(result: CAResult, top_m: int = 3) -> list[Nearest]:
    """For each row point, its ``top_m`` nearest column points in the principal plane."""
    rows = result.plane("row")
    cols = result.plane("col")
    out = []
    for i, label in enumerate(result.row_labels):
        d = np.hypot(cols[:, 0] - rows[i, 0], cols[:, 1] - rows[i, 1])
        order = sorted(range(len(d)), key=lambda j: (d[j], str(result.col_labels[j])))
        for rank, j in enumerate(order[:top_m], start=1):
            out.append(Nearest(label, rank, result.col_labels[j], float(d[j])))
    return out


def _label(l) -> str:
    return "|".join(str(x) for x in l) if isinstance(l, tuple) else str(l)


def write_report(report: Iterable[Nearest], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "rank", "col", "distance"])
        for rec in report:
            w.writerow([_label(rec.row), rec.rank, _label(rec.col), f"{rec.distance:.12g}"])
            n += 1
    return n


def write_coordinates(result: CAResult, path: str | Path) -> int:
    total = result.total_inertia
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "kind", "dim1", "dim2", "mass", "inertia_share"])
        for kind, labels, X, m in (("row", result.row_labels, result.F, result.r),
                                   ("col", result.col_labels, result.G, result.c)):
            plane = result.plane(kind)
            share = m * np.sum(X ** 2, axis=1) / total if total > 0 else np.zeros(len(labels))
            for l, (x, y), mass, s in zip(labels, plane.tolist(), m.tolist(), share.tolist()):
                w.writerow([_label(l), kind, f"{x:.12g}", f"{y:.12g}", f"{mass:.12g}", f"{s:.12g}"])
                n += 1
    return n


# ---------------------------------------------------------------------------
# SVG map
# ---------------------------------------------------------------------------

_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def _xml(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def render_svg(result: CAResult, trajs: Sequence[Trajectory], title: str = "",
               width: int = 720, height: int = 560) -> str:
    """Self-contained SVG of the principal plane: sector points, city-year
    points and arrows joining consecutive years of each city."""
    margin = 60
    cols = result.plane("col")
    rows = result.plane("row")
    pts = np.vstack([cols, rows]) if rows.size else cols
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo = lo - 0.08 * span
    hi = hi + 0.08 * span
    span = hi - lo

    def sx(x):
        return margin + (x - lo[0]) / span[0] * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - lo[1]) / span[1] * (height - 2 * margin)

    ex = result.explained
    e1 = 100 * ex[0] if ex.size > 0 else 0.0
    e2 = 100 * ex[1] if ex.size > 1 else 0.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        "<defs>" + "".join(
            f'<marker id="arrow{i}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto">'
            f'<path d="M 0 0 L 10 5 L 0 10 z" fill="{c}"/></marker>' for i, c in enumerate(_PALETTE)) + "</defs>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.2f}" y="20" text-anchor="middle" font-size="14">{_xml(title)}</text>')
    if lo[0] <= 0 <= hi[0]:
        out.append(f'<line x1="{sx(0):.2f}" y1="{margin}" x2="{sx(0):.2f}" y2="{height - margin}" stroke="#bbb" stroke-dasharray="4 3"/>')
    if lo[1] <= 0 <= hi[1]:
        out.append(f'<line x1="{margin}" y1="{sy(0):.2f}" x2="{width - margin}" y2="{sy(0):.2f}" stroke="#bbb" stroke-dasharray="4 3"/>')
    out.append(f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" height="{height - 2 * margin}" fill="none" stroke="#444"/>')
    out.append(f'<text x="{width / 2:.2f}" y="{height - 20}" text-anchor="middle">Dimension 1 ({e1:.1f}% of inertia)</text>')
    out.append(f'<text x="18" y="{height / 2:.2f}" text-anchor="middle" transform="rotate(-90 18 {height / 2:.2f})">Dimension 2 ({e2:.1f}% of inertia)</text>')

    for l, (x, y) in zip(result.col_labels, cols.tolist()):
        out.append(f'<rect class="col" x="{sx(x) - 3:.2f}" y="{sy(y) - 3:.2f}" width="6" height="6" fill="#b22222"/>')
        out.append(f'<text x="{sx(x) + 5:.2f}" y="{sy(y) - 5:.2f}" fill="#b22222">{_xml(_label(l))}</text>')

    for i, t in enumerate(trajs):
        k = i % len(_PALETTE)
        colour = _PALETTE[k]
        out.append(f'<g class="trajectory" data-city="{_xml(t.city)}">')
        for (_, x0, y0), (_, x1, y1) in zip(t.points, t.points[1:]):
            out.append(f'<line class="step" x1="{sx(x0):.2f}" y1="{sy(y0):.2f}" x2="{sx(x1):.2f}" y2="{sy(y1):.2f}" stroke="{colour}" stroke-width="1.5" marker-end="url(#arrow{k})"/>')
        for year, x, y in t.points:
            out.append(f'<circle class="row" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="{colour}"/>')
            out.append(f'<text x="{sx(x) + 6:.2f}" y="{sy(y) + 12:.2f}" fill="{colour}">{_xml(t.city)} {year}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(result: CAResult, trajs: Sequence[Trajectory], path: str | Path, title: str = "") -> None:
    Path(path).write_text(render_svg(result, trajs, title), encoding="utf-8")
