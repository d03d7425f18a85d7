"""Results table (CSV) and the three scatter plots (SVG)."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.etree import ElementTree as ET

from .metrics import MetricsReport

CSV_COLUMNS = ["experiment", "latent_z", "validity", "uniqueness", "novelty",
               "ae_seconds", "flow_seconds", "params", "count"]


class OutputUnwritable(OSError):
    pass


def write_results_csv(path, reports: list[MetricsReport]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in reports:
                writer.writerow([r.experiment, r.latent_z, repr(r.validity),
                                 repr(r.uniqueness), repr(r.novelty),
                                 repr(r.ae_seconds), repr(r.flow_seconds),
                                 r.params, r.count])
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from exc


def read_results_csv(path) -> list[MetricsReport]:
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            reports.append(MetricsReport(
                experiment=row["experiment"], latent_z=int(row["latent_z"]),
                validity=float(row["validity"]), uniqueness=float(row["uniqueness"]),
                novelty=float(row["novelty"]), ae_seconds=float(row["ae_seconds"]),
                flow_seconds=float(row["flow_seconds"]), params=int(row["params"]),
                count=int(row["count"])))
    return reports


def _scatter_svg(points: list[tuple[float, float, str]], xlabel: str,
                 ylabel: str) -> ET.Element:
    """800x600 scatter with axes, ticks, and one circle per point."""
    width, height = 800, 600
    left, right, top, bottom = 90, 40, 40, 70
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width),
                  height=str(height), fill="white")

    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_pad = 0.05 * (x_hi - x_lo)
    y_pad = 0.05 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(v):
        return height - bottom - (v - y_lo) / (y_hi - y_lo) * (height - top - bottom)

    axis = {"stroke": "black", "stroke-width": "1"}
    ET.SubElement(svg, "line", x1=str(left), y1=str(height - bottom),
                  x2=str(width - right), y2=str(height - bottom), **axis)
    ET.SubElement(svg, "line", x1=str(left), y1=str(top),
                  x2=str(left), y2=str(height - bottom), **axis)

    for k in range(5):
        xv = x_lo + (x_hi - x_lo) * k / 4
        yv = y_lo + (y_hi - y_lo) * k / 4
        ET.SubElement(svg, "line", x1=str(sx(xv)), y1=str(height - bottom),
                      x2=str(sx(xv)), y2=str(height - bottom + 5), **axis)
        tick = ET.SubElement(svg, "text", x=str(sx(xv)), y=str(height - bottom + 20),
                             fill="black", attrib={"text-anchor": "middle",
                                                   "font-size": "12"})
        tick.text = f"{xv:.4g}"
        ET.SubElement(svg, "line", x1=str(left - 5), y1=str(sy(yv)),
                      x2=str(left), y2=str(sy(yv)), **axis)
        tick = ET.SubElement(svg, "text", x=str(left - 8), y=str(sy(yv) + 4),
                             fill="black", attrib={"text-anchor": "end",
                                                   "font-size": "12"})
        tick.text = f"{yv:.4g}"

    xt = ET.SubElement(svg, "text", x=str((left + width - right) / 2),
                       y=str(height - 20), fill="black",
                       attrib={"text-anchor": "middle", "font-size": "16"})
    xt.text = xlabel
    yt = ET.SubElement(svg, "text", x="25", y=str((top + height - bottom) / 2),
                       fill="black",
                       attrib={"text-anchor": "middle", "font-size": "16",
                               "transform": f"rotate(-90 25 {(top + height - bottom) / 2})"})
    yt.text = ylabel

    for x, y, label in points:
        ET.SubElement(svg, "circle", cx=str(sx(x)), cy=str(sy(y)), r="6",
                      fill="steelblue", stroke="black", attrib={"fill-opacity": "0.8"})
        txt = ET.SubElement(svg, "text", x=str(sx(x) + 8), y=str(sy(y) - 8),
                            fill="black", attrib={"font-size": "11"})
        txt.text = label
    return svg


def _write_svg(path, element: ET.Element) -> None:
    try:
        ET.ElementTree(element).write(path, encoding="unicode", xml_declaration=True)
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from exc


def write_report(out_dir, reports: list[MetricsReport]) -> list[Path]:
    """Emit results.csv plus the three scatter figures; returns the paths."""
    if not reports:
        raise ValueError("need at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "results.csv"]
    write_results_csv(paths[0], reports)

    def tag(r: MetricsReport) -> str:
        return f"{r.experiment} z={r.latent_z}"

    quality = [(float(r.params), r.validity + r.uniqueness + r.novelty, tag(r))
               for r in reports]
    vu = [(r.validity, r.uniqueness, tag(r)) for r in reports]
    times = [(r.ae_seconds, r.flow_seconds, tag(r)) for r in reports]

    figures = [
        ("fig_params_vs_quality.svg", quality, "trainable parameters",
         "validity + uniqueness + novelty (%)"),
        ("fig_validity_vs_uniqueness.svg", vu, "validity (%)", "uniqueness (%)"),
        ("fig_training_times.svg", times, "autoencoder training time (s)",
         "flow training time (s)"),
    ]
    for name, pts, xl, yl in figures:
        path = out / name
        _write_svg(path, _scatter_svg(pts, xl, yl))
        paths.append(path)
    return paths
