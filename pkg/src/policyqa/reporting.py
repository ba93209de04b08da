"""Report rendering: plain text, CSV, and bar-chart figures.

The CSV keeps one row per number with its counts so downstream tooling
never has to re-derive a percentage.  Figures are written as PNG files
next to the delimited output.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import ERROR_CATEGORIES, Report  # noqa: E402

MODE_LABELS = {
    "agnostic": "agnostic",
    "rulebook": "rulebook",
    "rulebook_kg": "rulebook+kg",
}


def render_text(report: Report) -> str:
    out = io.StringIO()

    def line(text: str = "") -> None:
        out.write(text + "\n")

    line(f"QA evaluation report (scored rows: {report.judged_by})")
    line()
    line("Accuracy by mode")
    for mode in report.modes:
        stat = report.accuracy[mode]
        line(
            f"  {MODE_LABELS.get(mode, mode):<14} {stat.numerator}/{stat.denominator}"
            f"  ({stat.percent}%)"
        )
    if report.deltas:
        line()
        line(f"Delta vs {MODE_LABELS.get(report.baseline, report.baseline)}")
        for mode, delta in report.deltas.items():
            sign = "+" if delta >= 0 else ""
            line(f"  {MODE_LABELS.get(mode, mode):<14} {sign}{delta} points")
    for title, subset in (
        ("Table-question subset", report.table_subset),
        ("External-knowledge subset", report.external_subset),
    ):
        if not subset:
            continue
        line()
        line(title)
        for mode, stat in subset.items():
            line(
                f"  {MODE_LABELS.get(mode, mode):<14} {stat.numerator}/{stat.denominator}"
                f"  ({stat.percent}%)"
            )
    if report.error_dist:
        line()
        line("Error distribution (share of incorrect answers)")
        for mode, dist in report.error_dist.items():
            total = sum(stat.count for stat in dist.values())
            line(f"  {MODE_LABELS.get(mode, mode)} ({total} incorrect)")
            for category in ERROR_CATEGORIES:
                stat = dist[category]
                line(f"    {category:<17} {stat.count:>3}  ({stat.percent}%)")
    if report.judge_agreement is not None:
        a = report.judge_agreement
        line()
        line(
            f"Judge agreement ({' vs '.join(report.judge_ids)}): "
            f"{a.numerator}/{a.denominator} ({a.percent}%)"
        )
    return out.getvalue()


def render_csv(report: Report) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["section", "mode", "label", "numerator", "denominator", "value"])
    for mode in report.modes:
        stat = report.accuracy[mode]
        writer.writerow(
            ["accuracy", mode, "overall", stat.numerator, stat.denominator, str(stat.percent)]
        )
    for mode, delta in report.deltas.items():
        writer.writerow(["delta", mode, f"vs_{report.baseline}", "", "", str(delta)])
    for section, subset in (
        ("table_subset", report.table_subset),
        ("external_subset", report.external_subset),
    ):
        for mode, stat in subset.items():
            writer.writerow(
                [section, mode, "accuracy", stat.numerator, stat.denominator, str(stat.percent)]
            )
    for mode, dist in report.error_dist.items():
        total = sum(stat.count for stat in dist.values())
        for category in ERROR_CATEGORIES:
            stat = dist[category]
            writer.writerow(["errors", mode, category, stat.count, total, str(stat.percent)])
    if report.judge_agreement is not None:
        a = report.judge_agreement
        writer.writerow(
            [
                "agreement",
                "",
                "+".join(report.judge_ids),
                a.numerator,
                a.denominator,
                str(a.percent),
            ]
        )
    return out.getvalue()


def render_accuracy_figure(report: Report, path: str | Path) -> Path:
    """Grouped bars: overall accuracy per mode, plus any subset series."""
    path = Path(path)
    series = [("overall", report.accuracy)]
    if report.table_subset:
        series.append(("table questions", report.table_subset))
    if report.external_subset:
        series.append(("external knowledge", report.external_subset))

    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(series)
    for i, (label, stats) in enumerate(series):
        xs = []
        ys = []
        for m, mode in enumerate(report.modes):
            if mode not in stats:
                continue
            xs.append(m + (i - (len(series) - 1) / 2) * width)
            ys.append(float(stats[mode].percent))
        bars = ax.bar(xs, ys, width=width, label=label)
        ax.bar_label(bars, fmt="%.2f", fontsize=8)
    ax.set_xticks(range(len(report.modes)))
    ax.set_xticklabels([MODE_LABELS.get(m, m) for m in report.modes])
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Answer accuracy by mode")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_error_figure(report: Report, path: str | Path) -> Path | None:
    """Per-mode error-category mix; skipped when nothing failed."""
    if not report.error_dist:
        return None
    path = Path(path)
    modes = list(report.error_dist)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(modes)
    for i, mode in enumerate(modes):
        dist = report.error_dist[mode]
        xs = [c + (i - (len(modes) - 1) / 2) * width for c in range(len(ERROR_CATEGORIES))]
        ys = [float(dist[cat].percent) for cat in ERROR_CATEGORIES]
        ax.bar(xs, ys, width=width, label=MODE_LABELS.get(mode, mode))
    ax.set_xticks(range(len(ERROR_CATEGORIES)))
    ax.set_xticklabels([c.replace("_", " ") for c in ERROR_CATEGORIES], fontsize=9)
    ax.set_ylabel("share of incorrect answers (%)")
    ax.set_title("Error categories by mode")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_report(report: Report, out_dir: str | Path, fmt: str = "text") -> list[Path]:
    """Write the report file plus figures into out_dir; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        target = out_dir / "report.csv"
        target.write_text(render_csv(report), encoding="utf-8")
    elif fmt == "text":
        target = out_dir / "report.txt"
        target.write_text(render_text(report), encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    written.append(target)
    written.append(render_accuracy_figure(report, out_dir / "accuracy_by_mode.png"))
    errors_fig = render_error_figure(report, out_dir / "error_distribution.png")
    if errors_fig is not None:
        written.append(errors_fig)
    return written
