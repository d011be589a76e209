"""Evaluation report rendering.

Every report is emitted in four forms side by side: an aligned text table,
a JSON document, a delimited CSV, and a matplotlib figure (PNG). Rates are
stored as fractions in the machine-readable outputs and shown as percent in
text and figures. Optional "comparisons" add published full-scale reference
rows (stored in percent, as published) to each rendering.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .ingest import CATEGORIES, CATEGORY_DISPLAY
from .metrics import (
    ConfusionMatrix,
    CostMatrix,
    average_cost,
    detection_rate,
    false_alarm_rate,
    safe_rate,
)


def _fmt_pct(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def _fmt_pub(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_comparisons(path: str) -> list[dict]:
    """Load published reference rows ({"systems": [{name, dr, far}, ...]})."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    systems = doc.get("systems")
    if not isinstance(systems, list):
        raise ValidationError(f"comparison file {path!r} lacks a 'systems' list")
    return systems


@dataclass
class MisuseReport:
    """Per-class detection/false-alarm rates plus the average cost."""

    cm: ConfusionMatrix
    dr: dict[str, float | None]
    far: dict[str, float | None]
    average_cost: float
    accuracy: float
    comparisons: list[dict] = field(default_factory=list)
    system_name: str = "this run"
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        cm: ConfusionMatrix,
        cost: CostMatrix,
        comparisons: Sequence[dict] = (),
        system_name: str = "this run",
        meta: dict | None = None,
    ) -> "MisuseReport":
        dr = {
            name: safe_rate(detection_rate, cm, k)
            for k, name in enumerate(cm.class_names)
        }
        far = {
            name: safe_rate(false_alarm_rate, cm, k)
            for k, name in enumerate(cm.class_names)
        }
        return cls(
            cm=cm,
            dr=dr,
            far=far,
            average_cost=average_cost(cm, cost),
            accuracy=cm.accuracy(),
            comparisons=list(comparisons),
            system_name=system_name,
            meta=dict(meta or {}),
        )

    def to_text(self) -> str:
        names = self.cm.class_names
        display = dict(zip(CATEGORIES, CATEGORY_DISPLAY))
        width = max(
            [38, len(self.system_name) + 2]
            + [len(s["name"]) + 2 for s in self.comparisons]
        )
        lines = []
        header = f"{'System':<{width}}" + "".join(
            f"{display.get(n, n):>10}" for n in names
        ) + f"{'':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for system in self.comparisons:
            dr_row = f"{system['name']:<{width}}" + "".join(
                f"{_fmt_pub(system.get('dr', {}).get(n)):>10}" for n in names
            ) + f"{'DR':>8}"
            far_row = f"{'':<{width}}" + "".join(
                f"{_fmt_pub(system.get('far', {}).get(n)):>10}" for n in names
            ) + f"{'FAR':>8}"
            lines.append(dr_row)
            lines.append(far_row)
        lines.append(
            f"{self.system_name:<{width}}"
            + "".join(f"{_fmt_pct(self.dr[n]):>10}" for n in names)
            + f"{'DR':>8}"
        )
        lines.append(
            f"{'':<{width}}"
            + "".join(f"{_fmt_pct(self.far[n]):>10}" for n in names)
            + f"{'FAR':>8}"
        )
        lines.append("")
        lines.append(f"average cost : {self.average_cost:.4f}")
        lines.append(f"accuracy     : {100.0 * self.accuracy:.2f}%")
        lines.append(f"records      : {self.cm.total}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "kind": "misuse_report",
            "system": self.system_name,
            "class_names": list(self.cm.class_names),
            "confusion": self.cm.counts.tolist(),
            "dr": self.dr,
            "far": self.far,
            "average_cost": self.average_cost,
            "accuracy": self.accuracy,
            "comparisons": self.comparisons,
            "comparison_units": "percent",
            "meta": self.meta,
        }

    def save(self, out_dir: str, stem: str = "misuse_report") -> dict[str, str]:
        """Write text, JSON, CSV, and figure files; returns their paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            kind: os.path.join(out_dir, f"{stem}.{ext}")
            for kind, ext in
            (("text", "txt"), ("json", "json"), ("csv", "csv"), ("figure", "png"))
        }
        with open(paths["text"], "w", encoding="ascii") as fh:
            fh.write(self.to_text())
        write_json(self.to_json_dict(), paths["json"])
        with open(paths["csv"], "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "dr", "far"])
            for name in self.cm.class_names:
                writer.writerow([
                    name,
                    "" if self.dr[name] is None else repr(self.dr[name]),
                    "" if self.far[name] is None else repr(self.far[name]),
                ])
            writer.writerow(["average_cost", repr(self.average_cost), ""])
            writer.writerow(["accuracy", repr(self.accuracy), ""])
        _misuse_figure(self, paths["figure"])
        return paths


def _misuse_figure(report: MisuseReport, path: str) -> None:
    names = report.cm.class_names
    display = [dict(zip(CATEGORIES, CATEGORY_DISPLAY)).get(n, n) for n in names]
    x = np.arange(len(names))
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, rates, title in (
        (axes[0], report.dr, "Detection rate"),
        (axes[1], report.far, "False alarm rate"),
    ):
        values = [100.0 * rates[n] if rates[n] is not None else 0.0 for n in names]
        ax.bar(x, values, color="#336699", label=report.system_name)
        reference = next(
            (s for s in reversed(report.comparisons) if "dr" in s), None
        )
        if reference is not None:
            key = "dr" if title.startswith("Detection") else "far"
            ref = [reference.get(key, {}).get(n) for n in names]
            xs = [xi for xi, v in zip(x, ref) if v is not None]
            vs = [v for v in ref if v is not None]
            if xs:
                ax.plot(xs, vs, "kD", label=reference["name"])
        ax.set_xticks(x, display)
        ax.set_ylabel("%")
        ax.set_title(title)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@dataclass
class AnomalyReport:
    """One-class evaluation: anomaly detection rate and false alarm rate."""

    dr: float | None
    far: float | None
    attack_total: int
    normal_total: int
    quantile: float | None = None
    comparisons: list[dict] = field(default_factory=list)
    system_name: str = "this run"
    meta: dict = field(default_factory=dict)

    def to_text(self) -> str:
        width = max(
            [38, len(self.system_name) + 2]
            + [len(s["name"]) + 2 for s in self.comparisons]
        )
        lines = [f"{'System':<{width}}{'Anomaly DR':>12}{'FAR':>12}"]
        lines.append("-" * len(lines[0]))
        for system in self.comparisons:
            lines.append(
                f"{system['name']:<{width}}"
                f"{_fmt_pub(system.get('dr')):>12}{_fmt_pub(system.get('far')):>12}"
            )
        lines.append(
            f"{self.system_name:<{width}}"
            f"{_fmt_pct(self.dr):>12}{_fmt_pct(self.far):>12}"
        )
        lines.append("")
        lines.append(f"attacks evaluated : {self.attack_total}")
        lines.append(f"normals evaluated : {self.normal_total}")
        if self.quantile is not None:
            lines.append(f"threshold quantile: {self.quantile}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "kind": "anomaly_report",
            "system": self.system_name,
            "dr": self.dr,
            "far": self.far,
            "attack_total": self.attack_total,
            "normal_total": self.normal_total,
            "quantile": self.quantile,
            "comparisons": self.comparisons,
            "comparison_units": "percent",
            "meta": self.meta,
        }

    def save(self, out_dir: str, stem: str = "anomaly_report") -> dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            kind: os.path.join(out_dir, f"{stem}.{ext}")
            for kind, ext in
            (("text", "txt"), ("json", "json"), ("csv", "csv"), ("figure", "png"))
        }
        with open(paths["text"], "w", encoding="ascii") as fh:
            fh.write(self.to_text())
        write_json(self.to_json_dict(), paths["json"])
        with open(paths["csv"], "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerow(["dr", "" if self.dr is None else repr(self.dr)])
            writer.writerow(["far", "" if self.far is None else repr(self.far)])
            writer.writerow(["attack_total", self.attack_total])
            writer.writerow(["normal_total", self.normal_total])
        _anomaly_figure(self, paths["figure"])
        return paths


def _anomaly_figure(report: AnomalyReport, path: str) -> None:
    systems = [s["name"] for s in report.comparisons] + [report.system_name]
    dr = [s.get("dr") for s in report.comparisons] + [
        None if report.dr is None else 100.0 * report.dr
    ]
    far = [s.get("far") for s in report.comparisons] + [
        None if report.far is None else 100.0 * report.far
    ]
    x = np.arange(len(systems))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - 0.2, [v or 0.0 for v in dr], width=0.4, label="DR",
           color="#336699")
    ax.bar(x + 0.2, [v or 0.0 for v in far], width=0.4, label="FAR",
           color="#cc6633")
    ax.set_xticks(x, systems, rotation=15, fontsize=8)
    ax.set_ylabel("%")
    ax.set_title("Anomaly detection")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@dataclass
class CurveTable:
    """Per-stage detection rates across the incremental training sets."""

    stages: list[int]
    rates: dict[str, list[float | None]]  # category -> one value per stage
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "kind": "curve",
            "stages": self.stages,
            "dr": self.rates,
            "meta": self.meta,
        }

    def save(self, out_dir: str, stem: str = "curve") -> dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            kind: os.path.join(out_dir, f"{stem}.{ext}")
            for kind, ext in
            (("json", "json"), ("csv", "csv"), ("figure", "png"))
        }
        write_json(self.to_json_dict(), paths["json"])
        names = list(self.rates.keys())
        with open(paths["csv"], "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage"] + names)
            for i, stage in enumerate(self.stages):
                row = [stage]
                for name in names:
                    value = self.rates[name][i]
                    row.append("" if value is None else repr(value))
                writer.writerow(row)
        _curve_figure(self, paths["figure"])
        return paths


def _curve_figure(table: CurveTable, path: str) -> None:
    display = dict(zip(CATEGORIES, CATEGORY_DISPLAY))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, values in table.rates.items():
        xs = [s for s, v in zip(table.stages, values) if v is not None]
        ys = [100.0 * v for v in values if v is not None]
        ax.plot(xs, ys, marker="o", label=display.get(name, name))
    ax.set_xlabel("training stage (clusters included)")
    ax.set_ylabel("detection rate (%)")
    ax.set_xticks(table.stages)
    ax.set_ylim(-2, 102)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
