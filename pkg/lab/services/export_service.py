import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config.settings import Settings
from numerics.models import ActivationField, Mesh2D, ModalSet
from lab.scenarios import Scenario
from lab.services.benchmark_service import BenchmarkRow
from lab.utils.rate_utils import format_float, format_rate, format_sci

BASE_COLUMNS = (
    "scenario", "method", "Ne", "h", "Pe", "l2", "linf", "tv", "e_ext", "det",
    "rho_stab", "rate", "iterations", "final_variation",
)
# appended after the base columns; rho_stab is "nan" on non-uniform meshes
EXTRA_COLUMNS = ("case", "undershoot", "overshoot", "distance", "status")
CSV_COLUMNS = BASE_COLUMNS + EXTRA_COLUMNS


class ExportService:

    def __init__(self, settings: Settings):
        self.settings = settings

    def _fmt(self, value: Optional[float]) -> str:
        return format_float(value, self.settings.CSV_SIGNIFICANT_DIGITS)

    def csv_record(self, row: BenchmarkRow) -> List[str]:
        d = row.diagnostics
        return [
            row.scenario,
            row.method,
            str(row.Ne),
            self._fmt(row.h),
            self._fmt(row.Pe),
            self._fmt(d.l2_error if d else None),
            self._fmt(d.linf_error if d else None),
            self._fmt(d.tv if d else None),
            self._fmt(d.e_ext if d else None),
            str(d.detector_count) if d else "",
            self._fmt(d.rho_stab_mean if d else None),
            self._fmt(row.rate),
            "" if row.iterations is None else str(row.iterations),
            self._fmt(row.final_variation),
            row.label,
            self._fmt(d.undershoot if d else None),
            self._fmt(d.overshoot if d else None),
            self._fmt(row.distance),
            row.status,
        ]

    def write_rows_csv(self, path: Path, rows: Sequence[BenchmarkRow],
                       overrides: Optional[Dict[str, Any]] = None) -> Path:
        """One line per row in fixed column order.

        Overrides go first as '# key=value' lines, followed by one
        '# extra columns: ...' line naming the columns after final_variation.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            for key in sorted(overrides or {}):
                fh.write(f"# {key}={overrides[key]}\n")
            fh.write(f"# extra columns: {','.join(EXTRA_COLUMNS)}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(self.csv_record(row))
        logging.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def markdown_table(self, scenario: Scenario, rows: Sequence[BenchmarkRow],
                       modal_rows: Optional[List[Dict[str, Any]]] = None) -> str:
        lines = [f"## {scenario.name}: {scenario.title}", ""]
        lines.append("| method | case | Ne | Pe_h | L2 | Linf | TV | E_ext | det | rho_stab "
                     "| rate | iter | distance | time (s) | cost |")
        lines.append("|" + "---|" * 15)
        for row in rows:
            d = row.diagnostics
            if d is None:
                lines.append(f"| {row.method} | {row.label} | {row.Ne} | {row.Pe:.3f} | "
                             f"failed: {row.message} |" + " |" * 10)
                continue
            rho = "---" if math.isnan(d.rho_stab_mean) else f"{d.rho_stab_mean:.3f}"
            iterations = "---" if row.iterations is None else str(row.iterations)
            seconds = "---" if row.seconds is None else f"{row.seconds:.3f}"
            cost = "---" if row.cost_ratio is None else f"{row.cost_ratio:.2f}"
            lines.append(
                f"| {row.method} | {row.label} | {row.Ne} | {row.Pe:.3f} | {format_sci(d.l2_error)} "
                f"| {format_sci(d.linf_error)} | {d.tv:.4f} | {format_sci(d.e_ext)} | {d.detector_count} "
                f"| {rho} | {format_rate(row.rate)} | {iterations} | {format_sci(row.distance)} "
                f"| {seconds} | {cost} |")
        if modal_rows:
            lines += ["", "### Modal balance", "",
                      "| Ne | Pe_h | rho_Gal | dominant | B | gamma0 raw | gamma0 projected |",
                      "|---|---|---|---|---|---|---|"]
            for m in modal_rows:
                lines.append(
                    f"| {m['Ne']} | {m['Pe']:.3f} | {m['rho_gal_mean']:.3f} | "
                    f"{m['dominant']}/{m['modes']} | {m['B_mean']:.3f} | "
                    f"{m['gamma0_raw']:.3f} | {m['gamma0_projected']:.3f} |")
        return "\n".join(lines) + "\n"

    def write_markdown(self, path: Path, scenario: Scenario, rows: Sequence[BenchmarkRow],
                       modal_rows: Optional[List[Dict[str, Any]]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.markdown_table(scenario, rows, modal_rows), encoding="utf-8")
        return path

    def emit(self, scenario: Scenario, rows: Sequence[BenchmarkRow], out_dir: Path,
             formats: Sequence[str], overrides: Optional[Dict[str, Any]] = None,
             modal_rows: Optional[List[Dict[str, Any]]] = None) -> List[Path]:
        out_dir = Path(out_dir)
        written = []
        if "csv" in formats:
            written.append(self.write_rows_csv(out_dir / f"{scenario.name}.csv", rows, overrides))
        if "markdown" in formats:
            written.append(self.write_markdown(out_dir / f"{scenario.name}.md", scenario, rows, modal_rows))
        return written

    def export_rho_map_csv(self, modal: ModalSet, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        indices = np.indices(modal.rho.shape)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if len(modal.beta) == 1:
                writer.writerow(["p", "theta", "a", "b", "rho", "dominant", "B"])
                for k in range(modal.rho.size):
                    writer.writerow([k + 1, self._fmt(modal.thetas[0][k]), self._fmt(modal.a[k]),
                                     self._fmt(modal.b[k]), self._fmt(modal.rho[k]),
                                     int(modal.dominant_mask[k]), self._fmt(modal.B[k])])
            else:
                writer.writerow(["p", "q", "theta_x", "theta_y", "a", "b", "rho", "dominant", "B"])
                for q, p in zip(indices[0].reshape(-1), indices[1].reshape(-1)):
                    writer.writerow([p + 1, q + 1, self._fmt(modal.thetas[0][q, p]),
                                     self._fmt(modal.thetas[1][q, p]), self._fmt(modal.a[q, p]),
                                     self._fmt(modal.b[q, p]), self._fmt(modal.rho[q, p]),
                                     int(modal.dominant_mask[q, p]), self._fmt(modal.B[q, p])])
        logging.info(f"Wrote rho map ({modal.mode_count} modes) to {path}")
        return path

    def export_footprint_csv(self, points: np.ndarray, jacobian: Optional[np.ndarray], path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["a", "b", "jacobian"])
            for k, z in enumerate(points):
                jac = "" if jacobian is None else self._fmt(jacobian[k])
                writer.writerow([self._fmt(z.real), self._fmt(z.imag), jac])
        logging.info(f"Wrote {len(points)} footprint samples to {path}")
        return path

    def export_activation_csv(self, field: ActivationField, mesh: Mesh2D, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        coords = [c.reshape(-1) for c in mesh.coordinates()]
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y", "chi"] if mesh.dim == 2 else ["x", "chi"])
            for k, chi in enumerate(field.chi):
                writer.writerow([self._fmt(c[k]) for c in coords] + [self._fmt(chi)])
        return path
