"""CSV writer for sweep results. The collector is the only component that touches the output directory."""
from __future__ import annotations

import csv
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Sequence

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"


def format_value(value: Any) -> str:
    """Fixed formatting so that identical runs give identical bytes"""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    if value is None:
        return ""
    return str(value)


def temperature_tag(T: float) -> str:
    """File-name fragment for a temperature, e.g. 37.5 -> '37.500'"""
    return f"{T:.3f}"


class CsvStore:
    """Writes `#`-commented, comma separated files carrying the resolved config hash"""

    def __init__(self, directory: str | Path, config_hash: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.written: list[Path] = []

    @contextmanager
    def open_table(self, name: str, columns: Sequence[str], comments: Sequence[str] = ()) -> Iterator[csv.writer]:
        """Yield a csv writer for rows of already formatted strings"""
        path = self.directory / name
        try:
            with path.open("w", encoding="utf-8", newline="") as fh:
                fh.write(f"# config_sha256={self.config_hash}\n")
                for line in comments:
                    fh.write(f"# {line}\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                yield writer
        except OSError as e:
            logger.error(f"Failed writing {path}: {e}")
            raise
        self.written.append(path)
        logger.debug(f"wrote {path}")

    def write_table(
        self,
        name: str,
        columns: Sequence[str],
        rows: Sequence[Sequence[Any]],
        comments: Sequence[str] = (),
    ) -> Path:
        with self.open_table(name, columns, comments) as writer:
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        return self.directory / name

    # ========== Spectra ==========

    def write_spectrum(self, T: float, omega: Sequence[float], intensity: Sequence[float]) -> Path:
        rows = [(float(w), float(s)) for w, s in zip(omega, intensity)]
        return self.write_table(f"spectrum_T{temperature_tag(T)}.csv", ("omega_meV", "intensity"), rows,
                                comments=(f"T_K={FLOAT_FORMAT % T}",))

    def write_spectra_long(self, spectra: Sequence[tuple[float, Sequence[float], Sequence[float]]]) -> Path:
        rows = [(float(T), float(w), float(s)) for T, omega, intensity in spectra for w, s in zip(omega, intensity)]
        return self.write_table("spectra_long.csv", ("T_K", "omega_meV", "intensity"), rows)

    # ========== Failures ==========

    def write_failures(self, failures: Sequence[tuple[str, Any, str]]) -> Path | None:
        """(command, sweep key, message) rows; nothing is written when the list is empty"""
        if not failures:
            return None
        logger.warning(f"{len(failures)} sweep rows failed, see failures.csv")
        return self.write_table("failures.csv", ("command", "key", "error"), list(failures))
