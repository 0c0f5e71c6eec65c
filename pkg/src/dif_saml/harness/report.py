"""
Report files.

Every format is written from the same records in the same order, so two runs with
the same seed produce identical CSV and JSON files. Wall-clock times are logged,
never written.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Final, Iterable, Mapping, Sequence

import h5py
import numpy as np

from dif_saml.constants import ReportFormat
from dif_saml.model.errors import ReportError

from .plans import RAMP_PROFILE, MetricsRecord

logger = logging.getLogger("dif.harness")

CSV_COLUMNS: Final = (
    "setup",
    "load",
    "throughput",
    "latency_mean",
    "latency_p50",
    "latency_p95",
    "cpu_proxy",
    "mem_proxy",
)
TRACE_COLUMNS: Final = (
    "setup",
    "load",
    "flow_id",
    "kind",
    "user",
    "start",
    "end",
    "outcome",
    "idp",
)
_SUFFIX: Final = {
    ReportFormat.CSV: ".csv",
    ReportFormat.JSON: ".json",
    ReportFormat.HDF5: ".h5",
}
_STRING_COLUMNS: Final = ("kind", "user", "outcome", "idp")


def _prepare(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(
            f"Cannot create report directory {out_dir}: {e.strerror}"
        ) from e


def _write_csv(path: Path, records: Sequence[MetricsRecord]) -> None:
    with open(path, "w", encoding="UTF-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow(record.row())


def _write_json(
    path: Path, records: Sequence[MetricsRecord], meta: Mapping[str, Any]
) -> None:
    document = {
        **meta,
        "ramp": RAMP_PROFILE,
        "records": [r.to_dict() for r in records],
    }
    with open(path, "w", encoding="UTF-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_hdf5(
    path: Path, records: Sequence[MetricsRecord], meta: Mapping[str, Any]
) -> None:
    with h5py.File(path, "w", libver="latest") as fo:
        for key, value in sorted(meta.items()):
            fo.attrs.create(key, str(value))
        fo.attrs.create("ramp", RAMP_PROFILE)
        for record in records:
            # One group per step holding a dataset per trace column
            group = fo.create_group(f"{record.setup}/load-{record.load:05d}")
            for name, value in record.row().items():
                group.attrs.create(name, value)
            group.attrs.create("aborted", record.aborted)
            traces = record.traces
            group.create_dataset(
                "flow_id",
                data=np.array([t.flow_id for t in traces], dtype="i8"),
                track_times=False,
            )
            for name, attr in (("start", "start_ms"), ("end", "end_ms")):
                group.create_dataset(
                    name,
                    data=np.array([getattr(t, attr) for t in traces], dtype="f8"),
                    track_times=False,
                )
            for name in _STRING_COLUMNS:
                group.create_dataset(
                    name,
                    data=[getattr(t, name) for t in traces],
                    dtype=h5py.string_dtype(),
                    track_times=False,
                )


def emit_report(
    records: Sequence[MetricsRecord],
    out_dir: Path | str,
    fmt: ReportFormat | str = ReportFormat.CSV,
    stem: str = "report",
    meta: Mapping[str, Any] | None = None,
) -> Path:
    """
    Write the records of a run.

    :param records: At least one record, in setup then load order.
    :param out_dir: Directory, created if missing.
    :param fmt: ``csv`` (metrics only), ``json`` (metrics, counts and per-flow traces)
        or ``hdf5`` (the JSON content as HDF5 groups and datasets).
    :param stem: File name without suffix.
    :param meta: Run description (seed, plan) for the JSON and HDF5 formats.
    :return: The written file.
    :raises ReportError: If there is nothing to write or the path is not writable.
    """
    if not records:
        raise ReportError("No records to report")
    fmt = ReportFormat(fmt)
    out_dir = Path(out_dir)
    _prepare(out_dir)
    path = out_dir / f"{stem}{_SUFFIX[fmt]}"
    meta = dict(meta or {})
    try:
        if fmt is ReportFormat.CSV:
            _write_csv(path, records)
        elif fmt is ReportFormat.JSON:
            _write_json(path, records, meta)
        else:
            _write_hdf5(path, records, meta)
    except OSError as e:
        raise ReportError(f"Cannot write report {path}: {e}") from e
    logger.info("Wrote %d records to %s", len(records), path)
    return path


def emit_reports(
    records: Sequence[MetricsRecord],
    out_dir: Path | str,
    formats: Iterable[ReportFormat | str],
    stem: str = "report",
    meta: Mapping[str, Any] | None = None,
) -> list[Path]:
    """Write the records in several formats."""
    return [emit_report(records, out_dir, fmt, stem, meta) for fmt in formats]


# pylint: disable=too-few-public-methods
class TraceConverter:
    """
    Flattens the per-flow traces of an HDF5 report into one CSV table.

    Rows follow the file's group order (setup, then load step) and flow IDs within a
    step. Setups that are not in the file are reported and skipped.

    :param input_file: An HDF5 report written by :func:`emit_report`.
    :param output_file: The CSV file to write; its directory is created if missing.
    """

    _DELIMITER: Final = ","

    def __init__(self, input_file: Path | str, output_file: Path | str) -> None:
        self.input_file = Path(input_file)
        self.output_file = Path(output_file)

    def _rows(self, fo: h5py.File, setups: list[str]) -> Iterable[list[Any]]:
        for setup in setups:
            for step_name in fo[setup]:
                step = fo[setup][step_name]
                load = int(step_name.removeprefix("load-"))
                columns = {
                    "flow_id": step["flow_id"][()],
                    "start": step["start"][()],
                    "end": step["end"][()],
                }
                for name in _STRING_COLUMNS:
                    columns[name] = step[name].asstr()[()]
                for i in range(len(columns["flow_id"])):
                    yield [setup, load] + [
                        columns[name][i] for name in TRACE_COLUMNS[2:]
                    ]

    def make_csv(self, setups: str | list[str] | None = None) -> int:
        """
        Write the CSV.

        :param setups: Setup labels to include; all of them by default.
        :return: Number of flow rows written.
        :raises ReportError: If the input is not a readable report, or none of the
            requested setups is in it.
        """
        if isinstance(setups, str):
            setups = [setups]
        try:
            fo = h5py.File(self.input_file, "r")
        except OSError as e:
            raise ReportError(f"Cannot read report {self.input_file}: {e}") from e
        with fo:
            known = list(fo.keys())
            wanted = known if setups is None else [s for s in setups if s in known]
            for missing in sorted(set(setups or ()) - set(known)):
                logger.warning(
                    "Setup %s is not in %s and is ignored", missing, self.input_file
                )
            if not wanted:
                raise ReportError(
                    f"No data for the requested setups in {self.input_file}"
                )
            self.output_file.parent.mkdir(parents=True, exist_ok=True)
            count = 0
            with open(self.output_file, "w", encoding="UTF-8", newline="") as f:
                writer = csv.writer(f, delimiter=self._DELIMITER, lineterminator="\n")
                writer.writerow(TRACE_COLUMNS)
                for row in self._rows(fo, wanted):
                    writer.writerow(row)
                    count += 1
        logger.info(
            "Converted %d flows from %s to %s", count, self.input_file, self.output_file
        )
        return count


def traces_to_csv(
    input_file: Path | str,
    output_file: Path | str,
    setups: str | list[str] | None = None,
) -> int:
    """Flatten an HDF5 report's traces to CSV; see :class:`TraceConverter`."""
    return TraceConverter(input_file, output_file).make_csv(setups)
