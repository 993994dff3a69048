"""
Campaign persistence (records, summary, extra tables) and plot-ready CSV.

Record files carry no timing information, so a rerun with the same master
seed reproduces them byte for byte; wall time lives in the summary only.
"""
import csv
import io
import json
import logging
import math
from enum import Enum
from pathlib import Path

import numpy as np

from src.config import CONFIG
from src.errors import DomainError, OutputError
from src.experiments.config import ExperimentConfig
from src.experiments.records import CampaignSummary, MeasuredValue, TrialRecord
from src.spectral import EmpiricalCdf, SpectralData, gap_distribution

logger = logging.getLogger(__name__)

FIXED_COLUMNS = ["schema_version", "config_hash", "master_seed",
                 "trial_index", "derived_seed", "pass", "error"]


def _header(config: ExperimentConfig) -> dict:
    return {
        "schema_version": CONFIG.experiments.schema_version,
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "name": config.name,
        "experiment": config.experiment.value,
    }


def _cell(value: MeasuredValue) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _parse_cell(text: str) -> MeasuredValue:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for parse in (int, float):
        try:
            return parse(text)
        except ValueError:
            pass
    return text


def records_to_json(records: list[TrialRecord], config: ExperimentConfig) -> str:
    payload = {**_header(config),
               "records": [r.model_dump(mode="json", by_alias=True) for r in records]}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def records_to_csv(records: list[TrialRecord], config: ExperimentConfig) -> str:
    header = _header(config)
    measured_keys = sorted(set().union(*(r.measured for r in records)))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FIXED_COLUMNS + measured_keys)
    for record in records:
        writer.writerow([
            header["schema_version"], header["config_hash"], header["master_seed"],
            record.trial_index, record.derived_seed, _cell(record.passed), _cell(record.error),
            *(_cell(record.measured.get(key)) for key in measured_keys),
        ])
    return buffer.getvalue()


def summary_to_json(summary: CampaignSummary) -> str:
    payload = {"schema_version": CONFIG.experiments.schema_version,
               **summary.model_dump(mode="json")}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise OutputError(f"cannot write output ({e.strerror or e})", path) from e
    logger.debug("Wrote %s", path)
    return path


def emit(records: list[TrialRecord], summary: CampaignSummary, config: ExperimentConfig,
         out_dir: str | Path, fmt: str = "json",
         extra: dict[str, str] | None = None) -> list[Path]:
    """
    Write ``records.json`` and/or ``records.csv``, ``summary.json`` and any
    extra tables into ``out_dir/<campaign name>``.

    Returns:
        list[Path]: Files written
    """
    if fmt not in ("json", "csv", "both"):
        raise DomainError(f"unknown output format {fmt!r}")
    target = Path(out_dir) / config.name
    written = []
    if fmt in ("json", "both"):
        written.append(write_text(target / "records.json", records_to_json(records, config)))
    if fmt in ("csv", "both"):
        written.append(write_text(target / "records.csv", records_to_csv(records, config)))
    written.append(write_text(target / "summary.json", summary_to_json(summary)))
    for name, text in (extra or {}).items():
        written.append(write_text(target / name, text))
    logger.info("Campaign %s written to %s (%d files)", config.name, target, len(written))
    return written


def load_records(path: str | Path) -> list[TrialRecord]:
    """Parse a records.json or records.csv file back into TrialRecords."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OutputError(f"cannot read records ({e.strerror or e})", path) from e
    if path.suffix == ".json":
        return [TrialRecord.model_validate(r) for r in json.loads(text)["records"]]
    records = []
    for row in csv.DictReader(io.StringIO(text)):
        measured = {key: _parse_cell(value) for key, value in row.items()
                    if key not in FIXED_COLUMNS}
        records.append(TrialRecord(
            trial_index=int(row["trial_index"]),
            derived_seed=int(row["derived_seed"]),
            measured=measured,
            passed=row["pass"] == "true",
            error=row["error"] or None,
        ))
    return records


# Plot data

def eigenvalue_scatter_csv(spectrum) -> str:
    """``re,im`` rows of the eigenvalues divided by √n."""
    eigenvalues = (spectrum.eigenvalues if isinstance(spectrum, SpectralData)
                   else np.asarray(spectrum, dtype=complex).ravel())
    if eigenvalues.size == 0:
        raise DomainError("no eigenvalues to plot")
    scaled = eigenvalues / math.sqrt(eigenvalues.size)
    lines = ["re,im"] + [f"{z.real!r},{z.imag!r}" for z in scaled.tolist()]
    return "\n".join(lines) + "\n"


def gap_cdf_csv(sample) -> str:
    """``s,cdf`` rows of the empirical CDF of normalized gaps."""
    cdf = sample if isinstance(sample, EmpiricalCdf) else gap_distribution(sample)
    lines = ["s,cdf"] + [f"{s!r},{f!r}" for s, f in cdf.rows()]
    return "\n".join(lines) + "\n"


class PlotKind(str, Enum):
    SCATTER = "scatter"
    GAP_CDF = "gap_cdf"


def _default_plot_kind(data) -> PlotKind:
    if isinstance(data, SpectralData):
        return PlotKind.SCATTER
    if isinstance(data, EmpiricalCdf):
        return PlotKind.GAP_CDF
    if isinstance(data, np.ndarray) and np.iscomplexobj(data):
        return PlotKind.SCATTER
    return PlotKind.GAP_CDF


def emit_plot_data(data, path: str | Path | None = None,
                   kind: PlotKind | str | None = None) -> str:
    """
    Plot-ready CSV. ``kind="scatter"`` gives the eigenvalue scatter of SpectralData
    or raw eigenvalues (real ones included); ``kind="gap_cdf"`` gives the CDF of a
    sample of GapStats or normalized gaps. Without ``kind`` only SpectralData and
    complex arrays are read as eigenvalues.
    """
    try:
        kind = _default_plot_kind(data) if kind is None else PlotKind(kind)
    except ValueError as exc:
        raise DomainError(f"unknown plot kind {kind!r}") from exc
    if kind is PlotKind.SCATTER:
        if isinstance(data, EmpiricalCdf):
            raise DomainError("an empirical CDF has no eigenvalue scatter")
        text = eigenvalue_scatter_csv(data)
    elif isinstance(data, SpectralData):
        raise DomainError("gap CDF needs a gap sample, not a spectrum")
    else:
        text = gap_cdf_csv(data)
    if path is not None:
        write_text(Path(path), text)
    return text
