# app/channel/export.py
"""JSON/CSV artifacts of an analysis run: report, extents, matrices, profiles."""

import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app.channel.errors import RecordFormatError
from app.channel.lsf import delay_power_profile, doppler_power_profile, region_start_freqs, region_start_times
from app.channel.schema import CollinearityMatrix, LsfGrid, StationarityReport
from utils.logger import logger

FLOAT_FORMAT = "%.10g"


def _to_db(power: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(power > 0, 10.0 * np.log10(np.where(power > 0, power, 1.0)), np.nan)


def write_report(report: StationarityReport, filepath: str):
    Path(filepath).write_text(report.model_dump_json(indent=2))
    logger.info(f"Report written to {filepath}")


def read_report(filepath: str) -> StationarityReport:
    file_path = Path(filepath)
    if not file_path.exists():
        raise FileNotFoundError(f"No report found at {filepath}")
    try:
        return StationarityReport.model_validate(json.loads(file_path.read_text()))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RecordFormatError(f"report {filepath} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise RecordFormatError(f"report {filepath} is malformed: {exc.error_count()} invalid fields") from exc


def write_extents_csv(
    filepath: str,
    starts: Sequence[float],
    extents: Sequence[Optional[float]],
    run_length: Sequence[int],
    censored: Sequence[bool],
):
    """One row per index: index, region start, extent, run length, censored."""
    rows = np.column_stack(
        [
            np.arange(len(extents)),
            np.asarray(starts, dtype=float),
            np.array([np.nan if v is None else v for v in extents], dtype=float),
            np.asarray(run_length, dtype=float),
            np.asarray(censored, dtype=float),
        ]
    )
    np.savetxt(
        filepath,
        rows,
        delimiter=",",
        fmt=["%d", FLOAT_FORMAT, FLOAT_FORMAT, "%d", "%d"],
        header="index,start,extent,run_length,censored",
        comments="",
    )


def write_collinearity_csv(filepath: str, matrix: CollinearityMatrix):
    np.savetxt(filepath, matrix.values, delimiter=",", fmt=FLOAT_FORMAT)


def write_doppler_profile_csv(filepath: str, grid: LsfGrid):
    """Time-Doppler map in dB: first column region start time, header Doppler axis."""
    profile = _to_db(doppler_power_profile(grid))
    times = region_start_times(grid.plan, grid.t_s)
    header = "time," + ",".join(FLOAT_FORMAT % nu for nu in grid.doppler_axis)
    np.savetxt(filepath, np.column_stack([times, profile]), delimiter=",", fmt=FLOAT_FORMAT, header=header, comments="")


def write_delay_profile_csv(filepath: str, grid: LsfGrid):
    """Frequency-delay map in dB: first column region start frequency, header delay axis."""
    profile = _to_db(delay_power_profile(grid))
    freqs = region_start_freqs(grid.plan, grid.f_s)
    header = "frequency," + ",".join(FLOAT_FORMAT % tau for tau in grid.delay_axis)
    np.savetxt(filepath, np.column_stack([freqs, profile]), delimiter=",", fmt=FLOAT_FORMAT, header=header, comments="")


def write_lsf_csv(filepath: str, grid: LsfGrid):
    """Full grid as k_t,k_f,doppler_bin,delay_bin,power quadruplets (0-based)."""
    index = np.indices(grid.lsf.shape).reshape(4, -1).T
    rows = np.column_stack([index, grid.lsf.reshape(-1)])
    np.savetxt(
        filepath,
        rows,
        delimiter=",",
        fmt=["%d", "%d", "%d", "%d", FLOAT_FORMAT],
        header="k_t,k_f,doppler_bin,delay_bin,power",
        comments="",
    )


def export_analysis(
    output_dir: str,
    report: StationarityReport,
    seed_grid: Optional[LsfGrid] = None,
    grid: Optional[LsfGrid] = None,
    gamma_f: Optional[CollinearityMatrix] = None,
    gamma_t: Optional[CollinearityMatrix] = None,
    export_lsf: bool = False,
) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    write_report(report, str(out / "report.json"))
    write_extents_csv(str(out / "f_stat.csv"), report.region_start_freqs, report.f_stat, report.f_run_length, report.f_censored)
    write_extents_csv(str(out / "t_stat.csv"), report.region_start_times, report.t_stat, report.t_run_length, report.t_censored)
    if gamma_f is not None:
        write_collinearity_csv(str(out / "collinearity_freq.csv"), gamma_f)
    if gamma_t is not None:
        write_collinearity_csv(str(out / "collinearity_time.csv"), gamma_t)
    if grid is not None:
        write_doppler_profile_csv(str(out / "doppler_profile.csv"), grid)
        write_delay_profile_csv(str(out / "delay_profile.csv"), grid)
        if export_lsf:
            write_lsf_csv(str(out / "lsf.csv"), grid)
    if seed_grid is not None and export_lsf and seed_grid is not grid:
        write_lsf_csv(str(out / "lsf_seed.csv"), seed_grid)

    logger.info(f"Exported analysis artifacts to {out}")
    return out
