# app/cli.py
"""Command-line front end: synth, mask, analyze, report.

Exit codes: 0 success, 1 I/O or malformed file, 2 validation/domain error.
"""

import functools
import json
from pathlib import Path
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from app.channel.analyzer import StationarityAnalyzer
from app.channel.channel_io import read_record, record_paths, write_record
from app.channel.errors import ChannelError, RecordFormatError
from app.channel.export import export_analysis, read_report
from app.channel.lsf import doppler_mask
from app.channel.schema import AnalysisConfig, DopplerInterval, Scenario
from app.channel.synth import build_scenario
from app.config.settings import settings
from utils.logger import logger, set_console_level

EXIT_IO = 1
EXIT_VALIDATION = 2


def _fail(message: str, code: int):
    click.secho(f"Error: {message}", fg="red", bold=True, err=True)
    raise SystemExit(code)


def handle_errors(command):
    """Map domain, validation and I/O errors onto the stable exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ChannelError as e:
            logger.debug(f"{type(e).__name__}: {e}")
            _fail(str(e), e.exit_code)
        except ValidationError as e:
            _fail(f"invalid input: {e}", EXIT_VALIDATION)
        except ValueError as e:
            _fail(str(e), EXIT_VALIDATION)
        except FileNotFoundError as e:
            _fail(f"file not found: {e}", EXIT_IO)
        except OSError as e:
            _fail(str(e), EXIT_IO)

    return wrapper


def _fmt(value: Optional[float], scale: float = 1.0, spec: str = ".2f") -> str:
    return "n/a" if value is None else format(value * scale, spec)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log debug output to the console.")
def cli(verbose):
    """LSF multitaper estimation and stationarity analysis of channel records."""
    if verbose:
        set_console_level("DEBUG")


# ======================
# SYNTH
# ======================
@cli.command()
@click.argument("scenario_file")
@click.argument("out_path")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@handle_errors
def synth(scenario_file, out_path, seed):
    """Synthesize a channel record from a scenario JSON file."""
    scenario = Scenario.model_validate_json(Path(scenario_file).read_text(encoding="utf-8"))
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})

    record = build_scenario(scenario)
    write_record(record, out_path)

    meta_path, payload_path = record_paths(out_path)
    click.echo(f"Wrote {payload_path} and {meta_path}")
    click.echo(f"  S x Q      : {record.s} x {record.q}")
    click.echo(f"  t_s / f_s  : {record.t_s * 1e6:.3f} us / {record.f_s / 1e6:.3f} MHz")
    click.echo(f"  duration   : {record.duration * 1e3:.3f} ms, bandwidth {record.bandwidth / 1e6:.3f} MHz")
    click.echo(f"  label      : {record.label}")


# ======================
# MASK
# ======================
@cli.command()
@click.argument("in_path")
@click.argument("out_path")
@click.option("--interval", "interval_text", default="(-inf,inf)", show_default=True, help="Open Doppler interval to keep, in Hz.")
@click.option("--block-len", type=int, default=settings.MASK_BLOCK_LEN, show_default=True, help="Mask block length in samples.")
@handle_errors
def mask(in_path, out_path, interval_text, block_len):
    """Keep only the Doppler components inside an interval (e.g. NLOS: "(-inf,-258)")."""
    interval = DopplerInterval.parse(interval_text)
    record = read_record(in_path)
    masked = doppler_mask(record, block_len, interval)
    write_record(masked, out_path)
    click.echo(f"Masked {record.s} x {record.q} record to Doppler {interval}; label: {masked.label}")


# ======================
# ANALYZE
# ======================
def _load_config(config_file: Optional[str]) -> Dict[str, Any]:
    if config_file is None:
        return {}
    text = Path(config_file).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise RecordFormatError(f"config {config_file} is not valid JSON: {e}") from e


@cli.command()
@click.argument("in_path")
@click.option("--config", "config_file", default=None, help="Analysis config JSON; flags override it.")
@click.option("--out", "output_dir", default=None, help="Output directory (default: <record>_analysis).")
@click.option("--n", type=int, default=None, help="Seed region length in time samples.")
@click.option("--m", type=int, default=None, help="Seed region length in frequency samples.")
@click.option("--delta-t", type=int, default=None, help="Time hop in samples.")
@click.option("--delta-f", type=int, default=None, help="Frequency hop in samples.")
@click.option("--taper-a-t", type=float, default=None, help="Time-domain half-bandwidth product.")
@click.option("--taper-a-f", type=float, default=None, help="Frequency-domain half-bandwidth product.")
@click.option("--tapers-t", type=int, default=None, help="Number of time-domain tapers.")
@click.option("--tapers-f", type=int, default=None, help="Number of frequency-domain tapers.")
@click.option("--noise-margin-db", type=float, default=None, help="Threshold margin above the noise floor.")
@click.option("--noise-floor-db", type=float, default=None, help="Per-sample noise floor; overrides record and estimate.")
@click.option("--mask-doppler", default=None, help='Doppler interval to keep before analysis, e.g. "(-inf,-258)".')
@click.option("--bandwidth-mhz", type=float, default=None, help="Analyze only the first B MHz.")
@click.option("--gamma", "gamma_threshold", type=float, default=None, help="Collinearity threshold.")
@click.option("--m-update", "m_override", type=int, default=None, help="Use this M for the time pass.")
@click.option("--workers", type=int, default=None, help="Threads for LSF estimation.")
@click.option("--export-lsf", is_flag=True, default=False, help="Also export the full LSF grid as CSV.")
@handle_errors
def analyze(in_path, config_file, output_dir, export_lsf, **flags):
    """Estimate LSFs and stationarity bandwidth/time of a record."""
    fields = _load_config(config_file)
    if export_lsf:
        fields["export_lsf"] = True
    fields.update({name: value for name, value in flags.items() if value is not None})
    fields["input_path"] = in_path
    fields["output_dir"] = output_dir or fields.get("output_dir") or f"{record_paths(in_path)[0].with_suffix('')}_analysis"
    config = AnalysisConfig.model_validate(fields)

    record = read_record(in_path)

    captured: Dict[str, Any] = {}
    analyzer = StationarityAnalyzer(
        config,
        on_grid=lambda stage, grid: captured.__setitem__(stage, grid),
        on_collinearity=lambda matrix: captured.__setitem__(matrix.domain, matrix),
    )
    report = analyzer.analyze(record)

    out = export_analysis(
        config.output_dir,
        report,
        seed_grid=captured.get("seed"),
        grid=captured.get("updated"),
        gamma_f=captured.get("frequency"),
        gamma_t=captured.get("time"),
        export_lsf=config.export_lsf,
    )
    click.echo(
        f"LSF grid {report.k_t_count} x {report.k_f_count} (N={report.n}, M={report.m_updated}); "
        f"min f_stat {_fmt(report.min_f_stat, 1e-6, '.1f')} MHz, mean t_stat {_fmt(report.mean_t_stat, 1e3)} ms"
    )
    click.secho(f"Analysis written to {out}", fg="green", bold=True)


# ======================
# REPORT
# ======================
@cli.command()
@click.argument("report_path")
@handle_errors
def report(report_path):
    """Print a summary table of a stationarity report."""
    result = read_report(report_path)
    console = Console()

    overview = Table(title=f"Stationarity report: {result.label or report_path}")
    overview.add_column("Quantity")
    overview.add_column("Value", justify="right")
    overview.add_row("LSF grid K_t x K_f", f"{result.k_t_count} x {result.k_f_count}")
    overview.add_row("N / M seed / M updated", f"{result.n} / {result.m_seed} / {result.m_updated}")
    overview.add_row("Analyzed bandwidth [MHz]", _fmt(result.analyzed_bandwidth, 1e-6, ".1f"))
    overview.add_row("Min stationarity bandwidth [MHz]", _fmt(result.min_f_stat, 1e-6, ".1f"))
    overview.add_row("Mean stationarity time [ms]", _fmt(result.mean_t_stat, 1e3))
    overview.add_row("Edge-censored time indices", f"{sum(result.t_censored)} of {len(result.t_censored)}")
    overview.add_row("Undefined time / frequency indices", f"{len(result.undefined_indices.get('time', []))} / {len(result.undefined_indices.get('frequency', []))}")
    overview.add_row("Noise floor [dB]", _fmt(result.noise_floor_db))
    console.print(overview)

    if result.intervals:
        intervals = Table(title="Per-interval stationarity time")
        for column in ("Interval", "Start [s]", "Stop [s]", "Regions", "Censored", "Mean [ms]", "Min [ms]"):
            intervals.add_column(column, justify="left" if column == "Interval" else "right")
        for summary in result.intervals:
            intervals.add_row(
                summary.name,
                f"{summary.start:g}",
                f"{summary.stop:g}",
                str(summary.count),
                str(summary.censored_count),
                _fmt(summary.mean_t_stat, 1e3),
                _fmt(summary.min_t_stat, 1e3),
            )
        console.print(intervals)
