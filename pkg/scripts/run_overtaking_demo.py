from pathlib import Path

from rich.console import Console
from rich.table import Table

from app.channel.analyzer import analyze
from app.channel.schema import AnalysisConfig, DopplerInterval, Scenario, TimeInterval
from app.channel.synth import build_scenario, segment_boundaries

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "overtaking.json"
PERIODS = ["multipath-rich", "single specular", "faded"]

scenario = Scenario.model_validate_json(SCENARIO.read_text(encoding="utf-8"))
record = build_scenario(scenario)

edges = [0.0, *segment_boundaries(record.label), record.duration]
intervals = [TimeInterval(name=name, start=lo, stop=hi) for name, lo, hi in zip(PERIODS, edges[:-1], edges[1:])]

console = Console()
m_los = None
for title, mask in (("LOS", None), ("NLOS (ν < -258 Hz)", DopplerInterval(hi=-258.0))):
    # the NLOS pass reuses the LOS bandwidth; masked periods may be noise-only
    config = AnalysisConfig(n=100, m=30, mask_doppler=mask, intervals=intervals, workers=4, m_override=m_los)
    report = analyze(record, config)
    m_los = report.m_updated

    table = Table(title=f"{title}: M {report.m_seed} -> {report.m_updated}, grid {report.k_t_count} x {report.k_f_count}")
    for column in ("Period", "Regions", "Censored", "Mean t_stat [ms]", "Min t_stat [ms]"):
        table.add_column(column)
    for summary in report.intervals:
        table.add_row(
            summary.name,
            str(summary.count),
            str(summary.censored_count),
            "n/a" if summary.mean_t_stat is None else f"{summary.mean_t_stat * 1e3:.2f}",
            "n/a" if summary.min_t_stat is None else f"{summary.min_t_stat * 1e3:.2f}",
        )
    console.print(table)
