# app/channel/analyzer_factory.py
from app.channel.analyzer import StationarityAnalyzer
from app.channel.schema import AnalysisConfig
from app.config.settings import settings


def get_analyzer(**overrides) -> StationarityAnalyzer:
    fields = dict(
        n=settings.LSF_N,
        m=settings.LSF_M,
        delta_t=settings.LSF_DELTA_T,
        delta_f=settings.LSF_DELTA_F,
        noise_margin_db=settings.NOISE_MARGIN_DB,
        gamma_threshold=settings.GAMMA_THRESHOLD,
        workers=settings.WORKERS,
    )
    fields.update(overrides)
    return StationarityAnalyzer(AnalysisConfig(**fields))
