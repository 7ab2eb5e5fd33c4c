# app/channel/schema.py

import math
import re
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config.settings import settings


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ======================
# CHANNEL RECORD
# ======================
class ChannelRecord(BaseModel):
    """Sampled time-variant transfer function H[s, q] with its sampling grid.

    Rows are time snapshots (spacing ``t_s``), columns are frequency bins
    (spacing ``f_s``). The matrix is stored as a read-only complex128 array.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    t_s: float = Field(gt=0, allow_inf_nan=False)
    f_s: float = Field(gt=0, allow_inf_nan=False)
    f_carrier: float = 0.0
    noise_floor_db: Optional[float] = None
    label: str = ""

    @field_validator("data", mode="before")
    @classmethod
    def _complex_matrix(cls, value: Any) -> np.ndarray:
        data = np.array(value, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"data must be a non-empty S x Q matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains non-finite entries")
        return _readonly(data)

    @property
    def s(self) -> int:
        return self.data.shape[0]

    @property
    def q(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.s * self.t_s

    @property
    def bandwidth(self) -> float:
        return self.q * self.f_s

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelRecord):
            return NotImplemented
        return (
            self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
            and (self.t_s, self.f_s, self.f_carrier, self.label)
            == (other.t_s, other.f_s, other.f_carrier, other.label)
            and _same_optional_float(self.noise_floor_db, other.noise_floor_db)
        )

    __hash__ = None


def _same_optional_float(a: Optional[float], b: Optional[float]) -> bool:
    if a is None or b is None:
        return a is b
    return a == b or (math.isnan(a) and math.isnan(b))


class RecordMetadata(BaseModel):
    """JSON sidecar describing a binary channel payload."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    S: int
    Q: int
    t_s: float
    f_s: float
    f_carrier: float = 0.0
    noise_floor_db: Optional[float] = None
    label: str = ""
    format_version: int = settings.RECORD_FORMAT_VERSION


# ======================
# SYNTHESIS
# ======================
Knots = List[Tuple[float, float]]


def _check_knots(knots: Knots) -> Knots:
    if not knots:
        raise ValueError("trajectory needs at least one (time, value) knot")
    times = [t for t, _ in knots]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("trajectory knot times must be strictly increasing")
    return knots


class SpecularPath(BaseModel):
    """One specular component with piecewise-linear delay and Doppler trajectories.

    Trajectories are given as ``(time_s, value)`` knots and held constant
    outside the knot range.
    """

    gain: complex = 1.0 + 0.0j
    delay_knots: Knots = [(0.0, 0.0)]
    doppler_knots: Knots = [(0.0, 0.0)]

    @field_validator("gain", mode="before")
    @classmethod
    def _parse_gain(cls, value: Any) -> Any:
        # JSON scenario files write complex gains as [re, im]
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(float(value[0]), float(value[1]))
        return value

    @field_validator("delay_knots", "doppler_knots")
    @classmethod
    def _knots(cls, value: Knots) -> Knots:
        return _check_knots(value)

    @classmethod
    def constant(cls, gain: complex = 1.0, doppler: float = 0.0, delay: float = 0.0) -> "SpecularPath":
        return cls(gain=gain, delay_knots=[(0.0, delay)], doppler_knots=[(0.0, doppler)])

    def delay_at(self, t: np.ndarray) -> np.ndarray:
        times, values = zip(*self.delay_knots)
        return np.interp(t, times, values)

    def doppler_at(self, t: np.ndarray) -> np.ndarray:
        times, values = zip(*self.doppler_knots)
        return np.interp(t, times, values)


class WssusSpec(BaseModel):
    """Statistics of a stationary (WSSUS) tapped-delay-line channel."""

    doppler_shape: Literal["flat", "jakes"] = "flat"
    nu_max: float = Field(default=200.0, ge=0)
    delay_shape: Literal["exponential"] = "exponential"
    tau_rms: float = Field(default=20e-9, ge=0)
    num_taps: int = Field(default=8, ge=1)
    sinusoids: int = Field(default=settings.SOS_SINUSOIDS, ge=64)
    # Rician line-of-sight component; None keeps the channel Rayleigh
    k_factor_db: Optional[float] = None
    los_doppler: float = 0.0


class Segment(BaseModel):
    duration: Optional[float] = Field(default=None, gt=0)
    wssus: Optional[WssusSpec] = None
    paths: Optional[List[SpecularPath]] = None
    random_phase: bool = False

    @model_validator(mode="after")
    def _one_kind(self) -> "Segment":
        if (self.wssus is None) == (self.paths is None):
            raise ValueError("a segment holds exactly one of 'wssus' or 'paths'")
        if self.paths is not None and not self.paths:
            raise ValueError("'paths' must not be empty")
        return self

    @property
    def content(self):
        return self.wssus if self.wssus is not None else self.paths


class Scenario(BaseModel):
    """Scenario description file consumed by ``synth``."""

    S: int = Field(ge=1)
    Q: int = Field(ge=1)
    t_s: float = Field(gt=0)
    f_s: float = Field(gt=0)
    f_carrier: float = 60e9
    seed: int = 0
    snr_db: Optional[float] = None
    label: str = ""
    segments: List[Segment] = Field(min_length=1)


# ======================
# TAPERS
# ======================
class DpssSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    length: int
    half_bandwidth_product: float
    tapers: np.ndarray  # (K, length), unit energy rows
    concentrations: np.ndarray  # (K,), descending

    @property
    def count(self) -> int:
        return self.tapers.shape[0]


class TaperGrid(BaseModel):
    """IJ separable time-frequency windows, ``windows[i * J + j] = u_i ũ_j^T``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    windows: np.ndarray  # (I*J, N, M)
    time_count: int
    freq_count: int

    @property
    def n(self) -> int:
        return self.windows.shape[1]

    @property
    def m(self) -> int:
        return self.windows.shape[2]


# ======================
# LOCAL SCATTERING FUNCTION
# ======================
class RegionPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    delta_t: int = Field(ge=1)
    delta_f: int = Field(ge=1)
    k_t_count: int = Field(ge=1)
    k_f_count: int = Field(ge=1)

    def time_span(self, k_t: int) -> Tuple[int, int]:
        """1-based inclusive sample span of time region ``k_t`` (1-based)."""
        start = (k_t - 1) * self.delta_t + 1
        return start, start + self.n - 1

    def freq_span(self, k_f: int) -> Tuple[int, int]:
        """1-based inclusive sample span of frequency region ``k_f`` (1-based)."""
        start = (k_f - 1) * self.delta_f + 1
        return start, start + self.m - 1

    @property
    def covered_time_samples(self) -> int:
        return self.n + (self.k_t_count - 1) * self.delta_t

    @property
    def covered_freq_samples(self) -> int:
        return self.m + (self.k_f_count - 1) * self.delta_f


class LsfGrid(BaseModel):
    """K_t x K_f grid of N x M LSF estimates (Doppler bins x delay bins)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lsf: np.ndarray  # (K_t, K_f, N, M), nonnegative
    doppler_axis: np.ndarray  # (N,), Hz, centred
    delay_axis: np.ndarray  # (M,), seconds
    plan: RegionPlan
    t_s: float
    f_s: float
    taper_count: int = 1

    @property
    def region_energy(self) -> np.ndarray:
        return self.lsf.sum(axis=(2, 3))

    @property
    def defined(self) -> np.ndarray:
        return self.region_energy > 0


class CollinearityMatrix(BaseModel):
    """Pairwise LSF collinearity in one domain; undefined rows/cols are NaN."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray  # (K, K)
    domain: Literal["time", "frequency"]
    gamma_threshold: float = settings.GAMMA_THRESHOLD

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(np.diag(self.values))

    @property
    def undefined_indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(~self.defined)]


# ======================
# STATIONARITY
# ======================
class ExtentSeries(BaseModel):
    """Per-index stationarity extent with its run bookkeeping (0-based indices)."""

    extent: List[Optional[float]]
    run_length: List[int]
    run_start: List[Optional[int]]
    run_stop: List[Optional[int]]
    censored: List[bool]

    def defined_extents(self) -> List[float]:
        return [e for e in self.extent if e is not None]


_INTERVAL_RE = re.compile(r"^\s*[\(\[]?\s*([^,\)\]]+?)\s*,\s*([^,\)\]]+?)\s*[\)\]]?\s*$")


class DopplerInterval(BaseModel):
    """Open Doppler interval ``lo < ν < hi`` in Hz; infinite bounds allowed."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    lo: float = -math.inf
    hi: float = math.inf

    @model_validator(mode="after")
    def _ordered(self) -> "DopplerInterval":
        if not self.lo < self.hi:
            raise ValueError(f"empty Doppler interval ({self.lo}, {self.hi})")
        return self

    @classmethod
    def parse(cls, text: str) -> "DopplerInterval":
        """Parse ``"(-inf,-258)"``, ``"-inf,-258"`` or ``"[lo, hi]"``."""
        match = _INTERVAL_RE.match(text)
        if not match:
            raise ValueError(f"cannot parse Doppler interval {text!r}")
        return cls(lo=float(match.group(1)), hi=float(match.group(2)))

    def contains(self, nu: np.ndarray) -> np.ndarray:
        return (nu > self.lo) & (nu < self.hi)

    def __str__(self) -> str:
        return f"({self.lo:g},{self.hi:g})"


class TimeInterval(BaseModel):
    name: str
    start: float
    stop: float

    @model_validator(mode="after")
    def _ordered(self) -> "TimeInterval":
        if not self.start < self.stop:
            raise ValueError(f"interval '{self.name}' has start >= stop")
        return self


class AnalysisConfig(BaseModel):
    """Every knob of the analysis pipeline; echoed verbatim into reports."""

    model_config = ConfigDict(ser_json_inf_nan="constants", extra="forbid")

    input_path: Optional[str] = None
    output_dir: Optional[str] = None

    n: int = Field(default=settings.LSF_N, ge=1)
    m: int = Field(default=settings.LSF_M, ge=1)
    delta_t: int = Field(default=settings.LSF_DELTA_T, ge=1)
    delta_f: int = Field(default=settings.LSF_DELTA_F, ge=1)

    taper_a_t: float = Field(default=settings.TAPER_A_T, gt=0)
    taper_a_f: float = Field(default=settings.TAPER_A_F, gt=0)
    tapers_t: int = Field(default=settings.TAPERS_T, ge=1)
    tapers_f: int = Field(default=settings.TAPERS_F, ge=1)

    noise_margin_db: float = settings.NOISE_MARGIN_DB
    noise_guard_fraction: float = Field(default=settings.NOISE_GUARD_FRACTION, gt=0, le=1)
    estimate_noise_floor: bool = settings.ESTIMATE_NOISE_FLOOR
    noise_floor_db: Optional[float] = None

    gamma_threshold: float = Field(default=settings.GAMMA_THRESHOLD, gt=0, le=1)
    m_override: Optional[int] = Field(default=None, ge=1)

    mask_doppler: Optional[DopplerInterval] = None
    mask_block_len: int = Field(default=settings.MASK_BLOCK_LEN, ge=2)
    bandwidth_mhz: Optional[float] = Field(default=None, gt=0)

    intervals: List[TimeInterval] = []
    seed: Optional[int] = None
    workers: int = Field(default=settings.WORKERS, ge=1)
    export_lsf: bool = False

    @field_validator("mask_doppler", mode="before")
    @classmethod
    def _parse_mask(cls, value: Any) -> Any:
        if isinstance(value, str):
            return DopplerInterval.parse(value)
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return {"lo": value[0], "hi": value[1]}
        return value


class IntervalSummary(BaseModel):
    name: str
    start: float
    stop: float
    count: int
    censored_count: int
    mean_t_stat: Optional[float] = None
    min_t_stat: Optional[float] = None


class CoherenceSummary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    max_tau_rms: Optional[float] = None
    max_nu_rms: Optional[float] = None
    t_c_min: Optional[float] = None
    f_c_min: Optional[float] = None


class StationarityReport(BaseModel):
    """Stationarity bandwidth/time series, summaries and the config echo."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    format_version: int = 1
    label: str = ""

    # frequency pass (seed plan)
    f_stat: List[Optional[float]]
    f_run_length: List[int]
    f_run_start: List[Optional[int]]
    f_run_stop: List[Optional[int]]
    f_censored: List[bool]
    region_start_freqs: List[float]

    # time pass (updated plan)
    t_stat: List[Optional[float]]
    t_run_length: List[int]
    t_run_start: List[Optional[int]]
    t_run_stop: List[Optional[int]]
    t_censored: List[bool]
    region_start_times: List[float]

    mean_t_stat: Optional[float] = None
    min_f_stat: Optional[float] = None
    intervals: List[IntervalSummary] = []
    undefined_indices: Dict[str, List[int]] = {"time": [], "frequency": []}

    n: int
    m_seed: int
    m_updated: int
    k_t_count: int
    k_f_count_seed: int
    k_f_count: int
    analyzed_bandwidth: float
    noise_floor_db: Optional[float] = None
    coherence: CoherenceSummary = CoherenceSummary()

    config: Dict[str, Any] = {}
