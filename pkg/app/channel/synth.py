# app/channel/synth.py
"""Synthetic channel records with known stationarity structure."""

import math
import re
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.channel.errors import AliasingError, DurationMismatchError
from app.channel.schema import ChannelRecord, Scenario, Segment, SpecularPath, WssusSpec
from utils.logger import logger

Dims = Tuple[int, int]
Sampling = Tuple[float, float]
SegmentLike = Union[Segment, Tuple[Union[WssusSpec, Sequence[SpecularPath]], float]]

_BOUNDARY_RE = re.compile(r"segments@([0-9eE+\-.,]*)s\b")


# ======================
# DOPPLER SHAPES
# ======================
class DopplerShape(ABC):
    @abstractmethod
    def frequencies(self, nu_max: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Sinusoid Doppler frequencies (Hz) realising this spectrum shape."""


class FlatDoppler(DopplerShape):
    def frequencies(self, nu_max: float, count: int, rng: np.random.Generator) -> np.ndarray:
        # one uniform draw per stratum of [-nu_max, nu_max]
        offsets = rng.uniform(0.0, 1.0, count)
        return nu_max * (2.0 * (np.arange(count) + offsets) / count - 1.0)


class JakesDoppler(DopplerShape):
    def frequencies(self, nu_max: float, count: int, rng: np.random.Generator) -> np.ndarray:
        offsets = rng.uniform(0.0, 1.0, count)
        angles = 2.0 * np.pi * (np.arange(count) + offsets) / count
        return nu_max * np.cos(angles)


DOPPLER_SHAPES: Dict[str, DopplerShape] = {"flat": FlatDoppler(), "jakes": JakesDoppler()}


# ======================
# HELPERS
# ======================
def _sample_times(s: int, t_s: float) -> np.ndarray:
    return np.arange(s) * t_s


def _check_doppler(nu: np.ndarray, t_s: float, what: str):
    limit = 1.0 / (2.0 * t_s)
    worst = float(np.max(np.abs(nu))) if np.size(nu) else 0.0
    if worst >= limit:
        raise AliasingError(f"doppler alias: {what} reaches |ν|={worst:g} Hz, limit {limit:g} Hz")


def _check_delay(tau: np.ndarray, f_s: float, what: str):
    limit = 1.0 / f_s
    if np.any(tau < 0) or np.any(tau >= limit):
        raise AliasingError(
            f"delay alias: {what} spans [{float(np.min(tau)):g}, {float(np.max(tau)):g}] s, "
            f"allowed [0, {limit:g}) s"
        )


def _record(data: np.ndarray, sampling: Sampling, label: str) -> ChannelRecord:
    t_s, f_s = sampling
    return ChannelRecord(data=data, t_s=t_s, f_s=f_s, label=label)


# ======================
# GENERATORS
# ======================
def gen_specular(
    paths: Sequence[SpecularPath],
    dims: Dims,
    sampling: Sampling,
    seed: int = 0,
    random_phase: bool = False,
) -> ChannelRecord:
    """H[s,q] = Σ_p g_p exp(j2π ν_p(t) t) exp(-j2π q f_s τ_p(t)), t = s t_s.

    ``seed`` only matters when ``random_phase`` rotates every gain by a
    uniform random phase.
    """
    s_count, q_count = dims
    t_s, f_s = sampling
    t = _sample_times(s_count, t_s)
    q = np.arange(q_count)

    phases = np.zeros(len(paths))
    if random_phase:
        phases = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, len(paths))

    data = np.zeros((s_count, q_count), dtype=np.complex128)
    for index, path in enumerate(paths):
        nu = path.doppler_at(t)
        tau = path.delay_at(t)
        _check_doppler(nu, t_s, f"path {index}")
        _check_delay(tau, f_s, f"path {index}")
        gain = path.gain * np.exp(1j * phases[index])
        data += (
            gain
            * np.exp(2j * np.pi * nu * t)[:, None]
            * np.exp(-2j * np.pi * f_s * q[None, :] * tau[:, None])
        )

    return _record(data, sampling, f"specular paths={len(paths)}")


def tap_profile(spec: WssusSpec, f_s: float) -> Tuple[np.ndarray, np.ndarray]:
    """Tap delays (s) and normalised powers of the exponential delay profile."""
    if spec.num_taps == 1 or spec.tau_rms == 0:
        return np.zeros(1), np.ones(1)
    span = min(5.0 * spec.tau_rms, 1.0 / f_s)
    delays = np.linspace(0.0, span, spec.num_taps, endpoint=False)
    powers = np.exp(-delays / spec.tau_rms)
    return delays, powers / powers.sum()


def gen_wssus(spec: WssusSpec, dims: Dims, sampling: Sampling, seed: int = 0) -> ChannelRecord:
    """Sum-of-sinusoids tapped delay line with shift-invariant second-order statistics.

    Each tap draws its sinusoid frequencies and phases from its own seeded
    substream, so the realisation does not depend on evaluation order.
    """
    s_count, q_count = dims
    t_s, f_s = sampling

    _check_doppler(np.array([spec.nu_max, spec.los_doppler]), t_s, "wssus spec")
    if spec.tau_rms >= 1.0 / (4.0 * f_s):
        raise AliasingError(
            f"delay alias: tau_rms={spec.tau_rms:g} s must stay below 1/(4 f_s)={1.0 / (4.0 * f_s):g} s"
        )

    t = _sample_times(s_count, t_s)
    delays, powers = tap_profile(spec, f_s)
    shape = DOPPLER_SHAPES[spec.doppler_shape]
    streams = np.random.SeedSequence(seed).spawn(len(delays))

    taps = np.empty((s_count, len(delays)), dtype=np.complex128)
    for k, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        nu = shape.frequencies(spec.nu_max, spec.sinusoids, rng)
        phi = rng.uniform(0.0, 2.0 * np.pi, spec.sinusoids)
        taps[:, k] = np.sqrt(powers[k] / spec.sinusoids) * np.exp(
            1j * (2.0 * np.pi * np.outer(t, nu) + phi[None, :])
        ).sum(axis=1)

    steering = np.exp(-2j * np.pi * f_s * np.outer(delays, np.arange(q_count)))
    data = taps @ steering

    if spec.k_factor_db is not None:
        k_lin = 10.0 ** (spec.k_factor_db / 10.0)
        data = data / np.sqrt(k_lin + 1.0)
        data = data + np.sqrt(k_lin / (k_lin + 1.0)) * np.exp(2j * np.pi * spec.los_doppler * t)[:, None]

    label = f"wssus {spec.doppler_shape} nu_max={spec.nu_max:g}Hz tau_rms={spec.tau_rms:g}s taps={len(delays)}"
    if spec.k_factor_db is not None:
        label += f" K={spec.k_factor_db:g}dB"
    return _record(data, sampling, label)


def _as_segment(item: SegmentLike) -> Segment:
    if isinstance(item, Segment):
        return item
    content, duration = item
    if isinstance(content, WssusSpec):
        return Segment(duration=duration, wssus=content)
    return Segment(duration=duration, paths=list(content))


def _realise(segment: Segment, dims: Dims, sampling: Sampling, seed: int) -> ChannelRecord:
    content = segment.content
    if isinstance(content, WssusSpec):
        return gen_wssus(content, dims, sampling, seed)
    return gen_specular(content, dims, sampling, seed, segment.random_phase)


def gen_piecewise(
    segments: Sequence[SegmentLike], dims: Dims, sampling: Sampling, seed: int = 0
) -> ChannelRecord:
    """Concatenate independent segment realisations in time.

    Segment ``i`` is realised with seed ``seed + i`` on its own local time
    axis; statistics switch abruptly at the boundaries, which are written
    into the label (see :func:`segment_boundaries`).
    """
    parts = [_as_segment(item) for item in segments]
    s_count, q_count = dims
    t_s, _ = sampling

    if len(parts) == 1:
        only = parts[0]
        if only.duration is not None and round(only.duration / t_s) != s_count:
            raise DurationMismatchError(
                f"segment duration {only.duration:g} s != record duration {s_count * t_s:g} s"
            )
        return _realise(only, dims, sampling, seed)

    if any(p.duration is None for p in parts):
        raise DurationMismatchError("every segment of a piecewise record needs a duration")
    counts = [int(round(p.duration / t_s)) for p in parts]
    if sum(counts) != s_count or any(c < 1 for c in counts):
        raise DurationMismatchError(
            f"segment durations {[p.duration for p in parts]} give {sum(counts)} samples, record has {s_count}"
        )

    blocks = [
        _realise(part, (count, q_count), sampling, seed + i).data
        for i, (part, count) in enumerate(zip(parts, counts))
    ]
    boundaries = np.cumsum(counts)[:-1] * t_s
    label = "piecewise segments@" + ",".join(f"{b:.9g}" for b in boundaries) + "s"
    logger.debug(f"Piecewise record: {len(parts)} segments, boundaries {boundaries.tolist()} s")
    return _record(np.vstack(blocks), sampling, label)


def segment_boundaries(label: str) -> List[float]:
    """Segment boundary times (s) recorded by :func:`gen_piecewise`."""
    match = _BOUNDARY_RE.search(label)
    if not match or not match.group(1):
        return []
    return [float(v) for v in match.group(1).split(",")]


def add_noise(record: ChannelRecord, snr_db: Optional[float], seed: int = 0) -> ChannelRecord:
    """Add circular white Gaussian noise at ``snr_db`` relative to mean signal power.

    ``None`` or ``+inf`` leaves the record untouched.
    """
    if snr_db is None or snr_db == math.inf:
        return record

    signal_power = float(np.mean(np.abs(record.data) ** 2))
    noise_power = signal_power * 10.0 ** (-snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = np.sqrt(noise_power / 2.0) * (
        rng.standard_normal(record.data.shape) + 1j * rng.standard_normal(record.data.shape)
    )
    floor_db = 10.0 * math.log10(noise_power) if noise_power > 0 else -math.inf
    logger.debug(f"Adding noise: SNR {snr_db:g} dB, floor {floor_db:.2f} dB")
    return ChannelRecord(
        data=record.data + noise,
        t_s=record.t_s,
        f_s=record.f_s,
        f_carrier=record.f_carrier,
        noise_floor_db=floor_db,
        label=f"{record.label} | awgn snr={snr_db:g}dB",
    )


def build_scenario(scenario: Scenario) -> ChannelRecord:
    """Realise a scenario description (the JSON consumed by ``synth``)."""
    dims = (scenario.S, scenario.Q)
    sampling = (scenario.t_s, scenario.f_s)
    record = gen_piecewise(scenario.segments, dims, sampling, scenario.seed)
    label = f"{scenario.label} | {record.label}" if scenario.label else record.label
    record = record.model_copy(update={"f_carrier": scenario.f_carrier, "label": label})
    # noise substream kept apart from the segment seeds
    return add_noise(record, scenario.snr_db, seed=scenario.seed + len(scenario.segments))
