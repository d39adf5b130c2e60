"""Synthetic easy/hard frame generation, dataset splitting, and WAV ingestion.

Easy frames are low-amplitude noise (sometimes with a faint tone); hard
frames are sums of strong sinusoids. The difficulty tag exists purely for
evaluation: no training code ever reads it. Generation is a pure function of
(spec, index): every frame draws from its own generator seeded by
(seed, stream, index), so parallel generation and regeneration agree bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, FormatError

EASY = "easy"
HARD = "hard"

_EASY_STREAM = 0
_HARD_STREAM = 1
_SPLIT_STREAM = 2

#: Sample rate written into generated WAV files.
WAV_RATE = 16000


@dataclass
class Frame:
    samples: np.ndarray  # float64 in [-1, 1]
    difficulty: str | None
    source_id: str


@dataclass
class SignalSpec:
    frame_len: int = 64
    easy_noise_amp: float = 0.02
    hard_components: int = 3
    hard_freq_range: tuple[float, float] = (0.02, 0.45)  # cycles per sample
    hard_amp_range: tuple[float, float] = (0.2, 0.9)
    seed: int = 0

    def __post_init__(self):
        if self.frame_len <= 0:
            raise ConfigError(f"frame_len must be positive, got {self.frame_len}")
        if self.easy_noise_amp < 0:
            raise ConfigError(f"easy_noise_amp must be >= 0, got {self.easy_noise_amp}")
        if self.hard_components < 0:
            raise ConfigError(f"hard_components must be >= 0, got {self.hard_components}")


def _frame_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream, index))))


def gen_easy(spec: SignalSpec, n: int) -> list[Frame]:
    """Noise frames at easy_noise_amp, 30% of them with one faint tone."""
    frames = []
    t = np.arange(spec.frame_len)
    for i in range(n):
        rng = _frame_rng(spec.seed, _EASY_STREAM, i)
        samples = rng.normal(0.0, spec.easy_noise_amp, spec.frame_len)
        if rng.uniform() < 0.3:
            freq = rng.uniform(*spec.hard_freq_range)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.01, 0.05)
            samples = samples + amp * np.sin(2.0 * np.pi * freq * t + phase)
        samples = np.clip(samples, -1.0, 1.0)
        frames.append(Frame(samples, EASY, f"easy:{i}"))
    return frames


def gen_hard(spec: SignalSpec, n: int) -> list[Frame]:
    """Sums of hard_components strong sinusoids plus noise, peak-normalized."""
    frames = []
    t = np.arange(spec.frame_len)
    for i in range(n):
        rng = _frame_rng(spec.seed, _HARD_STREAM, i)
        samples = rng.normal(0.0, spec.easy_noise_amp, spec.frame_len)
        for _ in range(spec.hard_components):
            freq = rng.uniform(*spec.hard_freq_range)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(*spec.hard_amp_range)
            samples = samples + amp * np.sin(2.0 * np.pi * freq * t + phase)
        peak = np.max(np.abs(samples))
        if peak > 1.0:
            samples = samples / peak
        frames.append(Frame(samples, HARD, f"hard:{i}"))
    return frames


@dataclass
class Dataset:
    train: list[Frame] = field(default_factory=list)
    calibrate: list[Frame] = field(default_factory=list)
    test: list[Frame] = field(default_factory=list)

    def split_sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.calibrate), len(self.test)


def split(frames: list[Frame], ratios: tuple[float, float, float], seed: int) -> Dataset:
    """Deterministic stratified partition into train/calibrate/test.

    Frames are grouped by difficulty and each group is shuffled and cut by
    the same ratios, so the difficulty mix of every split matches the global
    mix to within one frame per group.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be non-negative and sum to 1, got {ratios}")

    groups: dict[str, list[Frame]] = {}
    for frame in frames:
        groups.setdefault(str(frame.difficulty), []).append(frame)

    ds = Dataset()
    for gi, name in enumerate(sorted(groups)):
        group = groups[name]
        rng = _frame_rng(seed, _SPLIT_STREAM, gi)
        order = rng.permutation(len(group))
        n = len(group)
        cut1 = round(n * ratios[0])
        cut2 = round(n * (ratios[0] + ratios[1]))
        ds.train.extend(group[k] for k in order[:cut1])
        ds.calibrate.extend(group[k] for k in order[cut1:cut2])
        ds.test.extend(group[k] for k in order[cut2:])
    return ds


def frames_to_matrix(frames: list[Frame]) -> np.ndarray:
    if not frames:
        raise ContractError("frames_to_matrix: empty frame list")
    return np.stack([f.samples for f in frames])


# --- 16-bit PCM mono WAV ---------------------------------------------------


def _read_exact(buf: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(buf):
        raise FormatError(f"wav: truncated while reading {what}")
    return buf[offset:offset + count]


def load_wav(path, frame_len: int = 64) -> list[Frame]:
    """Parses a RIFF/WAVE file (PCM, mono, 16-bit) into consecutive frames.

    Samples are scaled by 1/32768 into [-1, 1); a trailing remainder shorter
    than frame_len is dropped. Loaded frames carry the hard tag since real
    data is unlabeled. Anything but format code 1 / 1 channel / 16 bits is
    rejected with the offending header field named.
    """
    with open(path, "rb") as fh:
        buf = fh.read()

    if _read_exact(buf, 0, 4, "chunk id") != b"RIFF":
        raise FormatError(f"wav: chunk id is {buf[:4]!r}, expected b'RIFF'")
    if _read_exact(buf, 8, 4, "format id") != b"WAVE":
        raise FormatError(f"wav: format id is {buf[8:12]!r}, expected b'WAVE'")

    fmt_seen = False
    data = None
    offset = 12
    while offset + 8 <= len(buf):
        cid = buf[offset:offset + 4]
        (size,) = struct.unpack_from("<I", buf, offset + 4)
        body = _read_exact(buf, offset + 8, size, f"{cid!r} chunk body")
        if cid == b"fmt ":
            if size < 16:
                raise FormatError(f"wav: fmt chunk size {size} is too small")
            audio_format, channels, _rate, _byte_rate, _align, bits = struct.unpack_from(
                "<HHIIHH", body, 0
            )
            if audio_format != 1:
                raise FormatError(f"wav: audio format code is {audio_format}, expected 1 (PCM)")
            if channels != 1:
                raise FormatError(f"wav: channel count is {channels}, expected 1 (mono)")
            if bits != 16:
                raise FormatError(f"wav: bits per sample is {bits}, expected 16")
            fmt_seen = True
        elif cid == b"data":
            if not fmt_seen:
                raise FormatError("wav: data chunk appears before fmt chunk")
            data = body
            break
        # unknown chunks are skipped; chunk bodies are word-aligned
        offset += 8 + size + (size & 1)

    if not fmt_seen:
        raise FormatError("wav: missing fmt chunk")
    if data is None:
        raise FormatError("wav: missing data chunk")

    raw = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2")
    samples = raw.astype(np.float64) / 32768.0
    n_frames = len(samples) // frame_len
    name = getattr(path, "name", str(path))
    return [
        Frame(samples[k * frame_len:(k + 1) * frame_len].copy(), HARD, f"{name}:{k}")
        for k in range(n_frames)
    ]


def write_wav(path, samples: np.ndarray) -> None:
    """Writes mono 16-bit PCM; values are clipped then scaled by 32768."""
    q = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767)
    pcm = q.astype("<i2").tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 36 + len(pcm)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(struct.pack("<IHHIIHH", 16, 1, 1, WAV_RATE, WAV_RATE * 2, 2, 16))
        fh.write(b"data")
        fh.write(struct.pack("<I", len(pcm)))
        fh.write(pcm)
