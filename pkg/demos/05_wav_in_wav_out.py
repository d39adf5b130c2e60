"""Round-trip real audio framing: write 16-bit PCM WAV, read it back.

The loader is strict: RIFF/WAVE, PCM format code 1, mono, 16 bits, and it
names the offending header field on anything else. Frames come back scaled
into [-1, 1) and chopped into fixed non-overlapping windows.
"""

import tempfile
from pathlib import Path

import numpy as np

from switchpass import data as dat

spec = dat.SignalSpec(seed=42)
frames = dat.gen_hard(spec, 8)
samples = np.concatenate([f.samples for f in frames])

tmp = Path(tempfile.mkdtemp())
path = tmp / "tones.wav"
dat.write_wav(path, samples)
print(f"wrote {path} ({path.stat().st_size} bytes, "
      f"{len(samples)} samples at {dat.WAV_RATE} Hz)")

loaded = dat.load_wav(path, frame_len=spec.frame_len)
print(f"loaded {len(loaded)} frames of {spec.frame_len} samples, "
      f"difficulty tag: {loaded[0].difficulty!r} (real data is unlabeled)")

quantized = np.clip(np.round(samples * 32768.0), -32768, 32767) / 32768.0
got = np.concatenate([f.samples for f in loaded])
print("bit-exact at 16-bit quantization:", bool(np.array_equal(got, quantized)))

# The strictness in action: stereo is refused by name.
import struct

bad = tmp / "stereo.wav"
pcm = struct.pack("<8h", *([0] * 8))
body = b"WAVE"
body += b"fmt " + struct.pack("<I", 16) + struct.pack("<HHIIHH", 1, 2, 16000, 64000, 4, 16)
body += b"data" + struct.pack("<I", len(pcm)) + pcm
bad.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
try:
    dat.load_wav(bad)
except Exception as exc:
    print(f"stereo file rejected: {exc}")
