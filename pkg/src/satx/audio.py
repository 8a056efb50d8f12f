"""Apply transcoding matrices to multichannel WAV files.

Reads RIFF WAV with 16/24/32-bit PCM or 32-bit IEEE float samples,
mixes blockwise with float64 accumulation, and writes 32-bit float WAV.
No dithering; samples beyond full scale are counted, not clipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import AudioError

BLOCK_FRAMES = 65536


def read_wav(path):
    """Load a WAV file as float64 in [-1, 1); returns (rate, frames x channels)."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise AudioError(f"no such audio file: {path}")
    except ValueError as exc:
        raise AudioError(f"unsupported WAV file {path}: {exc}") from exc
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        scaled = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        scaled = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.float32:
        scaled = data.astype(np.float64)
    else:
        raise AudioError(
            f"unsupported sample format {data.dtype}; expected 16/24/32-bit "
            "PCM or 32-bit float"
        )
    return int(rate), scaled


def write_wav_float32(path, rate: int, data: np.ndarray) -> None:
    out = np.asarray(data, dtype=np.float32)
    if out.ndim != 2:
        raise AudioError("audio data must be frames x channels")
    wavfile.write(path, int(rate), out)


@dataclass(frozen=True)
class ApplyResult:
    frames: int
    in_channels: int
    out_channels: int
    clipped_samples: int
    sample_rate: int


def apply_matrix_to_audio(matrix, in_path, out_path,
                          block_frames: int = BLOCK_FRAMES) -> ApplyResult:
    """out[t, n] = sum_m matrix[n, m] * in[t, m], blockwise."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise AudioError("transcoding matrix must be 2-D")
    n_out, n_in = matrix.shape
    rate, data = read_wav(in_path)
    if data.shape[1] != n_in:
        raise AudioError(
            f"audio has {data.shape[1]} channels but the matrix consumes {n_in}"
        )
    frames = data.shape[0]
    out = np.empty((frames, n_out), dtype=np.float32)
    clipped = 0
    for start in range(0, frames, block_frames):
        block = data[start:start + block_frames]
        mixed = block @ matrix.T
        clipped += int((np.abs(mixed) > 1.0).sum())
        out[start:start + block_frames] = mixed.astype(np.float32)
    write_wav_float32(out_path, rate, out)
    return ApplyResult(
        frames=frames,
        in_channels=n_in,
        out_channels=n_out,
        clipped_samples=clipped,
        sample_rate=rate,
    )
