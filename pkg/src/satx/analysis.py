"""Per-direction physical and psychoacoustic quantities of a decoding.

Everything is derived from the speaker matrix: the per-direction gains
each loudspeaker receives when reproducing a unit virtual source.  The
coherent quantities (pressure, velocity vector) describe summed-amplitude
behaviour; the incoherent ones (energy, energy vector) describe
summed-power behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .geometry import PointCloud, SpeakerLayout

COHERENT = "coherent"
INCOHERENT = "incoherent"

PRESSURE_GUARD = 1e-9
ENERGY_GUARD = 1e-18

METRIC_COLUMNS = (
    "azimuth", "elevation", "weight",
    "pressure", "velocity_radial", "velocity_transverse",
    "energy", "intensity_radial", "intensity_transverse",
    "asw_deg", "angular_error_deg", "level_db",
)


@dataclass(frozen=True)
class TranscodingMatrix:
    """Linear map from M input-format channels to N output channels."""

    entries: np.ndarray
    input_labels: tuple = ()
    output_labels: tuple = ()

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise DimensionError("transcoding matrix must be 2-D")
        if not np.all(np.isfinite(entries)):
            raise DimensionError("transcoding matrix entries must be finite")
        n, m = entries.shape
        in_labels = tuple(self.input_labels) or tuple(f"in{i}" for i in range(m))
        out_labels = tuple(self.output_labels) or tuple(f"out{i}" for i in range(n))
        if len(in_labels) != m or len(out_labels) != n:
            raise DimensionError("label counts must match the matrix shape")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "input_labels", in_labels)
        object.__setattr__(self, "output_labels", out_labels)

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class SpeakerMatrix:
    """Loudspeaker gains for each sampled direction (L x P)."""

    entries: np.ndarray
    cloud: PointCloud
    layout: SpeakerLayout

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (len(self.cloud), len(self.layout)):
            raise DimensionError(
                f"speaker matrix shape {entries.shape} does not match "
                f"{len(self.cloud)} directions x {len(self.layout)} speakers"
            )
        if not np.all(np.isfinite(entries)):
            raise DimensionError("speaker matrix entries must be finite")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)


def speaker_matrix(g, t, d_spk) -> SpeakerMatrix:
    """Chain the encoding, transcoding, and decoding matrices (L x P).

    Row l holds the loudspeaker gains produced by a unit virtual source at
    cloud direction l.
    """
    gm = g.entries
    tm = t.entries if isinstance(t, TranscodingMatrix) else np.asarray(t, float)
    dm = d_spk.entries
    if gm.shape[1] != tm.shape[1]:
        raise DimensionError(
            f"encoding has {gm.shape[1]} channels but transcoder consumes "
            f"{tm.shape[1]}"
        )
    if dm.shape[1] != tm.shape[0]:
        raise DimensionError(
            f"decoder consumes {dm.shape[1]} channels but transcoder "
            f"produces {tm.shape[0]}"
        )
    return SpeakerMatrix(gm @ tm.T @ dm.T, g.cloud, d_spk.layout)


def guard_pressure(p: np.ndarray) -> np.ndarray:
    """Clamp pressure magnitudes away from zero, keeping the sign.

    The sign of +-0.0 resolves to +1 so the guard never returns zero.
    """
    return np.copysign(np.maximum(np.abs(p), PRESSURE_GUARD), p)


def guard_energy(e: np.ndarray) -> np.ndarray:
    return np.maximum(e, ENERGY_GUARD)


def coherent_metrics(s: SpeakerMatrix):
    """Pressure and radial/transverse velocity per direction."""
    m = s.entries
    u = s.layout.unit_vectors()
    v = s.cloud.unit_vectors()
    pressure = m.sum(axis=1)
    vel = (m @ u) / guard_pressure(pressure)[:, None]
    radial = np.einsum("lk,lk->l", vel, v)
    transverse = np.linalg.norm(np.cross(vel, v), axis=1)
    return pressure, radial, transverse


def incoherent_metrics(s: SpeakerMatrix):
    """Energy and radial/transverse energy-vector components per direction."""
    m2 = s.entries**2
    u = s.layout.unit_vectors()
    v = s.cloud.unit_vectors()
    energy = m2.sum(axis=1)
    ivec = (m2 @ u) / guard_energy(energy)[:, None]
    radial = np.einsum("lk,lk->l", ivec, v)
    transverse = np.linalg.norm(np.cross(ivec, v), axis=1)
    return energy, radial, transverse


def perceptual_metrics(radial, transverse, magnitude, mode: str):
    """Source width, angular error, and level from vector components.

    ``magnitude`` is the energy in incoherent mode and the pressure in
    coherent mode; the level follows the same convention (10 log10 E or
    20 log10 |P|).
    """
    radial = np.asarray(radial, dtype=float)
    transverse = np.asarray(transverse, dtype=float)
    vec_norm = np.sqrt(radial**2 + transverse**2)
    asw = 0.75 * np.degrees(np.arccos(np.clip(vec_norm, -1.0, 1.0)))
    err = np.degrees(np.arctan2(transverse, radial))
    mag = np.asarray(magnitude, dtype=float)
    if mode == INCOHERENT:
        level = 10.0 * np.log10(guard_energy(mag))
    elif mode == COHERENT:
        level = 20.0 * np.log10(np.maximum(np.abs(mag), PRESSURE_GUARD))
    else:
        raise DimensionError(f"unknown analysis mode {mode!r}")
    return asw, err, level


@dataclass(frozen=True)
class DirectionMetrics:
    """All per-direction quantities for one speaker matrix."""

    cloud: PointCloud
    pressure: np.ndarray
    velocity_radial: np.ndarray
    velocity_transverse: np.ndarray
    energy: np.ndarray
    intensity_radial: np.ndarray
    intensity_transverse: np.ndarray
    asw_deg: np.ndarray
    angular_error_deg: np.ndarray
    level_db: np.ndarray
    mode: str

    def column(self, name: str) -> np.ndarray:
        if name == "azimuth":
            return np.array([d.azimuth for d in self.cloud.directions])
        if name == "elevation":
            return np.array([d.elevation for d in self.cloud.directions])
        if name == "weight":
            return self.cloud.weights
        return getattr(self, name)

    def table(self) -> np.ndarray:
        return np.column_stack([self.column(c) for c in METRIC_COLUMNS])


def direction_metrics(s: SpeakerMatrix, mode: str = INCOHERENT) -> DirectionMetrics:
    """Compute every metric; width/error/level use the requested mode."""
    pressure, vr, vt = coherent_metrics(s)
    energy, ir, it = incoherent_metrics(s)
    if mode == COHERENT:
        asw, err, level = perceptual_metrics(vr, vt, pressure, mode)
    else:
        asw, err, level = perceptual_metrics(ir, it, energy, mode)
    return DirectionMetrics(
        cloud=s.cloud,
        pressure=pressure,
        velocity_radial=vr,
        velocity_transverse=vt,
        energy=energy,
        intensity_radial=ir,
        intensity_transverse=it,
        asw_deg=asw,
        angular_error_deg=err,
        level_db=level,
        mode=mode,
    )


def summarize(values, weights=None) -> dict:
    """Five-number box-plot summary with Tukey whiskers.

    Quantiles use linear interpolation; whiskers sit on the most extreme
    points within 1.5 IQR of the quartiles.  Weights are carried along in
    reports but do not enter the quantiles.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DimensionError("cannot summarize an empty series")
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    return {
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "whisker_low": float(values[values >= lo_fence].min()),
        "whisker_high": float(values[values <= hi_fence].max()),
    }
