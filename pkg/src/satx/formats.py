"""Input/output format characterization matrices.

Builds the encoding matrix (how sampled virtual sources map into the
input format's channels) and the decoding-to-speaker matrix (how the
output format's channels map onto a real or virtual loudspeaker layout),
plus channel-remapping baseline transcoders.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import lpmv

from . import geometry
from .errors import CoverageError, DimensionError, GeometryError
from .geometry import Direction, PointCloud, SpeakerLayout

SN3D = "SN3D"
N3D = "N3D"


# ---------------------------------------------------------------------------
# Real spherical harmonics (ACN channel ordering)


def sh_matrix(directions: Sequence[Direction], order: int,
              normalization: str = SN3D) -> np.ndarray:
    """Real spherical harmonics evaluated at each direction.

    Returns a (len(directions), (order+1)**2) matrix in ACN channel order
    (index n*(n+1)+m).  SN3D and N3D normalizations are supported; the
    degree-0 channel is 1 under both.  No Condon-Shortley phase.
    """
    if order < 0 or order > 9:
        raise DimensionError(f"ambisonics order {order} outside [0, 9]")
    if normalization not in (SN3D, N3D):
        raise DimensionError(f"unknown normalization {normalization!r}")
    dirs = list(directions)
    az = np.radians([d.azimuth for d in dirs])
    sin_el = np.sin(np.radians([d.elevation for d in dirs]))
    out = np.empty((len(dirs), (order + 1) ** 2))
    for n in range(order + 1):
        for m in range(n + 1):
            # strip the Condon-Shortley phase baked into lpmv
            leg = (-1.0) ** m * lpmv(m, n, sin_el)
            norm = math.sqrt(
                (2.0 if m > 0 else 1.0)
                * math.factorial(n - m)
                / math.factorial(n + m)
            )
            if normalization == N3D:
                norm *= math.sqrt(2 * n + 1)
            out[:, n * (n + 1) + m] = norm * leg * np.cos(m * az)
            if m > 0:
                out[:, n * (n + 1) - m] = norm * leg * np.sin(m * az)
    return out


def acn_labels(order: int) -> tuple:
    return tuple(f"ACN{i}" for i in range((order + 1) ** 2))


# ---------------------------------------------------------------------------
# Amplitude / intensity panning


class _Panner:
    """Shared candidate-face search for VBAP and VBIP gains."""

    def __init__(self, layout: SpeakerLayout):
        self.layout = layout
        self.faces = geometry.triangulate_hull(layout)
        self.is_2d = geometry.is_horizontal_layout(layout)
        vecs = layout.unit_vectors()
        self._bases = []
        for face in self.faces:
            if self.is_2d:
                m = vecs[list(face), :2].T  # columns are speaker vectors
            else:
                m = vecs[list(face), :].T
            if abs(np.linalg.det(m)) < 1e-12:
                self._bases.append(None)  # face coplanar with the origin
            else:
                self._bases.append(np.linalg.inv(m))
        self._vecs = vecs

    def raw_gains(self, d: Direction):
        """First face (lowest index) whose solve is nonnegative.

        Returns (face, gains) with gains solving v = sum g * u, before any
        normalization.  Raises CoverageError when no face accepts.
        """
        v = geometry.to_unit_vector(d)
        if self.is_2d:
            v2 = v[:2]
            norm = np.linalg.norm(v2)
            if norm < 1e-12:
                raise CoverageError(
                    f"direction az={d.azimuth:.2f} el={d.elevation:.2f} has no "
                    "horizontal component; 2D layout cannot pan it"
                )
            v = v2 / norm
        best = None
        for face, base in zip(self.faces, self._bases):
            if base is None:
                continue
            g = base @ v
            worst = g.min()
            if worst >= -1e-9:
                return face, g
            if best is None or worst > best[0]:
                best = (worst, face, g)
        # report the nearest covered direction from the least-bad face
        _, face, g = best
        g = np.clip(g, 0.0, None)
        if self.is_2d:
            approx = self._vecs[list(face), :2].T @ g
            near = geometry.from_unit_vector((approx[0], approx[1], 0.0))
        else:
            near = geometry.from_unit_vector(self._vecs[list(face), :].T @ g)
        raise CoverageError(
            f"direction az={d.azimuth:.3f} el={d.elevation:.3f} is outside "
            f"the panning hull; nearest covered direction is "
            f"az={near.azimuth:.3f} el={near.elevation:.3f}"
        )


_PANNER_CACHE: dict = {}


def _panner(layout: SpeakerLayout) -> _Panner:
    key = id(layout)
    panner = _PANNER_CACHE.get(key)
    if panner is None or panner.layout is not layout:
        panner = _Panner(layout)
        _PANNER_CACHE[key] = panner
        if len(_PANNER_CACHE) > 32:
            _PANNER_CACHE.pop(next(iter(_PANNER_CACHE)))
    return panner


def vbap_gains(layout: SpeakerLayout, d: Direction) -> np.ndarray:
    """Vector-base amplitude panning gains, energy-normalized (sum g^2 = 1)."""
    panner = _panner(layout)
    face, g = panner.raw_gains(d)
    out = np.zeros(len(layout))
    out[list(face)] = np.clip(g, 0.0, None)
    return out / np.linalg.norm(out)


def vbip_gains(layout: SpeakerLayout, d: Direction) -> np.ndarray:
    """Vector-base intensity panning: the energy vector aligns with d."""
    panner = _panner(layout)
    face, g = panner.raw_gains(d)
    q = np.clip(g, 0.0, None)
    q /= q.sum()
    out = np.zeros(len(layout))
    out[list(face)] = np.sqrt(q)
    return out


def vbap_matrix(layout: SpeakerLayout, directions: Sequence[Direction]) -> np.ndarray:
    return np.array([vbap_gains(layout, d) for d in directions])


# ---------------------------------------------------------------------------
# Format specifications


@dataclass(frozen=True)
class AmbisonicsSpec:
    """Scene-based format: real spherical harmonics, ACN ordering."""

    order: int
    normalization: str = SN3D

    def __post_init__(self):
        if not (0 <= int(self.order) <= 9):
            raise DimensionError(f"ambisonics order {self.order} outside [0, 9]")
        if self.normalization not in (SN3D, N3D):
            raise DimensionError(f"unknown normalization {self.normalization!r}")

    @property
    def channels(self) -> int:
        return (self.order + 1) ** 2


@dataclass(frozen=True)
class VbapSpec:
    """Channel bed produced by VBAP panning over a layout."""

    layout: SpeakerLayout


@dataclass(frozen=True)
class ObjectsSpec:
    """Each sampled direction is its own input channel."""


@dataclass(frozen=True)
class ExternalSpec:
    """Matrix loaded from a file (see the matrix file format)."""

    path: str


FormatSpec = object  # any of the four spec classes above


# ---------------------------------------------------------------------------
# Encoding and decoding matrices


@dataclass(frozen=True)
class EncodingMatrix:
    """How sampled virtual sources are encoded into the input format (L x M)."""

    entries: np.ndarray
    cloud: PointCloud
    channel_labels: tuple

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != len(self.cloud):
            raise DimensionError(
                f"encoding matrix shape {entries.shape} does not match "
                f"cloud of {len(self.cloud)} directions"
            )
        if entries.shape[1] != len(self.channel_labels):
            raise DimensionError("one label per input channel required")
        if not np.all(np.isfinite(entries)):
            raise DimensionError("encoding matrix entries must be finite")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class DecoderToSpeaker:
    """How output-format channels feed the loudspeaker layout (P x N)."""

    entries: np.ndarray
    layout: SpeakerLayout
    channel_labels: tuple

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != len(self.layout):
            raise DimensionError(
                f"decoder-to-speaker shape {entries.shape} does not match "
                f"layout of {len(self.layout)} speakers"
            )
        if entries.shape[1] != len(self.channel_labels):
            raise DimensionError("one label per output channel required")
        if not np.all(np.isfinite(entries)):
            raise DimensionError("decoder entries must be finite")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_identity(self) -> bool:
        p, n = self.entries.shape
        return p == n and np.array_equal(self.entries, np.eye(p))


def ambisonics_encode(cloud: PointCloud, order: int,
                      normalization: str = SN3D) -> EncodingMatrix:
    """Encode every cloud direction into ambisonics channels."""
    y = sh_matrix(cloud.directions, order, normalization)
    return EncodingMatrix(y, cloud, acn_labels(order))


def build_encoding_matrix(spec: FormatSpec, cloud: PointCloud) -> EncodingMatrix:
    """Encoding matrix of the input format sampled on a cloud."""
    if isinstance(spec, AmbisonicsSpec):
        return ambisonics_encode(cloud, spec.order, spec.normalization)
    if isinstance(spec, VbapSpec):
        gains = vbap_matrix(spec.layout, cloud.directions)
        return EncodingMatrix(gains, cloud, spec.layout.labels)
    if isinstance(spec, ObjectsSpec):
        n = len(cloud)
        return EncodingMatrix(
            np.eye(n), cloud, tuple(f"obj{i}" for i in range(n))
        )
    if isinstance(spec, ExternalSpec):
        from .matfile import import_matrix

        mat = import_matrix(spec.path)
        if mat.rows != len(cloud):
            raise DimensionError(
                f"external matrix has {mat.rows} rows but the cloud has "
                f"{len(cloud)} directions"
            )
        return EncodingMatrix(mat.values(), cloud, tuple(mat.col_labels))
    raise DimensionError(f"unsupported input format spec {spec!r}")


_PINV_CUTOFF = 1e-8


def build_decoder_to_speaker(spec: FormatSpec, layout: SpeakerLayout) -> DecoderToSpeaker:
    """Decoding-to-speaker matrix of the output format over a layout.

    Speaker-format outputs (plain decoding) get the identity; ambisonics
    outputs get the SVD pseudo-inverse decoder over the (virtual) layout.
    """
    if isinstance(spec, VbapSpec) or spec is None:
        # speaker-format output: channels are the speakers themselves
        return DecoderToSpeaker(np.eye(len(layout)), layout, layout.labels)
    if isinstance(spec, AmbisonicsSpec):
        y = sh_matrix(layout.directions, spec.order, spec.normalization)
        if len(layout) < spec.channels:
            warnings.warn(
                f"virtual layout has {len(layout)} speakers for "
                f"{spec.channels} channels; decoder is rank-deficient",
                stacklevel=2,
            )
        d = np.linalg.pinv(y.T, rcond=_PINV_CUTOFF)
        return DecoderToSpeaker(d, layout, acn_labels(spec.order))
    if isinstance(spec, ExternalSpec):
        from .matfile import import_matrix

        mat = import_matrix(spec.path)
        if mat.rows != len(layout):
            raise DimensionError(
                f"external decoder has {mat.rows} rows but the layout has "
                f"{len(layout)} speakers"
            )
        return DecoderToSpeaker(mat.values(), layout, tuple(mat.col_labels))
    raise DimensionError(f"unsupported output format spec {spec!r}")


def identity_decoder(layout: SpeakerLayout) -> DecoderToSpeaker:
    return DecoderToSpeaker(np.eye(len(layout)), layout, layout.labels)


# ---------------------------------------------------------------------------
# Channel-remapping baselines


def encode_direction(spec: FormatSpec, layout: Optional[SpeakerLayout],
                     d: Direction) -> np.ndarray:
    """One direction's gain vector in the given output format."""
    if isinstance(spec, AmbisonicsSpec):
        return sh_matrix([d], spec.order, spec.normalization)[0]
    if isinstance(spec, VbapSpec):
        return vbap_gains(spec.layout, d)
    if layout is not None:
        return vbap_gains(layout, d)
    raise DimensionError(f"cannot encode a direction in format {spec!r}")


def remap_baseline(input_channel_directions: Sequence[Direction],
                   output: FormatSpec,
                   layout: Optional[SpeakerLayout] = None) -> np.ndarray:
    """Direct per-channel remapping transcoder (N x M).

    Column m encodes input channel m's direction into the output format:
    an ambisonics row, or panning gains over the output layout.
    """
    cols = [
        encode_direction(output, layout, d) for d in input_channel_directions
    ]
    return np.array(cols).T


def panned_reference_decoder(input_spec: AmbisonicsSpec,
                             virtual_layout: SpeakerLayout,
                             output_layout: SpeakerLayout) -> np.ndarray:
    """Reference decoder: pseudo-inverse to a virtual layout, then VBAP.

    Decodes the scene to a dense virtual layout and remaps every virtual
    speaker onto the real layout with amplitude panning.  Serves as the
    built-in comparison decoder for scene-format inputs, where direct
    per-channel remapping is not defined.
    """
    virt = build_decoder_to_speaker(input_spec, virtual_layout)
    remap = vbap_matrix(output_layout, virtual_layout.directions).T  # P x J
    return remap @ virt.entries
