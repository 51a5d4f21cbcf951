"""Band-pass filtered Gaussian noise in the Fourier domain.

A :class:`FrequencyBand` is a radial passband on the log2-frequency axis,
measured in cycles/image.  Noise fields are synthesized by filtering seeded
white Gaussian noise with a raised-cosine band-pass mask, removing the DC
component, and rescaling to an exact target standard deviation.  The whole
path is deterministic: identical :class:`NoiseSpec` and dimensions give
bit-identical fields.

Frequency conventions
---------------------
Frequencies are in cycles per image (periods across the image extent), so a
width-W image resolves radial frequencies up to the Nyquist limit W/2.  Band
edges live on the log2 axis: the half-amplitude passband spans
``center * 2**(-width/2) .. center * 2**(+width/2)`` and the raised-cosine
skirt extends a further ``transition_octaves`` on each side.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidBandError, NumericalError

# Band edges may land exactly on a representable radius (e.g. r = 8*sqrt(2)
# for a one-octave band centered at 8); the guard keeps those bins inside.
_EDGE_EPS = 1e-12

MIN_LOW_EDGE_CYCLES = 0.5


@dataclass(frozen=True)
class FrequencyBand:
    """Radial passband: center frequency (cycles/image) and octave widths."""

    center_freq: float
    width_octaves: float = 1.0
    transition_octaves: float = 0.25

    def __post_init__(self):
        if not self.center_freq > 0:
            raise InvalidBandError(
                f"center_freq must be positive, got {self.center_freq}"
            )
        if not self.width_octaves > 0:
            raise InvalidBandError(
                f"width_octaves must be positive, got {self.width_octaves}"
            )
        if self.transition_octaves < 0:
            raise InvalidBandError(
                f"transition_octaves must be non-negative, got {self.transition_octaves}"
            )
        low = self.low_edge
        if low < MIN_LOW_EDGE_CYCLES:
            raise InvalidBandError(
                f"low passband edge {low:.4g} cycles/image is below the "
                f"{MIN_LOW_EDGE_CYCLES} cycles/image representability bound "
                f"(center_freq={self.center_freq}, width_octaves={self.width_octaves})"
            )

    @property
    def low_edge(self) -> float:
        """Half-amplitude low edge in cycles/image."""
        return self.center_freq * 2.0 ** (-self.width_octaves / 2.0)

    @property
    def high_edge(self) -> float:
        """Half-amplitude high edge in cycles/image."""
        return self.center_freq * 2.0 ** (self.width_octaves / 2.0)

    @property
    def log2_center(self) -> float:
        """Center position on the log2-frequency axis (octaves above 1 cyc/img)."""
        return float(np.log2(self.center_freq))

    def to_dict(self) -> dict:
        return {
            "center_freq": self.center_freq,
            "width_octaves": self.width_octaves,
            "transition_octaves": self.transition_octaves,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyBand":
        return cls(
            center_freq=float(d["center_freq"]),
            width_octaves=float(d["width_octaves"]),
            transition_octaves=float(d["transition_octaves"]),
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Everything that determines one noise field: band, target SD, seed."""

    band: FrequencyBand
    target_sd: float
    seed: int

    def __post_init__(self):
        if self.target_sd < 0:
            raise InvalidBandError(f"target_sd must be >= 0, got {self.target_sd}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidBandError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass(frozen=True)
class NoiseField:
    """A synthesized zero-mean noise field with exact target SD (pre-clipping)."""

    width: int
    height: int
    values: np.ndarray  # float64, shape (height, width)

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise DataError(
                f"field shape {self.values.shape} does not match "
                f"(height={self.height}, width={self.width})"
            )


def default_band_ladder(image_size: int = 224) -> list[FrequencyBand]:
    """Octave-spaced band ladder spanning the representable range.

    Centers {1, 2, 4, ...} cycles/image up to the Nyquist limit, one octave
    wide with a 0.25-octave raised-cosine skirt.  For 224-pixel inputs this
    is the seven-band ladder {1, 2, 4, 8, 16, 32, 64}.
    """
    bands = []
    center = 1.0
    while center <= image_size / 2 and center <= 64:
        bands.append(FrequencyBand(center, 1.0, 0.25))
        center *= 2
    return bands


def radial_freq_grid(width: int, height: int) -> np.ndarray:
    """Radial frequency of every FFT bin, in cycles/image.

    Per-axis frequencies count cycles across that axis, so integer bins map
    to integer cycle counts.
    """
    fx = np.fft.fftfreq(width) * width
    fy = np.fft.fftfreq(height) * height
    return np.hypot(fx[np.newaxis, :], fy[:, np.newaxis])


def bandpass_weight(band: FrequencyBand, r) -> np.ndarray:
    """Radial filter profile at frequency ``r`` (cycles/image).

    1 inside the half-amplitude passband, 0 beyond passband + transition,
    raised cosine in between; exactly 0 at r = 0 (DC).
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    positive = r > 0
    with np.errstate(divide="ignore"):
        d = np.abs(np.log2(np.where(positive, r, 1.0) / band.center_freq))
    half = band.width_octaves / 2.0
    t = band.transition_octaves
    inside = positive & (d <= half + _EDGE_EPS)
    out[inside] = 1.0
    if t > 0:
        skirt = positive & (d > half + _EDGE_EPS) & (d <= half + t + _EDGE_EPS)
        out[skirt] = 0.5 * (1.0 + np.cos(np.pi * (d[skirt] - half) / t))
    return out


def design_bandpass_mask(band: FrequencyBand, width: int, height: int) -> np.ndarray:
    """Real-valued radial band-pass mask over FFT coordinates.

    The mask depends only on radial frequency, is conjugate-symmetric by
    construction, and always zeroes the DC bin.

    Raises :class:`InvalidBandError` when the band is not representable at
    these dimensions (center above Nyquist).
    """
    if width < 8 or height < 8:
        raise InvalidBandError(f"image dimensions must be >= 8, got {width}x{height}")
    nyquist = min(width, height) / 2.0
    if band.center_freq > nyquist:
        raise InvalidBandError(
            f"center_freq {band.center_freq} cycles/image exceeds the Nyquist "
            f"limit {nyquist} for a {width}x{height} image"
        )
    return bandpass_weight(band, radial_freq_grid(width, height))


def synthesize_noise(spec: NoiseSpec, width: int, height: int) -> NoiseField:
    """Deterministic band-limited Gaussian noise field.

    Seeded white noise -> FFT -> band-pass mask -> inverse FFT -> subtract
    mean -> rescale to the exact target SD.  ``target_sd == 0`` yields the
    all-zeros field.
    """
    if spec.target_sd == 0:
        return NoiseField(width, height, np.zeros((height, width)))
    mask = design_bandpass_mask(spec.band, width, height)
    rng = np.random.default_rng(int(spec.seed))
    white = rng.standard_normal((height, width))
    filtered = np.fft.ifft2(np.fft.fft2(white) * mask).real
    filtered -= filtered.mean()
    sd = filtered.std()
    if sd == 0:
        raise NumericalError(
            f"band-pass filter produced an empty field for band {spec.band}; "
            "no representable frequencies in the passband"
        )
    filtered *= spec.target_sd / sd
    return NoiseField(width, height, filtered)


def apply_noise(image: np.ndarray, field: NoiseField) -> np.ndarray:
    """Add a luminance noise field to an image in [0, 1] and clamp.

    Multichannel images get the same field on every channel.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        if image.shape != (field.height, field.width):
            raise DataError(
                f"image shape {image.shape} does not match field "
                f"{(field.height, field.width)}"
            )
        noisy = image + field.values
    elif image.ndim == 3:
        if image.shape[:2] != (field.height, field.width):
            raise DataError(
                f"image shape {image.shape} does not match field "
                f"{(field.height, field.width)}"
            )
        noisy = image + field.values[:, :, np.newaxis]
    else:
        raise DataError(f"expected a 2D or 3D image, got shape {image.shape}")
    return np.clip(noisy, 0.0, 1.0)


def clipped_fraction(image: np.ndarray, field: NoiseField) -> float:
    """Fraction of samples altered by the [0, 1] clamp in apply_noise."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 3:
        raw = image + field.values[:, :, np.newaxis]
    else:
        raw = image + field.values
    return float(np.mean((raw < 0.0) | (raw > 1.0)))


_RAW_MAGIC = b"CBF1"
_RAW_DTYPE = b"<f4\x00"


def write_raw_field(path, values: np.ndarray) -> None:
    """Export a 2D field as 32-bit little-endian floats with a 16-byte header."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise DataError(f"raw export expects a 2D grid, got shape {values.shape}")
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(_RAW_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(_RAW_DTYPE)
        fh.write(values.astype("<f4").tobytes())


def read_raw_field(path) -> np.ndarray:
    """Read a grid written by :func:`write_raw_field`."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != _RAW_MAGIC:
            raise DataError(f"{path}: not a raw field file")
        width, height = struct.unpack("<II", header[4:12])
        if header[12:16] != _RAW_DTYPE:
            raise DataError(f"{path}: unsupported dtype tag {header[12:16]!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != width * height:
        raise DataError(f"{path}: truncated raw field")
    return data.reshape(height, width).astype(float)
