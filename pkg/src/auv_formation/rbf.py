#!/usr/bin/env python3
"""
Localized Gaussian RBF networks on a regular lattice.

A network is a lattice of centers (shared by every output channel) plus one
weight vector per channel. The regressor is

    S_j(Z) = exp(-||Z - mu_j||^2 / width^2)

and channel ``k`` outputs ``W_k . S(Z)``. Centers are enumerated row-major
(first axis slowest), which is also the order of the weights file.

Weights file layout (little-endian)::

    b"RBFW"            magic
    u32                format version (1)
    u32                input_dim q
    u32 * q            per-axis counts
    f64 * 2q           per-axis bounds (lo0, hi0, lo1, hi1, ...)
    f64                width
    u32                channel count
    f64 * C * P        weights, channel-major, each channel in lattice order
    u32                CRC-32 of every preceding byte
"""

import struct
import zlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    BadBoundsError,
    BadCountError,
    BadWidthError,
    ChecksumMismatchError,
    DimensionMismatchError,
    EmptyWindowError,
    FormatVersionMismatchError,
    MissingWeightsFileError,
    WeightsFieldError,
    WeightsFileError,
)

MAGIC = b"RBFW"
FORMAT_VERSION = 1
OUTPUT_CHANNELS = 3


@dataclass(frozen=True, eq=False)
class RbfLattice:
    """Evenly spaced, endpoint-inclusive lattice of Gaussian centers."""

    bounds: np.ndarray
    counts: tuple[int, ...]
    width: float
    axes: tuple[np.ndarray, ...] = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        axes = tuple(
            np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.counts)
        )
        grids = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=1)
        centers.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "centers", centers)

    @property
    def input_dim(self) -> int:
        return len(self.counts)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.counts))

    def same_grid(self, other: "RbfLattice") -> bool:
        return (
            self.counts == other.counts
            and self.width == other.width
            and np.array_equal(self.bounds, other.bounds)
        )


@dataclass(eq=False)
class RbfNetwork:
    """A lattice plus one weight vector per output channel."""

    lattice: RbfLattice
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[1] != self.lattice.n_nodes:
            raise DimensionMismatchError(
                f"weights shape {self.weights.shape} does not match "
                f"{self.lattice.n_nodes} centers"
            )

    @property
    def input_dim(self) -> int:
        return self.lattice.input_dim

    @property
    def centers(self) -> np.ndarray:
        return self.lattice.centers

    @property
    def width(self) -> float:
        return self.lattice.width

    @property
    def channels(self) -> int:
        return self.weights.shape[0]

    def with_weights(self, weights: ArrayLike) -> "RbfNetwork":
        return RbfNetwork(self.lattice, np.array(weights, dtype=float))


def build_lattice(
    bounds: Sequence[Sequence[float]], counts: Sequence[int], width: float
) -> RbfLattice:
    """Validate a grid specification and build its lattice."""
    bounds_arr = np.array(bounds, dtype=float)
    if bounds_arr.ndim != 2 or bounds_arr.shape[1] != 2 or bounds_arr.shape[0] == 0:
        raise BadBoundsError(f"bounds must be q pairs [lo, hi], got {bounds!r}")
    if not np.all(np.isfinite(bounds_arr)):
        raise BadBoundsError("bounds must be finite")
    for axis, (lo, hi) in enumerate(bounds_arr):
        if not lo < hi:
            raise BadBoundsError(f"axis {axis}: lo {lo} must be below hi {hi}")

    counts_tuple = tuple(int(n) for n in counts)
    if len(counts_tuple) != bounds_arr.shape[0]:
        raise BadCountError(
            f"{len(counts_tuple)} counts given for {bounds_arr.shape[0]} axes"
        )
    for axis, (given, n) in enumerate(zip(counts, counts_tuple)):
        if n != given or n < 2:
            raise BadCountError(f"axis {axis}: count must be an integer >= 2, got {given!r}")

    if not (np.isfinite(width) and width > 0.0):
        raise BadWidthError(f"width must be positive, got {width!r}")

    bounds_arr.setflags(write=False)
    return RbfLattice(bounds_arr, counts_tuple, float(width))


def build_grid_network(
    bounds: Sequence[Sequence[float]],
    counts: Sequence[int],
    width: float,
    channels: int = OUTPUT_CHANNELS,
) -> RbfNetwork:
    """Lattice network with all weights at zero."""
    lattice = build_lattice(bounds, counts, width)
    return RbfNetwork(lattice, np.zeros((channels, lattice.n_nodes)))


def _check_input(lattice: RbfLattice, Z: ArrayLike) -> np.ndarray:
    z = np.asarray(Z, dtype=float)
    if z.shape != (lattice.input_dim,):
        raise DimensionMismatchError(
            f"input has shape {z.shape}, network expects ({lattice.input_dim},)"
        )
    return z


def lattice_regressor(lattice: RbfLattice, Z: ArrayLike, separable: bool = True) -> np.ndarray:
    """Regressor vector ``S(Z)``.

    On a lattice the Gaussian factorises per axis, so the default path builds
    ``S`` as the outer product of q one-dimensional Gaussian vectors.
    """
    z = _check_input(lattice, Z)
    inv_w2 = 1.0 / lattice.width**2
    if separable:
        factors = [np.exp(-((axis - zi) ** 2) * inv_w2) for axis, zi in zip(lattice.axes, z)]
        return reduce(lambda a, b: np.multiply.outer(a, b).ravel(), factors)
    diff = lattice.centers - z
    return np.exp(-np.einsum("ij,ij->i", diff, diff) * inv_w2)


def regressor(net: RbfNetwork, Z: ArrayLike, separable: bool = True) -> np.ndarray:
    return lattice_regressor(net.lattice, Z, separable)


def regressor_matrix(lattice: RbfLattice, Zs: ArrayLike) -> np.ndarray:
    """Stack of regressors, one row per input sample (K x P)."""
    zs = np.asarray(Zs, dtype=float)
    if zs.ndim != 2 or zs.shape[1] != lattice.input_dim:
        raise DimensionMismatchError(
            f"inputs have shape {zs.shape}, expected (K, {lattice.input_dim})"
        )
    inv_w2 = 1.0 / lattice.width**2
    out = np.ones((zs.shape[0], 1))
    for axis, column in zip(lattice.axes, zs.T):
        factor = np.exp(-((column[:, None] - axis[None, :]) ** 2) * inv_w2)
        out = (out[:, :, None] * factor[:, None, :]).reshape(zs.shape[0], -1)
    return out


def nn_output(
    net: RbfNetwork, Z: ArrayLike, regressor_value: np.ndarray | None = None
) -> np.ndarray:
    """Per-channel network output ``W_k . S(Z)``."""
    S = regressor(net, Z) if regressor_value is None else regressor_value
    return net.weights @ S


def average_weights(
    times: ArrayLike, snapshots: ArrayLike, window: tuple[float, float]
) -> np.ndarray:
    """Element-wise mean of the snapshots whose time lies in ``[t_a, t_b]``.

    ``snapshots`` is indexed by time along its first axis; any trailing shape
    (channels x nodes, or agents x channels x nodes) is preserved.
    """
    t_a, t_b = window
    if not t_b > t_a:
        raise EmptyWindowError(f"window end {t_b} must exceed start {t_a}", window)
    times_arr = np.asarray(times, dtype=float)
    snaps = np.asarray(snapshots, dtype=float)
    if snaps.shape[0] != times_arr.shape[0]:
        raise DimensionMismatchError(
            f"{times_arr.shape[0]} times for {snaps.shape[0]} snapshots"
        )
    inside = (times_arr >= t_a) & (times_arr <= t_b)
    if np.count_nonzero(inside) < 2:
        raise EmptyWindowError(
            f"window [{t_a}, {t_b}] holds {np.count_nonzero(inside)} snapshot(s), need 2",
            window,
        )
    return snaps[inside].mean(axis=0)


def encode_weights(net: RbfNetwork) -> bytes:
    lattice = net.lattice
    q = lattice.input_dim
    header = MAGIC + struct.pack(f"<II{q}I", FORMAT_VERSION, q, *lattice.counts)
    header += lattice.bounds.astype("<f8").tobytes()
    header += struct.pack("<dI", lattice.width, net.channels)
    body = header + np.ascontiguousarray(net.weights, dtype="<f8").tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def decode_weights(data: bytes) -> RbfNetwork:
    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatVersionMismatchError("not a weights file (bad magic bytes)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise FormatVersionMismatchError(
            f"unsupported weights format version {version} (expected {FORMAT_VERSION})"
        )
    if len(data) < 16:
        raise ChecksumMismatchError("weights file is truncated")
    payload, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != stored_crc:
        raise ChecksumMismatchError("CRC-32 mismatch, weights file is corrupt or truncated")

    offset = 8
    try:
        (q,) = struct.unpack_from("<I", payload, offset)
        offset += 4
        if q == 0:
            raise WeightsFieldError("input_dim", "must be at least 1")
        counts = struct.unpack_from(f"<{q}I", payload, offset)
        offset += 4 * q
        bounds = np.frombuffer(payload, dtype="<f8", count=2 * q, offset=offset)
        offset += 16 * q
        width, channels = struct.unpack_from("<dI", payload, offset)
        offset += 12
    except (struct.error, ValueError) as e:
        raise WeightsFieldError("header", f"header is shorter than declared ({e})") from e

    n_nodes = int(np.prod(counts, dtype=np.int64))
    expected = channels * n_nodes * 8
    if len(payload) - offset != expected:
        raise WeightsFieldError(
            "counts",
            f"header declares {channels} x {n_nodes} weights ({expected} bytes) "
            f"but the payload holds {len(payload) - offset} bytes",
        )
    try:
        lattice = build_lattice(bounds.reshape(q, 2).astype(float), counts, width)
    except BadBoundsError as e:
        raise WeightsFieldError("bounds", str(e)) from e
    except BadCountError as e:
        raise WeightsFieldError("counts", str(e)) from e
    except BadWidthError as e:
        raise WeightsFieldError("width", str(e)) from e
    weights = np.frombuffer(payload, dtype="<f8", offset=offset).astype(float)
    return RbfNetwork(lattice, weights.reshape(channels, n_nodes))


def save_weights(net: RbfNetwork, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(encode_weights(net))
    except OSError as e:
        raise WeightsFileError(f"cannot write weights file {target}: {e}") from e
    return target


def load_weights(path: str | Path) -> RbfNetwork:
    source = Path(path)
    if not source.exists():
        raise MissingWeightsFileError(source)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise WeightsFileError(f"cannot read weights file {source}: {e}") from e
    return decode_weights(data)
