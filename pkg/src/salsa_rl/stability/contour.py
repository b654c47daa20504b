"""Spectral maps over neighbourhoods of observed states.

For a trajectory step the observed state is held fixed except for one or two
swept components; the dynamics network is evaluated on every grid point and
the spectral radius / largest imaginary part recorded. The ``rho = 1`` level
set separates locally contracting from locally expanding regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from ..policy import SalsaPolicy, Trajectory, dynamics_matrix
from .spectral import spectral_series


@dataclass
class ContourGrid:
    t: int
    dims: tuple
    axes: list
    rho: np.ndarray
    im_max: np.ndarray
    anchor_state: np.ndarray
    rho_one_contour: list = field(default_factory=list)
    contour_pieces: list = field(default_factory=list)  # point count of each connected piece

    def to_dict(self) -> dict:
        return {
            "t": int(self.t),
            "dims": [int(d) for d in self.dims],
            "axes": [np.asarray(ax).tolist() for ax in self.axes],
            "rho": self.rho.tolist(),
            "im_max": self.im_max.tolist(),
            "anchor_state": np.asarray(self.anchor_state).tolist(),
            "rho_one_contour": [list(map(float, p)) for p in self.rho_one_contour],
            "contour_pieces": [int(n) for n in self.contour_pieces],
        }


def level_crossings_1d(axis, values, level: float = 1.0) -> list[list[float]]:
    """Linearly interpolated positions where ``values`` crosses ``level``."""
    axis, values = np.asarray(axis, float), np.asarray(values, float) - level
    out = []
    for i in range(len(values) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            out.append([float(axis[i])])
        elif a * b < 0.0:
            out.append([float(axis[i] + (axis[i + 1] - axis[i]) * a / (a - b))])
    if len(values) and values[-1] == 0.0:
        out.append([float(axis[-1])])
    return out


def level_set_2d(x_axis, y_axis, field_xy, level: float = 1.0) -> tuple[list[list[float]], list[int]]:
    """Points ``[x, y]`` on the ``level`` contour of ``field_xy`` (indexed ``[ix, iy]``).

    Connected pieces are concatenated; the second return value lists how many
    points each piece contributed, so plotters can break the line.
    """
    field_xy = np.asarray(field_xy, float)
    if field_xy.shape[0] < 2 or field_xy.shape[1] < 2:
        return [], []
    points, pieces = [], []
    for piece in measure.find_contours(field_xy, level):
        xs = np.interp(piece[:, 0], np.arange(len(x_axis)), x_axis)
        ys = np.interp(piece[:, 1], np.arange(len(y_axis)), y_axis)
        points += [[float(x), float(y)] for x, y in zip(xs, ys)]
        pieces.append(len(piece))
    return points, pieces


def grid_spectra(policy: SalsaPolicy, anchor, dims, axes) -> tuple[np.ndarray, np.ndarray]:
    """``rho`` and ``im_max`` arrays of shape ``[len(ax) for ax in axes]`` (row-major cells)."""
    anchor = np.asarray(anchor, dtype=float)
    mesh = np.meshgrid(*axes, indexing="ij")
    shape = mesh[0].shape
    states = np.repeat(anchor[None, :], mesh[0].size, axis=0)
    for d, m in zip(dims, mesh):
        states[:, d] = m.ravel()
    mats = dynamics_matrix(policy.dynamics, states)
    rho, im = spectral_series(mats)
    return rho.reshape(shape), im.reshape(shape)


def default_ranges(trajectory: Trajectory, dims) -> list[tuple[float, float]]:
    out = []
    for d in dims:
        lo, hi = trajectory.observations[:, d].min(), trajectory.observations[:, d].max()
        pad = max(0.5 * (hi - lo), 0.1)
        out.append((float(lo - pad), float(hi + pad)))
    return out


def stability_contour(policy: SalsaPolicy, trajectory: Trajectory, dims, ranges=None, resolution: int = 32,
                      every: int = 10, steps=None) -> list[ContourGrid]:
    """Spectral grids around the observed state at every ``every``-th step (or at ``steps``)."""
    dims = tuple(int(d) for d in dims)
    if not 1 <= len(dims) <= 2:
        raise ValueError("sweep one or two state dimensions")
    if len(set(dims)) != len(dims):
        raise ValueError("swept dimensions must differ")
    obs_dim = trajectory.observations.shape[1]
    if any(d < 0 or d >= obs_dim for d in dims):
        raise ValueError(f"swept dimensions must lie in [0, {obs_dim})")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    ranges = default_ranges(trajectory, dims) if ranges is None else [tuple(r) for r in ranges]
    if len(ranges) != len(dims):
        raise ValueError("one range per swept dimension")
    for lo, hi in ranges:
        if not hi > lo:
            raise ValueError(f"empty range ({lo}, {hi})")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in ranges]
    if steps is None:
        if every < 1:
            raise ValueError("every must be >= 1")
        steps = range(0, len(trajectory), every)
    frames = []
    for t in steps:
        anchor = trajectory.observations[t]
        rho, im = grid_spectra(policy, anchor, dims, axes)
        if len(dims) == 1:
            contour = level_crossings_1d(axes[0], rho)
            pieces = [1] * len(contour)
        else:
            contour, pieces = level_set_2d(axes[0], axes[1], rho)
        frames.append(ContourGrid(int(t), dims, axes, rho, im, anchor.copy(), contour, pieces))
    return frames


def time_sweep_field(frames: list[ContourGrid]) -> dict:
    """Stack 1-D frames into ``(time, value)`` fields with the ``rho = 1`` contour in those coordinates."""
    if not frames or len(frames[0].dims) != 1:
        raise ValueError("need one-dimensional sweep frames")
    times = np.array([f.t for f in frames], dtype=float)
    axis = np.asarray(frames[0].axes[0])
    rho = np.stack([f.rho for f in frames])
    im = np.stack([f.im_max for f in frames])
    contour, pieces = level_set_2d(times, axis, rho)
    return {
        "t": times, "axis": axis, "rho": rho, "im_max": im,
        "anchor": np.array([f.anchor_state[f.dims[0]] for f in frames]),
        "rho_one_contour": contour, "contour_pieces": pieces,
    }
