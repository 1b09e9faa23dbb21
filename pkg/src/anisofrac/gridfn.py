"""Piecewise-linear functions on uniform grids, extended by zero.

A :class:`GridFunction` interpolates its node values multilinearly
inside the grid box and is identically zero outside.  With the boundary
nodes pinned to zero this is the discrete stand-in for functions that
vanish outside the domain, which is the admissible class for every
energy and solver in the package.

Supported dimensions: n = 1 and n = 2 (the energies integrate over
pairs of points, so n = 2 already means 4-dimensional quadrature).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _accel

__all__ = [
    "Grid",
    "GridFunction",
    "FractionalParams",
    "lp_norm",
    "gradient_lp",
    "write_csv",
    "read_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on a box, same node count per axis."""

    dimension: int
    box: tuple[tuple[float, float], ...]
    nodes_per_axis: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.box) != self.dimension:
            raise ValueError("box must list one (a, b) pair per axis")
        if self.nodes_per_axis < 3:
            raise ValueError("need at least 3 nodes per axis")
        for a, b in self.box:
            if not b > a:
                raise ValueError(f"degenerate box interval ({a}, {b})")

    @property
    def spacing(self) -> tuple[float, ...]:
        n = self.nodes_per_axis
        return tuple((b - a) / (n - 1) for a, b in self.box)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dimension

    def axes(self) -> list[np.ndarray]:
        """Node coordinates along each axis."""
        return [
            np.linspace(a, b, self.nodes_per_axis) for a, b in self.box
        ]

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (n_nodes, dimension), row-major."""
        axes = self.axes()
        if self.dimension == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def trapezoid_weights(self) -> np.ndarray:
        """Composite trapezoid weights over the node lattice, flattened."""
        w1 = np.full(self.nodes_per_axis, 1.0)
        w1[0] = w1[-1] = 0.5
        out = w1 * self.spacing[0]
        if self.dimension == 1:
            return out
        w2 = w1 * self.spacing[1]
        return np.outer(out, w2).ravel()

    @property
    def diameter(self) -> float:
        return math.sqrt(sum((b - a) ** 2 for a, b in self.box))


@dataclass(frozen=True)
class FractionalParams:
    """Differentiability order s in (0,1) and integrability p in [1, inf)."""

    s: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0,1), got {self.s}")
        if self.p < 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True)
class GridFunction:
    """Node values on a :class:`Grid`; multilinear inside, zero outside.

    ``boundary_flag`` pins every boundary node to exactly 0, so the
    zero-extension is continuous and the function vanishes outside the
    open box.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    boundary_flag: bool = True

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"values shape {vals.shape} does not match grid {self.grid.shape}"
            )
        if self.boundary_flag:
            vals = vals.copy()
            if self.grid.dimension == 1:
                vals[0] = vals[-1] = 0.0
            else:
                vals[0, :] = vals[-1, :] = 0.0
                vals[:, 0] = vals[:, -1] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(
        cls, grid: Grid, fn: Callable[..., np.ndarray], boundary_flag: bool = True
    ) -> "GridFunction":
        """Sample ``fn`` at the nodes; fn takes one coordinate array per axis."""
        axes = grid.axes()
        if grid.dimension == 1:
            vals = np.asarray(fn(axes[0]), dtype=float)
        else:
            X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
            vals = np.asarray(fn(X, Y), dtype=float)
        return cls(grid, vals, boundary_flag)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.eval(points)

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (..., n); exactly 0 outside the box."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0 or (self.grid.dimension == 1 and pts.shape[-1] != 1):
            pts = pts.reshape(pts.shape + (1,))
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self.grid.dimension)
        if self.grid.dimension == 1:
            (a, b), = self.grid.box
            xs = np.linspace(a, b, self.grid.nodes_per_axis)
            out = np.interp(flat[:, 0], xs, self.values, left=0.0, right=0.0)
            # np.interp clamps; kill anything strictly outside
            out = np.where((flat[:, 0] < a) | (flat[:, 0] > b), 0.0, out)
        else:
            (ax, _), (ay, _) = self.grid.box
            hx, hy = self.grid.spacing
            out = np.empty(flat.shape[0])
            _accel.interp_bilinear(
                self.values, ax, ay, hx, hy,
                np.ascontiguousarray(flat[:, 0]),
                np.ascontiguousarray(flat[:, 1]),
                out,
            )
        return out.reshape(lead)

    def node_gradient(self) -> np.ndarray:
        """Gradient at the nodes by central differences, shape (n_nodes, n).

        Uses the zero extension as ghost values outside the box, which is
        the right one-sided behavior for pinned-boundary functions.
        """
        v = self.values
        if self.grid.dimension == 1:
            h, = self.grid.spacing
            padded = np.concatenate([[0.0], v, [0.0]])
            g = (padded[2:] - padded[:-2]) / (2.0 * h)
            return g[:, None]
        hx, hy = self.grid.spacing
        px = np.pad(v, ((1, 1), (0, 0)))
        py = np.pad(v, ((0, 0), (1, 1)))
        gx = (px[2:, :] - px[:-2, :]) / (2.0 * hx)
        gy = (py[:, 2:] - py[:, :-2]) / (2.0 * hy)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def directional_slopes(self, dirs: np.ndarray) -> np.ndarray:
        """lim_{r->0+} [u(x) - u(x - r w)]/r at every node, shape (nodes, M).

        Exact for the piecewise-multilinear interpolant: the offset lands
        in the cell on the -w side of the node, so one-sided differences
        (with zero ghosts outside the box) give the limit directly.
        """
        v = self.values
        dirs = np.asarray(dirs, dtype=float)
        if self.grid.dimension == 1:
            h, = self.grid.spacing
            padded = np.concatenate([[0.0], v, [0.0]])
            back = (padded[1:-1] - padded[:-2]) / h   # slope on the left cell
            fwd = (padded[2:] - padded[1:-1]) / h     # slope on the right cell
            w = dirs[:, 0]
            return np.where(w[None, :] > 0, back[:, None], fwd[:, None]) * w[None, :]
        hx, hy = self.grid.spacing
        px = np.pad(v, ((1, 1), (0, 0)))
        py = np.pad(v, ((0, 0), (1, 1)))
        back_x = ((px[1:-1, :] - px[:-2, :]) / hx).ravel()
        fwd_x = ((px[2:, :] - px[1:-1, :]) / hx).ravel()
        back_y = ((py[:, 1:-1] - py[:, :-2]) / hy).ravel()
        fwd_y = ((py[:, 2:] - py[:, 1:-1]) / hy).ravel()
        wx, wy = dirs[:, 0], dirs[:, 1]
        sx = np.where(wx[None, :] > 0, back_x[:, None], fwd_x[:, None])
        sy = np.where(wy[None, :] > 0, back_y[:, None], fwd_y[:, None])
        return sx * wx[None, :] + sy * wy[None, :]

    def cell_gradients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell-centered gradients: (centers, gradients, cell volumes)."""
        v = self.values
        if self.grid.dimension == 1:
            h, = self.grid.spacing
            (a, _), = self.grid.box
            g = (v[1:] - v[:-1]) / h
            centers = a + h * (np.arange(g.shape[0]) + 0.5)
            return centers[:, None], g[:, None], np.full(g.shape[0], h)
        hx, hy = self.grid.spacing
        (ax, _), (ay, _) = self.grid.box
        gx = 0.5 * ((v[1:, 1:] - v[:-1, 1:]) + (v[1:, :-1] - v[:-1, :-1])) / hx
        gy = 0.5 * ((v[1:, 1:] - v[1:, :-1]) + (v[:-1, 1:] - v[:-1, :-1])) / hy
        nx, ny = gx.shape
        cx = ax + hx * (np.arange(nx) + 0.5)
        cy = ay + hy * (np.arange(ny) + 0.5)
        CX, CY = np.meshgrid(cx, cy, indexing="ij")
        centers = np.column_stack([CX.ravel(), CY.ravel()])
        grads = np.column_stack([gx.ravel(), gy.ravel()])
        vols = np.full(grads.shape[0], hx * hy)
        return centers, grads, vols

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values, self.boundary_flag)


def lp_norm(u: GridFunction, p: float) -> float:
    """||u||_p over the box: composite trapezoid on nodes, then p-th root."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    w = u.grid.trapezoid_weights()
    return float(np.dot(w, np.abs(u.values.ravel()) ** p) ** (1.0 / p))


def gradient_lp(u: GridFunction, p: float) -> float:
    """||grad u||_p from cell-centered finite differences."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    _, grads, vols = u.cell_gradients()
    mag = np.sqrt(np.sum(grads * grads, axis=1))
    return float(np.dot(vols, mag ** p) ** (1.0 / p))


def _format_box(box: Sequence[tuple[float, float]]) -> str:
    return ";".join(f"{a:.17g}:{b:.17g}" for a, b in box)


def _parse_box(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.split(";"):
        a, b = part.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def write_csv(u: GridFunction, path_or_file) -> None:
    """Write the header line and node values in row-major order."""
    header = (
        f"# grid n={u.grid.dimension} box={_format_box(u.grid.box)} "
        f"N={u.grid.nodes_per_axis}\n"
    )
    body = "".join(f"{v:.17g}\n" for v in u.values.ravel())
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w") as fh:
            fh.write(header)
            fh.write(body)
    else:
        path_or_file.write(header)
        path_or_file.write(body)


def read_csv(path_or_file) -> GridFunction:
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file) as fh:
            text = fh.read()
    else:
        text = path_or_file.read()
    lines = io.StringIO(text).read().splitlines()
    if not lines or not lines[0].startswith("# grid"):
        raise ValueError("missing '# grid' header line")
    fields = dict(tok.split("=", 1) for tok in lines[0][2:].split()[1:])
    n = int(fields["n"])
    box = _parse_box(fields["box"])
    N = int(fields["N"])
    grid = Grid(n, box, N)
    vals = np.array([float(s) for s in lines[1:] if s.strip()])
    if vals.size != N ** n:
        raise ValueError(f"expected {N ** n} values, found {vals.size}")
    return GridFunction(grid, vals.reshape(grid.shape), boundary_flag=False)
