"""Cell-centered structured grid on a rectangle with tagged boundary.

Fields live at cell centers as plain ``(nx, ny)`` float arrays.  The
boundary of the rectangle is split edge-by-edge into zero-flux walls
("neumann") and outflow segments ("robin"); the Robin coefficient is a
single nonnegative value applied on every Robin face.

Besides construction this module provides the discrete calculus used by
the solver and the energy monitor: midpoint volume integrals, boundary
line integrals, face-normal gradients with tangential reconstruction,
cell-centered gradients and the face-flux divergence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

NEUMANN = "neumann"
ROBIN = "robin"
EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class StructuredGrid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    edge_tags: dict = field(
        default_factory=lambda: {
            "left": NEUMANN,
            "right": ROBIN,
            "bottom": NEUMANN,
            "top": NEUMANN,
        }
    )
    robin_phi: float = 0.0
    allow_all_neumann: bool = False

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least 2 cells per direction")
        if self.lx <= 0.0 or self.ly <= 0.0:
            raise ValueError("domain extents must be positive")
        tags = dict(self.edge_tags)
        if set(tags) != set(EDGES):
            raise ValueError(f"edge_tags must cover exactly {EDGES}")
        for edge, tag in tags.items():
            if tag not in (NEUMANN, ROBIN):
                raise ValueError(f"unknown boundary tag {tag!r} on edge {edge!r}")
        object.__setattr__(self, "edge_tags", tags)
        if self.robin_phi < 0.0:
            raise ValueError("Robin coefficient must be nonnegative (outflow)")
        if not self.robin_edges and not self.allow_all_neumann:
            raise ValueError(
                "all-Neumann boundary is reserved for conservation-test mode; "
                "pass allow_all_neumann=True to permit it"
            )

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def robin_edges(self):
        return tuple(e for e in EDGES if self.edge_tags[e] == ROBIN)

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def edge_face_midpoints(self, edge):
        """Midpoints (x, y) of the boundary faces on one edge."""
        if edge == "left":
            y = (np.arange(self.ny) + 0.5) * self.dy
            return np.zeros(self.ny), y
        if edge == "right":
            y = (np.arange(self.ny) + 0.5) * self.dy
            return np.full(self.ny, self.lx), y
        x = (np.arange(self.nx) + 0.5) * self.dx
        if edge == "bottom":
            return x, np.zeros(self.nx)
        if edge == "top":
            return x, np.full(self.nx, self.ly)
        raise ValueError(f"unknown edge {edge!r}")

    def edge_face_length(self, edge) -> float:
        return self.dy if edge in ("left", "right") else self.dx

    def edge_cell_indices(self, edge):
        """Flat indices (row-major, id = i*ny + j) of the cells on one edge."""
        j = np.arange(self.ny)
        i = np.arange(self.nx)
        if edge == "left":
            return j
        if edge == "right":
            return (self.nx - 1) * self.ny + j
        if edge == "bottom":
            return i * self.ny
        if edge == "top":
            return i * self.ny + (self.ny - 1)
        raise ValueError(f"unknown edge {edge!r}")

    def _check_field(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.nx, self.ny):
            raise ValueError(
                f"field shape {values.shape} does not match grid ({self.nx}, {self.ny})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        return values

    # ------------------------------------------------------------------
    # Integrals
    # ------------------------------------------------------------------

    def volume_integral(self, values) -> float:
        """Midpoint rule: sum of cell values times cell area."""
        values = self._check_field(values)
        return float(values.sum() * self.cell_area)

    def boundary_integral(self, f, tag) -> float:
        """Line integral of ``f(x, y)`` over all faces with the given tag.

        Returns 0 (with a warning) when no edge carries the tag.
        """
        edges = [e for e in EDGES if self.edge_tags[e] == tag]
        if not edges:
            warnings.warn(f"no boundary faces tagged {tag!r}; integral is 0", stacklevel=2)
            return 0.0
        total = 0.0
        for edge in edges:
            xm, ym = self.edge_face_midpoints(edge)
            values = np.broadcast_to(np.asarray(f(xm, ym), dtype=float), xm.shape)
            total += float(values.sum() * self.edge_face_length(edge))
        return total

    # ------------------------------------------------------------------
    # Discrete calculus
    # ------------------------------------------------------------------

    def face_normal_gradient(self, u):
        """Two-point normal derivatives on x- and y-faces.

        Boundary faces use a zero-flux ghost value, i.e. zero normal
        derivative; Robin faces never feed a conductivity evaluation
        because their flux is prescribed directly.
        """
        u = self._check_field(u)
        gx = np.zeros((self.nx + 1, self.ny))
        gx[1:-1, :] = (u[1:, :] - u[:-1, :]) / self.dx
        gy = np.zeros((self.nx, self.ny + 1))
        gy[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / self.dy
        return gx, gy

    def _cell_tangential(self, diffs, axis):
        """Average neighboring two-point differences to cell centers."""
        n = diffs.shape[axis]
        first = np.take(diffs, [0], axis=axis)
        last = np.take(diffs, [n - 1], axis=axis)
        inner = 0.5 * (
            np.take(diffs, range(0, n - 1), axis=axis)
            + np.take(diffs, range(1, n), axis=axis)
        )
        return np.concatenate([first, inner, last], axis=axis)

    def face_gradient_magnitude(self, u):
        """|grad u| on x-faces and y-faces.

        The normal component is the two-point difference across the
        face; the tangential component averages the four neighboring
        tangential differences (one-sided next to the boundary).
        """
        u = self._check_field(u)
        gx, gy = self.face_normal_gradient(u)

        # x-faces: tangential = du/dy reconstructed at the face
        dudy = (u[:, 1:] - u[:, :-1]) / self.dy  # (nx, ny-1)
        cell_dudy = self._cell_tangential(dudy, axis=1)  # (nx, ny)
        tx = np.empty((self.nx + 1, self.ny))
        tx[1:-1, :] = 0.5 * (cell_dudy[:-1, :] + cell_dudy[1:, :])
        tx[0, :] = cell_dudy[0, :]
        tx[-1, :] = cell_dudy[-1, :]

        # y-faces: tangential = du/dx reconstructed at the face
        dudx = (u[1:, :] - u[:-1, :]) / self.dx  # (nx-1, ny)
        cell_dudx = self._cell_tangential(dudx, axis=0)  # (nx, ny)
        ty = np.empty((self.nx, self.ny + 1))
        ty[:, 1:-1] = 0.5 * (cell_dudx[:, :-1] + cell_dudx[:, 1:])
        ty[:, 0] = cell_dudx[:, 0]
        ty[:, -1] = cell_dudx[:, -1]

        return np.hypot(gx, tx), np.hypot(gy, ty)

    def cell_gradient(self, u):
        """Cell-centered gradient by averaging face-normal derivatives."""
        u = self._check_field(u)
        gx, gy = self.face_normal_gradient(u)
        cx = 0.5 * (gx[:-1, :] + gx[1:, :])
        cy = 0.5 * (gy[:, :-1] + gy[:, 1:])
        return cx, cy

    def cell_gradient_magnitude(self, u):
        cx, cy = self.cell_gradient(u)
        return np.hypot(cx, cy)

    def divergence(self, fx, fy):
        """Per-cell divergence of face-normal flux components.

        ``fx`` has shape (nx+1, ny) and ``fy`` shape (nx, ny+1); the
        components are oriented along +x / +y.
        """
        fx = np.asarray(fx, dtype=float)
        fy = np.asarray(fy, dtype=float)
        if fx.shape != (self.nx + 1, self.ny) or fy.shape != (self.nx, self.ny + 1):
            raise ValueError("face flux arrays have wrong shapes")
        return (fx[1:, :] - fx[:-1, :]) / self.dx + (fy[:, 1:] - fy[:, :-1]) / self.dy
