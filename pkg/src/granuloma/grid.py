"""Cell-centered finite-volume boxes with homogeneous Neumann boundaries.

Fields live at the cell centers of a 1D interval or a 2D rectangle.  The
Laplacian uses mirror ghost cells (zero normal derivative at the walls); the
chemotactic transport term div(carrier * grad(potential)) is assembled from
face fluxes with donor-cell upwinding, so an explicit Euler step under the
advective CFL keeps a nonnegative carrier nonnegative and the discrete
integral of the divergence telescopes to zero exactly.

Norms are volume-weighted so they approximate the continuum L^q / W^{1,q}
quantities; gradient norms are face-based with zero normal gradient on the
boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

NORM_KINDS = ("l1", "lq", "linf", "grad_lq", "w1q")


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box [0, L1] x ... with a uniform cell-centered grid."""

    extents: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.cells):
            raise ValueError("extents and cells must have matching length")
        if len(self.cells) not in (1, 2):
            raise ValueError("only 1D and 2D boxes are supported")
        if any(L <= 0 for L in self.extents):
            raise ValueError("extents must be positive")
        if any(n < 3 for n in self.cells):
            raise ValueError("need at least 3 cells per axis")

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def volume(self) -> float:
        return prod(self.extents)

    @property
    def cell_volume(self) -> float:
        return prod(self.spacing)

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self):
        """Cell-center coordinate arrays, shaped like a field."""
        axes = [self.axis_centers(k) for k in range(self.ndim)]
        if self.ndim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.cells)


@dataclass
class SimState:
    """The four fields (u, v, w, z) at a moment in time."""

    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray

    def fields(self):
        return (self.u, self.v, self.w, self.z)

    def copy(self) -> "SimState":
        return SimState(self.t, self.u.copy(), self.v.copy(),
                        self.w.copy(), self.z.copy())

    def validate(self, dom: BoxDomain, nonnegative: bool = False):
        for name, f in zip("uvwz", self.fields()):
            if f.shape != dom.cells:
                raise ValueError(f"field {name} has shape {f.shape}, "
                                 f"expected {dom.cells}")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"field {name} contains non-finite values")
            if nonnegative and f.min() < 0:
                raise ValueError(f"field {name} is negative (min {f.min()})")
        return self


def _pad_edge(f: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    return np.pad(f, pad, mode="edge")


def _ax_slice(f: np.ndarray, sl: slice, axis: int) -> np.ndarray:
    idx = [slice(None)] * f.ndim
    idx[axis] = sl
    return f[tuple(idx)]


def laplacian(f: np.ndarray, dom: BoxDomain) -> np.ndarray:
    """Five-point (three-point in 1D) Neumann Laplacian via mirror ghosts."""
    if f.shape != dom.cells:
        raise ValueError(f"field shape {f.shape} does not match {dom.cells}")
    out = np.zeros_like(f)
    for ax, h in enumerate(dom.spacing):
        g = _pad_edge(f, ax)
        left = _ax_slice(g, slice(0, -2), ax)
        right = _ax_slice(g, slice(2, None), ax)
        out += (left - 2.0 * f + right) / (h * h)
    return out


def face_gradient(f: np.ndarray, dom: BoxDomain, axis: int) -> np.ndarray:
    """Normal gradient on the faces of `axis`; boundary faces are zero.

    The returned array has one extra entry along `axis` (faces, not cells).
    """
    h = dom.spacing[axis]
    shape = list(f.shape)
    shape[axis] += 1
    g = np.zeros(shape)
    hi = _ax_slice(f, slice(1, None), axis)
    lo = _ax_slice(f, slice(0, -1), axis)
    interior = [slice(None)] * f.ndim
    interior[axis] = slice(1, -1)
    g[tuple(interior)] = (hi - lo) / h
    return g


def max_face_gradient(f: np.ndarray, dom: BoxDomain) -> float:
    """Largest face-normal gradient magnitude (advective CFL velocity)."""
    m = 0.0
    for ax in range(dom.ndim):
        g = face_gradient(f, dom, ax)
        if g.size:
            m = max(m, float(np.abs(g).max()))
    return m


def chemo_divergence(carrier: np.ndarray, potential: np.ndarray,
                     dom: BoxDomain) -> np.ndarray:
    """div(carrier * grad(potential)) with donor-cell upwind face fluxes.

    The donor cell is the one the flux leaves, chosen by the sign of the
    face gradient of the potential; wall fluxes vanish, so summing the
    result against the cell volume gives zero to rounding.
    """
    if carrier.shape != dom.cells or potential.shape != dom.cells:
        raise ValueError("field shapes must match the domain")
    out = np.zeros_like(carrier)
    for ax, h in enumerate(dom.spacing):
        g = face_gradient(potential, dom, ax)
        lo = _ax_slice(carrier, slice(0, -1), ax)   # cell left of each interior face
        hi = _ax_slice(carrier, slice(1, None), ax)
        interior = [slice(None)] * carrier.ndim
        interior[ax] = slice(1, -1)
        gi = g[tuple(interior)]
        flux = np.where(gi > 0, lo, hi) * gi
        full = np.zeros_like(g)
        full[tuple(interior)] = flux
        out += (_ax_slice(full, slice(1, None), ax)
                - _ax_slice(full, slice(0, -1), ax)) / h
    return out


def l1_norm(f: np.ndarray, dom: BoxDomain) -> float:
    return float(np.sum(np.abs(f)) * dom.cell_volume)


def lq_norm(f: np.ndarray, q: float, dom: BoxDomain) -> float:
    if q == np.inf:
        return linf_norm(f)
    if q < 1:
        raise ValueError("q must be >= 1")
    return float((np.sum(np.abs(f) ** q) * dom.cell_volume) ** (1.0 / q))


def linf_norm(f: np.ndarray) -> float:
    return float(np.abs(f).max())


def grad_lq_norm(f: np.ndarray, q: float, dom: BoxDomain) -> float:
    """L^q norm of the face-based gradient (zero on boundary faces)."""
    if q == np.inf:
        return max_face_gradient(f, dom)
    if q < 1:
        raise ValueError("q must be >= 1")
    acc = 0.0
    for ax in range(dom.ndim):
        g = face_gradient(f, dom, ax)
        acc += float(np.sum(np.abs(g) ** q))
    return float((acc * dom.cell_volume) ** (1.0 / q))


def w1q_norm(f: np.ndarray, q: float, dom: BoxDomain) -> float:
    if q == np.inf:
        return max(linf_norm(f), max_face_gradient(f, dom))
    return float((lq_norm(f, q, dom) ** q + grad_lq_norm(f, q, dom) ** q)
                 ** (1.0 / q))


def norm(f: np.ndarray, kind: str, dom: BoxDomain, q: float | None = None) -> float:
    """Dispatch on kind in {"l1", "lq", "linf", "grad_lq", "w1q"}."""
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    if kind == "l1":
        return l1_norm(f, dom)
    if kind == "linf":
        return linf_norm(f)
    if q is None:
        raise ValueError(f"norm kind {kind!r} needs an exponent q")
    if kind == "lq":
        return lq_norm(f, q, dom)
    if kind == "grad_lq":
        return grad_lq_norm(f, q, dom)
    return w1q_norm(f, q, dom)
