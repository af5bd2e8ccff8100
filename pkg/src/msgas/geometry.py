"""Periodic label grids and the differential calculus of the Lagrangian map.

Fields are plain numpy arrays whose trailing ``n`` axes index grid points:
a scalar field has shape ``sizes``, a vector field ``(n, *sizes)`` and a
tensor field ``(n, n, *sizes)``. Tensor index order is ``[i, j]`` so that
``xg[i, j] = dx^i/dm^j``.

The map is stored as ``x = B @ m + d`` with a constant matrix ``B`` (the
identity unless a homogeneous strain is imposed) and a periodic displacement
``d``, so derivatives of ``x`` are periodic even though ``x`` is not.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SINGULAR_J = 1e-12


class SingularMapError(RuntimeError):
    """The Lagrangian map has (nearly) vanishing Jacobian somewhere."""

    def __init__(self, indices, min_J):
        self.indices = indices
        self.min_J = min_J
        shown = ", ".join(str(tuple(int(v) for v in ix)) for ix in indices[:8])
        more = "" if len(indices) <= 8 else f" (+{len(indices) - 8} more)"
        super().__init__(
            f"Jacobian <= {SINGULAR_J:g} at {len(indices)} point(s): {shown}{more}; "
            f"min J = {min_J:.6g}"
        )


def periodic_difference(f, axis, h, order):
    """Centered periodic finite difference of ``f`` along a numpy axis."""
    if order == 2:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * h)
    if order == 4:
        d1 = np.roll(f, -1, axis) - np.roll(f, 1, axis)
        d2 = np.roll(f, -2, axis) - np.roll(f, 2, axis)
        return (8.0 * d1 - d2) / (12.0 * h)
    raise ValueError(f"unsupported finite-difference order {order}")


@dataclass(frozen=True)
class LabelGrid:
    sizes: tuple
    dm: tuple
    fd_order: int = 4

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        dm = tuple(float(h) for h in self.dm)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "dm", dm)
        if len(sizes) not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {len(sizes)}")
        if len(dm) != len(sizes):
            raise ValueError("dm must have one entry per dimension")
        if any(s < 8 for s in sizes):
            raise ValueError(f"each grid size must be >= 8, got {sizes}")
        if any(not h > 0 for h in dm):
            raise ValueError(f"label spacings must be positive, got {dm}")
        if self.fd_order not in (2, 4):
            raise ValueError(f"fd_order must be 2 or 4, got {self.fd_order}")

    @classmethod
    def uniform(cls, n, size, length=1.0, fd_order=4):
        return cls((size,) * n, (length / size,) * n, fd_order)

    @property
    def n(self):
        return len(self.sizes)

    @property
    def shape(self):
        return self.sizes

    @property
    def lengths(self):
        return tuple(s * h for s, h in zip(self.sizes, self.dm))

    @property
    def cell_volume(self):
        return float(np.prod(self.dm))

    @property
    def total_volume(self):
        return float(np.prod(self.lengths))

    @cached_property
    def coords(self):
        """Label coordinates ``m`` as a vector field."""
        axes = [np.arange(s) * h for s, h in zip(self.sizes, self.dm)]
        m = np.stack(np.meshgrid(*axes, indexing="ij"))
        m.setflags(write=False)
        return m

    def d(self, f, j):
        """Label derivative d/dm^j of an array whose trailing axes are the grid."""
        if not 0 <= j < self.n:
            raise IndexError(f"label axis {j} out of range for n={self.n}")
        axis = np.ndim(f) - self.n + j
        return periodic_difference(f, axis, self.dm[j], self.fd_order)

    def grad(self, f):
        """All label derivatives stacked on a new trailing-index axis.

        For ``f`` of shape ``(*lead, *sizes)`` returns ``(*lead, n, *sizes)``.
        """
        lead = np.ndim(f) - self.n
        return np.stack([self.d(f, j) for j in range(self.n)], axis=lead)

    def l2(self, f):
        """Volume-weighted L2 norm (root mean square over the label domain)."""
        a = np.abs(np.asarray(f))
        return float(np.sqrt(np.sum(a * a) * self.cell_volume / self.total_volume))


def label_derivative(grid, f, j):
    return grid.d(f, j)


def deformation_gradient(grid, disp, background=None):
    """``x_ij = B_ij + d disp^i / dm^j`` for ``x = B m + disp``."""
    xg = grid.grad(disp)
    B = np.eye(grid.n) if background is None else np.asarray(background)
    return xg + B.reshape(B.shape + (1,) * grid.n)


def jacobian(xg):
    n = xg.shape[0]
    if n == 2:
        return xg[0, 0] * xg[1, 1] - xg[0, 1] * xg[1, 0]
    if n == 3:
        return (
            xg[0, 0] * (xg[1, 1] * xg[2, 2] - xg[1, 2] * xg[2, 1])
            - xg[0, 1] * (xg[1, 0] * xg[2, 2] - xg[1, 2] * xg[2, 0])
            + xg[0, 2] * (xg[1, 0] * xg[2, 1] - xg[1, 1] * xg[2, 0])
        )
    raise ValueError(f"unsupported dimension {n}")


def singular_points(J):
    """Grid indices where the Jacobian is at or below the singular threshold."""
    return np.argwhere(np.real(J) <= SINGULAR_J)


def check_jacobian(J):
    bad = singular_points(J)
    if len(bad):
        raise SingularMapError(bad, float(np.min(np.real(J))))
    return J


def cofactor(xg):
    """Cofactor matrix A with ``A_ij x_kj = J delta_ik``."""
    n = xg.shape[0]
    A = np.empty_like(xg)
    if n == 2:
        A[0, 0] = xg[1, 1]
        A[0, 1] = -xg[1, 0]
        A[1, 0] = -xg[0, 1]
        A[1, 1] = xg[0, 0]
        return A
    if n == 3:
        for i in range(3):
            a, b = (i + 1) % 3, (i + 2) % 3
            for j in range(3):
                p, q = (j + 1) % 3, (j + 2) % 3
                A[i, j] = xg[a, p] * xg[b, q] - xg[a, q] * xg[b, p]
        return A
    raise ValueError(f"unsupported dimension {n}")


def cofactor_derivative(xg, dxg):
    """Directional derivative of the cofactor at ``xg`` along ``dxg``."""
    n = xg.shape[0]
    if n == 2:
        return cofactor(dxg)
    dA = np.empty(np.broadcast_shapes(xg.shape, dxg.shape), dtype=np.result_type(xg, dxg))
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            p, q = (j + 1) % 3, (j + 2) % 3
            dA[i, j] = (
                dxg[a, p] * xg[b, q] + xg[a, p] * dxg[b, q]
                - dxg[a, q] * xg[b, p] - xg[a, q] * dxg[b, p]
            )
    return dA


def piola_divergence(grid, A):
    """Discrete ``dA_ij/dm^j``; zero for exact derivatives."""
    return sum(grid.d(A[:, j], j) for j in range(grid.n))


def inverse_gradient(xg, J):
    """``y_ij = dm^i/dx^j = A_ji / J``."""
    check_jacobian(J)
    A = cofactor(xg)
    return np.swapaxes(A, 0, 1) / J


def eulerian_gradient(grid, f, y):
    """Spatial gradient ``(grad f)_k = y_jk df/dm^j``.

    ``f`` may carry leading component axes; the gradient index is appended
    after them.
    """
    n = grid.n
    df = [grid.d(f, j) for j in range(n)]
    comps = [sum(y[j, k] * df[j] for j in range(n)) for k in range(n)]
    return np.stack(comps, axis=np.ndim(f) - n)


def velocity_gradient(grid, u, y):
    """``G[i, k] = du^i/dx^k``."""
    return eulerian_gradient(grid, u, y)


def base_vectors(xg, y):
    """Covariant and contravariant base vectors.

    Returns ``(e_lo, e_up)`` with ``e_lo[a, i] = dx^i/dm^a`` and
    ``e_up[a, i] = dm^a/dx^i``.
    """
    return np.swapaxes(xg, 0, 1), y


def cross(a, b):
    """Cross product of vector fields; the z component for n=2."""
    if a.shape[0] == 2:
        return a[0] * b[1] - a[1] * b[0]
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def curl_from_gradient(G):
    if G.shape[0] == 2:
        return G[1, 0] - G[0, 1]
    return np.stack([G[2, 1] - G[1, 2], G[0, 2] - G[2, 0], G[1, 0] - G[0, 1]])


def curl(grid, u, y):
    """Eulerian curl of a vector field; scalar z component when n=2."""
    return curl_from_gradient(velocity_gradient(grid, u, y))


def dot(a, b):
    return np.sum(a * b, axis=0)
