"""Sparse-view reconstruction by TV-regularized Poisson likelihood.

Solves

    min_{f >= 0}  sum_i [ (A f)_i - p_i log (A f)_i ] + alpha || |grad f| ||_1

with a diagonally preconditioned primal-dual scheme.  Step sizes come
from the row / column absolute sums of the stacked operator [A; grad],
so no operator norm estimate is needed.  Both dual proximal steps are
closed-form; the primal step ends in a nonnegativity projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import VoxelGrid
from .projector import (
    Domain,
    ProjectionSet,
    Volume,
    back_project_array,
    forward_project_array,
    operator_row_col_sums,
)

# guards division by structurally zero row/column sums (rays that miss
# the grid, voxels no ray touches)
PRECOND_EPS = 1e-12


@dataclass(frozen=True)
class KltvParams:
    """Solver settings.

    alpha : TV regularization weight, > 0.
    n_iter : iteration count, >= 1.
    theta : over-relaxation in [0, 1]; 1 is the plain scheme.
    epsilon_log : floor inside the objective's log, keeps it finite.
    """

    alpha: float = 0.05
    n_iter: int = 500
    theta: float = 1.0
    epsilon_log: float = 1e-8

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not isinstance(self.n_iter, (int, np.integer)) or self.n_iter < 1:
            raise ValueError("n_iter must be an integer >= 1")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")
        if not (self.epsilon_log > 0):
            raise ValueError("epsilon_log must be positive")


def gradient_op(f: np.ndarray) -> np.ndarray:
    """Forward-difference gradient with zero rows at each upper boundary.

    Returns an array of shape ``(3,) + f.shape`` holding the x, y, z
    components; f is indexed [z, y, x].
    """
    f = np.asarray(f)
    g = np.zeros((3,) + f.shape, dtype=f.dtype)
    g[0, :, :, :-1] = f[:, :, 1:] - f[:, :, :-1]
    g[1, :, :-1, :] = f[:, 1:, :] - f[:, :-1, :]
    g[2, :-1, :, :] = f[1:, :, :] - f[:-1, :, :]
    return g


def divergence_op(q: np.ndarray) -> np.ndarray:
    """Negative transpose of :func:`gradient_op`.

    With these boundary conventions ``<grad f, q> == -<f, div q>``
    exactly, which the primal update relies on.
    """
    q = np.asarray(q)
    if q.ndim != 4 or q.shape[0] != 3:
        raise ValueError("expected a (3, nz, ny, nx) field")
    d = np.zeros(q.shape[1:], dtype=q.dtype)
    # each axis: d[0] = q[0], d[i] = q[i] - q[i-1], d[n-1] = -q[n-2];
    # a size-1 axis has an all-zero gradient, so it contributes nothing
    if q.shape[3] > 1:
        d[:, :, 0] += q[0, :, :, 0]
        d[:, :, 1:-1] += q[0, :, :, 1:-1] - q[0, :, :, :-2]
        d[:, :, -1] += -q[0, :, :, -2]
    if q.shape[2] > 1:
        d[:, 0, :] += q[1, :, 0, :]
        d[:, 1:-1, :] += q[1, :, 1:-1, :] - q[1, :, :-2, :]
        d[:, -1, :] += -q[1, :, -2, :]
    if q.shape[1] > 1:
        d[0, :, :] += q[2, 0, :, :]
        d[1:-1, :, :] += q[2, 1:-1, :, :] - q[2, :-2, :, :]
        d[-1, :, :] += -q[2, -2, :, :]
    return d


def kl_objective(f: Volume, p: ProjectionSet, alpha: float,
                 epsilon_log: float = 1e-8) -> float:
    """Kullback-Leibler data term plus weighted isotropic TV.

    The log argument is floored at ``epsilon_log`` so zero forward rays
    do not produce -inf.

    Raises
    ------
    ValueError
        If any measurement in ``p`` is negative.
    """
    pdat = p.data.astype(np.float64)
    if pdat.min() < 0:
        raise ValueError("line integrals must be nonnegative in the KL term")
    af = forward_project_array(f.data, f.grid, p.geom).astype(np.float64)
    data = float(np.sum(af - pdat * np.log(np.maximum(af, epsilon_log))))
    g = gradient_op(f.data.astype(np.float64))
    tv = float(np.sum(np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)))
    return data + float(alpha) * tv


def prox_kl_dual(y_tilde: np.ndarray, p: np.ndarray,
                 sigma: np.ndarray | float) -> np.ndarray:
    """Proximal step of the convex conjugate of the KL data term.

    Closed form: ``y = ((1 + y~) - sqrt((y~ - 1)^2 + 4 sigma p)) / 2``,
    clamped to y <= 1 (the conjugate's domain).  Where p = 0 this reduces
    to ``min(y~, 1)``.
    """
    y_tilde = np.asarray(y_tilde, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    y = 0.5 * (1.0 + y_tilde - np.sqrt((y_tilde - 1.0) ** 2 + 4.0 * sigma * p))
    return np.minimum(y, 1.0)


def prox_tv_dual(q_tilde: np.ndarray, alpha: float) -> np.ndarray:
    """Project each voxel's 3-vector onto the l2 ball of radius alpha."""
    q_tilde = np.asarray(q_tilde)
    norm = np.sqrt(q_tilde[0] ** 2 + q_tilde[1] ** 2 + q_tilde[2] ** 2)
    shrink = np.maximum(1.0, norm / float(alpha))
    return q_tilde / shrink[None]


def compute_preconditioners(
    geom, grid: VoxelGrid
) -> tuple[np.ndarray, float, np.ndarray]:
    """Diagonal step sizes from row/column sums of the stacked operator.

    Returns
    -------
    sigma_data : (n_views, n_rows, n_cols) float64
        ``1 / max(row_sum, eps)`` per detector ray.
    sigma_grad : float
        ``1/2`` per gradient component (each gradient row has two unit
        entries).
    tau : (nz, ny, nx) float64
        ``1 / max(col_sum + 6, eps)`` per voxel; the 6 counts the
        gradient and divergence entries touching a voxel.
    """
    row_sums, col_sums = operator_row_col_sums(geom, grid)
    sigma_data = 1.0 / np.maximum(row_sums.astype(np.float64), PRECOND_EPS)
    tau = 1.0 / np.maximum(col_sums.astype(np.float64) + 6.0, PRECOND_EPS)
    return sigma_data, 0.5, tau


def kltv_reconstruct(
    p: ProjectionSet,
    grid: VoxelGrid,
    params: KltvParams | None = None,
    init: Volume | None = None,
    on_iter: Callable[[int, Volume, float], None] | None = None,
) -> tuple[Volume, list[tuple[int, float]]]:
    """Run the preconditioned primal-dual solver.

    Parameters
    ----------
    p : ProjectionSet
        Nonnegative line integrals.
    grid : VoxelGrid
        Reconstruction grid.
    params : KltvParams
        Solver settings; defaults match the reference protocol
        (alpha=0.05, 500 iterations).
    init : Volume, optional
        Starting point; zeros when omitted.
    on_iter : callable, optional
        Called every 10 iterations (and at the last) as
        ``on_iter(iteration, volume_snapshot, objective)``.  Snapshots
        are read-only copies; mutating them cannot affect the solve.

    Returns
    -------
    (volume, history)
        Final iterate (nonnegative) and ``(iteration, objective)`` pairs
        sampled every 10 iterations.

    Raises
    ------
    ValueError
        On negative measurements or counts-domain input.
    FloatingPointError
        If an iterate stops being finite; the message carries the
        iteration index for diagnosis.
    """
    params = params or KltvParams()
    if p.domain is not Domain.LINE_INTEGRAL:
        raise ValueError("KL-TV expects line integrals; convert counts first")
    pdat = p.data.astype(np.float64)
    if pdat.min() < 0:
        raise ValueError("measurements must be nonnegative")
    geom = p.geom

    sigma_data, sigma_grad, tau = compute_preconditioners(geom, grid)

    if init is not None:
        if init.grid != grid:
            raise ValueError("init volume grid does not match")
        f = init.data.astype(np.float64)
    else:
        f = np.zeros(grid.shape, dtype=np.float64)
    f_bar = f.copy()
    y = np.zeros(pdat.shape, dtype=np.float64)
    q = np.zeros((3,) + grid.shape, dtype=np.float64)

    history: list[tuple[int, float]] = []
    theta = params.theta
    for it in range(1, params.n_iter + 1):
        af_bar = forward_project_array(
            f_bar.astype(np.float32), grid, geom
        ).astype(np.float64)
        y = prox_kl_dual(y + sigma_data * af_bar, pdat, sigma_data)
        q = prox_tv_dual(q + sigma_grad * gradient_op(f_bar), params.alpha)
        aty = back_project_array(
            y.astype(np.float32), geom, grid
        ).astype(np.float64)
        f_new = np.maximum(0.0, f - tau * (aty - divergence_op(q)))
        f_bar = f_new + theta * (f_new - f)
        f = f_new
        if not np.all(np.isfinite(f)):
            raise FloatingPointError(
                f"non-finite iterate at iteration {it}; "
                "check measurement scaling and alpha"
            )
        if it % 10 == 0 or it == params.n_iter:
            vol = Volume(grid, f.astype(np.float32))
            obj = kl_objective(vol, p, params.alpha, params.epsilon_log)
            if it % 10 == 0:
                history.append((it, obj))
            if on_iter is not None:
                snap = vol.data.copy()
                snap.setflags(write=False)
                on_iter(it, Volume(grid, snap), obj)
    return Volume(grid, f.astype(np.float32)), history
