"""Single-threaded numba kernels for projection and backprojection.

All kernels are deterministic: plain sequential loops, double-precision
accumulation, single-precision storage.  ``joseph_forward`` and
``joseph_adjoint`` are exact algebraic transposes of each other: they
walk the same ray/slab/corner pattern, one gathering, one scattering.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def joseph_forward(vol, h, x0, y0, z0, srcs, det0, e_u, e_v, pu, pv, out):
    """Ray-driven line integrals with slab marching along the dominant axis.

    vol : (nz, ny, nx) float32, voxel values
    h : isotropic voxel size
    x0, y0, z0 : physical coordinate of voxel (0, 0, 0) center
    srcs, det0, e_u, e_v : per-view source, pixel-(0,0) position, detector axes
    pu, pv : detector pitches
    out : (n_views, n_rows, n_cols) float32, overwritten
    """
    nz, ny, nx = vol.shape
    n_views, n_rows, n_cols = out.shape
    for v in range(n_views):
        # source in continuous index coordinates
        sx = (srcs[v, 0] - x0) / h
        sy = (srcs[v, 1] - y0) / h
        sz = (srcs[v, 2] - z0) / h
        d0x = (det0[v, 0] - x0) / h
        d0y = (det0[v, 1] - y0) / h
        d0z = (det0[v, 2] - z0) / h
        eux = e_u[v, 0] * pu / h
        euy = e_u[v, 1] * pu / h
        euz = e_u[v, 2] * pu / h
        evx = e_v[v, 0] * pv / h
        evy = e_v[v, 1] * pv / h
        evz = e_v[v, 2] * pv / h
        for r in range(n_rows):
            px_r = d0x + r * evx
            py_r = d0y + r * evy
            pz_r = d0z + r * evz
            for c in range(n_cols):
                dx = px_r + c * eux - sx
                dy = py_r + c * euy - sy
                dz = pz_r + c * euz - sz
                ax, ay, az = abs(dx), abs(dy), abs(dz)
                acc = 0.0
                if ax >= ay and ax >= az:
                    inv = 1.0 / dx
                    for i in range(nx):
                        t = (i - sx) * inv
                        fy = sy + t * dy
                        fz = sz + t * dz
                        j0 = int(math.floor(fy))
                        k0 = int(math.floor(fz))
                        wy = fy - j0
                        wz = fz - k0
                        if 0 <= j0 < ny:
                            if 0 <= k0 < nz:
                                acc += vol[k0, j0, i] * (1.0 - wy) * (1.0 - wz)
                            if 0 <= k0 + 1 < nz:
                                acc += vol[k0 + 1, j0, i] * (1.0 - wy) * wz
                        if 0 <= j0 + 1 < ny:
                            if 0 <= k0 < nz:
                                acc += vol[k0, j0 + 1, i] * wy * (1.0 - wz)
                            if 0 <= k0 + 1 < nz:
                                acc += vol[k0 + 1, j0 + 1, i] * wy * wz
                    step = h * math.sqrt(dx * dx + dy * dy + dz * dz) / ax
                elif ay >= ax and ay >= az:
                    inv = 1.0 / dy
                    for j in range(ny):
                        t = (j - sy) * inv
                        fx = sx + t * dx
                        fz = sz + t * dz
                        i0 = int(math.floor(fx))
                        k0 = int(math.floor(fz))
                        wx = fx - i0
                        wz = fz - k0
                        if 0 <= i0 < nx:
                            if 0 <= k0 < nz:
                                acc += vol[k0, j, i0] * (1.0 - wx) * (1.0 - wz)
                            if 0 <= k0 + 1 < nz:
                                acc += vol[k0 + 1, j, i0] * (1.0 - wx) * wz
                        if 0 <= i0 + 1 < nx:
                            if 0 <= k0 < nz:
                                acc += vol[k0, j, i0 + 1] * wx * (1.0 - wz)
                            if 0 <= k0 + 1 < nz:
                                acc += vol[k0 + 1, j, i0 + 1] * wx * wz
                    step = h * math.sqrt(dx * dx + dy * dy + dz * dz) / ay
                else:
                    inv = 1.0 / dz
                    for k in range(nz):
                        t = (k - sz) * inv
                        fx = sx + t * dx
                        fy = sy + t * dy
                        i0 = int(math.floor(fx))
                        j0 = int(math.floor(fy))
                        wx = fx - i0
                        wy = fy - j0
                        if 0 <= i0 < nx:
                            if 0 <= j0 < ny:
                                acc += vol[k, j0, i0] * (1.0 - wx) * (1.0 - wy)
                            if 0 <= j0 + 1 < ny:
                                acc += vol[k, j0 + 1, i0] * (1.0 - wx) * wy
                        if 0 <= i0 + 1 < nx:
                            if 0 <= j0 < ny:
                                acc += vol[k, j0, i0 + 1] * wx * (1.0 - wy)
                            if 0 <= j0 + 1 < ny:
                                acc += vol[k, j0 + 1, i0 + 1] * wx * wy
                    step = h * math.sqrt(dx * dx + dy * dy + dz * dz) / az
                out[v, r, c] = acc * step


@njit(cache=True, nogil=True)
def joseph_adjoint(proj, h, x0, y0, z0, srcs, det0, e_u, e_v, pu, pv, vol_out):
    """Exact transpose of ``joseph_forward``: scatter instead of gather.

    proj : (n_views, n_rows, n_cols) float32
    vol_out : (nz, ny, nx) float64 accumulator, overwritten
    """
    nz, ny, nx = vol_out.shape
    n_views, n_rows, n_cols = proj.shape
    vol_out[:, :, :] = 0.0
    for v in range(n_views):
        sx = (srcs[v, 0] - x0) / h
        sy = (srcs[v, 1] - y0) / h
        sz = (srcs[v, 2] - z0) / h
        d0x = (det0[v, 0] - x0) / h
        d0y = (det0[v, 1] - y0) / h
        d0z = (det0[v, 2] - z0) / h
        eux = e_u[v, 0] * pu / h
        euy = e_u[v, 1] * pu / h
        euz = e_u[v, 2] * pu / h
        evx = e_v[v, 0] * pv / h
        evy = e_v[v, 1] * pv / h
        evz = e_v[v, 2] * pv / h
        for r in range(n_rows):
            px_r = d0x + r * evx
            py_r = d0y + r * evy
            pz_r = d0z + r * evz
            for c in range(n_cols):
                dx = px_r + c * eux - sx
                dy = py_r + c * euy - sy
                dz = pz_r + c * euz - sz
                ax, ay, az = abs(dx), abs(dy), abs(dz)
                if ax >= ay and ax >= az:
                    val = proj[v, r, c] * h * math.sqrt(dx * dx + dy * dy + dz * dz) / ax
                    if val != 0.0:
                        inv = 1.0 / dx
                        for i in range(nx):
                            t = (i - sx) * inv
                            fy = sy + t * dy
                            fz = sz + t * dz
                            j0 = int(math.floor(fy))
                            k0 = int(math.floor(fz))
                            wy = fy - j0
                            wz = fz - k0
                            if 0 <= j0 < ny:
                                if 0 <= k0 < nz:
                                    vol_out[k0, j0, i] += val * (1.0 - wy) * (1.0 - wz)
                                if 0 <= k0 + 1 < nz:
                                    vol_out[k0 + 1, j0, i] += val * (1.0 - wy) * wz
                            if 0 <= j0 + 1 < ny:
                                if 0 <= k0 < nz:
                                    vol_out[k0, j0 + 1, i] += val * wy * (1.0 - wz)
                                if 0 <= k0 + 1 < nz:
                                    vol_out[k0 + 1, j0 + 1, i] += val * wy * wz
                elif ay >= ax and ay >= az:
                    val = proj[v, r, c] * h * math.sqrt(dx * dx + dy * dy + dz * dz) / ay
                    if val != 0.0:
                        inv = 1.0 / dy
                        for j in range(ny):
                            t = (j - sy) * inv
                            fx = sx + t * dx
                            fz = sz + t * dz
                            i0 = int(math.floor(fx))
                            k0 = int(math.floor(fz))
                            wx = fx - i0
                            wz = fz - k0
                            if 0 <= i0 < nx:
                                if 0 <= k0 < nz:
                                    vol_out[k0, j, i0] += val * (1.0 - wx) * (1.0 - wz)
                                if 0 <= k0 + 1 < nz:
                                    vol_out[k0 + 1, j, i0] += val * (1.0 - wx) * wz
                            if 0 <= i0 + 1 < nx:
                                if 0 <= k0 < nz:
                                    vol_out[k0, j, i0 + 1] += val * wx * (1.0 - wz)
                                if 0 <= k0 + 1 < nz:
                                    vol_out[k0 + 1, j, i0 + 1] += val * wx * wz
                else:
                    val = proj[v, r, c] * h * math.sqrt(dx * dx + dy * dy + dz * dz) / az
                    if val != 0.0:
                        inv = 1.0 / dz
                        for k in range(nz):
                            t = (k - sz) * inv
                            fx = sx + t * dx
                            fy = sy + t * dy
                            i0 = int(math.floor(fx))
                            j0 = int(math.floor(fy))
                            wx = fx - i0
                            wy = fy - j0
                            if 0 <= i0 < nx:
                                if 0 <= j0 < ny:
                                    vol_out[k, j0, i0] += val * (1.0 - wx) * (1.0 - wy)
                                if 0 <= j0 + 1 < ny:
                                    vol_out[k, j0 + 1, i0] += val * (1.0 - wx) * wy
                            if 0 <= i0 + 1 < nx:
                                if 0 <= j0 < ny:
                                    vol_out[k, j0, i0 + 1] += val * wx * (1.0 - wy)
                                if 0 <= j0 + 1 < ny:
                                    vol_out[k, j0 + 1, i0 + 1] += val * wx * wy


@njit(cache=True, nogil=True)
def fdk_backproject(filt, cos_b, sin_b, sid, sdd, pu, pv, off_u, off_v,
                    h, x0, y0, z0, vol_out):
    """Voxel-driven weighted backprojection of filtered projections.

    Accumulates ``sum_views (sid / U)^2 * sample`` per voxel, where U is
    the source-to-voxel distance along the central ray and the sample is
    a bilinear read of the filtered view at the voxel's detector trace.
    Angular step and filter scaling are applied by the caller.

    filt : (n_views, n_rows, n_cols) float32 filtered projections
    vol_out : (nz, ny, nx) float64 accumulator, overwritten
    """
    nz, ny, nx = vol_out.shape
    n_views, n_rows, n_cols = filt.shape
    cu = (n_cols - 1) / 2.0
    cv = (n_rows - 1) / 2.0
    vol_out[:, :, :] = 0.0
    sid2 = sid * sid
    for v in range(n_views):
        cb = cos_b[v]
        sb = sin_b[v]
        for j in range(ny):
            y = y0 + j * h
            for i in range(nx):
                x = x0 + i * h
                u_axis = sid - (x * cb + y * sb)
                if u_axis < 1e-9:
                    continue
                lam = sdd / u_axis
                w2 = sid2 / (u_axis * u_axis)
                cf = (lam * (y * cb - x * sb) - off_u) / pu + cu
                c0 = int(math.floor(cf))
                wc = cf - c0
                if c0 < -1 or c0 > n_cols - 1:
                    continue
                for k in range(nz):
                    z = z0 + k * h
                    rf = (lam * z - off_v) / pv + cv
                    r0 = int(math.floor(rf))
                    wr = rf - r0
                    if r0 < -1 or r0 > n_rows - 1:
                        continue
                    s = 0.0
                    if 0 <= r0 < n_rows:
                        if c0 >= 0:
                            s += filt[v, r0, c0] * (1.0 - wr) * (1.0 - wc)
                        if c0 + 1 < n_cols:
                            s += filt[v, r0, c0 + 1] * (1.0 - wr) * wc
                    if 0 <= r0 + 1 < n_rows:
                        if c0 >= 0:
                            s += filt[v, r0 + 1, c0] * wr * (1.0 - wc)
                        if c0 + 1 < n_cols:
                            s += filt[v, r0 + 1, c0 + 1] * wr * wc
                    vol_out[k, j, i] += w2 * s
