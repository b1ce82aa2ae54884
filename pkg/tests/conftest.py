import numpy as np
import pytest

import cbct


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the numba kernels once, outside any timed assertion
    grid = cbct.VoxelGrid(4, 4, 4, voxel_size=0.3)
    geom = cbct.make_circular_geometry(2, 2 * np.pi, sid=60, sdd=100,
                                       n_rows=4, n_cols=4,
                                       pitch_u=0.4, pitch_v=0.4)
    vol = cbct.Volume(grid, np.ones(grid.shape, dtype=np.float32))
    proj = cbct.forward_project(vol, geom)
    cbct.back_project(proj, grid)
    cbct.fdk_reconstruct(proj, grid)


@pytest.fixture
def small_grid():
    return cbct.VoxelGrid(16, 16, 16, voxel_size=0.3)


@pytest.fixture
def small_geom():
    return cbct.make_circular_geometry(8, 2 * np.pi, sid=60, sdd=100,
                                       n_rows=16, n_cols=16,
                                       pitch_u=0.4, pitch_v=0.4)
