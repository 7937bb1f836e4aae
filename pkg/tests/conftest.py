import numpy as np
import pytest

from curlamr.mesh import TetMesh, build_box_mesh


@pytest.fixture
def unit_cube():
    return build_box_mesh(((0, 1), (0, 1), (0, 1)), 1)


@pytest.fixture
def one_tet():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return TetMesh(verts, [[0, 1, 2, 3]])


@pytest.fixture
def two_tets():
    # share face (1,2,3)
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                      [1.0, 1, 1]])
    return TetMesh(verts, [[0, 1, 2, 3], [4, 1, 2, 3]])


@pytest.fixture
def random_tet_mesh():
    rng = np.random.default_rng(3)
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    verts = verts + 0.15 * rng.standard_normal((4, 3))
    return TetMesh(verts, [[0, 1, 2, 3]])
