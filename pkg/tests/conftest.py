import numpy as np
import pytest

from hrvem.mesh import PolygonMesh, generate_mesh


@pytest.fixture(scope="session")
def unit_square():
    return PolygonMesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), [[0, 1, 2, 3]])


@pytest.fixture(scope="session")
def l_shape():
    v = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    return PolygonMesh(v, [list(range(6))])


@pytest.fixture(scope="session")
def small_meshes():
    fams = ("TriS", "QuadS", "HexS", "ConcQuadS", "TriU", "QuadU", "PolyU", "ConcHexU")
    return {f: generate_mesh(f, 4, seed=0) for f in fams}
