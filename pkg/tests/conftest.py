import numpy as np
import pytest

from gsgw.core.rng import make_rng
from gsgw.schemas.geometry import Mesh
from gsgw.schemas.measures import PointCloud
from gsgw.schemas.solver import AnnealSchedule, SlicerConfig, SolverConfig
from gsgw.services.measures import build_cost_matrix


# Regular icosahedron: 12 vertices, 20 faces, connected edge graph
ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosahedron_vertices() -> np.ndarray:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    return np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)


def off_text(vertices: np.ndarray, faces) -> str:
    lines = ["OFF", f"{len(vertices)} {len(faces)} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in faces]
    return "\n".join(lines) + "\n"


@pytest.fixture
def rng():
    return make_rng(0, "tests")


@pytest.fixture
def cloud_2d(rng):
    return PointCloud(rng.standard_normal((6, 2)))


@pytest.fixture
def cloud_3d(rng):
    return PointCloud(rng.standard_normal((6, 3)))


@pytest.fixture
def two_point_costs():
    """Gromov-Monge value 0.5 under either permutation."""
    Cx = build_cost_matrix(PointCloud(np.array([[0.0], [1.0]])))
    Cy = build_cost_matrix(PointCloud(np.array([[0.0], [2.0]])))
    return Cx, Cy


@pytest.fixture
def tiny_solver_config():
    steps = 20
    return SolverConfig(
        steps=steps, lr=3e-3, restarts=2, eval_every=5, warmup_steps=2, grad_clip=5.0,
        anneal=AnnealSchedule(alpha_start=1.0, alpha_end=0.1, steps=steps),
        slicer=SlicerConfig(hidden_width=16, depth=2, rff_features=4),
        seed=3,
    )


@pytest.fixture
def icosahedron():
    return Mesh(PointCloud(icosahedron_vertices()), np.array(ICOSAHEDRON_FACES))


@pytest.fixture
def icosahedron_off(tmp_path):
    path = tmp_path / "ico.off"
    path.write_text(off_text(icosahedron_vertices(), ICOSAHEDRON_FACES), encoding="utf-8")
    return path


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = "run.cfg"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write
