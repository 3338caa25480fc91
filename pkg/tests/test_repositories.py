import io
import json

import numpy as np
import pytest

from gsgw.exceptions.exceptions import ConfigError, ParseError
from gsgw.repositories.checkpoint_repository import CheckpointRepository, decode_checkpoint, encode_checkpoint
from gsgw.repositories.config_repository import (
    ConfigRepository,
    canonical_text,
    config_hash,
    parse_config_text,
)
from gsgw.repositories.mesh_repository import MeshRepository, encode_npy, parse_npy, parse_obj, parse_off
from gsgw.repositories.result_repository import BASELINE_HEADER, ResultRepository, dumps
from gsgw.schemas.geometry import LabeledCloud, MeshFormat
from gsgw.schemas.measures import Coupling, PointCloud
from gsgw.schemas.run import ResultRecord
from gsgw.schemas.solver import SlicerKind


class TestMeshParsing:
    def test_off_icosahedron(self, icosahedron_off):
        mesh = parse_off(icosahedron_off.read_text())
        assert mesh.vertices.n == 12
        assert mesh.faces.shape == (20, 3)
        assert mesh.source_format is MeshFormat.OFF

    def test_off_quad_is_fan_triangulated(self):
        text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
        np.testing.assert_array_equal(parse_off(text).faces, [[0, 1, 2], [0, 2, 3]])

    def test_off_comments_and_blank_lines(self):
        text = "OFF # header\n\n3 1 0\n0 0 0\n1 0 0 # corner\n0 1 0\n3 0 1 2\n"
        assert parse_off(text).vertices.n == 3

    def test_off_reports_line(self):
        text = "OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n"
        with pytest.raises(ParseError) as excinfo:
            parse_off(text, "bad.off")
        assert excinfo.value.line == 4
        assert excinfo.value.path == "bad.off"

    def test_off_face_index_out_of_range(self):
        with pytest.raises(ParseError):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n")

    def test_off_truncated(self):
        with pytest.raises(ParseError):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n")

    def test_obj_indices(self):
        text = "# cube corner\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 -1\n"
        mesh = parse_obj(text)
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])
        assert mesh.source_format is MeshFormat.OBJ

    def test_obj_without_vertices(self):
        with pytest.raises(ParseError):
            parse_obj("o empty\n")


class TestNpy:
    def test_payload_is_read(self, rng):
        array = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(parse_npy(encode_npy(array)), array)

    def test_float32_is_widened(self):
        buffer = io.BytesIO()
        np.lib.format.write_array(buffer, np.arange(4, dtype="<f4").reshape(2, 2), version=(1, 0))
        out = parse_npy(buffer.getvalue())
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, [[0.0, 1.0], [2.0, 3.0]])

    def test_bad_magic(self):
        with pytest.raises(ParseError) as excinfo:
            parse_npy(b"not an array")
        assert excinfo.value.offset == 0

    def test_truncated_payload(self):
        data = encode_npy(np.ones((4, 2)))
        with pytest.raises(ParseError):
            parse_npy(data[:-8])

    def test_one_dimensional_rejected(self):
        buffer = io.BytesIO()
        np.lib.format.write_array(buffer, np.ones(3), version=(1, 0))
        with pytest.raises(ParseError):
            parse_npy(buffer.getvalue())

    def test_integer_dtype_rejected(self):
        buffer = io.BytesIO()
        np.lib.format.write_array(buffer, np.ones((2, 2), dtype=np.int64), version=(1, 0))
        with pytest.raises(ParseError):
            parse_npy(buffer.getvalue())


class TestMeshRepository:
    def test_format_from_suffix(self, icosahedron_off):
        assert MeshRepository(icosahedron_off.parent).load_mesh("ico.off").vertices.n == 12

    def test_npy_has_no_faces(self, tmp_path, cloud_3d):
        repo = MeshRepository(tmp_path)
        repo.save_npy("cloud.npy", cloud_3d.points)
        mesh = repo.load_mesh("cloud.npy")
        assert mesh.faces is None
        np.testing.assert_array_equal(mesh.vertices.points, cloud_3d.points)

    def test_unknown_suffix(self, tmp_path):
        (tmp_path / "shape.ply").write_text("ply\n")
        with pytest.raises(ParseError):
            MeshRepository(tmp_path).load_mesh("shape.ply")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            MeshRepository(tmp_path).load_mesh("absent.off")

    def test_labeled_cloud_sidecar(self, tmp_path, cloud_3d):
        repo = MeshRepository(tmp_path)
        path = repo.save_labeled_cloud("parts.npy", LabeledCloud(cloud_3d, np.array([0, 0, 1, 1, 1, 0])))
        assert (tmp_path / "parts.labels.txt").is_file()
        loaded = repo.load_labeled_cloud(path)
        np.testing.assert_array_equal(loaded.labels, [0, 0, 1, 1, 1, 0])

    def test_bad_label(self, tmp_path):
        (tmp_path / "labels.txt").write_text("0\n1\nleg\n")
        with pytest.raises(ParseError) as excinfo:
            MeshRepository(tmp_path).load_labels("labels.txt")
        assert excinfo.value.line == 3


class TestCheckpoints:
    def test_save_and_load(self, tmp_path, rng):
        arrays = {"theta": rng.standard_normal(7), "meta": np.array([[1.0, 2.0]]), "scalar": np.array(3.0)}
        repo = CheckpointRepository(tmp_path)
        repo.save("model.ckpt", arrays)
        loaded = repo.load("model.ckpt")
        assert list(loaded) == ["theta", "meta", "scalar"]
        for name, array in arrays.items():
            np.testing.assert_array_equal(loaded[name], array)

    def test_bad_magic(self):
        with pytest.raises(ParseError) as excinfo:
            decode_checkpoint(b"NOPE" + bytes(8))
        assert excinfo.value.offset == 0

    def test_truncated(self):
        data = encode_checkpoint({"theta": np.ones(4)})
        with pytest.raises(ParseError):
            decode_checkpoint(data[:-1])

    def test_trailing_bytes(self):
        data = encode_checkpoint({"theta": np.ones(4)})
        with pytest.raises(ParseError):
            decode_checkpoint(data + b"\0")


class TestConfig:
    def test_sections_and_lists(self):
        raw = parse_config_text("run.seeds = 1,2 , 3  # three seeds\n\nsolver.steps = 10\n")
        assert raw == {"run": {"seeds": "1, 2, 3"}, "solver": {"steps": "10"}}

    def test_hash_ignores_order_and_comments(self):
        first = parse_config_text("solver.steps = 10\nrun.seeds = 1\n")
        second = parse_config_text("# comment\nrun.seeds = 1\nsolver.steps = 10\n")
        assert canonical_text(first) == "run.seeds = 1\nsolver.steps = 10\n"
        assert config_hash(first) == config_hash(second)

    def test_malformed_line(self):
        with pytest.raises(ConfigError):
            parse_config_text("solver steps 10\n")

    def test_key_without_section(self):
        with pytest.raises(ConfigError):
            parse_config_text("steps = 10\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            parse_config_text("solver.steps = 10\nsolver.steps = 20\n")

    def test_load_resolves_paths(self, write_config):
        path = write_config("data.source = shapes/a.off\nrun.out = out\nslicer.kind = linear\n")
        loaded = ConfigRepository().load(path)
        assert loaded.config.data.source == path.parent / "shapes" / "a.off"
        assert loaded.config.run.out == path.parent / "out"
        assert loaded.config.solver_config(5).slicer.kind is SlicerKind.LINEAR
        assert loaded.config.solver_config(5).seed == 5

    @pytest.mark.parametrize("text", ["solver.stepz = 10\n", "unknown.key = 1\n",
                                      "solver.steps = -1\n", "run.seeds = 1, -2\n"])
    def test_rejected_values(self, write_config, text):
        with pytest.raises(ConfigError):
            ConfigRepository().load(write_config(text))

    def test_solver_overrides(self, write_config):
        loaded = ConfigRepository().load(write_config(
            "solver.preset = interpolation\nsolver.steps = 12\nsolver.alpha_end = 0.2\n"))
        cfg = loaded.config.solver_config(0)
        assert cfg.steps == 12
        assert cfg.anneal.steps == 12
        assert cfg.anneal.alpha_end == 0.2


class TestResults:
    def make_record(self, seed):
        return ResultRecord(run_id=f"r{seed}", command="solve", seed=seed, config_hash="abc",
                            metrics={"best_loss": np.float64(0.5), "bad": float("nan")},
                            created_at="2026-01-01T00:00:00+00:00")

    def test_records_are_appended(self, tmp_path):
        repo = ResultRepository(tmp_path)
        repo.append_record(self.make_record(1))
        repo.append_record(self.make_record(2))
        lines = (tmp_path / "results.jsonl").read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["metrics"] == {"bad": None, "best_loss": 0.5}
        assert [r.seed for r in repo.read_records()] == [1, 2]

    def test_summary_is_deterministic(self, tmp_path):
        payload = {"b": np.arange(2), "a": 1.5}
        path = ResultRepository(tmp_path).write_summary("solve", 3, payload)
        assert path.name == "solve_3.json"
        assert path.read_text() == dumps(payload)
        assert list(json.loads(path.read_text())) == ["a", "b"]

    def test_csv_header_and_rows(self, tmp_path):
        repo = ResultRepository(tmp_path)
        path = repo.write_csv("b.csv", BASELINE_HEADER, [("sinkhorn", 1, 0.25, 1e-9, 3.0)])
        assert path.read_bytes() == b"method,seed,loss,feasibility_err,time_ms\nsinkhorn,1,0.25,1e-09,3.0\n"

    def test_csv_row_length_checked(self, tmp_path):
        with pytest.raises(ValueError):
            ResultRepository(tmp_path).write_csv("b.csv", ("a", "b"), [(1,)])

    def test_plan_lists_nonzero_entries(self, tmp_path):
        plan = Coupling(np.array([[0.5, 0.0], [0.0, 0.5]]))
        path = ResultRepository(tmp_path).write_plan("plan.csv", plan)
        assert path.read_text().splitlines() == ["i,j,mass", "0,0,0.5", "1,1,0.5"]

    def test_npy_artifact(self, tmp_path, cloud_2d):
        path = ResultRepository(tmp_path).write_npy("cloud.npy", cloud_2d.points)
        assert isinstance(PointCloud(MeshRepository().read_npy(path)), PointCloud)
