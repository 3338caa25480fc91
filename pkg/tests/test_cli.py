import json

import numpy as np
import pytest

from gsgw.main import main
from gsgw.repositories.mesh_repository import save_npy

TINY_SOLVER = """\
solver.steps = 10
solver.restarts = 1
solver.eval_every = 5
slicer.hidden_width = 8
slicer.depth = 2
slicer.rff_features = 0
"""


@pytest.fixture
def two_point_files(tmp_path):
    save_npy(tmp_path / "x.npy", np.array([[0.0], [1.0]]))
    save_npy(tmp_path / "y.npy", np.array([[0.0], [2.0]]))
    return tmp_path


def read_records(out_dir):
    return [json.loads(line) for line in (out_dir / "results.jsonl").read_text().splitlines()]


class TestSolveCommand:
    def test_two_point_instance(self, two_point_files, write_config, capsys):
        path = write_config("data.source = x.npy\ndata.target = y.npy\nrun.out = out\n" + TINY_SOLVER)
        assert main(["solve", "--config", str(path), "--seed", "0"]) == 0

        out_dir = two_point_files / "out"
        records = read_records(out_dir)
        assert len(records) == 1
        assert records[0]["metrics"]["best_loss"] == pytest.approx(0.5)
        assert records[0]["seed"] == 0
        assert (out_dir / "solve_0.json").is_file()
        assert (out_dir / records[0]["artifacts"]["plan"]).read_text().startswith("i,j,mass\n")
        assert json.loads(capsys.readouterr().out)["run_id"] == records[0]["run_id"]

    def test_run_id_is_stable(self, two_point_files, write_config):
        path = write_config("data.source = x.npy\ndata.target = y.npy\nrun.out = out\n" + TINY_SOLVER)
        main(["solve", "--config", str(path), "--seed", "1"])
        main(["solve", "--config", str(path), "--seed", "1"])
        first, second = read_records(two_point_files / "out")
        assert first["run_id"] == second["run_id"]
        assert first["metrics"] == second["metrics"]

    def test_out_flag_overrides_config(self, two_point_files, write_config, tmp_path):
        path = write_config("data.source = x.npy\ndata.target = y.npy\n" + TINY_SOLVER)
        assert main(["solve", "--config", str(path), "--seed", "0", "--out", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "results.jsonl").is_file()


class TestExitCodes:
    def test_missing_input_file(self, two_point_files, write_config):
        path = write_config("data.source = absent.npy\ndata.target = y.npy\n" + TINY_SOLVER)
        assert main(["solve", "--config", str(path), "--seed", "0"]) == 4

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.cfg")]) == 4

    def test_unknown_key(self, write_config):
        path = write_config("solver.stepz = 10\n")
        assert main(["solve", "--config", str(path)]) == 2

    def test_negative_seed(self, two_point_files, write_config):
        path = write_config("data.source = x.npy\ndata.target = y.npy\n")
        assert main(["solve", "--config", str(path), "--seed", "-1"]) == 2

    def test_source_required(self, write_config):
        assert main(["solve", "--config", str(write_config(TINY_SOLVER))]) == 2


class TestBaselineCommand:
    def test_table_rows(self, tmp_path, write_config, rng):
        save_npy(tmp_path / "x.npy", rng.standard_normal((4, 2)))
        save_npy(tmp_path / "y.npy", rng.standard_normal((5, 3)))
        path = write_config("data.source = x.npy\ndata.target = y.npy\nrun.out = out\n"
                            "baseline.methods = brute_force, sinkhorn\nsinkhorn.epsilons = 0.5\n")
        assert main(["baseline", "--config", str(path), "--seed", "2"]) == 0

        record = read_records(tmp_path / "out")[0]
        # unequal sizes: exhaustive search is recorded as failed
        assert record["metrics"]["failed"] == {"brute_force": "InvalidInputError"}
        assert set(record["metrics"]["loss"]) == {"sinkhorn_0.5"}
        rows = (tmp_path / "out" / record["artifacts"]["table"]).read_text().splitlines()
        assert rows[0] == "method,seed,loss,feasibility_err,time_ms"
        assert rows[1] == "brute_force,2,InvalidInputError,,"
        assert rows[2].startswith("sinkhorn_0.5,2,")


class TestMeshMatchCommand:
    def test_self_match_with_ablation(self, icosahedron_off, write_config):
        path = write_config(f"data.source = {icosahedron_off.name}\ndata.target = {icosahedron_off.name}\n"
                            "run.out = out\nmesh.n_land = 3\nmesh.n_rep = 2\n" + TINY_SOLVER)
        assert main(["mesh-match", "--config", str(path), "--seed", "0", "--ablation"]) == 0

        record = read_records(icosahedron_off.parent / "out")[0]
        errors = record["metrics"]["geodesic_error"]
        assert record["metrics"]["graph"] == "mesh"
        assert {"min_gsgw", "frank_wolfe"} <= set(errors)
        assert sum(key.startswith("ablation_") for key in errors) == 4
        assert all(0.0 <= value <= 1.0 for value in errors.values())
        assert {"landmarks_0", "landmarks_1", "plan"} <= set(record["artifacts"])


class TestInterpolateCommand:
    def test_writes_one_cloud_per_time(self, two_point_files, write_config):
        path = write_config("data.source = x.npy\ndata.target = y.npy\nrun.out = out\n"
                            "interpolate.t = 0.0, 0.5\n" + TINY_SOLVER)
        assert main(["interpolate", "--config", str(path), "--seed", "0"]) == 0
        record = read_records(two_point_files / "out")[0]
        assert set(record["artifacts"]) == {"segment0_t0", "segment0_t0.5"}


class TestBenchCommand:
    def test_timing_table(self, tmp_path, write_config):
        path = write_config("run.out = out\nbench.operations = hard_plan, gw_loss\nbench.sizes = 8, 16\n"
                            "bench.extraction_sizes = 100, 200\nbench.repeats = 1\n")
        assert main(["bench", "--config", str(path), "--seed", "0"]) == 0
        record = read_records(tmp_path / "out")[0]
        rows = (tmp_path / "out" / record["artifacts"]["timings"]).read_text().splitlines()
        assert rows[0] == "operation,n,m,mean_ms,std_ms,repeats"
        assert [row.split(",")[:2] for row in rows[1:]] == [
            ["hard_plan", "100"], ["hard_plan", "200"], ["gw_loss", "8"], ["gw_loss", "16"]]
        assert len(record["timings"]["extraction_doubling_ratios"]) == 1
        assert "gw_loss_loglog_slope" in record["timings"]


class TestAmortizedCommand:
    CONFIG = """\
run.out = out
amortized.k_neighbors = 4
amortized.token_dim = 6
amortized.latent_dim = 6
amortized.epochs = 2
amortized.warmup_epochs = 1
amortized.pairs_per_epoch = 2
amortized.batch_size = 2
amortized.train_shapes = 3
amortized.eval_pairs = 2
amortized.sizes = 16
amortized.solver_pairs = 0
"""

    def test_train_eval_constraints(self, tmp_path, write_config):
        path = str(write_config(self.CONFIG))
        assert main(["amortized", "train", "--config", path, "--seed", "0"]) == 0
        assert (tmp_path / "out" / "amortized_0.gsgw").is_file()
        assert main(["amortized", "eval", "--config", path, "--seed", "0"]) == 0
        assert main(["amortized", "constraints", "--config", path, "--seed", "0"]) == 0

        train, evaluation, constraints = read_records(tmp_path / "out")
        assert train["command"] == "amortized_train"
        assert len(train["metrics"]["epoch_losses"]) == 2
        assert 0.0 <= evaluation["metrics"]["accuracy"] <= 1.0
        assert evaluation["metrics"]["pairs"] == 2
        assert constraints["metrics"]["passed"] is True

    def test_eval_without_checkpoint(self, write_config):
        path = str(write_config(self.CONFIG))
        assert main(["amortized", "eval", "--config", path, "--seed", "0"]) == 4


class TestToyCommand:
    def test_ratio_per_pair(self, tmp_path, write_config):
        path = write_config("run.out = out\ntoy.n_points = 8\ntoy.pairs = line_to_helix\n"
                            "baseline.fw_iters = 10\n" + TINY_SOLVER)
        assert main(["toy", "--config", str(path), "--seed", "0"]) == 0
        record = read_records(tmp_path / "out")[0]
        pair = record["metrics"]["pairs"]["line_to_helix"]
        assert set(pair) == {"min_gsgw", "frank_wolfe", "ratio"}
        assert pair["min_gsgw"] >= 0.0
