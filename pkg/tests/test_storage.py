"""点集文件、报告文件与实验库"""

import json

import numpy as np
import pytest

from discrepancy_lab.exceptions import PointSetFormatError
from discrepancy_lab.haar import RFunction, ShapeVector
from discrepancy_lab.pointset import generate_random
from discrepancy_lab.storage import (BINARY_MAGIC, LabDatabase, load_pointset, save_pointset, write_csv,
                                     write_json_atomic, write_plot_data)


class TestPointSetFiles:
    def test_text_keeps_points_and_generator(self, tmp_path, hammersley_64):
        path = tmp_path / "hammersley.txt"
        save_pointset(hammersley_64, path)
        loaded = load_pointset(path)
        assert loaded == hammersley_64
        assert loaded.generator.name == hammersley_64.generator.name
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "discrepancy-pointset v1 dim=2 n=64 generator=hammersley"
        assert len(lines) == 1 + 64
        assert lines[2] == "0.015625 0.5"

    @pytest.mark.parametrize("header", [
        "discrepancy-pointset v1 dim=2 n=2 generator=manual",
        "# discrepancy-pointset v1 dim=2 n=2 generator=manual",
    ])
    def test_hand_written_text_file(self, tmp_path, header):
        path = tmp_path / "p.txt"
        path.write_text(f"{header}\n0.25 0.5\n0.75 0.125\n", encoding="utf-8")
        loaded = load_pointset(path)
        np.testing.assert_array_equal(loaded.points, [[0.25, 0.5], [0.75, 0.125]])
        assert loaded.generator.name == "manual"

    def test_legacy_generator_info_line(self, tmp_path):
        path = tmp_path / "old.txt"
        info = json.dumps({"name": "random", "params": {"dim": 1}, "seed": 5})
        path.write_text(f"# discrepancy-pointset v1 dim=1 n=1 generator=random\n# generator-info {info}\n0.5\n",
                        encoding="utf-8")
        loaded = load_pointset(path)
        assert loaded.generator.seed == 5
        assert loaded.n_points == 1

    def test_binary_by_extension(self, tmp_path):
        ps = generate_random(3, 40, seed=2)
        path = tmp_path / "points.bin"
        save_pointset(ps, path)
        assert path.read_bytes()[:4] == BINARY_MAGIC
        assert path.stat().st_size == 12 + 8 * 3 * 40
        assert load_pointset(path) == ps

    def test_random_points_exact_in_text(self, tmp_path):
        ps = generate_random(2, 25, seed=3)
        path = tmp_path / "points.txt"
        save_pointset(ps, path)
        np.testing.assert_array_equal(load_pointset(path).points, ps.points)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PointSetFormatError):
            load_pointset(tmp_path / "nope.txt")

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.1 0.2\n", encoding="utf-8")
        with pytest.raises(PointSetFormatError):
            load_pointset(path)

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("# discrepancy-pointset v1 dim=2 n=3 generator=manual\n0.1 0.2\n", encoding="utf-8")
        with pytest.raises(PointSetFormatError):
            load_pointset(path)

    def test_truncated_binary(self, tmp_path, random_2d):
        path = tmp_path / "points.dps"
        save_pointset(random_2d, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(PointSetFormatError):
            load_pointset(path)


class TestReportFiles:
    def test_json_atomic(self, tmp_path):
        path = tmp_path / "out" / "report.json"
        write_json_atomic(path, {"名称": "范数", "value": 1.5})
        assert json.loads(path.read_text(encoding="utf-8")) == {"名称": "范数", "value": 1.5}
        assert not (tmp_path / "out" / "report.json.tmp").exists()

    def test_csv_union_of_columns(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_csv(path, [{"N": 16, "L2": 0.5}, {"N": 32, "L1": 0.25}])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["N,L2,L1", "16,0.5,", "32,,0.25"]

    def test_plot_data(self, tmp_path):
        path = tmp_path / "series.dat"
        write_plot_data(path, [(16, 0.5, 0.25)], "L2")
        assert path.read_text(encoding="utf-8").splitlines() == ["# L2", "# x y sigma", "16 0.5 0.25"]


class TestLabDatabase:
    def test_r_function_cache(self, lab_db):
        f = RFunction.from_signs(ShapeVector((1, 2)), [1, -1, 1, 1, -1, -1, 1, -1])
        assert lab_db.get_r_function("abc", f.shape) is None
        assert lab_db.put_r_function("abc", f)
        assert lab_db.get_r_function("abc", f.shape) == f
        assert lab_db.get_r_function("other", f.shape) is None

    def test_reproducibility_audit(self, lab_db):
        assert lab_db.is_reproducible("cfg") is None
        lab_db.record_run("norms-sweep", "cfg", "r1", 0, 1.0)
        lab_db.record_run("norms-sweep", "cfg", "r1", 0, 2.0)
        assert lab_db.is_reproducible("cfg") is True
        lab_db.record_run("norms-sweep", "cfg", "r2", 0, 1.5)
        assert lab_db.is_reproducible("cfg") is False

    def test_statistics_and_cleanup(self, lab_db):
        lab_db.record_run("tails", "a", "x", 0, 1.0)
        lab_db.record_run("roth-test", "b", "y", 1, 1.0)
        stats = lab_db.get_statistics()
        assert stats["runs"] == 2
        assert stats["by_experiment"] == {"tails": 1, "roth-test": 1}
        assert lab_db.clean_old_runs(days=30) == 0
        assert lab_db.clean_old_runs(days=-1) == 2
        assert lab_db.get_runs() == []

    def test_in_memory(self):
        with LabDatabase(":memory:") as db:
            assert db.get_statistics()["r_functions"] == 0
