import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import expected
from conftest import random_params
from tensorcond import (Params, build_terracini, cpdcond, cpdgen, distance, iterated_scaling,
                        kernel_basis)
from tensorcond.cli import EXPERIMENTS, main, thread_cap
from tensorcond.io import write_params, write_tensor
from tensorcond.lab import desilva_lim_vectors, random_kernel_direction, seq_desilva_lim


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, p in [("sec92", Params.from_factors(expected.SEC92_F)),
                    ("sec91", Params.from_factors([expected.SEC91_A, expected.SEC91_B, expected.SEC91_C])),
                    ("big", random_params((2, 2, 2), 3, 0)),
                    ("warn", Params.from_factors(seq_desilva_lim(90, desilva_lim_vectors(0)))),
                    ("other", random_params((3, 3, 2), 2, 4))]:
        write_params(p, tmp_path / f"{name}.json")
        out[name] = tmp_path / f"{name}.json"
    return out


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestCond:
    def test_sec92(self, capsys, files):
        code, out, err = run(capsys, "cond", files["sec92"])
        rep = json.loads(out)
        assert code == 0 and err == ""
        assert abs(rep["kappa_rel"] - expected.SEC92_KAPPA) <= 1e-4 * expected.SEC92_KAPPA

    def test_not_subgeneric(self, capsys, files):
        code, out, err = run(capsys, "cond", files["big"])
        assert code == 3 and "not subgeneric" in err
        assert json.loads(out)["kappa_rel"] is None

    def test_accuracy_warning(self, capsys, files):
        code, out, err = run(capsys, "cond", files["warn"])
        assert code == 2 and json.loads(out)["accuracy_warning"] is True and "warning" in err

    def test_unbalanced(self, capsys, files):
        _, out, _ = run(capsys, "cond", "--unbalanced", files["other"])
        rep = json.loads(out)
        lib = cpdcond(random_params((3, 3, 2), 2, 4), balance=False)
        assert rep["balanced"] is False and rep["kappa_abs"] == lib.kappa_abs

    def test_malformed(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"dims": [2, 2],\n  "rank": 1 "factors": []}')
        code, out, err = run(capsys, "cond", bad)
        assert code == 1 and out == "" and "line 2, column" in err

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "cond", tmp_path / "nope.json")
        assert code == 1 and out == "" and err

    def test_out_option(self, capsys, files, tmp_path):
        code, out, _ = run(capsys, "cond", files["sec91"], "--out", tmp_path / "r.json")
        assert code == 0 and out == ""
        assert abs(json.loads((tmp_path / "r.json").read_text())["kappa_rel"] - 0.769) <= 1e-3


class TestUsage:
    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, "bogus")
        assert code == 1 and "invalid choice" in err

    def test_seed_required(self, capsys):
        code, _, err = run(capsys, "experiment", "odeco-sweep")
        assert code == 1 and "--seed" in err

    def test_positive_tolerance(self, capsys, files):
        code, _, _ = run(capsys, "kruskal", files["sec91"], "--kruskal-tol", "-1")
        assert code == 1

    def test_console_script(self, files):
        res = subprocess.run([sys.executable, "-m", "tensorcond.cli", "cond", str(files["sec91"])],
                             capture_output=True, text=True)
        assert res.returncode == 0 and json.loads(res.stdout)["subgeneric"] is True


class TestGen:
    def test_deterministic_files(self, capsys, tmp_path):
        for name in ("a", "b"):
            assert run(capsys, "gen", "--dims", "3,3,2", "--rank", 2, "--seed", 7,
                       "--out", tmp_path / f"{name}.json")[0] == 0
        run(capsys, "gen", "--dims", "3,3,2", "--rank", 2, "--seed", 8, "--out", tmp_path / "c.json")
        a, b, c = ((tmp_path / f"{n}.json").read_bytes() for n in "abc")
        assert a == b and a != c

    def test_bad_dims(self, capsys):
        assert run(capsys, "gen", "--dims", "3,x", "--rank", 1, "--seed", 0)[0] == 1


def _read_csv_matrix(text):
    return np.array([[float(x) for x in row] for row in csv.reader(text.splitlines())])


class TestMatrices:
    def test_terracini(self, capsys, files):
        code, out, _ = run(capsys, "terracini", files["sec92"])
        T = build_terracini(Params.from_factors(expected.SEC92_F)).matrix
        assert code == 0 and np.array_equal(_read_csv_matrix(out), T)

    def test_kernel(self, capsys, files):
        code, out, _ = run(capsys, "kernel", files["sec91"])
        K = kernel_basis(Params.from_factors([expected.SEC91_A, expected.SEC91_B, expected.SEC91_C])).matrix
        assert code == 0 and np.array_equal(_read_csv_matrix(out), K)


class TestAdapters:
    def test_distance(self, capsys, files):
        code, out, _ = run(capsys, "distance", files["sec92"], files["other"])
        lib = distance(Params.from_factors(expected.SEC92_F), random_params((3, 3, 2), 2, 4))
        got = json.loads(out)
        assert code == 0 and got == json.loads(json.dumps(lib.to_dict()))

    def test_isl_random(self, capsys, files, tmp_path):
        code, out, err = run(capsys, "isl", files["sec91"], "--nabla-norm", "1e-4",
                             "--kernel-dir", "random:3", "--trace-csv", tmp_path / "tr.csv")
        p = Params.from_factors([expected.SEC91_A, expected.SEC91_B, expected.SEC91_C])
        lib = iterated_scaling(p, 1e-4 * random_kernel_direction(p, 3))
        got = json.loads(out)
        assert code == 0 and got["p_dot"] == lib.p_dot.data.tolist()
        lines = (tmp_path / "tr.csv").read_text().splitlines()
        assert lines[0] == "k,nabla_norm" and len(lines) == len(lib.nabla_norms) + 1

    def test_isl_index_and_warning(self, capsys, files):
        code, out, err = run(capsys, "isl", files["sec91"], "--nabla-norm", "1e-2", "--kernel-dir", "index:2")
        assert code == 0 and "warning" in err and json.loads(out)["converged"] is True
        assert run(capsys, "isl", files["sec91"], "--nabla-norm", "1e-2", "--kernel-dir", "9")[0] == 1

    def test_isl_failure(self, capsys, files):
        code, out, err = run(capsys, "isl", files["sec91"], "--nabla-norm", "1e-2", "--max-iter", "1")
        assert code == 4 and out == "" and "converge" in err

    def test_gevd(self, capsys, files, tmp_path):
        p = random_params((5, 4, 3), 2, 1)
        write_tensor(cpdgen(p), tmp_path / "t.json")
        code, out, _ = run(capsys, "gevd", tmp_path / "t.json", "--rank", 2)
        obj = json.loads(out)
        assert code == 0 and obj["dims"] == [5, 4, 3] and obj["rank"] == 2

    def test_gevd_failure(self, capsys, tmp_path):
        from tensorcond import DenseTensor
        from tensorcond.rng import SeededRng

        write_tensor(DenseTensor((2, 2, 2), SeededRng(1).standard_normal(8)), tmp_path / "t.json")
        code, out, err = run(capsys, "gevd", tmp_path / "t.json", "--rank", 2)
        assert code == 4 and out == "" and "complex" in err

    def test_kruskal(self, capsys, files):
        code, out, _ = run(capsys, "kruskal", files["sec91"])
        assert code == 0 and json.loads(out) == {"k_ranks": [2, 2, 2], "rank": 2, "bound": 2.0,
                                                 "satisfied": True}


class TestExperiment:
    SMALL = {"isl-convergence": (1, 2), "worst-direction": (8, 8), "rank1-sweep": (3, 4),
             "odeco-sweep": (0, 3), "ill-conditioned": (1, 3), "desilva-lim": (5, 7),
             "paatero": (20, 22)}

    @pytest.mark.parametrize("kind", EXPERIMENTS)
    def test_runs_and_repeats(self, capsys, kind):
        lo, hi = self.SMALL[kind]
        args = ("experiment", kind, "--seed", 3, "--s-min", lo, "--s-max", hi)
        code, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert code == 0 and first == second and len(first.splitlines()) >= 2

    def test_error_header(self, capsys):
        _, out, _ = run(capsys, "experiment", "ill-conditioned", "--seed", 0, "--s-min", 1, "--s-max", 2)
        assert out.splitlines()[0] == "s,backward,forward_proxy,orbit_forward,kappa,bound,warned,solver_failed"

    def test_threads(self, capsys, monkeypatch):
        args = ("experiment", "desilva-lim", "--seed", 1, "--s-min", 5, "--s-max", 12)
        _, serial, _ = run(capsys, *args)
        _, threaded, _ = run(capsys, *args, "--threads", 4)
        monkeypatch.setenv("TERRACINI_THREADS", "2")
        _, capped, _ = run(capsys, *args, "--threads", 4)
        assert serial == threaded == capped

    def test_thread_cap(self, monkeypatch):
        monkeypatch.delenv("TERRACINI_THREADS", raising=False)
        assert thread_cap(None) == 1 and thread_cap(6) == 6
        monkeypatch.setenv("TERRACINI_THREADS", "2")
        assert thread_cap(None) == 2 and thread_cap(6) == 2

    def test_odeco_range_checked(self, capsys):
        assert run(capsys, "experiment", "odeco-sweep", "--seed", 0, "--s-max", 16)[0] == 1
