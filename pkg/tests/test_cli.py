import csv
import json

import numpy as np
import pytest

from fracphi import __version__
from fracphi.cli import main

SMALL = ["--set", "grid.n=512"]


def run(tmp_path, *argv):
    return main(list(argv) + ["--out-dir", str(tmp_path)])


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.reader(lines[1:]))


def test_density_rows_and_header(tmp_path):
    assert run(tmp_path, "density", "--set", "density.x={start: -5, stop: 5, num: 41}") == 0
    head, rows = read_csv(tmp_path / "density.csv")
    assert head.startswith(f"# fracphi {__version__} config_sha256=")
    assert rows[0] == ["x", "p", "lower", "upper"]
    data = np.array(rows[1:], float)
    assert data.shape == (41, 4)
    assert np.allclose(data[:, 1], 1 / (np.pi * (1 + data[:, 0] ** 2)), rtol=1e-6)
    assert np.all(data[:, 2] <= data[:, 1]) and np.all(data[:, 1] <= data[:, 3])


def test_spectrum_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "spectrum", *SMALL) == 0
    assert run(b, "spectrum", *SMALL, "--threads", "3") == 0
    for name in ("spectrum.json", "phi0.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    doc = json.loads((a / "spectrum.json").read_text())
    assert doc["gap"] > 0 and not doc["no_ground_state"]
    assert doc["meta"]["fracphi_version"] == __version__


def test_spectrum_free_flag(tmp_path):
    assert run(tmp_path, "spectrum", *SMALL, "--set", "potential.name=zero") == 0
    assert json.loads((tmp_path / "spectrum.json").read_text())["no_ground_state"]


def test_config_hash_tracks_content(tmp_path):
    run(tmp_path / "a", "spectrum", *SMALL)
    run(tmp_path / "b", "spectrum", "--set", "grid.n=256")
    sha = [json.loads((tmp_path / d / "spectrum.json").read_text())["meta"]["config_sha256"]
           for d in ("a", "b")]
    assert sha[0] != sha[1]


def test_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("grid: {n: 256, L: 15}\npotential: {name: power, delta: 4}\n")
    assert run(tmp_path, "spectrum", "-c", str(cfg)) == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["grid"]["n"] == 256


def test_iuc_verdict(tmp_path):
    assert run(tmp_path, "iuc", *SMALL) == 0
    doc = json.loads((tmp_path / "iuc.json").read_text())
    assert doc["verdict"]["class"] == "IUC"
    assert (tmp_path / "iuc_ratio.csv").exists()


def test_gibbs_dlr(tmp_path):
    assert run(tmp_path, "gibbs", *SMALL, "--set", "gibbs.dlr={n_pairs: 5}") == 0
    doc = json.loads((tmp_path / "gibbs.json").read_text())
    assert doc["dlr"]["max_abs_err"] < 1e-8 and doc["dlr"]["passed"]
    assert doc["chain_checks"]["ok"]


def test_gibbs_typical_needs_seed(tmp_path):
    assert run(tmp_path, "gibbs", *SMALL, "--set", "gibbs.typical={n_paths: 20}") == 2


def test_paths_deterministic(tmp_path):
    args = ["paths", "--seed", "9", "--set", "paths.n_paths=5"]
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args, "--threads", "2") == 0
    a, b = np.load(tmp_path / "a" / "paths.npy"), np.load(tmp_path / "b" / "paths.npy")
    assert a.shape[0] == 5 and np.array_equal(a, b)
    assert run(tmp_path / "c", "paths", "--seed", "10", "--set", "paths.n_paths=5") == 0
    assert not np.array_equal(a, np.load(tmp_path / "c" / "paths.npy"))


def test_paths_chain_and_bridge(tmp_path):
    assert run(tmp_path / "c", "paths", "--seed", "1", *SMALL, "--set", "paths.kind=chain",
               "--set", "paths.n_steps=10", "--set", "paths.start=0.0") == 0
    pos = np.load(tmp_path / "c" / "paths.npy")
    assert np.all(pos[:, 10] == 0.0)
    assert run(tmp_path / "b", "paths", "--seed", "1", "--set", "paths.kind=bridge",
               "--set", "paths.y=2.0", "--set", "paths.n_paths=3") == 0
    pos = np.load(tmp_path / "b" / "paths.npy")
    assert np.allclose(pos[:, 0], 0.0) and np.allclose(pos[:, -1], 2.0)


def test_fk_kernel(tmp_path):
    assert run(tmp_path, "fk", "--seed", "3", "--set", "mc.n_paths=500",
               "--set", "mc.dt=0.05") == 0
    doc = json.loads((tmp_path / "fk.json").read_text())
    assert doc["estimate"] > 0 and doc["stderr"] > 0


def test_kato(tmp_path):
    assert run(tmp_path, "kato", "--set", "potential.name=well") == 0
    assert json.loads((tmp_path / "kato.json").read_text())["verdict"] == "kato"


@pytest.mark.parametrize("argv,code", [
    (["fk"], 2),
    (["spectrum", "--set", "potential.name=nope"], 2),
    (["spectrum", "--set", "grid.n=1000"], 2),
    (["fk", "--seed", "1", "--set", "potential={name: constant, c: -800}",
      "--set", "mc.n_paths=200"], 3),
    (["density", "--set", "density.t=0"], 4),
    (["fk", "--seed", "1", "--set", "fk.t=-1"], 4),
])
def test_exit_codes(tmp_path, argv, code):
    assert run(tmp_path, *argv) == code


def test_figures_opt_in(tmp_path):
    pytest.importorskip("matplotlib")
    assert run(tmp_path, "iuc", *SMALL, "--figures") == 0
    assert (tmp_path / "iuc_ratio.png").stat().st_size > 0
    assert run(tmp_path / "plain", "iuc", *SMALL) == 0
    assert not list((tmp_path / "plain").glob("*.png"))
