"""File formats, configuration parsing and the command-line interface."""

import json
import os

import numpy as np
import pytest

from defectscan import (
    ConfigError,
    GlsmOptions,
    IndicatorMap,
    NearFieldData,
    WaveParams,
    load_config,
    parse_config,
)
from defectscan.cli import main as cli_main
from defectscan.dataio import (
    load_indicator_csv,
    load_near_field,
    near_field_filename,
    save_indicator_csv,
    save_indicator_pgm,
    save_near_field,
    sha256_file,
)

from conftest import TINY_CONFIG


@pytest.fixture
def params():
    return WaveParams(k=2.3, L=2.0, M=3, h=1.2, n_min=2, n_max=2)


def _data(params, rng):
    n = params.indices.size
    return NearFieldData(
        wave=params, side="+", direction="+", variant="perturbed",
        indices=params.indices,
        matrix=rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)),
        noise_level=0.0, seed=3,
    )


class TestNearFieldFiles:
    def test_roundtrip_bit_exact(self, params, rng, tmp_path):
        data = _data(params, rng)
        path = tmp_path / "nf.dat"
        save_near_field(path, data)
        back = load_near_field(path)
        assert np.array_equal(back.matrix, data.matrix)
        assert back.wave == params
        assert back.side == data.side and back.direction == data.direction
        assert back.seed == 3 and back.noise_level == 0.0

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("not a data file\n")
        with pytest.raises(ValueError, match="not a near-field"):
            load_near_field(path)

    def test_rejects_truncated(self, params, rng, tmp_path):
        data = _data(params, rng)
        path = tmp_path / "nf.dat"
        save_near_field(path, data)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ValueError, match="rows"):
            load_near_field(path)

    def test_filenames(self):
        assert near_field_filename("+", "+") == "nearfield_up_top.dat"
        assert near_field_filename("-", "-") == "nearfield_down_bottom.dat"
        assert near_field_filename("+", "-", "periodic") == "nearfield_up_bottom_periodic.dat"


class TestIndicatorFiles:
    def test_csv_roundtrip(self, tmp_path, rng):
        xs = np.linspace(-1, 1, 5)
        ys = np.linspace(-2, 2, 7)
        shape = (5, 7)
        imap = IndicatorMap(
            xs, ys, rng.uniform(size=shape), rng.uniform(size=shape),
            rng.uniform(size=shape), rng.uniform(size=shape),
        )
        path = tmp_path / "indicator.csv"
        save_indicator_csv(path, imap)
        back = load_indicator_csv(path)
        assert np.array_equal(back.values, imap.values)
        assert np.array_equal(back.dterm, imap.dterm)

    def test_pgm_format(self, tmp_path, rng):
        xs = np.linspace(-1, 1, 4)
        ys = np.linspace(-2, 2, 3)
        v = rng.uniform(size=(4, 3))
        imap = IndicatorMap(xs, ys, v, v, v, v)
        path = tmp_path / "indicator.pgm"
        save_indicator_pgm(path, imap)
        lines = path.read_text().splitlines()
        assert lines[0] == "P2"
        assert lines[1] == "4 3"
        assert lines[2] == "255"
        pixels = [int(p) for row in lines[3:] for p in row.split()]
        assert len(pixels) == 12
        assert min(pixels) == 0 and max(pixels) == 255


class TestConfigParsing:
    def test_tiny_config(self):
        loaded = parse_config(TINY_CONFIG)
        assert loaded.media.wave.M == 3
        assert loaded.solver.nx == 48
        assert loaded.imaging.q == 1
        assert loaded.seed == 7
        assert loaded.media.has_defect()

    def test_shipped_examples_parse(self):
        from defectscan.verify import example_config_text

        for number in (1, 2, 3):
            loaded = parse_config(example_config_text(number))
            assert loaded.media.wave.M == 3
            assert loaded.media.wave.indices.size == 33
            assert loaded.media.has_defect()

    @pytest.mark.parametrize(
        "mangle,match",
        [
            (lambda t: t.replace("[wave]", "[wav]"), "wave"),
            (lambda t: t.replace("k = 2.3", "k = -1.0"), "wave"),
            (lambda t: t.replace("nx = 48", "nx = 50"), "divisible"),
            (lambda t: t.replace('shape = "disc"', 'shape = "blob"', 1), "shape"),
            (lambda t: t.replace("radius = 0.3", "radius = -0.3"), "radius"),
            (lambda t: t.replace("alpha0 = 1e-3", "alpha0 = 0.0"), "alpha0"),
            (lambda t: t + "\nnot toml [", "syntax"),
        ],
    )
    def test_invalid_configs(self, mangle, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(mangle(TINY_CONFIG))

    def test_complex_and_matrix_values(self):
        text = TINY_CONFIG.replace("n = 2.0", "n = [2.0, 0.1]").replace(
            "mu_inv = 2.0", "mu_inv = [[2.0, 0.0], [0.0, 1.5]]"
        )
        loaded = parse_config(text)
        _, mu, n = loaded.media.background_cells[0]
        assert n == 2.0 + 0.1j
        entry = loaded.media.defects[0]
        assert np.allclose(entry.mu_inv, np.diag([2.0, 1.5]))

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.toml")


class TestCli:
    def test_simulate_and_image(self, tiny_config, tmp_path, capsys):
        data_dir = tmp_path / "data"
        assert cli_main(["simulate", "--config", str(tiny_config), "--out", str(data_dir)]) == 0
        for direction, side in (("+", "+"), ("-", "-"), ("+", "-"), ("-", "+")):
            assert (data_dir / near_field_filename(direction, side)).exists()
        manifest = json.loads((data_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        for name, digest in manifest["files"].items():
            assert sha256_file(data_dir / name) == digest

        run_dir = tmp_path / "run"
        code = cli_main([
            "image", "--config", str(tiny_config), "--data", str(data_dir),
            "--out", str(run_dir), "--sampling-res", "0.3",
        ])
        assert code == 0
        assert (run_dir / "indicator.csv").exists()
        assert (run_dir / "indicator.pgm").exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["command"] == "image"
        out = capsys.readouterr().out
        assert "indicator max" in out

    def test_simulate_include_periodic(self, tiny_config, tmp_path):
        data_dir = tmp_path / "data"
        code = cli_main([
            "simulate", "--config", str(tiny_config), "--out", str(data_dir),
            "--include-periodic",
        ])
        assert code == 0
        assert (data_dir / "nearfield_up_top_periodic.dat").exists()

    def test_simulate_reproducible(self, tiny_config, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert cli_main(["simulate", "--config", str(tiny_config), "--out", str(d)]) == 0
        for direction, side in (("+", "+"), ("-", "-")):
            name = near_field_filename(direction, side)
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_sweep_alpha(self, tiny_config, tmp_path):
        data_dir = tmp_path / "data"
        cli_main(["simulate", "--config", str(tiny_config), "--out", str(data_dir)])
        run_dir = tmp_path / "sweep"
        code = cli_main([
            "sweep-alpha", "--config", str(tiny_config), "--data", str(data_dir),
            "--out", str(run_dir), "--alpha0s", "1e-2", "1e-3",
            "--point", "0.0", "0.0", "--point", "0.35", "-0.4",
        ])
        assert code == 0
        lines = (run_dir / "alpha_sweep.csv").read_text().splitlines()
        assert lines[0] == "alpha0,x,y,cost_full,cost_q,dterm,indicator"
        assert len(lines) == 1 + 2 * 2  # two alphas x two points

    def test_exit_code_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[wave]\nk = -1.0\nL = 2.0\nM = 3\nh = 1.2\n")
        code = cli_main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_exit_code_missing_data(self, tiny_config, tmp_path, capsys):
        code = cli_main([
            "image", "--config", str(tiny_config),
            "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "run"),
        ])
        assert code == 4

    def test_exit_code_consistency(self, tiny_config, tmp_path, capsys):
        data_dir = tmp_path / "data"
        cli_main(["simulate", "--config", str(tiny_config), "--out", str(data_dir)])
        other = tmp_path / "other.toml"
        other.write_text(TINY_CONFIG.replace("k = 2.3", "k = 2.4"))
        code = cli_main([
            "image", "--config", str(other), "--data", str(data_dir),
            "--out", str(tmp_path / "run"),
        ])
        assert code == 3
        assert "does not match" in capsys.readouterr().err

    def test_verify_fast(self, capsys):
        code = cli_main(["verify", "--level", "fast"])
        out = capsys.readouterr().out
        assert code == 0
        assert "checks passed" in out
        assert "FAIL" not in out

    def test_image_noise_applied_from_config(self, tiny_config, tmp_path):
        # the configured delta/seed perturb the data; delta 0 must not
        data_dir = tmp_path / "data"
        cli_main(["simulate", "--config", str(tiny_config), "--out", str(data_dir)])
        r1, r2, r3 = (tmp_path / n for n in ("r1", "r2", "r3"))
        for out, delta in ((r1, None), (r2, None), (r3, 0.0)):
            argv = [
                "image", "--config", str(tiny_config), "--data", str(data_dir),
                "--out", str(out), "--sampling-res", "0.5",
            ]
            if delta is not None:
                argv += ["--delta", str(delta)]
            assert cli_main(argv) == 0
        csv1 = (r1 / "indicator.csv").read_bytes()
        assert csv1 == (r2 / "indicator.csv").read_bytes()  # same seed, same noise
        assert csv1 != (r3 / "indicator.csv").read_bytes()


class TestGlsmOptionOverrides:
    def test_cli_overrides_config(self, tiny_config, tmp_path):
        loaded = load_config(tiny_config)
        assert loaded.imaging.alpha0 == pytest.approx(1e-3)
        assert loaded.imaging.delta == pytest.approx(0.01)
        assert isinstance(loaded.imaging, GlsmOptions)
