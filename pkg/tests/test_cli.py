"""Command-line interface: subcommands, manifests, reruns, exit codes."""

import json
import math
import os

import numpy as np
import pytest

from shadowtrack import NumericalError, cli, fileio


def run_cli(*argv):
    return cli.main(list(argv))


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


def dir_snapshot(root):
    snapshot = {}
    for name in sorted(os.listdir(root)):
        snapshot[name] = read_bytes(os.path.join(root, name))
    return snapshot


class TestGenerate:
    def test_rednoise_outputs(self, tmp_path, capsys):
        out = str(tmp_path)
        assert run_cli("generate", "rednoise", "--seed", "3", "--out", out) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        names = sorted(os.listdir(out))
        assert names == [
            "rednoise-seed3-manifest.json",
            "rednoise-seed3-observations.csv",
            "rednoise-seed3-truth.csv",
        ]
        assert [os.path.basename(line) for line in printed] == [
            "rednoise-seed3-observations.csv",
            "rednoise-seed3-truth.csv",
        ]
        manifest = fileio.read_json(os.path.join(out, "rednoise-seed3-manifest.json"))
        assert manifest["format"] == fileio.MANIFEST_FORMAT
        assert manifest["digest"] == fileio.manifest_digest(manifest)
        series = fileio.read_scalar_observations(
            os.path.join(out, "rednoise-seed3-observations.csv")
        )
        assert series.values.size == 101

    def test_csv_header_carries_manifest_digest(self, tmp_path):
        out = str(tmp_path)
        run_cli("generate", "rednoise", "--seed", "0", "--out", out)
        manifest = fileio.read_json(os.path.join(out, "rednoise-seed0-manifest.json"))
        table = fileio.read_table(os.path.join(out, "rednoise-seed0-observations.csv"))
        assert table.meta["manifest"] == manifest["digest"]

    def test_missing_fraction_thins_interior(self, tmp_path):
        out = str(tmp_path)
        run_cli(
            "generate", "rednoise", "--seed", "1", "--out", out,
            "--missing-fraction", "0.75",
        )
        series = fileio.read_scalar_observations(
            os.path.join(out, "rednoise-seed1-observations.csv")
        )
        assert series.values.size == 26
        manifest = fileio.read_json(os.path.join(out, "rednoise-seed1-manifest.json"))
        retained = manifest["scenario"]["retained_indices"]
        assert len(retained) == 26
        assert retained[0] == 0 and retained[-1] == 100

    def test_sonar_outputs_geometry(self, tmp_path):
        out = str(tmp_path)
        assert run_cli("generate", "sonar", "--seed", "1", "--out", out) == 0
        manifest = fileio.read_json(os.path.join(out, "sonar-seed1-manifest.json"))
        geometry = manifest["geometry"]
        assert geometry["kind"] == "two-bearings"
        assert geometry["site_a"]["start"] == [-3.0, 3.0]
        assert geometry["site_b"]["end"] == [3.0, -1.0]
        times, bearings, variances = fileio.read_bearings(
            os.path.join(out, "sonar-seed1-bearings.csv")
        )
        assert bearings.shape == (times.size, 2)

    def test_range_bearing_outputs(self, tmp_path):
        out = str(tmp_path)
        assert run_cli("generate", "range-bearing", "--seed", "2", "--out", out) == 0
        manifest = fileio.read_json(
            os.path.join(out, "range-bearing-seed2-manifest.json")
        )
        assert manifest["geometry"]["kind"] == "range-bearing"
        times, observations = fileio.read_polar_observations(
            os.path.join(out, "range-bearing-seed2-polar.csv")
        )
        assert all(obs.distance > 0 for obs in observations)

    def test_unknown_scenario_exits_2(self, tmp_path, capsys):
        assert run_cli("generate", "mystery", "--out", str(tmp_path)) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_fraction_rejected_for_planar(self, tmp_path):
        code = run_cli(
            "generate", "planar", "--out", str(tmp_path),
            "--missing-fraction", "0.5",
        )
        assert code == 2


class TestFilter:
    def make_obs(self, tmp_path):
        out = str(tmp_path / "gen")
        run_cli("generate", "rednoise", "--seed", "2", "--out", out)
        return os.path.join(out, "rednoise-seed2-observations.csv")

    def test_eta_mode(self, tmp_path, capsys):
        obs = self.make_obs(tmp_path)
        out = str(tmp_path / "fit")
        assert run_cli("filter", obs, "--eta", "100", "--out", out) == 0
        traj_path = os.path.join(out, "rednoise-seed2-observations-eta100-trajectory.csv")
        assert os.path.exists(traj_path)
        table = fileio.read_table(traj_path, expect_schema=fileio.SCHEMA_TRAJECTORY)
        assert len(table.rows) == 101
        manifest = fileio.read_json(
            os.path.join(out, "rednoise-seed2-observations-eta100-manifest.json")
        )
        assert manifest["result"]["rank"] > 0
        assert manifest["result"]["rms_acceleration"] > 0

    def test_xi_mode_records_search(self, tmp_path):
        obs = self.make_obs(tmp_path)
        out = str(tmp_path / "fit")
        assert run_cli("filter", obs, "--xi", "0.05", "--out", out) == 0
        manifest_path = os.path.join(
            out, "rednoise-seed2-observations-xi0.05-manifest.json"
        )
        manifest = fileio.read_json(manifest_path)
        search = manifest["search"]
        assert search["iterations"] >= 1
        assert search["eta"] > 0
        assert math.isfinite(search["xi"])

    def test_linear_data_yields_zero_acceleration_columns(self, tmp_path):
        times = np.arange(8.0)
        obs_path = str(tmp_path / "line.csv")
        fileio.write_scalar_observations(
            obs_path, times, 1.0 + 2.0 * times, np.ones(8)
        )
        out = str(tmp_path / "fit")
        assert run_cli("filter", obs_path, "--eta", "1", "--out", out) == 0
        table = fileio.read_table(
            os.path.join(out, "line-eta1-trajectory.csv")
        )
        accel = table.floats("a")[:-1]
        scaled = table.floats("a_scaled")[:-1]
        assert np.abs(accel).max() <= 1e-9
        assert np.array_equal(scaled, accel * 1.0)
        assert table.rows[-1][table.column_index("a")] == ""

    def test_vector_observations_dispatch(self, tmp_path):
        times = np.arange(6.0)
        values = np.column_stack([1.0 + times, 2.0 - times])
        informations = np.stack([np.eye(2)] * 6)
        obs_path = str(tmp_path / "vec.csv")
        fileio.write_vector_observations(obs_path, times, values, informations)
        out = str(tmp_path / "fit")
        assert run_cli("filter", obs_path, "--eta", "10", "--out", out) == 0
        table = fileio.read_table(os.path.join(out, "vec-eta10-trajectory.csv"))
        assert table.names[:3] == ("t", "px", "py")
        assert np.abs(table.floats("px") - (1.0 + times)).max() <= 1e-8

    def test_eta_and_xi_mutually_exclusive(self, tmp_path, capsys):
        obs = self.make_obs(tmp_path)
        with pytest.raises(SystemExit) as info:
            run_cli("filter", obs, "--eta", "1", "--xi", "0.1")
        assert info.value.code == 2

    def test_nonpositive_eta_exits_2(self, tmp_path):
        obs = self.make_obs(tmp_path)
        assert run_cli("filter", obs, "--eta", "-5") == 2

    def test_unreachable_xi_bracket_exits_2(self, tmp_path):
        obs = self.make_obs(tmp_path)
        assert run_cli(
            "filter", obs, "--xi", "1e-12", "--bracket", "1e-4", "1e8"
        ) == 2

    def test_missing_input_exits_3(self, tmp_path):
        assert run_cli("filter", str(tmp_path / "ghost.csv"), "--eta", "1") == 3

    def test_wrong_schema_exits_3(self, tmp_path):
        path = str(tmp_path / "truth.csv")
        fileio.write_truth(path, np.arange(4.0), np.arange(4.0))
        assert run_cli("filter", path, "--eta", "1") == 3

    def test_numerical_error_exits_4(self, tmp_path, monkeypatch):
        obs = self.make_obs(tmp_path)

        def explode(args):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli, "cmd_filter", explode)
        assert run_cli("filter", obs, "--eta", "1") == 4


class TestTrack:
    def test_scalar_stream_with_gaps(self, tmp_path):
        times = np.arange(10.0)
        values = 2.0 + 3.0 * times
        values[6] = math.nan
        obs_path = str(tmp_path / "stream.csv")
        fileio.write_scalar_observations(obs_path, times, values, np.ones(10))
        out = str(tmp_path / "trk")
        assert run_cli("track", obs_path, "--eta", "5", "--out", out) == 0
        table = fileio.read_table(
            os.path.join(out, "stream-track.csv"), expect_schema=fileio.SCHEMA_TRACK
        )
        provenance = table.strings("provenance")
        assert provenance[6] == "dropped"
        assert provenance[5] == "observed"
        positions = table.floats("p")
        assert abs(positions[6] - (2.0 + 3.0 * 6)) <= 1e-6
        assert abs(positions[-1] - (2.0 + 3.0 * 9)) <= 1e-6

    def test_forecast_policy_marks_gap_rows(self, tmp_path):
        times = np.arange(10.0)
        values = 2.0 + 3.0 * times
        values[6] = math.nan
        obs_path = str(tmp_path / "stream.csv")
        fileio.write_scalar_observations(obs_path, times, values, np.ones(10))
        out = str(tmp_path / "trk")
        assert run_cli(
            "track", obs_path, "--eta", "5", "--out", out,
            "--policy", "forecast-insert",
        ) == 0
        table = fileio.read_table(os.path.join(out, "stream-track.csv"))
        assert table.strings("provenance")[6] == "forecast-inserted"

    def test_raw_estimate_stream(self, tmp_path):
        gen_dir = str(tmp_path / "gen")
        run_cli("generate", "range-bearing", "--seed", "1", "--out", gen_dir)
        manifest = fileio.read_json(
            os.path.join(gen_dir, "range-bearing-seed1-manifest.json")
        )
        geo_path = str(tmp_path / "geo.json")
        fileio.write_json(geo_path, {"geometry": manifest["geometry"]})
        polar = os.path.join(gen_dir, "range-bearing-seed1-polar.csv")
        xform_dir = str(tmp_path / "xf")
        assert run_cli("transform", polar, geo_path, "--out", xform_dir) == 0
        raw = os.path.join(xform_dir, "range-bearing-seed1-polar-raw-estimates.csv")
        out = str(tmp_path / "trk")
        assert run_cli("track", raw, "--eta", "1000", "--out", out) == 0
        table = fileio.read_table(
            os.path.join(out, "range-bearing-seed1-polar-raw-estimates-track.csv")
        )
        assert table.names[:3] == ("t", "px", "py")
        assert np.isfinite(table.floats("px")).all()

    def test_all_gap_stream_emits_nan_placeholders(self, tmp_path):
        times = np.arange(5.0)
        values = np.full(5, math.nan)
        obs_path = str(tmp_path / "empty.csv")
        fileio.write_scalar_observations(obs_path, times, values, np.ones(5))
        assert run_cli("track", obs_path, "--out", str(tmp_path / "trk")) == 0
        table = fileio.read_table(
            str(tmp_path / "trk" / "empty-track.csv"),
            expect_schema=fileio.SCHEMA_TRACK,
        )
        assert np.isnan(table.floats("p")).all()
        assert table.strings("provenance") == ["dropped"] * 5
        assert np.array_equal(table.floats("weight"), np.zeros(5))

    def test_out_of_order_stream_names_row(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# schema=shadowtrack.scalar-observations.v1\n"
            "t,value,weight\n"
            "0.0,1.0,1.0\n"
            "2.0,1.0,1.0\n"
            "1.0,1.0,1.0\n"
        )
        assert run_cli("track", str(path), "--out", str(tmp_path / "trk")) == 3
        assert "row 2" in capsys.readouterr().err


class TestTransform:
    def test_two_ranges_recovers_plants(self, tmp_path):
        sites = np.array([[0.0, 0.0], [4.0, 0.0]])
        truth = np.column_stack([1.0 + 0.2 * np.arange(6.0), np.full(6, 2.0)])
        ranges = np.column_stack([
            np.linalg.norm(truth - sites[0], axis=1),
            np.linalg.norm(truth - sites[1], axis=1),
        ])
        times = np.arange(6.0)
        pairs = str(tmp_path / "pairs.csv")
        fileio.write_range_pairs(pairs, times, ranges, np.full((6, 2), 0.01))
        geo = str(tmp_path / "geo.json")
        fileio.write_json(geo, {
            "geometry": {
                "kind": "two-ranges",
                "site_a": {"position": [0.0, 0.0]},
                "site_b": {"position": [4.0, 0.0]},
                "disambiguator": [1.0, 1.0],
            }
        })
        out = str(tmp_path / "xf")
        assert run_cli("transform", pairs, geo, "--out", out) == 0
        times_out, estimates = fileio.read_raw_estimates(
            os.path.join(out, "pairs-raw-estimates.csv")
        )
        recovered = np.stack([e.position for e in estimates])
        assert np.abs(recovered - truth).max() <= 1e-9

    def test_two_bearings_with_moving_sites(self, tmp_path):
        gen_dir = str(tmp_path / "gen")
        run_cli("generate", "sonar", "--seed", "0", "--out", gen_dir)
        manifest = fileio.read_json(os.path.join(gen_dir, "sonar-seed0-manifest.json"))
        geo = str(tmp_path / "geo.json")
        fileio.write_json(geo, {"geometry": manifest["geometry"]})
        bearings = os.path.join(gen_dir, "sonar-seed0-bearings.csv")
        out = str(tmp_path / "xf")
        assert run_cli("transform", bearings, geo, "--out", out) == 0
        times, estimates = fileio.read_raw_estimates(
            os.path.join(out, "sonar-seed0-bearings-raw-estimates.csv")
        )
        truth_times, truth = fileio.read_truth(
            os.path.join(gen_dir, "sonar-seed0-truth.csv")
        )
        usable = [i for i, e in enumerate(estimates) if e.usable]
        assert len(usable) > 80
        errors = [
            np.linalg.norm(estimates[i].position - truth[i]) for i in usable
        ]
        assert np.median(errors) < 1.0

    def test_propagate_mode_changes_information(self, tmp_path):
        gen_dir = str(tmp_path / "gen")
        run_cli("generate", "range-bearing", "--seed", "0", "--out", gen_dir)
        manifest = fileio.read_json(
            os.path.join(gen_dir, "range-bearing-seed0-manifest.json")
        )
        geo = str(tmp_path / "geo.json")
        fileio.write_json(geo, {"geometry": manifest["geometry"]})
        polar = os.path.join(gen_dir, "range-bearing-seed0-polar.csv")
        out_a = str(tmp_path / "ignore")
        out_b = str(tmp_path / "prop")
        run_cli("transform", polar, geo, "--out", out_a, "--mode", "ignore-correlation")
        run_cli("transform", polar, geo, "--out", out_b, "--mode", "propagate")
        _, ignore = fileio.read_raw_estimates(
            os.path.join(out_a, "range-bearing-seed0-polar-raw-estimates.csv")
        )
        _, prop = fileio.read_raw_estimates(
            os.path.join(out_b, "range-bearing-seed0-polar-raw-estimates.csv")
        )
        assert np.array_equal(ignore[0].position, prop[0].position)
        off_diag = [abs(e.information[0, 1]) for e in prop if e.usable]
        assert max(off_diag) > 0
        for e in ignore:
            assert e.information[0, 1] == 0.0

    def test_unknown_geometry_kind_exits_3(self, tmp_path, capsys):
        pairs = str(tmp_path / "pairs.csv")
        fileio.write_range_pairs(
            pairs, np.arange(3.0), np.ones((3, 2)), np.full((3, 2), 0.01)
        )
        geo = str(tmp_path / "geo.json")
        fileio.write_json(geo, {"geometry": {"kind": "triangulation"}})
        assert run_cli("transform", pairs, geo, "--out", str(tmp_path)) == 3
        assert "triangulation" in capsys.readouterr().err


class TestDeterministicRerun:
    def test_generate_then_filter_is_byte_identical(self, tmp_path):
        snapshots = []
        for label in ("one", "two"):
            root = str(tmp_path / label)
            gen_dir = os.path.join(root, "gen")
            fit_dir = os.path.join(root, "fit")
            assert run_cli(
                "generate", "rednoise", "--seed", "7", "--out", gen_dir
            ) == 0
            obs = os.path.join(gen_dir, "rednoise-seed7-observations.csv")
            assert run_cli("filter", obs, "--eta", "1000", "--out", fit_dir) == 0
            merged = dir_snapshot(gen_dir)
            merged.update(
                {f"fit/{k}": v for k, v in dir_snapshot(fit_dir).items()}
            )
            snapshots.append(merged)
        assert snapshots[0].keys() == snapshots[1].keys()
        for name in snapshots[0]:
            assert snapshots[0][name] == snapshots[1][name], name

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["--version"])
        assert info.value.code == 0
