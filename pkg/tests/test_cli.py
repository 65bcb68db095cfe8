import json
import math
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from morphlab import load_latent, save_latent
from morphlab.cli import main
from morphlab.morph import morph_rows

from conftest import FIXTURES, random_code


def run_cli(args, **kwargs):
    return main([str(a) for a in args])


def make_latents(tmp_path, rng):
    w1 = random_code(rng)
    w2 = random_code(rng)
    save_latent(w1, tmp_path / "a.ltf")
    save_latent(w2, tmp_path / "b.ltf")
    return w1, w2


class TestMorphCommand:
    def test_self_morph_round_trips(self, tmp_path, rng):
        w1, _ = make_latents(tmp_path, rng)
        status = run_cli(
            ["morph", "--s1", tmp_path / "a.ltf", "--s2", tmp_path / "a.ltf",
             "--alpha", 0.5, "--out", tmp_path / "m.ltf"]
        )
        assert status == 0
        assert np.array_equal(load_latent(tmp_path / "m.ltf"), w1.astype(np.float32))

    def test_matches_engine_oracle(self, tmp_path, rng):
        w1, w2 = make_latents(tmp_path, rng)
        direction = random_code(rng, rows=7) * 0.05
        save_latent(direction, tmp_path / "n.ltf")
        status = run_cli(
            ["morph", "--s1", tmp_path / "a.ltf", "--s2", tmp_path / "b.ltf",
             "--direction", tmp_path / "n.ltf", "--alpha", 0.25,
             "--attribute-mode", "linear", "--out", tmp_path / "m.ltf"]
        )
        assert status == 0
        # independent path: float32 file contents -> engine math -> float32
        expected = morph_rows(
            w1.astype(np.float32).astype(np.float64),
            w2.astype(np.float32).astype(np.float64),
            k=7, alpha=0.25, identity_mode="spherical", attribute_mode="linear",
            direction=direction.astype(np.float32).astype(np.float64),
        ).astype(np.float32)
        np.testing.assert_array_equal(load_latent(tmp_path / "m.ltf"), expected)

    def test_missing_s2_is_usage_error(self, tmp_path, rng):
        make_latents(tmp_path, rng)
        status = run_cli(["morph", "--s1", tmp_path / "a.ltf", "--out", tmp_path / "m.ltf"])
        assert status == 2

    def test_bad_file_exit_2(self, tmp_path):
        (tmp_path / "junk.ltf").write_bytes(b"XXXX....")
        status = run_cli(
            ["morph", "--s1", tmp_path / "junk.ltf", "--s2", tmp_path / "junk.ltf",
             "--out", tmp_path / "m.ltf"]
        )
        assert status == 2

    def test_antipodal_exit_3(self, tmp_path):
        w = np.ones((18, 512), dtype=np.float32)
        other = w.copy()
        other[2] = -1.0
        save_latent(w, tmp_path / "a.ltf")
        save_latent(other, tmp_path / "b.ltf")
        status = run_cli(
            ["morph", "--s1", tmp_path / "a.ltf", "--s2", tmp_path / "b.ltf",
             "--out", tmp_path / "m.ltf"]
        )
        assert status == 3
        assert not (tmp_path / "m.ltf").exists()

    def test_config_file_with_flag_override(self, tmp_path, rng):
        w1, w2 = make_latents(tmp_path, rng)
        config = tmp_path / "morph.conf"
        config.write_text(
            f"s1={tmp_path / 'a.ltf'}\ns2={tmp_path / 'b.ltf'}\n"
            f"alpha=1.0\nout={tmp_path / 'm.ltf'}\n"
        )
        # flag overrides the config's alpha=1.0
        status = run_cli(["morph", "--config", config, "--alpha", 0.0])
        assert status == 0
        np.testing.assert_array_equal(
            load_latent(tmp_path / "m.ltf"), w1.astype(np.float32)
        )

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "morph.conf"
        config.write_text("bogus=1\n")
        assert run_cli(["morph", "--config", config]) == 2


def evaluate_args(report, extra=()):
    return [
        "evaluate",
        "--manifest", FIXTURES / "golden_manifest.json",
        "--scores", FIXTURES / "golden_scores.csv",
        "--thresholds", FIXTURES / "golden_thresholds.csv",
        "--metric", "all", "--mode", "eq5-min",
        "--report", report, "--no-timestamp", *extra,
    ]


class TestEvaluateCommand:
    def test_golden_fixture_values(self, tmp_path):
        report_path = tmp_path / "report.json"
        assert run_cli(evaluate_args(report_path)) == 0
        report = json.loads(report_path.read_text())
        cell = report["slices"]["combined"]["gmap"]["per_generator"]["proposed"]
        assert cell["per_frs"]["arcface"]["value"] == 0.9322
        assert cell["per_frs"]["arcface"]["exact"] == "4661/5000"
        assert report["slices"]["combined"]["fmmpmr"]["proposed"]["arcface"]["value"] == 0.9322

    def test_and_mode_below_min_mode(self, tmp_path):
        min_report = tmp_path / "min.json"
        and_report = tmp_path / "and.json"
        assert run_cli(evaluate_args(min_report)) == 0
        args = evaluate_args(and_report)
        args[args.index("eq5-min")] = "and-per-pair"
        assert run_cli(args) == 0
        v_min = json.loads(min_report.read_text())["slices"]["combined"]["gmap"]["value"]
        v_and = json.loads(and_report.read_text())["slices"]["combined"]["gmap"]["value"]
        assert v_and <= v_min
        assert v_and == 0.7061  # (4561/5000 + 1/2) / 2

    def test_calibration_path(self, tmp_path):
        report_path = tmp_path / "report.json"
        args = [
            "evaluate",
            "--manifest", FIXTURES / "golden_manifest.json",
            "--scores", FIXTURES / "golden_scores.csv",
            "--calibrate", FIXTURES / "impostor_grid.csv",
            "--fmr", 0.01,
            "--report", report_path, "--no-timestamp",
        ]
        assert run_cli(args) == 0
        report = json.loads(report_path.read_text())
        for frs in ("arcface", "magface"):
            assert report["thresholds"][frs]["tau"] == 1.0
            assert report["thresholds"][frs]["achieved_fmr"] == 0.01
            assert report["thresholds"][frs]["source"] == "calibrated"

    def test_missing_thresholds_is_usage_error(self, tmp_path):
        args = [
            "evaluate",
            "--manifest", FIXTURES / "golden_manifest.json",
            "--scores", FIXTURES / "golden_scores.csv",
            "--report", tmp_path / "r.json",
        ]
        assert run_cli(args) == 2

    def test_threshold_coverage_gap_exit_4(self, tmp_path):
        partial = tmp_path / "partial.csv"
        partial.write_text("frs,tau\narcface,0.3\n")
        args = evaluate_args(tmp_path / "r.json")
        args[args.index(FIXTURES / "golden_thresholds.csv")] = partial
        assert run_cli(args) == 4

    def test_missing_slot_cited_exit_2(self, tmp_path, capsys):
        manifest = FIXTURES / "golden_manifest.json"
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "generator,frs,morph_id,attempt,slot,score\n"
            "proposed,arcface,prop_m_00,0,1,0.5\n"
        )
        thresholds = tmp_path / "th.csv"
        thresholds.write_text("frs,tau\narcface,0.3\n")
        args = [
            "evaluate", "--manifest", manifest, "--scores", scores,
            "--thresholds", thresholds, "--report", tmp_path / "r.json",
        ]
        assert run_cli(args) == 2
        err = capsys.readouterr().err
        assert "missing slot 2" in err and "row 2" in err

    def test_unknown_morph_id_exit_2(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "generator,frs,morph_id,attempt,slot,score\n"
            "proposed,arcface,ghost,0,1,0.5\n"
            "proposed,arcface,ghost,0,2,0.5\n"
            "proposed,magface,ghost,0,1,0.5\n"
            "proposed,magface,ghost,0,2,0.5\n"
        )
        args = evaluate_args(tmp_path / "r.json")
        args[args.index(FIXTURES / "golden_scores.csv")] = scores
        assert run_cli(args) == 2

    def test_generator_mismatch_exit_2(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "generator,frs,morph_id,attempt,slot,score\n"
            "baseline_lerp,arcface,prop_m_00,0,1,0.5\n"
            "baseline_lerp,arcface,prop_m_00,0,2,0.5\n"
            "baseline_lerp,magface,prop_m_00,0,1,0.5\n"
            "baseline_lerp,magface,prop_m_00,0,2,0.5\n"
        )
        args = evaluate_args(tmp_path / "r.json")
        args[args.index(FIXTURES / "golden_scores.csv")] = scores
        assert run_cli(args) == 2

    def test_determinism_modulo_timestamp(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert run_cli(evaluate_args(a)) == 0
        assert run_cli(evaluate_args(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_timestamp_present_by_default(self, tmp_path):
        report_path = tmp_path / "r.json"
        args = evaluate_args(report_path)
        args.remove("--no-timestamp")
        assert run_cli(args) == 0
        assert "timestamp" in json.loads(report_path.read_text())

    def test_reports_identical_modulo_timestamp(self, tmp_path):
        reports = []
        for name in ("a.json", "b.json"):
            args = evaluate_args(tmp_path / name)
            args.remove("--no-timestamp")
            assert run_cli(args) == 0
            loaded = json.loads((tmp_path / name).read_text())
            loaded.pop("timestamp")
            reports.append(loaded)
        assert reports[0] == reports[1]

    def test_empty_gender_slice_reports_null_metrics(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({
            "subjects": [{"id": "a", "gender": "male"}, {"id": "b", "gender": "male"}],
            "images": [
                {"id": "a_p", "subject": "a", "role": "probe", "path": "a.png"},
                {"id": "b_p", "subject": "b", "role": "probe", "path": "b.png"},
            ],
            "morph_pairs": [
                {"id": "ab", "subject_a": "a", "subject_b": "b", "generator": "g"}
            ],
            "frs": ["arcface"],
        }))
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "generator,frs,morph_id,attempt,slot,score\n"
            "g,arcface,ab,0,1,0.9\ng,arcface,ab,0,2,0.8\n"
        )
        thresholds = tmp_path / "th.csv"
        thresholds.write_text("frs,tau\narcface,0.5\n")
        report_path = tmp_path / "r.json"
        assert run_cli([
            "evaluate", "--manifest", manifest, "--scores", scores,
            "--thresholds", thresholds, "--report", report_path, "--no-timestamp",
        ]) == 0
        report = json.loads(report_path.read_text())
        female = report["slices"]["female"]
        assert female["morph_count"] == 0
        assert female["gmap"] is None and female["mmpmr"] is None
        assert report["slices"]["male"]["gmap"]["value"] == 1.0

    def test_quality_pairs_embedded_in_report(self, tmp_path, rng):
        ref = np.zeros((8, 8, 3), dtype=np.uint8)
        test = np.full((8, 8, 3), 16, dtype=np.uint8)
        write_png(tmp_path / "ref.png", ref)
        write_png(tmp_path / "test.png", test)
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("ref.png,test.png\n")
        report_path = tmp_path / "r.json"
        assert run_cli(evaluate_args(report_path, extra=("--quality-pairs", pairs))) == 0
        report = json.loads(report_path.read_text())
        assert report["quality"]["pairs"][0]["psnr"] == pytest.approx(
            24.04840395556061, abs=1e-3
        )
        assert report["quality"]["stats"]["n"] == 1


def write_png(path, array):
    Image.fromarray(array).save(path)


class TestQualityCommand:
    def make_pairs(self, tmp_path, specs):
        lines = []
        for name, (ref, test) in specs.items():
            write_png(tmp_path / f"{name}_ref.png", ref)
            write_png(tmp_path / f"{name}_test.png", test)
            lines.append(f"{name}_ref.png,{name}_test.png")
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("\n".join(lines) + "\n")
        return pairs

    def test_identical_pairs_counted_separately(self, tmp_path, rng):
        img = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        pairs = self.make_pairs(tmp_path, {"same": (img, img.copy())})
        report_path = tmp_path / "q.json"
        assert run_cli(["quality", "--pairs", pairs, "--report", report_path,
                        "--no-timestamp"]) == 0
        report = json.loads(report_path.read_text())
        assert report["identical_pairs"] == 1
        assert report["stats"] is None
        assert report["pairs"][0]["psnr"] == "inf"

    def test_constant_offset_fixture(self, tmp_path):
        ref = np.zeros((16, 16, 3), dtype=np.uint8)
        test = np.full((16, 16, 3), 16, dtype=np.uint8)
        pairs = self.make_pairs(tmp_path, {"off": (ref, test)})
        report_path = tmp_path / "q.json"
        assert run_cli(["quality", "--pairs", pairs, "--report", report_path,
                        "--no-timestamp"]) == 0
        report = json.loads(report_path.read_text())
        assert report["pairs"][0]["psnr"] == pytest.approx(24.04840395556061, abs=1e-3)
        assert report["stats"]["n"] == 1

    def test_mismatched_sizes_exit_2(self, tmp_path, rng):
        a = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        b = rng.integers(0, 256, size=(9, 8, 3)).astype(np.uint8)
        pairs = self.make_pairs(tmp_path, {"bad": (a, b)})
        assert run_cli(["quality", "--pairs", pairs, "--report", tmp_path / "q.json"]) == 2

    def test_unreadable_image_exit_2(self, tmp_path):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("missing_a.png,missing_b.png\n")
        assert run_cli(["quality", "--pairs", pairs, "--report", tmp_path / "q.json"]) == 2

    def test_thread_env_does_not_change_output(self, tmp_path, rng):
        specs = {
            f"p{i}": (
                rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8),
                rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8),
            )
            for i in range(6)
        }
        pairs = self.make_pairs(tmp_path, specs)
        sequential = tmp_path / "seq.json"
        threaded = tmp_path / "thr.json"
        assert run_cli(["quality", "--pairs", pairs, "--report", sequential,
                        "--no-timestamp"]) == 0
        old = os.environ.get("MORPHLAB_THREADS")
        os.environ["MORPHLAB_THREADS"] = "4"
        try:
            assert run_cli(["quality", "--pairs", pairs, "--report", threaded,
                            "--no-timestamp"]) == 0
        finally:
            if old is None:
                del os.environ["MORPHLAB_THREADS"]
            else:
                os.environ["MORPHLAB_THREADS"] = old
        assert sequential.read_bytes() == threaded.read_bytes()


class TestInspect:
    def test_inspect_prints_shape(self, tmp_path, rng, capsys):
        save_latent(random_code(rng), tmp_path / "a.ltf")
        assert run_cli(["inspect", tmp_path / "a.ltf"]) == 0
        assert "shape=(18, 512)" in capsys.readouterr().out

    def test_inspect_bad_file(self, tmp_path):
        (tmp_path / "a.ltf").write_bytes(b"nope")
        assert run_cli(["inspect", tmp_path / "a.ltf"]) == 2


def test_console_script_installed():
    exe = shutil.which("morphlab")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "morph" in out.stdout
