"""End-to-end: adapters produce every artifact, the primary package's CLI
consumes them as an external process."""

import json
import subprocess
import sys

import pytest
from PIL import Image

from morphlab.metrics import ScoreTable, load_impostor_csv
from morphlab_adapters.cli import main as adapters_main


def run_primary(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "morphlab.cli", *map(str, args)],
        cwd=cwd, capture_output=True, text=True,
    )


@pytest.fixture
def pipeline(dataset):
    root, document = dataset
    (root / "latents").mkdir()
    (root / "morphs").mkdir()
    return root, document


def test_full_pipeline_through_primary_cli(pipeline):
    root, document = pipeline

    # 1. invert every manifest image
    status = adapters_main(["--backend", "synthetic", "encode",
                            "--manifest", str(root / "manifest.json"),
                            "--out-dir", str(root / "latents")])
    assert status == 0
    assert (root / "latents" / "ma_enrol.ltf").exists()
    assert (root / "latents" / "latent_patch.json").exists()

    # 2. identity-transfer directions from the enrolment images
    for pair, (a, b) in (("mm", ("ma", "mb")), ("ff", ("fa", "fb"))):
        status = adapters_main(["--backend", "synthetic", "direction",
                                "--image1", str(root / f"images/{a}_enrol.png"),
                                "--image2", str(root / f"images/{b}_enrol.png"),
                                "--out", str(root / f"latents/n_{pair}.ltf")])
        assert status == 0

    # 3. morph latents via the primary CLI (external interface)
    for pair, (a, b) in (("mm", ("ma", "mb")), ("ff", ("fa", "fb"))):
        result = run_primary(
            ["morph",
             "--s1", root / f"latents/{a}_enrol.ltf",
             "--s2", root / f"latents/{b}_enrol.ltf",
             "--direction", root / f"latents/n_{pair}.ltf",
             "--alpha", "0.5",
             "--out", root / f"latents/morph_{pair}.ltf"],
            cwd=root,
        )
        assert result.returncode == 0, result.stderr

    # 4. decode the morph latents into images
    for pair in ("mm", "ff"):
        status = adapters_main(["--backend", "synthetic", "decode",
                                "--latent", str(root / f"latents/morph_{pair}.ltf"),
                                "--out", str(root / f"morphs/{pair}.png"),
                                "--restore"])
        assert status == 0
        with Image.open(root / f"morphs/{pair}.png") as img:
            assert img.size == (1024, 1024)

    # 5. extend the manifest with the morph pairs
    document["morph_pairs"] = [
        {"id": "mm", "subject_a": "ma", "subject_b": "mb", "generator": "proposed",
         "alpha": 0.5, "latent_path": "latents/morph_mm.ltf", "image_path": "morphs/mm.png"},
        {"id": "ff", "subject_a": "fa", "subject_b": "fb", "generator": "proposed",
         "alpha": 0.5, "latent_path": "latents/morph_ff.ltf", "image_path": "morphs/ff.png"},
    ]
    (root / "manifest.json").write_text(json.dumps(document, indent=2))

    # 6. score morphs against probe attempts under both FRS
    status = adapters_main(["--backend", "synthetic", "score",
                            "--manifest", str(root / "manifest.json"),
                            "--frs", "arcface", "--frs", "magface",
                            "--scores-out", str(root / "scores.csv"),
                            "--impostors-out", str(root / "impostors.csv")])
    assert status == 0

    # the emitted CSVs pass the primary's schema checkers directly
    table = ScoreTable.from_csv(root / "scores.csv")
    assert table.generators() == ("proposed",)
    assert table.frs_ids == ("arcface", "magface")
    assert table.morph_ids() == {"mm", "ff"}
    assert table.attempt_count("proposed") == 2  # two probes per subject
    impostors = load_impostor_csv(root / "impostors.csv")
    assert set(impostors) == {"arcface", "magface"}

    # 7. the primary evaluator consumes everything end to end
    result = run_primary(
        ["evaluate",
         "--manifest", "manifest.json",
         "--scores", "scores.csv",
         "--calibrate", "impostors.csv",
         "--fmr", "0.5",
         "--metric", "all", "--mode", "eq5-min",
         "--report", "report.json", "--no-timestamp"],
        cwd=root,
    )
    assert result.returncode == 0, result.stderr
    report = json.loads((root / "report.json").read_text())
    assert set(report["slices"]) == {"male", "female", "combined"}
    assert report["slices"]["combined"]["morph_count"] == 2
    assert report["slices"]["male"]["morph_count"] == 1
    for frs in ("arcface", "magface"):
        assert report["thresholds"][frs]["source"] == "calibrated"
        assert report["thresholds"][frs]["achieved_fmr"] <= 0.5


def test_score_rerun_is_idempotent(pipeline):
    root, document = pipeline
    document["morph_pairs"] = [
        {"id": "mm", "subject_a": "ma", "subject_b": "mb", "generator": "proposed",
         "alpha": 0.5, "image_path": "images/ma_enrol.png"},
    ]
    (root / "manifest.json").write_text(json.dumps(document, indent=2))
    args = ["--backend", "synthetic", "score",
            "--manifest", str(root / "manifest.json"),
            "--frs", "arcface",
            "--scores-out", str(root / "scores.csv"),
            "--impostors-out", str(root / "impostors.csv")]
    assert adapters_main(args) == 0
    first = (root / "scores.csv").read_bytes(), (root / "impostors.csv").read_bytes()
    assert adapters_main(args) == 0
    second = (root / "scores.csv").read_bytes(), (root / "impostors.csv").read_bytes()
    assert first == second


def test_missing_morph_image_fails_loudly(pipeline):
    root, document = pipeline
    document["morph_pairs"] = [
        {"id": "mm", "subject_a": "ma", "subject_b": "mb", "generator": "proposed",
         "alpha": 0.5, "image_path": "morphs/never_made.png"},
    ]
    (root / "manifest.json").write_text(json.dumps(document, indent=2))
    status = adapters_main(["--backend", "synthetic", "score",
                            "--manifest", str(root / "manifest.json"),
                            "--frs", "arcface",
                            "--scores-out", str(root / "s.csv"),
                            "--impostors-out", str(root / "i.csv")])
    assert status == 1
    assert not (root / "s.csv").exists()
