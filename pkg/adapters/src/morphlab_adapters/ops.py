"""File-level adapter operations bridging pretrained models and morphlab.

Inputs and outputs are exactly the primary package's external formats:
LTF latent files, the manifest JSON, and the score/impostor CSV
schemas. All writes are atomic, and with a deterministic backend a
re-run over unchanged inputs rewrites byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from morphlab import save_latent
from morphlab.latent import load_latent
from morphlab.manifest import MorphManifest, load_manifest, validate_manifest

from .backends import FRS_NAMES, Backend, cosine_similarity
from .backends.base import DIRECTION_ROWS, LATENT_COLS, LATENT_ROWS
from .errors import AdapterError

SCORE_HEADER = ["generator", "frs", "morph_id", "attempt", "slot", "score"]
IMPOSTOR_HEADER = ["frs", "score"]


def read_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_image(image: np.ndarray, path) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png.tmp")
    os.close(fd)
    try:
        Image.fromarray(image).save(tmp, format="PNG")
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path, header: list[str], rows) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_image(image_path, out_path, backend: Backend) -> None:
    """Invert one aligned face image into an (18, 512) LTF file."""
    latent = backend.encode(read_image(image_path))
    if latent.shape != (LATENT_ROWS, LATENT_COLS):
        raise AdapterError(f"backend returned latent shape {latent.shape}")
    save_latent(latent, out_path)


def encode_manifest(manifest_path, out_dir, backend: Backend, patch_path=None) -> dict:
    """Encode every manifest image; returns {image_id: latent_path}.

    The mapping is also written as a manifest-patch JSON next to the
    latents (or at patch_path) so downstream tooling can join it back.
    """
    manifest = load_manifest(manifest_path)
    report = validate_manifest(manifest)
    if not report.ok:
        raise AdapterError("manifest invalid: " + "; ".join(report.violations))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    patch = {}
    for record in sorted(manifest.images, key=lambda r: r.id):
        latent_path = out_dir / f"{record.id}.ltf"
        encode_image(manifest.resolve(record.path), latent_path, backend)
        patch[record.id] = str(latent_path)
    patch_path = Path(patch_path) if patch_path else out_dir / "latent_patch.json"
    patch_path.write_text(json.dumps({"latents": patch}, indent=2, sort_keys=True) + "\n")
    return patch


def decode_latent(ltf_path, out_path, backend: Backend, restore: bool = False) -> None:
    """Synthesize a 1024x1024 RGB image from an (18, 512) LTF file."""
    latent = load_latent(ltf_path)
    if latent.shape != (LATENT_ROWS, LATENT_COLS):
        raise AdapterError(
            f"{ltf_path}: expected an ({LATENT_ROWS}, {LATENT_COLS}) latent, got {latent.shape}"
        )
    image = backend.synthesize(latent)
    if restore:
        image = backend.restore(image)
    write_image(image, out_path)


def landmark_direction(image_a, image_b, out_path, backend: Backend) -> np.ndarray:
    """Derive the (7, 512) identity-transfer direction from two images."""
    la = backend.landmarks(read_image(image_a))
    lb = backend.landmarks(read_image(image_b))
    direction = backend.direction(la, lb)
    if direction.shape != (DIRECTION_ROWS, LATENT_COLS):
        raise AdapterError(f"backend returned direction shape {direction.shape}")
    save_latent(direction, out_path)
    return direction


def _probes_by_subject(manifest: MorphManifest) -> dict[str, list]:
    probes: dict[str, list] = {}
    for record in sorted(manifest.images, key=lambda r: r.id):
        if record.role == "probe":
            probes.setdefault(record.subject, []).append(record)
    return probes


def score_pairs(manifest_path, frs_list, scores_out, impostors_out,
                backend: Backend, max_impostor_pairs: int = 500) -> tuple[int, int]:
    """Score every morph pair against its subjects' probe attempts.

    Attempt i pairs the i-th probe (by image id) of each subject; the
    attempt count is uniform per generator (the minimum over its pairs)
    so the emitted table always forms the complete grid the evaluator
    requires. Also emits non-mated probe comparisons for calibration.
    Returns (score_rows, impostor_rows).
    """
    for frs in frs_list:
        if frs not in FRS_NAMES:
            raise AdapterError(f"unknown FRS {frs!r}; expected one of {FRS_NAMES}")
    manifest = load_manifest(manifest_path)
    report = validate_manifest(manifest)
    if not report.ok:
        raise AdapterError("manifest invalid: " + "; ".join(report.violations))
    if not manifest.morph_pairs:
        raise AdapterError("manifest declares no morph pairs")

    probes = _probes_by_subject(manifest)
    embeddings: dict[tuple[str, str], np.ndarray] = {}

    def embed_file(path, frs: str) -> np.ndarray:
        key = (os.fspath(path), frs)
        if key not in embeddings:
            embeddings[key] = backend.embed(read_image(path), frs)
        return embeddings[key]

    by_generator: dict[str, list] = {}
    for pair in sorted(manifest.morph_pairs, key=lambda p: p.id):
        by_generator.setdefault(pair.generator, []).append(pair)

    score_rows = []
    for generator in sorted(by_generator):
        pairs = by_generator[generator]
        attempts = min(
            min(len(probes[p.subject_a]), len(probes[p.subject_b])) for p in pairs
        )
        if attempts == 0:
            raise AdapterError(f"generator {generator!r} has a subject without probes")
        for pair in pairs:
            if not pair.image_path:
                raise AdapterError(f"morph pair {pair.id!r} has no image_path")
            morph_file = manifest.resolve(pair.image_path)
            if not os.path.exists(morph_file):
                raise AdapterError(f"morph image missing: {morph_file}")
            for frs in frs_list:
                morph_embedding = embed_file(morph_file, frs)
                for attempt in range(attempts):
                    for slot, subject in ((1, pair.subject_a), (2, pair.subject_b)):
                        probe = probes[subject][attempt]
                        probe_embedding = embed_file(manifest.resolve(probe.path), frs)
                        score = cosine_similarity(morph_embedding, probe_embedding)
                        score_rows.append(
                            (pair.generator, frs, pair.id, attempt, slot, repr(score))
                        )

    impostor_rows = []
    subjects = sorted(probes)
    budget = max_impostor_pairs
    for i in range(len(subjects)):
        if budget <= 0:
            break
        for j in range(i + 1, len(subjects)):
            if budget <= 0:
                break
            probe_a = manifest.resolve(probes[subjects[i]][0].path)
            probe_b = manifest.resolve(probes[subjects[j]][0].path)
            for frs in frs_list:
                score = cosine_similarity(embed_file(probe_a, frs), embed_file(probe_b, frs))
                impostor_rows.append((frs, repr(score)))
            budget -= 1

    _write_csv(scores_out, SCORE_HEADER, score_rows)
    _write_csv(impostors_out, IMPOSTOR_HEADER, sorted(impostor_rows))
    return len(score_rows), len(impostor_rows)
