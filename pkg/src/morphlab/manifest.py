"""Dataset manifest: subjects, probe images, morph pairs, gender slices.

The manifest is a JSON document (paths relative to the manifest file):

    {
      "subjects":    [{"id": ..., "gender": "male"|"female"}],
      "images":      [{"id": ..., "subject": ..., "role": "enrol"|"probe", "path": ...}],
      "morph_pairs": [{"id": ..., "subject_a": ..., "subject_b": ...,
                       "generator": ..., "alpha": ..., "latent_path": ..., "image_path": ...}],
      "frs":         ["arcface", ...]
    }
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .metrics import ScoreTable

GENDERS = ("male", "female")
ROLES = ("enrol", "probe")
SLICES = ("male", "female", "combined")

POLICY_SAME_GENDER = "same-gender"
POLICY_ALL_PAIRS = "all-pairs"


@dataclass(frozen=True)
class Subject:
    id: str
    gender: str


@dataclass(frozen=True)
class ImageRecord:
    id: str
    subject: str
    role: str
    path: str


@dataclass(frozen=True)
class MorphPairRecord:
    id: str
    subject_a: str
    subject_b: str
    generator: str
    alpha: float = 0.5
    latent_path: str | None = None
    image_path: str | None = None


@dataclass(frozen=True)
class MorphManifest:
    subjects: tuple[Subject, ...]
    images: tuple[ImageRecord, ...]
    morph_pairs: tuple[MorphPairRecord, ...]
    frs: tuple[str, ...]
    base_dir: Path = field(default_factory=Path)

    def subject_gender(self) -> dict[str, str]:
        return {s.id: s.gender for s in self.subjects}

    def pair_by_id(self) -> dict[str, MorphPairRecord]:
        return {p.id: p for p in self.morph_pairs}

    def resolve(self, relative: str) -> Path:
        return (self.base_dir / relative).resolve()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]
    summary: dict


def _require(record: dict, key: str, kind, where: str):
    if key not in record:
        raise SchemaError(f"{where}: missing key {key!r}")
    value = record[key]
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: key {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def load_manifest(path) -> MorphManifest:
    """Parse a manifest JSON file; structural problems raise SchemaError."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: unparseable manifest: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError(f"{path}: manifest root must be an object")

    subjects = tuple(
        Subject(
            id=str(_require(rec, "id", (str, int), f"subjects[{i}]")),
            gender=_require(rec, "gender", str, f"subjects[{i}]"),
        )
        for i, rec in enumerate(document.get("subjects", []))
    )
    images = tuple(
        ImageRecord(
            id=str(_require(rec, "id", (str, int), f"images[{i}]")),
            subject=str(_require(rec, "subject", (str, int), f"images[{i}]")),
            role=_require(rec, "role", str, f"images[{i}]"),
            path=_require(rec, "path", str, f"images[{i}]"),
        )
        for i, rec in enumerate(document.get("images", []))
    )
    pairs = tuple(
        MorphPairRecord(
            id=str(_require(rec, "id", (str, int), f"morph_pairs[{i}]")),
            subject_a=str(_require(rec, "subject_a", (str, int), f"morph_pairs[{i}]")),
            subject_b=str(_require(rec, "subject_b", (str, int), f"morph_pairs[{i}]")),
            generator=_require(rec, "generator", str, f"morph_pairs[{i}]"),
            alpha=float(rec.get("alpha", 0.5)),
            latent_path=rec.get("latent_path"),
            image_path=rec.get("image_path"),
        )
        for i, rec in enumerate(document.get("morph_pairs", []))
    )
    frs = document.get("frs", [])
    if not isinstance(frs, list) or not all(isinstance(f, str) for f in frs):
        raise SchemaError(f"{path}: 'frs' must be a list of strings")
    return MorphManifest(
        subjects=subjects,
        images=images,
        morph_pairs=pairs,
        frs=tuple(frs),
        base_dir=path.parent,
    )


def validate_manifest(manifest: MorphManifest) -> ValidationReport:
    """Check every manifest invariant; returns all violations, not just the first."""
    violations: list[str] = []

    if not manifest.subjects:
        violations.append("no subjects")
    seen_subjects: set[str] = set()
    for subject in manifest.subjects:
        if subject.id in seen_subjects:
            violations.append(f"duplicate subject id {subject.id!r}")
        seen_subjects.add(subject.id)
        if subject.gender not in GENDERS:
            violations.append(f"subject {subject.id!r}: unknown gender {subject.gender!r}")

    probes: dict[str, int] = {s.id: 0 for s in manifest.subjects}
    seen_images: set[str] = set()
    for image in manifest.images:
        if image.id in seen_images:
            violations.append(f"duplicate image id {image.id!r}")
        seen_images.add(image.id)
        if image.role not in ROLES:
            violations.append(f"image {image.id!r}: unknown role {image.role!r}")
        if image.subject not in probes:
            violations.append(f"image {image.id!r}: unknown subject {image.subject!r}")
        elif image.role == "probe":
            probes[image.subject] += 1

    for subject_id, count in probes.items():
        if count == 0:
            violations.append(f"subject {subject_id!r} has no probe image")

    seen_pairs: set[str] = set()
    subject_ids = {s.id for s in manifest.subjects}
    for pair in manifest.morph_pairs:
        if pair.id in seen_pairs:
            violations.append(f"duplicate morph pair id {pair.id!r}")
        seen_pairs.add(pair.id)
        if pair.subject_a == pair.subject_b:
            violations.append(f"morph pair {pair.id!r}: subjects are identical")
        for slot in (pair.subject_a, pair.subject_b):
            if slot not in subject_ids:
                violations.append(f"morph pair {pair.id!r}: unknown subject {slot!r}")

    by_gender = {g: sum(1 for s in manifest.subjects if s.gender == g) for g in GENDERS}
    probe_counts = [c for c in probes.values()] if probes else []
    summary = {
        "subjects": len(manifest.subjects),
        "subjects_by_gender": by_gender,
        "images": len(manifest.images),
        "probes_per_subject_min": min(probe_counts) if probe_counts else 0,
        "probes_per_subject_max": max(probe_counts) if probe_counts else 0,
        "morph_pairs": len(manifest.morph_pairs),
        "frs": list(manifest.frs),
    }
    return ValidationReport(ok=not violations, violations=tuple(violations), summary=summary)


@dataclass(frozen=True)
class PairCandidate:
    subject_a: str
    subject_b: str
    gender_slice: str  # male / female for same-gender pairs, combined for mixed


def generate_pairs(
    manifest: MorphManifest,
    policy: str = POLICY_SAME_GENDER,
    limit: int | None = None,
    seed: int = 0,
) -> list[PairCandidate]:
    """Enumerate unordered distinct subject pairs under the pairing policy.

    Output order is deterministic; `limit` subsamples uniformly with the
    given seed before re-sorting.
    """
    if policy not in (POLICY_SAME_GENDER, POLICY_ALL_PAIRS):
        raise ValueError(f"unknown pairing policy {policy!r}")
    gender = {s.id: s.gender for s in manifest.subjects}
    ids = sorted(gender)
    pairs = []
    for a, b in itertools.combinations(ids, 2):
        same = gender[a] == gender[b]
        if policy == POLICY_SAME_GENDER and not same:
            continue
        pairs.append(PairCandidate(a, b, gender[a] if same else "combined"))

    if limit is not None and limit < len(pairs):
        pairs = random.Random(seed).sample(pairs, limit)
        pairs.sort(key=lambda p: (p.subject_a, p.subject_b))
    return pairs


def slice_scores(scores: ScoreTable, manifest: MorphManifest, gender_slice: str) -> ScoreTable:
    """Restrict a score table to morphs whose both subjects match the slice.

    "combined" applies no restriction. Every morph id in the table must
    exist in the manifest.
    """
    if gender_slice not in SLICES:
        raise ValueError(f"unknown slice {gender_slice!r}; expected one of {SLICES}")
    pairs = manifest.pair_by_id()
    unknown = sorted(scores.morph_ids() - set(pairs))
    if unknown:
        raise SchemaError(f"morph ids absent from manifest: {unknown}")
    if gender_slice == "combined":
        return scores
    gender = manifest.subject_gender()
    keep = {
        morph_id
        for morph_id in scores.morph_ids()
        if gender.get(pairs[morph_id].subject_a) == gender_slice
        and gender.get(pairs[morph_id].subject_b) == gender_slice
    }
    return scores.restrict(morphs=keep)
