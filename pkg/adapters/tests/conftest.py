import json

import numpy as np
import pytest
from PIL import Image

from morphlab_adapters import SyntheticBackend


@pytest.fixture
def backend():
    return SyntheticBackend()


def face_like(seed: int, size: int = 96) -> np.ndarray:
    """Deterministic structured test image (gradient + seeded blobs)."""
    rng = np.random.default_rng(seed)
    axis = np.linspace(0, 255, size)
    base = np.add.outer(axis, axis) / 2
    img = np.stack([base, base[::-1], base.T], axis=-1)
    for _ in range(6):
        cy, cx = rng.integers(10, size - 10, size=2)
        yy, xx = np.ogrid[:size, :size]
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 120.0) * rng.uniform(40, 120)
        img += blob[:, :, None] * rng.uniform(0.3, 1.0, size=3)
    return np.clip(img, 0, 255).astype(np.uint8)


def write_face(path, seed: int, size: int = 96):
    Image.fromarray(face_like(seed, size)).save(path)
    return path


@pytest.fixture
def dataset(tmp_path):
    """Tiny manifest: 4 subjects (2M / 2F), 1 enrol + 2 probes each."""
    (tmp_path / "images").mkdir()
    subjects = [("ma", "male"), ("mb", "male"), ("fa", "female"), ("fb", "female")]
    images = []
    for idx, (sid, _) in enumerate(subjects):
        for role, tag in (("enrol", "enrol"), ("probe", "probe0"), ("probe", "probe1")):
            name = f"images/{sid}_{tag}.png"
            write_face(tmp_path / name, seed=idx * 10 + hash(tag) % 7)
            images.append({"id": f"{sid}_{tag}", "subject": sid, "role": role, "path": name})
    document = {
        "subjects": [{"id": s, "gender": g} for s, g in subjects],
        "images": images,
        "morph_pairs": [],
        "frs": ["arcface", "magface"],
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(document, indent=2))
    return tmp_path, document
