"""Sample stores: synthetic benchmarks, manifest directories, image import.

A store maps each class id to a feature matrix plus stable per-row sample
ids. On disk a store is a directory holding one CSV per class (one row per
sample, float features, filename = class id) and a ``manifest.json``
listing class ids, names, and counts. Sample ids are assigned by position:
classes in manifest order, rows in file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# Bit-exact featurizer contract for image import, in order:
# 1. open with Pillow, convert to RGB;
# 2. resize to (width, height) with bilinear resampling;
# 3. scale to float64 in [0, 1] by dividing by 255;
# 4. per channel, subtract the image's channel mean and divide by the
#    channel std floored at 1e-8;
# 5. flatten in row-major (H, W, C) order.
IMPORT_IMAGE_SIZE = (8, 8)


@dataclass
class SampleStore:
    """Immutable per-class feature pools with stable sample ids."""

    features: dict[int, np.ndarray]  # class id -> (count, dim) float64
    sample_ids: dict[int, np.ndarray]  # class id -> (count,) int64
    class_names: dict[int, str]

    def __post_init__(self) -> None:
        dims = {mat.shape[1] for mat in self.features.values()}
        if len(dims) > 1:
            raise DataError(f"inconsistent feature dimensions across classes: {sorted(dims)}")

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.features)

    @property
    def num_classes(self) -> int:
        return len(self.features)

    @property
    def feature_dim(self) -> int:
        first = next(iter(self.features.values()))
        return first.shape[1]

    def count(self, class_id: int) -> int:
        return self.features[class_id].shape[0]

    def counts(self) -> dict[int, int]:
        return {cid: self.count(cid) for cid in self.class_ids}


def make_gaussian_store(
    num_classes: int,
    dim: int,
    per_class: int,
    seed: int,
    center_scale: float = 1.0,
    noise_scale: float = 1.0,
) -> SampleStore:
    """Synthetic benchmark: one isotropic Gaussian cluster per class.

    Class centers are drawn from N(0, center_scale^2 I); samples add
    N(0, noise_scale^2 I) noise. Sample ids run 0..num_classes*per_class-1
    in class-major order.
    """
    if num_classes < 2 or dim < 1 or per_class < 1:
        raise ConfigError("gaussian store needs >= 2 classes, dim >= 1, per_class >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(num_classes, dim))
    features: dict[int, np.ndarray] = {}
    sample_ids: dict[int, np.ndarray] = {}
    next_id = 0
    for cid in range(num_classes):
        noise = rng.normal(0.0, noise_scale, size=(per_class, dim))
        features[cid] = centers[cid] + noise
        sample_ids[cid] = np.arange(next_id, next_id + per_class, dtype=np.int64)
        next_id += per_class
    names = {cid: f"cluster_{cid}" for cid in range(num_classes)}
    return SampleStore(features, sample_ids, names)


def split_store(store: SampleStore, test_per_class: int) -> tuple[SampleStore, SampleStore]:
    """Hold out the last ``test_per_class`` rows of every class as a test pool."""
    if test_per_class < 1:
        raise ConfigError("test_per_class must be >= 1")
    train_f: dict[int, np.ndarray] = {}
    train_i: dict[int, np.ndarray] = {}
    test_f: dict[int, np.ndarray] = {}
    test_i: dict[int, np.ndarray] = {}
    for cid in store.class_ids:
        n = store.count(cid)
        if n <= test_per_class:
            raise DataError(
                f"class {cid}: {n} samples cannot hold out {test_per_class} for testing"
            )
        cut = n - test_per_class
        train_f[cid] = store.features[cid][:cut]
        train_i[cid] = store.sample_ids[cid][:cut]
        test_f[cid] = store.features[cid][cut:]
        test_i[cid] = store.sample_ids[cid][cut:]
    names = dict(store.class_names)
    return SampleStore(train_f, train_i, names), SampleStore(test_f, test_i, dict(names))


def save_store(store: SampleStore, directory: str | Path) -> None:
    """Write per-class CSVs plus manifest.json. Round-trips bit-exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    classes = []
    for cid in store.class_ids:
        filename = f"{cid}.csv"
        np.savetxt(directory / filename, store.features[cid], delimiter=",", fmt="%.17g")
        classes.append({"id": cid, "name": store.class_names.get(cid, str(cid)), "count": store.count(cid)})
    manifest = {"version": MANIFEST_VERSION, "feature_dim": store.feature_dim, "classes": classes}
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


def load_store(directory: str | Path) -> SampleStore:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('version')!r}")
    features: dict[int, np.ndarray] = {}
    sample_ids: dict[int, np.ndarray] = {}
    names: dict[int, str] = {}
    next_id = 0
    for entry in manifest["classes"]:
        cid = int(entry["id"])
        path = directory / f"{cid}.csv"
        if not path.exists():
            raise DataError(f"missing feature file for class {cid}: {path}")
        mat = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        if mat.shape[0] != entry["count"]:
            raise DataError(
                f"class {cid}: manifest says {entry['count']} samples, file has {mat.shape[0]}"
            )
        if mat.shape[1] != manifest["feature_dim"]:
            raise DataError(
                f"class {cid}: feature dim {mat.shape[1]} != manifest dim {manifest['feature_dim']}"
            )
        features[cid] = mat
        sample_ids[cid] = np.arange(next_id, next_id + mat.shape[0], dtype=np.int64)
        next_id += mat.shape[0]
        names[cid] = entry.get("name", str(cid))
    if not features:
        raise DataError(f"manifest in {directory} lists no classes")
    return SampleStore(features, sample_ids, names)


def featurize_image(path: str | Path, size: tuple[int, int] = IMPORT_IMAGE_SIZE) -> np.ndarray:
    """Apply the documented featurizer to one image file."""
    from PIL import Image

    with Image.open(path) as img:
        rgb = img.convert("RGB").resize(size, Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float64) / 255.0  # (H, W, 3)
    mean = arr.mean(axis=(0, 1))
    std = np.maximum(arr.std(axis=(0, 1)), 1e-8)
    return ((arr - mean) / std).reshape(-1)


def import_image_folder(
    source: str | Path,
    destination: str | Path,
    size: tuple[int, int] = IMPORT_IMAGE_SIZE,
) -> SampleStore:
    """Convert ``source/<class_name>/*.{png,jpg,jpeg,bmp}`` into a store directory.

    Class ids are assigned 0..K-1 over sorted folder names; files are
    processed in sorted order for reproducibility.
    """
    source = Path(source)
    if not source.is_dir():
        raise DataError(f"{source} is not a directory")
    class_dirs = sorted(p for p in source.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"{source} contains no class folders")
    extensions = {".png", ".jpg", ".jpeg", ".bmp"}
    features: dict[int, np.ndarray] = {}
    sample_ids: dict[int, np.ndarray] = {}
    names: dict[int, str] = {}
    next_id = 0
    for cid, class_dir in enumerate(class_dirs):
        files = sorted(p for p in class_dir.iterdir() if p.suffix.lower() in extensions)
        if not files:
            raise DataError(f"class folder {class_dir} holds no images")
        rows = np.stack([featurize_image(p, size) for p in files])
        features[cid] = rows
        sample_ids[cid] = np.arange(next_id, next_id + len(files), dtype=np.int64)
        next_id += len(files)
        names[cid] = class_dir.name
    store = SampleStore(features, sample_ids, names)
    save_store(store, destination)
    return store


def parse_dataset_spec(spec: str) -> SampleStore:
    """Load a store from a manifest directory or a ``synthetic:`` spec string.

    Synthetic specs look like
    ``synthetic:classes=20,dim=32,per_class=220,seed=1,center=1.0,noise=1.0``.
    """
    if spec.startswith("synthetic:"):
        params: dict[str, str] = {}
        body = spec[len("synthetic:"):]
        for part in body.split(","):
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"bad synthetic dataset parameter {part!r}")
            key, value = part.split("=", 1)
            params[key.strip()] = value.strip()
        try:
            return make_gaussian_store(
                num_classes=int(params["classes"]),
                dim=int(params["dim"]),
                per_class=int(params["per_class"]),
                seed=int(params["seed"]),
                center_scale=float(params.get("center", 1.0)),
                noise_scale=float(params.get("noise", 1.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"synthetic dataset spec missing parameter {exc}") from exc
    return load_store(spec)
