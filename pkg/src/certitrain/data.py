"""Dataset synthesis and ingestion: Two-Moons, MNIST IDX files, splits.

The Two-Moons generator and the seeded splitter are fully deterministic.
MNIST is read from the classic IDX binary format, bit-exactly; a fetch helper
(the only networked code in the package) downloads and verifies the canonical
archives into a local cache directory.
"""

from __future__ import annotations

import gzip
import hashlib
import os
import struct
import urllib.request
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "gen_two_moons",
    "load_mnist_idx",
    "write_idx_images",
    "write_idx_labels",
    "filter_classes",
    "split_dataset",
    "fetch_mnist",
    "load_mnist17",
    "MNIST_FILES",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Canonical MNIST archives: filename -> (gz md5 digest).
MNIST_FILES = {
    "train-images-idx3-ubyte": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte": "ec29112dd5afa0611ce80d1b7f02629c",
}
MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"

DATA_DIR_ENV = "CERTITRAIN_DATA_DIR"


def default_data_dir() -> str:
    return os.environ.get(
        DATA_DIR_ENV, os.path.join(os.path.expanduser("~"), ".cache", "certitrain")
    )


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64
    split: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")
        if self.features.size and not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


def gen_two_moons(n: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half-circle classes with isotropic Gaussian noise.

    ``n`` must be even; each class gets n/2 points spread evenly along its
    arc. Deterministic per seed.
    """
    if n <= 0 or n % 2 != 0:
        raise ValueError("n must be a positive even number")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    half = n // 2
    t_outer = np.linspace(0.0, np.pi, half)
    t_inner = np.linspace(0.0, np.pi, half)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 1.0 - np.sin(t_inner) - 0.5])
    features = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    rng = np.random.default_rng(seed)
    if noise_std > 0:
        features = features + rng.normal(0.0, noise_std, size=features.shape)
    # One shared shuffle so classes are interleaved in sample order.
    order = rng.permutation(n)
    return Dataset(
        features=features[order],
        labels=labels[order],
        split="",
        provenance={"generator": "two_moons", "n": n, "noise_std": noise_std, "seed": seed},
    )


def _read_exact(fh, count: int, path: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"truncated IDX file {path}: wanted {count} bytes, got {len(data)}")
    return data


def _open_maybe_gzip(path: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label file pair; pixels scaled to [0, 1].

    Big-endian magic numbers 0x00000803 (images) and 0x00000801 (labels),
    big-endian dimension sizes, then unsigned-byte payload.
    """
    with _open_maybe_gzip(images_path) as fh:
        magic, n_images, n_rows, n_cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(
                f"bad magic in {images_path}: 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(fh, n_images * n_rows * n_cols, images_path)
        if fh.read(1):
            raise ValueError(f"trailing bytes in {images_path}")
    with _open_maybe_gzip(labels_path) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(
                f"bad magic in {labels_path}: 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path), dtype=np.uint8)
        if fh.read(1):
            raise ValueError(f"trailing bytes in {labels_path}")
    if n_images != n_labels:
        raise ValueError(f"image/label count mismatch: {n_images} vs {n_labels}")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n_images, n_rows * n_cols)
    features = pixels.astype(np.float64) / 255.0
    return Dataset(
        features=features,
        labels=labels.astype(np.int64),
        split="",
        provenance={
            "images": str(images_path),
            "labels": str(labels_path),
            "images_md5": _md5_file(images_path),
            "labels_md5": _md5_file(labels_path),
        },
    )


def write_idx_images(path, images: np.ndarray) -> None:
    """Write (N, rows, cols) uint8 images in IDX format (for tests and caching)."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must be (N, rows, cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-d")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def filter_classes(ds: Dataset, keep) -> Dataset:
    """Keep samples whose label is in ``keep``; remap sorted(keep) to 0..k-1.

    Order is preserved. For the digit pair (1, 7) this maps 1 -> 0 and 7 -> 1.
    """
    keep = sorted(set(int(k) for k in keep))
    remap = {old: new for new, old in enumerate(keep)}
    mask = np.isin(ds.labels, keep)
    new_labels = np.array([remap[int(l)] for l in ds.labels[mask]], dtype=np.int64)
    return Dataset(
        features=ds.features[mask].copy(),
        labels=new_labels,
        split=ds.split,
        provenance={**ds.provenance, "filtered_classes": keep},
    )


def split_dataset(ds: Dataset, sizes, seed: int = 0):
    """Deterministic seeded partition into (train, val, test) of the given sizes."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise ValueError("sizes must be three nonnegative integers")
    if sum(sizes) > ds.n_samples:
        raise ValueError(f"requested {sum(sizes)} samples but dataset has {ds.n_samples}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n_samples)
    out = []
    start = 0
    for tag, size in zip(("train", "val", "test"), sizes):
        idx = order[start : start + size]
        start += size
        out.append(
            Dataset(
                features=ds.features[idx].copy(),
                labels=ds.labels[idx].copy(),
                split=tag,
                provenance={**ds.provenance, "split_seed": seed, "split_sizes": sizes},
            )
        )
    return tuple(out)


def _md5_file(path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_mnist(cache_dir: str | None = None) -> dict:
    """Download and verify the four canonical MNIST archives; returns file paths.

    Files already present with a matching digest are not re-downloaded. This
    is the only function in the package that touches the network.
    """
    cache_dir = cache_dir or default_data_dir()
    os.makedirs(cache_dir, exist_ok=True)
    paths = {}
    for name, digest in MNIST_FILES.items():
        gz_path = os.path.join(cache_dir, name + ".gz")
        if not (os.path.exists(gz_path) and _md5_file(gz_path) == digest):
            url = MNIST_MIRROR + name + ".gz"
            urllib.request.urlretrieve(url, gz_path)
            got = _md5_file(gz_path)
            if got != digest:
                raise ValueError(f"digest mismatch for {name}.gz: {got} != {digest}")
        paths[name] = gz_path
    return paths


def mnist_paths(cache_dir: str | None = None) -> dict | None:
    """Paths of cached MNIST files if all four are present (gz or unpacked)."""
    cache_dir = cache_dir or default_data_dir()
    paths = {}
    for name in MNIST_FILES:
        plain = os.path.join(cache_dir, name)
        gz = plain + ".gz"
        if os.path.exists(plain):
            paths[name] = plain
        elif os.path.exists(gz):
            paths[name] = gz
        else:
            return None
    return paths


def load_mnist17(cache_dir: str | None = None, val_size: int = 2000, seed: int = 0):
    """MNIST restricted to digits 1 and 7 as binary-labelled (train, val, test).

    The validation split is carved from the filtered training set with a
    seeded partition; the test split is the standard test set, filtered.
    """
    paths = mnist_paths(cache_dir)
    if paths is None:
        raise FileNotFoundError(
            f"MNIST files not found in {cache_dir or default_data_dir()}; "
            "run fetch_mnist() or point CERTITRAIN_DATA_DIR at a directory "
            "holding the four canonical IDX files"
        )
    full_train = load_mnist_idx(paths["train-images-idx3-ubyte"], paths["train-labels-idx1-ubyte"])
    full_test = load_mnist_idx(paths["t10k-images-idx3-ubyte"], paths["t10k-labels-idx1-ubyte"])
    train17 = filter_classes(full_train, (1, 7))
    test17 = filter_classes(full_test, (1, 7))
    n_train = train17.n_samples - val_size
    train, val, _ = split_dataset(train17, (n_train, val_size, 0), seed=seed)
    test17.split = "test"
    return train, val, test17
