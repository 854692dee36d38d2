"""Sample serialization and the dataset manifest.

Images go to lossless 8-bit PNG: RGB for color maps, single-channel for
masks and label maps.  Pose heatmaps are packed as one vertical strip of
five grayscale channels.  Everything round-trips exactly because all
rendered colors live on the 8-bit grid.

Manifest lines are `id<TAB>role<TAB>path...`, UTF-8, paths relative to
the dataset root.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .specs import TryOnSample

SAMPLE_FILES = ("person.png", "garment.png", "garment_mask.png", "agnostic.png",
                "inpaint_mask.png", "seg.png", "pose.png", "clothes_mask.png")

MANIFEST_NAME = "manifest.tsv"
N_POSE = 5
N_SEG = 4


def to_u8(img: np.ndarray) -> np.ndarray:
    """[-1, 1] float to uint8, round-half-even like the rest of numpy."""
    return np.clip(np.round((img * 0.5 + 0.5) * 255.0), 0, 255).astype(np.uint8)


def from_u8(u8: np.ndarray) -> np.ndarray:
    return (u8.astype(np.float32) / 255.0) * 2.0 - 1.0


def _write_png(path: Path, arr: np.ndarray, mode: str) -> None:
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im)


def save_sample(root, sample: TryOnSample, subdir: str = "samples") -> list:
    """Write one sample's rasters; returns manifest-relative paths."""
    root = Path(root)
    rel = Path(subdir) / sample.sample_id
    d = root / rel
    d.mkdir(parents=True, exist_ok=True)

    _write_png(d / "person.png", to_u8(sample.person).transpose(1, 2, 0), "RGB")
    _write_png(d / "garment.png", to_u8(sample.garment).transpose(1, 2, 0), "RGB")
    _write_png(d / "agnostic.png", to_u8(sample.agnostic).transpose(1, 2, 0), "RGB")
    for name, mask in (("garment_mask.png", sample.garment_mask),
                       ("inpaint_mask.png", sample.inpaint_mask),
                       ("clothes_mask.png", sample.clothes_mask)):
        _write_png(d / name, (mask * 255).astype(np.uint8), "L")
    labels = np.argmax(sample.seg, axis=0).astype(np.uint8)
    _write_png(d / "seg.png", labels, "L")
    strip = np.clip(np.round(sample.pose * 255.0), 0, 255).astype(np.uint8)
    _write_png(d / "pose.png", strip.reshape(-1, strip.shape[-1]), "L")
    return [(rel / name).as_posix() for name in SAMPLE_FILES]


def load_sample(root, entry: "ManifestEntry") -> TryOnSample:
    root = Path(root)
    by_name = {Path(p).name: root / p for p in entry.paths}
    person = from_u8(_read_png(by_name["person.png"])).transpose(2, 0, 1)
    garment = from_u8(_read_png(by_name["garment.png"])).transpose(2, 0, 1)
    agnostic = from_u8(_read_png(by_name["agnostic.png"])).transpose(2, 0, 1)
    masks = {n: (_read_png(by_name[n]) > 127).astype(np.float32)
             for n in ("garment_mask.png", "inpaint_mask.png", "clothes_mask.png")}
    labels = _read_png(by_name["seg.png"])
    seg = np.zeros((N_SEG,) + labels.shape, dtype=np.float32)
    np.put_along_axis(seg, labels[None].astype(np.int64), 1.0, axis=0)
    strip = _read_png(by_name["pose.png"]).astype(np.float32) / 255.0
    pose = strip.reshape(N_POSE, -1, strip.shape[-1])
    return TryOnSample(
        sample_id=entry.sample_id,
        person=person, garment=garment, garment_mask=masks["garment_mask.png"],
        agnostic=agnostic, inpaint_mask=masks["inpaint_mask.png"],
        seg=seg, pose=pose, clothes_mask=masks["clothes_mask.png"],
    )


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    role: str
    paths: tuple


@dataclass
class Manifest:
    root: Path
    entries: list

    def ids(self, role: str | None = None) -> list:
        return [e.sample_id for e in self.entries if role is None or e.role == role]

    def entry(self, sample_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.sample_id == sample_id:
                return e
        raise KeyError(sample_id)

    def write(self) -> Path:
        path = Path(self.root) / MANIFEST_NAME
        lines = ["\t".join((e.sample_id, e.role) + tuple(e.paths))
                 for e in self.entries]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, root) -> "Manifest":
        root = Path(root)
        path = root / MANIFEST_NAME
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            parts = line.split("\t")
            entries.append(ManifestEntry(parts[0], parts[1], tuple(parts[2:])))
        return cls(root=root, entries=entries)

    def digest(self) -> str:
        text = "\n".join("\t".join((e.sample_id, e.role) + tuple(e.paths))
                         for e in self.entries)
        return hashlib.sha256(text.encode()).hexdigest()

    def load(self, sample_id: str) -> TryOnSample:
        return load_sample(self.root, self.entry(sample_id))

    def load_all(self, role: str | None = None) -> list:
        return [load_sample(self.root, e) for e in self.entries
                if role is None or e.role == role]


def dataset_digest(manifest: Manifest) -> str:
    """Digest of every raster in manifest order plus the manifest text;
    identical digests mean bit-identical datasets."""
    h = hashlib.sha256(manifest.digest().encode())
    for e in manifest.entries:
        for p in e.paths:
            h.update((Path(manifest.root) / p).read_bytes())
    return h.hexdigest()
