#!/usr/bin/env python3
"""Regenerates the pipeline fixtures under tests/data/pipeline.

Writes a two-subject dataset, nine member predictions per subject with an
ensemble manifest, the expected vote computed here by brute force, and the
expected preprocess layout. Output is deterministic (fixed seed, gzip mtime 0).

    python3 tests/data/make_fixtures.py
"""

import gzip
import json
import pathlib
import struct

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent / "pipeline"
DIMS = (12, 10, 8)  # x, y, z
SPACING = (1.0, 1.0, 2.0)
SUBJECTS = ["subj-001", "subj-002"]
MODALITIES = ["FLAIR", "T1", "T1GD", "T2"]
LABELS = [0, 1, 2, 4]
TIE_PRIORITY = [4, 1, 2, 0]  # ET, NCR, ED, Else
AXES = ["axial", "sagittal", "coronal"]
NORMAL = {"axial": 2, "sagittal": 0, "coronal": 1}


def nifti_bytes(arr, datatype, bitpix, dtype):
    """Minimal little-endian NIfTI-1 single file. `arr` is indexed [x, y, z]."""
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    dim = [3, arr.shape[0], arr.shape[1], arr.shape[2], 1, 1, 1, 1]
    struct.pack_into("<8h", hdr, 40, *dim)
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, *SPACING, 0, 0, 0, 0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<f", hdr, 112, 1.0)
    hdr[344:348] = b"n+1\0"
    # x fastest on disk, which is Fortran order for an [x, y, z] array.
    body = np.asarray(arr, dtype=dtype).tobytes(order="F")
    return bytes(hdr) + b"\0\0\0\0" + body


def write_gz(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(data)


def write_image(path, arr):
    write_gz(path, nifti_bytes(arr, 16, 32, "<f4"))


def write_labels(path, arr):
    write_gz(path, nifti_bytes(arr, 2, 8, "u1"))


def make_subject(rng, lo, hi):
    """Four modalities nonzero only inside [lo, hi] and a tumour inside that."""
    images = {}
    for i, m in enumerate(MODALITIES):
        a = np.zeros(DIMS, dtype=np.float32)
        box = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
        a[box] = rng.integers(1, 200, size=a[box].shape).astype(np.float32) * (i + 1)
        images[m] = a
    seg = np.zeros(DIMS, dtype=np.uint8)
    c = [(l + h) // 2 for l, h in zip(lo, hi)]
    x, y, z = np.meshgrid(*[np.arange(n) for n in DIMS], indexing="ij")
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    seg[r2 <= 9] = 2
    seg[r2 <= 4] = 4
    seg[r2 <= 1] = 1
    inside = np.zeros(DIMS, dtype=bool)
    inside[box] = True
    seg[~inside] = 0  # tumour lies within the imaged head
    return images, seg


def vote(members):
    counts = np.stack([sum((m == l).astype(int) for m in members) for l in LABELS])
    out = np.zeros(DIMS, dtype=np.uint8)
    it = np.nditer(out, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        c = {l: counts[(k,) + idx] for k, l in enumerate(LABELS)}
        best = max(c.values())
        out[idx] = next(l for l in TIE_PRIORITY if c[l] == best)
    return out


def main():
    rng = np.random.default_rng(20240611)
    boxes = {"subj-001": ((2, 1, 1), (9, 7, 6)), "subj-002": ((1, 2, 2), (8, 8, 5))}
    segs = {}
    for s in SUBJECTS:
        images, seg = make_subject(rng, *boxes[s])
        for m, a in images.items():
            write_image(ROOT / "dataset" / s / f"{s}_{m}.nii.gz", a)
        write_labels(ROOT / "dataset" / s / f"{s}_segm.nii.gz", seg)
        segs[s] = seg

    manifest = {"subjects": []}
    for s in SUBJECTS:
        members = []
        entry = {"id": s, "members": []}
        for model in ["m1", "m2", "m3"]:
            for axis in AXES:
                noisy = segs[s].copy()
                flip = rng.random(DIMS) < 0.3
                noisy[flip] = rng.choice(LABELS, size=int(flip.sum()))
                name = f"{s}/{s}_{model}_{axis}.nii.gz"
                write_labels(ROOT / "predictions" / name, noisy)
                members.append(noisy)
                entry["members"].append({"path": name, "model": model, "axis": axis})
        manifest["subjects"].append(entry)
        write_labels(ROOT / "expected" / f"{s}_vote.nii.gz", vote(members))
    (ROOT / "predictions" / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    lo = [min(boxes[s][0][a] for s in SUBJECTS) for a in range(3)]
    hi = [max(boxes[s][1][a] for s in SUBJECTS) for a in range(3)]
    cropped = [h - l + 1 for l, h in zip(lo, hi)]
    files = ["crop_box.json"]
    for s in SUBJECTS:
        files.append(f"{s}/crop.json")
        for axis in AXES:
            files.append(f"{s}/{axis}/index.json")
            for i in range(cropped[NORMAL[axis]]):
                files.append(f"{s}/{axis}/{s}_{axis}_{i:03d}.png")
                files.append(f"{s}/{axis}/{s}_{axis}_{i:03d}_mask.png")
    expected = {
        "box": {"lo": lo, "hi": hi},
        "original_dims": list(DIMS),
        "cropped_dims": cropped,
        "files": sorted(files),
    }
    (ROOT / "expected" / "preprocess.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    main()
