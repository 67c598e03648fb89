#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes tests/data/golden_dataset with a stdlib-only encoder."""
import json
import os
import struct
import zlib

CLASSES = ["DJI", "FutabaT14", "FutabaT7", "Graupner", "Noise", "Taranis", "Turnigy"]
S, C = 4, 4
SNRS = [-20.0, -14.0, 0.0, 2.0, 10.0, 28.0, 30.0]
MIXES = ["Gauss", "Lab", "Gauss", "Lab", "Lab+Gauss", "Gauss", "Lab"]


def value(cls, k):
    return (cls + 1) * 0.5 - k * 0.125 + (0.0625 if k % 3 == 0 else 0.0)


def main():
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden_dataset")
    os.makedirs(out, exist_ok=True)
    data = bytearray()
    for cls in range(7):
        rec = struct.pack("<Hh", cls, round(SNRS[cls] * 100))
        rec += struct.pack("<%df" % (2 * S * C), *[value(cls, k) for k in range(2 * S * C)])
        rec += struct.pack("<I", zlib.crc32(rec) & 0xFFFFFFFF)
        data += rec
    with open(os.path.join(out, "data.bin"), "wb") as f:
        f.write(data)
    manifest = {
        "version": 1,
        "profile": {"name": "desk", "sample_rate_hz": 250000.0, "frame_length": 16, "segment_length": 4,
                    "time_scale": 1.0},
        "classes": CLASSES,
        "snr_grid_db": [float(x) for x in range(-20, 31, 2)],
        "class_counts": {c: 1 for c in CLASSES},
        "spectrogram_shape": [2, S, C],
        "dtype": "float32-le",
        "record_layout": "u16 class_id, i16 snr_db*100, f32 planes [2,S,C] plane-major row-major, u32 crc32",
        "record_bytes": 4 + 4 * 2 * S * C + 4,
        "fft": {"normalization": "unitary", "bin_order": "dc_centered", "window": "rectangular"},
        "standardization": {"mean": [0.25, -0.5], "std": [1.5, 2.0]},
        "seed": 42,
        "num_samples": 7,
        "mix": MIXES,
    }
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
