#!/usr/bin/env python3
"""Writes the tiny binary fixtures used by the loader tests.

Pixel values follow closed-form formulas so the C++ tests can recompute them
without reading these files through the code under test.

  idx:      image i, row r, col c      -> (7*i + 3*r + c) % 256, 3 images of 4x5
            labels 3, 0, 9
  cifar10:  record i, plane ch, row r, col c -> (31*i + 17*ch + 3*r + c) % 256
            labels 7, 2
  cifar100: same pixels, (coarse, fine) = (1, 42), (19, 99)
"""
import pathlib
import struct

here = pathlib.Path(__file__).resolve().parent


def idx():
    n, h, w = 3, 4, 5
    img = struct.pack(">IIII", 0x803, n, h, w)
    img += bytes((7 * i + 3 * r + c) % 256 for i in range(n) for r in range(h) for c in range(w))
    (here / "tiny-images-idx3-ubyte").write_bytes(img)
    (here / "tiny-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + bytes([3, 0, 9]))


def cifar_pixels(i):
    return bytes((31 * i + 17 * ch + 3 * r + c) % 256
                 for ch in range(3) for r in range(32) for c in range(32))


def cifar():
    ten = b"".join(bytes([lab]) + cifar_pixels(i) for i, lab in enumerate([7, 2]))
    (here / "tiny_cifar10.bin").write_bytes(ten)
    hundred = b"".join(bytes(lab) + cifar_pixels(i) for i, lab in enumerate([(1, 42), (19, 99)]))
    (here / "tiny_cifar100.bin").write_bytes(hundred)


if __name__ == "__main__":
    idx()
    cifar()
