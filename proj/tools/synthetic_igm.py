#!/usr/bin/env python3
"""Stand-in image-to-image model used when recording image cassettes.

usage: synthetic_igm.py INPUT.png OUTPUT.png PROMPT STRENGTH SEED

Blends a posterized, prompt-tinted copy over the input. The output keeps the
input's dimensions and is a pure function of the arguments.
"""
import hashlib
import sys

from PIL import Image, ImageOps


def main():
    src, dst, prompt, strength, seed = sys.argv[1:6]
    strength = float(strength)
    digest = hashlib.sha256(f"{prompt}|{seed}".encode()).digest()
    tint = tuple(64 + b % 192 for b in digest[:3])
    base = Image.open(src).convert("RGB")
    styled = ImageOps.posterize(base, 3)
    styled = Image.blend(styled, Image.new("RGB", base.size, tint), 0.35)
    Image.blend(base, styled, strength).save(dst, format="PNG", optimize=False)


if __name__ == "__main__":
    main()
