#!/usr/bin/env python3
"""Draws the small raster fixtures under data/fixtures with PIL."""
import pathlib

from PIL import Image, ImageDraw

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"


def chart(path, size, values):
    w, h = size
    img = Image.new("RGB", size, "white")
    d = ImageDraw.Draw(img)
    d.line([(30, h - 20), (w - 10, h - 20)], fill="black")
    d.line([(30, 10), (30, h - 20)], fill="black")
    step = (w - 50) // len(values)
    top = max(values)
    for i, v in enumerate(values):
        x0 = 40 + i * step
        y0 = h - 20 - int((h - 40) * v / top)
        d.rectangle([x0, y0, x0 + step - 10, h - 21], fill=(70, 130, 180))
    img.save(path, format="PNG")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    chart(OUT / "chart.png", (320, 200), [29.0, 27.6, 20.1])
    chart(OUT / "chart_small.png", (160, 100), [3, 5, 2, 4])


if __name__ == "__main__":
    main()
