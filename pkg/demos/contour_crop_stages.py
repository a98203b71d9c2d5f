#!/usr/bin/env python3
"""Run a synthetic scan through every cropping stage and save the
intermediate masks so the pipeline can be inspected visually."""

from pathlib import Path

import numpy as np

from lwcnn.imgio import save_image
from lwcnn.preprocess import (CropParams, crop_pipeline, dilate, erode,
                              gaussian_blur5, largest_component_bbox,
                              threshold_mask, to_grayscale)

out_dir = Path("demo_out/crop_stages")
out_dir.mkdir(parents=True, exist_ok=True)

# An off-center bright ellipse on black, plus a few specks of dust.
size = 200
yy, xx = np.ogrid[:size, :size]
ellipse = ((yy - 90) / 55.0) ** 2 + ((xx - 120) / 40.0) ** 2 <= 1.0
canvas = np.zeros((size, size), dtype=np.uint8)
canvas[ellipse] = 190
texture = (10.0 * np.sin((yy + xx) / 6.0) + 10.0).astype(np.uint8)
canvas[ellipse] += texture[ellipse]
for sy, sx in ((20, 20), (170, 30), (15, 170)):
    canvas[sy:sy + 2, sx:sx + 2] = 255
image = np.repeat(canvas[:, :, None], 3, axis=2)

gray = to_grayscale(image)
blurred = gaussian_blur5(gray, sigma=1.1)
mask = threshold_mask(blurred, level=45)
print(f"threshold mask: {int(mask.sum())} pixels on "
      f"(ellipse itself covers {int(ellipse.sum())})")

opened = dilate(erode(mask, iterations=2), iterations=2)
print(f"after open:     {int(opened.sum())} pixels on (specks removed)")

box = largest_component_bbox(opened)
print(f"largest component box: top={box.top} left={box.left} "
      f"bottom={box.bottom} right={box.right}")

result = crop_pipeline(image, CropParams())
print(f"pipeline box matches: {result.box == box}, "
      f"fallback used: {result.used_fallback}")
print(f"cropped output shape: {result.image.shape}")

save_image(out_dir / "input.png", image)
save_image(out_dir / "mask_threshold.png", (mask * np.uint8(255)))
save_image(out_dir / "mask_opened.png", (opened * np.uint8(255)))
save_image(out_dir / "cropped.png", result.image)
print(f"stage images written to {out_dir}/")
