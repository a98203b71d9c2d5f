#!/usr/bin/env python3
"""Draw one synthetic sample and lay out a contact sheet of augmented
variants, printing the parameters behind each one."""

from pathlib import Path

import numpy as np

from lwcnn.augment import (AugmentConfig, apply_affine, apply_brightness,
                           sample_params, sample_stream)
from lwcnn.imgio import save_image, tile_grid

out_dir = Path("demo_out")
out_dir.mkdir(parents=True, exist_ok=True)

# A bright ring with one corner marker so flips and rotations are obvious.
size = 96
yy, xx = np.ogrid[:size, :size]
r2 = (yy - size // 2) ** 2 + (xx - size // 2) ** 2
ring = (r2 <= (size * 0.38) ** 2) & (r2 >= (size * 0.24) ** 2)
canvas = np.zeros((size, size), dtype=np.uint8)
canvas[ring] = 230
canvas[6:16, 6:16] = 255
image = np.repeat(canvas[:, :, None], 3, axis=2)

config = AugmentConfig()  # rotation 10 deg, brightness 0.15, shear, shift, flips
tiles = [image]
print(f"{'variant':>7}  {'angle':>7}  {'bright':>7}  {'shear':>7}  "
      f"{'dx':>7}  {'dy':>7}  flip")
for variant in range(11):
    stream = sample_stream(global_seed=7, epoch=variant, sample_index=0)
    params = sample_params(config, stream, size=image.shape[:2])
    tiles.append(apply_brightness(apply_affine(image, params), params.brightness))
    print(f"{variant:>7}  {params.angle_deg:>7.2f}  {params.brightness:>7.3f}  "
          f"{params.shear:>7.3f}  {params.dx:>7.2f}  {params.dy:>7.2f}  "
          f"{params.flip}")

sheet = tile_grid(tiles, columns=4)
save_image(out_dir / "augmentation_grid.png", sheet)
print(f"\ncontact sheet ({len(tiles)} tiles) written to "
      f"{out_dir / 'augmentation_grid.png'}")
