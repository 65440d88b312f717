"""Sketch stage walk-through: a grid of mark shapes, generated objects, and how they
are fitted back onto the marks (elongate, stack, tile, cut-out).

    python demos/02_sketch_stage.py --out demo_out/sketch
"""

import argparse
from pathlib import Path

import numpy as np

from stylviz import ChartSpec, MockBackend, PromptSpec, WorkflowConfig, imaging, render_plain, select_recipe
from stylviz.sketch import build_grid, grid_objects, object_to_mark, run_sketch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out/sketch")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    backend = MockBackend()
    cfg = WorkflowConfig()
    plain = render_plain(ChartSpec.bar([5, 2, 3, 4]))

    # Marks of one group are drawn as equal shapes in an N x N grid ...
    grid, layout = build_grid(plain.marks)
    imaging.write_png(out / "grid.png", grid)
    print(f"grid {layout.grid_side}x{layout.grid_side}, cell {layout.cell}")

    # ... which is restyled in one img2img call and cut back into objects.
    from stylviz.backend import PipelineRequest

    styled = backend.run_image_pipeline(PipelineRequest("img2img", "chocolate bars", strength=0.82,
                                                        init_image=grid))
    objects = grid_objects(styled, layout)

    # Every transform produces a patch that never leaves its mark.
    bar = plain.mark(0)
    for t in ("rescale", "elongate", "stack", "tile_fill"):
        patch = object_to_mark(objects[0], bar, t, tile_size=32)
        imaging.write_png(out / f"patch_{t}.png", patch)
        x, y, w, h = bar.bbox
        leak = (patch[..., 3] > 0.5) & ~bar.mask[y:y + h, x:x + w]
        print(f"{t:9s} patch {patch.shape[1]}x{patch.shape[0]}  pixels outside mark: {int(leak.sum())}")

    # The whole stage in one call.
    prompts = PromptSpec("a bar chart of sweets", ["chocolate", "candy"])
    recipe = select_recipe("bar", n_groups=2)
    sk = run_sketch(plain, prompts, recipe, cfg, backend)
    imaging.write_png(out / "sketch.png", sk.image)
    print("sketch written; sketch masks cover",
          {mid: round(float(m.sum() / plain.mark(mid).area), 3) for mid, m in sk.masks.items()})


if __name__ == "__main__":
    main()
