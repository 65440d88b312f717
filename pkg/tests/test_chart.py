import math

import numpy as np
import pytest

from stylviz import ChartSpec, render_plain, validate_spec
from stylviz.chart import Edge, Node, Series, background_mask, pie_angles, with_layout
from stylviz.errors import RenderError, ValidationError

from conftest import area_spec, network_spec


def column_heights(mask):
    """Brute-force oracle: count set pixels per bar column."""
    cols = np.flatnonzero(mask.any(axis=0))
    return {int(mask[:, c].sum()) for c in cols}


def test_bar_heights_follow_values():
    spec = ChartSpec.bar([3, 1, 2])
    plain = render_plain(spec)
    hs = [column_heights(m.mask) for m in plain.marks]
    assert all(len(h) == 1 for h in hs)
    hs = [h.pop() for h in hs]
    assert abs(hs[1] / hs[0] - 1 / 3) * hs[0] <= 1
    assert abs(hs[2] / hs[0] - 2 / 3) * hs[0] <= 1


def test_masks_partition_canvas():
    for spec in (ChartSpec.bar([1, 2]), ChartSpec.pie([1, 2, 3]), area_spec(), network_spec()):
        plain = render_plain(spec)
        total = sum(m.mask.astype(int) for m in plain.marks) + plain.background_mask
        assert np.all(total == 1)
        assert np.array_equal(background_mask(plain), plain.background_mask)


def test_plain_image_colors_marks():
    plain = render_plain(ChartSpec.bar([1, 2], colors=[(255, 0, 0), (0, 0, 255)]))
    assert np.all(plain.image[plain.marks[0].mask] == [1, 0, 0])
    assert np.all(plain.image[plain.background_mask] == 1)


def test_pie_angles_close_exactly():
    a = pie_angles([1, 1, 2])
    assert a[0] == (0.0, math.pi / 2)
    assert a[-1][1] == 2 * math.pi


def test_pie_pixels_lie_within_their_sector():
    spec = ChartSpec.pie([5, 1, 3])
    plain = render_plain(spec)
    for m in plain.marks:
        p = m.params
        ys, xs = np.nonzero(m.mask)
        th = np.mod(np.arctan2(xs + 0.5 - p["center"][0], -(ys + 0.5 - p["center"][1])), 2 * math.pi)
        assert np.all(th >= p["start_angle"] - 1e-9) and np.all(th <= p["end_angle"] + 1e-9)


def test_area_bands_stack():
    plain = render_plain(area_spec())
    lower, upper = plain.marks
    cols = np.flatnonzero(lower.mask.any(axis=0) & upper.mask.any(axis=0))
    c = cols[len(cols) // 2]
    top_of_lower = np.flatnonzero(lower.mask[:, c]).min()
    assert np.flatnonzero(upper.mask[:, c]).max() == top_of_lower - 1


def test_network_marks_and_edge_layer():
    spec = network_spec(4)
    plain = render_plain(spec)
    kinds = [m.kind for m in plain.marks]
    assert kinds.count("node") == 4 and kinds.count("edge") == 3
    edge_px = np.zeros_like(plain.background_mask)
    for m in plain.marks:
        if m.kind == "edge":
            edge_px |= m.mask
    assert np.array_equal(plain.edge_layer[..., 3] > 0.5, edge_px)
    assert len(plain.stylized_marks()) == 4


def test_network_layout_is_seeded():
    spec = ChartSpec("network", nodes=[Node("a"), Node("b"), Node("c")], edges=[Edge("a", "b")])
    assert with_layout(spec, 3) == with_layout(spec, 3)
    a = render_plain(spec, seed=1)
    b = render_plain(spec, seed=1)
    assert np.array_equal(a.image, b.image)


def test_validation_collects_problems():
    with pytest.raises(ValidationError) as err:
        validate_spec(ChartSpec.bar([1, -2, float("nan")]))
    msgs = [m for _, m in err.value.problems]
    assert "negative value at index 1" in msgs and "non-finite value at index 2" in msgs
    with pytest.raises(ValidationError) as err:
        validate_spec(ChartSpec("network", nodes=[Node("a")], edges=[Edge("a", "z")]))
    assert "unknown node id z" in str(err.value)
    with pytest.raises(ValidationError):
        validate_spec(ChartSpec.bar([1], canvas=(500, 512)))
    with pytest.raises(ValidationError):
        validate_spec(ChartSpec("area", series=[Series([1, 0], [1, 1])]))


def test_tiny_marks_are_rejected():
    with pytest.raises(RenderError):
        render_plain(ChartSpec.bar([1000, 1]))
    with pytest.raises(RenderError):
        render_plain(ChartSpec.bar([0, 1]))


def test_thin_horizontal_edge_renders():
    spec = ChartSpec("network", nodes=[Node("a", position=(0.0, 0.5)), Node("b", position=(1.0, 0.5))],
                     edges=[Edge("a", "b", width=2)])
    edge = [m for m in render_plain(spec).marks if m.kind == "edge"][0]
    assert edge.bbox[3] < 4 and edge.area > 0
