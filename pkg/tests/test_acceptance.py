"""Acceptance gate: ten criteria, each with its stated tolerance and runtime budget.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per criterion
in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest

from stylviz import ChartSpec, MockBackend, PromptSpec, WorkflowConfig, imaging, render_plain, run
from stylviz.backend import PipelineRequest, RecordingBackend, executed_steps, stepwise_pipeline
from stylviz.chart import Edge, Node
from stylviz.cli import main
from stylviz.configfile import parse_document
from stylviz.errors import InvalidRecipe
from stylviz.recipe import PREGEN_METHODS, SYNTH_PIPELINES, select_recipe
from stylviz.sketch import run_sketch
from stylviz.synthesize import build_mask_sets, dmp, synthesize_dispatch
from stylviz.workflow import cross_group_similarity, geometry_fidelity


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert elapsed < self.seconds, f"took {elapsed:.2f}s, budget {self.seconds}s"


# -- 1 ----------------------------------------------------------------------------------

@pytest.mark.criterion(1, "default configuration table")
def test_defaults_table():
    with Budget(1):
        loaded = parse_document({"chart": {"kind": "bar", "data": [1]},
                                 "prompts": {"context": "c", "subPrompts": ["a"]}}).workflow
        for cfg in (WorkflowConfig(), loaded):
            s = cfg.strengths
            assert cfg.guidance == 20
            assert (s.sketch_depth2img, s.sketch_img2img) == (0.98, 0.82)
            assert (s.synthesize_img2img, s.synthesize) == (0.4, 0.8)
            assert 0.25 <= s.refine <= 0.35
            assert cfg.beta == 0.5
            assert tuple(cfg.canvas) == (512, 512)


# -- 2 ----------------------------------------------------------------------------------

@pytest.mark.criterion(2, "DMP with one group reduces to the stepwise pipeline")
def test_dmp_reduction():
    rng = np.random.default_rng(2024)
    mock = MockBackend()
    plain = render_plain(ChartSpec.bar([2, 3, 1], canvas=(128, 128)))
    prompts = PromptSpec("context", ["only"])
    groups = prompts.groups(plain)
    with Budget(10):
        for _ in range(25):
            alpha = float(rng.uniform(0.05, 1.0))
            steps = int(rng.integers(1, 60))
            seed = int(rng.integers(0, 2**31))
            cfg = WorkflowConfig(seed=seed, steps=steps)
            trace, latents = [], []
            out = dmp(plain.image, plain, groups, cfg, mock, trace=trace, strength=alpha)
            ref = stepwise_pipeline(mock, plain.image, groups[0].prompt, alpha, steps, seed=seed,
                                    condition=mock.depth_map(plain.image), latents=latents)
            assert len(trace) == len(latents) == executed_steps(alpha, steps)
            for rec, z in zip(trace, latents):
                assert np.array_equal(rec["latent"], z)
            assert np.array_equal(out, ref)


# -- 3 ----------------------------------------------------------------------------------

def _replay_step(mock, z_prev, i, T, groups, labels, bg_latent, seed):
    """Independent recomputation of one DMP step from the previous latent."""
    out = np.empty_like(z_prev)
    latents = [mock.denoise_step(z_prev, g.prompt, "", i, T, seed=seed) for g in groups]
    for g, lt in enumerate(latents):
        out[:, labels == g] = lt[:, labels == g]
    bg = bg_latent(latents)
    out[:, labels == len(groups)] = bg[:, labels == len(groups)]
    return out


@pytest.mark.criterion(3, "DMP mask schedule audit")
def test_dmp_mask_schedule():
    rng = np.random.default_rng(7)
    mock = MockBackend()
    plain = render_plain(ChartSpec.bar([2, 3], canvas=(64, 64)))
    prompts = PromptSpec("c", ["a", "b"])
    groups = prompts.groups(plain)
    sketch_masks = {m.mark_id: imaging.dilate(m.mask, 3) for m in plain.marks}
    ms = build_mask_sets(plain, groups, 8, sketch_masks, dilation=1)
    assert not np.array_equal(ms.sketch, ms.plain)
    encoded = mock.encode(plain.image)
    with Budget(5):
        for _ in range(200):
            alpha = float(rng.uniform(0.02, 1.0))
            beta = float(rng.uniform(0, 1))
            steps = int(rng.integers(1, 51))
            T = executed_steps(alpha, steps)
            if T == 0:
                continue
            cfg = WorkflowConfig(steps=steps, beta=beta)
            trace = []
            dmp(plain.image, plain, groups, cfg, mock, sketch_masks=sketch_masks, trace=trace, strength=alpha)
            switch = math.floor(alpha * beta * steps)
            z = mock.add_noise(encoded, 0, alpha)
            assert [r["step"] for r in trace] == list(range(1, T + 1))
            for rec in trace:
                i = rec["step"]
                assert rec["switch"] == switch
                expect = "sketch" if i <= switch else "plain"
                assert rec["mask_set"] == expect
                labels = ms.sketch if expect == "sketch" else ms.plain
                if i <= switch:
                    def bg(_, i=i):
                        return mock.add_noise(encoded, 0, alpha * (T - i) / T)
                else:
                    def bg(latents, i=i):
                        return latents[(i - switch - 1) % len(latents)]
                z = _replay_step(mock, z, i, T, groups, labels, bg, 0)
                assert np.array_equal(rec["latent"], z)


# -- 4 ----------------------------------------------------------------------------------

@pytest.mark.criterion(4, "group attribution on a three-bar food chart")
def test_group_attribution():
    with Budget(30):
        mock = MockBackend()
        prompts = PromptSpec("a bar chart", ["fries", "hamburgers", "cupcakes"])
        _, state = run(ChartSpec.bar([3, 1, 2]), prompts, WorkflowConfig(), mock)
        groups = prompts.groups(state.plain)
        scores = geometry_fidelity(state.synth, state.plain, groups, mock)
        cross = cross_group_similarity(state.synth, state.plain, groups, mock)
        assert set(scores) == {0, 1, 2}
        for mid in scores:
            assert abs(scores[mid] - 1.0) <= 1 / 255
            assert cross[mid] < 0.5


# -- 5 ----------------------------------------------------------------------------------

@pytest.mark.criterion(5, "geometry encodes data (bars and pie slices)")
def test_geometry_fidelity_of_data():
    rng = np.random.default_rng(5)
    with Budget(60):
        for _ in range(100):
            n = int(rng.integers(1, 11))
            values = rng.uniform(0.05, 1.0, n) * rng.uniform(0.1, 100)
            plain = render_plain(ChartSpec.bar(values.tolist()))
            heights = []
            for m in plain.marks:
                cols = np.flatnonzero(m.mask.any(axis=0))
                per_col = {int(m.mask[:, c].sum()) for c in cols}
                assert len(per_col) == 1
                heights.append(per_col.pop())
            top = int(np.argmax(values))
            for h, v in zip(heights, values):
                assert abs(h - v / values[top] * heights[top]) <= 1.0

        for _ in range(100):
            n = int(rng.integers(2, 9))
            values = rng.uniform(0.2, 1.0, n)
            plain = render_plain(ChartSpec.pie(values.tolist()))
            center = plain.marks[0].params["center"]
            radius = plain.marks[0].params["radius"]
            ys, xs = np.mgrid[0:512, 0:512]
            theta = np.mod(np.arctan2(xs + 0.5 - center[0], -(ys + 0.5 - center[1])), 2 * math.pi)
            disk = np.hypot(xs + 0.5 - center[0], ys + 0.5 - center[1]) <= radius
            total = math.fsum(values)
            for k, m in enumerate(plain.marks):
                a0, a1 = m.params["start_angle"], m.params["end_angle"]
                assert abs((a1 - a0) - 2 * math.pi * values[k] / total) < 1e-6
                inside = disk & (theta > a0) & (theta < a1)
                assert np.array_equal(m.mask & inside, inside)
                assert np.all((theta[m.mask] >= a0) & (theta[m.mask] <= a1))


# -- 6 ----------------------------------------------------------------------------------

@pytest.mark.criterion(6, "object-to-mark transforms")
def test_transforms():
    rng = np.random.default_rng(6)
    with Budget(30):
        for _ in range(60):
            h, w = int(rng.integers(3, 60)), int(rng.integers(1, 30))
            obj = np.ones((h, w, 4))
            obj[..., :3] = np.round(rng.uniform(size=(h, w, 3)) * 255) / 255
            target = h + int(rng.integers(0, 200))
            out = imaging.elongate(obj, target)
            t = h // 3
            assert out.shape[0] == target
            assert np.array_equal(out[:t], obj[:t])
            assert np.array_equal(out[target - t:], obj[h - t:])

            target = int(rng.integers(1, 300))
            out = imaging.stack_duplicate(obj, target)
            copies = math.ceil(target / h)
            assert out.shape[0] == target
            expected = np.concatenate([obj] * copies)[copies * h - target:]
            assert np.array_equal(out, expected)

            img = rng.uniform(size=(64, 64, 3))
            mask = rng.uniform(size=(64, 64)) < rng.uniform(0.05, 0.9)
            if not mask.any():
                mask[0, 0] = True
            cut = imaging.cutout(img, mask)
            assert int((cut[..., 3] >= 0.5).sum()) == int(mask.sum())


# -- 7 ----------------------------------------------------------------------------------

class CaptureSecond(RecordingBackend):
    """Records the init image of every whole-image pipeline call."""

    def __init__(self, inner):
        super().__init__(inner)
        self.inits = []

    def run_image_pipeline(self, req):
        self.inits.append(None if req.init_image is None else np.array(req.init_image))
        return super().run_image_pipeline(req)


def random_network(rng):
    n = int(rng.integers(3, 9))
    pts = []
    while len(pts) < n:  # keep nodes apart so every edge stays visible
        p = rng.uniform(0, 1, 2)
        if all(np.hypot(*(p - q)) > 0.15 for q in pts):
            pts.append(p)
    nodes = [Node(f"v{i}", radius=float(rng.uniform(8, 20)), position=tuple(p)) for i, p in enumerate(pts)]
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    picks = rng.choice(len(pairs), size=int(rng.integers(1, min(len(pairs), 10) + 1)), replace=False)
    edges = [Edge(f"v{pairs[p][0]}", f"v{pairs[p][1]}", width=float(rng.uniform(2, 6))) for p in picks]
    return ChartSpec("network", nodes=nodes, edges=edges)


@pytest.mark.criterion(7, "edge persistence after smoothing and overlay")
def test_edge_persistence():
    rng = np.random.default_rng(11)
    cfg = WorkflowConfig()
    prompts = PromptSpec("a network", ["planets"])
    with Budget(30):
        for k in range(20):
            spec = random_network(rng)
            plain = render_plain(spec)
            mock = MockBackend()
            recipe = select_recipe("network", bool(k % 2), n_groups=1)
            sk = run_sketch(plain, prompts, recipe, cfg, mock)
            cap = CaptureSecond(mock)
            ops = []
            synthesize_dispatch(recipe, sk.image, plain, prompts, cfg, cap, ops=ops)
            assert ops[:2] == ["smooth", "overlay_edges"]
            entering = cap.inits[1]
            for m in plain.marks:
                if m.kind == "edge":
                    assert np.all(entering[m.mask] == np.asarray(m.color) / 255.0)


# -- 8 ----------------------------------------------------------------------------------

@pytest.mark.criterion(8, "end-to-end determinism and regeneration locality")
def test_determinism_and_locality(tmp_path):
    import json

    doc = {"chart": {"kind": "bar", "data": [3, 1, 2]},
           "prompts": {"context": "snacks", "subPrompts": ["fries", "hamburgers", "cupcakes"]},
           "workflow": {"seed": 3}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc))
    with Budget(60):
        for name in ("a", "b"):
            assert main(["generate", "-c", str(cfg_path), "--state", str(tmp_path / name)]) == 0
        for f in ("plain.png", "sketch/sketch.png", "synth.png", "final.png", "trace.jsonl"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
        state = tmp_path / "a"
        before = imaging.read_png(state / "final.png")
        assert main(["regen", "--state", str(state), "--mark", "1"]) == 0
        after = imaging.read_png(state / "final_v1.png")
        region = imaging.dilate(imaging.read_mask(state / "masks" / "mark_1.png"), WorkflowConfig().regen_dilation)
        assert np.count_nonzero(np.any(after != before, axis=-1) & ~region) == 0
        assert np.any(after[region] != before[region])


# -- 9 ----------------------------------------------------------------------------------

# Legal rows written out independently of the implementation's table.
LEGAL_PIPELINES = {
    ("network", True): {"controlnet_canny", "depth2img_edge"},
    ("network", False): {"controlnet_canny", "img2img_edge"},
    ("bar", True): {"dmp", "img2img"},
    ("bar", False): {"dmp", "img2img"},
    ("pie", True): {"dmp", "img2img"},
    ("pie", False): {"dmp", "img2img"},
    ("area", True): {"dmp", "controlnet_canny"},
    ("area", False): {"dmp", "controlnet_canny"},
}
LEGAL_PREGEN = {"network": {"grid_img2img"}, "bar": {"grid_img2img"},
                "pie": {"direct_depth2img", "freeform_txt2img"}, "area": {"direct_depth2img", "freeform_txt2img"}}
SMOOTH_ON = {"network"}
REFINE_OFF = {"network"}


@pytest.mark.criterion(9, "recipe legality, exhaustive")
def test_recipe_legality():
    with Budget(1):
        checked = 0
        for (kind, realism), pipe, pregen, smooth, refine in itertools.product(
                LEGAL_PIPELINES, SYNTH_PIPELINES, PREGEN_METHODS, (True, False), (True, False)):
            legal = (pipe in LEGAL_PIPELINES[(kind, realism)] and pregen in LEGAL_PREGEN[kind]
                     and smooth == (kind in SMOOTH_ON) and refine == (kind not in REFINE_OFF))
            overrides = {"pipeline": pipe, "pregen": pregen, "smooth": smooth, "refine": refine}
            try:
                r = select_recipe(kind, realism, overrides)
                accepted = True
                assert (r.pipeline, r.pregen, r.smooth, r.refine) == (pipe, (pregen,), smooth, refine)
            except InvalidRecipe:
                accepted = False
            assert accepted == legal, (kind, realism, overrides)
            checked += 1
        assert checked == 8 * 5 * 3 * 2 * 2


# -- 10 ---------------------------------------------------------------------------------

@pytest.mark.criterion(10, "mock stepwise composition equals img2img")
def test_mock_consistency():
    rng = np.random.default_rng(10)
    mock = MockBackend()
    with Budget(10):
        for _ in range(50):
            size = 8 * int(rng.integers(1, 9))
            img = np.round(rng.uniform(size=(size, size, 3)) * 255) / 255
            alpha = float(rng.uniform(0, 1))
            steps = int(rng.integers(1, 80))
            seed = int(rng.integers(0, 2**31))
            prompt = f"prompt {int(rng.integers(0, 1000))}"
            T = executed_steps(alpha, steps)
            if T == 0:
                composed = img
            else:
                z = mock.add_noise(mock.encode(img), seed, alpha)
                for i in range(1, T + 1):
                    z = mock.denoise_step(z, prompt, "", i, T, seed=seed)
                composed = mock.decode(z)
            direct = mock.run_image_pipeline(PipelineRequest("img2img", prompt, strength=alpha, steps=steps,
                                                             seed=seed, init_image=img))
            assert np.max(np.abs(composed - direct)) <= 1 / 255
