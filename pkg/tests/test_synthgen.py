import json
from collections import Counter

import numpy as np
import pytest
from shapely.geometry import Polygon

from ductscan.contour import trace_contours
from ductscan.detect import stroke_thickness
from ductscan.evaluate import aggregate, match_and_score
from ductscan.objects import DUCT, ELBOW, OTHER, TEE
from ductscan.pipeline import extract
from ductscan.schemas import validate
from ductscan.synthgen import (
    DuctSpec,
    GroundTruth,
    Layout,
    LayoutError,
    OtherSpec,
    random_corpus,
    random_layout,
    render,
    truth_objects,
)

import oracles


def _l_layout(**kw):
    # two ducts turning at (1100, 400), each stopping 90 mm short of the corner
    return Layout(
        ducts=[DuctSpec((755, 400), 0, 510, 150, 100), DuctSpec((1100, 745), 90, 510, 150, 125)],
        reference_mm=(300, 1300),
        canvas_px=(1500, 1600),
        **kw,
    )


def test_corpus_is_deterministic():
    a = random_corpus(42, 3)
    b = random_corpus(42, 3)
    for (la, ia, ta), (lb, ib, tb) in zip(a, b):
        assert la.to_dict() == lb.to_dict()
        assert np.array_equal(ia.bits, ib.bits)
        assert ta.to_dict() == tb.to_dict()
    assert a[0][0].to_dict() != random_corpus(43, 1)[0][0].to_dict()


def test_corpus_mix_follows_survey_proportions():
    counts = Counter()
    for i in range(100):
        counts.update(o.kind for o in truth_objects(random_layout(np.random.default_rng([2024, i]))))
    n = sum(counts.values())
    assert 0.48 <= counts[DUCT] / n <= 0.58
    # Tee 19%, Elbow 14%, Other 14%
    assert counts[TEE] / n == pytest.approx(0.19, abs=0.05)
    assert counts[ELBOW] / n == pytest.approx(0.14, abs=0.05)
    assert counts[OTHER] / n == pytest.approx(0.14, abs=0.05)


def test_random_corpus_n_100_duct_fraction():
    # same layouts random_corpus renders; rendering is skipped to keep this fast
    kinds = Counter()
    for i in range(100):
        kinds.update(o.kind for o in truth_objects(random_layout(np.random.default_rng([0, i]))))
    assert 0.48 <= kinds[DUCT] / sum(kinds.values()) <= 0.58


def test_corpus_arguments_are_checked():
    with pytest.raises(ValueError):
        random_corpus(1, 0)
    with pytest.raises(ValueError):
        random_corpus(1, 1, profile="smudged")


def test_noisy_corpus_scores_no_better_than_clean():
    seeds = 6
    clean = random_corpus(11, seeds, "clean")
    noisy = random_corpus(11, seeds, "noisy")
    score = {}
    for name, corpus in (("clean", clean), ("noisy", noisy)):
        reports = [match_and_score(extract(img).objects, truth) for _, img, truth in corpus]
        score[name] = aggregate(reports).overall
    assert score["clean"] == (1.0, 1.0, 1.0)
    assert sum(score["noisy"]) < sum(score["clean"])
    # paired: same objects, extra ink
    for (lc, ic, tc), (ln, inn, tn) in zip(clean, noisy):
        assert [o.to_dict() for o in tc.objects] == [o.to_dict() for o in tn.objects]
        assert inn.foreground_count() != ic.foreground_count()


def test_empty_layout_is_one_component():
    img, truth = render(Layout(canvas_px=(800, 800)))
    assert oracles.component_count(img.bits) == 1
    assert truth.objects == [] and truth.labels == []
    assert len(trace_contours(img)) == 1


def test_l_layout_truth():
    img, truth = render(_l_layout())
    assert truth.counts() == {DUCT: 2, ELBOW: 1}
    elbow = next(o for o in truth.objects if o.kind == ELBOW)
    assert elbow.connections == (0, 1)
    # centroid of the two joined duct ends
    assert elbow.center_mm == pytest.approx(((1010 + 1100) / 2, (400 + 490) / 2))
    assert elbow.width_mm == 150 and elbow.height_mm == 125
    assert len(truth.labels) == 2 and truth.labels[0].text == "150x100"


def test_rendered_duct_stroke_measures_0_6_mm():
    img, truth = render(_l_layout())
    cs = trace_contours(img)
    ring = max((i for i in cs.outer_ids() if cs.holes_of(i)), key=lambda i: len(cs[i]))
    assert stroke_thickness(cs[ring], cs, truth.plot_mm_per_px) == pytest.approx(0.6, abs=0.05)


def test_overlapping_labels_are_rejected():
    layout = Layout(
        ducts=[DuctSpec((800, 400), 0, 500, 150, 100), DuctSpec((800, 590), 0, 500, 100, 100, label_side=-1)],
        reference_mm=(300, 1300),
        canvas_px=(1500, 1600),
    )
    with pytest.raises(LayoutError, match="ducts 0 and 1"):
        render(layout)


def test_touching_ducts_are_rejected():
    layout = _l_layout()
    layout.ducts[1] = DuctSpec((1060, 700), 90, 510, 150, 125)  # overlaps the end of duct 0
    with pytest.raises(LayoutError, match="ducts 0 and 1 touch"):
        render(layout)


def test_random_layouts_keep_ducts_apart():
    for i in range(20):
        layout = random_layout(np.random.default_rng([8, i]))
        polys = [Polygon(d.corners()) for d in layout.ducts]
        gap = min(a.distance(b) for k, a in enumerate(polys) for b in polys[k + 1 :])
        assert gap > layout.hvac_stroke_px * layout.scale_mm_per_px + 2


def test_layout_invariants_are_enforced():
    with pytest.raises(LayoutError, match="outside"):
        render(Layout(ducts=[DuctSpec((1400, 400), 0, 500, 150, 100)], reference_mm=(300, 1300), canvas_px=(1500, 1600)))
    with pytest.raises(LayoutError, match="reference"):
        render(Layout(ducts=[DuctSpec((400, 1300), 0, 500, 150, 100)], reference_mm=(300, 1300), canvas_px=(1500, 1600)))


def test_truth_counts_match_layout():
    layout = _l_layout()
    layout.others = [OtherSpec("circle", (400, 400), 160), OtherSpec("octagon", (400, 800), 140)]
    _, truth = render(layout)
    assert truth.counts() == {DUCT: 2, ELBOW: 1, OTHER: 2}
    assert [o.id for o in truth.objects] == list(range(5))
    for layout, _, truth in random_corpus(5, 3):
        c = truth.counts()
        assert c[DUCT] == len(layout.ducts)
        assert c.get(OTHER, 0) == len(layout.others)
        assert c.get(ELBOW, 0) + c.get(TEE, 0) == len(layout.fittings)


def test_json_round_trips(tmp_path):
    layout, img, truth = random_corpus(3, 1, "noisy")[0]
    ldoc = json.loads(json.dumps(layout.to_dict()))
    validate(ldoc, "layout")
    assert Layout.from_dict(ldoc).to_dict() == layout.to_dict()
    tdoc = json.loads(json.dumps(truth.to_dict()))
    validate(tdoc, "ground_truth")
    assert GroundTruth.from_dict(tdoc).to_dict() == truth.to_dict()
    again, _ = render(Layout.from_dict(ldoc))
    assert np.array_equal(again.bits, img.bits)


def test_ink_is_opaque_black_on_transparent():
    img, truth = render(_l_layout())
    rgba = img.to_rgba()
    assert set(np.unique(rgba[..., 3])) == {0, 255}
    assert (rgba[..., :3] == 0).all()
    assert int((rgba[..., 3] == 255).sum()) == truth.ink_pixels
