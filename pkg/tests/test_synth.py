import numpy as np
import pytest

from graindeck.corpus import load_bulk_dataset, load_grain_dataset
from graindeck.errors import CapacityError, ConfigError
from graindeck.instances import connected_components
from graindeck.synth import (
    AXIS_RATIO_SEPARATION_FLOOR,
    COLOR_SEPARATION_FLOOR,
    GrainStyle,
    SceneSpec,
    default_styles,
    gen_bulk_scene,
    gen_grain,
    load_styles,
    random_scene_spec,
    render_grain,
    style_separation,
    write_bulk_corpus,
    write_grain_corpus,
    write_styles,
)
from graindeck.varieties import RiceVariety


def test_grain_style_validation():
    with pytest.raises(ConfigError, match="major_axis > minor_axis"):
        GrainStyle(RiceVariety.Hashemi, 5, 8, (200, 200, 200), 0.1, 0.1)
    with pytest.raises(ConfigError, match="speckle_density"):
        GrainStyle(RiceVariety.Hashemi, 20, 8, (200, 200, 200), 1.5, 0.1)


def test_scene_spec_validation():
    with pytest.raises(ConfigError, match="128"):
        SceneSpec(canvas=(100, 200), counts={RiceVariety.Hashemi: 3})
    with pytest.raises(ConfigError, match="at least one grain"):
        SceneSpec(canvas=(128, 128), counts={RiceVariety.Hashemi: 0})
    with pytest.raises(ConfigError, match="non-negative"):
        SceneSpec(canvas=(128, 128), counts={RiceVariety.Hashemi: -1})


def test_default_styles_cover_all_varieties():
    styles = default_styles()
    assert set(styles) == set(RiceVariety)
    for variety, style in styles.items():
        assert style.variety is variety


def test_default_styles_are_pairwise_separated():
    styles = default_styles()
    for a in RiceVariety:
        for b in RiceVariety:
            if a >= b:
                continue
            color, ratio = style_separation(styles[a], styles[b])
            assert color >= COLOR_SEPARATION_FLOOR or ratio >= AXIS_RATIO_SEPARATION_FLOOR, (
                f"styles {a.name} and {b.name} are separated in neither color "
                f"({color:.1f}) nor aspect ratio ({ratio:.2f})"
            )


def test_styles_round_trip(tmp_path):
    styles = default_styles()
    path = tmp_path / "styles.json"
    write_styles(path, styles)
    assert load_styles(path) == styles


def test_render_grain_footprint_matches_ellipse_area(rng):
    for style in default_styles().values():
        areas = []
        for _ in range(5):
            patch, footprint = render_grain(style, rng)
            assert patch.shape[:2] == footprint.shape
            assert np.all(patch[footprint == 0] == 0)
            areas.append(int(footprint.sum()))
        expected = np.pi * style.major_axis * style.minor_axis / 4
        assert abs(np.mean(areas) - expected) / expected < 0.15


def test_gen_grain_is_deterministic():
    style = default_styles()[RiceVariety.Khazar]
    a = gen_grain(style, seed=42)
    b = gen_grain(style, seed=42)
    c = gen_grain(style, seed=43)
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, c.pixels)
    assert a.label is RiceVariety.Khazar
    assert min(a.pixels.shape[:2]) >= 32


def test_gen_bulk_scene_is_a_pure_function_of_its_spec():
    spec = SceneSpec(canvas=(160, 160), counts={RiceVariety.Hashemi: 3, RiceVariety.Khazar: 2}, seed=11)
    a = gen_bulk_scene(spec)
    b = gen_bulk_scene(spec)
    assert np.array_equal(a.pixels, b.pixels)
    assert np.array_equal(a.mask, b.mask)
    assert a.composition == spec.counts


def test_gen_bulk_scene_grains_stay_disconnected():
    for seed in range(5):
        spec = SceneSpec(
            canvas=(192, 192),
            counts={RiceVariety.AnbarBoo: 4, RiceVariety.Shirodi: 4, RiceVariety.SadreeDomZard: 4},
            seed=seed,
        )
        sample = gen_bulk_scene(spec)
        assert set(np.unique(sample.mask)) <= {0, 1}
        _, count = connected_components(sample.mask, connectivity=8)
        assert count == 12


def test_gen_bulk_scene_allow_touching_places_all_grains():
    spec = SceneSpec(canvas=(128, 128), counts={RiceVariety.Hashemi: 6}, allow_touching=True, seed=0)
    sample = gen_bulk_scene(spec)
    assert sample.mask.sum() > 0


def test_gen_bulk_scene_overcrowding_raises():
    spec = SceneSpec(canvas=(128, 128), counts={RiceVariety.Khazar: 120}, seed=0)
    with pytest.raises(CapacityError):
        gen_bulk_scene(spec, max_attempts=30)


def test_write_grain_corpus_round_trips_through_loader(tmp_path):
    record = write_grain_corpus(tmp_path, per_class=2, seed=3)
    assert len(record) == 14
    samples = load_grain_dataset(tmp_path)
    assert [(s.source_id, s.label) for s in samples] == record


def test_write_bulk_corpus_round_trips_through_loader(tmp_path):
    specs = write_bulk_corpus(tmp_path, n_scenes=2, seed=4, canvas=(160, 160))
    samples = load_bulk_dataset(tmp_path)
    assert len(samples) == len(specs) == 2
    for sample, spec in zip(samples, specs):
        assert sample.composition == spec.counts
        rendered = gen_bulk_scene(spec)
        assert np.array_equal(sample.pixels, rendered.pixels)
        assert np.array_equal(sample.mask, rendered.mask)


def test_random_scene_spec_respects_bounds(rng):
    for seed in range(50):
        spec = random_scene_spec(rng, total_grains=(5, 9), max_varieties=3, seed=seed)
        total = sum(spec.counts.values())
        assert 5 <= total <= 9
        assert 1 <= len(spec.counts) <= 3
        assert spec.seed == seed
