import pytest

from graindeck.varieties import NUM_VARIETIES, VARIETIES, VARIETY_NAMES, RiceVariety


def test_canonical_order_is_frozen():
    assert VARIETY_NAMES == (
        "AliKazemi",
        "AnbarBoo",
        "Hashemi",
        "Khazar",
        "SadreeDomSiahe",
        "SadreeDomZard",
        "Shirodi",
    )
    assert NUM_VARIETIES == 7
    assert [int(v) for v in VARIETIES] == list(range(7))


def test_from_name_round_trip():
    for variety in RiceVariety:
        assert RiceVariety.from_name(variety.name) is variety


def test_from_name_rejects_unknown():
    with pytest.raises(ValueError, match="unknown rice variety"):
        RiceVariety.from_name("Basmati")
