import json
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from capifsim.model import (
    COUNTED_CATEGORIES,
    HEARTBEATS,
    CapifMessage,
    Category,
    InvalidZoneKind,
    Strategy,
    UnknownMessage,
    VnfKind,
    ZoneId,
    ZoneKind,
    catalog,
    catalog_json,
    categorize,
    find_transaction,
    is_heartbeat,
    message,
    placement,
)

GOLDEN = Path(__file__).parent / "data" / "catalog_golden.json"

NYC_LZ = ZoneId.parse("nyc-lz")
USE1 = ZoneId.parse("use1-az")


def test_catalog_matches_golden_file():
    assert catalog_json() == GOLDEN.read_text(encoding="utf-8")


def test_catalog_counts_per_category():
    counts = Counter(m.category for m in catalog())
    assert counts == {
        Category.NRF_REGISTER: 6,
        Category.FIVE_G_AKA: 3,
        Category.HN_INTERNAL: 2,
        Category.SESSION_SETUP: 6,
    }


def test_ue_authentication_entry():
    m = message("ue-authentication")
    assert (m.method, m.path, m.src, m.dst, m.category) == (
        "POST", "/nausf-auth/v1/ue-authentications", VnfKind.AMF, VnfKind.AUSF, Category.FIVE_G_AKA)
    assert catalog().index(m) == 6


@pytest.mark.parametrize("mid, category", [
    ("smf-discovery", Category.SESSION_SETUP),
    ("auth-data", Category.HN_INTERNAL),
    ("upf-register", Category.NRF_REGISTER),
    ("context-update", Category.SESSION_SETUP),
])
def test_categorize_examples(mid, category):
    assert categorize(message(mid)) is category


def test_categorize_rejects_unknown_transaction():
    bogus = CapifMessage("x", "DELETE", "/nudr-dr/v1/x", VnfKind.UDR, VnfKind.AMF, Category.HN_INTERNAL)
    with pytest.raises(UnknownMessage):
        categorize(bogus)
    with pytest.raises(UnknownMessage):
        message("no-such-message")


def test_find_transaction_uses_service_segment_and_endpoints():
    assert find_transaction("get", "/nnrf-disc", VnfKind.AMF, VnfKind.NRF).id == "smf-discovery"
    assert find_transaction("GET", "/nnrf-disc", VnfKind.SMF, VnfKind.NRF).id == "upf-discovery"
    assert find_transaction("GET", "/nnrf-disc", VnfKind.UPF, VnfKind.NRF) is None
    hb = find_transaction("PATCH", "/nnrf-nfm", VnfKind.SMF, VnfKind.NRF)
    assert hb is not None and is_heartbeat(hb)
    assert hb not in catalog()


def test_heartbeats_are_not_catalog_entries():
    assert len(HEARTBEATS) == 3
    assert not any(is_heartbeat(m) for m in catalog())


def test_per_ue_flag():
    assert not message("amf-register").per_ue
    assert message("context-creation").per_ue
    assert message("auth-subscription").per_ue


def test_counted_categories_leave_out_hn_internal():
    assert Category.HN_INTERNAL not in COUNTED_CATEGORIES
    assert len(COUNTED_CATEGORIES) == 3


def test_golden_is_valid_json_with_unique_ids():
    doc = json.loads(GOLDEN.read_text())
    ids = [d["id"] for d in doc]
    assert len(ids) == len(set(ids)) == 17


@pytest.mark.parametrize("label, cat", [
    ("session_setup", Category.SESSION_SETUP),
    ("SessionSetup", Category.SESSION_SETUP),
    ("five-g-aka", Category.FIVE_G_AKA),
    ("hn_internal", Category.HN_INTERNAL),
])
def test_category_parse(label, cat):
    assert Category.parse(label) is cat


def test_zone_parse_and_kind():
    z = ZoneId.parse("NYC-LZ")
    assert z == NYC_LZ and z.kind is ZoneKind.LZ and z.is_edge
    assert not USE1.is_edge
    for bad in ("nyc", "-lz", "nyc-xz", ""):
        with pytest.raises(ValueError):
            ZoneId.parse(bad)


def test_strategy_names():
    assert Strategy.parse("mcs-mobile") is Strategy.MCS_MOBILE
    assert Strategy.parse("UrllcUser") is Strategy.URLLC_USER
    assert [s.cli_name for s in Strategy] == ["monolithic", "urllc-user", "mcs-static", "mcs-mobile"]
    with pytest.raises(ValueError, match="monolithic"):
        Strategy.parse("bogus")


def test_placement_examples():
    p = placement(Strategy.URLLC_USER, NYC_LZ, USE1)
    assert p[VnfKind.AMF] == USE1 and p[VnfKind.SMF] == NYC_LZ
    mono = placement(Strategy.MONOLITHIC, USE1, USE1)
    assert set(mono.values()) == {USE1}
    mobile = placement(Strategy.MCS_MOBILE, NYC_LZ, USE1)
    assert mobile[VnfKind.NRF] == NYC_LZ and mobile[VnfKind.AUSF] == USE1


def test_placement_rejects_wrong_zone_kinds():
    with pytest.raises(InvalidZoneKind):
        placement(Strategy.URLLC_USER, NYC_LZ, ZoneId.parse("nyc-wz"))
    with pytest.raises(InvalidZoneKind):
        placement(Strategy.MCS_STATIC, USE1, USE1)


@given(st.sampled_from(list(Strategy)), st.sampled_from(["nyc-lz", "lon-wz", "per-lz"]))
def test_placement_is_total_and_edge_set_matches_strategy(strategy, edge):
    e = ZoneId.parse(edge)
    p = placement(strategy, e, USE1)
    assert set(p) == set(VnfKind)
    assert {k for k in p if p[k] == e} == set(strategy.edge_vnfs)


def test_edge_sets_grow_strictly_along_strategies():
    order = [Strategy.MONOLITHIC, Strategy.URLLC_USER, Strategy.MCS_STATIC, Strategy.MCS_MOBILE]
    for a, b in zip(order, order[1:]):
        assert a.edge_vnfs < b.edge_vnfs
