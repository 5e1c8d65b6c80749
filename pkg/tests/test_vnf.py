from collections import Counter

import pytest

from capifsim.errors import ConfigError
from capifsim.model import Category, Strategy, VnfKind, ZoneId, catalog
from capifsim.telemetry import Side
from capifsim.vnf import ProcessingModel
from capifsim.vnf.base import AuthState, SessionState, UeContext
from capifsim.vnf.functions import AuthChainTimeout, DiscoveryFailed, NotAuthenticated
from capifsim.vnf.gnbsim import ue_id_for
from capifsim.vnf.nrf import DuplicateInstanceId, NfProfile, NfRegistry, NoInstanceAvailable, UnknownInstance

from support import boot_and_run, virtual_core

USE1 = ZoneId.parse("use1-az")


def profile(iid, kind=VnfKind.SMF):
    return NfProfile(iid, kind, USE1, f"http://{iid}")


# -- NRF registry -----------------------------------------------------------------------


def test_register_and_duplicate():
    reg = NfRegistry()
    reg.register(profile("amf-1", VnfKind.AMF))
    assert len(reg) == 1
    with pytest.raises(DuplicateInstanceId):
        reg.register(profile("amf-1", VnfKind.AMF))
    with pytest.raises(ValueError):
        reg.register(profile("udr-1", VnfKind.UDR))


def test_heartbeat_is_monotone_and_requires_registration():
    reg = NfRegistry()
    reg.register(profile("smf-1"))
    reg.heartbeat("smf-1", {"load": 3}, 10_000_000)
    reg.heartbeat("smf-1", None, 20_000_000)
    assert reg.get("smf-1").last_heartbeat == 20_000_000
    reg.heartbeat("smf-1", None, 5)
    assert reg.get("smf-1").last_heartbeat == 20_000_000
    assert reg.get("smf-1").attributes == {"load": 3}
    with pytest.raises(UnknownInstance):
        reg.heartbeat("smf-9", None, 1)


def test_discovery_returns_earliest_registration():
    reg = NfRegistry()
    with pytest.raises(NoInstanceAvailable):
        reg.discover(VnfKind.UPF)
    reg.register(profile("s2-late"))
    reg.register(profile("a1-later"))
    assert reg.discover(VnfKind.SMF).instance_id == "s2-late"
    assert [d["nfInstanceId"] for d in reg.dump()] == ["s2-late", "a1-later"]


def test_profile_round_trip_and_bodies_without_clock():
    p = profile("smf-1")
    p.last_heartbeat = 77
    assert NfProfile.from_dict(p.to_dict()) == p
    assert "lastHeartbeat" not in p.to_dict(with_timestamps=False)


def test_boot_registers_three_and_notifies_three(tmp_path):
    vc = virtual_core(tmp_path)
    vc.run(lambda core: core.boot())
    ids = Counter(s.transaction.id for s in vc.store.spans() if s.side is Side.SENDER)
    assert ids == Counter({m.id: 1 for m in catalog() if m.category is Category.NRF_REGISTER})
    traces = vc.traces()
    assert len(traces) == 1 and traces[0].is_tree()
    assert len(vc.core.nrf.registry) == 3
    for kind in (VnfKind.AMF, VnfKind.SMF, VnfKind.UPF):
        assert vc.core.apps[kind].notifications[0]["event"] == "NF_REGISTERED"


def test_heartbeats_update_registry_but_are_not_counted(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        core.start_heartbeats(10_000_000, count=2)
        await core.wait_heartbeats()
        return core.rt.now_us()

    now = vc.run(body)
    for p in vc.core.nrf.registry.dump():
        assert p["lastHeartbeat"] > 10_000_000 and p["lastHeartbeat"] <= now
        assert p["attributes"]["load"] == 1
    beats = [s for s in vc.store.spans() if s.transaction.id.endswith("heartbeat")]
    assert len(beats) == 2 * 3 * 2


# -- AMF procedures ----------------------------------------------------------------------


def test_register_ue_authenticates_with_hn_chain(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        return await core.amf.register_ue("imsi-001010000000001")

    ctx = vc.run(body)
    assert ctx.auth_state is AuthState.AUTHENTICATED
    t = vc.traces()[-1]
    cats = Counter(s.category for s in t.spans if s.side is Side.SENDER)
    assert cats == {Category.FIVE_G_AKA: 3, Category.HN_INTERNAL: 2}
    assert t.is_tree() and t.root.transaction.id == "ue-authentication"


def test_register_ue_with_ausf_down_is_auth_chain_timeout(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        await core.stop_vnf(VnfKind.AUSF)
        with pytest.raises(AuthChainTimeout):
            await core.amf.register_ue("imsi-1")
        return True

    assert vc.run(body)
    errors = [s for s in vc.store.spans() if s.error]
    assert [s.transaction.id for s in errors] == ["ue-authentication"]


def test_setup_session_requires_authentication(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        with pytest.raises(NotAuthenticated):
            await core.amf.setup_session("imsi-404")
        return True

    assert vc.run(body)


def test_setup_session_without_upf_is_discovery_failed(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot(register=(VnfKind.AMF, VnfKind.SMF))
        await core.amf.register_ue("imsi-1")
        with pytest.raises(DiscoveryFailed):
            await core.amf.setup_session("imsi-1")
        return core.amf.ues["imsi-1"]

    ctx = vc.run(body)
    assert ctx.session_state is SessionState.NONE


def test_setup_session_establishes_with_six_spans(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        await core.amf.register_ue("imsi-1")
        return await core.amf.setup_session("imsi-1")

    ctx = vc.run(body)
    assert ctx.session_state is SessionState.ESTABLISHED and ctx.sm_context_ref
    setup = [s for s in vc.store.spans() if s.side is Side.SENDER and s.category is Category.SESSION_SETUP]
    assert [s.transaction.id for s in sorted(setup, key=lambda s: s.start_us)] == [
        "smf-discovery", "context-creation", "upf-discovery", "n1-n2-context",
        "session-resource-setup", "context-update"]


def test_ue_context_invariant():
    with pytest.raises(ValueError):
        UeContext("x", session_state=SessionState.ESTABLISHED)
    ctx = UeContext("x")
    with pytest.raises(ValueError):
        ctx.advance(session=SessionState.CONTEXT_CREATED)


# -- gnbsim ------------------------------------------------------------------------------


def test_gnbsim_rejects_zero_ues(tmp_path):
    vc = virtual_core(tmp_path)
    with pytest.raises(ValueError, match="positive"):
        vc.run(lambda core: boot_and_run(core, 0))


def test_ten_ues_scale_per_ue_categories(tmp_path):
    vc = virtual_core(tmp_path)
    summary = vc.run(lambda core: boot_and_run(core, 10))
    assert summary.ok and summary.successes == 10
    cats = Counter(s.category for s in vc.store.spans() if s.side is Side.SENDER)
    assert cats[Category.FIVE_G_AKA] == 30
    assert cats[Category.SESSION_SETUP] == 60
    assert cats[Category.NRF_REGISTER] == 6
    assert cats[Category.HN_INTERNAL] == 20


def test_two_ues_get_disjoint_traces_with_equal_shape(tmp_path):
    vc = virtual_core(tmp_path)
    vc.run(lambda core: boot_and_run(core, 2))
    ue_traces = [t for t in vc.traces() if t.root.transaction.id == "ue-authentication"]
    assert len(ue_traces) == 2
    shapes = [sorted((s.transaction.id, s.side.value) for s in t.spans) for t in ue_traces]
    assert shapes[0] == shapes[1]
    assert not {s.span_id for s in ue_traces[0].spans} & {s.span_id for s in ue_traces[1].spans}


def test_failures_are_per_ue(tmp_path):
    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        first = await core.run_ues(1)
        await core.stop_vnf(VnfKind.UDR)
        second = await core.run_ues(2, first_index=2)
        return first, second

    first, second = vc.run(body)
    assert first.ok
    assert second.successes == 0 and len(second.failures) == 2
    assert "AuthChainTimeout" in second.failures[0].error
    assert second.to_dict()["failures"][0]["ueId"] == ue_id_for(2)


def test_concurrent_ues_share_the_same_transactions(tmp_path):
    vc = virtual_core(tmp_path)
    summary = vc.run(lambda core: boot_and_run(core, 5, concurrent=True))
    assert summary.ok
    assert all(t.is_tree() for t in vc.traces())
    assert len(vc.store) == 2 * (6 + 5 * 11)


# -- processing model ------------------------------------------------------------------


def test_processing_model_overrides_and_round_trip():
    pm = ProcessingModel(1.0, {(VnfKind.SMF, "context-creation"): 2.5})
    assert pm.us(VnfKind.SMF, "context-creation") == 2500
    assert pm.us(VnfKind.AMF, "context-creation") == 1000
    assert pm.us(VnfKind.AMF, None) == 1000
    assert ProcessingModel.from_dict(pm.to_dict()) == pm


def test_processing_model_validation():
    with pytest.raises(ConfigError):
        ProcessingModel(-1)
    with pytest.raises(ConfigError):
        ProcessingModel(1, {(VnfKind.UDR, "context-creation"): 1})
    with pytest.raises(ConfigError):
        ProcessingModel.from_dict({"overrides": [{"vnf": "AMF"}]})


def test_processing_override_shows_up_in_span(tmp_path):
    pm = ProcessingModel(1.0, {(VnfKind.SMF, "context-creation"): 4.0})
    vc = virtual_core(tmp_path, strategy=Strategy.MONOLITHIC, edge="use1-az", processing=pm)
    vc.run(lambda core: boot_and_run(core, 1))
    rx = next(s for s in vc.store.spans()
              if s.side is Side.RECEIVER and s.transaction.id == "context-creation")
    nested = sum(s.duration_us for s in vc.store.spans()
                 if s.side is Side.SENDER and s.transaction.id in ("upf-discovery", "n1-n2-context"))
    assert rx.duration_us == 4000 + nested
