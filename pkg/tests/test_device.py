import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedbackmz.correlations import (DetectionEvent, coincidence_history_pairs,
                                     single_photon_exit_probability)
from feedbackmz.device import (DeviceSpec, Edge, Fig1Params, beam_splitter, build_beam_splitter_device,
                               build_fig1_device, build_pass_through_device, check_device, detector,
                               enumerate_histories, fig1_detection_times, group_histories,
                               history_field, mirror, phase_shifter, preset, route_delay,
                               single_photon_field, source, validate_device)
from feedbackmz.errors import ParameterError, ValidationError
from feedbackmz.wavepacket import WavepacketParams, zeta

S = 1 / math.sqrt(2)
P = WavepacketParams()


def fig1(tau=0.7, dtau=0.4, **kw):
    params = Fig1Params(tau, dtau, **kw)
    return params, build_fig1_device(params)


def test_presets_validate():
    for name in ("fig1", "beam_splitter", "pass_through"):
        assert validate_device(preset(name)) == []
    with pytest.raises(ParameterError):
        preset("nope")


def test_splitter_with_three_outputs_is_one_diagnostic():
    spec = build_beam_splitter_device()
    spec = DeviceSpec(spec.nodes + (detector("det3"),), spec.edges + (Edge("bs", "det3", 0.0, 2, 0),),
                      spec.inputs, spec.detectors)
    diags = validate_device(spec)
    assert len(diags) == 1
    assert diags[0].node == "bs" and diags[0].rule == "out-degree"


def test_negative_delay_is_one_diagnostic():
    spec = build_pass_through_device()
    edges = (Edge("in1", "det1", -1.0),) + spec.edges[1:]
    diags = validate_device(DeviceSpec(spec.nodes, edges, spec.inputs, spec.detectors))
    assert [d.rule for d in diags] == ["edge-delay"]


def test_cycle_without_mirror_is_rejected():
    nodes = (source("in1"), source("in2"), beam_splitter("a"), beam_splitter("b"),
             detector("det1"), detector("det2"))
    edges = (Edge("in1", "a", 0, 0, 0), Edge("in2", "b", 0, 0, 0), Edge("a", "b", 1, 0, 1),
             Edge("b", "a", 1, 0, 1), Edge("a", "det1", 0, 1, 0), Edge("b", "det2", 0, 1, 0))
    spec = DeviceSpec(nodes, edges, ("in1", "in2"), ("det1", "det2"))
    assert [d.rule for d in validate_device(spec)] == ["mirror-cycle"]
    with pytest.raises(ValidationError):
        check_device(spec)


def test_other_rules():
    nodes = (source("s"), mirror("m", 1.5), phase_shifter("p", -0.1), detector("d"), detector("d"))
    edges = (Edge("s", "m"), Edge("m", "p"), Edge("p", "d"), Edge("p", "ghost"))
    rules = {d.rule for d in validate_device(DeviceSpec(nodes, edges, ("s", "x"), ("d",)))}
    assert {"reflectivity", "delay", "unique-name", "edge-endpoint", "input-port"} <= rules


def test_bare_splitter_has_single_histories():
    spec = build_beam_splitter_device()
    for s in spec.inputs:
        for d in spec.detectors:
            hs = enumerate_histories(spec, s, d, 3)
            assert len(hs) == 1
            assert abs(abs(hs[0].weight) - S) < 1e-15


def test_bad_ports_and_pass_budget():
    spec = build_beam_splitter_device()
    with pytest.raises(ParameterError):
        enumerate_histories(spec, "det1", "det2", 1)
    with pytest.raises(ParameterError):
        enumerate_histories(spec, "in1", "in2", 1)
    with pytest.raises(ParameterError):
        enumerate_histories(spec, "in1", "det1", -1)


def test_zero_passes_never_touch_mirror():
    _, spec = fig1()
    for s in spec.inputs:
        for d in spec.detectors:
            hs = enumerate_histories(spec, s, d, 0)
            assert all("mirror" not in h.nodes and h.pass_count == 0 for h in hs)
    # with one pass allowed, some histories do use the mirror
    assert any(h.pass_count == 1 for h in enumerate_histories(spec, "in1", "det2", 1))


@pytest.mark.parametrize("r", [-1.0, 1.0, 0.8, 0.6j])
def test_weight_law_and_delays(r):
    params, spec = fig1(mirror_reflectivity=r)
    for s in spec.inputs:
        for d in spec.detectors:
            for h in enumerate_histories(spec, s, d, 2):
                expected = 2 ** (-h.splitter_count / 2) * abs(r) ** h.mirror_count
                # a dozen rounded products: exact up to a few ulps
                assert abs(abs(h.weight) - expected) <= 1e-14 * expected
                assert h.pass_count == h.mirror_count == h.nodes.count("mirror")
                assert h.total_delay == pytest.approx(route_delay(spec, h.nodes, h.ports), abs=1e-9)
                assert h.shifter_delay == pytest.approx(h.shifter_count * params.shifter_delay, abs=1e-12)


def test_enumeration_is_deterministic_and_sorted():
    _, spec = fig1()
    a = enumerate_histories(spec, "in2", "det2", 2)
    b = enumerate_histories(spec, "in2", "det2", 2)
    assert a == b
    keys = [tuple(spec.index(n) for n in h.nodes) for h in a]
    assert keys == sorted(keys)


def test_two_coincidence_pairs():
    params, spec = fig1()
    p = WavepacketParams()
    ta, tb = fig1_detection_times(params, 0.0, spec)
    pairs = coincidence_history_pairs(spec, (("in1", p), ("in2", p)),
                                      (DetectionEvent("det1", ta), DetectionEvent("det2", tb)), 2)
    assert len(pairs) == 2
    assert sorted(label for label, _, _ in pairs) == ["direct", "exchanged"]
    for _, first, second in pairs:
        # one Mach-Zehnder pass to detector 1, two to detector 2
        assert max(h.nodes.count("mz_b") for h in first.members) == 1
        assert max(h.nodes.count("mz_b") for h in second.members) == 2


def test_one_pass_weights():
    params, spec = fig1()
    # photon 1, one pass: -(1/2)^(3/2) on the short arm, + on the delayed arm
    cls = [c for c in group_histories(enumerate_histories(spec, "in1", "det1", 2)) if not c.vanishes][0]
    assert np.allclose(cls.coefficients, [-S / 2, S / 2], atol=1e-15)


def test_history_field_examples():
    spec = build_pass_through_device()
    h = enumerate_histories(spec, "in1", "det1", 0)[0]
    assert h.weight == 1 and h.total_delay == 0
    assert history_field(h, P, 0.3) == zeta(P, 0.3)
    h2 = type(h)(h.nodes, h.ports, 0, 1.5, -0.5)
    assert history_field(h2, P, 2.0) == -0.5 * zeta(P, 0.5)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 3), st.floats(0.05, 3), st.floats(-3, 3))
def test_two_pass_field_matches_bracket(tau, dtau, t0):
    # photon 1 at detector 2 after two passes: beta [-z(t0+tau) + z(t0+tau+2 dtau)]
    params, spec = fig1(tau, dtau)
    p = WavepacketParams(carrier_freq=0.8)
    _, tb = fig1_detection_times(params, t0, spec)
    field = single_photon_field(enumerate_histories(spec, "in1", "det2", 2), p, tb)
    bracket = -zeta(p, t0 + tau) + zeta(p, t0 + tau + 2 * dtau)
    assert abs(field - (-S / 16) * bracket) < 1e-13


def test_zero_shifter_delay_collapses_brackets():
    params, spec = fig1(1.3, 0.0)
    ta, tb = fig1_detection_times(params, 0.2, spec)
    for s in spec.inputs:
        # cancellation is exact up to the rounding of the summed weights
        assert abs(single_photon_field(enumerate_histories(spec, s, "det1", 2), P, ta)) < 1e-16
        assert abs(single_photon_field(enumerate_histories(spec, s, "det2", 2), P, tb)) < 1e-16


def test_degenerate_times_all_equal_t0():
    params, spec = fig1(0.0, 0.0)
    t0 = 0.25
    ta, tb = fig1_detection_times(params, t0, spec)
    pairs = coincidence_history_pairs(spec, (("in1", P), ("in2", P)),
                                      (DetectionEvent("det1", ta), DetectionEvent("det2", tb)), 2)
    assert len(pairs) == 2
    for s in spec.inputs:
        for det, t in (("det1", ta), ("det2", tb)):
            near = [h for h in enumerate_histories(spec, s, det, 2) if abs(t - h.total_delay) < 10]
            assert near and all(abs(t - h.total_delay - t0) < 1e-12 for h in near)


def test_fig1_params_validation():
    with pytest.raises(ParameterError):
        Fig1Params(loop_delay=-1)
    with pytest.raises(ParameterError):
        Fig1Params(shifter_delay=-0.1)
    with pytest.raises(ParameterError):
        Fig1Params(mirror_reflectivity=2)
    assert Fig1Params().mirror_reflectivity == -1


def test_exit_probability_grows_with_passes():
    _, spec = fig1()
    values = [single_photon_exit_probability(spec, "in1", P, k) for k in range(4)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[0] == pytest.approx(0.75, abs=1e-12)
    assert values[-1] <= 1 + 1e-9
