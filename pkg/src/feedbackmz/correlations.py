"""Two-photon coincidence probabilities.

Two engines are provided. ``coincidence_eq4`` evaluates the closed-form
law for the feedback interferometer exactly as written, prefactor
``2**-11`` included. ``coincidence_general`` sums single-photon histories
on an arbitrary device and adds the two photon-to-detector assignments
before squaring. The two agree up to a constant factor on the ``fig1``
preset (see ``device.fig1_detection_times``).
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .device import enumerate_histories, group_histories, single_photon_field
from .errors import DegenerateInputError, ParameterError
from .wavepacket import WINDOW_SIGMAS, WavepacketParams, overlap, zeta

CLOSED_FORM_PREFACTOR = 2.0 ** -11
NEGATIVE_TOL = 1e-15


@dataclass(frozen=True)
class DetectionEvent:
    detector: str
    time: float


def _clamp(p):
    # |A|^2 is non-negative by construction; guard against callers passing raw sums
    if p < -NEGATIVE_TOL:
        raise ArithmeticError(f"negative probability {p!r}")
    return max(p, 0.0)


# -- closed form ----------------------------------------------------------

def closed_form_terms(t1, t2, tau, dtau, p1, p2):
    """The two products of the closed-form amplitude, without prefactor.

    Brackets for the photon seen by detector 1 are evaluated at ``t1`` and
    those for detector 2 at ``t2``; ``t1 == t2 == t0`` is the printed law.
    Works elementwise on broadcastable arrays.
    """
    z1 = lambda t: zeta(p1, t)  # noqa: E731
    z2 = lambda t: zeta(p2, t)  # noqa: E731
    first = (z1(t1 + tau) - z1(t1 + tau + dtau)) * (-z2(t2 + tau) + z2(t2 + tau + 2 * dtau))
    second = (z2(t1) - z2(t1 + dtau)) * (-z1(t2 + tau) + z1(t2 + tau + 2 * dtau))
    return first, second


def closed_form_amplitude(t0, tau, dtau, p1, p2, t2=None):
    first, second = closed_form_terms(t0, t0 if t2 is None else t2, tau, dtau, p1, p2)
    return first + second


def coincidence_eq4(t0, tau, dtau, p1, p2, separation=0.0):
    """``2^-11 |[z1(t0+tau) - z1(t0+tau+dtau)][-z2(t0+tau) + z2(t0+tau+2dtau)]
    + [z2(t0) - z2(t0+dtau)][-z1(t0+tau) + z1(t0+tau+2dtau)]|^2``.

    A density in 1/time^2 for unit-norm envelopes. Zero whenever dtau == 0.
    A non-zero ``separation`` delays the detector-2 brackets by that amount.
    """
    a = closed_form_amplitude(t0, tau, dtau, p1, p2, None if separation == 0.0 else t0 + separation)
    return CLOSED_FORM_PREFACTOR * (a.real * a.real + a.imag * a.imag)


def coincidence_eq4_distinguishable(t0, tau, dtau, p1, p2, separation=0.0):
    """The closed form with the two products added in probability, not amplitude.

    This is the coincidence density for photons that cannot interfere; the
    ratio to ``coincidence_eq4`` isolates the exchange fringe.
    """
    first, second = closed_form_terms(t0, t0 + separation, tau, dtau, p1, p2)
    return CLOSED_FORM_PREFACTOR * (abs(first) ** 2 + abs(second) ** 2)


def closed_form_peak_scale(p1, p2):
    """Upper bound of the closed form: every bracket is at most 2 max|zeta|."""
    m1 = (math.pi * p1.width ** 2) ** -0.25
    m2 = (math.pi * p2.width ** 2) ** -0.25
    return CLOSED_FORM_PREFACTOR * (2 * (2 * m1) * (2 * m2)) ** 2


# -- general history sum --------------------------------------------------

class HistoryTable:
    """Memoised ``enumerate_histories`` for one device and pass budget."""

    def __init__(self, spec, max_passes):
        self.spec = spec
        self.max_passes = max_passes
        self._cache = {}

    def __call__(self, source, detector):
        key = (source, detector)
        if key not in self._cache:
            self._cache[key] = enumerate_histories(self.spec, source, detector, self.max_passes)
        return self._cache[key]

    def field(self, source, params, detector, t):
        return single_photon_field(self(source, detector), params, t)


def _check_sources(spec, sources):
    if len(sources) != 2:
        raise ParameterError("exactly two (port, WavepacketParams) sources are required")
    (port1, p1), (port2, p2) = sources
    if port1 == port2:
        raise ParameterError(f"the two photons must enter through distinct ports, both use {port1!r}")
    for port, p in sources:
        if port not in spec.inputs:
            raise ParameterError(f"{port!r} is not an input port of device {spec.name!r}")
        if not isinstance(p, WavepacketParams):
            raise ParameterError("source modes must be WavepacketParams")


def coincidence_amplitude(spec, sources, events, max_passes, table=None):
    """Two-photon amplitude: both photon-to-event assignments, summed."""
    _check_sources(spec, sources)
    if len(events) != 2:
        raise ParameterError("exactly two DetectionEvents are required")
    for ev in events:
        if ev.detector not in spec.detectors:
            raise ParameterError(f"{ev.detector!r} is not a detector of device {spec.name!r}")
    table = table or HistoryTable(spec, max_passes)
    (s1, p1), (s2, p2) = sources
    e1, e2 = events
    f1a = table.field(s1, p1, e1.detector, e1.time)
    f2b = table.field(s2, p2, e2.detector, e2.time)
    f1b = table.field(s1, p1, e2.detector, e2.time)
    f2a = table.field(s2, p2, e1.detector, e1.time)
    return f1a * f2b + f1b * f2a


def coincidence_general(spec, sources, events, max_passes, table=None):
    """``|amplitude|^2`` from the history sum; symmetric in the two events."""
    a = coincidence_amplitude(spec, sources, events, max_passes, table)
    return _clamp(a.real * a.real + a.imag * a.imag)


def _group_by_delay(histories):
    # histories with equal total delay add coherently into one delayed copy
    groups = {}
    for h in histories:
        key = round(h.total_delay, 9)
        d, w = groups.get(key, (h.total_delay, 0j))
        groups[key] = (d, w + h.weight)
    return sorted(groups.values(), key=lambda dw: dw[0])


def coincidence_distinguishable(spec, sources, events, max_passes, table=None):
    """``|f_1a f_2b|^2 + |f_1b f_2a|^2``: both assignments, without their cross term."""
    _check_sources(spec, sources)
    table = table or HistoryTable(spec, max_passes)
    (s1, p1), (s2, p2) = sources
    e1, e2 = events
    direct = table.field(s1, p1, e1.detector, e1.time) * table.field(s2, p2, e2.detector, e2.time)
    swapped = table.field(s1, p1, e2.detector, e2.time) * table.field(s2, p2, e1.detector, e1.time)
    return abs(direct) ** 2 + abs(swapped) ** 2


def single_photon_exit_probability(spec, source, params, max_passes):
    """Total probability that one photon leaves through any detector.

    Interference between histories that reach the same detector is kept:
    ``sum_D sum_{h,h'} conj(w_h) w_h' <zeta|zeta shifted by d_h' - d_h>``.
    Pairs whose +/-8 width windows do not intersect are skipped; their
    overlap is below ``exp(-64)``.
    """
    table = HistoryTable(spec, max_passes)
    reach = 2 * WINDOW_SIGMAS * params.width
    overlaps = {}
    total = 0.0
    for det in spec.detectors:
        groups = _group_by_delay(table(source, det))
        for i, (d1, w1) in enumerate(groups):
            total += abs(w1) ** 2
            for d2, w2 in groups[i + 1:]:
                gap = d2 - d1
                if gap > reach:
                    break
                key = round(gap, 9)
                if key not in overlaps:
                    overlaps[key] = overlap(params, params, gap)
                total += 2 * (np.conj(w1) * w2 * overlaps[key]).real
    return float(total)


def coincidence_history_pairs(spec, sources, events, max_passes):
    """Pairs of non-vanishing history classes that reach the two events.

    Returns ``[(assignment, class_1, class_2)]`` where ``assignment`` is
    ``"direct"`` (photon 1 to the first event) or ``"exchanged"``. A class
    reaches an event when one of its surviving members puts the photon's
    envelope centre within 8 widths of the event time.
    """
    _check_sources(spec, sources)
    (s1, p1), (s2, p2) = sources
    e1, e2 = events
    table = HistoryTable(spec, max_passes)

    def reaching(src, p, ev):
        out = []
        for cls in group_histories(table(src, ev.detector)):
            if cls.vanishes:
                continue
            for h in cls.members:
                if abs(cls.coefficients[h.shifter_count]) < 1e-15:
                    continue
                if abs(ev.time - h.total_delay - p.center_time) <= WINDOW_SIGMAS * p.width:
                    out.append(cls)
                    break
        return out

    pairs = []
    for label, (a, pa), (b, pb) in (("direct", (s1, p1), (s2, p2)), ("exchanged", (s2, p2), (s1, p1))):
        for ca in reaching(a, pa, e1):
            for cb in reaching(b, pb, e2):
                pairs.append((label, ca, cb))
    return pairs


def integrated_coincidence(spec, sources, detectors, max_passes):
    """Coincidence probability integrated over both detection times.

    With ``f_sd`` the field of photon ``s`` at detector ``d``, the integral of
    ``|f_1a f_2b + f_2a f_1b|^2`` is ``<f1a|f1a><f2b|f2b> + <f2a|f2a><f1b|f1b>
    + 2 Re(<f1a|f2a><f2b|f1b>)``; each bracket is a double sum of history
    weights times mode overlaps.
    """
    _check_sources(spec, sources)
    (s1, p1), (s2, p2) = sources
    det_a, det_b = detectors
    table = HistoryTable(spec, max_passes)

    def inner(src_x, px, src_y, py, det):
        total = 0j
        for hx in table(src_x, det):
            for hy in table(src_y, det):
                shift = hy.total_delay - hx.total_delay
                total += np.conj(hx.weight) * hy.weight * overlap(px, py, shift)
        return total

    aa = inner(s1, p1, s1, p1, det_a).real * inner(s2, p2, s2, p2, det_b).real
    bb = inner(s2, p2, s2, p2, det_a).real * inner(s1, p1, s1, p1, det_b).real
    cross = inner(s1, p1, s2, p2, det_a) * inner(s2, p2, s1, p1, det_b)
    return _clamp(aa + bb + 2 * cross.real)


# -- Hong-Ou-Mandel baseline ------------------------------------------------

def hom_coincidence(p1, p2, tau):
    """Coincidence probability behind a 50:50 splitter: (1 - |overlap|^2) / 2."""
    o = overlap(p1, p2, tau)
    value = 0.5 * (1.0 - (o.real * o.real + o.imag * o.imag))
    return min(max(value, 0.0), 0.5)


# -- entanglement witness ---------------------------------------------------

def joint_amplitude_matrix(spec, sources, detectors, times_a, times_b, max_passes):
    """``M[i, j]`` = two-photon amplitude for detections at
    ``(times_a[i] on detectors[0], times_b[j] on detectors[1])``.
    """
    _check_sources(spec, sources)
    times_a = np.asarray(times_a, dtype=float)
    times_b = np.asarray(times_b, dtype=float)
    if times_a.ndim != 1 or times_b.ndim != 1 or len(times_a) < 2 or len(times_b) < 2:
        raise ParameterError("time grids must be 1-d with at least 2 points")
    det_a, det_b = detectors
    for d in detectors:
        if d not in spec.detectors:
            raise ParameterError(f"{d!r} is not a detector of device {spec.name!r}")
    table = HistoryTable(spec, max_passes)
    (s1, p1), (s2, p2) = sources
    f1a = table.field(s1, p1, det_a, times_a)
    f2b = table.field(s2, p2, det_b, times_b)
    f1b = table.field(s1, p1, det_b, times_b)
    f2a = table.field(s2, p2, det_a, times_a)
    return np.outer(f1a, f2b) + np.outer(f2a, f1b)


def schmidt_number(m):
    """``(sum l)^2 / sum l^2`` over squared singular values ``l``; 1 iff rank one."""
    m = np.asarray(m, dtype=complex)
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        raise DegenerateInputError("Schmidt number of a zero (or non-finite) matrix is undefined")
    s = np.linalg.svd(m / scale, compute_uv=False)
    lam = s * s
    lam = lam / lam.sum()
    return float(1.0 / np.sum(lam * lam))


def delay_from_phase(phase, carrier_freq):
    """Convert a phase-shifter setting to a delay, using ``delay = phase / omega``.

    Only meaningful for a single well-defined carrier; other conventions exist.
    """
    if carrier_freq == 0:
        raise ParameterError("phase-to-delay conversion needs a non-zero carrier frequency")
    return phase / carrier_freq


# -- scans ----------------------------------------------------------------------

SCAN_AXES = ("tau", "dtau", "t0", "detuning", "separation")
ENGINES = ("closed_form", "history_sum")


@dataclass(frozen=True)
class ScanAxis:
    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.name not in SCAN_AXES:
            raise ParameterError(f"unknown scan axis {self.name!r}; valid axes: {', '.join(SCAN_AXES)}")
        if isinstance(self.steps, bool) or not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise ParameterError(f"axis {self.name!r}: steps must be an integer >= 1, got {self.steps!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ParameterError(f"axis {self.name!r}: start and stop must be finite")

    def values(self):
        return np.linspace(self.start, self.stop, self.steps)


@dataclass
class ScanResult:
    """Probabilities on a row-major grid; the last axis varies fastest."""

    axes: tuple
    grid: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(self.axes)
        self.grid = np.asarray(self.grid, dtype=float)
        expected = int(np.prod([a.steps for a in self.axes])) if self.axes else 0
        if self.grid.ndim != 1 or self.grid.size != expected:
            raise ParameterError(f"grid has {self.grid.size} entries, axes need {expected}")
        if self.grid.size and np.nanmin(self.grid) < -NEGATIVE_TOL:
            raise ParameterError("scan grid contains negative probabilities")

    @property
    def shape(self):
        return tuple(a.steps for a in self.axes)

    def points(self):
        """Axis coordinates of every grid entry, row-major, as an (N, n_axes) array."""
        if not self.axes:
            return np.zeros((0, 0))
        mesh = np.meshgrid(*[a.values() for a in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def as_array(self):
        return self.grid.reshape(self.shape)


def _detuned(p1, p2, detuning):
    # symmetric detuning about the mean carrier: omega_1 - omega_2 = detuning
    mean = 0.5 * (p1.carrier_freq + p2.carrier_freq)
    return (p1.replace(carrier_freq=mean + 0.5 * detuning),
            p2.replace(carrier_freq=mean - 0.5 * detuning))


class _PointEvaluator:
    """Evaluates one grid point; caches devices and history tables by delay."""

    def __init__(self, engine, device, p1, p2, fixed, max_passes, quantity="probability"):
        self.quantity = quantity
        self.engine = engine
        self.device = device
        self.p1, self.p2 = p1, p2
        self.fixed = fixed
        self.max_passes = max_passes
        self._tables = {}

    def _table(self, params):
        key = (params.input_delay, params.shifter_delay)
        if key not in self._tables:
            from .device import build_fig1_device
            spec = build_fig1_device(params)
            self._tables[key] = (spec, HistoryTable(spec, self.max_passes))
        return self._tables[key]

    def __call__(self, values):
        v = dict(self.fixed)
        v.update(values)
        p1, p2 = self.p1, self.p2
        if "detuning" in values:
            p1, p2 = _detuned(p1, p2, v["detuning"])
        distinct = self.quantity == "distinguishable"
        if self.engine == "closed_form":
            fn = coincidence_eq4_distinguishable if distinct else coincidence_eq4
            return fn(v["t0"], v["tau"], v["dtau"], p1, p2, v["separation"])
        fn = coincidence_distinguishable if distinct else coincidence_general
        if self.device is None:
            params = self.fixed_params.replace(input_delay=v["tau"], shifter_delay=v["dtau"])
            spec, table = self._table(params)
            from .device import fig1_detection_times
            ta, tb = fig1_detection_times(params, v["t0"], spec)
            events = (DetectionEvent("det1", ta), DetectionEvent("det2", tb + v["separation"]))
            return fn(spec, (("in1", p1), ("in2", p2)), events, self.max_passes, table)
        spec = self.device
        table = self._tables.setdefault("custom", HistoryTable(spec, self.max_passes))
        p2 = p2.replace(center_time=p2.center_time + v["tau"])
        events = (DetectionEvent(spec.detectors[0], v["t0"]),
                  DetectionEvent(spec.detectors[1], v["t0"] + v["separation"]))
        return fn(spec, ((spec.inputs[0], p1), (spec.inputs[1], p2)), events, self.max_passes, table)


QUANTITIES = ("probability", "distinguishable")


def beat_scan(axes, p1, p2, params=None, engine="closed_form", device=None, t0=0.0,
              separation=0.0, max_passes=2, threads=1, quantity="probability"):
    """Coincidence density over a grid of scan axes.

    ``axes`` is a sequence of ScanAxis (or ``(name, start, stop, steps)``)
    drawn from ``tau``, ``dtau``, ``t0``, ``detuning`` and ``separation``.
    Quantities without an axis take their value from ``params`` (a
    Fig1Params), ``t0`` and ``separation``. A detuning axis sets the two
    carriers to the mean carrier plus and minus half the detuning.

    ``engine="history_sum"`` runs the history sum on the feedback preset,
    with detection times derived from its delays. Passing ``device`` runs
    it on that device instead: photon 2 is delayed by ``tau`` and the
    detectors fire at ``t0`` and ``t0 + separation``.

    ``quantity="distinguishable"`` drops the exchange cross term, giving the
    reference against which ``exchange_fringe`` measures the beat.

    Grid points are independent; ``threads > 1`` evaluates them on a thread
    pool and writes each into its own slot, so the output does not depend on
    scheduling. ``threads=0`` picks the CPU count.
    """
    from .device import Fig1Params

    if engine not in ENGINES:
        raise ParameterError(f"unknown engine {engine!r}; valid engines: {', '.join(ENGINES)}")
    if quantity not in QUANTITIES:
        raise ParameterError(f"unknown quantity {quantity!r}; valid: {', '.join(QUANTITIES)}")
    axes = tuple(a if isinstance(a, ScanAxis) else ScanAxis(*a) for a in axes)
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise ParameterError(f"scan axes repeat a name: {names}")
    if device is not None:
        if engine == "closed_form":
            raise ParameterError("the closed form only describes the feedback preset; use history_sum")
        if "dtau" in names:
            raise ParameterError("a dtau axis needs the feedback preset")
    params = params or Fig1Params()
    fixed = {"tau": params.input_delay, "dtau": params.shifter_delay, "t0": float(t0),
             "detuning": p1.carrier_freq - p2.carrier_freq, "separation": float(separation)}

    evaluator = _PointEvaluator(engine, device, p1, p2, fixed, max_passes, quantity)
    evaluator.fixed_params = params
    coords = ScanResult(axes, np.zeros(int(np.prod([a.steps for a in axes])))).points()
    grid = np.empty(len(coords))

    def run(rows):
        for k in rows:
            grid[k] = evaluator({n: float(x) for n, x in zip(names, coords[k])})

    if threads == 0:
        threads = os.cpu_count() or 1
    if threads < 0:
        raise ParameterError(f"threads must be >= 0, got {threads}")
    if engine == "history_sum" and device is None:
        # warm the per-delay caches serially so workers only read them
        for k in range(len(coords)):
            v = dict(fixed)
            v.update({n: float(x) for n, x in zip(names, coords[k])})
            evaluator._table(params.replace(input_delay=v["tau"], shifter_delay=v["dtau"]))
    if threads <= 1 or len(coords) < 2:
        run(range(len(coords)))
    else:
        chunks = np.array_split(np.arange(len(coords)), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(run, c) for c in chunks if len(c)]:
                fut.result()

    meta = {
        "engine": engine,
        "quantity": quantity,
        "device": device.name if device is not None else "fig1",
        "device_params": {"input_delay": params.input_delay, "shifter_delay": params.shifter_delay,
                          "loop_delay": params.loop_delay,
                          "mirror_reflectivity": [complex(params.mirror_reflectivity).real,
                                                  complex(params.mirror_reflectivity).imag]},
        "sources": [_wavepacket_meta(p1), _wavepacket_meta(p2)],
        "fixed": fixed,
        "max_passes": max_passes,
        "axes": [{"name": a.name, "start": a.start, "stop": a.stop, "steps": a.steps} for a in axes],
    }
    return ScanResult(axes, grid, meta)


def _wavepacket_meta(p):
    return {"center_time": p.center_time, "width": p.width,
            "carrier_freq": p.carrier_freq, "phase_offset": p.phase_offset}


def ratio_diagnostics(a, b, floor=1e-20):
    """Mean and coefficient of variation of ``a / b`` where both exceed ``floor``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mask = (a > floor) & (b > floor)
    if not mask.any():
        return {"points": 0, "mean": float("nan"), "cv": float("nan")}
    r = a[mask] / b[mask]
    return {"points": int(mask.sum()), "mean": float(r.mean()), "cv": float(r.std() / abs(r.mean()))}


def exchange_fringe(probability, distinguishable, floor=1e-300):
    """``P / P_dist - 1``: the part of the signal due to exchange interference.

    Lies in [-1, 1]. Points where the reference is below ``floor`` are 0.
    """
    p = np.asarray(getattr(probability, "grid", probability), dtype=float)
    q = np.asarray(getattr(distinguishable, "grid", distinguishable), dtype=float)
    out = np.zeros_like(p)
    ok = q > floor
    out[ok] = p[ok] / q[ok] - 1.0
    return out


def dominant_frequency(samples, spacing):
    """Frequency (cycles per unit) of the largest non-DC FFT component, and the bin width."""
    x = np.asarray(samples, dtype=float)
    if x.size < 4:
        raise ParameterError("need at least 4 samples for a spectrum")
    spec = np.abs(np.fft.rfft(x - x.mean()))
    freqs = np.fft.rfftfreq(x.size, d=spacing)
    k = 1 + int(np.argmax(spec[1:]))
    return float(freqs[k]), float(freqs[1] - freqs[0])


def fig1_time_grids(params, n, half_width, t0=0.0, spec=None):
    """Uniform detection-time grids around both gates of the feedback preset.

    ``n`` points spanning ``+/- half_width`` about the detector-1 and
    detector-2 times that ``fig1_detection_times`` assigns to ``t0``.
    """
    from .device import fig1_detection_times

    if n < 2:
        raise ParameterError(f"time grids need n >= 2, got {n}")
    ta, tb = fig1_detection_times(params, t0, spec)
    offsets = np.linspace(-half_width, half_width, n)
    return ta + offsets, tb + offsets
