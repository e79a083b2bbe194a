"""Working-memory budget and execution-time law of the MLP pipeline.

Two questions are answered here: does a given architecture fit in a small
SRAM, and how does the cost of each pipeline stage scale with the hidden
width. The latter is measured on the host (median of repeated trials around
each stage call) and summarised by an ordinary least-squares line.
"""

import csv
import gc
import io
import math
import random
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .data import read_fixture_text, rows_to_csv
from .errors import ConfigError, FitError, IntegrityError, ParseError
from .mlp import (
    em,
    ffm,
    forward,
    hidden_delta,
    init_weights,
    output_delta,
    update_layer,
)

BYTES_PER_ELEMENT = 4
SRAM_BUDGET = 8192
MODULES = ("FFM-1", "FFM-2", "EM", "BPM-1", "BPM-2")
TIMING_HEADER = ("module", "h1", "duration_ms", "trials")

# Published predictive coefficients (ms): slope per neuron, offset.
PUBLISHED_FITS = {
    "FFM-1": (11.6, 20.52),
    "FFM-2": (1.22, 2.49),
    "BPM-1": (1.41, 2.72),
    "BPM-2": (6.03, 10.94),
}


@dataclass(frozen=True)
class MemoryEstimate:
    parts: dict
    budget: int = SRAM_BUDGET

    @property
    def total(self):
        return sum(self.parts.values())

    @property
    def fits(self):
        return self.total <= self.budget

    def report(self):
        lines = [f"{name:<12} {nbytes:>8d} B" for name, nbytes in self.parts.items()]
        lines.append(f"{'total':<12} {self.total:>8d} B  (budget {self.budget} B, "
                     f"{'fits' if self.fits else 'DOES NOT FIT'})")
        return "\n".join(lines)


@dataclass(frozen=True)
class TimingSample:
    module: str
    h1: int
    duration_ms: float
    trials: int = 1

    def __post_init__(self):
        if not self.duration_ms > 0:
            raise ValueError(f"duration must be > 0, got {self.duration_ms}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    residual_std: float = 0.0
    n_points: int = 0


def estimate_sram(widths, batch=1, budget=SRAM_BUDGET):
    """Count the float32 buffers a training step keeps resident.

    Weight and momentum matrices, every layer activation at batch width (the
    ones fed forward carry the extra bias row), desired outputs, output error
    and one local-gradient buffer per layer. Stack, scalars and code are not
    counted, so this is a lower bound.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(w < 1 for w in widths) or batch < 1:
        raise ConfigError(f"invalid architecture {widths} / batch {batch}")
    n_layers = len(widths) - 1
    parts = {}
    for k in range(1, n_layers + 1):
        parts[f"W{k}"] = widths[k] * (widths[k - 1] + 1)
    for k in range(1, n_layers + 1):
        parts[f"dW{k}"] = widths[k] * (widths[k - 1] + 1)
    for k in range(n_layers):
        parts[f"Y{k}"] = (widths[k] + 1) * batch
    parts[f"Y{n_layers}"] = widths[-1] * batch
    parts["D"] = widths[-1] * batch
    parts["E"] = widths[-1] * batch
    for k in range(1, n_layers + 1):
        parts[f"g{k}"] = widths[k] * batch
    return MemoryEstimate({k: v * BYTES_PER_ELEMENT for k, v in parts.items()}, budget)


def _stage_callable(module, h1, seed=0):
    """Zero-argument callable running one pipeline stage of the XOR-shaped net."""
    net = init_weights((2, h1, 1), seed)
    y0 = np.array([[0, 0, 1, 1], [0, 1, 0, 1]], dtype=np.float32)
    d = np.array([[0, 1, 1, 0]], dtype=np.float32)
    y0, y1, y2 = forward(net, y0)
    e = em(y2, d)
    g2 = output_delta(y2, e)
    w1, w2 = net.weights
    m1, m2 = net.momentum
    if module == "FFM-1":
        return lambda: ffm(w1, y0)
    if module == "FFM-2":
        return lambda: ffm(w2, y1)
    if module == "EM":
        return lambda: em(y2, d)
    if module == "BPM-1":
        # Output layer: local gradient and weight update.
        return lambda: update_layer(w2, m2, output_delta(y2, e), y1, 0.9, 0.8)
    if module == "BPM-2":
        return lambda: update_layer(w1, m1, hidden_delta(w2, g2, y1), y0, 0.9, 0.8)
    raise ConfigError(f"unknown module {module!r}; choose from {MODULES}")


def _calibrate(fn, min_trial_s, clock):
    number = 1
    while True:
        t0 = clock()
        for _ in range(number):
            fn()
        if clock() - t0 >= min_trial_s or number >= 1 << 20:
            return number
        number *= 2


def _trial(fn, number, clock):
    t0 = clock()
    for _ in range(number):
        fn()
    return (clock() - t0) / number


def time_call(fn, reps=31, warmup=3, min_trial_s=2e-3, clock=time.perf_counter):
    """Median wall time of one ``fn()`` call in milliseconds.

    Each trial loops ``fn`` enough times to last ``min_trial_s`` so the clock
    resolution does not dominate sub-microsecond stages.
    """
    for _ in range(warmup):
        fn()
    number = _calibrate(fn, min_trial_s, clock)
    return statistics.median(_trial(fn, number, clock) for _ in range(reps)) * 1e3


def benchmark_sweep(module, h1_values, reps=61, warmup=3, min_trial_s=2e-3,
                    clock=time.perf_counter):
    """Median per-call duration of one stage for each hidden width.

    Trials are interleaved across widths, in a freshly shuffled order each
    round. Shared hosts switch between speed regimes lasting seconds, which
    scale every width in a round alike, so each trial is divided by its
    round's median before taking per-width medians, and the result is
    rescaled by the median round level.
    """
    if reps < 5:
        raise ConfigError(f"reps must be >= 5, got {reps}")
    if module not in MODULES:
        raise ConfigError(f"unknown module {module!r}; choose from {MODULES}")
    h1_values = [int(h) for h in h1_values]
    stages = [_stage_callable(module, h1) for h1 in h1_values]
    numbers = []
    for fn in stages:
        for _ in range(warmup):
            fn()
        numbers.append(_calibrate(fn, min_trial_s, clock))
    trials = [[] for _ in stages]
    order = list(range(len(stages)))
    rng = random.Random(0)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(reps):
            rng.shuffle(order)
            for i in order:
                trials[i].append(_trial(stages[i], numbers[i], clock))
    finally:
        if gc_was_enabled:
            gc.enable()
    levels = [statistics.median(r) for r in zip(*trials)]
    scale = statistics.median(levels)
    return [
        TimingSample(
            module, h1, statistics.median(x / lv for x, lv in zip(t, levels)) * scale * 1e3, reps
        )
        for h1, t in zip(h1_values, trials)
    ]


def fit_points(xs, ys):
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    if len(xs) != len(ys):
        raise FitError("x and y lengths differ")
    if len(set(xs)) < 3:
        raise FitError(f"need at least 3 distinct x values, got {len(set(xs))}")
    slope, intercept = statistics.linear_regression(xs, ys)
    residuals = [y - (slope * x + intercept) for x, y in zip(xs, ys)]
    ss_res = math.fsum(r * r for r in residuals)
    mean_y = statistics.fmean(ys)
    ss_tot = math.fsum((y - mean_y) ** 2 for y in ys)
    if ss_tot == 0.0:
        r_squared = 1.0
    else:
        r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    residual_std = math.sqrt(ss_res / (len(xs) - 2)) if len(xs) > 2 else 0.0
    return LinearFit(slope, intercept, r_squared, residual_std, len(xs))


def fit_linear(samples):
    """Least-squares duration ~ H1 line over timing samples."""
    return fit_points([s.h1 for s in samples], [s.duration_ms for s in samples])


def predict_time(fit, h):
    if h < 1:
        raise ValueError("H must be >= 1")
    return max(0.0, fit.slope * h + fit.intercept)


def standardized_coefficients(fit, xs):
    """Express a fit in the centred/scaled variable ``(H - mean) / std``.

    Returns ``(slope, offset)`` as a polynomial fitter with centring and
    scaling reports them (sample standard deviation).
    """
    xs = [float(x) for x in xs]
    mu, sd = statistics.fmean(xs), statistics.stdev(xs)
    return fit.slope * sd, fit.slope * mu + fit.intercept


def load_paper_timing_fixture():
    """Per-module stage durations measured on the 8-bit target (ms)."""
    text = read_fixture_text("paper_timing")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != ("h1",) + MODULES:
        raise IntegrityError(f"unexpected timing fixture header {reader.fieldnames}")
    samples = []
    for row in reader:
        for module in MODULES:
            samples.append(TimingSample(module, int(row["h1"]), float(row[module]), 1))
    return samples


def select(samples, module):
    return [s for s in samples if s.module == module]


def timing_csv(samples):
    rows = [(s.module, s.h1, float(s.duration_ms), s.trials) for s in samples]
    return rows_to_csv(TIMING_HEADER, rows)


def parse_timing_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != TIMING_HEADER:
        raise ParseError(f"expected header {','.join(TIMING_HEADER)}", line=1)
    samples = []
    for lineno, row in enumerate(reader, start=2):
        try:
            module, h1, duration, trials = row
            samples.append(TimingSample(module, int(h1), float(duration), int(trials)))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return samples


@dataclass(frozen=True)
class FitReportRow:
    module: str
    fit: LinearFit
    standardized: tuple
    published: tuple

    @property
    def discrepancy(self):
        """True when the published coefficients disagree with the raw-H refit."""
        if self.published is None:
            return False
        a, b = self.published
        return not (math.isclose(a, self.fit.slope, rel_tol=0.1, abs_tol=0.01)
                    and math.isclose(b, self.fit.intercept, rel_tol=0.1, abs_tol=0.05))

    @property
    def explained_by_scaling(self):
        """True when the published numbers match the centred/scaled refit."""
        if self.published is None:
            return False
        a, b = self.published
        sa, sb = self.standardized
        return math.isclose(a, sa, rel_tol=0.02, abs_tol=0.01) and math.isclose(
            b, sb, rel_tol=0.02, abs_tol=0.01
        )


def fit_report(samples, modules=MODULES, published=True):
    rows = []
    for module in modules:
        chosen = select(samples, module)
        if not chosen:
            continue
        fit = fit_linear(chosen)
        std = standardized_coefficients(fit, [s.h1 for s in chosen])
        ref = PUBLISHED_FITS.get(module) if published else None
        rows.append(FitReportRow(module, fit, std, ref))
    return rows


def format_fit_report(rows):
    out = [
        "module,slope_ms_per_neuron,intercept_ms,r_squared,"
        "scaled_slope,scaled_offset,published_slope,published_offset,flag"
    ]
    notes = []
    for r in rows:
        pub = ("", "") if r.published is None else r.published
        if r.discrepancy:
            flag = "MISMATCH"
            a, b = r.published
            note = (f"{r.module}: published t = {a} * H + {b} disagrees with the refit "
                    f"t = {r.fit.slope:.4f} * H + {r.fit.intercept:.4f}")
            if r.explained_by_scaling:
                note += (f"; it matches the refit in the centred/scaled variable "
                         f"(H - mean)/std ({r.standardized[0]:.2f}, {r.standardized[1]:.2f})")
            notes.append(note)
        else:
            flag = "ok" if r.published is not None else ""
        out.append(
            f"{r.module},{r.fit.slope:.6g},{r.fit.intercept:.6g},{r.fit.r_squared:.6f},"
            f"{r.standardized[0]:.6g},{r.standardized[1]:.6g},{pub[0]},{pub[1]},{flag}"
        )
    return "\n".join(out) + "\n", notes
