"""Experiment orchestration: N-sample runs, reports, corpus checking.

A Monte Carlo experiment runs one kernel program ``n_samples`` times;
sample ``k`` always executes with the random stream derived from
``(root_seed, k)``.  Samples are embarrassingly parallel: they are chunked
over a fork-based worker pool and reassembled in sample order, so the
report payload is a pure function of the experiment spec regardless of
``jobs`` (which is therefore excluded from the spec echo).

Reports serialize floats with shortest round-trip decimals, so byte
comparison of payloads is bit comparison of results; the wall-time field
lives outside the payload.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import corpus as corpus_mod
from . import stats as stats_mod
from .cestac import StochasticTriple, cestac_digits
from .dsl import CompiledProgram, check, evaluate, parse
from .mca import BackendConfig, MODE_CESTAC, exceptions_dict
from .rng import RngStream

_MIN_SAMPLES_FOR_POOL = 8


@dataclass
class ExperimentSpec:
    program: str  # path to a kernel source file, or "corpus:<case-name>"
    backend: BackendConfig = field(default_factory=BackendConfig)
    n_samples: int = 100
    root_seed: int = 1
    jobs: int = 1
    trace: bool = False
    fmt: str = "json"
    out_path: str | None = None
    include_values: bool = True

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.fmt not in ("json", "csv"):
            raise ValueError("format must be json or csv")

    def echo(self) -> dict:
        # jobs and output destination do not influence results
        return {
            "program": self.program,
            "backend": {
                "kind": self.backend.kind,
                "t": self.backend.t,
                "beta": self.backend.beta,
                "carrier": self.backend.carrier,
                "zero_xi": self.backend.zero_xi,
            },
            "n_samples": self.n_samples,
            "root_seed": self.root_seed,
            "trace": self.trace,
        }


@dataclass
class Report:
    spec: dict
    outputs: list  # per-output dicts in declaration order
    exceptions: dict
    wall_time_s: float
    evolution: list | None = None

    def payload(self) -> dict:
        doc = {"spec": self.spec, "outputs": self.outputs,
               "exceptions": self.exceptions}
        if self.evolution is not None:
            doc["evolution"] = self.evolution
        return doc

    def payload_bytes(self) -> bytes:
        return json.dumps(self.payload(), sort_keys=True).encode()

    def document(self) -> dict:
        doc = self.payload()
        doc["wall_time_s"] = self.wall_time_s
        return doc

    def output(self, name: str) -> dict:
        for o in self.outputs:
            if o["name"] == name:
                return o
        raise KeyError(f"no output named {name!r}")

    def stats(self, name: str) -> stats_mod.SampleStats:
        o = self.output(name)
        return stats_mod.SampleStats(
            n=o["n"], mean=o["mean"], std=o["std"], s2=o["s2"],
            s10=o["s10"], nan_count=o["nan_count"], exact=o["exact"],
            valid=o["valid"])


def _resolve_program(spec: ExperimentSpec, source, inputs, case):
    if case is not None:
        return case.source, dict(case.inputs), case
    if source is not None:
        return source, dict(inputs or {}), None
    if spec.program.startswith("corpus:"):
        case = corpus_mod.resolve(spec.program.split(":", 1)[1])
        return case.source, dict(case.inputs), case
    with open(spec.program, "r", encoding="utf-8") as fh:
        return fh.read(), dict(inputs or {}), None


def _pool_worker(args):
    (source, name, carrier, backend, inputs, root_seed, k0, k1, trace) = args
    compiled = CompiledProgram(check(parse(source, name)), carrier)
    outs, exc, points = compiled.run_range(backend, inputs, root_seed,
                                           k0, k1, trace)
    return k0, outs, exc, points


def _chunks(n: int, jobs: int):
    per = (n + jobs - 1) // jobs
    return [(k, min(k + per, n)) for k in range(0, n, per)]


def _summarize_column(values: np.ndarray) -> dict:
    if values.shape[0] >= 2:
        st = stats_mod.summarize(values)
    else:
        v = float(values[0])
        nan = int(math.isnan(v))
        st = stats_mod.SampleStats(
            n=1, mean=v, std=0.0,
            s2=stats_mod.CLAMP_BASE2, s10=stats_mod.CLAMP_BASE10,
            nan_count=nan, exact=True, valid=not nan)
    return {
        "n": st.n, "mean": st.mean, "std": st.std, "s2": st.s2,
        "s10": st.s10, "nan_count": st.nan_count, "exact": st.exact,
        "valid": st.valid,
    }


def run_experiment(spec: ExperimentSpec, source: str | None = None,
                   inputs: dict | None = None,
                   case: corpus_mod.CaseSpec | None = None) -> Report:
    """Run the experiment and aggregate per-output sample statistics.

    ``source``/``inputs`` (or a corpus ``case``) may be passed directly by
    library callers; otherwise ``spec.program`` is resolved.
    """
    t0 = time.perf_counter()
    source, inputs, _ = _resolve_program(spec, source, inputs, case)
    checked = check(parse(source, spec.program))
    backend = spec.backend

    if backend.mode == MODE_CESTAC:
        return _run_cestac(spec, checked, inputs, t0)

    compiled = CompiledProgram(checked, backend.carrier)
    n = spec.n_samples
    trace_points = []
    if spec.jobs > 1 and n >= _MIN_SAMPLES_FOR_POOL:
        parts = _chunks(n, spec.jobs)
        args = [(source, spec.program, backend.carrier, backend, inputs,
                 spec.root_seed, k0, k1, spec.trace) for k0, k1 in parts]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=min(spec.jobs, len(parts))) as pool:
            results = pool.map(_pool_worker, args)
        results.sort(key=lambda r: r[0])
        outs = np.vstack([r[1] for r in results])
        exc = np.sum([r[2] for r in results], axis=0)
        if spec.trace:
            for r in results:
                trace_points.extend(r[3])
    else:
        outs, exc, points = compiled.run_range(backend, inputs,
                                               spec.root_seed, 0, n,
                                               spec.trace)
        if spec.trace and points:
            trace_points = points

    out_docs = []
    for j, name in enumerate(compiled.obj.out_names):
        col = outs[:, j]
        doc = {"name": name}
        doc.update(_summarize_column(col))
        if spec.include_values:
            doc["values"] = [float(v) for v in col]
        out_docs.append(doc)

    evolution = None
    if spec.trace:
        matrix = {}
        for sample_id, tp in trace_points:
            matrix.setdefault(sample_id, []).append(
                (tp.label, tp.iteration, tp.value))
        if matrix:
            evolution = [
                {"label": lbl, "iteration": int(it), "s2": bits}
                for lbl, it, bits in stats_mod.digits_evolution(matrix)
            ]

    return Report(
        spec=spec.echo(),
        outputs=out_docs,
        exceptions=exceptions_dict(exc),
        wall_time_s=time.perf_counter() - t0,
        evolution=evolution,
    )


def _run_cestac(spec: ExperimentSpec, checked, inputs, t0) -> Report:
    """One synchronous triple per sample seed; n_samples independent runs."""
    from .mca import exceptions_array

    per_output = {name: [] for name in checked.outputs}
    exc_total = exceptions_array()
    evolution = None
    for k in range(spec.n_samples):
        stream = RngStream(spec.root_seed, k)
        result = evaluate(checked, spec.backend, inputs, stream,
                          trace=spec.trace)
        exc_total += result.exceptions
        for name in checked.outputs:
            per_output[name].append(result.outputs[name])
        if spec.trace and k == 0:
            evolution = [
                {"label": tp.label, "iteration": int(tp.iteration),
                 "digits": cestac_digits(tp.value).digits}
                for tp in result.trace
                if isinstance(tp.value, StochasticTriple)
            ]

    out_docs = []
    for name in checked.outputs:
        triples = per_output[name]
        means = np.array([t.mean() for t in triples])
        doc = {"name": name}
        doc.update(_summarize_column(means))
        doc["cestac"] = [
            {
                "components": [float(x) for x in t.v],
                "digits": cestac_digits(t).digits,
                "is_noise": cestac_digits(t).is_noise,
                "has_nan": t.has_nan(),
            }
            for t in triples
        ]
        if spec.include_values:
            doc["values"] = [float(v) for v in means]
        out_docs.append(doc)

    return Report(
        spec=spec.echo(),
        outputs=out_docs,
        exceptions=exceptions_dict(exc_total),
        wall_time_s=time.perf_counter() - t0,
        evolution=evolution,
    )


def emit_report(report: Report, fmt: str, path: str) -> None:
    """Write a report as json (one object) or csv (one row per sample)."""
    if not report.outputs:
        raise ValueError("refusing to emit a report with no outputs")
    try:
        if fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(report.document(), fh, sort_keys=True, indent=1)
                fh.write("\n")
        elif fmt == "csv":
            lines = ["output,sample,value,digits,is_noise"]
            for o in report.outputs:
                values = o.get("values")
                if values is None:
                    raise ValueError(
                        "csv output needs per-sample values; "
                        "rerun with include_values")
                cs = o.get("cestac")
                for k, v in enumerate(values):
                    if cs is not None:
                        lines.append(f"{o['name']},{k},{v!r},"
                                     f"{cs[k]['digits']!r},"
                                     f"{int(cs[k]['is_noise'])}")
                    else:
                        lines.append(f"{o['name']},{k},{v!r},,")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write("\n".join(lines) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as e:
        raise RuntimeError(f"cannot write report to {path}: {e}") from e
