"""Corpus manifest runner: execute cases, evaluate acceptance predicates.

A manifest is a JSON list of entries.  A standard entry names a corpus
case, a backend, a sample count and a seed, plus a list of checks; two
special runners exist for the size sweep (slope of the log-log error
growth) and the improbability series (lag-1 autocorrelation structure).
The packaged ``data/default_manifest.json`` encodes the expected bounds
for every corpus case; ``run_corpus`` returns per-entry pass/fail results
and the CLI maps them to exit codes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import corpus as corpus_mod
from . import stats as stats_mod
from .dsl import CompiledProgram, check as dsl_check, parse
from .harness import ExperimentSpec, Report, run_experiment
from .mca import BackendConfig


def _backend_of(doc: dict) -> BackendConfig:
    return BackendConfig(
        kind=doc.get("kind", "ieee"),
        t=doc.get("t", 53),
        beta=doc.get("beta", 10),
        carrier=doc.get("carrier", "binary64"),
        zero_xi=doc.get("zero_xi", False),
    )


def _cache_key(entry: dict) -> str:
    relevant = {k: entry.get(k) for k in
                ("case", "params", "backend", "samples", "seed", "runner")}
    return json.dumps(relevant, sort_keys=True)


def run_entry_experiment(entry: dict, jobs: int = 1,
                         cache: dict | None = None):
    """Run (or fetch from cache) the experiment behind a manifest entry."""
    key = _cache_key(entry)
    if cache is not None and key in cache:
        return cache[key]
    case = corpus_mod.resolve(entry["case"], entry.get("params"))
    backend_doc = dict(entry.get("backend") or {})
    backend_doc.setdefault("carrier", case.carrier)
    spec = ExperimentSpec(
        program=f"corpus:{entry['case']}",
        backend=_backend_of(backend_doc),
        n_samples=int(entry.get("samples", 100)),
        root_seed=int(entry.get("seed", 1)),
        jobs=jobs,
        trace=bool(entry.get("trace", False)),
    )
    report = run_experiment(spec, case=case)
    result = (case, report)
    if cache is not None:
        cache[key] = result
    return result


def _lag1(seq: np.ndarray) -> float:
    a, b = seq[:-1], seq[1:]
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0  # constant series carries no lag structure
    return float(np.corrcoef(a, b)[0, 1])


def run_improbability(entry: dict, cache: dict | None = None) -> dict:
    """ieee series and per-point MCA means over the 300 perturbed inputs."""
    key = _cache_key(entry)
    if cache is not None and key in cache:
        return cache[key]
    params = dict(entry.get("params") or {})
    per_point = int(params.get("samples_per_point", 100))
    seed = int(entry.get("seed", 1))
    backend = _backend_of(dict(entry.get("backend")
                               or {"kind": "mca-rr", "t": 53}))
    case = corpus_mod.improbability_case()
    checked = dsl_check(parse(case.source, "improbability"))
    compiled = CompiledProgram(checked, backend.carrier)
    ieee = BackendConfig(kind="ieee", carrier=backend.carrier)

    ieee_seq = np.empty(corpus_mod.IMPROB_POINTS)
    mca_means = np.empty(corpus_mod.IMPROB_POINTS)
    for i in range(1, corpus_mod.IMPROB_POINTS + 1):
        inputs = corpus_mod.improbability_inputs(i)
        outs, _, _ = compiled.run_range(ieee, inputs, 1, 0, 1)
        ieee_seq[i - 1] = outs[0, 0]
        outs, _, _ = compiled.run_range(backend, inputs, seed + i,
                                        0, per_point)
        mca_means[i - 1] = outs[:, 0].mean()
    result = {
        "ieee_lag1": _lag1(ieee_seq),
        "mca_means_lag1": _lag1(mca_means),
        "ieee_distinct": int(np.unique(ieee_seq).shape[0]),
    }
    if cache is not None:
        cache[key] = result
    return result


def run_sweep(entry: dict, jobs: int = 1, cache: dict | None = None) -> dict:
    """Relative spread of a kahan variant across input sizes, plus slope."""
    key = _cache_key(entry)
    if cache is not None and key in cache:
        return cache[key]
    params = dict(entry.get("params") or {})
    variant = params.get("variant", "naive")
    sizes = params.get("sizes", [1000, 10000, 100000, 1000000])
    samples = int(entry.get("samples", 200))
    seed = int(entry.get("seed", 1))
    input_seed = int(params.get("input_seed", corpus_mod.KAHAN_INPUT_SEED))
    backend = _backend_of(dict(entry.get("backend")
                               or {"kind": "mca-rr", "t": 24,
                                   "carrier": "binary32"}))
    points = []
    for n in sizes:
        case = corpus_mod.kahan_sum_case(variant, n=int(n),
                                         input_seed=input_seed)
        spec = ExperimentSpec(program=f"corpus:kahan_{variant}",
                              backend=backend, n_samples=samples,
                              root_seed=seed, jobs=jobs,
                              include_values=False)
        report = run_experiment(spec, case=case)
        st = report.stats("sum")
        points.append((int(n), st.std / abs(st.mean)))
    result = {
        "points": points,
        "slope": stats_mod.error_scaling_fit(points),
    }
    if cache is not None:
        cache[key] = result
    return result


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    description: str
    ok: bool
    detail: str


@dataclass
class EntryResult:
    entry_id: str
    ok: bool
    checks: list = field(default_factory=list)
    error: str | None = None


@dataclass
class CorpusResult:
    entries: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)


def _sprime_of(report: Report, output: str, beta: int) -> float:
    st = report.stats(output)
    return st.s2 if beta == 2 else st.s10


def _check_experiment(check: dict, case, report: Report,
                      by_id: dict) -> CheckResult:
    kind = check["type"]
    if kind == "s_prime":
        beta = int(check.get("beta", 10))
        s = _sprime_of(report, check["output"], beta)
        lo = float(check.get("min", 0.0))
        hi = float(check.get("max", math.inf))
        return CheckResult(
            f"s' of {check['output']} in [{lo}, {hi}]",
            lo <= s <= hi, f"s'={s:.3f}")
    if kind == "s_prime_gap_vs":
        beta = int(check.get("beta", 10))
        s = _sprime_of(report, check["output"], beta)
        other = by_id[check["other"]]
        s_other = _sprime_of(other[1], check["output"], beta)
        gap = s - s_other
        return CheckResult(
            f"s' exceeds {check['other']} by >= {check['min_gap']}",
            gap >= float(check["min_gap"]),
            f"gap={gap:.3f} ({s:.3f} vs {s_other:.3f})")
    if kind == "mean_within":
        st = report.stats(check["output"])
        err = abs(st.mean - float(check["target"]))
        return CheckResult(
            f"mean of {check['output']} within {check['atol']} of "
            f"{check['target']}",
            err <= float(check["atol"]), f"|mean-target|={err:.3g}")
    if kind == "nan_count":
        st = report.stats(check["output"])
        return CheckResult(
            f"nan count of {check['output']} == {check['equals']}",
            st.nan_count == int(check["equals"]), f"nan={st.nan_count}")
    if kind == "rel_std_min":
        st = report.stats(check["output"])
        rel = math.inf if st.mean == 0.0 else st.std / abs(st.mean)
        return CheckResult(
            f"sigma/|mu| of {check['output']} >= {check['min']}",
            rel >= float(check["min"]), f"ratio={rel:.3f}")
    if kind == "value_equals_decimal":
        st = report.stats(check["output"])
        want = float(check["decimal"])
        return CheckResult(
            f"{check['output']} == nearest double of {check['decimal']}",
            st.mean == want, f"value={st.mean!r}")
    if kind == "value_prefix":
        st = report.stats(check["output"])
        got = repr(st.mean)
        return CheckResult(
            f"{check['output']} starts with {check['prefix']!r}",
            got.startswith(check["prefix"]), f"value={got}")
    if kind == "digits_vs_exact":
        st = report.stats(check["output"])
        exact = float(case.exact[check["output"]])
        d = stats_mod.sig_digits_vs_reference(
            st.mean, exact, int(check.get("beta", 10)))
        lo = float(check.get("min", 0.0))
        hi = float(check.get("max", math.inf))
        return CheckResult(
            f"digits of {check['output']} vs exact in [{lo}, {hi}]",
            lo <= d.s <= hi, f"digits={d.s:.3f}")
    if kind == "cestac_any_nan_or_noise":
        o = report.output(check["output"])
        runs = o["cestac"]
        hits = sum(1 for r in runs if r["has_nan"] or r["is_noise"])
        return CheckResult(
            f"some cestac run of {check['output']} has a NaN component "
            "or is noise",
            hits >= 1, f"{hits}/{len(runs)} runs")
    if kind == "cestac_digits_positive":
        o = report.output(check["output"])
        d = o["cestac"][0]["digits"]
        return CheckResult(
            f"cestac digits of {check['output']} > 0",
            d > 0.0 and not o["cestac"][0]["is_noise"], f"digits={d:.3f}")
    if kind == "cestac_digits_vs_exact_zero":
        o = report.output(check["output"])
        exact = float(case.exact[check["output"]])
        mean = sum(o["cestac"][0]["components"]) / 3.0
        d = stats_mod.sig_digits_vs_reference(mean, exact, 10)
        return CheckResult(
            f"true digits of the cestac {check['output']} == 0",
            d.s == 0.0, f"digits={d.s:.3f} (value={mean:.4g}, "
                        f"exact={exact:.4g})")
    raise KeyError(f"unknown check type {check['type']!r}")


def _check_special(check: dict, result: dict) -> CheckResult:
    kind = check["type"]
    if kind == "improbability_autocorr":
        r_ieee = result["ieee_lag1"]
        r_mca = result["mca_means_lag1"]
        ok = (abs(r_ieee) >= float(check["ieee_abs_min"])
              and abs(r_mca) < float(check["mca_abs_max"]))
        return CheckResult(
            "ieee series is lag-correlated, mca means are not",
            ok, f"|r_ieee|={abs(r_ieee):.3f}, |r_mca|={abs(r_mca):.3f}")
    if kind == "slope":
        s = result["slope"]
        lo, hi = float(check["min"]), float(check["max"])
        return CheckResult(
            f"log-log slope in [{lo}, {hi}]", lo <= s <= hi,
            f"slope={s:.3f}")
    raise KeyError(f"unknown check type {check['type']!r}")


_EXPERIMENT_CHECKS = {
    "s_prime", "s_prime_gap_vs", "mean_within", "nan_count", "rel_std_min",
    "value_equals_decimal", "value_prefix", "digits_vs_exact",
    "cestac_any_nan_or_noise", "cestac_digits_positive",
    "cestac_digits_vs_exact_zero",
}
_SPECIAL_CHECKS = {"improbability_autocorr", "slope"}
_RUNNERS = {"experiment", "improbability", "sweep"}


class ManifestError(Exception):
    """Structural manifest problem: unknown case, runner, or check type."""


def load_manifest(manifest) -> list:
    """Accept 'default', a path to a JSON file, or an already-loaded list."""
    if isinstance(manifest, list):
        doc = manifest
    elif manifest == "default":
        text = (resources.files("verif") / "data" /
                "default_manifest.json").read_text()
        doc = json.loads(text)
    else:
        try:
            with open(manifest, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ManifestError(f"cannot load manifest {manifest!r}: {e}")
    if not isinstance(doc, list):
        raise ManifestError("manifest must be a JSON list of entries")
    return doc


def validate_manifest(entries: list) -> None:
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ManifestError(f"entry {i} is not an object")
        runner = entry.get("runner", "experiment")
        if runner not in _RUNNERS:
            raise ManifestError(f"entry {i}: unknown runner {runner!r}")
        if runner == "experiment":
            case = entry.get("case")
            if case not in corpus_mod.case_names():
                raise ManifestError(f"entry {i}: unknown case {case!r}")
        allowed = _EXPERIMENT_CHECKS if runner == "experiment" \
            else _SPECIAL_CHECKS
        for c in entry.get("checks", []):
            if c.get("type") not in allowed:
                raise ManifestError(
                    f"entry {i}: unknown check type {c.get('type')!r}")


def run_corpus(manifest, jobs: int = 1, cache: dict | None = None,
               log=None) -> CorpusResult:
    """Run every manifest entry and evaluate its checks.

    Structural manifest problems raise ManifestError before anything runs;
    failed predicates only mark their entry as not ok.
    """
    entries = load_manifest(manifest)
    validate_manifest(entries)
    by_id: dict[str, tuple] = {}
    result = CorpusResult()
    for entry in entries:
        entry_id = entry.get("id") or entry.get("case", "?")
        runner = entry.get("runner", "experiment")
        checks = entry.get("checks", [])
        er = EntryResult(entry_id, ok=True)
        if runner == "experiment":
            case, report = run_entry_experiment(entry, jobs, cache)
            by_id[entry_id] = (case, report)
            for c in checks:
                er.checks.append(_check_experiment(c, case, report, by_id))
        elif runner == "improbability":
            special = run_improbability(entry, cache)
            for c in checks:
                er.checks.append(_check_special(c, special))
        else:
            special = run_sweep(entry, jobs, cache)
            for c in checks:
                er.checks.append(_check_special(c, special))
        er.ok = all(c.ok for c in er.checks)
        result.entries.append(er)
        if log:
            for c in er.checks:
                log(f"{'PASS' if c.ok else 'FAIL'} {entry_id}: "
                    f"{c.description} [{c.detail}]")
    return result
