"""Experiment runners behind the command line.

Each runner takes a completed configuration (see ``config``) and returns a
``RunResult``: output files as text plus a verification verdict. Nothing in
here touches the filesystem or the clock, so equal configurations give equal
bytes.
"""

from __future__ import annotations

import hashlib
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import config_hash, deltas, result_view
from .engine import (
    ExperimentPlan,
    charge_structure,
    fourier_combine,
    greens_via_parity,
    hadamard_test_greens,
    lk_from_hadamard,
    lk_from_postselection,
    polarizability_run,
    position_selective_greens,
)
from .fermion import allowed_momenta, momentum_drive
from .fields import DeltaPulse, GaussianSinusoid
from .noise import METHODS as NOISY_METHODS
from .noise import compare_methods, comparison_means, noise_preset
from .oracle import band_gap, lindhard_polarizability, lk_modes, significant_energies
from .signal import (
    ResponseTrace,
    Spectrum,
    apply_damping,
    drive_spectrum,
    fourier_transform,
    functional_division,
    mask_bounds,
    power_spectrum_and_peaks,
)
from .ssh import SSHParams, single_particle_matrix
from .tfxy import (
    circuit_unitary,
    compress,
    equal_up_to_phase,
    lightcone_prune,
    trotter_blocks,
)

CNOTS_PER_BLOCK = 2


@dataclass
class RunResult:
    files: dict = field(default_factory=dict)  # relative path -> text
    report: dict = field(default_factory=dict)
    verified: bool | None = None  # None when no verification was requested


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(x):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sub_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0] >> 1)


def model_params(cfg: dict, delta: float | None = None) -> SSHParams:
    m = cfg["model"]
    d = deltas(cfg)[0] if delta is None else delta
    return SSHParams(m["n"], m["v_nn"], d, m["mu"], m["boundary"])


def drive_field(cfg: dict):
    d = cfg["drive"]
    if d["kind"] == "delta":
        return DeltaPulse(d["eta"])
    return GaussianSinusoid.centered(d["amplitude"], d["omega0"], d["sigma"], d["n_sigma"])


def _momentum_indices(cfg: dict) -> list[int]:
    return list(cfg["run"]["momenta"]) or list(range(cfg["model"]["n"]))


# --- greens ---------------------------------------------------------------------------


def _greens_plan(cfg, params, k, seed) -> ExperimentPlan:
    r = cfg["run"]
    return ExperimentPlan(params, momentum_drive(k, params.n), drive_field(cfg),
                          t_max=r["t_max"], dt=r["dt"], psi0="vacuum", backend=r["backend"],
                          propagator=r["propagator"], exact_drive=r["exact_drive"],
                          shots=r["shots"], seed=seed, sample_every=r["sample_every"])


def greens_traces(cfg: dict) -> dict:
    """``L_k(t)`` for every configured ``delta`` and momentum index, keyed ``(i_delta, j)``."""
    r = cfg["run"]
    method, threads = r["method"], cfg["threads"]
    n = cfg["model"]["n"]
    ks = allowed_momenta(n)
    idx = _momentum_indices(cfg)
    out = {}
    if method in ("auxiliary_parity", "post_selection"):
        jobs = [(i, d, j) for i, d in enumerate(deltas(cfg)) for j in idx]

        def one(job):
            i, d, j = job
            plan = _greens_plan(cfg, model_params(cfg, d), ks[j], _sub_seed(cfg["seed"], i, j))
            if method == "auxiliary_parity":
                return plan, greens_via_parity(plan).values
            return plan, lk_from_postselection(plan)

        for job, (plan, vals) in zip(jobs, _pmap(one, jobs, threads)):
            out[job[0], job[2]] = ResponseTrace(plan.times, np.real(vals))
        return out

    # position-resolved methods: one run per delta, recombined per momentum
    def per_delta(item):
        i, d = item
        plan = _greens_plan(cfg, model_params(cfg, d), ks[0], _sub_seed(cfg["seed"], i))
        if method == "position_selective":
            return plan, position_selective_greens(plan)
        return plan, hadamard_test_greens(plan)

    items = list(enumerate(deltas(cfg)))
    for (i, _), (plan, rt) in zip(items, _pmap(per_delta, items, threads)):
        for j in idx:
            if method == "position_selective":
                vals = fourier_combine(rt, ks[j])
            else:
                vals = lk_from_hadamard(rt, ks[j])
            out[i, j] = ResponseTrace(plan.times, vals)
    return out


def spectrum_of(trace: ResponseTrace, cfg: dict) -> Spectrum:
    return fourier_transform(apply_damping(trace, cfg["run"]["tau"]), cfg["run"]["pad"])


def zone_boundary_gap(spec: Spectrum, prominence: float = 0.05) -> float:
    """Splitting of the two strongest positive-frequency peaks (0 if only one)."""
    pk = power_spectrum_and_peaks(spec, prominence=prominence, positive_only=True)[:2]
    if len(pk) < 2:
        return 0.0
    return abs(pk[0].omega - pk[1].omega)


def run_greens(cfg: dict) -> RunResult:
    n = cfg["model"]["n"]
    ks = allowed_momenta(n)
    traces = greens_traces(cfg)
    res = RunResult()
    peaks, worst = [], 0.0
    for (i, j), tr in traces.items():
        d = deltas(cfg)[i]
        spec = spectrum_of(tr, cfg)
        tag = f"d{d:g}_k{j}"
        res.files[f"trace_{tag}.csv"] = tr.to_csv()
        res.files[f"spectrum_{tag}.csv"] = spec.to_csv()
        found = power_spectrum_and_peaks(spec, positive_only=True)
        top = found[0] if found else None
        row = {"delta": d, "k_index": j, "k": float(ks[j]),
               "omega_peak": top.omega if top else None,
               "height": top.height if top else None,
               "width": top.width if top else None}
        if top is not None:
            ref = significant_energies(model_params(cfg, d), ks[j])
            err = min(abs(abs(top.omega) - e) for e in ref)
            row["oracle_error"] = err
            worst = max(worst, err)
        peaks.append(row)
    res.files["peaks.json"] = dumps(_clean(peaks))
    res.report = {"max_peak_error": worst}
    if cfg["run"]["verify"]:
        res.verified = bool(worst <= cfg["run"]["tolerance"]) and all(p["omega_peak"] is not None
                                                                      for p in peaks)
    return res


# --- polarizability -------------------------------------------------------------------


def q_grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n // 2 + 1) / n


def polarizability_spectra(cfg: dict):
    """``(qs, chi_spectra, trace)``: masked ``chi(q, w)`` for every ``q`` in ``q_grid``."""
    r = cfg["run"]
    params = model_params(cfg)
    fld = drive_field(cfg)
    backend = r["backend"] if r["backend"] != "compressed" else "covariance"
    tr = polarizability_run(params, r["site"], fld, r["t_max"], r["dt"], backend=backend,
                            odd_part=r["odd_part"])
    dn = tr.metadata["delta_n"]
    qs = q_grid(params.n)
    out = []
    for q in qs:
        a = spectrum_of(ResponseTrace(tr.times, charge_structure(dn, r["site"], q)), cfg)
        h = drive_spectrum(fld, a.omegas, r["tau"])
        out.append(functional_division(a, h))
    return qs, out, tr


def run_polarizability(cfg: dict) -> RunResult:
    r = cfg["run"]
    params = model_params(cfg)
    qs, chis, tr = polarizability_spectra(cfg)
    res = RunResult()
    rows = ["q,omega,re,im,valid"]
    for q, chi in zip(qs, chis):
        for om, v, ok in zip(chi.omegas, chi.values, chi.valid_mask):
            if ok:
                rows.append(f"{q!r},{float(om)!r},{float(v.real)!r},{float(v.imag)!r},1")
            else:
                rows.append(f"{q!r},{float(om)!r},,,0")
    res.files["chi.csv"] = "\n".join(rows) + "\n"
    res.files["trace_site.csv"] = tr.to_csv()
    bounds = mask_bounds(chis[0])
    im0 = float(np.nanmax(np.abs(chis[0].values.imag[chis[0].valid_mask])))
    worst = 0.0
    for q, chi in zip(qs, chis):
        ref = lindhard_polarizability(params, [q], chi.omegas, 1.0 / r["tau"], site=r["site"])[0]
        scale = np.abs(ref[chi.valid_mask]).max()
        if scale > 1e-12:  # q = 0 vanishes identically; covered by the Im check
            worst = max(worst, float(np.abs(chi.values - ref)[chi.valid_mask].max() / scale))
    meta = {"q": list(qs), "mask_bounds": bounds, "site": r["site"], "odd_part": r["odd_part"],
            "max_im_chi_q0": im0, "max_rel_dev_lindhard": worst}
    res.files["chi_meta.json"] = dumps(_clean(meta))
    res.report = {"max_im_chi_q0": im0, "max_rel_dev_lindhard": worst, "mask_bounds": bounds}
    if r["verify"]:
        res.verified = im0 <= 1e-10 and worst <= r["tolerance"]
    return res


# --- noisy method comparison ------------------------------------------------------------


def compare_setup(cfg: dict):
    """Plans for every momentum plus each momentum's known peak frequencies."""
    r = cfg["run"]
    params = model_params(cfg)
    ks = allowed_momenta(params.n)
    idx = _momentum_indices(cfg)
    fld = drive_field(cfg)
    plans = {float(ks[j]): ExperimentPlan(params, momentum_drive(ks[j], params.n), fld,
                                          t_max=r["t_max"], dt=r["dt"], psi0="vacuum",
                                          backend="compressed", sample_every=r["sample_every"])
             for j in idx}
    peaks = {k: significant_energies(params, k) for k in plans}
    return plans, peaks


def run_compare(cfg: dict) -> RunResult:
    nz, r = cfg["noise"], cfg["run"]
    plans, peaks = compare_setup(cfg)
    seeds = [_sub_seed(cfg["seed"], s) for s in range(nz["seeds"])]

    def one(preset):
        means = comparison_means(plans, noise_preset(preset))
        return compare_methods(plans, means, peaks, nz["shots"], nz["batches"], seeds,
                               r["tau"], nz["window"], tuple(nz["band"]), r["pad"])

    results = _pmap(one, nz["presets"], cfg["threads"])
    report = {}
    for preset, cmp in zip(nz["presets"], results):
        report[preset] = {
            "ordering_fraction": cmp.ordering_fraction(),
            "leakage_fraction": cmp.leakage_fraction(),
            "median_snr": {m: cmp.median_snr(m) for m in NOISY_METHODS},
            "median_leakage": {m: cmp.median_leakage(m) for m in NOISY_METHODS},
        }
    res = RunResult({"metrics.json": dumps(_clean({"seeds": seeds, "presets": report}))})
    res.report = {p: {"ordering_fraction": v["ordering_fraction"],
                      "leakage_fraction": v["leakage_fraction"]} for p, v in report.items()}
    if r["verify"]:
        res.verified = all(v["ordering_fraction"] >= 0.8 and v["leakage_fraction"] >= 0.9
                           for v in report.values())
    return res


# --- compression ------------------------------------------------------------------------


def compression_report(params: SSHParams, dt: float, steps: int, dense_limit: int = 10) -> dict:
    trot = trotter_blocks(params, dt, steps)
    tri = compress(trot)
    pruned = lightcone_prune(tri)
    residual = None
    if params.n <= dense_limit:
        residual = equal_up_to_phase(circuit_unitary(tri), circuit_unitary(trot))
    return {"n": params.n, "steps": steps, "dt": dt,
            "trotter_blocks": len(trot.blocks),
            "blocks": len(tri.blocks), "pruned_blocks": len(pruned.blocks),
            "cnots": CNOTS_PER_BLOCK * len(tri.blocks),
            "cnots_pruned": CNOTS_PER_BLOCK * len(pruned.blocks),
            "residual": residual}


def run_compress(cfg: dict) -> RunResult:
    c = cfg["compress"]
    m = cfg["model"]
    params = SSHParams(c["n"], m["v_nn"], deltas(cfg)[0], m["mu"], "open")
    rep = compression_report(params, c["dt"], c["steps"])
    res = RunResult({"compression.json": dumps(_clean(rep))}, rep)
    if cfg["run"]["verify"]:
        n = c["n"]
        res.verified = (rep["blocks"] == n * (n - 1) // 2 and rep["pruned_blocks"] == n - 1
                        and (rep["residual"] is None or rep["residual"] < 1e-8))
    return res


# --- oracle -----------------------------------------------------------------------------


def run_oracle(cfg: dict) -> RunResult:
    n = cfg["model"]["n"]
    ks = allowed_momenta(n)
    out = []
    for d in deltas(cfg):
        p = model_params(cfg, d)
        gap = band_gap(p)
        modes = [{"k_index": j, "k": float(ks[j]),
                  "modes": [{"energy": e, "weight": w} for e, w in lk_modes(p, ks[j])]}
                 for j in _momentum_indices(cfg)]
        out.append({"delta": d,
                    "energies": list(np.linalg.eigvalsh(single_particle_matrix(p))),
                    "gap": {"bulk": gap.bulk, "finite": gap.finite},
                    "momenta": modes})
    return RunResult({"oracle.json": dumps(_clean(out))}, {"deltas": deltas(cfg)})


RUNNERS = {
    "greens": run_greens,
    "polarizability": run_polarizability,
    "compare": run_compare,
    "compress": run_compress,
    "oracle": run_oracle,
}


def versions() -> dict:
    import scipy

    return {"linres": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def summary(cfg: dict, result: RunResult) -> str:
    files = {name: hashlib.sha256(text.encode()).hexdigest()
             for name, text in sorted(result.files.items())}
    return dumps(_clean({"experiment": cfg["experiment"], "config_hash": config_hash(cfg),
                         "config": result_view(cfg), "versions": versions(), "files": files,
                         "report": result.report, "verified": result.verified}))


def run(cfg: dict) -> RunResult:
    """Run ``cfg`` and add ``summary.json`` to the result's files."""
    result = RUNNERS[cfg["experiment"]](cfg)
    result.files["summary.json"] = summary(cfg, result)
    return result
