"""End-to-end experiments behind the command line.

Each experiment takes an :class:`ExperimentConfig`, derives one random
stream per task from ``(master_seed, task key)`` and returns plain rows, so
the results do not depend on worker count or scheduling order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig
from .diagnostics import acf, iat
from .field import BasisSpec, sample_prior
from .forward import ForwardModel, Mesh, ObservationOperator, SourceTerm
from .posterior import Dataset, GaussianPosterior, likelihood_lower_bound, make_synthetic_data
from .samplers import ChainOutput, Proposal, ProposalKind, run_chain
from .seeding import derive_seed, task_generator
from . import spectral as sp


class TuningError(RuntimeError):
    pass


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> List:
    """``list(map(fn, items))``, optionally on a process pool; order is preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# --- problem setup -------------------------------------------------------------


def basis_for(cfg: ExperimentConfig, K: int) -> BasisSpec:
    gamma = None
    if cfg.gamma_override is not None and len(cfg.gamma_override) == 2 * K + 1:
        gamma = np.array(cfg.gamma_override)
    return BasisSpec(K, abar=cfg.abar, gamma=gamma)


def source_for(cfg: ExperimentConfig, mesh: Mesh) -> SourceTerm:
    if cfg.source_profile is None:
        return SourceTerm.constant(mesh)
    if len(cfg.source_profile) == 1:
        return SourceTerm.constant(mesh, cfg.source_profile[0])
    return SourceTerm(np.array(cfg.source_profile))


@lru_cache(maxsize=16)
def model_for(cfg: ExperimentConfig, K: int) -> ForwardModel:
    mesh = Mesh(cfg.n_cells)
    return ForwardModel(basis_for(cfg, K), mesh, ObservationOperator(cfg.d), source_for(cfg, mesh))


@lru_cache(maxsize=4)
def dataset_for(cfg: ExperimentConfig) -> Dataset:
    """Synthetic data from a prior draw at ``truth_K`` modes (same seed for every K)."""
    seed = derive_seed(cfg.master_seed, "data")
    return make_synthetic_data(seed, model_for(cfg, cfg.data_K), cfg.sigma)


def posterior_for(cfg: ExperimentConfig, K: int) -> GaussianPosterior:
    return GaussianPosterior(model_for(cfg, K), dataset_for(cfg))


def initial_point(cfg: ExperimentConfig, K: int) -> np.ndarray:
    J = 2 * K + 1
    if cfg.init == "truth":
        truth = np.asarray(dataset_for(cfg).truth_u)
        u = np.zeros(J)
        m = min(J, truth.size)
        u[:m] = truth[:m]
        return u
    return np.asarray(sample_prior(task_generator(cfg.master_seed, f"init:K={K}"), J))


# --- chains ----------------------------------------------------------------------


@dataclass(frozen=True)
class ChainTask:
    cfg: ExperimentConfig
    algorithm: str
    K: int
    epsilon: Optional[float]
    key: str
    n_steps: int
    burn_in: int
    functionals: Tuple[str, ...] = ()

    @property
    def seed(self) -> int:
        return derive_seed(self.cfg.master_seed, self.key)


def run_task(task: ChainTask) -> ChainOutput:
    cfg = task.cfg
    post = posterior_for(cfg, task.K)
    return run_chain(
        Proposal(ProposalKind(task.algorithm), task.epsilon),
        initial_point(cfg, task.K),
        task.n_steps,
        task.burn_in,
        post,
        task.seed,
        functionals=task.functionals,
        spec=post.model.spec,
        config_hash=cfg.config_hash,
    )


def _eps_key(eps: Optional[float]) -> str:
    return "none" if eps is None else repr(float(eps))


# --- acceptance sweep --------------------------------------------------------------


@dataclass(frozen=True)
class AcceptanceRow:
    algorithm: str
    K: int
    epsilon: float
    accept_rate: float
    n_steps: int
    burn_in: int
    seed: int

    def as_tuple(self) -> tuple:
        return (self.algorithm, self.K, self.epsilon, self.accept_rate, self.n_steps, self.burn_in, self.seed)


def sweep_acceptance(cfg: ExperimentConfig) -> List[AcceptanceRow]:
    """Post-burn-in acceptance rate for every (algorithm, K, eps) cell.

    IS ignores eps, so it runs once per K and its rate is repeated across
    the eps column. Rows are ordered by algorithm (config order), K, eps.
    """
    alg_order = {a: i for i, a in enumerate(cfg.algorithms)}
    eps_sorted = sorted(cfg.epsilon)
    tasks: Dict[tuple, ChainTask] = {}
    for alg in cfg.algorithms:
        for K in sorted(set(cfg.K)):
            if alg == "IS":
                tasks[(alg, K, None)] = ChainTask(cfg, alg, K, None, f"sweep:IS:K={K}", cfg.n_steps, cfg.burn_in)
                continue
            for eps in eps_sorted:
                key = f"sweep:{alg}:K={K}:eps={_eps_key(eps)}"
                tasks[(alg, K, eps)] = ChainTask(cfg, alg, K, eps, key, cfg.n_steps, cfg.burn_in)
    outs = dict(zip(tasks, parallel_map(run_task, list(tasks.values()), cfg.workers)))
    rows = []
    for alg in cfg.algorithms:
        for K in sorted(set(cfg.K)):
            for eps in eps_sorted:
                out = outs[(alg, K, None if alg == "IS" else eps)]
                rows.append(AcceptanceRow(alg, K, eps, out.accept_rate, out.n_steps, out.burn_in, out.seed))
    rows.sort(key=lambda r: (alg_order[r.algorithm], r.K, r.epsilon))
    return rows


# --- autocorrelation ----------------------------------------------------------------


@dataclass(frozen=True)
class TuningRow:
    algorithm: str
    K: int
    epsilon: float
    accept_rate: float
    selected: bool


@dataclass(frozen=True)
class FunctionalSummary:
    algorithm: str
    K: int
    epsilon: Optional[float]
    functional_id: str
    accept_rate: float
    iat: float
    ess: float
    seed: int


@dataclass
class AutocorrResult:
    summary: List[FunctionalSummary]
    acf_rows: List[tuple]
    tuning: List[TuningRow]
    chains: Dict[Tuple[str, int], ChainOutput] = field(default_factory=dict, repr=False)

    def iat_of(self, algorithm: str, K: int, functional_id: str) -> float:
        for s in self.summary:
            if (s.algorithm, s.K, s.functional_id) == (algorithm, K, functional_id):
                return s.iat
        raise KeyError((algorithm, K, functional_id))


def _pilot(cfg: ExperimentConfig, alg: str, K: int, eps: float) -> ChainTask:
    steps = cfg.tune_steps
    return ChainTask(cfg, alg, K, eps, f"tune:{alg}:K={K}:eps={_eps_key(eps)}", steps, steps // 5)


def tune_epsilon(cfg: ExperimentConfig, alg: str, K: int) -> Tuple[float, List[TuningRow]]:
    """Pick eps whose pilot acceptance is closest to ``target_accept``.

    The configured grid is run first; when the target is bracketed, the
    bracket is bisected in log eps ``tune_refine`` times. Fails if no pilot
    lands within ``accept_tolerance`` of the target.
    """
    target = cfg.target_accept
    grid = sorted(cfg.tune_epsilon)
    outs = parallel_map(run_task, [_pilot(cfg, alg, K, e) for e in grid], cfg.workers)
    trials = [(e, o.accept_rate) for e, o in zip(grid, outs)]
    lo = hi = None
    for (e1, a1), (e2, a2) in zip(trials, trials[1:]):
        if a1 >= target >= a2:
            lo, hi = (e1, a1), (e2, a2)
            break
    if lo is not None:
        for _ in range(cfg.tune_refine):
            mid = math.exp(0.5 * (math.log(lo[0]) + math.log(hi[0])))
            a = run_task(_pilot(cfg, alg, K, mid)).accept_rate
            trials.append((mid, a))
            if a >= target:
                lo = (mid, a)
            else:
                hi = (mid, a)
    trials.sort()
    best = min(trials, key=lambda t: (abs(t[1] - target), t[0]))
    rows = [TuningRow(alg, K, e, a, e == best[0]) for e, a in trials]
    if abs(best[1] - target) > cfg.accept_tolerance:
        raise TuningError(
            f"{alg} K={K}: no step size in [{grid[0]:g}, {grid[-1]:g}] reaches acceptance "
            f"{target:g} +- {cfg.accept_tolerance:g} (closest {best[1]:.3f} at eps={best[0]:g})"
        )
    return best[0], rows


def resolve_epsilon(cfg: ExperimentConfig, alg: str, K: int) -> Tuple[Optional[float], List[TuningRow]]:
    if alg == "IS":
        return None, []
    fixed = cfg.epsilon_for(alg)
    if fixed is not None:
        return fixed, []
    return tune_epsilon(cfg, alg, K)


def summarize_chain(out: ChainOutput, alg: str, K: int, max_lag: int) -> Tuple[List[FunctionalSummary], List[tuple]]:
    summary, acf_rows = [], []
    eps = out.proposal.epsilon
    for fid in sorted(out.series):
        x = out.series[fid]
        if np.ptp(x) == 0.0:
            # the chain never moved this functional: infinite correlation time
            summary.append(FunctionalSummary(alg, K, eps, fid, out.accept_rate, math.inf, 0.0, out.seed))
            continue
        tau = iat(x)
        summary.append(FunctionalSummary(alg, K, eps, fid, out.accept_rate, tau, x.size / tau, out.seed))
        lag_cap = min(max_lag, x.size // 4)
        rho = acf(x, lag_cap).rho
        acf_rows.extend((alg, K, eps, fid, lag, r) for lag, r in enumerate(rho))
    return summary, acf_rows


def autocorr(cfg: ExperimentConfig) -> AutocorrResult:
    """Tune (or look up) eps per (algorithm, K), run production chains, report ACF and IAT."""
    Ks = sorted(set(cfg.K))
    pairs = [(alg, K) for alg in cfg.algorithms for K in Ks]
    tuning: List[TuningRow] = []
    tasks = []
    for alg, K in pairs:
        eps, rows = resolve_epsilon(cfg, alg, K)
        tuning.extend(rows)
        tasks.append(ChainTask(cfg, alg, K, eps, f"autocorr:{alg}:K={K}", cfg.n_steps, cfg.burn_in,
                               tuple(cfg.functionals)))
    outs = parallel_map(run_task, tasks, cfg.workers)
    summary, acf_rows = [], []
    chains = {}
    for (alg, K), out in zip(pairs, outs):
        s, a = summarize_chain(out, alg, K, cfg.max_lag)
        summary.extend(s)
        acf_rows.extend(a)
        chains[(alg, K)] = out
    return AutocorrResult(summary, acf_rows, tuning, chains)


# --- spectral verification -------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    columns: Tuple[str, ...]
    rows: List[tuple]
    asserted_failures: int = 0
    reported_violations: Dict[str, int] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


@dataclass
class SpectralReport:
    suites: List[SuiteResult]
    counterexamples: Dict[str, str]

    @property
    def asserted_failures(self) -> int:
        return sum(s.asserted_failures for s in self.suites)

    def lines(self) -> List[str]:
        out = []
        for s in self.suites:
            status = "PASS" if s.asserted_failures == 0 else f"FAIL ({s.asserted_failures} asserted failures)"
            out.append(f"[{s.name}] {status}; {len(s.rows)} rows")
            for k, v in sorted(s.reported_violations.items()):
                out.append(f"  report-only {k}: {v} violations")
            out.extend(f"  {n}" for n in s.notes)
        return out


MAX_DUMPS = 20
TOL = 1e-10


def _stats(values: Iterable[float]) -> str:
    v = np.array([x for x in values if np.isfinite(x)])
    if v.size == 0:
        return "n/a"
    return f"min={v.min():.4g} median={np.median(v):.4g} max={v.max():.4g}"


def cheeger_suite(cfg: ExperimentConfig, dumps: Dict[str, str]) -> SuiteResult:
    cols = ("index", "n", "conductance", "gap_l2", "lower", "upper", "holds")
    rows, fails, tight = [], 0, []
    for i in range(cfg.suite_instances):
        inst = sp.suite_instance(cfg.master_seed, "cheeger", i, n_max=cfg.suite_n_max, max_ratio=cfg.suite_ratio)
        rep = sp.cheeger_check(inst.Q)
        ok = rep.holds(TOL)
        if not ok:
            fails += 1
            if fails <= MAX_DUMPS:
                dumps[f"cheeger_{i}"] = sp.dump_instance(inst, cfg.master_seed, "cheeger violation")
        tight.append(rep.tightness)
        rows.append((i, inst.Q.n, rep.conductance, rep.gap_l2, rep.lower, rep.upper, ok))
    res = SuiteResult("cheeger", cols, rows, fails)
    res.notes.append("lower/gap " + _stats(t[0] for t in tight))
    res.notes.append("gap/upper " + _stats(t[1] for t in tight))
    return res


def transfer_suite(cfg: ExperimentConfig, dumps: Dict[str, str]) -> SuiteResult:
    """Gap of MH kernels against bounds from the proposal gap and the likelihood ratio.

    Asserted: the lower bound r^4 g_Q^2 / 8 with gaps taken as 1 - lambda_2.
    Reported only: the same bound with |lambda| gaps, the upper bound
    2 g_Q^{1/2} / r^2, and the conjectured r g_Q <= g_P <= g_Q / r.
    """
    cols = ("index", "n", "ratio")
    for conv in ("l2", "abs"):
        cols += tuple(f"{c}_{conv}" for c in ("gap_prop", "gap_mh", "lower", "upper", "lower_holds", "upper_holds",
                                               "conj_lower_holds", "conj_upper_holds"))
    rows, fails = [], 0
    viol: Dict[str, int] = {}
    tight = {"l2": [], "abs": []}
    for i in range(cfg.suite_instances):
        inst = sp.suite_instance(cfg.master_seed, "transfer", i, n_max=cfg.suite_n_max, max_ratio=cfg.suite_ratio)
        rep = sp.gap_transfer_check(inst.Q, inst.L)
        conj = sp.conjectured_transfer_probe(inst.Q, inst.L)
        row = [i, inst.Q.n, rep.ratio]
        bad_assert, bad_report = False, []
        for conv in ("l2", "abs"):
            lo_ok, up_ok = rep.lower_holds(conv, TOL), rep.upper_holds(conv, TOL)
            cl_ok, cu_ok = conj.lower_holds(conv, TOL), conj.upper_holds(conv, TOL)
            row += [rep.gap_prop[conv], rep.gap_mh[conv], rep.lower[conv], rep.upper[conv], lo_ok, up_ok, cl_ok, cu_ok]
            checks = [("upper", up_ok), ("conj_lower", cl_ok), ("conj_upper", cu_ok)]
            if conv == "l2":
                bad_assert |= not lo_ok
            else:
                checks.insert(0, ("lower", lo_ok))
            for name, ok in checks:
                if not ok:
                    viol[f"{name}_{conv}"] = viol.get(f"{name}_{conv}", 0) + 1
                    bad_report.append(f"{name}_{conv}")
            tight[conv].append(rep.tightness(conv))
        if bad_assert:
            fails += 1
        if (bad_assert or bad_report) and len(dumps) < 3 * MAX_DUMPS:
            note = "lower bound violation" if bad_assert else "report-only: " + ",".join(bad_report)
            dumps[f"transfer_{i}"] = sp.dump_instance(inst, cfg.master_seed, note)
        rows.append(tuple(row))
    res = SuiteResult("transfer", cols, rows, fails, viol)
    for conv in ("l2", "abs"):
        res.notes.append(f"{conv}: lower/gap " + _stats(t[0] for t in tight[conv]))
        res.notes.append(f"{conv}: gap/upper " + _stats(t[1] for t in tight[conv]))
    return res


def tensor_suite(cfg: ExperimentConfig, dumps: Dict[str, str]) -> SuiteResult:
    cols = ("index", "n", "gap", "gap_product", "abs_error", "holds")
    rows, fails = [], 0
    for i in range(cfg.tensor_instances):
        key = f"tensor:{i}"
        rng = task_generator(cfg.master_seed, key)
        n = int(rng.integers(2, cfg.tensor_n_max + 1))
        k = sp.random_reversible_kernel(rng, n)
        g = sp.spectral_gap(k).gap
        g2 = sp.spectral_gap(sp.tensor_product(k, k)).gap
        err = abs(g2 - g)
        ok = err <= 1e-9
        if not ok:
            fails += 1
            if fails <= MAX_DUMPS:
                dumps[f"tensor_{i}"] = sp.dump_instance(sp.Instance(i, key, k), cfg.master_seed, "tensor mismatch")
        rows.append((i, n, g, g2, err, ok))
    return SuiteResult("tensor", cols, rows, fails)


@lru_cache(maxsize=32)
def _uniform_walk_gaps(eps: float, n_grid: int) -> Tuple[float, float]:
    rep = sp.spectral_gap(sp.discretize_reflected_walk(eps, "uniform", n_grid))
    return rep.gap, rep.gap_l2


def proposal_gap_suite(cfg: ExperimentConfig) -> SuiteResult:
    cols = ("epsilon", "numeric_gap", "numeric_gap_l2", "fourier_gap", "fourier_rel_error",
            "intermediate_bound", "linear_bound", "numeric_ge_intermediate", "intermediate_ge_linear",
            "numeric_ge_linear")
    rows = []
    viol: Dict[str, int] = {}
    for eps in cfg.gap_epsilon:
        g, g2 = _uniform_walk_gaps(float(eps), cfg.gap_n_grid)
        inter, lin = sp.claimed_proposal_gap_bounds(eps)
        four = sp.reflected_uniform_gap_fourier(eps)
        r = sp.ProposalGapRow(eps, g, g2, inter, lin, four)
        for name in ("numeric_ge_intermediate", "intermediate_ge_linear", "numeric_ge_linear"):
            if not getattr(r, name):
                viol[name] = viol.get(name, 0) + 1
        rows.append((eps, g, g2, four, abs(g - four) / four, inter, lin,
                     r.numeric_ge_intermediate, r.intermediate_ge_linear, r.numeric_ge_linear))
    return SuiteResult("proposal_gaps", cols, rows, 0, viol)


def minorization_suite(cfg: ExperimentConfig) -> SuiteResult:
    cols = ("epsilon", "n_steps", "n_grid", "min_density", "claimed", "claim_holds", "max_row_error")
    rows = []
    viol: Dict[str, int] = {}
    fails = 0
    for eps in cfg.gap_epsilon:
        rep = sp.minorization_probe(eps, cfg.minorization_n_grid)
        if not rep.claim_holds:
            viol["claimed_density"] = viol.get("claimed_density", 0) + 1
        # row sums of P^n must stay 1: a genuine invariant of the construction
        if rep.max_row_error > 1e-9:
            fails += 1
        rows.append((eps, rep.n_steps, rep.n_grid, rep.min_density, rep.claimed, rep.claim_holds, rep.max_row_error))
    return SuiteResult("minorization", cols, rows, fails, viol)


def posterior_gap_bound_suite(cfg: ExperimentConfig) -> SuiteResult:
    """Plug computed likelihood bounds and 1-D proposal gaps into the gap lower bound.

    The reflected uniform proposal on the cube is a product of 1-D walks, so
    its gap is the 1-D gap for every J. Reported as log10 of
    r^4 g^2 / 8 and, for comparison, r^4 g^2.
    """
    cols = ("K", "epsilon", "log_L_lower", "gap_prop", "log10_bound", "log10_bound_without_8")
    rows = []
    data = dataset_for(cfg)
    for K in sorted(set(cfg.K)):
        model = model_for(cfg, K)
        bounds = likelihood_lower_bound(data, model.spec, model)
        for eps in sorted(cfg.epsilon):
            if not 0.0 < eps < 1.0:
                continue
            g, _ = _uniform_walk_gaps(float(eps), cfg.gap_n_grid)
            log_no8 = 4.0 * bounds.log_ratio + 2.0 * math.log(g)
            rows.append((K, eps, bounds.log_L_lower, g,
                         (log_no8 - math.log(8.0)) / math.log(10.0), log_no8 / math.log(10.0)))
    return SuiteResult("posterior_gap_bound", cols, rows, 0)


def spectral_verify(cfg: ExperimentConfig) -> SpectralReport:
    dumps: Dict[str, str] = {}
    suites = [
        cheeger_suite(cfg, dumps),
        transfer_suite(cfg, dumps),
        tensor_suite(cfg, dumps),
        proposal_gap_suite(cfg),
        minorization_suite(cfg),
        posterior_gap_bound_suite(cfg),
    ]
    return SpectralReport(suites, dumps)
