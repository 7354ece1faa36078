"""Seeded Monte Carlo campaigns comparing full-inversion RZF precoding
against Woodbury/arSVD inverse maintenance.

Each trial simulates one satellite pass. All methods in a campaign see
the identical channel realization of a trial (the channel stream is
keyed by trial index only), so rate degradation isolates the inversion
method; the sketch stream is keyed by method as well, so randomized-SVD
draws never leak between methods. Trials are independent work units and
may run in worker processes; the merge is by trial index, making
parallel and serial runs bit-identical.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from . import lowrank
from .config import ScenarioConfig
from .errors import EmptyInputError
from .precoding import rzf_precoder, sum_rate

CHANNEL_STREAM = "channel"

_DECISION_CODES = {"full": 0, "woodbury": 1, "none": 2}


@dataclass
class SnapshotRecord:
    """Per-update-instant outcome."""

    t_s: float
    sum_rate: float
    method: str          # 'full' | 'woodbury' | 'none'
    k_est: int
    cost_units: float


@dataclass
class TrialResult:
    method_label: str
    snapshots: list
    mean_sum_rate: float
    total_cost_units: float


@dataclass
class ComparisonRow:
    method_label: str
    eta: float | None
    savings_pct: float
    degradation_pct: float


@dataclass
class ComparisonTable:
    """Per-method computational savings and sum-rate degradation versus
    the conventional baseline (whose row is 0/0 by definition)."""

    rows: list


@dataclass
class CampaignResult:
    labels: list
    etas: dict
    table: ComparisonTable
    pooled_rates: dict            # label -> (mc*n_snap,) per-snapshot rates
    trial_mean_rates: dict        # label -> (mc,)
    mean_rate: dict
    mean_cost: dict               # label -> mean per-trial cost units
    mean_k_est: dict              # label -> mean arSVD rank over updates
    method_counts: dict           # label -> {'full': n, 'woodbury': n, 'none': n}
    decisions: dict               # label -> list of per-trial uint8 arrays (optional)
    n_snapshots: int
    mc_runs: int
    master_seed: int


def method_label(eta: float | None) -> str:
    return "conventional" if eta is None else f"wb_arsvd_eta{eta:g}"


def stream_seed(master_seed: int, label: str, trial_index: int) -> np.random.SeedSequence:
    """Platform-stable seed for one (method, trial) random stream."""
    return np.random.SeedSequence(
        [int(master_seed), zlib.crc32(label.encode("utf-8")), int(trial_index)]
    )


def ecdf(samples) -> np.ndarray:
    """Empirical CDF as an (m, 2) array of (value, cumulative
    probability); duplicate values collapse onto their last step."""
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInputError("ecdf needs at least one sample")
    xs = np.sort(arr)
    vals = np.unique(xs)
    cdf = np.searchsorted(xs, vals, side="right") / xs.size
    return np.column_stack([vals, cdf])


def complexity_curve(K: int) -> np.ndarray:
    """(r, cost ratio) of the Woodbury/arSVD update against a full
    inversion, for r = 1..K."""
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    full = lowrank.cost_full(K)
    rs = np.arange(1, K + 1)
    ratios = np.array([lowrank.cost_wb_arsvd(K, int(r)) / full for r in rs])
    return np.column_stack([rs.astype(float), ratios])


@dataclass
class ArsvdBenchRow:
    """One benchmark instance: adaptive estimate against the full-SVD
    cumulative-energy oracle."""

    eta: float
    trial: int
    k_est: int
    oracle_rank: int
    residual_energy: float
    total_energy: float
    used_fallback: bool


def arsvd_benchmark(K: int = 16, trials: int = 200,
                    etas=(0.9, 0.8, 0.65), spectrum_ratio: float = 2.0,
                    k_init: int = 2, p: int = 1, i_max: int = 8,
                    seed: int = 0) -> list:
    """Exercise the adaptive SVD on seeded matrices with geometrically
    decaying spectra and score it against a full-SVD oracle.

    Each instance is U diag(ratio^-j) V^H with random unitary factors;
    the oracle rank is the smallest r whose exact cumulative energy
    reaches eta.
    """
    rows = []
    sv = spectrum_ratio ** -np.arange(1, K + 1, dtype=float)
    energy = sv**2
    total = energy.sum()
    cum = np.cumsum(energy)
    for trial in range(trials):
        gen_rng = np.random.default_rng(stream_seed(seed, "arsvd-bench", trial))
        U, _ = np.linalg.qr(gen_rng.standard_normal((K, K))
                            + 1j * gen_rng.standard_normal((K, K)))
        V, _ = np.linalg.qr(gen_rng.standard_normal((K, K))
                            + 1j * gen_rng.standard_normal((K, K)))
        dA = (U * sv) @ V.conj().T
        for eta in etas:
            oracle = int(np.searchsorted(cum, eta * total) + 1)
            cfg = lowrank.ArSvdConfig(eta=eta, k_init=k_init, p=p, i_max=i_max)
            factor = lowrank.arsvd(dA, cfg, np.random.default_rng(
                stream_seed(seed, f"arsvd-bench-sketch-{eta:g}", trial)
            ))
            residual = np.linalg.norm(dA - factor.as_matrix(), "fro") ** 2
            rows.append(ArsvdBenchRow(
                eta=eta, trial=trial, k_est=factor.k_est, oracle_rank=oracle,
                residual_energy=float(residual), total_energy=float(total),
                used_fallback=factor.used_fallback,
            ))
    return rows


@dataclass
class _MethodRun:
    """Mutable per-method state while sweeping one trial's snapshots."""

    label: str
    eta: float | None
    rng: np.random.Generator
    arsvd_cfg: lowrank.ArSvdConfig | None
    state: lowrank.GramState | None = None
    rates: list = field(default_factory=list)
    records: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    total_cost: float = 0.0
    k_sum: int = 0
    k_count: int = 0
    counts: dict = field(default_factory=lambda: {"full": 0, "woodbury": 0, "none": 0})


def _sweep_trial(cfg: ScenarioConfig, specs, trial_index: int, master_seed: int,
                 collect_records: bool = False, collect_decisions: bool = False,
                 sketch_labels: dict | None = None) -> dict:
    """Run every method in ``specs`` over one pass with a shared channel.

    specs is a list of (label, eta-or-None). Returns label -> _MethodRun.
    sketch_labels optionally re-keys a method's sketch stream (used to
    show dispatcher decisions do not depend on the sketch draw).
    """
    channel_rng = np.random.default_rng(
        stream_seed(master_seed, CHANNEL_STREAM, trial_index)
    )
    ctx = ch.make_pass(cfg, channel_rng)
    noise = np.array([ut.noise_variance_W for ut in ctx.uts])
    alpha = cfg.resolved_alpha
    K = cfg.K

    runs = []
    for label, eta in specs:
        seed_label = (sketch_labels or {}).get(label, label)
        runs.append(_MethodRun(
            label=label,
            eta=eta,
            rng=np.random.default_rng(stream_seed(master_seed, seed_label, trial_index)),
            arsvd_cfg=None if eta is None else lowrank.ArSvdConfig(
                eta=eta, k_init=cfg.k_init, p=cfg.p, i_max=cfg.i_max
            ),
        ))

    dt = 1.0 / cfg.update_rate_Hz
    prev_H_eff = None
    beams = None
    nlos = None
    for i in range(cfg.n_snapshots):
        if i % cfg.nlos_block_len == 0:
            nlos = ch.draw_nlos(ctx, channel_rng)
        held_beams = beams if (i % cfg.beam_hold != 0) else None
        sn = ch.snapshot(ctx, i * dt, channel_rng, beams=held_beams, nlos_draw=nlos)
        beams = sn.F_RF

        for run in runs:
            if run.eta is None or run.state is None or (
                cfg.n_reset > 0 and i % cfg.n_reset == 0
            ):
                run.state = lowrank.gram_matrix(sn.H_eff, alpha)
                method, k_est, cost = "full", 0, lowrank.cost_full(K)
            else:
                dH = sn.H_eff - prev_H_eff
                run.state, rep = lowrank.update_inverse(
                    run.state, prev_H_eff, dH, run.arsvd_cfg, run.rng
                )
                method, k_est, cost = rep.method, rep.k_est, rep.cost_units
                run.k_sum += k_est
                run.k_count += 1
            pre = rzf_precoder(sn.H_eff, run.state.A_inv, sn.F_RF, cfg.P_t_W)
            rate = sum_rate(sn.H, sn.F_RF, pre, noise).sum_rate

            run.rates.append(rate)
            run.total_cost += cost
            run.counts[method] += 1
            if collect_records:
                run.records.append(SnapshotRecord(
                    t_s=i * dt, sum_rate=rate, method=method,
                    k_est=k_est, cost_units=cost,
                ))
            if collect_decisions:
                run.decisions.append(_DECISION_CODES[method])
        prev_H_eff = sn.H_eff

    return {run.label: run for run in runs}


def run_trial(cfg: ScenarioConfig, eta: float | None, trial_index: int,
              master_seed: int | None = None,
              sketch_stream: str | None = None) -> TrialResult:
    """One pass with a single method (eta None = conventional).

    The channel stream depends only on (master_seed, trial_index), so the
    result is snapshot-for-snapshot identical to the same trial inside a
    multi-method campaign. sketch_stream overrides the label keying the
    randomized-SVD stream.
    """
    seed = cfg.seed if master_seed is None else master_seed
    label = method_label(eta)
    sketch_labels = {label: sketch_stream} if sketch_stream else None
    run = _sweep_trial(cfg, [(label, eta)], trial_index, seed,
                       collect_records=True, sketch_labels=sketch_labels)[label]
    rates = np.array(run.rates)
    return TrialResult(
        method_label=label,
        snapshots=run.records,
        mean_sum_rate=float(rates.mean()),
        total_cost_units=run.total_cost,
    )


def _limit_blas_threads():
    """Single-thread the BLAS pools: the campaign works on 16x16-scale
    matrices where thread sync costs more than it buys, and worker
    processes would otherwise oversubscribe the cores."""
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def _trial_job(args):
    cfg, specs, idx, seed, collect_decisions = args
    runs = _sweep_trial(cfg, specs, idx, seed, collect_decisions=collect_decisions)
    # Ship only the compact aggregates back to the parent.
    return {
        label: (
            np.array(run.rates),
            run.total_cost,
            run.k_sum,
            run.k_count,
            run.counts,
            np.array(run.decisions, dtype=np.uint8),
        )
        for label, run in runs.items()
    }


def run_campaign(cfg: ScenarioConfig, master_seed: int | None = None,
                 workers: int = 1, collect_decisions: bool = False) -> CampaignResult:
    """Monte Carlo comparison of the conventional method against
    Woodbury/arSVD at every eta in the scenario.

    Savings are cost-model based: 1 - mean(cost_method)/mean(cost_conv);
    degradation is 1 - mean(rate_method)/mean(rate_conv), both over the
    pooled per-snapshot data of mc_runs passes.
    """
    seed = cfg.seed if master_seed is None else master_seed
    etas = sorted(set(cfg.eta_list), reverse=True)
    specs = [(method_label(None), None)] + [(method_label(e), e) for e in etas]
    labels = [label for label, _ in specs]

    jobs = [(cfg, specs, idx, seed, collect_decisions) for idx in range(cfg.mc_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers,
                                 initializer=_limit_blas_threads) as pool:
            per_trial = list(pool.map(_trial_job, jobs, chunksize=1))
    else:
        _limit_blas_threads()
        per_trial = [_trial_job(job) for job in jobs]

    pooled = {lab: np.concatenate([t[lab][0] for t in per_trial]) for lab in labels}
    trial_means = {
        lab: np.array([t[lab][0].mean() for t in per_trial]) for lab in labels
    }
    trial_costs = {lab: np.array([t[lab][1] for t in per_trial]) for lab in labels}
    mean_rate = {lab: float(pooled[lab].mean()) for lab in labels}
    mean_cost = {lab: float(trial_costs[lab].mean()) for lab in labels}
    mean_k = {}
    counts = {}
    decisions = {}
    for lab in labels:
        k_sum = sum(t[lab][2] for t in per_trial)
        k_count = sum(t[lab][3] for t in per_trial)
        mean_k[lab] = k_sum / k_count if k_count else 0.0
        merged = {"full": 0, "woodbury": 0, "none": 0}
        for t in per_trial:
            for key, val in t[lab][4].items():
                merged[key] += val
        counts[lab] = merged
        if collect_decisions:
            decisions[lab] = [t[lab][5] for t in per_trial]

    conv = method_label(None)
    rows = [ComparisonRow(conv, None, 0.0, 0.0)]
    for eta in etas:
        lab = method_label(eta)
        rows.append(ComparisonRow(
            method_label=lab,
            eta=eta,
            savings_pct=100.0 * (1.0 - mean_cost[lab] / mean_cost[conv]),
            degradation_pct=100.0 * (1.0 - mean_rate[lab] / mean_rate[conv]),
        ))

    return CampaignResult(
        labels=labels,
        etas={method_label(e): e for e in etas} | {conv: None},
        table=ComparisonTable(rows=rows),
        pooled_rates=pooled,
        trial_mean_rates=trial_means,
        mean_rate=mean_rate,
        mean_cost=mean_cost,
        mean_k_est=mean_k,
        method_counts=counts,
        decisions=decisions,
        n_snapshots=cfg.n_snapshots,
        mc_runs=cfg.mc_runs,
        master_seed=seed,
    )
