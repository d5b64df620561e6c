"""Markov chain samplers for the edge and concurrency model and the
simulation experiments built on them.

Three single-dyad samplers are available, all with the model as stationary
law: ``metropolis`` (uniform dyad proposals), ``tnt`` (tie/no-tie: half the
proposals pick a uniformly random existing edge, with the Hastings
correction for the asymmetry) and ``gibbs`` (resample a uniform dyad from
its full conditional).

Random streams: every chain draws from its own ``numpy`` PCG64 generator
seeded by ``SeedSequence(seed, spawn_key=key)``. Replicate ``r`` at grid
point ``g`` of an experiment uses ``key = (g, r)``; capture attempt ``a``
uses ``key = (a,)``. Results therefore do not depend on how chains are
distributed over threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import _kernels as K
from .graph import DyadClass, DyadGroup, Graph, ModelParams, PhysicalParams, as_theta

log = logging.getLogger(__name__)

PROPOSALS = {"metropolis": K.METROPOLIS, "tnt": K.TNT, "gibbs": K.GIBBS}
CHUNK = 1 << 18


def make_rng(seed: int, key=()) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


class ChainState:
    """Array-backed graph state shared with the compiled kernels."""

    def __init__(self, g: Graph):
        n = g.n
        self.n = n
        self.adj = g.adj.copy()
        self.deg = g.degree.astype(np.int64).copy()
        self.stats = np.array([g.t_e, g.t_c], dtype=np.int64)
        n_dyads = n * (n - 1) // 2
        self.elist = np.zeros((max(n_dyads, 1), 2), dtype=np.int32)
        self.epos = np.full((n, n), -1, dtype=np.int32)
        for k, (i, j) in enumerate(g.edges()):
            self.elist[k] = (i, j)
            self.epos[i, j] = self.epos[j, i] = k
        iu, ju = np.triu_indices(n, 1)
        self.pair_i = iu.astype(np.int32)
        self.pair_j = ju.astype(np.int32)
        self.dyad_index = np.full((n, n), -1, dtype=np.int64)
        self.dyad_index[iu, ju] = np.arange(n_dyads)
        self.dyad_index[ju, iu] = np.arange(n_dyads)

    @property
    def n_dyads(self) -> int:
        return len(self.pair_i)

    @property
    def t_e(self) -> int:
        return int(self.stats[0])

    @property
    def t_c(self) -> int:
        return int(self.stats[1])

    @property
    def m(self) -> float:
        return 1.0 - self.t_c / self.n

    def to_graph(self) -> Graph:
        return Graph.from_adjacency(self.adj)

    def graph_code(self) -> int:
        present = self.adj[self.pair_i, self.pair_j].astype(bool)
        return int(np.sum(np.left_shift(1, np.flatnonzero(present)))) if present.any() else 0

    def toggle(self, i: int, j: int):
        K._toggle(self.adj, self.deg, self.stats, self.elist, self.epos, i, j)

    def step(self, params, rng: np.random.Generator, proposal: str = "metropolis") -> bool:
        theta = as_theta(params)
        kind = PROPOSALS[proposal]
        u = rng.random(3)
        i, j, present, _, value = K._propose(
            self.adj, self.deg, self.stats, self.elist, self.pair_i, self.pair_j,
            self.n_dyads, theta.theta_e, theta.theta_c, kind, u[0], u[1],
        )
        ok = bool(K._decide(kind, present, value, u[2]))
        if ok:
            self.toggle(int(i), int(j))
        return ok


def metropolis_step(state: ChainState, params, rng) -> bool:
    return state.step(params, rng, "metropolis")


def tnt_step(state: ChainState, params, rng) -> bool:
    return state.step(params, rng, "tnt")


def gibbs_step(state: ChainState, params, rng) -> bool:
    return state.step(params, rng, "gibbs")


def acceptance_probability(state: ChainState, i: int, j: int, params, proposal: str = "metropolis") -> float:
    """Probability that a proposal to toggle ``(i, j)`` is accepted.

    For ``tnt`` this includes the Hastings factor; for ``gibbs`` it is the
    probability that the resampled value differs from the current one.
    """
    theta = as_theta(params)
    present = int(state.adj[i, j])
    di, dj = int(state.deg[i]) - present, int(state.deg[j]) - present
    logit = theta.theta_e + theta.theta_c * ((di == 1) + (dj == 1))
    if proposal == "gibbs":
        p_on = 1.0 / (1.0 + math.exp(-logit))
        return 1.0 - p_on if present else p_on
    logr = -logit if present else logit
    if proposal == "tnt":
        E, D = state.t_e, state.n_dyads
        if present:
            q_fwd, q_rev = 0.5 / E + 0.5 / D, (1.0 / D if E == 1 else 0.5 / D)
        else:
            q_fwd, q_rev = (1.0 / D if E == 0 else 0.5 / D), 0.5 / (E + 1) + 0.5 / D
        logr += math.log(q_rev / q_fwd)
    return 1.0 if logr >= 0 else math.exp(logr)


def bernoulli_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, 1)
    adj = np.zeros((n, n), dtype=np.uint8)
    on = rng.random(len(iu)) < p
    adj[iu[on], ju[on]] = 1
    adj[ju[on], iu[on]] = 1
    return Graph.from_adjacency(adj)


@dataclass(frozen=True)
class ChainConfig:
    """One chain: ``steps`` total iterations of which the first ``burn_in`` are discarded.

    ``density=None`` draws the Bernoulli seed-graph density uniformly on [0, 1].
    """

    N: int
    params: ModelParams | PhysicalParams
    proposal: str = "tnt"
    burn_in: int = 500_000
    steps: int = 1_000_000
    thin: int = 1000
    seed: int = 0
    density: float | None = None
    key: tuple = ()

    def __post_init__(self):
        if self.proposal not in PROPOSALS:
            raise ValueError(f"unknown proposal {self.proposal!r}; choose from {sorted(PROPOSALS)}")
        if self.steps < self.burn_in or self.burn_in < 0:
            raise ValueError("need 0 <= burn_in <= steps")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.density is not None and not 0 <= self.density <= 1:
            raise ValueError("density must lie in [0, 1]")
        if self.N < 2:
            raise ValueError("N must be at least 2")

    @property
    def theta(self) -> ModelParams:
        return as_theta(self.params)


@dataclass
class ChainResult:
    config: ChainConfig
    step: np.ndarray
    t_e: np.ndarray
    t_c: np.ndarray
    final: Graph
    accepted: int
    formation_proposals: np.ndarray
    formation_accepts: np.ndarray
    hist: np.ndarray | None = None
    dyad_on_fraction: np.ndarray | None = None

    @property
    def m(self) -> np.ndarray:
        return 1.0 - self.t_c / self.config.N

    @property
    def acceptance_rate(self) -> float:
        sampled = self.config.steps - self.config.burn_in
        return self.accepted / sampled if sampled else math.nan

    def formation_acceptance(self) -> dict[DyadClass, float]:
        out = {}
        for c in DyadClass:
            n = self.formation_proposals[c]
            out[c] = self.formation_accepts[c] / n if n else math.nan
        return out


def _initial_graph(config: ChainConfig, rng) -> Graph:
    p = rng.random() if config.density is None else config.density
    return bernoulli_graph(config.N, p, rng)


def run_chain(
    config: ChainConfig,
    start: Graph | None = None,
    track_graphs: bool = False,
    track_dyads: bool = False,
) -> ChainResult:
    """Run one chain; the statistics stream after burn-in is thinned by ``config.thin``.

    ``track_graphs`` (small ``N`` only) also counts post-burn-in visits to each
    of the ``2**C(N,2)`` graphs, indexed by the dyad bit code;
    ``track_dyads`` records the fraction of post-burn-in steps each dyad is
    present.
    """
    rng = make_rng(config.seed, config.key)
    g = start.copy() if start is not None else _initial_graph(config, rng)
    if g.n != config.N:
        raise ValueError("start graph order does not match config.N")
    st = ChainState(g)
    theta = config.theta
    kind = PROPOSALS[config.proposal]
    D = st.n_dyads
    if track_graphs and D > 20:
        raise ValueError("graph tracking is limited to C(N, 2) <= 20")
    empty_i = np.zeros(0, dtype=np.int64)
    empty_f = np.zeros(0, dtype=np.float64)
    prop = np.zeros(6, dtype=np.int64)
    acc = np.zeros(6, dtype=np.int64)
    code = np.array([st.graph_code()], dtype=np.int64)
    hist = np.zeros(1 << D, dtype=np.int64) if track_graphs else empty_i
    on_time = np.zeros(D, dtype=np.float64) if track_dyads else empty_f
    since = np.zeros(D, dtype=np.int64) if track_dyads else empty_i
    n_out = (config.steps - config.burn_in) // config.thin + 1
    trace = np.zeros((n_out, 3), dtype=np.int64)
    scratch = np.zeros((0, 3), dtype=np.int64)
    dummy = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64), np.zeros(0, dtype=np.int64))

    def advance(n_steps, step0, record):
        rows = accepted = 0
        done = 0
        while done < n_steps:
            k = min(CHUNK, n_steps - done)
            u = rng.random((k, 3))
            if record:
                r, a = K.run_trace(
                    st.adj, st.deg, st.stats, st.elist, st.epos, st.pair_i, st.pair_j,
                    theta.theta_e, theta.theta_c, kind, u, step0 + done, config.thin,
                    trace[rows:], hist, code, st.dyad_index, on_time, since, prop, acc,
                )
            else:
                r, a = K.run_trace(
                    st.adj, st.deg, st.stats, st.elist, st.epos, st.pair_i, st.pair_j,
                    theta.theta_e, theta.theta_c, kind, u, step0 + done, config.thin,
                    scratch, dummy[0], code, st.dyad_index, dummy[1], dummy[2],
                    np.zeros(6, dtype=np.int64), np.zeros(6, dtype=np.int64),
                )
            rows += r
            accepted += a
            done += k
        return rows, accepted

    advance(config.burn_in, 0, record=False)
    if track_graphs:
        code[0] = st.graph_code()
    if track_dyads:
        since[:] = config.burn_in
    sampled = config.steps - config.burn_in
    rows, accepted = advance(sampled, config.burn_in, record=True)
    dyad_frac = None
    if track_dyads:
        present = st.adj[st.pair_i, st.pair_j].astype(bool)
        on_time[present] += config.steps - since[present]
        dyad_frac = on_time / sampled if sampled else on_time
    tr = trace[:rows]
    return ChainResult(
        config=config,
        step=tr[:, 0].copy(),
        t_e=tr[:, 1].copy(),
        t_c=tr[:, 2].copy(),
        final=st.to_graph(),
        accepted=accepted,
        formation_proposals=prop,
        formation_accepts=acc,
        hist=hist if track_graphs else None,
        dyad_on_fraction=dyad_frac,
    )


def graph_code_stats(N: int) -> tuple[np.ndarray, np.ndarray]:
    """``(t_e, t_c)`` for every graph code on ``N`` vertices (small ``N``)."""
    iu, ju = np.triu_indices(N, 1)
    D = len(iu)
    codes = np.arange(1 << D, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(D)) & 1
    deg = np.zeros((len(codes), N), dtype=np.int64)
    np.add.at(deg.T, iu, bits.T)
    np.add.at(deg.T, ju, bits.T)
    return bits.sum(axis=1), (deg >= 2).sum(axis=1)


def _run_many(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- order-parameter experiment ----------------------------------------------------


@dataclass
class OrderParameterResult:
    """Per-temperature mean order parameter with normal-approximation 95% intervals."""

    phi_c: float
    N: int
    T_c: float
    ratios: np.ndarray
    draws: np.ndarray  # (grid, reps) final m of each chain
    config: dict = field(default_factory=dict)

    @property
    def temperatures(self) -> np.ndarray:
        return self.ratios * self.T_c

    @property
    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=1)

    @property
    def stderr(self) -> np.ndarray:
        reps = self.draws.shape[1]
        if reps < 2:
            return np.full(len(self.ratios), np.nan)
        return self.draws.std(axis=1, ddof=1) / math.sqrt(reps)

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        z = sps.norm.ppf(0.975)
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def crossing_ratio(self, level: float = 0.5) -> float | None:
        """Lowest ratio at which the mean falls through ``level``, linearly interpolated."""
        return crossing(self.ratios, self.mean, level)


def crossing(x, y, level: float = 0.5) -> float | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for k in range(len(x) - 1):
        a, b = y[k] - level, y[k + 1] - level
        if a == 0:
            return float(x[k])
        if a > 0 > b or a < 0 < b:
            return float(x[k] + (x[k + 1] - x[k]) * a / (a - b))
    return None


def mean_order_parameter_experiment(
    phi_c: float,
    N: int,
    ratios,
    reps: int,
    T_c: float,
    burn_in: int = 500_000,
    proposal: str = "tnt",
    seed: int = 0,
    workers: int = 1,
) -> OrderParameterResult:
    """Final order parameter of ``reps`` independent chains per grid temperature.

    Each chain starts from a Bernoulli graph whose density is drawn
    uniformly on [0, 1] and is run for ``burn_in`` steps.
    """
    ratios = np.asarray(ratios, dtype=float)

    def one(job):
        g_idx, r = job
        T = float(ratios[g_idx] * T_c)
        cfg = ChainConfig(
            N=N, params=PhysicalParams(T, phi_c), proposal=proposal, burn_in=burn_in,
            steps=burn_in, thin=max(burn_in, 1), seed=seed, key=(g_idx, r),
        )
        return run_chain(cfg).final.order_parameter

    jobs = [(g, r) for g in range(len(ratios)) for r in range(reps)]
    draws = np.array(_run_many(one, jobs, workers)).reshape(len(ratios), reps)
    config = {
        "phi_c": phi_c, "N": N, "T_c": T_c, "reps": reps, "burn_in": burn_in,
        "proposal": proposal, "seed": seed,
    }
    return OrderParameterResult(phi_c, N, T_c, ratios, draws, config)


# -- sparse-to-dense trajectories ---------------------------------------------------


class TransitionCaptureError(RuntimeError):
    pass


RECORD_DTYPE = np.dtype(
    [("step", np.int64), ("i", np.int32), ("j", np.int32), ("formed", np.bool_), ("cls", np.int8), ("m", np.float64)]
)


@dataclass
class TrajectorySummary:
    """Subsampled accepted toggles of one chain started in the sparse phase.

    ``records['m']`` is the order parameter just before each stored toggle.
    """

    attempt: int
    N: int
    start: Graph
    records: np.ndarray
    completed: bool
    steps: int
    accepted: int
    every: int
    final_m: float

    def replay(self) -> list[float]:
        """Re-apply stored toggles to the start graph, returning ``m`` before each.

        Only a complete log (``every == 1``) can be replayed.
        """
        if self.every != 1:
            raise ValueError("replay needs every accepted toggle (every=1)")
        g = self.start.copy()
        seen = []
        for rec in self.records:
            seen.append(g.order_parameter)
            g.toggle(int(rec["i"]), int(rec["j"]))
        return seen


def dense_target(N: int, threshold: float) -> int:
    """Smallest ``t_c`` with ``1 - t_c / N <= threshold``."""
    return int(math.ceil(N * (1.0 - threshold) - 1e-9))


def _capture_one(theta, N, start, step_cap, every, tc_target, kind, seed, attempt, buffer=1 << 14):
    rng = make_rng(seed, (attempt,))
    st = ChainState(start)
    n_acc = np.zeros(1, dtype=np.int64)
    records = []
    steps = 0
    reached = st.t_c >= tc_target
    u = None
    offset = 0
    while not reached and steps < step_cap:
        if u is None or offset >= len(u):
            u = rng.random((min(CHUNK, step_cap - steps), 3))
            offset = 0
        buf = np.zeros((buffer, 6), dtype=np.int64)
        used, written, reached = K.run_until(
            st.adj, st.deg, st.stats, st.elist, st.epos, st.pair_i, st.pair_j,
            theta.theta_e, theta.theta_c, kind, u[offset:], steps, tc_target, every, n_acc, buf,
        )
        records.append(buf[:written])
        offset += used
        steps += used
    raw = np.concatenate(records) if records else np.zeros((0, 6), dtype=np.int64)
    rec = np.zeros(len(raw), dtype=RECORD_DTYPE)
    rec["step"] = raw[:, 0]
    rec["i"] = raw[:, 1]
    rec["j"] = raw[:, 2]
    rec["formed"] = raw[:, 3].astype(bool)
    rec["cls"] = raw[:, 4]
    rec["m"] = 1.0 - raw[:, 5] / N
    return TrajectorySummary(attempt, N, start.copy(), rec, bool(reached), steps, int(n_acc[0]), every, st.m)


@dataclass
class CaptureResult:
    trajectories: list[TrajectorySummary]
    attempts: int
    discarded_final_m: list[float]

    @property
    def success_rate(self) -> float:
        return len(self.trajectories) / self.attempts if self.attempts else math.nan


def capture_transition_trajectories(
    params,
    N: int,
    count: int,
    step_cap: int = 50_000_000,
    every: int = 5,
    threshold: float = 0.05,
    seed: int = 0,
    start: Graph | None = None,
    proposal: str = "metropolis",
    min_success_rate: float = 0.01,
    min_attempts: int = 20,
    workers: int = 1,
) -> CaptureResult:
    """Sample chains from a sparse start until ``count`` of them reach the dense phase.

    A chain reaches the dense phase when ``m <= threshold``; chains still
    short of it after ``step_cap`` steps are discarded (rejection sampling).
    Every ``every``-th accepted toggle of a kept chain is stored. The
    default start is the empty graph; any start must have all degrees <= 1.
    """
    theta = as_theta(params)
    g0 = Graph(N) if start is None else start
    if g0.n != N or np.any(g0.degree > 1):
        raise ValueError("start graph must have order N and maximum degree <= 1")
    if every < 1 or count < 1:
        raise ValueError("every and count must be positive")
    kind = PROPOSALS[proposal]
    tc_target = dense_target(N, threshold)
    kept: list[TrajectorySummary] = []
    discarded: list[float] = []
    attempt = 0
    while len(kept) < count:
        batch = range(attempt, attempt + max(workers, 1))
        results = _run_many(
            lambda a: _capture_one(theta, N, g0, step_cap, every, tc_target, kind, seed, a), batch, workers
        )
        for tr in results:
            attempt += 1
            if tr.completed:
                kept.append(tr)
                if len(kept) == count:
                    break
            else:
                discarded.append(tr.final_m)
        if attempt >= min_attempts and len(kept) / attempt < min_success_rate:
            raise TransitionCaptureError(
                f"only {len(kept)} of {attempt} chains reached m <= {threshold} within {step_cap} steps "
                f"(floor {min_success_rate:.3g}); raise the step cap, move closer to the critical "
                f"temperature, or lower the floor"
            )
    return CaptureResult(kept, attempt, discarded)


# -- event tabulation ---------------------------------------------------------------

GROUP_MEMBERS = {
    DyadGroup.II_IC_CC: (DyadClass.II, DyadClass.IC, DyadClass.CC),
    DyadGroup.PI_PC: (DyadClass.PI, DyadClass.PC),
    DyadGroup.PP: (DyadClass.PP,),
}


@dataclass
class EventTally:
    """Formation events by dyad class, binned by the order parameter before the event.

    ``exposure[b]`` counts every stored transition (formation or
    dissolution) whose pre-event ``m`` falls in bin ``b``; rates are the
    fraction of those that are formations of a given class, estimated as
    the posterior mean of a binomial proportion under a Jeffreys
    Beta(1/2, 1/2) prior.
    """

    edges: np.ndarray
    counts: np.ndarray  # (bins, 6)
    exposure: np.ndarray  # (bins,)
    prior: str = "jeffreys"

    @property
    def n_bins(self) -> int:
        return len(self.exposure)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def _count(self, what) -> np.ndarray:
        if isinstance(what, DyadGroup):
            return self.counts[:, [c.value for c in GROUP_MEMBERS[what]]].sum(axis=1)
        return self.counts[:, DyadClass(what).value]

    def rate(self, what) -> np.ndarray:
        c = self._count(what)
        n = self.exposure
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, (c + 0.5) / (n + 1.0), np.nan)

    def interval(self, what, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        c = self._count(what)
        n = self.exposure
        a = (1 - level) / 2
        lo = sps.beta.ppf(a, c + 0.5, n - c + 0.5)
        hi = sps.beta.ppf(1 - a, c + 0.5, n - c + 0.5)
        return np.where(n > 0, lo, np.nan), np.where(n > 0, hi, np.nan)

    @property
    def populated(self) -> np.ndarray:
        return self.exposure > 0

    def rows(self):
        """``(bin_lo, bin_hi, label, count, exposure, rate, lo, hi)`` for classes and groups."""
        labels = [(c.name, c) for c in DyadClass] + [
            (g.value, g) for g in (DyadGroup.II_IC_CC, DyadGroup.PI_PC)
        ]
        for label, what in labels:
            c = self._count(what)
            r = self.rate(what)
            lo, hi = self.interval(what)
            for b in range(self.n_bins):
                yield (self.edges[b], self.edges[b + 1], label, int(c[b]), int(self.exposure[b]), r[b], lo[b], hi[b])

    def overtaking_m(self, leader=DyadClass.IC, other=DyadClass.II) -> float | None:
        """Upper edge of the largest run of low-``m`` bins in which ``leader`` outpaces ``other``.

        Starting from the lowest populated bin, bins are accepted while the
        ``leader`` rate strictly exceeds the ``other`` rate; returns ``None``
        when the lowest populated bin already fails.
        """
        r_lead, r_other = self.rate(leader), self.rate(other)
        edge = None
        for b in np.flatnonzero(self.populated):
            if r_lead[b] > r_other[b]:
                edge = float(self.edges[b + 1])
            else:
                break
        return edge


def tabulate_event_rates(trajectories, bin_width: float = 0.02) -> EventTally:
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("no trajectories to tabulate")
    n_bins = int(round(1.0 / bin_width))
    if not math.isclose(n_bins * bin_width, 1.0):
        raise ValueError("bin_width must divide 1")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts = np.zeros((n_bins, 6), dtype=np.int64)
    exposure = np.zeros(n_bins, dtype=np.int64)
    for tr in trajectories:
        rec = tr.records
        b = np.minimum(np.floor(rec["m"] / bin_width + 1e-9).astype(np.int64), n_bins - 1)
        exposure += np.bincount(b, minlength=n_bins)
        f = rec["formed"]
        np.add.at(counts, (b[f], rec["cls"][f].astype(np.int64)), 1)
    return EventTally(edges, counts, exposure)
