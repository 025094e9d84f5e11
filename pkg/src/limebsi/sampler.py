"""Random-walk Metropolis with burn-in step-size adaptation, plus split-R-hat and ESS."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

ADAPT_BATCH = 50
MAX_INIT_TRIES = 100


class SamplerSetupError(RuntimeError):
    pass


class DiagnosticError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    n_chains: int = 4
    n_steps: int = 50_000
    burn_in_fraction: float = 0.5
    initial_step_scales: tuple[float, ...] | None = None
    target_acceptance: float = 0.3
    seed: int = 0
    adapt: bool = True

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.initial_step_scales is not None:
            scales = tuple(float(s) for s in self.initial_step_scales)
            if not all(s > 0 and math.isfinite(s) for s in scales):
                raise ValueError("step scales must be positive and finite")
            object.__setattr__(self, "initial_step_scales", scales)
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_burn(self) -> int:
        return int(self.n_steps * self.burn_in_fraction)

    @property
    def n_keep(self) -> int:
        return self.n_steps - self.n_burn

    def chain_seed(self, chain: int) -> int:
        return (int(self.seed) + chain) % 2**64


@dataclass(frozen=True)
class SampleSet:
    """Post-burn-in draws, shape ``(n_chains, n_draws, n_params)``."""

    param_names: tuple[str, ...]
    draws: np.ndarray
    acceptance_rate: tuple[float, ...] = ()
    seed: int | None = None
    step_scales: tuple[tuple[float, ...], ...] = ()
    nonfinite_count: int = 0
    init_points: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim != 3 or draws.shape[2] != len(self.param_names):
            raise ValueError(f"draws must be (chains, rows, {len(self.param_names)}), got {draws.shape}")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "param_names", tuple(self.param_names))

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}; have {self.param_names}") from None

    def chains(self, name: str) -> np.ndarray:
        """(n_chains, n_draws) array for one parameter."""
        return self.draws[:, :, self.index(name)]

    def column(self, name: str) -> np.ndarray:
        """All draws of one parameter, chains concatenated."""
        return self.chains(name).reshape(-1)

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, len(self.param_names))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chain", "step", *self.param_names])
        for c in range(self.n_chains):
            for i in range(self.n_draws):
                w.writerow([c, i, *(repr(float(v)) for v in self.draws[c, i])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        with open(path, newline="") as f:
            rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
        if not rows or rows[0][:2] != ["chain", "step"]:
            raise ValueError(f"{path}: expected header starting with 'chain,step'")
        names = tuple(rows[0][2:])
        by_chain: dict[int, list[list[float]]] = {}
        for lineno, r in enumerate(rows[1:], start=2):
            try:
                by_chain.setdefault(int(r[0]), []).append([float(v) for v in r[2:]])
            except ValueError:
                raise ValueError(f"{path}: unparseable row {lineno}: {r}") from None
        lengths = {len(v) for v in by_chain.values()}
        if len(lengths) != 1:
            raise ValueError(f"{path}: chains have unequal lengths {sorted(lengths)}")
        draws = np.array([by_chain[k] for k in sorted(by_chain)])
        return cls(names, draws)


def adapt_step_scales(scales, accepted, target_acceptance: float, batch_index: int):
    """One stochastic-approximation update of the proposal scales.

    ``accepted`` holds the accept/reject flags of the latest batch. Scales are
    multiplied by ``exp(gain * (rate - target))`` with a gain that decays as
    ``1/sqrt(batch_index + 1)``, so persistent over-acceptance keeps growing
    them and persistent rejection keeps shrinking them.
    """
    rate = float(np.mean(accepted))
    gain = min(1.0, 3.0 / math.sqrt(batch_index + 1))
    return np.asarray(scales, dtype=float) * math.exp(gain * (rate - target_acceptance))


def _reshape_scales(scales, states):
    """Per-parameter scales proportional to the spread seen so far, keeping the
    overall size (geometric mean) that acceptance tuning has settled on."""
    spread = np.std(states, axis=0)
    if states.shape[0] < 20 or not np.all(spread > 0):
        return scales
    shaped = spread * 2.38 / math.sqrt(len(scales))
    return shaped * math.exp(np.mean(np.log(scales)) - np.mean(np.log(shaped)))


def _run_chain(log_target, x0, scales, config: ChainConfig, rng: np.random.Generator):
    d = x0.size
    n_burn, n_keep = config.n_burn, config.n_keep
    x = x0.copy()
    lp = float(log_target(x))
    out = np.empty((n_keep, d))
    accepted = np.zeros(config.n_steps, dtype=bool)
    nonfinite = 0
    scales = np.array(scales, dtype=float)
    reshape_at = {n_burn // 4, n_burn // 2} if config.adapt and n_burn >= 8 * ADAPT_BATCH else set()
    burn_states = np.empty((n_burn, d))
    last_reshape = 0

    block = 4096
    step = 0
    while step < config.n_steps:
        m = min(block, config.n_steps - step)
        noise = rng.standard_normal((m, d))
        log_u = np.log(rng.random(m))
        for j in range(m):
            prop = x + scales * noise[j]
            lp_prop = log_target(prop)
            if lp_prop != lp_prop or lp_prop == math.inf:
                nonfinite += 1
            elif log_u[j] < lp_prop - lp:
                x, lp = prop, float(lp_prop)
                accepted[step] = True
            if step < n_burn:
                burn_states[step] = x
                if config.adapt and (step + 1) % ADAPT_BATCH == 0:
                    b = (step + 1) // ADAPT_BATCH
                    scales = adapt_step_scales(scales, accepted[step + 1 - ADAPT_BATCH : step + 1], config.target_acceptance, b - 1)
                if step + 1 in reshape_at:
                    # later half of the window since the previous reshape
                    lo = (last_reshape + step + 1) // 2
                    scales = _reshape_scales(scales, burn_states[lo : step + 1])
                    last_reshape = step + 1
            else:
                out[step - n_burn] = x
            step += 1
    rate = float(np.mean(accepted[n_burn:]))
    return out, rate, tuple(float(s) for s in scales), nonfinite


def _chain_job(args):
    log_target, init, scales, config, chain = args
    rng = np.random.default_rng(config.chain_seed(chain))
    x0 = _initial_point(log_target, init, rng, chain)
    return (x0,) + _run_chain(log_target, x0, scales, config, rng)


def _initial_point(log_target, init, rng, chain):
    if callable(init):
        for _ in range(MAX_INIT_TRIES):
            x0 = np.asarray(init(rng), dtype=float)
            if math.isfinite(log_target(x0)):
                return x0
        raise SamplerSetupError(f"chain {chain}: no finite starting point after {MAX_INIT_TRIES} draws")
    x0 = np.asarray(init, dtype=float)
    if x0.ndim == 2:
        x0 = x0[chain]
    lp = log_target(x0)
    if not math.isfinite(lp):
        raise SamplerSetupError(f"chain {chain}: log target at initial point {x0.tolist()} is {lp}")
    return x0.copy()


def rw_metropolis(
    log_target: Callable[[np.ndarray], float],
    init,
    config: ChainConfig,
    param_names: Sequence[str] | None = None,
    workers: int = 1,
) -> SampleSet:
    """Random-walk Metropolis over ``config.n_chains`` independent chains.

    ``init`` is one start vector shared by all chains, an ``(n_chains, d)``
    array, or a callable ``init(rng) -> vector`` (a prior draw) that is retried
    until the target is finite. Chain ``k`` draws from
    ``default_rng(seed + k)``, so results do not depend on ``workers``.
    ``log_target`` must be picklable when ``workers > 1``.
    """
    if callable(init):
        probe = np.asarray(init(np.random.default_rng(config.seed)), dtype=float)
        d = probe.size
    else:
        arr = np.asarray(init, dtype=float)
        d = arr.shape[-1] if arr.ndim == 2 else arr.size
        if arr.ndim == 2 and arr.shape[0] != config.n_chains:
            raise SamplerSetupError(f"init has {arr.shape[0]} rows for {config.n_chains} chains")
    if param_names is None:
        param_names = tuple(f"x{i}" for i in range(d))
    if len(param_names) != d:
        raise SamplerSetupError(f"{len(param_names)} names for a {d}-dimensional target")
    if config.initial_step_scales is None:
        scales = np.ones(d)
    else:
        scales = np.array(config.initial_step_scales, dtype=float)
        if scales.size != d:
            raise SamplerSetupError(f"{scales.size} step scales for a {d}-dimensional target")

    jobs = [(log_target, init, scales, config, c) for c in range(config.n_chains)]
    if workers > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]

    nonfinite = sum(r[4] for r in results)
    if nonfinite:
        log.warning("%d proposals had a non-finite log target and were rejected", nonfinite)
    return SampleSet(
        param_names=tuple(param_names),
        draws=np.stack([r[1] for r in results]),
        acceptance_rate=tuple(r[2] for r in results),
        seed=int(config.seed),
        step_scales=tuple(r[3] for r in results),
        nonfinite_count=nonfinite,
        init_points=tuple(tuple(float(v) for v in r[0]) for r in results),
    )


def _as_chains(samples) -> np.ndarray:
    """(n_chains, n_draws, n_params) view of a SampleSet or raw array."""
    if isinstance(samples, SampleSet):
        return samples.draws
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _split(x: np.ndarray) -> np.ndarray:
    # x: (chains, draws); drop the middle draw when odd
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half :]], axis=0)


def _rhat_1d(x: np.ndarray) -> float:
    m, n = x.shape
    chain_means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * chain_means.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else math.inf
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def split_rhat(samples) -> np.ndarray:
    """Split potential scale reduction factor, one value per parameter.

    Each chain is cut in half and the classic between/within variance ratio is
    computed over the ``2 * n_chains`` segments. Constant draws give 1.
    """
    arr = _as_chains(samples)
    if arr.shape[0] < 2 or arr.shape[1] < 4:
        raise DiagnosticError(f"split R-hat needs >= 2 chains of >= 4 draws, got {arr.shape[:2]}")
    return np.array([_rhat_1d(_split(arr[:, :, k])) for k in range(arr.shape[2])])


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT."""
    n = x.shape[-1]
    xc = x - x.mean(axis=-1, keepdims=True)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, n=nfft, axis=-1)
    return np.fft.irfft(f * np.conj(f), n=nfft, axis=-1)[..., :n] / n


def _ess_1d(x: np.ndarray) -> float:
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = chain_var.mean()
    var_plus = w * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus == 0:
        return float(m * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer: sum consecutive pairs while they stay positive, forced monotone
    total = 0.0
    prev_pair = math.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        total += pair
        prev_pair = pair
        t += 2
    tau = -1.0 + 2.0 * total
    if tau <= 0:
        # negatively correlated chains: cap as commonly done at N log10 N
        tau = 1.0 / math.log10(max(m * n, 10))
    return float(min(m * n / tau, m * n * math.log10(max(m * n, 10))))


def effective_sample_size(samples) -> np.ndarray:
    """Multi-chain autocorrelation ESS with Geyer's initial positive sequence."""
    arr = _as_chains(samples)
    if arr.shape[0] < 1 or arr.shape[1] < 4:
        raise DiagnosticError(f"ESS needs chains of >= 4 draws, got {arr.shape[:2]}")
    return np.array([_ess_1d(arr[:, :, k]) for k in range(arr.shape[2])])


def diagnostics(samples: SampleSet) -> dict:
    """JSON-ready block of R-hat, ESS and acceptance statistics."""
    out: dict = {"param_names": list(samples.param_names), "n_chains": samples.n_chains, "n_draws_per_chain": samples.n_draws}
    if samples.n_chains >= 2 and samples.n_draws >= 4:
        out["rhat"] = dict(zip(samples.param_names, (float(v) for v in split_rhat(samples))))
    else:
        out["rhat"] = None
    out["ess"] = dict(zip(samples.param_names, (float(v) for v in effective_sample_size(samples))))
    out["acceptance_rate"] = [float(a) for a in samples.acceptance_rate] or None
    out["step_scales"] = [list(s) for s in samples.step_scales] or None
    out["nonfinite_proposals"] = int(samples.nonfinite_count)
    out["seed"] = samples.seed
    return out


def converged(diag: dict, threshold: float = 1.05) -> bool:
    rhat = diag.get("rhat")
    return rhat is not None and all(v < threshold for v in rhat.values())
