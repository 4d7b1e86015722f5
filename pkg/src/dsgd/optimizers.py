"""The outer SGD loop with constant, plateau-decay and Adam step rules."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import GradientEstimate
from .rng import RngStream, as_stream

STRATEGIES = ("constant", "plateau-decay", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    strategy: str = "constant"
    alpha0: float = 0.01
    window: int = 20
    decay_factor: float = 2.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_steps: int = 1000
    target_loss: float | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.window < 1:
            raise ValueError("decay window must be at least 1")
        if not self.decay_factor > 1:
            raise ValueError("decay factor must exceed 1")


@dataclass(frozen=True)
class OptimizerState:
    theta: np.ndarray
    t: int = 0
    alpha: float = 0.01
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    losses: tuple[float, ...] = ()
    last_decay: int = 0

    @classmethod
    def initial(cls, theta0, config: OptimizerConfig) -> OptimizerState:
        theta = np.array(theta0, dtype=float)
        zeros = np.zeros_like(theta)
        return cls(theta, 0, config.alpha0, zeros, zeros.copy())


def plateau_reached(losses, window: int) -> bool:
    """The best of the last ``window`` losses is no better than the best before them."""
    if len(losses) <= window:
        return False
    return min(losses[-window:]) >= min(losses[:-window])


def step(state: OptimizerState, estimate: GradientEstimate | np.ndarray, config: OptimizerConfig,
         loss_observation: float | None = None) -> OptimizerState:
    """One update. A loss observation is recorded (and may trigger decay) before theta moves.

    Plateau decay halves alpha when :func:`plateau_reached` holds and at least
    ``window`` steps have passed since the previous halving.
    """
    g = np.asarray(estimate.values if isinstance(estimate, GradientEstimate) else estimate, dtype=float)
    if g.shape != state.theta.shape:
        raise ValueError(f"gradient has shape {g.shape}, parameters have {state.theta.shape}")
    t = state.t + 1
    alpha, losses, last_decay = state.alpha, state.losses, state.last_decay
    if loss_observation is not None:
        losses = losses + (float(loss_observation),)
    if config.strategy == "plateau-decay":
        if loss_observation is None:
            raise ValueError("plateau decay needs a loss observation every step")
        if t - last_decay >= config.window and plateau_reached(losses, config.window):
            alpha /= config.decay_factor
            last_decay = t
    m, v = state.m, state.v
    if config.strategy == "adam":
        m = config.beta1 * m + (1 - config.beta1) * g
        v = config.beta2 * v + (1 - config.beta2) * g * g
        mhat = m / (1 - config.beta1 ** t)
        vhat = v / (1 - config.beta2 ** t)
        theta = state.theta - alpha * mhat / (np.sqrt(vhat) + config.epsilon)
    else:
        theta = state.theta - alpha * g
    return OptimizerState(theta, t, alpha, m, v, losses, last_decay)


@dataclass
class RunTrace:
    """Rows ``t = 0..T``: loss at theta^(t), and the step that produced theta^(t).

    Row 0 holds the initial point with zero cost and a NaN gradient norm.
    """

    step: np.ndarray
    loss: np.ndarray
    alpha: np.ndarray
    grad_norm: np.ndarray
    meas_cum: np.ndarray
    circ_cum: np.ndarray
    theta: np.ndarray
    snapshots: dict = field(default_factory=dict)

    COLUMNS = ("step", "loss", "alpha", "grad_norm", "meas_cum", "circ_cum")

    def __len__(self):
        return self.step.shape[0]

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1])

    def rows(self):
        for i in range(len(self)):
            yield tuple(getattr(self, c)[i] for c in self.COLUMNS)

    def first_reaching(self, threshold: float, axis: str = "meas_cum") -> float:
        """Value of ``axis`` at the first row with ``loss <= threshold`` (inf if never)."""
        hit = np.flatnonzero(self.loss <= threshold)
        return float(getattr(self, axis)[hit[0]]) if hit.size else float("inf")


GradFn = Callable[[np.ndarray, int, RngStream], GradientEstimate]


def run(loss_fn: Callable[[np.ndarray], float], grad_fn: GradFn, theta0, config: OptimizerConfig,
        rng: RngStream | int, callback: Callable[[int, tuple], None] | None = None,
        snapshot_every: int = 0) -> RunTrace:
    """Iterate ``theta <- update(theta, grad_fn(theta, t, rng.child(t)))`` for ``config.max_steps`` steps.

    ``loss_fn`` is the exact monitored loss; it drives plateau decay and the
    optional early stop at ``config.target_loss`` but is never charged to the
    measurement ledger.
    """
    T = config.max_steps
    if T < 1:
        raise ValueError("max_steps must be at least 1")
    stream = as_stream(rng)
    state = OptimizerState.initial(theta0, config)
    cols = {c: [] for c in RunTrace.COLUMNS}
    snapshots = {}
    meas = circ = 0

    def record(t, loss, gnorm):
        row = (t, loss, state.alpha, gnorm, meas, circ)
        for c, val in zip(RunTrace.COLUMNS, row):
            cols[c].append(val)
        if snapshot_every and t % snapshot_every == 0:
            snapshots[t] = state.theta.copy()
        if callback is not None:
            callback(t, row)

    loss = float(loss_fn(state.theta))
    record(0, loss, float("nan"))
    for t in range(1, T + 1):
        if config.target_loss is not None and loss <= config.target_loss:
            break
        try:
            est = grad_fn(state.theta, t, stream.child(t))
        except Exception as exc:
            raise RuntimeError(f"gradient estimation failed at step {t}: {exc}") from exc
        meas += int(est.measurements_used)
        circ += int(est.circuits_executed)
        state = step(state, est, config, loss_observation=loss)
        loss = float(loss_fn(state.theta))
        record(t, loss, float(np.linalg.norm(est.values)))
    return RunTrace(
        step=np.array(cols["step"], dtype=np.int64),
        loss=np.array(cols["loss"]),
        alpha=np.array(cols["alpha"]),
        grad_norm=np.array(cols["grad_norm"]),
        meas_cum=np.array(cols["meas_cum"], dtype=np.int64),
        circ_cum=np.array(cols["circ_cum"], dtype=np.int64),
        theta=state.theta.copy(),
        snapshots=snapshots,
    )


def with_steps(config: OptimizerConfig, max_steps: int) -> OptimizerConfig:
    return replace(config, max_steps=max_steps)
