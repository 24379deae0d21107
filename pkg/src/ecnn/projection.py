"""Single-neuron weight fitting by an iterative projection rule.

The weights are adjusted on a fitting part of the data while a residual
square error is monitored on a held-out validation part; training stops
once the validation error stalls (or drops below a known noise level).
The final validation error is the neuron's regularity criterion, used by
the cascade builder to accept or reject the neuron.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericError
from .util import derive_rng


@dataclass
class TrainConfig:
    """Knobs for fitting a single neuron.

    Attributes
    ----------
    chi : float
        Learning rate of the projection update. Values in (1, 2] are the
        intended range; anything else positive triggers a warning, and
        non-positive values are rejected.
    delta : float
        Minimal decrease of the validation error between consecutive
        steps; training stops once the decrease falls below it (this also
        covers the case of the error going back up).
    epsilon : float or None
        Known noise level. When set, training stops as soon as the
        validation error drops to it, and ``delta`` is not consulted.
    max_steps : int
        Safety cap on update steps.
    init_std : float
        Standard deviation of the zero-mean Gaussian weight init.
    split_fraction : float
        Fraction of the training data used for fitting (part A); the rest
        validates (part B).
    seed : int
        Base seed for weight initialization when no generator is passed.
    """

    chi: float = 1.9
    delta: float = 0.0015
    epsilon: float | None = None
    max_steps: int = 200
    init_std: float = 0.1
    split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.chi <= 0:
            raise ConfigError(f"chi must be positive, got {self.chi}")
        if not 1.0 < self.chi <= 2.0:
            warnings.warn(
                f"chi={self.chi} is outside the intended range (1, 2]", stacklevel=3
            )
        if self.delta <= 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.init_std <= 0:
            raise ConfigError(f"init_std must be positive, got {self.init_std}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must be in (0,1), got {self.split_fraction}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "max_steps": self.max_steps,
            "init_std": self.init_std,
            "split_fraction": self.split_fraction,
            "seed": self.seed,
        }


@dataclass
class FitResult:
    """Outcome of :func:`fit_neuron`.

    ``weights`` holds the input weights with the bias appended as the last
    component. ``criterion`` is the validation error at the stopping step,
    which is always the last entry of ``rse_trace_b`` (whose first entry
    is the pre-training error of the random init).
    """

    weights: np.ndarray
    criterion: float
    steps_taken: int
    rse_trace_b: np.ndarray = field(repr=False)

    @property
    def input_weights(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def bias(self) -> float:
        return float(self.weights[-1])


def sigmoid(a):
    """Logistic function 1/(1 + exp(-a)), elementwise.

    Monotone, symmetric about 0 (``sigmoid(a) + sigmoid(-a) == 1``), and
    saturating to exactly 0.0 / 1.0 in float for large ``|a|``.
    """
    out = expit(a)
    if np.ndim(a) == 0:
        return float(out)
    return out


def neuron_forward(u, w, bias: float = 0.0):
    """Sigmoid of the weighted input sum.

    ``u`` is either a single input vector of length p or a (p, q) matrix
    whose columns are examples; ``w`` has length p.
    """
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or u.shape[0] != w.shape[0]:
        raise ValueError(f"shape mismatch: inputs {u.shape} vs weights {w.shape}")
    return sigmoid(bias + w @ u)


def error_vector(inputs: np.ndarray, w: np.ndarray, bias: float, targets: np.ndarray) -> np.ndarray:
    """Per-example residual: neuron output minus target, over matrix columns."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError(f"inputs must be a (p, q) matrix, got shape {inputs.shape}")
    if targets.shape != (inputs.shape[1],):
        raise ValueError(
            f"targets length {targets.shape} does not match {inputs.shape[1]} columns"
        )
    return neuron_forward(inputs, w, bias) - targets


def rse(eta) -> float:
    """Residual square error: the Euclidean norm of a residual vector."""
    return float(np.linalg.norm(np.asarray(eta, dtype=np.float64)))


def projection_step(w: np.ndarray, inputs: np.ndarray, errors: np.ndarray, chi: float) -> np.ndarray:
    """One weight update: ``w - chi * inputs @ errors / ||inputs||_F^2``.

    ``inputs`` is the (p, q) matrix of fitting examples as columns (with a
    constant-1 row already appended if a bias is being fit). The Frobenius
    norm of the whole matrix scales the step.
    """
    w = np.asarray(w, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if inputs.ndim != 2 or w.shape != (inputs.shape[0],) or errors.shape != (inputs.shape[1],):
        raise ValueError(
            f"shape mismatch: weights {w.shape}, inputs {inputs.shape}, errors {errors.shape}"
        )
    norm_sq = float(np.sum(inputs * inputs))
    if norm_sq == 0.0:
        raise NumericError("projection step undefined for an all-zero input matrix")
    return w - (chi / norm_sq) * (inputs @ errors)


def augment_bias(inputs: np.ndarray) -> np.ndarray:
    """Append a constant-1 row so the bias trains like any other weight."""
    inputs = np.asarray(inputs, dtype=np.float64)
    return np.vstack([inputs, np.ones((1, inputs.shape[1]))])


def fit_neuron(
    inputs_a: np.ndarray,
    targets_a: np.ndarray,
    inputs_b: np.ndarray,
    targets_b: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> FitResult:
    """Fit one sigmoid neuron on part A while validating on part B.

    Parameters
    ----------
    inputs_a, inputs_b : ndarray, shape (p, n_a) and (p, n_b)
        Input matrices with examples as columns (no bias row; it is
        appended internally).
    targets_a, targets_b : ndarray
        Target values per column.
    cfg : TrainConfig
    rng : Generator, optional
        Source for the weight init. Defaults to a stream derived from
        ``cfg.seed``.

    Returns
    -------
    FitResult
        Weights at the stopping step and the validation-error trace. When
        ``cfg.epsilon`` is set, stops at the first step whose validation
        error is at or below it; otherwise stops once the step-to-step
        decrease falls under ``cfg.delta``; always stops at
        ``cfg.max_steps``.
    """
    inputs_a = np.asarray(inputs_a, dtype=np.float64)
    inputs_b = np.asarray(inputs_b, dtype=np.float64)
    targets_a = np.asarray(targets_a, dtype=np.float64)
    targets_b = np.asarray(targets_b, dtype=np.float64)
    if inputs_a.ndim != 2 or inputs_b.ndim != 2:
        raise ValueError("input matrices must be 2-D (features x examples)")
    if inputs_a.shape[0] != inputs_b.shape[0]:
        raise ValueError(
            f"part A has {inputs_a.shape[0]} input rows but part B has {inputs_b.shape[0]}"
        )
    if inputs_a.shape[1] == 0 or inputs_b.shape[1] == 0:
        raise ValueError("both data parts must be non-empty")
    if targets_a.shape != (inputs_a.shape[1],) or targets_b.shape != (inputs_b.shape[1],):
        raise ValueError("target lengths do not match input columns")
    if not np.any(inputs_a):
        raise NumericError("cannot fit a neuron on an all-zero input matrix")

    if rng is None:
        rng = derive_rng(cfg.seed, "fit-neuron")

    u_a = augment_bias(inputs_a)
    u_b = augment_bias(inputs_b)
    p_aug = u_a.shape[0]
    norm_sq = float(np.sum(u_a * u_a))
    w = rng.normal(0.0, cfg.init_std, size=p_aug)

    def validation_error(wv: np.ndarray) -> float:
        return rse(sigmoid(wv @ u_b) - targets_b)

    trace = [validation_error(w)]
    steps = 0
    if cfg.epsilon is not None and trace[0] <= cfg.epsilon:
        return FitResult(w, trace[0], 0, np.asarray(trace))

    for k in range(1, cfg.max_steps + 1):
        eta_a = sigmoid(w @ u_a) - targets_a
        w = w - (cfg.chi / norm_sq) * (u_a @ eta_a)
        if not np.all(np.isfinite(w)):
            raise NumericError(f"non-finite weights at step {k}")
        e_b = validation_error(w)
        trace.append(e_b)
        steps = k
        if cfg.epsilon is not None:
            if e_b <= cfg.epsilon:
                break
        elif trace[-2] - trace[-1] < cfg.delta:
            break

    return FitResult(w, trace[-1], steps, np.asarray(trace))
