"""Learnable linear reward over normalised components, and its training.

The reward of a point is ``sum_i w_i * phi_i(c_i)`` where each ``phi_i`` is
a sigmoid (for maximise/minimise style components) or a Gaussian bump (for
components with an optimal range). Weights are kept positive through
``w = softplus(u)`` and Gaussian widths through ``sigma = exp(log_width)``,
so every raw parameter is unconstrained.

Parameter vectors are laid out as ``[u_1..u_N, p_1a, p_1b, ..., p_Na, p_Nb]``
where ``(p_a, p_b)`` is ``(slope, midpoint)`` for a sigmoid and
``(mean, log_width)`` for a Gaussian.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import CohortTable, DesignPoint, fmt
from .errors import DimensionMismatch, EmptyPairs, NonFiniteLoss, UnknownId
from .pareto import PreferencePair


class TransformKind(enum.Enum):
    SIGMOID = "sigmoid"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, text: str) -> "TransformKind":
        t = text.strip().lower()
        aliases = {"s": cls.SIGMOID, "sig": cls.SIGMOID, "g": cls.GAUSSIAN, "gauss": cls.GAUSSIAN}
        if t in aliases:
            return aliases[t]
        return cls(t)


@dataclass(frozen=True)
class TransformParams:
    kind: TransformKind
    params: tuple[float, float]

    @classmethod
    def sigmoid(cls, slope: float, midpoint: float) -> "TransformParams":
        return cls(TransformKind.SIGMOID, (float(slope), float(midpoint)))

    @classmethod
    def gaussian(cls, mean: float, log_width: float) -> "TransformParams":
        return cls(TransformKind.GAUSSIAN, (float(mean), float(log_width)))

    @property
    def slope(self) -> float:
        self._expect(TransformKind.SIGMOID)
        return self.params[0]

    @property
    def midpoint(self) -> float:
        self._expect(TransformKind.SIGMOID)
        return self.params[1]

    @property
    def mean(self) -> float:
        self._expect(TransformKind.GAUSSIAN)
        return self.params[0]

    @property
    def log_width(self) -> float:
        self._expect(TransformKind.GAUSSIAN)
        return self.params[1]

    @property
    def width(self) -> float:
        return math.exp(self.log_width)

    def _expect(self, kind):
        if self.kind is not kind:
            raise AttributeError(f"{self.kind.value} transform has no such parameter")

    def __call__(self, x):
        a, b = self.params
        if self.kind is TransformKind.SIGMOID:
            return normalize_sigmoid(x, a, b)
        return normalize_gaussian(x, a, b)

    def to_dict(self) -> dict:
        if self.kind is TransformKind.SIGMOID:
            return {"kind": "sigmoid", "slope": self.params[0], "midpoint": self.params[1]}
        return {"kind": "gaussian", "mean": self.params[0], "log_width": self.params[1]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformParams":
        kind = TransformKind(doc["kind"])
        if kind is TransformKind.SIGMOID:
            return cls.sigmoid(doc["slope"], doc["midpoint"])
        return cls.gaussian(doc["mean"], doc["log_width"])


def normalize_sigmoid(x, k, x0):
    """Logistic ``1 / (1 + exp(-k (x - x0)))``, overflow-free."""
    return expit(np.multiply(k, np.subtract(x, x0)))


def normalize_gaussian(x, mu, log_width):
    """Unnormalised Gaussian bump ``exp(-(x - mu)^2 / (2 sigma^2))``."""
    z = np.subtract(x, mu) * np.exp(-np.asarray(log_width, dtype=float))
    return np.exp(-0.5 * z * z)


def softplus(u):
    return np.logaddexp(0.0, u)


@dataclass(frozen=True)
class RewardModel:
    transforms: tuple[TransformParams, ...]
    weight_raw: tuple[float, ...]
    seed: int = 0
    # Fixed affine input scaling: transforms see (c - center) / scale.
    input_center: tuple[float, ...] | None = None
    input_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.transforms) != len(self.weight_raw):
            raise DimensionMismatch("one raw weight per transform is required")
        for v in (self.input_center, self.input_scale):
            if v is not None and len(v) != len(self.transforms):
                raise DimensionMismatch("input scaling must have one entry per component")
        if self.input_scale is not None and any(not s > 0 for s in self.input_scale):
            raise ValueError("input scales must be positive")

    def inputs(self, components: np.ndarray) -> np.ndarray:
        """Apply the fixed input scaling to a component matrix."""
        C = components
        if self.input_center is not None:
            C = C - np.asarray(self.input_center)
        if self.input_scale is not None:
            C = C / np.asarray(self.input_scale)
        return C

    def with_theta(self, theta) -> "RewardModel":
        fresh = RewardModel.from_theta(self.kinds, theta, self.seed)
        return replace(fresh, input_center=self.input_center, input_scale=self.input_scale)

    @property
    def N(self) -> int:
        return len(self.transforms)

    @property
    def kinds(self) -> tuple[TransformKind, ...]:
        return tuple(t.kind for t in self.transforms)

    @property
    def weights(self) -> np.ndarray:
        return softplus(np.asarray(self.weight_raw, dtype=float))

    @property
    def theta(self) -> np.ndarray:
        tp = [v for t in self.transforms for v in t.params]
        return np.array(list(self.weight_raw) + tp, dtype=float)

    @classmethod
    def from_theta(cls, kinds: Sequence[TransformKind], theta, seed: int = 0) -> "RewardModel":
        theta = np.asarray(theta, dtype=float)
        n = len(kinds)
        if theta.shape != (3 * n,):
            raise DimensionMismatch(f"expected {3 * n} parameters, got {theta.shape}")
        tps = theta[n:].reshape(n, 2)
        transforms = tuple(
            TransformParams(k, (float(a), float(b))) for k, (a, b) in zip(kinds, tps)
        )
        return cls(transforms, tuple(float(u) for u in theta[:n]), seed)

    def score(self, components) -> np.ndarray:
        """Rewards for a matrix of component rows."""
        C = np.asarray(components, dtype=float)
        if C.ndim == 1:
            C = C[None, :]
        if C.shape[1] != self.N:
            raise DimensionMismatch(f"model has {self.N} components, input has {C.shape[1]}")
        return _forward(self.theta, _sigmoid_mask(self.kinds), self.inputs(C))[0]

    def to_dict(self) -> dict:
        doc = {
            "transforms": [t.to_dict() for t in self.transforms],
            "weight_raw": list(self.weight_raw),
            "seed": self.seed,
        }
        if self.input_center is not None:
            doc["input_center"] = list(self.input_center)
        if self.input_scale is not None:
            doc["input_scale"] = list(self.input_scale)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RewardModel":
        def opt(key):
            v = doc.get(key)
            return None if v is None else tuple(float(x) for x in v)

        return cls(
            tuple(TransformParams.from_dict(t) for t in doc["transforms"]),
            tuple(float(u) for u in doc["weight_raw"]),
            int(doc.get("seed", 0)),
            opt("input_center"),
            opt("input_scale"),
        )

    def dumps(self) -> str:
        """JSON text with every real written at 17 significant digits."""
        def obj(d):
            items = []
            for k, v in d.items():
                val = json.dumps(v) if isinstance(v, str) else fmt(v)
                items.append(f'"{k}": {val}')
            return "{" + ", ".join(items) + "}"

        transforms = ",\n    ".join(obj(t.to_dict()) for t in self.transforms)
        weights = ", ".join(fmt(u) for u in self.weight_raw)
        extra = ""
        for key, vals in (("input_center", self.input_center), ("input_scale", self.input_scale)):
            if vals is not None:
                extra += f',\n  "{key}": [' + ", ".join(fmt(v) for v in vals) + "]"
        return (
            "{\n"
            f'  "transforms": [\n    {transforms}\n  ],\n'
            f'  "weight_raw": [{weights}],\n'
            f'  "seed": {int(self.seed)}{extra}\n'
            "}\n"
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RewardModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid_mask(kinds) -> np.ndarray:
    return np.array([k is TransformKind.SIGMOID for k in kinds], dtype=bool)


def _forward(theta: np.ndarray, is_sig: np.ndarray, C: np.ndarray, with_grad: bool = False):
    """Rewards for rows of ``C`` and, optionally, per-row partials.

    Returns ``(r, phi, dphi_a, dphi_b, w)`` where the partials are the
    derivatives of each normalised component with respect to the two
    transform parameters.
    """
    n = is_sig.size
    u = theta[:n]
    tp = theta[n:].reshape(n, 2)
    pa, pb = tp[:, 0], tp[:, 1]
    w = softplus(u)

    # Sigmoid columns: pa = slope, pb = midpoint.
    diff_s = C - pb
    z = pa * diff_s
    sig = expit(z)
    # Gaussian columns: pa = mean, pb = log width.
    diff_g = C - pa
    inv_var = np.exp(-2.0 * pb)
    q = diff_g * diff_g * inv_var
    gauss = np.exp(-0.5 * q)

    phi = np.where(is_sig, sig, gauss)
    r = phi @ w
    if not with_grad:
        return r, phi
    sig_slope = sig * expit(-z)
    dphi_a = np.where(is_sig, sig_slope * diff_s, gauss * diff_g * inv_var)
    dphi_b = np.where(is_sig, -sig_slope * pa, gauss * q)
    return r, phi, dphi_a, dphi_b, w


def reward(model: RewardModel, point: DesignPoint) -> float:
    """Reward of one design point (uses its component vector)."""
    if len(point.components) != model.N:
        raise DimensionMismatch(f"point has {len(point.components)} components, model has {model.N}")
    return float(model.score(point.components)[0])


def pref_prob(r1, r2):
    """Probability that the item scored ``r1`` is preferred over ``r2``."""
    return expit(np.subtract(r1, r2))


def _pair_indices(pairs: Sequence[PreferencePair], table: CohortTable) -> tuple[np.ndarray, np.ndarray]:
    if len(pairs) == 0:
        raise EmptyPairs("no preference pairs given")
    index = table.index
    try:
        wi = np.fromiter((index[p.winner_id] for p in pairs), dtype=np.int64, count=len(pairs))
    except KeyError as e:
        raise UnknownId(e.args[0]) from None
    try:
        li = np.fromiter((index[p.loser_id] for p in pairs), dtype=np.int64, count=len(pairs))
    except KeyError as e:
        raise UnknownId(e.args[0]) from None
    return wi, li


def _check_components(model: RewardModel, table: CohortTable):
    if table.N != model.N:
        raise DimensionMismatch(f"table has {table.N} components, model has {model.N}")


def _loss_and_grad(theta, is_sig, C, wi, li, with_grad=True):
    """Summed pair loss and its gradient with respect to ``theta``."""
    if not with_grad:
        r, _ = _forward(theta, is_sig, C)
        return float(np.sum(np.logaddexp(0.0, r[li] - r[wi]))), None
    r, phi, dphi_a, dphi_b, w = _forward(theta, is_sig, C, with_grad=True)
    margin = r[li] - r[wi]
    total = float(np.sum(np.logaddexp(0.0, margin)))
    g = expit(margin)  # 1 - P(winner preferred)
    n_rows = C.shape[0]
    coef = np.bincount(li, weights=g, minlength=n_rows) - np.bincount(wi, weights=g, minlength=n_rows)
    n = is_sig.size
    grad = np.empty(3 * n)
    grad[:n] = (coef @ phi) * expit(theta[:n])
    tp = grad[n:].reshape(n, 2)
    tp[:, 0] = (coef @ dphi_a) * w
    tp[:, 1] = (coef @ dphi_b) * w
    return total, grad


def loss(model: RewardModel, pairs: Sequence[PreferencePair], table: CohortTable) -> float:
    """Cross-entropy of the preference model over ``pairs`` (summed)."""
    _check_components(model, table)
    wi, li = _pair_indices(pairs, table)
    C = model.inputs(table.component_matrix)
    return _loss_and_grad(model.theta, _sigmoid_mask(model.kinds), C, wi, li, False)[0]


def loss_gradient(model: RewardModel, pairs: Sequence[PreferencePair], table: CohortTable) -> np.ndarray:
    """Analytic gradient of :func:`loss` with respect to ``model.theta``."""
    _check_components(model, table)
    wi, li = _pair_indices(pairs, table)
    C = model.inputs(table.component_matrix)
    return _loss_and_grad(model.theta, _sigmoid_mask(model.kinds), C, wi, li)[1]


def init_model(
    kinds: Sequence[TransformKind | str],
    seed: int = 0,
    components: np.ndarray | None = None,
) -> RewardModel:
    """Fresh model with every raw parameter drawn from a standard normal.

    If ``components`` is given, the model standardises its inputs with
    their column means and standard deviations, so the unit-normal draws
    for midpoints, means and widths land on the scale of the data.
    """
    if len(kinds) < 1:
        raise ValueError("at least one component is required")
    kinds = [k if isinstance(k, TransformKind) else TransformKind.parse(k) for k in kinds]
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(3 * len(kinds))
    model = RewardModel.from_theta(kinds, theta, seed)
    if components is None:
        return model
    C = np.atleast_2d(np.asarray(components, dtype=float))
    if C.shape[1] != len(kinds):
        raise DimensionMismatch(f"{len(kinds)} kinds given for {C.shape[1]} component columns")
    scale = C.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return replace(
        model,
        input_center=tuple(float(v) for v in C.mean(axis=0)),
        input_scale=tuple(float(v) for v in scale),
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    step_size: float = 0.01
    max_pairs_per_epoch: int = 10_000
    optimizer: str = "adam"  # or "gd"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_pairs_per_epoch < 1:
            raise ValueError("max_pairs_per_epoch must be >= 1")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    loss_per_epoch: list[float] = field(default_factory=list)
    final_pair_accuracy: float = float("nan")


def train(
    model: RewardModel,
    pairs: Sequence[PreferencePair],
    table: CohortTable,
    config: TrainConfig = TrainConfig(),
) -> tuple[RewardModel, TrainReport]:
    """Minimise the mean pair loss; returns the trained model and a report.

    Pairs are put in canonical order first, so the result depends only on
    the pair set and ``config.seed``. When there are more pairs than
    ``max_pairs_per_epoch`` each epoch draws a fresh subsample without
    replacement.
    """
    _check_components(model, table)
    pairs = sorted(pairs)
    wi, li = _pair_indices(pairs, table)
    return _train_indices(model, wi, li, model.inputs(table.component_matrix), config)


def _train_indices(model, wi, li, C, config):
    is_sig = _sigmoid_mask(model.kinds)
    theta = model.theta.copy()
    rng = np.random.default_rng(config.seed)
    n_pairs = wi.size
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    report = TrainReport()
    for epoch in range(1, config.epochs + 1):
        if n_pairs > config.max_pairs_per_epoch:
            sel = np.sort(rng.choice(n_pairs, size=config.max_pairs_per_epoch, replace=False))
            bw, bl = wi[sel], li[sel]
        else:
            bw, bl = wi, li
        total, grad = _loss_and_grad(theta, is_sig, C, bw, bl)
        mean_loss = total / bw.size
        if not math.isfinite(mean_loss) or not np.all(np.isfinite(grad)):
            raise NonFiniteLoss(epoch, mean_loss)
        report.loss_per_epoch.append(mean_loss)
        grad /= bw.size
        if config.optimizer == "gd":
            theta -= config.step_size * grad
        else:
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            m_hat = m / (1 - config.beta1 ** epoch)
            v_hat = v / (1 - config.beta2 ** epoch)
            theta -= config.step_size * m_hat / (np.sqrt(v_hat) + config.eps)
    trained = model.with_theta(theta)
    r, _ = _forward(theta, is_sig, C)
    report.final_pair_accuracy = float(np.mean(r[wi] > r[li]))
    return trained, report


def fit_reward(
    kinds: Sequence[TransformKind | str],
    pairs: Sequence[PreferencePair],
    table: CohortTable,
    config: TrainConfig = TrainConfig(),
    restarts: int = 4,
    standardize: bool = False,
) -> tuple[RewardModel, TrainReport]:
    """Initialise and train ``restarts`` models; keep the lowest final loss.

    Restart seeds derive from ``config.seed``; with ``restarts=1`` the single
    model is initialised and trained with ``config.seed`` itself.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    _ = _pair_indices(pairs, table)
    if restarts == 1:
        seeds = [config.seed]
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(config.seed).spawn(restarts)]
    C = table.component_matrix if standardize else None
    best = None
    for s in seeds:
        model = init_model(kinds, s, C)
        trained, report = train(model, pairs, table, replace(config, seed=s))
        full = loss(trained, pairs, table) / len(pairs)
        if best is None or full < best[0]:
            best = (full, trained, report)
    return best[1], best[2]
