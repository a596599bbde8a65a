"""Joint objective, ADAM optimizer, training loop, and grid search.

The per-batch loss is

    total = alpha * md_term + beta * recon_term - gamma * mi_term

where md_term is the mean robust Mahalanobis distance of the batch latents
against batch median/MAD stats, recon_term is the reconstruction MSE, and
mi_term is the matrix-based mutual information between the batch's input
Gram and latent Gram. Robust stats are treated as constants inside the
gradient (order statistics are piecewise constant), and the MI gradient
flows through the latent Gram only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autoenc, itl, ndmath, robust
from .autoenc import Gradients, NetworkParams
from .errors import DegeneracyError, ParameterError, TrainingError

LN2 = math.log(2.0)
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.95  # robust-MD term
    beta: float = 0.05  # reconstruction term
    gamma: float = 1.0  # mutual-information term (subtracted: MI is maximized)

    def validate(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)):
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"loss weight {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    md_term: float
    recon_term: float
    mi_term: float
    total: float


@dataclass
class TrainConfig:
    sigma: float = 0.1
    weights: LossWeights = field(default_factory=LossWeights)
    batch_size: int = 256
    epochs: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 42
    ridge_epsilon: float = ndmath.RIDGE_EPSILON
    mi_mode: str = "ratio"  # "ratio" (paper formula) or "additive" (ablation)
    latent_dim: int = 8
    hidden_dims: list | None = None  # default d -> d//2 -> latent_dim
    activation: str = "tanh"

    def validate(self):
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.batch_size < 2:
            raise ParameterError("batch_size must be >= 2 (robust stats need rows)")
        if self.mi_mode not in ("ratio", "additive"):
            raise ParameterError(f"mi_mode must be ratio|additive, got {self.mi_mode}")
        self.weights.validate()

    def resolve_layer_dims(self, d):
        if self.hidden_dims is not None:
            return [d] + [int(h) for h in self.hidden_dims] + [int(self.latent_dim)]
        return [d, max(d // 2, 1), int(self.latent_dim)]


@dataclass
class TrainedModel:
    params: NetworkParams
    robust_stats: robust.RobustLatentStats
    classical_stats: robust.ClassicalStats
    config: TrainConfig
    loss_history: list
    train_score_medians: dict  # per scoring mode

    def encode(self, features):
        return autoenc.forward(self.params, features).latent

    def reconstruct(self, features):
        return autoenc.forward(self.params, features).reconstruction


def matrix_mi_with_latent_grad(xhat, z, sigma, mode="ratio", floor=itl.ENTROPY_FLOOR):
    """Matrix-based MI between a fixed input Gram and the latent batch,
    plus its gradient with respect to the latent rows.

    xhat is the trace-normalized input Gram (constant w.r.t. parameters).
    The Gaussian latent Gram has constant diagonal, so the normalized
    latent Gram is exp(-||z_i - z_j||^2 / (2 sigma^2)) / N and only the
    off-diagonal entries carry gradient.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if xhat.shape != (n, n):
        raise ParameterError(f"input Gram shape {xhat.shape} does not match batch {n}")
    sq = ndmath.pairwise_sq_dists(z, z)
    np.fill_diagonal(sq, 0.0)
    kmat = np.exp(-sq / (2.0 * sigma * sigma))
    kmat = 0.5 * (kmat + kmat.T)
    zhat = kmat / n

    sx = float(np.sum(xhat * xhat))
    sz = float(np.sum(zhat * zhat))
    hx = -math.log2(sx)
    hz = -math.log2(sz)

    joint_raw = zhat * xhat
    t = float(np.trace(joint_raw))
    if t <= 0:
        raise DegeneracyError("Hadamard joint Gram has non-positive trace")
    joint = joint_raw / t
    sj = float(np.sum(joint * joint))
    hxz = -math.log2(sj)

    if mode == "ratio":
        a, b, c = max(hx, floor), max(hz, floor), max(hxz, floor)
        mi = math.log2(a * b / (c * c))
        dmi_dhz = 1.0 / (b * LN2) if hz > floor else 0.0
        dmi_dhxz = -2.0 / (c * LN2) if hxz > floor else 0.0
    elif mode == "additive":
        mi = hx + hz - hxz
        dmi_dhz = 1.0
        dmi_dhxz = -1.0
    else:
        raise ParameterError(f"unknown mi mode {mode!r}")

    # dHz/dzhat and dHxz/dzhat (both symmetric)
    dhz_dzhat = (-2.0 / (sz * LN2)) * zhat
    dsj_dzhat = 2.0 * joint * xhat / t
    np.fill_diagonal(dsj_dzhat, np.diag(dsj_dzhat) - 2.0 * sj * np.diag(xhat) / t)
    dhxz_dzhat = (-1.0 / (sj * LN2)) * dsj_dzhat

    w = dmi_dhz * dhz_dzhat + dmi_dhxz * dhxz_dzhat
    np.fill_diagonal(w, 0.0)  # diagonal of zhat is constant 1/n
    bmat = (w / n) * kmat
    row = bmat.sum(axis=1)
    grad_z = (2.0 / (sigma * sigma)) * (bmat @ z - row[:, None] * z)
    return mi, grad_z, (hx, hz, hxz)


def _md_term_with_grad(latents, stats):
    """Mean robust MD of latent rows; gradient treats stats as constants."""
    dists = robust.robust_md(latents, stats)
    m = latents.shape[0]
    delta = latents - stats.medians
    safe = np.where(dists > 1e-12, dists, np.inf)
    grad = (delta @ stats.corr_inv) / safe[:, None] / m
    return float(dists.mean()), grad


def joint_loss(params: NetworkParams, batch, config: TrainConfig,
               stats=None, input_gram_norm=None):
    """One batch of the joint objective. Returns (LossBreakdown, Gradients).

    stats / input_gram_norm default to quantities computed from this batch;
    passing them in pins the loss to a frozen snapshot (used by the
    finite-difference checks and by epoch-0 evaluation).
    """
    config.validate()
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[0] < 2:
        raise ParameterError(f"batch needs >= 2 rows, got {x.shape[0]}")
    if np.all(x == x[0]):
        raise DegeneracyError(
            "degenerate batch: all rows identical (median/MAD and Gram statistics collapse)"
        )
    w = config.weights

    trace = autoenc.forward(params, x)
    z, recon = trace.latent, trace.reconstruction

    if stats is None:
        stats = robust.robust_correlation(z, ridge_epsilon=config.ridge_epsilon)
    md_term, md_grad_z = _md_term_with_grad(z, stats)

    resid = recon - x
    recon_term = float(np.mean(resid * resid))
    recon_grad = 2.0 * resid / resid.size

    if w.gamma != 0.0:
        if input_gram_norm is None:
            input_gram_norm = ndmath.normalize_gram(
                ndmath.gaussian_gram(x, config.sigma)
            ).mat
        mi_term, mi_grad_z, _ = matrix_mi_with_latent_grad(
            input_gram_norm, z, config.sigma, mode=config.mi_mode
        )
    else:
        mi_term, mi_grad_z = 0.0, np.zeros_like(z)

    total = w.alpha * md_term + w.beta * recon_term - w.gamma * mi_term
    grad_latent = w.alpha * md_grad_z - w.gamma * mi_grad_z
    grads = autoenc.backward(params, trace, grad_wrt_latent=grad_latent,
                             grad_wrt_recon=w.beta * recon_grad)
    return LossBreakdown(md_term=md_term, recon_term=recon_term,
                         mi_term=mi_term, total=total), grads


def mean_abs_dev(values):
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ParameterError("mean_abs_dev of empty input")
    return float(np.mean(np.abs(v - v.mean())))


def auto_weights(validation_md, validation_recon, gamma=1.0) -> LossWeights:
    """Reciprocal-mean-absolute-deviation weighting, normalized to sum 1.

    Falls back to the (0.95, 0.05) defaults when either deviation vanishes.
    """
    dev_md = mean_abs_dev(validation_md)
    dev_recon = mean_abs_dev(validation_recon)
    if dev_md <= 0 or dev_recon <= 0:
        return LossWeights(alpha=0.95, beta=0.05, gamma=gamma)
    a, b = 1.0 / dev_md, 1.0 / dev_recon
    return LossWeights(alpha=a / (a + b), beta=b / (a + b), gamma=gamma)


@dataclass
class AdamState:
    m: Gradients
    v: Gradients
    step: int = 0

    @staticmethod
    def for_params(params: NetworkParams) -> "AdamState":
        return AdamState(m=Gradients.zeros_like(params),
                         v=Gradients.zeros_like(params), step=0)


def _walk(params: NetworkParams, grads: Gradients, state: AdamState):
    for l in range(len(params.weights)):
        yield f"weights[{l}]", params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]
        yield f"biases_enc[{l}]", params.biases_enc[l], grads.biases_enc[l], state.m.biases_enc[l], state.v.biases_enc[l]
        yield f"biases_dec[{l}]", params.biases_dec[l], grads.biases_dec[l], state.m.biases_dec[l], state.v.biases_dec[l]


def adam_step(params: NetworkParams, grads: Gradients, state: AdamState,
              config: TrainConfig):
    """In-place bias-corrected ADAM update."""
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for path, p, g, m, v in _walk(params, grads, state):
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient at {path}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.adam_epsilon)
        if not np.all(np.isfinite(p)):
            raise TrainingError(f"non-finite parameter at {path}")
    return params, state


def _freeze(params, features, config):
    z = autoenc.forward(params, features).latent
    stats = robust.robust_correlation(z, ridge_epsilon=config.ridge_epsilon)
    cstats = robust.classical_stats(z, ridge_epsilon=config.ridge_epsilon)
    recon = autoenc.forward(params, features).reconstruction
    resid = recon - features
    medians = {
        "robust_md": float(np.median(robust.robust_md(z, stats))),
        "classical_md": float(np.median(robust.classical_md(z, cstats))),
        "euclidean_recon": float(np.median(np.mean(resid * resid, axis=1))),
    }
    return stats, cstats, medians


def fit(train_data, config: TrainConfig) -> TrainedModel:
    """Train on (assumed normal) data, then freeze scoring statistics from
    one final full-set encoding pass."""
    config.validate()
    features = np.asarray(
        getattr(train_data, "features", train_data), dtype=np.float64
    )
    n, d = features.shape
    if n < config.batch_size and config.epochs > 0:
        raise ParameterError(
            f"need at least batch_size={config.batch_size} rows, got {n}"
        )
    params = autoenc.init_params(config.resolve_layer_dims(d),
                                 activation=config.activation, seed=config.seed)
    state = AdamState.for_params(params)
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sums = np.zeros(4)
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if idx.size < 2:
                continue  # robust stats need at least two rows
            batch = features[idx]
            try:
                breakdown, grads = joint_loss(params, batch, config)
                params, state = adam_step(params, grads, state, config)
            except (DegeneracyError, TrainingError) as exc:
                raise TrainingError(
                    f"epoch {epoch} batch {n_batches}: {exc}"
                ) from exc
            sums += (breakdown.md_term, breakdown.recon_term,
                     breakdown.mi_term, breakdown.total)
            n_batches += 1
        if n_batches:
            history.append(LossBreakdown(*(sums / n_batches)))
    stats, cstats, medians = _freeze(params, features, config)
    return TrainedModel(params=params, robust_stats=stats, classical_stats=cstats,
                        config=config, loss_history=history,
                        train_score_medians=medians)


def grid_search(train_data, validation_data, sigma_grid, weight_grid,
                base_config: TrainConfig | None = None, epochs=10):
    """Train one short-budget model per (sigma, weights) cell.

    Labeled validation data is scored by folded AUC of robust-MD scores;
    unlabeled validation by the negative mean robust-MD (closer to the
    normal manifold is better). Ties break toward smaller sigma, then
    larger alpha. Returns (best_config, table).
    """
    from . import detect  # local import: detect depends on this module

    sigma_grid = list(sigma_grid)
    weight_grid = list(weight_grid)
    if not sigma_grid or not weight_grid:
        raise ParameterError("empty grid")
    base = base_config or TrainConfig()
    labels = getattr(validation_data, "labels", None)
    val_features = np.asarray(
        getattr(validation_data, "features", validation_data), dtype=np.float64
    )
    table = []
    best = None
    for sigma in sigma_grid:
        for weights in weight_grid:
            if not isinstance(weights, LossWeights):
                weights = LossWeights(*weights)
            cfg_doc = asdict(base)
            cfg_doc.update(sigma=float(sigma), epochs=epochs)
            cfg_doc.pop("weights")
            cfg = TrainConfig(weights=weights, **cfg_doc)
            model = fit(train_data, cfg)
            scores = detect.score(model, val_features, mode="robust_md")
            if labels is not None and len(np.unique(labels)) > 1:
                value = detect.auc(scores, labels,
                                   center=model.train_score_medians["robust_md"])
            else:
                value = -float(scores.mean())
            table.append({"sigma": float(sigma), "alpha": weights.alpha,
                          "beta": weights.beta, "gamma": weights.gamma,
                          "score": value})
            key = (value, -sigma, weights.alpha)
            if best is None or key > best[0]:
                best = (key, cfg)
    return best[1], table


# ---------------------------------------------------------------------------
# checkpoint serialization


def _listify(a):
    return np.asarray(a, dtype=np.float64).tolist()


def model_to_dict(model: TrainedModel) -> dict:
    cfg = asdict(model.config)
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layer_dims": list(model.params.layer_dims),
        "activation": model.params.activation,
        "weights": [_listify(w) for w in model.params.weights],
        "biases_enc": [_listify(b) for b in model.params.biases_enc],
        "biases_dec": [_listify(b) for b in model.params.biases_dec],
        "robust_stats": {
            "medians": _listify(model.robust_stats.medians),
            "mads": _listify(model.robust_stats.mads),
            "corr": _listify(model.robust_stats.corr),
            "corr_inv": _listify(model.robust_stats.corr_inv),
        },
        "classical_stats": {
            "means": _listify(model.classical_stats.means),
            "cov": _listify(model.classical_stats.cov),
            "cov_inv": _listify(model.classical_stats.cov_inv),
        },
        "train_config": cfg,
        "loss_history": [asdict(h) for h in model.loss_history],
        "train_score_medians": dict(model.train_score_medians),
    }


def save_checkpoint(model: TrainedModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ParameterError(
            f"unsupported checkpoint format_version {doc.get('format_version')!r}"
        )
    params = NetworkParams(
        layer_dims=[int(d) for d in doc["layer_dims"]],
        weights=[np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        biases_enc=[np.asarray(b, dtype=np.float64) for b in doc["biases_enc"]],
        biases_dec=[np.asarray(b, dtype=np.float64) for b in doc["biases_dec"]],
        activation=doc["activation"],
    )
    rs = doc["robust_stats"]
    stats = robust.RobustLatentStats(
        medians=np.asarray(rs["medians"]), mads=np.asarray(rs["mads"]),
        corr=np.asarray(rs["corr"]), corr_inv=np.asarray(rs["corr_inv"]),
    )
    cs = doc["classical_stats"]
    cstats = robust.ClassicalStats(
        means=np.asarray(cs["means"]), cov=np.asarray(cs["cov"]),
        cov_inv=np.asarray(cs["cov_inv"]),
    )
    cfg_doc = dict(doc["train_config"])
    cfg_doc["weights"] = LossWeights(**cfg_doc["weights"])
    config = TrainConfig(**cfg_doc)
    history = [LossBreakdown(**h) for h in doc["loss_history"]]
    return TrainedModel(params=params, robust_stats=stats, classical_stats=cstats,
                        config=config, loss_history=history,
                        train_score_medians=dict(doc["train_score_medians"]))


def load_checkpoint(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
