"""Amortized matcher: intrinsic tokens -> two-stream scorer -> sorted plan.

The scorer maps a pair of clouds to push-forward values (s, t) in one forward
pass. Its constraints hold by construction: tokens use intra-cloud distances
only (rigid invariance), every block acts row-wise or through set means
(permutation equivariance), the two streams share all weights and the pair
context is the mean of the two set summaries (swap symmetry), and equal inputs
therefore give s = t, which the stable sort turns into the identity plan.
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from gsgw.core.config import settings
from gsgw.core.logging import get_logger
from gsgw.core.rng import make_rng
from gsgw.exceptions.exceptions import (
    InvalidInputError,
    NumericError,
    OptimizationFailureError,
    ShapeError,
)
from gsgw.schemas.geometry import LabeledCloud
from gsgw.schemas.measures import CostConvention, Coupling, PointCloud
from gsgw.schemas.solver import Activation, AmortizedConfig, AnnealSchedule, MlpSpec, OptimizerKind
from gsgw.services import autodiff as ad
from gsgw.services.geometry import plan_to_correspondence, sample_rigid
from gsgw.services.measures import build_cost_matrix, fgw_loss_tape
from gsgw.services.monotone_plan import hard_plan
from gsgw.services.optim import AdamState, adam_step, warmup_lr
from gsgw.services.slicers import init_mlp, mlp_forward, param_count
from gsgw.services.softsort import anneal, soft_plan, soft_plan_tape

logger = get_logger(__name__)

COORD_DIM = 3
SEGMENTS = ("rho", "self_mix", "cross_mix", "attention", "context", "readout")


# -- tokens ---------------------------------------------------------------------

@dataclass(frozen=True)
class IntrinsicTokens:
    """Per-point sorted squared-distance profiles, optionally with coordinates."""
    tokens: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def _cloud(source) -> PointCloud:
    if isinstance(source, LabeledCloud):
        return source.cloud
    return source if isinstance(source, PointCloud) else PointCloud(source)


def tokenize(cloud, k: int, with_coordinates: bool = False) -> IntrinsicTokens:
    """
    Row i holds the K smallest squared distances from point i, ascending.

    Raises:
        InvalidInputError: If the cloud has K points or fewer
    """
    pts = _cloud(cloud).points
    n = pts.shape[0]
    if k < 1 or n <= k:
        raise InvalidInputError(f"tokenizing with K={k} needs more than {k} points, got {n}")
    diff = pts[:, None, :] - pts[None, :, :]
    squared = np.einsum("ijk,ijk->ij", diff, diff)
    profile = np.sort(squared, axis=1)[:, 1:k + 1]
    if with_coordinates:
        if pts.shape[1] != COORD_DIM:
            raise ShapeError(f"coordinate tokens need {COORD_DIM}-D points, got {pts.shape[1]}")
        profile = np.concatenate([profile, pts], axis=1)
    return IntrinsicTokens(profile, k)


# -- parameters -----------------------------------------------------------------

def matcher_specs(d_in: int, token_dim: int, latent: int) -> Dict[str, MlpSpec]:
    """Shapes of the token encoder, the mixing blocks, the context projection and the readout."""
    gelu = Activation.GELU
    return {
        "rho": MlpSpec(in_dim=d_in, out_dim=latent, hidden_width=token_dim, depth=2, activation=gelu),
        "self_mix": MlpSpec(in_dim=2 * latent, out_dim=latent, hidden_width=latent, depth=2, activation=gelu),
        "cross_mix": MlpSpec(in_dim=2 * latent, out_dim=latent, hidden_width=latent, depth=2, activation=gelu),
        "context": MlpSpec(in_dim=2 * latent, out_dim=latent, depth=1),
        "readout": MlpSpec(in_dim=latent, out_dim=1, depth=1),
    }


@dataclass(frozen=True)
class MatcherParams:
    """Flat parameter vector of the scorer together with its architecture."""
    k: int
    d_in: int
    token_dim: int
    latent: int
    attention: bool
    with_coordinates: bool
    theta: np.ndarray

    @property
    def specs(self) -> Dict[str, MlpSpec]:
        return matcher_specs(self.d_in, self.token_dim, self.latent)

    @property
    def segments(self) -> Dict[str, slice]:
        sizes = {name: param_count(spec) for name, spec in self.specs.items()}
        sizes["attention"] = 3 * self.latent * self.latent if self.attention else 0
        out, offset = {}, 0
        for name in SEGMENTS:
            out[name] = slice(offset, offset + sizes[name])
            offset += sizes[name]
        return out

    @property
    def size(self) -> int:
        return self.segments["readout"].stop

    @property
    def rho_params(self) -> np.ndarray:
        return self.theta[self.segments["rho"]]

    @property
    def encoder_params(self) -> np.ndarray:
        seg = self.segments
        return self.theta[seg["self_mix"].start:seg["attention"].stop]

    @property
    def context_params(self) -> np.ndarray:
        return self.theta[self.segments["context"]]

    @property
    def readout_params(self) -> np.ndarray:
        return self.theta[self.segments["readout"]]

    def with_theta(self, theta: np.ndarray) -> "MatcherParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.size,):
            raise ShapeError(f"parameter vector of length {theta.shape} does not fit the matcher ({self.size})")
        return replace(self, theta=theta.copy())

    def to_arrays(self, prefix: str = "matcher") -> Dict[str, np.ndarray]:
        """Named float64 arrays for the checkpoint format."""
        return {
            f"{prefix}.meta": np.array([self.k, self.d_in, self.token_dim, self.latent,
                                        float(self.attention), float(self.with_coordinates)]),
            f"{prefix}.theta": self.theta,
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "matcher") -> "MatcherParams":
        try:
            meta = arrays[f"{prefix}.meta"]
            params = cls(k=int(meta[0]), d_in=int(meta[1]), token_dim=int(meta[2]), latent=int(meta[3]),
                         attention=bool(meta[4]), with_coordinates=bool(meta[5]),
                         theta=np.asarray(arrays[f"{prefix}.theta"], dtype=np.float64))
        except (KeyError, IndexError) as exc:
            raise InvalidInputError(f"checkpoint lacks matcher array {exc}") from exc
        return params.with_theta(params.theta)


def init_matcher(cfg: AmortizedConfig, seed: Optional[int] = None) -> MatcherParams:
    """Untrained matcher; equal seeds give bitwise-equal parameters."""
    seed = cfg.seed if seed is None else seed
    d_in = cfg.k_neighbors + (COORD_DIM if cfg.with_coordinates else 0)
    specs = matcher_specs(d_in, cfg.token_dim, cfg.latent_dim)
    blocks = []
    for name in SEGMENTS:
        if name == "attention":
            if cfg.attention:
                bound = 1.0 / np.sqrt(cfg.latent_dim)
                blocks.append(make_rng(seed, "matcher", name).uniform(-bound, bound, 3 * cfg.latent_dim ** 2))
            continue
        params, _ = init_mlp(specs[name], make_rng(seed, "matcher", name))
        blocks.append(params)
    return MatcherParams(cfg.k_neighbors, d_in, cfg.token_dim, cfg.latent_dim,
                         cfg.attention, cfg.with_coordinates, np.concatenate(blocks))


# -- forward --------------------------------------------------------------------

def _set_mean(h: ad.Tensor) -> ad.Tensor:
    n = h.shape[0]
    return h.tape.constant(np.full((1, n), 1.0 / n)) @ h


def _broadcast(row: ad.Tensor, n: int) -> ad.Tensor:
    return row.tape.constant(np.ones((n, 1))) @ row


def _attention(theta: ad.Tensor, seg: slice, latent: int, h: ad.Tensor) -> ad.Tensor:
    size = latent * latent
    wq, wk, wv = (ad.reshape(ad.slice_(theta, slice(seg.start + k * size, seg.start + (k + 1) * size)),
                             (latent, latent)) for k in range(3))
    weights = ad.row_softmax(((h @ wq) @ (h @ wk).T) * (1.0 / math.sqrt(latent)))
    return weights @ (h @ wv)


def _mix(theta: ad.Tensor, seg: slice, spec: MlpSpec, h: ad.Tensor, context: ad.Tensor) -> ad.Tensor:
    return h + mlp_forward(ad.slice_(theta, seg), spec, None, ad.concat([h, context], axis=1))


def _forward(params: MatcherParams, theta: ad.Tensor, tok_x: ad.Tensor, tok_y: ad.Tensor
             ) -> Tuple[ad.Tensor, ad.Tensor]:
    specs, seg = params.specs, params.segments
    n, m = tok_x.shape[0], tok_y.shape[0]

    def encode(tokens: ad.Tensor) -> ad.Tensor:
        h = mlp_forward(ad.slice_(theta, seg["rho"]), specs["rho"], None, tokens)
        if params.attention:
            context = _attention(theta, seg["attention"], params.latent, h)
        else:
            context = _broadcast(_set_mean(h), h.shape[0])
        return _mix(theta, seg["self_mix"], specs["self_mix"], h, context)

    hx, hy = encode(tok_x), encode(tok_y)
    mean_x, mean_y = _set_mean(hx), _set_mean(hy)
    hx, hy = (_mix(theta, seg["cross_mix"], specs["cross_mix"], hx, _broadcast(mean_y, n)),
              _mix(theta, seg["cross_mix"], specs["cross_mix"], hy, _broadcast(mean_x, m)))
    pair_context = (_set_mean(hx) + _set_mean(hy)) * 0.5

    def readout(h: ad.Tensor) -> ad.Tensor:
        joined = ad.concat([h, _broadcast(pair_context, h.shape[0])], axis=1)
        projected = ad.gelu(mlp_forward(ad.slice_(theta, seg["context"]), specs["context"], None, joined))
        return mlp_forward(ad.slice_(theta, seg["readout"]), specs["readout"], None, projected)

    return readout(hx), readout(hy)


def predict_scores(
    params: MatcherParams,
    tok_x: IntrinsicTokens,
    tok_y: IntrinsicTokens,
    tape: Optional[ad.Tape] = None,
    theta: Optional[ad.Tensor] = None,
):
    """
    Push-forward values of both clouds.

    Without a tape the scores come back as numpy vectors; with a tape they are
    (n, 1) and (m, 1) tensors on it, differentiable in ``theta``.

    Raises:
        ShapeError: If token dimensions do not match the matcher
    """
    if tok_x.dim != params.d_in or tok_y.dim != params.d_in:
        raise ShapeError(f"token dims {tok_x.dim} and {tok_y.dim} do not match matcher input {params.d_in}")
    own_tape = tape is None
    tape = ad.Tape() if own_tape else tape
    if theta is None:
        theta = tape.constant(params.theta)
    s, t = _forward(params, theta, tape.constant(tok_x.tokens), tape.constant(tok_y.tokens))
    if own_tape:
        return s.numpy().reshape(-1).copy(), t.numpy().reshape(-1).copy()
    return s, t


def _tokens(params: MatcherParams, cloud) -> IntrinsicTokens:
    return tokenize(cloud, params.k, params.with_coordinates)


def amortized_plan(params: MatcherParams, X, Y, tau: Optional[float] = None) -> Coupling:
    """
    Plan induced by the predicted scores: soft at temperature tau, hard when
    tau is None or 0.
    """
    s, t = predict_scores(params, _tokens(params, X), _tokens(params, Y))
    if tau is None or tau == 0:
        return hard_plan(s, t)
    return soft_plan(s, t, tau)


# -- training -------------------------------------------------------------------

@dataclass(frozen=True)
class PreparedCloud:
    """Tokens and intra-space costs of one training cloud."""
    tokens: IntrinsicTokens
    cost: np.ndarray


def prepare_cloud(params: MatcherParams, cloud) -> PreparedCloud:
    pc = _cloud(cloud)
    return PreparedCloud(_tokens(params, pc), build_cost_matrix(pc, CostConvention.DISTANCE).entries)


def pair_loss_and_grad(
    params: MatcherParams,
    theta: np.ndarray,
    source: PreparedCloud,
    target: PreparedCloud,
    alpha: float,
    lam: float,
) -> Tuple[float, np.ndarray]:
    """FGW loss of the amortized soft plan at temperature alpha and its gradient in theta."""

    def build(tape: ad.Tape, leaf: ad.Tensor) -> ad.Tensor:
        s, t = predict_scores(params, source.tokens, target.tokens, tape=tape, theta=leaf)
        plan = soft_plan_tape(s, t, alpha)
        return fgw_loss_tape(source.cost, target.cost, plan, source.tokens.tokens, target.tokens.tokens, lam)

    return ad.value_and_grad(build, theta)


@dataclass
class TrainResult:
    params: MatcherParams
    loss_trace: List[float] = field(default_factory=list)
    epoch_losses: List[float] = field(default_factory=list)
    tau_trace: List[float] = field(default_factory=list)
    lr: float = 0.0
    retried: bool = False


def _ordered_map(fn: Callable, items: Sequence) -> list:
    workers = max(1, min(settings.max_workers, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _train(prepared: List[PreparedCloud], params: MatcherParams, cfg: AmortizedConfig,
           lam: float, epochs: int, lr: float) -> TrainResult:
    schedule = AnnealSchedule(alpha_start=cfg.alpha_start, alpha_end=cfg.alpha_end, steps=epochs)
    batches = math.ceil(cfg.pairs_per_epoch / cfg.batch_size)
    warmup_steps = min(cfg.warmup_epochs, epochs) * batches
    theta = params.theta.copy()
    state = AdamState.zeros(theta.shape[0])
    result = TrainResult(params, lr=lr)
    step = 0

    for epoch in range(epochs):
        alpha = anneal(schedule, epoch)
        pairs = make_rng(cfg.seed, "epoch", epoch).integers(0, len(prepared), size=(cfg.pairs_per_epoch, 2))
        epoch_loss = []
        for start in range(0, len(pairs), cfg.batch_size):
            batch = pairs[start:start + cfg.batch_size]
            current = theta
            outputs = _ordered_map(
                lambda ij: pair_loss_and_grad(params, current, prepared[ij[0]], prepared[ij[1]], alpha, lam),
                batch,
            )
            losses = np.array([value for value, _ in outputs])
            if not np.all(np.isfinite(losses)):
                raise NumericError(f"non-finite pair loss at epoch {epoch}")
            grad = np.mean([g for _, g in outputs], axis=0)
            theta, state = adam_step(theta, grad, state, warmup_lr(lr, step, warmup_steps),
                                     cfg.grad_clip, OptimizerKind.ADAMW, cfg.weight_decay)
            step += 1
            result.loss_trace.append(float(losses.mean()))
            result.tau_trace.append(alpha)
            epoch_loss.extend(losses.tolist())
        result.epoch_losses.append(float(np.mean(epoch_loss)))
        logger.info(f"Epoch {epoch} mean FGW loss {result.epoch_losses[-1]:.6g} at alpha {alpha:.4g}",
                    extra={"step": step, "seed": cfg.seed})

    result.params = params.with_theta(theta)
    return result


def train_amortized(
    dataset: Sequence[Union[LabeledCloud, PointCloud]],
    params: MatcherParams,
    cfg: AmortizedConfig,
    lam: Optional[float] = None,
    epochs: Optional[int] = None,
) -> TrainResult:
    """
    Minimize the mean FGW loss of amortized soft plans over random pairs.

    Labels are never read. Pairs are drawn per epoch from a pinned stream;
    the temperature follows an exponential anneal from alpha_start to
    alpha_end across epochs. A diverged run is retried once at lr / 10.

    Raises:
        InvalidInputError: If the dataset is empty
        ShapeError: If clouds differ in ambient dimension
        OptimizationFailureError: If the retry diverges too
    """
    if not dataset:
        raise InvalidInputError("training needs at least one cloud")
    dims = {_cloud(c).dim for c in dataset}
    if len(dims) > 1:
        raise ShapeError(f"training clouds have mixed dimensions {sorted(dims)}")
    lam = cfg.fgw_lambda if lam is None else lam
    epochs = cfg.epochs if epochs is None else epochs
    if epochs < 1:
        raise InvalidInputError(f"epochs must be >= 1, got {epochs}")
    prepared = [prepare_cloud(params, c) for c in dataset]

    try:
        return _train(prepared, params, cfg, lam, epochs, cfg.lr)
    except NumericError as exc:
        logger.warning(f"Training diverged ({exc}); retrying at lr {cfg.lr / 10:g}", extra={"seed": cfg.seed})
    try:
        result = _train(prepared, params, cfg, lam, epochs, cfg.lr / 10.0)
    except NumericError as exc:
        raise OptimizationFailureError(f"training diverged at lr {cfg.lr} and {cfg.lr / 10}") from exc
    result.retried = True
    return result


# -- evaluation -----------------------------------------------------------------

def label_transfer_accuracy(plan, labels_x, labels_y) -> float:
    """Fraction of source points whose argmax match carries the same label."""
    matches = plan_to_correspondence(plan)
    lx = np.asarray(labels_x).reshape(-1)
    ly = np.asarray(labels_y).reshape(-1)
    if lx.shape[0] != matches.shape[0] or ly.shape[0] <= matches.max():
        raise ShapeError("label counts do not match the plan")
    return float(np.mean(ly[matches] == lx))


def random_baseline_accuracy(labels_x, labels_y) -> float:
    """Expected accuracy of a uniformly random assignment: sum_c p_X(c) p_Y(c)."""
    lx = np.asarray(labels_x).reshape(-1)
    ly = np.asarray(labels_y).reshape(-1)
    classes = np.union1d(lx, ly)
    p_x = np.array([np.mean(lx == c) for c in classes])
    p_y = np.array([np.mean(ly == c) for c in classes])
    return float(p_x @ p_y)


@dataclass(frozen=True)
class PairEvaluation:
    accuracy: float
    baseline: float
    forward_ms: float


def evaluate_pair(params: MatcherParams, source: LabeledCloud, target: LabeledCloud) -> PairEvaluation:
    """Hard-plan label transfer on one pair with its forward time."""
    start = time.perf_counter()
    plan = amortized_plan(params, source, target)
    forward_ms = (time.perf_counter() - start) * 1000.0
    return PairEvaluation(
        label_transfer_accuracy(plan, source.labels, target.labels),
        random_baseline_accuracy(source.labels, target.labels),
        forward_ms,
    )


@dataclass(frozen=True)
class ConstraintReport:
    passed: bool
    max_deviation: float
    cases: int


def check_constraints(
    params: MatcherParams,
    clouds: Sequence,
    seed: int = 0,
    tol: float = 1e-10,
) -> Dict[str, ConstraintReport]:
    """
    Run the four architectural constraint suites on hard plans.

    identity: G(X, X) = I / n. transpose: G(Y, X) = G(X, Y)^T. rigid: G is
    unchanged when either cloud moves rigidly. permutation: G(PX, Y) = P G(X, Y).
    Consecutive clouds form the pairs.
    """
    clouds = [_cloud(c) for c in clouds]
    if len(clouds) < 2:
        raise InvalidInputError("constraint checks need at least two clouds")
    deviations = {"identity": [], "transpose": [], "rigid": [], "permutation": []}

    for idx, X in enumerate(clouds):
        deviations["identity"].append(np.max(np.abs(amortized_plan(params, X, X).plan - np.eye(X.n) / X.n)))
        Y = clouds[(idx + 1) % len(clouds)]
        base = amortized_plan(params, X, Y).plan
        deviations["transpose"].append(np.max(np.abs(amortized_plan(params, Y, X).plan - base.T)))
        g_x = sample_rigid(X.dim, seed + 2 * idx)
        g_y = sample_rigid(Y.dim, seed + 2 * idx + 1)
        moved = amortized_plan(params, PointCloud(g_x.apply(X)), PointCloud(g_y.apply(Y))).plan
        deviations["rigid"].append(np.max(np.abs(moved - base)))
        perm = make_rng(seed, "constraint-perm", idx).permutation(X.n)
        permuted = amortized_plan(params, PointCloud(X.points[perm]), Y).plan
        deviations["permutation"].append(np.max(np.abs(permuted - base[perm])))

    reports = {}
    for name, values in deviations.items():
        worst = float(max(values))
        reports[name] = ConstraintReport(worst <= tol, worst, len(values))
        logger.info(f"Constraint {name}: max deviation {worst:.3g}", extra={"method": name})
    return reports
