"""Slicer networks: the scalar slicer f, the lifting h and their flat parameter vectors.

A dependent pair scores points as s_i = f(h(x_i)), t_j = f(y_j). The lifting
is residual around the zero-padding embedding, h(x) = pad(x) + g(x), with the
head of g zero-initialized so that h starts as the embedding itself. An
independent pair scores s_i = f_X(x_i) with its own network stored in the h
slot.
"""
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.core.rng import make_rng
from gsgw.exceptions.exceptions import InvalidInputError, ShapeError
from gsgw.schemas.geometry import RigidTransform
from gsgw.schemas.measures import PointCloud
from gsgw.schemas.solver import (
    Activation,
    MlpSpec,
    SlicerConfig,
    SlicerKind,
    SlicerRelation,
)
from gsgw.services import autodiff as ad

logger = get_logger(__name__)

PairFactory = Callable[[int, int, int], "SlicerPair"]
ACTIVATION_ORDER = list(Activation)


@dataclass(frozen=True)
class RffFeatures:
    """Frozen random Fourier features sqrt(2/D) cos(x Omega + phase), appended to the input."""
    frequencies: np.ndarray
    phases: np.ndarray

    @property
    def count(self) -> int:
        return self.phases.shape[0]


@dataclass(frozen=True)
class DenseLayer:
    weight: slice
    weight_shape: Tuple[int, int]
    bias: Optional[slice]


def mlp_layout(spec: MlpSpec) -> List[DenseLayer]:
    """Offsets of every weight and bias inside the flat parameter vector."""
    in_dim = spec.in_dim + spec.rff_features
    dims = [in_dim] + [spec.hidden_width] * (spec.depth - 1) + [spec.out_dim]
    layers = []
    offset = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weight = slice(offset, offset + fan_in * fan_out)
        offset = weight.stop
        bias = None
        if spec.bias:
            bias = slice(offset, offset + fan_out)
            offset = bias.stop
        layers.append(DenseLayer(weight, (fan_in, fan_out), bias))
    return layers


def param_count(spec: MlpSpec) -> int:
    last = mlp_layout(spec)[-1]
    return (last.bias or last.weight).stop


def init_mlp(spec: MlpSpec, rng: np.random.Generator, zero_head: bool = False
             ) -> Tuple[np.ndarray, Optional[RffFeatures]]:
    """
    Fan-in scaled uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Args:
        spec: Network shape
        rng: Generator
        zero_head: Zero the last layer so the network starts as the zero map

    Returns:
        Flat parameters and the frozen RFF front end (None without features)
    """
    rff = None
    if spec.rff_features > 0:
        rff = RffFeatures(
            frequencies=rng.normal(0.0, 1.0 / spec.rff_bandwidth, size=(spec.in_dim, spec.rff_features)),
            phases=rng.uniform(0.0, 2.0 * np.pi, size=spec.rff_features),
        )
    layout = mlp_layout(spec)
    params = np.zeros(param_count(spec))
    for k, layer in enumerate(layout):
        if zero_head and k == len(layout) - 1:
            continue
        bound = 1.0 / np.sqrt(layer.weight_shape[0])
        params[layer.weight] = rng.uniform(-bound, bound, size=layer.weight.stop - layer.weight.start)
        if layer.bias is not None:
            params[layer.bias] = rng.uniform(-bound, bound, size=layer.bias.stop - layer.bias.start)
    return params, rff


def mlp_forward(params: ad.Tensor, spec: MlpSpec, rff: Optional[RffFeatures], inputs: ad.Tensor) -> ad.Tensor:
    """
    Evaluate an MLP whose flat parameters are the tensor ``params``.

    Args:
        params: 1-D parameter tensor of length param_count(spec)
        spec: Network shape
        rff: Frozen features, or None
        inputs: (n, in_dim) tensor

    Returns:
        (n, out_dim) tensor
    """
    if inputs.shape[1] != spec.in_dim:
        raise ShapeError(f"network expects inputs of dim {spec.in_dim}, got {inputs.shape[1]}")
    tape = inputs.tape
    n = inputs.shape[0]
    ones = tape.constant(np.ones((n, 1)))
    hidden = inputs
    if rff is not None:
        phase = tape.constant(np.ones((n, 1)) @ rff.phases[None, :])
        projected = inputs @ tape.constant(rff.frequencies) + phase
        hidden = ad.concat([inputs, ad.cos(projected) * np.sqrt(2.0 / rff.count)], axis=1)
    activation = ad.ACTIVATIONS[Activation(spec.activation).value]
    layout = mlp_layout(spec)
    for k, layer in enumerate(layout):
        weight = ad.reshape(ad.slice_(params, layer.weight), layer.weight_shape)
        hidden = hidden @ weight
        if layer.bias is not None:
            bias = ad.reshape(ad.slice_(params, layer.bias), (1, layer.weight_shape[1]))
            hidden = hidden + ones @ bias
        if k < len(layout) - 1:
            hidden = activation(hidden)
    return hidden


def _linear_forward(params: ad.Tensor, inputs: ad.Tensor) -> ad.Tensor:
    direction = ad.reshape(params, (params.shape[0], 1))
    norm = ad.sqrt(ad.sum_(ad.square(direction)))
    return (inputs @ direction) / norm


@dataclass(frozen=True)
class SlicerPair:
    """Parameters and frozen features of one (f, h) pair."""
    p: int
    q: int
    kind: SlicerKind
    relation: SlicerRelation
    f_spec: MlpSpec
    h_spec: MlpSpec
    f_params: np.ndarray
    h_params: np.ndarray
    f_rff: Optional[RffFeatures] = None
    h_rff: Optional[RffFeatures] = None

    @property
    def n_f(self) -> int:
        return self.f_params.shape[0]

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.f_params, self.h_params])

    def with_params(self, theta: np.ndarray) -> "SlicerPair":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_f + self.h_params.shape[0],):
            raise ShapeError(f"parameter vector of length {theta.shape} does not fit the pair")
        return replace(self, f_params=theta[: self.n_f].copy(), h_params=theta[self.n_f:].copy())

    def to_arrays(self, prefix: str = "slicer") -> Dict[str, np.ndarray]:
        """Named float64 arrays for the checkpoint format."""
        arrays = {
            f"{prefix}.meta": np.array([self.p, self.q,
                                        list(SlicerKind).index(self.kind),
                                        list(SlicerRelation).index(self.relation)], dtype=np.float64),
            f"{prefix}.f_spec": _spec_to_array(self.f_spec),
            f"{prefix}.h_spec": _spec_to_array(self.h_spec),
            f"{prefix}.f_params": self.f_params,
            f"{prefix}.h_params": self.h_params,
        }
        for name, rff in (("f_rff", self.f_rff), ("h_rff", self.h_rff)):
            if rff is not None:
                arrays[f"{prefix}.{name}.frequencies"] = rff.frequencies
                arrays[f"{prefix}.{name}.phases"] = rff.phases
        return arrays

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "slicer") -> "SlicerPair":
        try:
            meta = arrays[f"{prefix}.meta"]
            rffs = {}
            for name in ("f_rff", "h_rff"):
                key = f"{prefix}.{name}.frequencies"
                rffs[name] = (RffFeatures(arrays[key], arrays[f"{prefix}.{name}.phases"])
                              if key in arrays else None)
            return cls(
                p=int(meta[0]), q=int(meta[1]),
                kind=list(SlicerKind)[int(meta[2])],
                relation=list(SlicerRelation)[int(meta[3])],
                f_spec=_spec_from_array(arrays[f"{prefix}.f_spec"]),
                h_spec=_spec_from_array(arrays[f"{prefix}.h_spec"]),
                f_params=np.asarray(arrays[f"{prefix}.f_params"], dtype=np.float64),
                h_params=np.asarray(arrays[f"{prefix}.h_params"], dtype=np.float64),
                **rffs,
            )
        except (KeyError, IndexError) as exc:
            raise InvalidInputError(f"checkpoint lacks slicer array {exc}") from exc


def _spec_to_array(spec: MlpSpec) -> np.ndarray:
    return np.array([spec.in_dim, spec.out_dim, spec.hidden_width, spec.depth,
                     ACTIVATION_ORDER.index(Activation(spec.activation)),
                     spec.rff_features, spec.rff_bandwidth, float(spec.bias)])


def _spec_from_array(values: np.ndarray) -> MlpSpec:
    return MlpSpec(
        in_dim=int(values[0]), out_dim=int(values[1]), hidden_width=int(values[2]),
        depth=int(values[3]), activation=ACTIVATION_ORDER[int(values[4])],
        rff_features=int(values[5]), rff_bandwidth=float(values[6]), bias=bool(values[7]),
    )


def _check_dims(p: int, q: int) -> None:
    if p < 1 or q < 1:
        raise InvalidInputError(f"dimensions must be positive, got p={p}, q={q}")
    if p > q:
        raise InvalidInputError(f"p={p} > q={q}: swap the measures and transpose the plan")


def init_slicer_pair(
    p: int,
    q: int,
    spec_f: MlpSpec,
    spec_h: MlpSpec,
    seed: int,
    relation: SlicerRelation = SlicerRelation.DEPENDENT,
) -> SlicerPair:
    """
    Initialize a nonlinear slicer pair.

    Args:
        p: Source dimension
        q: Target dimension, p <= q
        spec_f: Slicer network, R^q -> R
        spec_h: Lifting residual R^p -> R^q (dependent) or source slicer R^p -> R (independent)
        seed: Seed; equal seeds give bitwise-equal parameters
        relation: dependent or independent

    Raises:
        InvalidInputError: If p > q or the specs do not fit the dimensions
    """
    _check_dims(p, q)
    relation = SlicerRelation(relation)
    h_out = q if relation is SlicerRelation.DEPENDENT else 1
    if (spec_f.in_dim, spec_f.out_dim) != (q, 1):
        raise InvalidInputError(f"slicer spec must map R^{q} -> R, got {spec_f.in_dim} -> {spec_f.out_dim}")
    if (spec_h.in_dim, spec_h.out_dim) != (p, h_out):
        raise InvalidInputError(
            f"lifting spec must map R^{p} -> R^{h_out}, got {spec_h.in_dim} -> {spec_h.out_dim}")
    f_params, f_rff = init_mlp(spec_f, make_rng(seed, "slicer", "f"))
    h_params, h_rff = init_mlp(spec_h, make_rng(seed, "slicer", "h"),
                               zero_head=relation is SlicerRelation.DEPENDENT)
    return SlicerPair(p, q, SlicerKind.NONLINEAR, relation, spec_f, spec_h,
                      f_params, h_params, f_rff, h_rff)


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def linear_slicer_pair(
    p: int,
    q: int,
    seed: int,
    relation: SlicerRelation = SlicerRelation.DEPENDENT,
) -> SlicerPair:
    """
    Linear pair: f(y) = <theta, y> / |theta| and a linear residual lifting.

    Dependent pairs start from h = zero-padding; independent pairs draw
    theta_X on S^{p-1} and theta_Y on S^{q-1} separately.
    """
    _check_dims(p, q)
    relation = SlicerRelation(relation)
    f_spec = MlpSpec(in_dim=q, out_dim=1, depth=1, rff_features=0, bias=False)
    f_params = _unit(make_rng(seed, "slicer", "f"), q)
    if relation is SlicerRelation.DEPENDENT:
        h_spec = MlpSpec(in_dim=p, out_dim=q, depth=1, rff_features=0, bias=False)
        h_params = np.zeros(p * q)
    else:
        h_spec = MlpSpec(in_dim=p, out_dim=1, depth=1, rff_features=0, bias=False)
        h_params = _unit(make_rng(seed, "slicer", "h"), p)
    return SlicerPair(p, q, SlicerKind.LINEAR, relation, f_spec, h_spec, f_params, h_params)


def make_pair_factory(cfg: SlicerConfig) -> PairFactory:
    """Pair factory (p, q, seed) -> SlicerPair for a slicer configuration."""

    def factory(p: int, q: int, seed: int) -> SlicerPair:
        if cfg.kind is SlicerKind.LINEAR:
            return linear_slicer_pair(p, q, seed, cfg.relation)
        dependent = cfg.relation is SlicerRelation.DEPENDENT
        spec_f = MlpSpec(in_dim=q, out_dim=1, hidden_width=cfg.hidden_width, depth=cfg.depth,
                         activation=cfg.activation, rff_features=cfg.rff_features,
                         rff_bandwidth=cfg.rff_bandwidth)
        spec_h = MlpSpec(in_dim=p, out_dim=q if dependent else 1,
                         hidden_width=cfg.lift_hidden_width or cfg.hidden_width,
                         depth=cfg.lift_depth or cfg.depth,
                         activation=cfg.activation, rff_features=cfg.rff_features,
                         rff_bandwidth=cfg.rff_bandwidth)
        return init_slicer_pair(p, q, spec_f, spec_h, seed, cfg.relation)

    return factory


def _points(cloud, name: str, dim: int) -> np.ndarray:
    pts = np.asarray(cloud.points if isinstance(cloud, PointCloud) else cloud, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ShapeError(f"{name} has dimension {pts.shape[-1]}, expected {dim}")
    return pts


def _pad(points: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros((points.shape[0], q))
    out[:, : points.shape[1]] = points
    return out


def _slicer(pair: SlicerPair, params: ad.Tensor, inputs: ad.Tensor) -> ad.Tensor:
    if pair.kind is SlicerKind.LINEAR:
        return _linear_forward(params, inputs)
    return mlp_forward(params, pair.f_spec, pair.f_rff, inputs)


def _source_map(pair: SlicerPair, params: ad.Tensor, inputs: ad.Tensor) -> ad.Tensor:
    """Lifting output in R^q (dependent) or source score (independent)."""
    if pair.relation is SlicerRelation.INDEPENDENT:
        if pair.kind is SlicerKind.LINEAR:
            return _linear_forward(params, inputs)
        return mlp_forward(params, pair.h_spec, pair.h_rff, inputs)
    embedded = inputs.tape.constant(_pad(inputs.data, pair.q))
    if pair.kind is SlicerKind.LINEAR:
        residual = inputs @ ad.reshape(params, (pair.p, pair.q))
    else:
        residual = mlp_forward(params, pair.h_spec, pair.h_rff, inputs)
    return embedded + residual


def pushforward_values(
    pair: SlicerPair,
    X,
    Y,
    tape: ad.Tape,
    params: Optional[ad.Tensor] = None,
    frames: Optional[Tuple[RigidTransform, RigidTransform]] = None,
) -> Tuple[ad.Tensor, ad.Tensor]:
    """
    Record s_i = f(h(x_i)) and t_j = f(y_j) on a tape.

    Args:
        pair: Slicer pair
        X: (n, p) source points
        Y: (m, q) target points
        tape: Tape to record on
        params: Flat parameter tensor; a fresh leaf of pair.params if omitted
        frames: (g_X, g_Y); when given, X and Y are the transformed clouds and
            the conjugated pair (f o g_Y^-1, g_Y o h o g_X^-1) is evaluated

    Returns:
        (n, 1) and (m, 1) tensors

    Raises:
        ShapeError: If the point dimensions do not match the pair
    """
    xs = _points(X, "X", pair.p)
    ys = _points(Y, "Y", pair.q)
    if params is None:
        params = tape.leaf(pair.params)
    f_part = ad.slice_(params, slice(0, pair.n_f))
    h_part = ad.slice_(params, slice(pair.n_f, params.shape[0]))

    g_x = g_y = None
    if frames is not None:
        g_x, g_y = frames
        xs = g_x.apply_inverse(xs)
        ys = g_y.apply_inverse(ys)

    lifted = _source_map(pair, h_part, tape.constant(xs))
    if pair.relation is SlicerRelation.INDEPENDENT:
        s = lifted
    else:
        if g_y is not None:
            n = xs.shape[0]
            shift = tape.constant(np.ones((n, 1)) @ g_y.translation[None, :])
            moved = lifted @ tape.constant(g_y.rotation.T) + shift
            lifted = (moved - shift) @ tape.constant(g_y.rotation)
        s = _slicer(pair, f_part, lifted)
    t = _slicer(pair, f_part, tape.constant(ys))
    return s, t


def evaluate_values(pair: SlicerPair, X, Y, frames=None) -> Tuple[np.ndarray, np.ndarray]:
    """Push-forward values as plain arrays (no gradient)."""
    tape = ad.Tape()
    s, t = pushforward_values(pair, X, Y, tape, params=tape.constant(pair.params), frames=frames)
    return s.data.reshape(-1).copy(), t.data.reshape(-1).copy()
