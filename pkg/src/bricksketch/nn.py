"""Deterministic forward-pass primitives and the weight bundle file format.

The bundle is the contract between the training side and this engine: one
JSON document holding the embedding table, every hash seed, the two set
networks (phi/rho) used for memory scanning, the decode network, and all
structural hyperparameters. Loading validates every structural invariant and
rejects with a message naming the one that failed.

Forward passes are plain float64 numpy, pure and deterministic: identical
bundle and input give bitwise-identical output on one platform and agree
within 1e-6 across platforms.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
MAX_HIDDEN_WIDTH = 32
ACTIVATIONS = ("leaky_relu", "identity")


class BundleValidationError(ValueError):
    """Raised when a weight bundle violates a structural invariant."""


@dataclass
class DenseLayer:
    """One affine layer followed by an activation.

    weights has shape (out_dim, in_dim), row-major in the serialized form.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "leaky_relu"

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def forward_mlp(layers: list[DenseLayer], x: np.ndarray, leaky_slope: float = 0.01) -> np.ndarray:
    """Sequential affine-then-activation stack; x may be (in,) or (N, in)."""
    out = np.asarray(x, dtype=np.float64)
    for layer in layers:
        if out.shape[-1] != layer.in_dim:
            raise BundleValidationError(
                f"malformed bundle: input width {out.shape[-1]} != layer in_dim {layer.in_dim}"
            )
        out = out @ layer.weights.T + layer.bias
        if layer.activation == "leaky_relu":
            out = np.where(out >= 0.0, out, leaky_slope * out)
    return out


def forward_deepsets(
    phi: list[DenseLayer],
    rho: list[DenseLayer],
    elements: np.ndarray,
    extra: float,
    leaky_slope: float = 0.01,
) -> np.ndarray:
    """Permutation-invariant set network: mean-pool phi over the elements,
    concatenate the scalar extra, apply rho.

    elements is (n_elements, element_dim); mean pooling keeps the output
    invariant to the number of elements fed in, not just their order. The
    pooled features are summed in a canonical (sorted) row order so the
    invariance holds bit-for-bit, not merely up to float reassociation.
    """
    elements = np.asarray(elements, dtype=np.float64)
    if elements.ndim != 2 or elements.shape[0] == 0:
        raise ValueError("scan input must be a non-empty (n, dim) element set")
    feats = forward_mlp(phi, elements, leaky_slope)
    order = np.lexsort(feats.T)
    pooled = feats[order].mean(axis=0)
    pooled_ext = np.concatenate([pooled, [float(extra)]])
    return forward_mlp(rho, pooled_ext, leaky_slope)


LOGIT_CEILING = 60.0


def frequency_from_logit(y: float) -> float:
    """Decode-network output transform: frequencies span orders of magnitude
    and must be non-negative, so the scalar logit maps through exp(y) - 1
    clamped at zero. The trainer optimizes against the same transform. The
    logit is capped well below the float64 overflow point so a degenerate
    bundle can never turn a query into infinity."""
    return max(0.0, math.expm1(min(y, LOGIT_CEILING)))


def characteristics_from_scan(s: np.ndarray) -> tuple[float, float]:
    """(distinct-count estimate, skewness estimate) from a scan vector:
    the count decodes from log scale, the skewness is read raw."""
    return math.expm1(float(s[0])), float(s[1])


@dataclass
class WeightBundle:
    """Complete, serializable configuration of one sketch engine."""

    d1: int = 5
    d2: int = 5120
    v_dim: int = 80
    clamp_epsilon: float = 0.001
    s_dim: int = 8
    beta: float = 10000.0
    alpha_interval: tuple[float, float] = (0.5, 1.0)
    scan_subset_columns: int = 512
    leaky_slope: float = 0.01
    embedding_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    embed_seeds: list[int] = field(default_factory=list)
    address_seeds: list[int] = field(default_factory=list)
    brick_seed: int = 0
    scan_phi: list[DenseLayer] | None = None
    scan_rho: list[DenseLayer] | None = None
    dec: list[DenseLayer] | None = None
    no_scanner: bool = False
    no_normalization: bool = False
    format_version: int = FORMAT_VERSION

    @property
    def dec_input_dim(self) -> int:
        return 2 * self.d1 + 1 + self.s_dim

    def has_networks(self) -> bool:
        return self.dec is not None

    def storage_fingerprint(self) -> str:
        """Hash of every field that affects what bytes land in memory; two
        sketches may merge only when these agree."""
        payload = {
            "d1": self.d1,
            "d2": self.d2,
            "v_dim": self.v_dim,
            "clamp_epsilon": self.clamp_epsilon,
            "embed_seeds": self.embed_seeds,
            "address_seeds": self.address_seeds,
            "brick_seed": self.brick_seed,
            "no_normalization": self.no_normalization,
            "embedding_values": [float(v) for v in self.embedding_values],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _layer_to_json(layer: DenseLayer) -> dict:
    return {
        "in_dim": layer.in_dim,
        "out_dim": layer.out_dim,
        "weights": [float(w) for w in layer.weights.reshape(-1)],
        "bias": [float(b) for b in layer.bias],
        "activation": layer.activation,
    }


def _layer_from_json(obj: dict, where: str) -> DenseLayer:
    for key in ("in_dim", "out_dim", "weights", "bias", "activation"):
        if key not in obj:
            raise BundleValidationError(f"missing field {where}.{key}")
    in_dim, out_dim = int(obj["in_dim"]), int(obj["out_dim"])
    weights = np.asarray(obj["weights"], dtype=np.float64)
    bias = np.asarray(obj["bias"], dtype=np.float64)
    if weights.size != in_dim * out_dim:
        raise BundleValidationError(
            f"{where}: weights length {weights.size} != in_dim*out_dim {in_dim * out_dim}"
        )
    if bias.size != out_dim:
        raise BundleValidationError(f"{where}: bias length {bias.size} != out_dim {out_dim}")
    if obj["activation"] not in ACTIVATIONS:
        raise BundleValidationError(f"{where}: unknown activation {obj['activation']!r}")
    return DenseLayer(weights.reshape(out_dim, in_dim), bias, obj["activation"])


def _check_stack(layers: list[DenseLayer], name: str, in_dim: int, out_dim: int) -> None:
    if layers[0].in_dim != in_dim:
        raise BundleValidationError(f"{name} input dim {layers[0].in_dim} != required {in_dim}")
    if layers[-1].out_dim != out_dim:
        raise BundleValidationError(f"{name} output dim {layers[-1].out_dim} != required {out_dim}")
    for i in range(1, len(layers)):
        if layers[i].in_dim != layers[i - 1].out_dim:
            raise BundleValidationError(
                f"{name} layer {i} in_dim {layers[i].in_dim} != previous out_dim {layers[i - 1].out_dim}"
            )
    for i, layer in enumerate(layers):
        if layer.out_dim > MAX_HIDDEN_WIDTH:
            raise BundleValidationError(
                f"{name} layer {i} width {layer.out_dim} exceeds hidden limit {MAX_HIDDEN_WIDTH}"
            )


def validate_bundle(bundle: WeightBundle) -> None:
    """Check every structural invariant; raise naming the first violation."""
    if bundle.format_version != FORMAT_VERSION:
        raise BundleValidationError(f"unsupported format_version {bundle.format_version}")
    if bundle.d1 < 1 or bundle.d2 < 1 or bundle.v_dim < 1 or bundle.s_dim < 1:
        raise BundleValidationError("dimensions d1, d2, v_dim, s_dim must be positive")
    if len(bundle.embed_seeds) != bundle.d1:
        raise BundleValidationError(
            f"embed seeds count {len(bundle.embed_seeds)} != d1 {bundle.d1}"
        )
    if len(bundle.address_seeds) != bundle.d1:
        raise BundleValidationError(
            f"address seeds count {len(bundle.address_seeds)} != d1 {bundle.d1}"
        )
    values = np.asarray(bundle.embedding_values, dtype=np.float64)
    if values.size != bundle.v_dim:
        raise BundleValidationError(
            f"embedding_values length {values.size} != v_dim {bundle.v_dim}"
        )
    eps = bundle.clamp_epsilon
    if values.size and (values.min() < eps - 1e-12 or values.max() > 1.0 + 1e-12):
        raise BundleValidationError(
            f"embedding value out of range [{eps}, 1]: min {values.min()}, max {values.max()}"
        )
    lo, hi = bundle.alpha_interval
    if not lo <= hi:
        raise BundleValidationError("alpha_interval low must not exceed high")
    if not 1 <= bundle.scan_subset_columns <= bundle.d2:
        raise BundleValidationError("scan_subset_columns must lie in [1, d2]")

    has_scan = bundle.scan_phi is not None or bundle.scan_rho is not None
    if has_scan and (bundle.scan_phi is None or bundle.scan_rho is None):
        raise BundleValidationError("scan_phi and scan_rho must be present together")
    if has_scan:
        if len(bundle.scan_phi) + len(bundle.scan_rho) != 8:
            raise BundleValidationError(
                f"scan_phi+scan_rho layer count {len(bundle.scan_phi) + len(bundle.scan_rho)} != 8"
            )
        _check_stack(bundle.scan_phi, "scan_phi", bundle.d1, bundle.scan_phi[-1].out_dim)
        _check_stack(
            bundle.scan_rho, "scan_rho", bundle.scan_phi[-1].out_dim + 1, bundle.s_dim
        )
    if bundle.dec is not None:
        if len(bundle.dec) != 8:
            raise BundleValidationError(f"dec layer count {len(bundle.dec)} != 8")
        _check_stack(bundle.dec, "dec", bundle.dec_input_dim, 1)
        if not has_scan and not bundle.no_scanner:
            raise BundleValidationError(
                "decode network present without scan networks and no_scanner unset"
            )
    elif has_scan:
        raise BundleValidationError("scan networks present without a decode network")


def save_bundle(bundle: WeightBundle, path: str) -> None:
    validate_bundle(bundle)
    doc = {
        "format_version": bundle.format_version,
        "d1": bundle.d1,
        "d2": bundle.d2,
        "v_dim": bundle.v_dim,
        "clamp_epsilon": bundle.clamp_epsilon,
        "s_dim": bundle.s_dim,
        "beta": bundle.beta,
        "alpha_interval": list(bundle.alpha_interval),
        "scan_subset_columns": bundle.scan_subset_columns,
        "leaky_slope": bundle.leaky_slope,
        "embedding_values": [float(v) for v in bundle.embedding_values],
        "seeds": {
            "embed": bundle.embed_seeds,
            "address": bundle.address_seeds,
            "brick": bundle.brick_seed,
        },
        "scan_phi": None if bundle.scan_phi is None else [_layer_to_json(l) for l in bundle.scan_phi],
        "scan_rho": None if bundle.scan_rho is None else [_layer_to_json(l) for l in bundle.scan_rho],
        "dec": None if bundle.dec is None else [_layer_to_json(l) for l in bundle.dec],
        "flags": {
            "no_scanner": bundle.no_scanner,
            "no_normalization": bundle.no_normalization,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_bundle(path: str) -> WeightBundle:
    """Parse and validate a bundle file; any violated invariant is named in
    the raised error."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in (
        "format_version",
        "d1",
        "d2",
        "v_dim",
        "clamp_epsilon",
        "s_dim",
        "beta",
        "alpha_interval",
        "scan_subset_columns",
        "leaky_slope",
        "embedding_values",
        "seeds",
        "flags",
    ):
        if key not in doc:
            raise BundleValidationError(f"missing field {key}")
    seeds = doc["seeds"]
    for key in ("embed", "address", "brick"):
        if key not in seeds:
            raise BundleValidationError(f"missing field seeds.{key}")

    def stack(name: str) -> list[DenseLayer] | None:
        raw = doc.get(name)
        if raw is None:
            return None
        return [_layer_from_json(obj, f"{name}[{i}]") for i, obj in enumerate(raw)]

    bundle = WeightBundle(
        d1=int(doc["d1"]),
        d2=int(doc["d2"]),
        v_dim=int(doc["v_dim"]),
        clamp_epsilon=float(doc["clamp_epsilon"]),
        s_dim=int(doc["s_dim"]),
        beta=float(doc["beta"]),
        alpha_interval=(float(doc["alpha_interval"][0]), float(doc["alpha_interval"][1])),
        scan_subset_columns=int(doc["scan_subset_columns"]),
        leaky_slope=float(doc["leaky_slope"]),
        embedding_values=np.asarray(doc["embedding_values"], dtype=np.float64),
        embed_seeds=[int(s) for s in seeds["embed"]],
        address_seeds=[int(s) for s in seeds["address"]],
        brick_seed=int(seeds["brick"]),
        scan_phi=stack("scan_phi"),
        scan_rho=stack("scan_rho"),
        dec=stack("dec"),
        no_scanner=bool(doc["flags"].get("no_scanner", False)),
        no_normalization=bool(doc["flags"].get("no_normalization", False)),
        format_version=int(doc["format_version"]),
    )
    validate_bundle(bundle)
    return bundle


def rule_only_bundle(
    seed: int = 42,
    d1: int = 5,
    d2: int = 5120,
    v_dim: int = 80,
    clamp_epsilon: float = 0.001,
    no_normalization: bool = False,
) -> WeightBundle:
    """Bundle with the deterministic default table and derived seeds but no
    networks; enough for rule-only operation without any trained file."""
    from . import hashing

    idx = np.arange(v_dim, dtype=np.float64)
    values = clamp_epsilon + (1.0 - clamp_epsilon) * (idx + 0.5) / v_dim
    seeds = hashing.seed_sequence(seed, 2 * d1 + 1)
    return WeightBundle(
        d1=d1,
        d2=d2,
        v_dim=v_dim,
        clamp_epsilon=clamp_epsilon,
        scan_subset_columns=max(1, -(-d2 // 10)),
        embedding_values=values,
        embed_seeds=seeds[:d1],
        address_seeds=seeds[d1 : 2 * d1],
        brick_seed=seeds[2 * d1],
        no_normalization=no_normalization,
    )
