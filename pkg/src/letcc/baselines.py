"""Berrut (BACC) and Lagrange (LCC) coded-computing baselines.

BACC runs the same three-layer pipeline with Berrut's first rational
barycentric form replacing both regression fits.  With alternating sign
weights on sorted nodes the interpolant has no real poles and reproduces
the node values exactly, but it is rational rather than polynomial: it
reproduces constants, not general affine functions.

LCC encodes along the degree-(K-1) interpolating polynomial through the
data.  For a polynomial computing function of degree deg(f) the worker
outputs lie on a polynomial of degree D = (K-1)*deg(f), so any D+1
survivors recover it exactly; this needs N >= (K-1)*deg(f) + S + 1 workers
to tolerate S stragglers.  Below that, we fit the highest degree the
survivors support, as a flagged approximation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npoly

from .coding import CodedBatch, Dataset, DecodeResult, normalize_survivors
from .points import InterpolationGrid

__all__ = [
    "BerrutInterpolant",
    "LagrangePolynomial",
    "LagrangeCodec",
    "berrut_eval",
    "bacc_encode",
    "bacc_decode",
    "lcc_encode",
    "lcc_decode",
    "lcc_recovery_threshold",
]

logger = logging.getLogger(__name__)

# Real-arithmetic Lagrange decoding is known to destabilize once the target
# polynomial degree reaches roughly this size.
UNSTABLE_DEGREE = 25

_NODE_HIT_TOL = 1e-14


def _barycentric_eval(nodes, weights, values, query):
    """Barycentric evaluation with exact node-coincidence handling."""
    x = np.atleast_1d(np.asarray(query, dtype=float))
    diff = x[:, None] - nodes[None, :]
    hits = np.abs(diff) < _NODE_HIT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = weights / diff
        out = (ratios @ values) / ratios.sum(axis=1, keepdims=True)
    hit_rows = hits.any(axis=1)
    if np.any(hit_rows):
        out[hit_rows] = values[np.argmax(hits[hit_rows], axis=1)]
    return out


@dataclass(frozen=True)
class BerrutInterpolant:
    """Berrut first rational form on distinct nodes with weights (-1)^j."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if nodes.size == 0:
            raise ValueError("Berrut interpolant needs at least one node")
        if values.shape[0] != nodes.size:
            raise ValueError("one value row per node required")
        if nodes.size > 1 and not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def weights(self) -> np.ndarray:
        return (-1.0) ** np.arange(self.nodes.size)

    def evaluate(self, query) -> np.ndarray:
        return _barycentric_eval(self.nodes, self.weights, self.values, query)


def berrut_eval(interp: BerrutInterpolant, query) -> np.ndarray:
    """Evaluate a Berrut interpolant (shape: (len(query), m))."""
    return interp.evaluate(query)


@dataclass(frozen=True)
class LagrangePolynomial:
    """Interpolating polynomial in barycentric second form (true weights)."""

    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    @classmethod
    def through(cls, nodes, values) -> "LagrangePolynomial":
        nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
        values = np.atleast_2d(np.asarray(values, dtype=float))
        w = np.ones(nodes.size)
        for i in range(nodes.size):
            w[i] = 1.0 / np.prod(np.delete(nodes[i] - nodes, i)) if nodes.size > 1 else 1.0
        return cls(nodes, values, w)

    def evaluate(self, query) -> np.ndarray:
        return _barycentric_eval(self.nodes, self.weights, self.values, query)


@dataclass(frozen=True)
class LagrangeCodec:
    """Degree bookkeeping for Lagrange coded computing."""

    k: int
    f_degree: int

    @property
    def target_degree(self) -> int:
        return (self.k - 1) * self.f_degree

    def recovery_threshold(self, s: int) -> int:
        """Minimum worker count N for exact recovery with S stragglers."""
        return self.target_degree + s + 1

    @property
    def min_survivors(self) -> int:
        """Survivor count needed to pin down the target polynomial."""
        return self.target_degree + 1


def lcc_recovery_threshold(k: int, f_degree: int, s: int) -> int:
    return LagrangeCodec(k, f_degree).recovery_threshold(s)


def bacc_encode(data: Dataset, grid: InterpolationGrid) -> CodedBatch:
    """Berrut interpolant through (alphas, inputs), evaluated at betas."""
    if data.k != grid.k:
        raise ValueError(f"dataset has {data.k} rows but grid has {grid.k} alphas")
    enc = BerrutInterpolant(grid.alphas, data.inputs)
    return CodedBatch(coded=enc.evaluate(grid.betas), encoder_fit=enc, grid=grid)


def bacc_decode(survivors, grid: InterpolationGrid) -> DecodeResult:
    """Berrut interpolant through surviving (beta, output) pairs, at alphas."""
    indices, outputs = normalize_survivors(survivors, grid.n)
    dec = BerrutInterpolant(grid.betas[indices], outputs)
    return DecodeResult(
        estimates=dec.evaluate(grid.alphas),
        decoder_fit=dec,
        survivor_count=indices.size,
    )


def lcc_encode(data: Dataset, grid: InterpolationGrid) -> CodedBatch:
    """Degree-(K-1) interpolating polynomial through the data, at betas."""
    if data.k != grid.k:
        raise ValueError(f"dataset has {data.k} rows but grid has {grid.k} alphas")
    enc = LagrangePolynomial.through(grid.alphas, data.inputs)
    return CodedBatch(coded=enc.evaluate(grid.betas), encoder_fit=enc, grid=grid)


def lcc_decode(survivors, grid: InterpolationGrid, f_degree: int) -> DecodeResult:
    """Polynomial decode: exact once survivors reach (K-1)*deg(f)+1.

    Below the threshold, least-squares fits the highest degree the survivor
    count supports and flags the result as degraded.
    """
    if f_degree < 0:
        raise ValueError("f_degree must be nonnegative")
    indices, outputs = normalize_survivors(survivors, grid.n)
    codec = LagrangeCodec(grid.k, f_degree)
    count = indices.size
    deg = min(codec.target_degree, count - 1)
    if codec.target_degree >= UNSTABLE_DEGREE:
        logger.warning(
            "lagrange decode targets degree %d (>= %d): real-arithmetic "
            "interpolation at this degree is numerically unstable",
            codec.target_degree, UNSTABLE_DEGREE,
        )
    coef = npoly.polyfit(grid.betas[indices], outputs, deg)
    estimates = npoly.polyval(grid.alphas, coef)
    if estimates.ndim == 1:
        estimates = estimates[:, None]
    else:
        estimates = estimates.T
    return DecodeResult(
        estimates=np.ascontiguousarray(estimates),
        decoder_fit=coef,
        survivor_count=count,
        degraded=count < codec.min_survivors,
    )
