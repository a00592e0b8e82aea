"""Deterministic synthetic dataset generator.

Shapes data after the product/rating slice of the Berlin SPARQL benchmark
vocabulary: every graph asserts, for every product, one rdf:type triple and
one integer rating. Version 1 draws ratings uniformly; later versions
re-roll each rating independently with a configurable probability.

Randomness comes from a splitmix64-style hash over (seed, version, graph,
product), so any single version can be generated without materializing its
predecessors, and re-running with the same configuration is byte-identical.
How a benchmark dump would really be split into graphs is anyone's guess;
the graphs/products split here is simply a parameter.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .model import RDF_TYPE, XSD, Quad, iri, literal
from .nquads import ParsedDocument, serialize_nquads

BSBM_NS = "http://www4.wiwiss.fu-berlin.de/bizer/bsbm/"
RATING_PREDICATE = iri(BSBM_NS + "v01/vocabulary/rating2")
PRODUCT_CLASS = iri(BSBM_NS + "v01/vocabulary/Product")
GRAPH_NS = "urn:bsbm:graph:"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class GenConfig:
    products: int
    graphs: int
    versions: int
    change_rate: float
    rating_range: tuple[int, int] = (1, 100)
    seed: int = 1

    def __post_init__(self):
        if self.products < 1 or self.graphs < 1 or self.versions < 1:
            raise ValueError("products, graphs, and versions must be positive")
        if not 0.0 <= self.change_rate <= 1.0:
            raise ValueError("change_rate must be within [0, 1]")
        lo, hi = self.rating_range
        if lo > hi:
            raise ValueError("rating_range low bound exceeds high bound")


def _mix(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _derive(*fields: int) -> int:
    state = 0
    for field in fields:
        state = _mix(state ^ (field & _MASK64))
    return state


def _rating(cfg: GenConfig, ordinal: int, graph: int, product: int) -> int:
    lo, hi = cfg.rating_range
    span = hi - lo + 1
    # Walk back to the most recent version that re-rolled this rating;
    # version 1 always rolls. Modulo bias is irrelevant at these spans.
    m = ordinal
    while m > 1:
        chance = _derive(cfg.seed, 1, m, graph, product) / float(1 << 64)
        if chance < cfg.change_rate:
            break
        m -= 1
    return lo + _derive(cfg.seed, 2, m, graph, product) % span


def generate_version(cfg: GenConfig, ordinal: int) -> ParsedDocument:
    """Quads of one version: two per (graph, product), graphs in order."""
    if not 1 <= ordinal <= cfg.versions:
        raise ValueError(f"ordinal {ordinal} outside 1..{cfg.versions}")
    integer_dt = XSD + "integer"
    doc = ParsedDocument()
    for g in range(1, cfg.graphs + 1):
        graph = iri(f"{GRAPH_NS}{g}")
        for p in range(1, cfg.products + 1):
            product = iri(f"{BSBM_NS}v01/instances/Product{p}")
            doc.quads.append(Quad(product, RDF_TYPE, PRODUCT_CLASS, graph))
            rating = _rating(cfg, ordinal, g, p)
            doc.quads.append(
                Quad(product, RATING_PREDICATE, literal(str(rating), datatype=integer_dt), graph)
            )
    return doc


def write_version_files(cfg: GenConfig, out_dir) -> list[str]:
    """Write v0001.nq .. vNNNN.nq under `out_dir`; returns the paths."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for ordinal in range(1, cfg.versions + 1):
        path = os.path.join(out_dir, f"v{ordinal:04d}.nq")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(serialize_nquads(generate_version(cfg, ordinal).quads))
        paths.append(path)
    return paths
