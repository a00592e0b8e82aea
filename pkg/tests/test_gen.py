import os
from collections import Counter

import pytest

from converg.gen import (
    GRAPH_NS,
    RATING_PREDICATE,
    GenConfig,
    generate_version,
    write_version_files,
)
from converg.model import XSD, iri
from converg.nquads import parse_nquads, serialize_nquads
from converg.store import Store, render_bitmap


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(products=0, graphs=1, versions=1, change_rate=0.0)
    with pytest.raises(ValueError):
        GenConfig(products=1, graphs=1, versions=1, change_rate=1.5)
    with pytest.raises(ValueError):
        GenConfig(products=1, graphs=1, versions=1, change_rate=0.5, rating_range=(9, 3))


def test_zero_change_rate_repeats_version_one():
    cfg = GenConfig(products=2, graphs=1, versions=2, change_rate=0.0, seed=11)
    v1 = serialize_nquads(generate_version(cfg, 1).quads)
    v2 = serialize_nquads(generate_version(cfg, 2).quads)
    assert v1 == v2


def test_quads_per_version_is_two_per_product_and_graph():
    cfg = GenConfig(products=7, graphs=3, versions=2, change_rate=0.3, seed=2)
    doc = generate_version(cfg, 1)
    assert len(doc.quads) == 2 * 7 * 3
    by_graph = Counter(q.graph for q in doc.quads)
    assert by_graph == {iri(f"{GRAPH_NS}{g}"): 14 for g in (1, 2, 3)}


def test_same_config_is_byte_identical():
    cfg = GenConfig(products=5, graphs=2, versions=3, change_rate=0.4, seed=33)
    for ordinal in (1, 2, 3):
        a = serialize_nquads(generate_version(cfg, ordinal).quads)
        b = serialize_nquads(generate_version(cfg, ordinal).quads)
        assert a == b


def test_versions_are_generable_out_of_order():
    cfg = GenConfig(products=4, graphs=2, versions=4, change_rate=0.5, seed=9)
    direct = serialize_nquads(generate_version(cfg, 4).quads)
    for ordinal in (1, 2, 3):
        generate_version(cfg, ordinal)
    assert serialize_nquads(generate_version(cfg, 4).quads) == direct


def test_ordinal_bounds_checked():
    cfg = GenConfig(products=1, graphs=1, versions=2, change_rate=0.0)
    with pytest.raises(ValueError):
        generate_version(cfg, 0)
    with pytest.raises(ValueError):
        generate_version(cfg, 3)


def test_zero_change_rate_gives_all_ones_bitmaps():
    cfg = GenConfig(products=3, graphs=2, versions=4, change_rate=0.0, seed=5)
    store = Store()
    for ordinal in range(1, 5):
        store.ingest_version(generate_version(cfg, ordinal))
    rating_id = store.dictionary.lookup(RATING_PREDICATE)
    rating_entries = [e for e in store.entries if e.predicate == rating_id]
    assert len(rating_entries) == 6
    assert all(render_bitmap(e.bits, 4) == "1111" for e in rating_entries)


def test_full_change_rate_density_is_near_uniform():
    # With re-rolls every version, each rating value should hold roughly a
    # 1/range share of all (graph, product, version) slots.
    cfg = GenConfig(
        products=50, graphs=2, versions=40, change_rate=1.0, rating_range=(1, 50), seed=17
    )
    store = Store()
    for ordinal in range(1, cfg.versions + 1):
        store.ingest_version(generate_version(cfg, ordinal))
    rating_id = store.dictionary.lookup(RATING_PREDICATE)
    slots = cfg.products * cfg.graphs * cfg.versions
    per_value: Counter = Counter()
    for e in store.entries:
        if e.predicate != rating_id:
            continue
        value = store.dictionary.decode(e.object).lexical
        per_value[value] += e.bits.bit_count()
    assert sum(per_value.values()) == slots
    span = cfg.rating_range[1] - cfg.rating_range[0] + 1
    uniform = 1.0 / span
    for value, bits in per_value.items():
        density = bits / slots
        assert 0.3 * uniform < density < 2.5 * uniform, (value, density)


def test_write_version_files(tmp_path):
    cfg = GenConfig(products=2, graphs=2, versions=3, change_rate=0.2, seed=4)
    paths = write_version_files(cfg, tmp_path)
    assert [os.path.basename(p) for p in paths] == ["v0001.nq", "v0002.nq", "v0003.nq"]
    store = Store()
    for path in paths:
        with open(path, "rb") as fh:
            doc = parse_nquads(fh.read(), require_graph=True)
        store.ingest_version(doc)
    stats = store.stats()
    assert stats.version_count == 3
    assert stats.vng_count == 6
    assert stats.flat_quad_count == 3 * 2 * 2 * 2
    integer = XSD + "integer"
    lo, hi = cfg.rating_range
    for e in store.entries:
        term = store.dictionary.decode(e.object)
        if term.is_literal and term.datatype == integer:
            assert lo <= int(term.lexical) <= hi
