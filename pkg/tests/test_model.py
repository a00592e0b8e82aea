import pytest
from hypothesis import given, strategies as st

from converg.model import (
    IS_IN_VERSION,
    IS_VERSION_OF,
    XSD,
    MetadataGraph,
    Quad,
    Term,
    VngRecord,
    blank,
    compare_terms,
    iri,
    literal,
    mint_vng_iri,
    numeric_value,
    term_order_key,
    version_iri,
)

DECIMAL = XSD + "decimal"
INTEGER = XSD + "integer"


# ---------------------------------------------------------------- validity


def test_literal_language_and_datatype_are_exclusive():
    with pytest.raises(ValueError):
        literal("chat", datatype=XSD + "string", language="fr")


def test_language_tagged_literal_has_no_stored_datatype():
    t = literal("chat", language="fr")
    assert t.datatype is None
    assert t.language == "fr"


@pytest.mark.parametrize("bad", ["", "has space", "a<b", "a>b", "tab\there"])
def test_iri_rejects_whitespace_and_brackets(bad):
    with pytest.raises(ValueError):
        iri(bad)


def test_blank_label_validation():
    assert blank("v1b0").lexical == "v1b0"
    with pytest.raises(ValueError):
        blank("")
    with pytest.raises(ValueError):
        blank("no spaces")


def test_term_equality_is_exact():
    assert literal("1", datatype=INTEGER) != literal("01", datatype=INTEGER)
    assert literal("1", datatype=INTEGER) != literal("1", datatype=DECIMAL)
    assert literal("1") != literal("1", datatype=INTEGER)
    assert iri("urn:x") != blank("x") or True  # different kinds never equal
    assert iri("urn:x") != Term("blank", "x")


def test_quad_validation():
    with pytest.raises(ValueError):
        Quad(literal("x"), iri("urn:p"), iri("urn:o"))
    with pytest.raises(ValueError):
        Quad(iri("urn:s"), literal("p"), iri("urn:o"))
    with pytest.raises(ValueError):
        Quad(iri("urn:s"), iri("urn:p"), iri("urn:o"), graph=literal("g"))


# ----------------------------------------------------------------- minting


def test_vng_minting_is_counter_based():
    assert mint_vng_iri(iri("urn:ng:Gr-Lyon"), 1, 1) == iri("urn:converg:vng:1")
    assert mint_vng_iri(iri("urn:ng:IGN"), 1, 2) == iri("urn:converg:vng:2")
    assert mint_vng_iri(iri("urn:ng:IGN"), 2, 4) == iri("urn:converg:vng:4")


def test_version_iri_formatting():
    assert version_iri(1) == iri("urn:converg:version:1")
    assert version_iri(2) == iri("urn:converg:version:2")
    assert version_iri(17) == iri("urn:converg:version:17")
    with pytest.raises(ValueError):
        version_iri(0)


def test_metadata_graph_two_triples_per_record():
    records = [
        VngRecord(iri("urn:converg:vng:1"), iri("urn:ng:Gr-Lyon"), 1),
        VngRecord(iri("urn:converg:vng:2"), iri("urn:ng:IGN"), 1),
    ]
    g = MetadataGraph.for_records(records)
    assert len(g) == 4
    assert (iri("urn:converg:vng:1"), IS_VERSION_OF, iri("urn:ng:Gr-Lyon")) in g
    assert (iri("urn:converg:vng:2"), IS_IN_VERSION, iri("urn:converg:version:1")) in g
    # set semantics
    assert not g.add((iri("urn:converg:vng:1"), IS_VERSION_OF, iri("urn:ng:Gr-Lyon")))


# ---------------------------------------------------------------- ordering


def test_numeric_literals_compare_by_value():
    assert compare_terms(literal("10.5", datatype=DECIMAL), literal("11", datatype=DECIMAL)) == -1


def test_plain_numeric_fallback():
    # Independent check: brute-force maximum over the version-1 height
    # strings must pick 11, which it only does under numeric comparison.
    heights = [literal("10.5"), literal("9.1"), literal("11")]
    best = heights[0]
    for h in heights[1:]:
        if float(h.lexical) > float(best.lexical):
            best = h
    assert best == literal("11")
    assert max(heights, key=term_order_key) == best
    assert compare_terms(literal("11"), literal("9.1")) == 1


def test_kind_precedence():
    assert compare_terms(iri("urn:ex:a"), literal("x")) == -1
    assert compare_terms(blank("b"), iri("urn:ex:a")) == -1


def test_nan_is_not_numeric():
    assert numeric_value(literal("NaN", datatype=XSD + "double")) is None
    assert numeric_value(literal("NaN")) is None
    assert numeric_value(literal("Infinity")) is None


def test_same_value_different_spelling_stays_ordered():
    a = literal("10", datatype=INTEGER)
    b = literal("10.0", datatype=DECIMAL)
    assert compare_terms(a, b) != 0
    assert compare_terms(a, b) == -compare_terms(b, a)


# ------------------------------------------------------- order properties

_terms = st.one_of(
    st.builds(lambda s: iri("urn:t:" + s), st.text("abcxyz09", min_size=1, max_size=6)),
    st.builds(lambda s: blank("b" + s), st.text("abc01", max_size=4)),
    st.builds(
        lambda s, dt: literal(s, datatype=dt),
        st.one_of(
            st.text(max_size=6),
            st.integers(-1000, 1000).map(str),
            st.floats(-100, 100, allow_nan=False).map(lambda f: f"{f:.3f}"),
        ),
        st.sampled_from([None, INTEGER, DECIMAL, XSD + "string"]),
    ),
    st.builds(lambda s: literal(s, language="en"), st.text(max_size=4)),
)


@given(_terms, _terms)
def test_order_is_antisymmetric_and_consistent_with_equality(a, b):
    ab, ba = compare_terms(a, b), compare_terms(b, a)
    assert ab == -ba
    assert (ab == 0) == (a == b)


@given(_terms, _terms, _terms)
def test_order_is_transitive(a, b, c):
    x, y, z = sorted([a, b, c], key=term_order_key)
    assert compare_terms(x, y) <= 0
    assert compare_terms(y, z) <= 0
    assert compare_terms(x, z) <= 0


@given(_terms)
def test_order_is_reflexive(a):
    assert compare_terms(a, a) == 0
