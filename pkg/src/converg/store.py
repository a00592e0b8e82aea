"""The condensed version store.

Each distinct (graph, subject, predicate, object) gets one entry whose
bitmap records the versions containing it: bit m-1 set means the quad was
present in version m. Ingesting a version appends one bit position; graphs
absent from a version simply contribute zeros. The flat form (one quad per
set bit, graph renamed to the versioned-named-graph IRI, plus linking
metadata in the default graph) is derivable at any time and round-trips.

Concurrency: single writer. `ingest_version` and `save_snapshot` need
exclusive access; queries only read and may run concurrently between writes.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .dictionary import TermDictionary
from .errors import IngestError, SnapshotError, UnknownVngError
from .model import (
    VNG_NS,
    MetadataGraph,
    Quad,
    Term,
    VngRecord,
    blank,
    mint_vng_iri,
)
from .nquads import parse_nquads, parse_term, serialize_term

SNAPSHOT_FORMAT_VERSION = 1
_SNAPSHOT_FILES = ("MANIFEST", "DICT", "VNG", "ENTRIES", "META")


def bit_for(ordinal: int) -> int:
    return 1 << (ordinal - 1)


def bitmap_ordinals(bits: int) -> Iterator[int]:
    """Set positions as 1-based version ordinals, ascending."""
    while bits:
        low = bits & -bits
        yield low.bit_length()
        bits ^= low


def render_bitmap(bits: int, width: int) -> str:
    """Textual bitstring with version 1 leftmost, zero-padded to `width`."""
    return "".join("1" if bits >> i & 1 else "0" for i in range(width))


def parse_bitmap(text: str) -> int:
    bits = 0
    for i, c in enumerate(text):
        if c == "1":
            bits |= 1 << i
        elif c != "0":
            raise ValueError(f"bitstring may only contain 0/1, got {c!r}")
    return bits


@dataclass
class CondensedEntry:
    """One (graph, s, p, o) with its version-presence bitmap."""

    graph: int
    subject: int
    predicate: int
    object: int
    bits: int

    def key(self) -> tuple[int, int, int, int]:
        return (self.graph, self.subject, self.predicate, self.object)


@dataclass
class IngestReport:
    ordinal: int
    minted_vngs: list[VngRecord]
    quad_count: int
    new_entry_count: int
    duplicate_count: int


@dataclass
class StoreStats:
    version_count: int
    graph_count: int
    vng_count: int
    entry_count: int
    flat_quad_count: int
    metadata_triple_count: int


@dataclass
class Store:
    dictionary: TermDictionary = field(default_factory=TermDictionary)
    entries: list[CondensedEntry] = field(default_factory=list)
    vng_records: list[VngRecord] = field(default_factory=list)
    version_count: int = 0
    vng_counter: int = 0
    version_labels: dict[int, str] = field(default_factory=dict)
    user_metadata: list[tuple[Term, Term, Term]] = field(default_factory=list)

    def __post_init__(self):
        self._entry_map: dict[tuple[int, int, int, int], int] = {}
        self._by_graph: dict[int, list[int]] = {}
        self._by_graph_pred: dict[tuple[int, int], list[int]] = {}
        self._by_subject: dict[int, list[int]] = {}
        self._vng_by_iri: dict[Term, tuple[int, int]] = {}
        self._vng_by_pair: dict[tuple[int, int], Term] = {}
        for pos, entry in enumerate(self.entries):
            self._index_entry(pos, entry)
        for rec in self.vng_records:
            self._index_vng(rec)

    # ------------------------------------------------------------------ write

    def ingest_version(self, doc, label: Optional[str] = None) -> IngestReport:
        """Load one version document as the next ordinal.

        Every quad must carry a named graph; blank node labels are rescoped
        per document so separate loads never share blank nodes; duplicate
        quads within the document collapse silently. Validation happens
        up front and the mutation phase cannot fail, so a raised error
        leaves the store untouched.
        """
        quads = doc.quads if hasattr(doc, "quads") else list(doc)
        if label is not None and ("\n" in label or "\r" in label):
            raise IngestError("version label must be a single line")
        ordinal = self.version_count + 1

        blank_names: dict[str, Term] = {}

        def rescope(term: Term) -> Term:
            if not term.is_blank:
                return term
            scoped = blank_names.get(term.lexical)
            if scoped is None:
                scoped = blank(f"v{ordinal}b{len(blank_names)}")
                blank_names[term.lexical] = scoped
            return scoped

        seen: set[tuple[Term, Term, Term, Term]] = set()
        deduped: list[tuple[Term, Term, Term, Term]] = []
        graph_order: list[Term] = []
        duplicates = 0
        for quad in quads:
            if quad.graph is None:
                raise IngestError(
                    "version documents may not touch the default graph; "
                    "it is reserved for metadata"
                )
            key = (rescope(quad.subject), quad.predicate, rescope(quad.object), quad.graph)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            deduped.append(key)
            if quad.graph not in graph_order:
                graph_order.append(quad.graph)

        # Mutation phase: nothing below raises.
        self.version_count = ordinal
        if label is not None:
            self.version_labels[ordinal] = label
        mask = bit_for(ordinal)
        new_entries = 0
        encode = self.dictionary.encode
        for s, p, o, g in deduped:
            sid, pid, oid = encode(s), encode(p), encode(o)
            key = (encode(g), sid, pid, oid)
            pos = self._entry_map.get(key)
            if pos is None:
                entry = CondensedEntry(key[0], sid, pid, oid, mask)
                pos = len(self.entries)
                self.entries.append(entry)
                self._index_entry(pos, entry)
                new_entries += 1
            else:
                self.entries[pos].bits |= mask
        minted: list[VngRecord] = []
        for graph in graph_order:
            self.vng_counter += 1
            rec = VngRecord(mint_vng_iri(graph, ordinal, self.vng_counter), graph, ordinal)
            self.vng_records.append(rec)
            self._index_vng(rec)
            minted.append(rec)
        if __debug__:
            self.dictionary.check_bijection()
        return IngestReport(ordinal, minted, len(deduped), new_entries, duplicates)

    def add_metadata(self, triples: Iterable[tuple[Term, Term, Term]]) -> int:
        """Extra default-graph metadata (creation date, authorship, ...).

        The two linking triples per versioned graph are maintained
        automatically and cannot be added or removed here. Returns the
        number of triples actually new.
        """
        auto = self.metadata_graph()
        added = 0
        for triple in triples:
            s, p, o = triple
            if not p.is_iri:
                raise IngestError("metadata predicate must be an IRI")
            if triple in auto or triple in self.user_metadata:
                continue
            self.user_metadata.append((s, p, o))
            added += 1
        return added

    # ------------------------------------------------------------------- read

    def metadata_graph(self) -> MetadataGraph:
        return MetadataGraph.for_records(self.vng_records, self.user_metadata)

    def lookup_pattern(
        self,
        graph: Optional[int] = None,
        subject: Optional[int] = None,
        predicate: Optional[int] = None,
        object: Optional[int] = None,
    ) -> Iterator[CondensedEntry]:
        """Entries matching the bound positions, in insertion order."""
        if graph is not None and subject is not None and predicate is not None and object is not None:
            pos = self._entry_map.get((graph, subject, predicate, object))
            if pos is not None:
                yield self.entries[pos]
            return
        if graph is not None and predicate is not None:
            candidates = self._by_graph_pred.get((graph, predicate), ())
        elif subject is not None:
            candidates = self._by_subject.get(subject, ())
        elif graph is not None:
            candidates = self._by_graph.get(graph, ())
        else:
            candidates = range(len(self.entries))
        for pos in candidates:
            entry = self.entries[pos]
            if graph is not None and entry.graph != graph:
                continue
            if subject is not None and entry.subject != subject:
                continue
            if predicate is not None and entry.predicate != predicate:
                continue
            if object is not None and entry.object != object:
                continue
            yield entry

    def graphs_in_order(self) -> list[int]:
        """Distinct graph ids in first-entry order."""
        return list(self._by_graph.keys())

    def resolve_vng(self, vng_iri: Term) -> tuple[int, int]:
        """(graph id, ordinal) for a minted vng IRI; inverse of minting."""
        pair = self._vng_by_iri.get(vng_iri)
        if pair is None:
            raise UnknownVngError(f"not a versioned named graph: {serialize_term(vng_iri)}")
        return pair

    def vng_iri_for(self, graph_id: int, ordinal: int) -> Term:
        term = self._vng_by_pair.get((graph_id, ordinal))
        if term is None:
            raise UnknownVngError(f"no versioned graph minted for graph id {graph_id}, version {ordinal}")
        return term

    def export_flat(self) -> Iterator[Quad]:
        """Every entry expanded over its set bits (graph renamed to the vng
        IRI), followed by all metadata triples as default-graph quads."""
        decode = self.dictionary.decode
        for entry in self.entries:
            s = decode(entry.subject)
            p = decode(entry.predicate)
            o = decode(entry.object)
            for ordinal in bitmap_ordinals(entry.bits):
                yield Quad(s, p, o, self._vng_by_pair[(entry.graph, ordinal)])
        for s, p, o in self.metadata_graph():
            yield Quad(s, p, o, None)

    def diff_vng(self, a: Term, b: Term) -> set[tuple[Term, Term, Term]]:
        """Triples in versioned graph `a` but not in `b`.

        Same underlying graph: decided per entry by two bit tests. Different
        graphs: materialized set difference. Both agree with the subtracting
        query over the flat form.
        """
        graph_a, ord_a = self.resolve_vng(a)
        graph_b, ord_b = self.resolve_vng(b)
        decode = self.dictionary.decode
        result: set[tuple[Term, Term, Term]] = set()
        if graph_a == graph_b:
            want, avoid = bit_for(ord_a), bit_for(ord_b)
            for pos in self._by_graph.get(graph_a, ()):
                entry = self.entries[pos]
                if entry.bits & want and not entry.bits & avoid:
                    result.add((decode(entry.subject), decode(entry.predicate), decode(entry.object)))
            return result
        mask_b = bit_for(ord_b)
        present_b = {
            (self.entries[pos].subject, self.entries[pos].predicate, self.entries[pos].object)
            for pos in self._by_graph.get(graph_b, ())
            if self.entries[pos].bits & mask_b
        }
        mask_a = bit_for(ord_a)
        for pos in self._by_graph.get(graph_a, ()):
            entry = self.entries[pos]
            if entry.bits & mask_a and (entry.subject, entry.predicate, entry.object) not in present_b:
                result.add((decode(entry.subject), decode(entry.predicate), decode(entry.object)))
        return result

    def stats(self) -> StoreStats:
        return StoreStats(
            version_count=self.version_count,
            graph_count=len(self._by_graph),
            vng_count=len(self.vng_records),
            entry_count=len(self.entries),
            flat_quad_count=sum(e.bits.bit_count() for e in self.entries),
            metadata_triple_count=2 * len(self.vng_records) + len(self.user_metadata),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Store):
            return NotImplemented
        return (
            self.version_count == other.version_count
            and self.vng_counter == other.vng_counter
            and self.version_labels == other.version_labels
            and self.dictionary == other.dictionary
            and [e.key() + (e.bits,) for e in self.entries]
            == [e.key() + (e.bits,) for e in other.entries]
            and self.vng_records == other.vng_records
            and self.user_metadata == other.user_metadata
        )

    # -------------------------------------------------------------- internals

    def _index_entry(self, pos: int, entry: CondensedEntry):
        self._entry_map[entry.key()] = pos
        self._by_graph.setdefault(entry.graph, []).append(pos)
        self._by_graph_pred.setdefault((entry.graph, entry.predicate), []).append(pos)
        self._by_subject.setdefault(entry.subject, []).append(pos)

    def _index_vng(self, rec: VngRecord):
        graph_id = self.dictionary.encode(rec.graph)
        self._vng_by_iri[rec.vng_iri] = (graph_id, rec.ordinal)
        self._vng_by_pair[(graph_id, rec.ordinal)] = rec.vng_iri


# ------------------------------------------------------------------ snapshots


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_snapshot(store: Store, directory) -> None:
    """Persist `store` as the sectioned text layout.

    CHECKSUM carries one SHA-256 digest per file. Two phases: every file
    is first written and fsynced under a temporary name, then all six are
    renamed into place (CHECKSUM last). A crash during the write phase
    leaves the previous snapshot untouched; only the brief rename burst is
    not a single atomic step.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    manifest = [
        f"format-version={SNAPSHOT_FORMAT_VERSION}",
        f"version-count={store.version_count}",
        f"vng-counter={store.vng_counter}",
    ]
    for ordinal in sorted(store.version_labels):
        manifest.append(f"label {ordinal} {store.version_labels[ordinal]}")
    dict_lines = [
        f"{tid}\t{serialize_term(term)}" for tid, term in enumerate(store.dictionary)
    ]
    vng_lines = []
    for rec in store.vng_records:
        counter = int(rec.vng_iri.lexical[len(VNG_NS):])
        graph_id = store.dictionary.lookup(rec.graph)
        vng_lines.append(f"{counter}\t{graph_id}\t{rec.ordinal}")
    entry_lines = [
        f"{e.graph}\t{e.subject}\t{e.predicate}\t{e.object}\t{render_bitmap(e.bits, store.version_count)}"
        for e in store.entries
    ]
    meta_lines = [
        f"{serialize_term(s)} {serialize_term(p)} {serialize_term(o)} ."
        for s, p, o in store.user_metadata
    ]
    contents = {
        "MANIFEST": _joined(manifest),
        "DICT": _joined(dict_lines),
        "VNG": _joined(vng_lines),
        "ENTRIES": _joined(entry_lines),
        "META": _joined(meta_lines),
    }
    checksum_lines = [f"{name} {_digest(contents[name].encode('utf-8'))}" for name in _SNAPSHOT_FILES]
    contents["CHECKSUM"] = _joined(checksum_lines)
    staged: list[tuple[str, str]] = []
    try:
        for name in _SNAPSHOT_FILES + ("CHECKSUM",):
            final = os.path.join(directory, name)
            tmp = os.path.join(directory, f".tmp.{name}")
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(contents[name])
                fh.flush()
                os.fsync(fh.fileno())
            staged.append((tmp, final))
    except BaseException:
        for tmp, _final in staged:
            try:
                os.unlink(tmp)
            except OSError:
                pass
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _joined(lines: list[str]) -> str:
    return "".join(line + "\n" for line in lines)


def load_snapshot(directory) -> Store:
    directory = os.fspath(directory)
    checksum_path = os.path.join(directory, "CHECKSUM")
    if not os.path.isfile(checksum_path):
        raise SnapshotError(f"no snapshot at {directory} (missing CHECKSUM)")
    expected: dict[str, str] = {}
    for line in _read_lines(checksum_path):
        try:
            name, digest = line.split(" ", 1)
        except ValueError:
            raise SnapshotError(f"malformed CHECKSUM line: {line!r}")
        expected[name] = digest
    raw: dict[str, str] = {}
    for name in _SNAPSHOT_FILES:
        if name not in expected:
            raise SnapshotError(f"CHECKSUM does not cover {name}")
        path = os.path.join(directory, name)
        if not os.path.isfile(path):
            raise SnapshotError(f"snapshot file missing: {name}")
        with open(path, "rb") as fh:
            data = fh.read()
        if _digest(data) != expected[name]:
            raise SnapshotError(f"checksum mismatch for {name}")
        raw[name] = data.decode("utf-8")
    return _rebuild(raw)


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [line.rstrip("\n") for line in fh if line != ""]


def _rebuild(raw: dict[str, str]) -> Store:
    manifest: dict[str, str] = {}
    labels: dict[int, str] = {}
    for line in raw["MANIFEST"].splitlines():
        if line.startswith("label "):
            try:
                _, ordinal, text = line.split(" ", 2)
                labels[int(ordinal)] = text
            except ValueError:
                raise SnapshotError(f"malformed MANIFEST label line: {line!r}")
        elif "=" in line:
            key, value = line.split("=", 1)
            manifest[key] = value
        else:
            raise SnapshotError(f"malformed MANIFEST line: {line!r}")
    try:
        format_version = int(manifest["format-version"])
        version_count = int(manifest["version-count"])
        vng_counter = int(manifest["vng-counter"])
    except (KeyError, ValueError) as exc:
        raise SnapshotError(f"MANIFEST incomplete or malformed: {exc}")
    if format_version != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotError(
            f"snapshot format {format_version} not supported (expected {SNAPSHOT_FORMAT_VERSION})"
        )

    dictionary = TermDictionary()
    for lineno, line in enumerate(raw["DICT"].splitlines()):
        try:
            tid_text, term_text = line.split("\t", 1)
            tid = int(tid_text)
            term = parse_term(term_text)
        except Exception as exc:
            raise SnapshotError(f"DICT line {lineno + 1} malformed: {exc}")
        if tid != dictionary.encode(term):
            raise SnapshotError(f"DICT ids are not dense at line {lineno + 1}")

    records: list[VngRecord] = []
    seen_counters: set[int] = set()
    seen_pairs: set[tuple[int, int]] = set()
    for lineno, line in enumerate(raw["VNG"].splitlines()):
        try:
            counter_text, graph_id_text, ordinal_text = line.split("\t")
            counter, graph_id, ordinal = int(counter_text), int(graph_id_text), int(ordinal_text)
        except ValueError:
            raise SnapshotError(f"VNG line {lineno + 1} malformed")
        if not 1 <= ordinal <= version_count or not 1 <= counter <= vng_counter:
            raise SnapshotError(f"VNG line {lineno + 1} out of range")
        if counter in seen_counters or (graph_id, ordinal) in seen_pairs:
            raise SnapshotError(f"VNG line {lineno + 1} duplicates a versioned graph")
        seen_counters.add(counter)
        seen_pairs.add((graph_id, ordinal))
        graph = dictionary.decode(graph_id)
        records.append(VngRecord(mint_vng_iri(graph, ordinal, counter), graph, ordinal))

    entries: list[CondensedEntry] = []
    seen_keys: set[tuple[int, int, int, int]] = set()
    for lineno, line in enumerate(raw["ENTRIES"].splitlines()):
        try:
            g, s, p, o, bits_text = line.split("\t")
            if len(bits_text) != version_count:
                raise ValueError("bitstring width mismatch")
            bits = parse_bitmap(bits_text)
            entry = CondensedEntry(int(g), int(s), int(p), int(o), bits)
        except ValueError as exc:
            raise SnapshotError(f"ENTRIES line {lineno + 1} malformed: {exc}")
        if bits == 0:
            raise SnapshotError(f"ENTRIES line {lineno + 1} has an all-zero bitmap")
        if entry.key() in seen_keys:
            raise SnapshotError(f"ENTRIES line {lineno + 1} duplicates a quad key")
        seen_keys.add(entry.key())
        for tid in entry.key():
            dictionary.decode(tid)  # raises on dangling ids
        entries.append(entry)

    user_metadata: list[tuple[Term, Term, Term]] = []
    for lineno, line in enumerate(raw["META"].splitlines()):
        if not line.strip():
            continue
        try:
            doc = parse_nquads(line + "\n")
        except Exception as exc:
            raise SnapshotError(f"META line {lineno + 1} malformed: {exc}")
        for quad in doc.quads:
            if quad.graph is not None:
                raise SnapshotError(f"META line {lineno + 1} must be a default-graph triple")
            user_metadata.append(quad.triple())

    store = Store(
        dictionary=dictionary,
        entries=entries,
        vng_records=records,
        version_count=version_count,
        vng_counter=vng_counter,
        version_labels=labels,
        user_metadata=user_metadata,
    )
    return store
