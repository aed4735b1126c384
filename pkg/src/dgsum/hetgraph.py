"""Typed document graph: word/sentence/document nodes and six weighted
undirected edge types, plus validation and export.

Edge types and weights:

* WE  - noun-word pairs whose static-vector cosine clears the threshold;
        weight = cosine.
* WO  - adjacent token occurrences within a sentence; weight 1.0.
* SS  - every sentence pair (optionally thresholded); weight = cosine of
        sentence embeddings.
* DD  - every document pair; weight = mean ROUGE-1/2/L F1.
* DS  - document to each of its sentences; weight 1.0.
* SW  - sentence to each of its token occurrences; weight 1.0.

Word nodes are per token occurrence (not per type) so that every node keeps
its original position in the serialized encoder input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rouge
from .corpus import BoundaryIndex, DocumentCluster, Sentence, layout
from .embeddings import EmbeddingTable, MeanWordEmbedder, cosine
from .errors import DataError

DOC, SENT, WORD = "document", "sentence", "word"
EDGE_TYPES = ("WE", "WO", "SS", "DD", "DS", "SW")
_KIND_RANK = {DOC: 0, SENT: 1, WORD: 2}

# Closed-class / high-frequency non-noun forms for the default heuristic
# tagger: determiners, pronouns, prepositions, conjunctions, auxiliaries,
# common adverbs and verbs. Alphabetic tokens outside this list count as
# noun candidates.
STOPWORDS = frozenset("""
a an the this that these those some any each every either neither no another
such what which whose
i me my mine myself we us our ours ourselves you your yours yourself
yourselves he him his himself she her hers herself it its itself they them
their theirs themselves who whom one ones something anything nothing
everything someone anyone everyone nobody somebody anybody everybody
about above across after against along among around at before behind below
beneath beside besides between beyond but by despite down during except for
from in inside into like near of off on onto out outside over past per since
through throughout till to toward towards under underneath until up upon
with within without
and or nor so yet although because if unless while whereas whether though
once than as
be am is are was were been being
have has had having
do does did doing done
will would shall should can could may might must ought
not never always often sometimes usually rarely seldom here there now then
today yesterday tomorrow soon already still just only even also too very
quite rather almost nearly really perhaps maybe again ever instead
meanwhile moreover however therefore thus hence anyway indeed
more most less least much many few little enough both all several own same
other others first second third next last
go goes went gone going come comes came coming get gets got getting
make makes made making take takes took taken give gives gave given
find finds found think thinks thought say says said saying
see sees saw seen know knows knew known want wants wanted
use uses used using tell tells told ask asks asked
work works worked seem seems seemed feel feels felt
try tries tried leave leaves left call calls called
keep keeps kept let lets begin began begun put puts
show shows showed shown run runs ran move moves moved
believe believed bring brings brought happen happens happened
write wrote written sit sat stand stood lose lost pay paid meet met
continue continued set sets learn learned change changed lead led
watch watched follow followed stop stops stopped speak spoke spoken
read spend spent grow grew grown open opened walk walked win won
wait waited die died send sent build built stay stayed fall fell fallen
cut cuts reach reached kill kills killed killing remain remained
pass passed sell sold report reported decide decided pull pulled
flee flees fled fleeing return returned hope hoped carry carried
break broke broken receive received agree agreed hit hits
""".split())


@dataclass(frozen=True)
class NodeId:
    kind: str
    index: int                 # ordinal within kind
    doc: int
    sent: int | None = None
    tok: int | None = None
    token_position: int = -1

    def origin(self) -> tuple:
        return (self.doc, self.sent, self.tok)

    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], self.doc,
                -1 if self.sent is None else self.sent,
                -1 if self.tok is None else self.tok)


@dataclass
class GraphConfig:
    we_threshold: float = 0.5   # 0 disables thresholding (all noun pairs kept)
    ss_threshold: float | None = None
    max_input_len: int = 4096
    tagger: object | None = None  # defaults to HeuristicNounTagger


class HeuristicNounTagger:
    """Noun candidates = alphabetic tokens not in the closed-class list."""

    def candidates(self, sentence: Sentence) -> set[int]:
        return {i for i, tok in enumerate(sentence.lower)
                if tok.isalpha() and tok not in STOPWORDS}


class AnnotatedNounTagger:
    """Reads per-token POS annotations carried by the dataset; keeps
    NOUN/PROPN."""

    KEEP = frozenset({"NOUN", "PROPN"})

    def candidates(self, sentence: Sentence) -> set[int]:
        if sentence.pos is None:
            raise DataError("sentence has no POS annotations")
        if len(sentence.pos) != len(sentence.tokens):
            raise DataError(f"POS annotations: {len(sentence.pos)} tags for "
                            f"{len(sentence.tokens)} tokens")
        return {i for i, tag in enumerate(sentence.pos) if tag in self.KEEP}


def noun_candidates(sentence: Sentence, tagger=None) -> set[int]:
    return (tagger or HeuristicNounTagger()).candidates(sentence)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class HeteroGraph:
    """Immutable typed graph. Nodes are held in canonical order (documents,
    then sentences, then words, each by origin); edges are per-type lists of
    (a, b, weight) with a < b over node-list indices."""

    def __init__(self, nodes: list[NodeId], edges: dict[str, list[tuple[int, int, float]]]):
        self.nodes = nodes
        self.edges = {t: list(edges.get(t, ())) for t in EDGE_TYPES}
        self._adj: dict[str, list[list[tuple[int, float]]]] = {}
        n = len(nodes)
        for etype in EDGE_TYPES:
            adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
            for a, b, w in self.edges[etype]:
                adj[a].append((b, w))
                adj[b].append((a, w))
            for lst in adj:
                lst.sort()
            self._adj[etype] = adj
        self._index_of = {node: i for i, node in enumerate(nodes)}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def kind_indices(self, kind: str) -> np.ndarray:
        return np.asarray([i for i, nd in enumerate(self.nodes) if nd.kind == kind],
                          dtype=np.intp)

    def token_positions(self) -> np.ndarray:
        return np.asarray([nd.token_position for nd in self.nodes], dtype=np.intp)

    def neighbors(self, node: NodeId | int, edge_type: str) -> list[tuple[NodeId, float]]:
        """Neighbors of a node along one edge type, ascending node order."""
        if edge_type not in EDGE_TYPES:
            raise DataError(f"unknown edge type {edge_type!r}")
        if isinstance(node, NodeId):
            if node not in self._index_of:
                raise DataError(f"node {node} not in graph")
            idx = self._index_of[node]
        else:
            if not 0 <= node < self.n_nodes:
                raise DataError(f"node index {node} out of range")
            idx = node
        return [(self.nodes[j], w) for j, w in self._adj[edge_type][idx]]

    def adjacency(self, edge_type: str, idx: int) -> list[tuple[int, float]]:
        return self._adj[edge_type][idx]

    def dense_channel(self, edge_type: str) -> tuple[np.ndarray, np.ndarray]:
        """(weights, mask) dense matrices for one edge type, with unit
        self-loops on the diagonal (the attention fallback)."""
        n = self.n_nodes
        w = np.zeros((n, n))
        m = np.zeros((n, n), dtype=bool)
        for a, b, weight in self.edges[edge_type]:
            w[a, b] = weight
            w[b, a] = weight
            m[a, b] = True
            m[b, a] = True
        np.fill_diagonal(w, 1.0)
        np.fill_diagonal(m, True)
        return w, m

    def union_channel(self) -> tuple[np.ndarray, np.ndarray]:
        """Type-erased union of all edges (max weight on duplicated pairs),
        with unit self-loops; the single-channel ablation graph."""
        n = self.n_nodes
        w = np.full((n, n), -np.inf)
        m = np.zeros((n, n), dtype=bool)
        for etype in EDGE_TYPES:
            for a, b, weight in self.edges[etype]:
                if weight > w[a, b]:
                    w[a, b] = weight
                    w[b, a] = weight
                m[a, b] = True
                m[b, a] = True
        w[~m] = 0.0
        np.fill_diagonal(w, 1.0)
        np.fill_diagonal(m, True)
        return w, m

    # export -----------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({
            "nodes": [{"kind": nd.kind, "index": nd.index, "doc": nd.doc,
                       "sent": nd.sent, "tok": nd.tok,
                       "token_position": nd.token_position} for nd in self.nodes],
            "edges": {t: [[a, b, w] for a, b, w in self.edges[t]] for t in EDGE_TYPES},
        })

    def to_dot(self, name: str = "cluster") -> str:
        def node_name(nd: NodeId) -> str:
            return {DOC: "d", SENT: "s", WORD: "w"}[nd.kind] + str(nd.index)

        lines = [f'graph "{name}" {{']
        for nd in self.nodes:
            lines.append(f'  {node_name(nd)} [kind="{nd.kind}" pos="{nd.token_position}"];')
        for etype in EDGE_TYPES:
            for a, b, w in self.edges[etype]:
                lines.append(f'  {node_name(self.nodes[a])} -- {node_name(self.nodes[b])} '
                             f'[type="{etype}" weight="{w:.6f}"];')
        lines.append("}")
        return "\n".join(lines)


def build_hetero_graph(cluster: DocumentCluster, table: EmbeddingTable,
                       embedder=None, cfg: GraphConfig | None = None,
                       bounds: BoundaryIndex | None = None) -> HeteroGraph:
    """Construct the typed graph for a (possibly truncated) cluster. When
    ``bounds`` is given it must come from the same cluster and max length;
    otherwise the layout is recomputed from cfg.max_input_len."""
    cfg = cfg or GraphConfig()
    if embedder is None:
        embedder = MeanWordEmbedder(table)
    tagger = cfg.tagger or HeuristicNounTagger()
    if not cluster.documents:
        raise DataError(f"cluster {cluster.id!r} has no documents")
    if bounds is None:
        bounds = layout(cluster, cfg.max_input_len)
    if not bounds.sent_slots:
        raise DataError(f"cluster {cluster.id!r}: no sentences within the length budget")

    nodes: list[NodeId] = []
    doc_node: dict[int, int] = {}
    for i, (di, pos) in enumerate(bounds.doc_slots):
        doc_node[di] = len(nodes)
        nodes.append(NodeId(kind=DOC, index=i, doc=di, token_position=pos))
    sent_node: dict[tuple[int, int], int] = {}
    for i, slot in enumerate(bounds.sent_slots):
        sent_node[(slot.doc, slot.sent)] = len(nodes)
        nodes.append(NodeId(kind=SENT, index=i, doc=slot.doc, sent=slot.sent,
                            token_position=slot.sep_pos))
    word_nodes_per_sent: dict[tuple[int, int], list[int]] = {}
    wi = 0
    for slot in bounds.sent_slots:
        sent = cluster.documents[slot.doc].sentences[slot.sent]
        lst = []
        for k in range(len(sent)):
            lst.append(len(nodes))
            nodes.append(NodeId(kind=WORD, index=wi, doc=slot.doc, sent=slot.sent,
                                tok=k, token_position=slot.tok_start + k))
            wi += 1
        word_nodes_per_sent[(slot.doc, slot.sent)] = lst

    edges: dict[str, list[tuple[int, int, float]]] = {t: [] for t in EDGE_TYPES}

    # WO / SW / DS: structural edges, weight 1.0
    for slot in bounds.sent_slots:
        words = word_nodes_per_sent[(slot.doc, slot.sent)]
        s_idx = sent_node[(slot.doc, slot.sent)]
        for a, b in zip(words, words[1:]):
            edges["WO"].append((a, b, 1.0))
        for w_idx in words:
            edges["SW"].append((s_idx, w_idx, 1.0))
        edges["DS"].append((doc_node[slot.doc], s_idx, 1.0))

    # WE: noun occurrences across the whole cluster
    noun_entries: list[tuple[int, np.ndarray]] = []
    for slot in bounds.sent_slots:
        sent = cluster.documents[slot.doc].sentences[slot.sent]
        words = word_nodes_per_sent[(slot.doc, slot.sent)]
        for k in noun_candidates(sent, tagger):
            noun_entries.append((words[k], table.get(sent.lower[k])))
    for i in range(len(noun_entries)):
        a, va = noun_entries[i]
        for j in range(i + 1, len(noun_entries)):
            b, vb = noun_entries[j]
            sim = cosine(va, vb)
            if cfg.we_threshold and sim < cfg.we_threshold:
                continue
            edges["WE"].append((min(a, b), max(a, b), sim))

    # SS: every sentence pair, cosine of sentence embeddings
    sent_keys = [(slot.doc, slot.sent) for slot in bounds.sent_slots]
    sent_vecs = []
    is_summary_graph = cluster.id.endswith(":summary")
    for slot in bounds.sent_slots:
        sent = cluster.documents[slot.doc].sentences[slot.sent]
        if is_summary_graph:
            base = cluster.id[:-len(":summary")]
            key = (base, "summary", slot.doc, slot.sent)
        else:
            key = (cluster.id, slot.doc, slot.sent)
        sent_vecs.append(embedder.embed(sent, key=key))
    for i in range(len(sent_keys)):
        for j in range(i + 1, len(sent_keys)):
            sim = cosine(sent_vecs[i], sent_vecs[j])
            if cfg.ss_threshold is not None and sim < cfg.ss_threshold:
                continue
            edges["SS"].append((sent_node[sent_keys[i]], sent_node[sent_keys[j]], sim))

    # DD: every document pair, mean ROUGE F1 over retained sentences
    retained = bounds.retained_sentences()
    doc_tokens = {
        di: [cluster.documents[di].sentences[si].lower for si in sents]
        for di, sents in retained.items()
    }
    doc_ids = sorted(doc_node)
    for i in range(len(doc_ids)):
        for j in range(i + 1, len(doc_ids)):
            w = rouge.rouge_avg_f1(doc_tokens[doc_ids[i]], doc_tokens[doc_ids[j]])
            edges["DD"].append((doc_node[doc_ids[i]], doc_node[doc_ids[j]], w))

    return HeteroGraph(nodes, edges)


def validate_graph(g: HeteroGraph) -> ValidationReport:
    """Check every structural invariant; the report lists violations."""
    report = ValidationReport()
    add = report.violations.append
    n = g.n_nodes

    for etype in EDGE_TYPES:
        for a, b, w in g.edges[etype]:
            if a == b:
                add(f"{etype}: self-edge at node {a}")
            if not (0 <= a < n and 0 <= b < n):
                add(f"{etype}: edge ({a},{b}) out of range")
                continue
            if etype in ("WO", "DS", "SW") and w != 1.0:
                add(f"{etype}: weight {w} != 1.0 on ({a},{b})")
            if etype == "DD" and not (0.0 <= w <= 1.0):
                add(f"DD: weight {w} outside [0,1] on ({a},{b})")
            if etype in ("SS", "WE") and not (-1.0 <= w <= 1.0 + 1e-12):
                add(f"{etype}: weight {w} outside [-1,1] on ({a},{b})")
        seen = set()
        for a, b, w in g.edges[etype]:
            pair = (min(a, b), max(a, b))
            if pair in seen:
                add(f"{etype}: duplicate edge {pair}")
            seen.add(pair)
        for i in range(n):
            for j, w in g.adjacency(etype, i):
                back = dict(g.adjacency(etype, j))
                if i not in back or back[i] != w:
                    add(f"{etype}: adjacency asymmetry between {i} and {j}")

    sent_idx = g.kind_indices(SENT)
    word_idx = g.kind_indices(WORD)
    doc_idx = g.kind_indices(DOC)
    for i in sent_idx:
        if len(g.adjacency("DS", int(i))) != 1:
            add(f"sentence node {i}: expected exactly one DS edge")
    for i in word_idx:
        if len(g.adjacency("SW", int(i))) != 1:
            add(f"word node {i}: expected exactly one SW edge")
    expected_dd = len(doc_idx) * (len(doc_idx) - 1) // 2
    if len(g.edges["DD"]) != expected_dd:
        add(f"DD: {len(g.edges['DD'])} edges, complete graph needs {expected_dd}")

    if n:
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for etype in EDGE_TYPES:
                for j, _ in g.adjacency(etype, i):
                    if j not in seen:
                        seen.add(j)
                        stack.append(j)
        if len(seen) != n:
            add(f"graph not connected: reached {len(seen)} of {n} nodes")
    return report
