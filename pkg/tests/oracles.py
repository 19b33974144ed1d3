"""Slow, independent reference implementations used by unit and acceptance tests.

None of these import the code they check; they recompute from raw inputs.
"""

from __future__ import annotations

import math
import random
from collections import Counter

from crossdoc.corpus import Document, Mention, TextPath, make_bag


# -- knowledge graph paths ---------------------------------------------------


def random_graph(seed, max_nodes=50, max_edges=200, n_props=4):
    """Random triples over Q-ids; returns (triples, labels)."""
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    m = rng.randint(0, max_edges)
    nodes = [f"Q{i}" for i in range(n)]
    props = [f"P{i}" for i in range(n_props)]
    triples = set()
    for _ in range(m):
        triples.add((rng.choice(nodes), rng.choice(props), rng.choice(nodes)))
    labels = {x: f"lab-{x}" for x in nodes + props}
    return sorted(triples), labels, nodes


def undirected_adjacency(triples):
    adj = {}
    for s, p, o in triples:
        adj.setdefault(s, set()).add((p, o))
        if s != o:
            adj.setdefault(o, set()).add((p, s))
    return adj


def exhaustive_path(triples, source, target, max_hops):
    """Shortest simple path (hop tuples), lexicographically smallest among ties; None if absent.

    Iterative deepening: enumerates every simple path of at most ``limit`` edges by DFS,
    raising the limit until a path appears or ``max_hops`` is exhausted.
    """
    if source == target:
        return ()
    adj = undirected_adjacency(triples)

    def dfs(node, visited, path, limit, found):
        if len(path) == limit:
            return
        for prop, other in adj.get(node, ()):
            if other in visited:
                continue
            step = path + [(prop, other)]
            if other == target:
                found.append(tuple(step))
                continue
            visited.add(other)
            dfs(other, visited, step, limit, found)
            visited.discard(other)

    for limit in range(1, max_hops + 1):
        found = []
        dfs(source, {source}, [], limit, found)
        if found:
            shortest = min(len(p) for p in found)
            return min(p for p in found if len(p) == shortest)
    return None


# -- sentence filters --------------------------------------------------------


def random_bag(seed, max_sentences=100, n_bridges=8, max_paths=4):
    """Random bag with at most ``max_sentences`` sentences in total."""
    rng = random.Random(seed)
    e_s, e_o = "S", "O"
    pool = [f"B{i}" for i in range(n_bridges)]
    n_paths = rng.randint(1, max_paths)
    per_doc = max(1, max_sentences // (2 * n_paths))
    paths = []
    for j in range(n_paths):
        docs = []
        for side, anchor in (("s", e_s), ("t", e_o)):
            sents, mentions = [], []
            n_sent = rng.randint(1, per_doc)
            anchor_at = rng.randrange(n_sent)
            for i in range(n_sent):
                ents = set(rng.sample(pool, rng.randint(0, 3)))
                if i == anchor_at:
                    ents.add(anchor)
                if rng.random() < 0.1:
                    ents.add(e_o if anchor == e_s else e_s)
                toks = [f"w{rng.randrange(30)}" for _ in range(rng.randint(len(ents) + 1, len(ents) + 8))]
                slots = rng.sample(range(len(toks)), len(ents))
                for ent, pos in zip(sorted(ents), slots):
                    toks[pos] = ent.lower()
                    mentions.append(Mention(ent, i, pos, pos + 1))
                sents.append(tuple(toks))
            docs.append(Document(f"b{seed}-p{j}-{side}", tuple(sents), tuple(mentions)))
        paths.append(TextPath(f"p{j}", docs[0], docs[1]))
    return make_bag(f"bag{seed}", e_s, e_o, paths)


def naive_mention_scores(bag, lam, eta, kappa, mode="either"):
    """{path_id: {entity: (s1, s2, s3, total)}} by direct double loops over sentences."""
    out = {}
    for p in bag.paths:
        sentence_sets = []
        for doc in (p.source_doc, p.target_doc):
            for i in range(len(doc.sentences)):
                sentence_sets.append({m.entity for m in doc.mentions if m.sentence_index == i})
        bridges = (p.source_doc.entities | p.target_doc.entities) - {bag.source, bag.target}

        def theta1(e):
            for s in sentence_sets:
                if e not in s:
                    continue
                if mode == "both" and bag.source in s and bag.target in s:
                    return True
                if mode == "either" and (bag.source in s or bag.target in s):
                    return True
            return False

        scores = {}
        for e in bridges:
            s1 = 1 if theta1(e) else 0
            partners = set()
            for s in sentence_sets:
                if e in s:
                    for o in s:
                        if o != e and o in bridges and theta1(o):
                            partners.add(o)
            s2 = len(partners)
            s3 = 0
            for q in bag.paths:
                if e in (q.source_doc.entities | q.target_doc.entities) - {bag.source, bag.target}:
                    s3 += 1
            scores[e] = (s1, s2, s3, lam * s1 + eta * s2 + kappa * s3)
        out[p.path_id] = scores
    return out


def naive_top_k(bag, scores, k, use_entity=True):
    """Top-k sentence refs (path_id, role, index) by summed bridge score, ties by ref."""
    rows = []
    for p in bag.paths:
        bridges = (p.source_doc.entities | p.target_doc.entities) - {bag.source, bag.target}
        for role, doc in (("source", p.source_doc), ("target", p.target_doc)):
            for i in range(len(doc.sentences)):
                ents = {m.entity for m in doc.mentions if m.sentence_index == i}
                imp = 0.0
                if use_entity:
                    for e in sorted(ents & bridges):
                        imp += scores[p.path_id][e][3]
                rows.append(((p.path_id, role, i), imp))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:k]


# -- metrics -----------------------------------------------------------------


def slow_f1(predictions, gold):
    tp = fp = fn = 0
    for p, g in zip(predictions, gold):
        for r in p:
            if r in g:
                tp += 1
            else:
                fp += 1
        for r in g:
            if r not in p:
                fn += 1
    if tp == 0:
        return 0.0
    prec = tp / (tp + fp)
    rec = tp / (tp + fn)
    return 2 * prec * rec / (prec + rec)


def slow_pr_auc(scored):
    """Recompute precision/recall at every distinct threshold; step integration."""
    n_pos = sum(1 for _, y in scored if y)
    thresholds = sorted({s for s, _ in scored}, reverse=True)
    area, prev_recall = 0.0, 0.0
    for t in thresholds:
        above = [y for s, y in scored if s >= t]
        tp = sum(1 for y in above if y)
        precision = tp / len(above)
        recall = tp / n_pos
        area += precision * (recall - prev_recall)
        prev_recall = recall
    return area


# -- retrieval ---------------------------------------------------------------


def random_documents(seed, n_docs=20, n_entities=8, vocab=25):
    rng = random.Random(seed)
    docs = []
    for d in range(n_docs):
        sents, mentions = [], []
        for i in range(rng.randint(1, 4)):
            toks = [f"t{rng.randrange(vocab)}" for _ in range(rng.randint(3, 9))]
            for _ in range(rng.randint(0, 2)):
                pos = rng.randrange(len(toks))
                ent = f"E{rng.randrange(n_entities)}"
                toks[pos] = ent.lower()
                if not any(m.sentence_index == i and m.token_start == pos for m in mentions):
                    mentions.append(Mention(ent, i, pos, pos + 1))
            sents.append(tuple(toks))
        docs.append(Document(f"doc{d:02d}", tuple(sents), tuple(mentions)))
    return docs


def exhaustive_ranking(e_s, e_o, docs, w_count, w_shared, w_tfidf):
    """[(src_id, tgt_id, combined)] sorted by (-combined, ids), from first principles."""
    n = len(docs)
    terms = {d.doc_id: [t.lower() for s in d.sentences for t in s] for d in docs}
    df = Counter()
    for ts in terms.values():
        df.update(set(ts))
    vecs = {}
    for doc_id, ts in terms.items():
        tf = Counter(ts)
        v = {t: c * math.log(n / df[t]) for t, c in tf.items()}
        norm = math.sqrt(sum(x * x for x in v.values()))
        vecs[doc_id] = {t: x / norm for t, x in v.items()} if norm > 0 else {}

    def ents(d):
        return {m.entity for m in d.mentions}

    raw = []
    for s in docs:
        if e_s not in ents(s):
            continue
        for t in docs:
            if e_o not in ents(t) or s.doc_id == t.doc_id:
                continue
            shared = len(ents(s) & ents(t))
            if shared == 0:
                continue
            count = sum(m.entity == e_s for m in s.mentions) + sum(m.entity == e_o for m in t.mentions)
            sim = sum(x * vecs[t.doc_id].get(k, 0.0) for k, x in vecs[s.doc_id].items())
            raw.append((s.doc_id, t.doc_id, count, shared, sim))
    if not raw:
        return []

    def norm(col):
        vals = [r[col] for r in raw]
        lo, hi = min(vals), max(vals)
        return [0.0 if hi == lo else (v - lo) / (hi - lo) for v in vals]

    a, b, c = norm(2), norm(3), norm(4)
    out = [(r[0], r[1], w_count * x + w_shared * y + w_tfidf * z) for r, x, y, z in zip(raw, a, b, c)]
    out.sort(key=lambda r: (-r[2], r[0], r[1]))
    return out
