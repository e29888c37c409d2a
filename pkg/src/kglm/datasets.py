"""Synthetic desk-scale knowledge graphs for tests and demos.

The generator plants block structure: entities belong to clusters and
every relation links one source cluster to one target cluster, so walks
carry real signal about which tails are plausible for a (head,
relation) query.
"""

import numpy as np


def make_clustered_kg(n_entities=100, n_relations=20, n_triples=1000, n_clusters=8, seed=0):
    """Generate surface triples with cluster-to-cluster relations."""
    rng = np.random.default_rng(seed)
    cluster_of = rng.integers(n_clusters, size=n_entities)
    members = [np.flatnonzero(cluster_of == c) for c in range(n_clusters)]
    members = [m if len(m) else np.array([0]) for m in members]
    rel_src = rng.integers(n_clusters, size=n_relations)
    rel_dst = rng.integers(n_clusters, size=n_relations)
    names = [f"/c{rel_src[r]}/r{r}" for r in range(n_relations)]

    triples = []
    seen = set()
    used = set()

    def add(h, r, t):
        key = (h, r, t)
        if h == t or key in seen:
            return False
        seen.add(key)
        triples.append((f"e{h}", names[r], f"e{t}"))
        used.add(h)
        used.add(t)
        return True

    attempts = 0
    while len(triples) < n_triples and attempts < 50 * n_triples:
        attempts += 1
        r = int(rng.integers(n_relations))
        add(int(rng.choice(members[rel_src[r]])), r, int(rng.choice(members[rel_dst[r]])))
    # every entity must appear somewhere so walks can start anywhere useful
    for e in range(n_entities):
        if e in used:
            continue
        src_rels = np.flatnonzero(rel_src == cluster_of[e])
        r = int(rng.choice(src_rels)) if len(src_rels) else int(rng.integers(n_relations))
        for _ in range(100):
            if add(e, r, int(rng.choice(members[rel_dst[r]]))):
                break
    return triples


def split_triples(triples, valid_frac=0.1, test_frac=0.1, seed=0):
    """Shuffled train/valid/test split; held-out triples whose entity or
    relation would otherwise be unseen in train are moved to train."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(triples))
    n_test = int(len(triples) * test_frac)
    n_valid = int(len(triples) * valid_frac)
    shuffled = [triples[i] for i in order]
    held = shuffled[: n_test + n_valid]
    train = shuffled[n_test + n_valid :]

    ents = {h for h, _, t in train} | {t for _, _, t in train}
    rels = {r for _, r, _ in train}
    kept = []
    for h, r, t in held:
        if h in ents and t in ents and r in rels:
            kept.append((h, r, t))
        else:
            train.append((h, r, t))
            ents.add(h)
            ents.add(t)
            rels.add(r)
    test = kept[:n_test]
    valid = kept[n_test : n_test + n_valid]
    return train, valid, test


def write_triples(path, triples):
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


def write_split_files(out_dir, triples, valid_frac=0.1, test_frac=0.1, seed=0):
    """Write train.tsv/valid.tsv/test.tsv under ``out_dir``; returns the
    three paths."""
    import os

    train, valid, test = split_triples(triples, valid_frac, test_frac, seed)
    paths = []
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        p = os.path.join(out_dir, f"{name}.tsv")
        write_triples(p, rows)
        paths.append(p)
    return tuple(paths)
