"""Pipeline stages: CRF tagger, arc models, tree assembly."""

import numpy as np
import pytest

from proptree.data import Document, Entity, Mention, bio_encode
from proptree.pipeline.crf import (
    CrfModel,
    crf_objective,
    emission_features,
    feature_index_from_corpus,
    tagset_from_corpus,
    train_crf,
)
from proptree.pipeline.edge_models import (
    LtmModel,
    MttModel,
    edge_feature_index,
    extract_edge_features,
    mtt_log_partition_and_marginals,
    train_ltm,
    train_mtt,
)
from proptree.mst import chu_liu_edmonds
from proptree.pipeline.predict import (
    entities_from_tags,
    entity_graph,
    greedy_entity_parents,
    parents_form_tree,
    pipeline_predict,
)
from proptree.synthetic import SyntheticConfig, generate_corpus

from helpers import (
    arborescence_log_sum,
    crf_enumerate,
    finite_difference,
    max_rel_err,
)


def toy_docs():
    return generate_corpus(SyntheticConfig(n_docs=12, seed=4))


def random_crf(tokens, k=3, seed=0):
    feats = sorted({f for i in range(len(tokens)) for f in emission_features(tokens, i)})
    model = CrfModel([f"t{j}" for j in range(k)], {f: i for i, f in enumerate(feats)})
    rng = np.random.default_rng(seed)
    model.w_emit.data[:] = rng.normal(size=model.w_emit.shape)
    model.w_trans.data[:] = rng.normal(size=model.w_trans.shape)
    return model


def test_emission_feature_window():
    tokens = ["Royal", "flat", "23"]
    feats = emission_features(tokens, 1)
    assert "bias" in feats
    assert "w=flat" in feats and "lc=flat" in feats
    assert "prev=Royal" in feats and "next=23" in feats
    assert "p2=fl" in feats and "s3=lat" in feats
    assert "dig=0" in feats
    first = emission_features(tokens, 0)
    assert "prev=<s>" in first and "lc=royal" in first
    last = emission_features(tokens, 2)
    assert "next=</s>" in last and "dig=1" in last


def test_crf_partition_and_viterbi_match_enumeration():
    tokens = ["big", "roof", "terrace", "pool"]
    for seed in range(8):
        model = random_crf(tokens, k=3, seed=seed)
        emit = model.emissions(tokens)
        log_z, best_path, best_score = crf_enumerate(emit, model.w_trans.data)
        assert model.log_partition(tokens) == pytest.approx(log_z, rel=1e-10)
        got = model.viterbi(tokens)
        assert [model.tag_index[t] for t in got] == best_path
        assert model.sequence_score(tokens, got) == pytest.approx(best_score)


def test_crf_zero_weights_partition_is_log_tagset_size():
    model = CrfModel(["a", "b", "c"], {"bias": 0})
    assert model.log_partition(["x"]) == pytest.approx(np.log(3.0))
    # per-sequence NLL of any single tag is then log 3
    nll, _, _ = model.nll_and_grad(["x"], ["b"])
    assert nll == pytest.approx(np.log(3.0))


def test_crf_rejects_empty_sequence():
    model = CrfModel(["a"], {"bias": 0})
    with pytest.raises(ValueError):
        model.log_partition([])
    with pytest.raises(ValueError):
        model.viterbi([])


def test_crf_gradient_matches_finite_differences():
    docs = toy_docs()[:3]
    model = CrfModel(tagset_from_corpus(docs), feature_index_from_corpus(docs))
    rng = np.random.default_rng(1)
    model.w_emit.data[:] = rng.normal(size=model.w_emit.shape) * 0.3
    model.w_trans.data[:] = rng.normal(size=model.w_trans.shape) * 0.3

    _, g_emit, g_trans = crf_objective(model, docs, lam=0.5)
    fd = finite_difference(
        lambda: crf_objective(model, docs, lam=0.5)[0],
        [model.w_emit.data, model.w_trans.data],
    )
    assert max_rel_err([g_emit, g_trans], fd) < 1e-4


def test_crf_training_learns_toy_corpus():
    docs = toy_docs()
    model = train_crf(docs, lam=0.1, epochs=30, lr=0.05, seed=0)
    hits = total = 0
    for doc in docs:
        gold = bio_encode(doc)
        pred = model.tag(doc.tokens)
        hits += sum(g == p for g, p in zip(gold, pred))
        total += len(gold)
    assert hits / total > 0.95


def test_tagset_layout():
    docs = [Document("d", ["a"], [Entity("E", "zz", [Mention(1, 2)])]),
            Document("e", ["b"], [Entity("F", "aa", [Mention(1, 2)])])]
    assert tagset_from_corpus(docs) == ["O", "B-aa", "I-aa", "B-zz", "I-zz"]


def sample_entities():
    tokens = ["nice", "villa", "with", "large", "garden", "near", "pool"]
    e1 = Entity("E1", "property", [Mention(1, 3)])
    e2 = Entity("E2", "space", [Mention(4, 6)], parent="E1")
    e3 = Entity("E3", "space", [Mention(7, 8)], parent="E1")
    return tokens, [e1, e2, e3]


def test_edge_feature_contents():
    tokens, (e1, e2, e3) = sample_entities()
    feats = extract_edge_features(e1, e2, tokens)
    assert "bias" in feats
    assert "c_tok=garden" in feats  # child anchor is the span's last token
    assert "p_tok=villa" in feats
    assert "c_type=space" in feats and "p_type=property" in feats
    assert "pair=property>space" in feats
    assert "order=parent-first" in feats
    assert "dist=3" in feats  # anchors at positions 2 and 5
    assert any(f.startswith("btw_n=") for f in feats)

    rootward = extract_edge_features(None, e2, tokens)
    assert "p_tok=<root>" in rootward and "dist=root" in rootward

    far = Entity("E9", "space", [Mention(1, 2)])
    near = Entity("E8", "space", [Mention(7, 8)])
    assert "dist=4-6" in extract_edge_features(far, near, tokens)
    assert extract_edge_features(e1, e2, tokens) == extract_edge_features(e1, e2, tokens)


def test_ltm_probability_and_fallback():
    tokens, (e1, e2, _) = sample_entities()
    index = edge_feature_index([Document("d", tokens, [e1, e2])])
    model = LtmModel(index)
    model.w.data[:] = 0.0
    assert model.probability(e1, e2, tokens) == pytest.approx(0.5)
    assert model.arc_score(e1, e2, tokens) == pytest.approx(np.log(0.5))

    # degenerate single-class training data falls back to a constant
    degenerate = [Document("d", ["a"], [Entity("E", "t", [Mention(1, 2)])])]
    fallback = train_ltm(degenerate, epochs=1)
    assert fallback.constant_p is not None
    assert fallback.probability(None, degenerate[0].entities[0], ["a"]) > 0.5


def test_ltm_learns_parent_preference():
    docs = generate_corpus(SyntheticConfig(n_docs=40, seed=6))
    model = train_ltm(docs, c=1.0, epochs=40, lr=0.05, seed=0)
    correct = total = 0
    for doc in docs:
        ents = doc.entities
        parents = greedy_entity_parents(ents, doc.tokens, model.arc_score)
        index = {e.id: i + 1 for i, e in enumerate(ents)}
        gold = [index.get(e.parent, 0) for e in ents]
        correct += sum(g == p for g, p in zip(gold, parents))
        total += len(ents)
    assert correct / total > 0.8


def test_mtt_partition_small_cases():
    # two nodes, zero scores: trees are {0->1,0->2}, {0->1,1->2}, {0->2,2->1}
    log_z, marg = mtt_log_partition_and_marginals(np.zeros((3, 3)))
    assert np.exp(log_z) == pytest.approx(3.0, rel=1e-12)
    # every child's incoming marginals sum to one
    for m in (1, 2):
        assert marg[:, m].sum() == pytest.approx(1.0, rel=1e-10)
    assert marg[0][1] == pytest.approx(2.0 / 3.0)
    assert marg[2][1] == pytest.approx(1.0 / 3.0)

    log_z1, marg1 = mtt_log_partition_and_marginals(np.zeros((2, 2)))
    assert np.exp(log_z1) == pytest.approx(1.0)
    assert marg1[0][1] == pytest.approx(1.0)


def test_mtt_partition_matches_enumeration():
    rng = np.random.default_rng(7)
    for t in (1, 2, 3, 4):
        for _ in range(10):
            theta = rng.normal(size=(t + 1, t + 1)) * 2.0
            log_z, marg = mtt_log_partition_and_marginals(theta)
            brute = arborescence_log_sum(theta)
            assert log_z == pytest.approx(brute, rel=1e-10)
            for m in range(1, t + 1):
                assert marg[:, m].sum() == pytest.approx(1.0, rel=1e-8)


def test_mtt_shift_survives_extreme_scores():
    theta = np.zeros((3, 3))
    theta[0, 1] = 800.0  # exp would overflow without the column shift
    theta[0, 2] = -800.0
    log_z, marg = mtt_log_partition_and_marginals(theta)
    assert np.isfinite(log_z)
    assert marg[0][1] == pytest.approx(1.0, abs=1e-6)


def test_mtt_singular_laplacian_reports_node():
    theta = np.full((3, 3), -np.inf)
    theta[0, 1] = 0.0  # node 2 has no usable incoming arc
    with pytest.raises(ValueError, match="node 2"):
        mtt_log_partition_and_marginals(theta)


def test_mtt_training_learns_attachments():
    # scores are trained for the global tree distribution, so decode with
    # the tree decoder rather than local argmax
    docs = generate_corpus(SyntheticConfig(n_docs=40, seed=8, equivalent_rate=0.0))
    model = train_mtt(docs, c=1.0, epochs=40, lr=0.05, seed=0)
    assert isinstance(model, MttModel)
    correct = total = 0
    for doc in docs:
        ents = doc.entities
        parent_map = chu_liu_edmonds(entity_graph(ents, doc.tokens, model.arc_score))
        index = {e.id: i + 1 for i, e in enumerate(ents)}
        gold = [index.get(e.parent, 0) for e in ents]
        tree = [parent_map[m] for m in range(1, len(ents) + 1)]
        correct += sum(g == p for g, p in zip(gold, tree))
        total += len(ents)
    assert correct / total > 0.9


def test_entities_from_tags():
    ents = entities_from_tags(["B-a", "I-a", "O", "B-b"])
    assert [e.id for e in ents] == ["M1", "M2"]
    assert ents[0].mentions == [Mention(1, 3)]
    assert ents[1].type == "b"
    assert entities_from_tags(["O", "O"]) == []


def test_parents_form_tree():
    assert parents_form_tree([0, 1, 1])
    assert not parents_form_tree([2, 1])
    assert parents_form_tree([])


def test_pipeline_predict_with_oracle_stages():
    # oracle tagger + oracle arc scores must reproduce the gold structure
    docs = generate_corpus(SyntheticConfig(n_docs=15, seed=9, equivalent_rate=0.0))
    for doc in docs:
        gold_tags = bio_encode(doc)
        anchor_parent = {}
        index = {e.id: e for e in doc.entities}
        for e in doc.entities:
            child_a = e.main_mention().anchor
            parent_a = 0 if e.parent not in index else index[e.parent].main_mention().anchor
            anchor_parent[child_a] = parent_a

        def oracle_score(parent, child, tokens):
            want = anchor_parent[child.main_mention().anchor]
            have = 0 if parent is None else parent.main_mention().anchor
            return 0.0 if want == have else -10.0

        pred, was_tree = pipeline_predict(doc.id, doc.tokens, lambda _: gold_tags,
                                          oracle_score)
        assert was_tree
        assert len(pred.entities) == len(doc.entities)
        # parent anchors line up entity by entity
        for e in pred.entities:
            child_a = e.main_mention().anchor
            have = 0 if e.parent == "ROOT" else pred.entity_by_id(e.parent).main_mention().anchor
            assert have == anchor_parent[child_a]


def test_pipeline_predict_empty_tagging():
    pred, was_tree = pipeline_predict("d", ["a", "b"], lambda _: ["O", "O"],
                                      lambda p, c, t: 0.0)
    assert pred.entities == [] and was_tree
