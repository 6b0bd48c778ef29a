import json
import math

import pytest

import mrforest


def test_tree_inference_matches_brute_force():
    net = mrforest.Network([2, 3, 2], [(0, 1), (1, 2)])
    node = [[0.1, -0.4], [0.3, 0.0, -1.2], [0.5, 0.2]]
    edge = [[0.2, -0.1, 0.4, 0.0, 0.3, -0.5], [1.0, -1.0, 0.0, 0.5, -0.3, 0.2]]
    tree = mrforest.infer(net, node, edge, engine="tree")
    bf = mrforest.infer(net, node, edge, engine="brute-force")
    assert tree.log_partition == pytest.approx(bf.log_partition, abs=1e-12)
    for a, b in zip(tree.node_marginals, bf.node_marginals):
        assert a == pytest.approx(b, abs=1e-12)
    clamped = mrforest.infer(net, node, edge, engine="tree", clamp=[1, -1, -1])
    assert clamped.log_partition < tree.log_partition
    assert clamped.node_marginals[0] == pytest.approx([0.0, 1.0])


def test_grid_chain_engine_and_errors():
    net = mrforest.grid_network(2, 3, [2, 3])
    assert net.is_grid and net.num_nodes == 6
    node = [[0.0] * s for s in net.state_sizes]
    edge = [[0.0] * (net.state_sizes[a] * net.state_sizes[b]) for a, b in net.edges]
    r = mrforest.infer(net, node, edge, engine="chain")
    assert r.log_partition == pytest.approx(3 * math.log(2) + 3 * math.log(3))
    with pytest.raises(mrforest.Error) as info:
        mrforest.infer(net, node, edge, engine="tree")
    assert info.value.code == "cycle-detected"


def test_holder_and_macro_f1():
    lhs, rhs, holds = mrforest.check_holder_inequality([[1.0, 2.0], [3.0, 0.5]], [2.0, 2.0])
    assert holds and lhs <= rhs
    assert mrforest.macro_f1([0, 0, 1, 1], [0, 0, 0, 0], 2) == pytest.approx(1 / 3)


def test_generate_train_decode_evaluate():
    data = mrforest.generate_dataset(num_train=3, num_test=2, min_length=20, max_length=24)
    train = [s for s in data if s.train]
    test = [s for s in data if not s.train]
    assert len(train) == 3 and len(test) == 2
    assert all(len(s.channels[0]) == 5 for s in data)
    model, history = mrforest.train(train, trainer="adaboost-mrf", max_rounds=2, cg_iters=1)
    assert model.trainer == "adaboost-mrf"
    assert sum(model.alphas) == pytest.approx(1.0)
    assert history[-1]["summary"]["rounds"] == len(history) - 1
    back = mrforest.Model.from_json(model.to_json())
    assert (back.params == model.params).all()
    preds = [mrforest.decode(model, s) for s in mrforest.strip_labels(test)]
    report = mrforest.evaluate(preds, test)
    assert 0.0 <= report["bottom"]["macro_f1"] <= 1.0
    assert "top" in report


def test_dataset_files_and_cli(tmp_path):
    path = str(tmp_path / "d.jsonl")
    code, out, err = mrforest.run_cli(["generate", "--data", path, "--num-train", "2", "--num-test", "1"])
    assert code == 0, err
    first = json.loads(open(path).readline())
    assert first["schema"] == "mrforest.dataset/1"
    assert len(mrforest.read_dataset(path, "train")) == 2
    assert mrforest.run_cli(["train", "--data", path, "--model", str(tmp_path / "m.json"), "--beta", "2"])[0] == 2
    with pytest.raises(mrforest.Error):
        mrforest.read_dataset(str(tmp_path / "missing.jsonl"))
