"""End-to-end acceptance checks.

Each test covers one numbered release criterion and prints a single
PASS/FAIL summary line straight to the terminal, so a plain pytest run
doubles as the acceptance report. Training-backed criteria share
module-scoped runs; the whole file takes roughly half an hour on one
laptop-class core.
"""

import time

import numpy as np
import pytest

from oracles import (brute_auc, brute_control_deps, brute_data_deps,
                     pdg_isomorphic, random_raw_ir, random_source)
from pdgsim import autodiff as ad
from pdgsim.dataflow import (build_pdg, compute_postdominators,
                             control_dependences, data_dependences,
                             reaching_definitions)
from pdgsim.datagen import (BUILT_IN_GROUPS, NotApplicable, generate_dataset,
                            transform)
from pdgsim.gradcheck import TOLERANCE, gradcheck_suite
from pdgsim.ir import lower_source
from pdgsim.model import (GraphTensors, ModelConfig, compute_graph_features,
                          compute_node_features, linear_embed, pair_score,
                          serialize_model)
from pdgsim.training import (DEFAULT_GRID, TrainConfig, eval_scores, evaluate,
                             init_params, prepare_pair, roc_auc,
                             split_indices, threshold_moving, train)
from test_model import permute_pdg, random_pdg, tied_ea_params


@pytest.fixture
def console(capfd):
    """Print straight to the terminal, past pytest's capture, so the
    per-criterion verdict lines show up even for passing tests."""
    def emit(text: str) -> None:
        with capfd.disabled():
            print(text, flush=True)
    return emit


def report(console, num: int, ok: bool, name: str, detail: str) -> bool:
    console(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'} "
            f"{name}: {detail}")
    return ok


# ------------------------------------------------------- shared fixtures


@pytest.fixture(scope="module")
def corpus40():
    pairs = generate_dataset(BUILT_IN_GROUPS, 40, np.random.default_rng(0))
    return [prepare_pair(p.source_a, p.source_b, p.label) for p in pairs]


@pytest.fixture(scope="module")
def corpus200():
    pairs = generate_dataset(BUILT_IN_GROUPS, 200, np.random.default_rng(0))
    prepared = [prepare_pair(p.source_a, p.source_b, p.label) for p in pairs]
    return prepared, split_indices(len(prepared), 0)


def _test_report(prepared, split, res):
    test_set = [prepared[i] for i in split[2]]
    labels = [p.label for p in test_set]
    scores = eval_scores(test_set, res.params, res.model_cfg)
    return evaluate(scores, labels, res.threshold)


@pytest.fixture(scope="module")
def c5_runs(corpus40):
    """Two identical default-config overfit runs on the 40-pair corpus."""
    runs = []
    for _ in range(2):
        t0 = time.monotonic()
        res = train(corpus40, TrainConfig(), ModelConfig(),
                    (list(range(len(corpus40))), [], []))
        runs.append((res, time.monotonic() - t0))
    return runs


@pytest.fixture(scope="module")
def c6_runs(corpus200):
    """Two EA runs plus one EU run on the 200-pair corpus.

    85 epochs is enough for both variants to settle on this corpus;
    the duplicate EA run feeds the determinism criterion.
    """
    prepared, split = corpus200
    cfg = TrainConfig(epochs=85)
    ea1 = train(prepared, cfg, ModelConfig(variant="ea"), split)
    ea2 = train(prepared, cfg, ModelConfig(variant="ea"), split)
    eu = train(prepared, cfg, ModelConfig(variant="eu"), split)
    return ea1, ea2, eu


@pytest.fixture(scope="module")
def ablation_runs(corpus200):
    """Default plus four ablated configurations, 30 epochs each."""
    prepared, split = corpus200
    cfg = TrainConfig(epochs=30)
    out = []
    for label, mc in (("default", ModelConfig()),
                      ("no-jk", ModelConfig(no_jk=True)),
                      ("no-lstm", ModelConfig(no_lstm=True)),
                      ("pool-gap", ModelConfig(pool="gap")),
                      ("heads1-1", ModelConfig(heads_block1=1))):
        res = train(prepared, cfg, mc, split)
        out.append((label, res, _test_report(prepared, split, res)))
    return out


# ------------------------------------------------------------- criteria


def test_criterion_1_dependences_match_brute_force(console):
    """Control and data dependences equal their brute-force definitions
    (path enumeration plus post-domination; def-clear path search) on
    220 generated methods of at most 12 CFG nodes, in under 60s."""
    rng = np.random.default_rng(101)
    t0 = time.monotonic()
    checked = mismatches = 0
    for i in range(220):
        ir = random_raw_ir(rng) if i % 2 else lower_source(random_source(rng))
        assert len(ir.statements) <= 12
        cd = control_dependences(ir, compute_postdominators(ir))
        dd = data_dependences(ir, reaching_definitions(ir))
        if cd != brute_control_deps(ir) or dd != brute_data_deps(ir):
            mismatches += 1
        checked += 1
    elapsed = time.monotonic() - t0
    ok = checked >= 200 and mismatches == 0 and elapsed < 60.0
    assert report(console, 1, ok, "dependences vs brute force",
                  f"{checked} methods, {mismatches} mismatches, "
                  f"{elapsed:.1f}s (limit 60s)")


def test_criterion_2_gradient_check_twenty_seeds(console):
    """Analytic gradients match central finite differences (h=1e-4)
    within 1e-3 relative error for every layer and both full model
    variants, over 20 seeds, in under 2 minutes."""
    t0 = time.monotonic()
    worst_name, worst_err = "", -1.0
    for seed in range(20):
        for name, err in gradcheck_suite(seed):
            if err > worst_err:
                worst_name, worst_err = name, err
    elapsed = time.monotonic() - t0
    ok = worst_err < TOLERANCE and elapsed < 120.0
    assert report(console, 2, ok, "gradient check x20 seeds",
                  f"worst {worst_err:.2e} ({worst_name}), tol {TOLERANCE:g}, "
                  f"{elapsed:.0f}s (limit 120s)")


def _rows_normalized_case(rng, cfg, params):
    gt = GraphTensors(random_pdg(rng))
    sink = {}
    with ad.no_grad():
        compute_graph_features(gt, params, cfg, attn_sink=sink)
    for branch in sink.values():
        for block in ("block1", "block2"):
            for heads in branch[block]:
                for alpha in heads:
                    if np.any(np.abs(alpha.data.sum(axis=1) - 1.0) > 1e-9):
                        return False
    return True


def _permutation_case(rng, cfg, params):
    a, b = random_pdg(rng), random_pdg(rng)
    with ad.no_grad():
        base = pair_score(GraphTensors(a), GraphTensors(b),
                          params, cfg).data[0, 0]
        pa = {n.id: int(p) for n, p in
              zip(a.nodes, rng.permutation(len(a.nodes)))}
        pb = {n.id: int(p) for n, p in
              zip(b.nodes, rng.permutation(len(b.nodes)))}
        s = pair_score(GraphTensors(permute_pdg(a, pa)),
                       GraphTensors(permute_pdg(b, pb)),
                       params, cfg).data[0, 0]
    return abs(s - base) <= 1e-9


def _rename_case(rng):
    src = random_source(rng)
    renamed = transform(src, "rename", rng)
    p, q = build_pdg(lower_source(src)), build_pdg(lower_source(renamed))
    same_nodes = ([(n.id, n.kind) for n in p.nodes]
                  == [(n.id, n.kind) for n in q.nodes])
    projected = {(s, d) for s, d, _ in p.data_edges} \
        == {(s, d) for s, d, _ in q.data_edges}
    return (same_nodes and p.control_edges == q.control_edges and projected
            and pdg_isomorphic(p, q, match_vars=False))


def _reorder_case(rng):
    while True:
        src = random_source(rng)
        try:
            swapped = transform(src, "reorder", rng)
        except NotApplicable:
            continue
        return pdg_isomorphic(build_pdg(lower_source(src)),
                              build_pdg(lower_source(swapped)))


def test_criterion_3_invariance_suites(console):
    """Four invariance suites, 100 randomized cases each: attention
    rows sum to one (<=1e-9), similarity is node-order invariant
    (<=1e-9), renaming leaves the PDG identical up to variable labels,
    and reordering independent statements yields an isomorphic PDG."""
    rng = np.random.default_rng(7)
    counts = {}

    passed = 0
    for i in range(100):
        cfg = ModelConfig(variant="eu" if i < 50 else "ea")
        if i % 25 == 0:
            params_eu = init_params(ModelConfig(variant="eu"), rng)
            params_ea = init_params(ModelConfig(variant="ea"), rng)
        params = params_eu if cfg.variant == "eu" else params_ea
        passed += _rows_normalized_case(rng, cfg, params)
    counts["rows"] = passed

    cfg = ModelConfig(variant="ea")
    passed = 0
    for i in range(100):
        if i % 25 == 0:
            params = init_params(cfg, rng)
        passed += _permutation_case(rng, cfg, params)
    counts["perm"] = passed

    counts["rename"] = sum(_rename_case(rng) for _ in range(100))
    counts["reorder"] = sum(_reorder_case(rng) for _ in range(100))

    ok = all(v == 100 for v in counts.values())
    assert report(console, 3, ok, "invariance suites",
                  ", ".join(f"{k} {v}/100" for k, v in counts.items()))


def test_criterion_4_ea_doubles_eu_on_mirrored_graphs(console):
    """With identical control and data adjacency and tied branch
    parameters, EA node features equal exactly twice the EU node
    features (within 1e-9) on 20 random graphs."""
    rng = np.random.default_rng(17)
    eu_cfg, ea_cfg = ModelConfig(variant="eu"), ModelConfig(variant="ea")
    worst = 0.0
    for i in range(20):
        if i % 5 == 0:
            eu_params = init_params(eu_cfg, rng)
            ea_params = tied_ea_params(eu_params, ea_cfg)
        gt = GraphTensors(random_pdg(rng, mirrored=True))
        with ad.no_grad():
            h0 = linear_embed(gt.x, ea_params)
            h_ea = ad.add(
                compute_node_features(h0, gt.masks["data"], ea_params,
                                      "data", ea_cfg, gt.ones),
                compute_node_features(h0, gt.masks["control"], ea_params,
                                      "control", ea_cfg, gt.ones))
            h_eu = compute_node_features(linear_embed(gt.x, eu_params),
                                         gt.masks["union"], eu_params,
                                         "main", eu_cfg, gt.ones)
        worst = max(worst, float(np.max(np.abs(h_ea.data - 2.0 * h_eu.data))))
    ok = worst <= 1e-9
    assert report(console, 4, ok, "EA = 2x EU under tied parameters",
                  f"20 graphs, worst |EA - 2 EU| = {worst:.2e} (limit 1e-9)")


def test_criterion_5_overfits_builtin_corpus(console, c5_runs):
    """Default settings (lr 0.0002, batch 50, LeakyReLU 0.02, Kaiming
    init, seed 0) reach training F1 = 1.0 on the built-in 40-pair
    corpus within 300 epochs and under 5 minutes."""
    res, wall = c5_runs[0]
    hit = next((epoch for epoch, _, f1 in res.history if f1 >= 1.0), None)
    ok = hit is not None and hit <= 300 and wall < 300.0
    assert report(console, 5, ok, "overfit on 40 built-in pairs",
                  f"train F1 1.0 at epoch {hit}, stopped after "
                  f"{res.epochs_run}, {wall:.0f}s (limit 300s)")


def test_criterion_6_generalizes_on_200_pairs(console, corpus200, c6_runs):
    """On the 200-pair corpus with a 70/15/15 seed-0 split, the EA
    variant reaches test F1 >= 0.80 and AUC >= 0.85, and does not trail
    the EU variant on test F1."""
    prepared, split = corpus200
    ea, _, eu = c6_runs
    rep_ea = _test_report(prepared, split, ea)
    rep_eu = _test_report(prepared, split, eu)
    ok = (rep_ea.f1 >= 0.80 and rep_ea.auc is not None
          and rep_ea.auc >= 0.85 and rep_ea.f1 >= rep_eu.f1)
    assert report(console, 6, ok, "generalization on 200 pairs",
                  f"EA F1 {rep_ea.f1:.3f} (need >=0.80), "
                  f"AUC {rep_ea.auc:.3f} (need >=0.85), "
                  f"EU F1 {rep_eu.f1:.3f} (EA must not trail)")


def test_trained_model_calls_a_file_a_clone_of_itself(corpus200, c6_runs):
    # the canonical smoke check: comparing a program against itself
    # must land above the decision threshold once training succeeded
    prepared, split = corpus200
    ea = c6_runs[0]
    for i in split[2][:5]:
        gt = prepared[i].a
        with ad.no_grad():
            s = pair_score(gt, gt, ea.params, ea.model_cfg).data[0, 0]
        assert s >= ea.threshold


def test_criterion_7_threshold_moving_is_exhaustive(console, corpus200, c6_runs):
    """The selected threshold lies on the 0.2..0.8 grid and attains the
    grid-maximal F1, both on 100 random score sets and on the trained
    run's own validation scores."""
    assert DEFAULT_GRID == (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    rng = np.random.default_rng(23)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(2, 60))
        scores = [float(x) for x in rng.random(n)]
        labels = [int(x) for x in rng.integers(0, 2, n)]
        eps = threshold_moving(scores, labels)
        by_eps = {e: evaluate(scores, labels, e).f1 for e in DEFAULT_GRID}
        if eps not in DEFAULT_GRID or by_eps[eps] != max(by_eps.values()):
            bad += 1

    prepared, split = corpus200
    ea = c6_runs[0]
    val = [prepared[i] for i in split[1]]
    vlabels = [p.label for p in val]
    vscores = eval_scores(val, ea.params, ea.model_cfg)
    by_eps = {e: evaluate(vscores, vlabels, e).f1 for e in DEFAULT_GRID}
    trained_ok = (ea.threshold in DEFAULT_GRID
                  and by_eps[ea.threshold] == max(by_eps.values()))

    ok = bad == 0 and trained_ok
    assert report(console, 7, ok, "threshold moving argmax",
                  f"{100 - bad}/100 random sets, trained eps "
                  f"{ea.threshold:g} grid-optimal: {trained_ok}")


def test_criterion_8_metrics_match_oracles(console):
    """AUC equals the O(n^2) Mann-Whitney concordance within 1e-9 on
    100 random score sets, and precision/recall/F1 satisfy their
    defining identities on every confusion matrix up to 5 per cell."""
    rng = np.random.default_rng(29)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(2, 80))
        labels = [int(x) for x in rng.integers(0, 2, n)]
        if len(set(labels)) < 2:
            labels[0], labels[-1] = 0, 1
        if i % 2:
            scores = [float(x) for x in rng.integers(0, 5, n) / 4.0]
        else:
            scores = [float(x) for x in rng.random(n)]
        worst = max(worst, abs(roc_auc(scores, labels)
                               - brute_auc(scores, labels)))

    identities = True
    for tp in range(6):
        for fp in range(6):
            for tn in range(6):
                for fn in range(6):
                    if tp + fp + tn + fn == 0:
                        continue
                    scores = [0.9] * tp + [0.1] * fn + [0.9] * fp + [0.1] * tn
                    labels = [1] * (tp + fn) + [0] * (fp + tn)
                    r = evaluate(scores, labels, 0.5)
                    want_p = tp / (tp + fp) if tp + fp else 0.0
                    want_r = tp / (tp + fn) if tp + fn else 0.0
                    want_f = (2 * tp / (2 * tp + fp + fn)
                              if 2 * tp + fp + fn else 0.0)
                    if ((r.tp, r.fp, r.tn, r.fn) != (tp, fp, tn, fn)
                            or abs(r.precision - want_p) > 1e-12
                            or abs(r.recall - want_r) > 1e-12
                            or abs(r.f1 - want_f) > 1e-12):
                        identities = False

    ok = worst <= 1e-9 and identities
    assert report(console, 8, ok, "metric oracles",
                  f"AUC worst diff {worst:.2e} over 100 sets (limit 1e-9), "
                  f"F1 identities on 1295 matrices: {identities}")


def test_criterion_9_ablations_train_and_tabulate(console, ablation_runs):
    """Every ablated configuration trains to completion on the 200-pair
    corpus and reports metrics; deltas against the default are
    tabulated."""
    base_f1 = ablation_runs[0][2].f1
    ok = True
    lines = [f"    {'config':<10} {'epochs':>6} {'test F1':>8} "
             f"{'AUC':>7} {'dF1':>7}"]
    for label, res, rep in ablation_runs:
        ok = ok and res.epochs_run == 30 and np.isfinite(rep.f1) \
            and rep.auc is not None and np.isfinite(rep.auc)
        lines.append(f"    {label:<10} {res.epochs_run:>6} {rep.f1:>8.3f} "
                     f"{rep.auc:>7.3f} {rep.f1 - base_f1:>+7.3f}")
    report(console, 9, ok, "ablation sweep",
           "5 configurations, 30 epochs each")
    for line in lines:
        console(line)
    assert ok


def test_criterion_10_reruns_are_byte_identical(console, c5_runs, c6_runs):
    """Repeating the overfit and generalization runs with the same
    seeds produces byte-identical serialized models."""
    (r5a, _), (r5b, _) = c5_runs
    ea1, ea2, _ = c6_runs
    m5a = serialize_model(r5a.params, r5a.model_cfg, r5a.threshold)
    m5b = serialize_model(r5b.params, r5b.model_cfg, r5b.threshold)
    m6a = serialize_model(ea1.params, ea1.model_cfg, ea1.threshold)
    m6b = serialize_model(ea2.params, ea2.model_cfg, ea2.threshold)
    ok = m5a.encode() == m5b.encode() and m6a.encode() == m6b.encode()
    assert report(console, 10, ok, "deterministic reruns",
                  f"overfit model {len(m5a)} bytes, generalization model "
                  f"{len(m6a)} bytes, both byte-identical: {ok}")
