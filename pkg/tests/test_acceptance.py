"""Acceptance gate.

Each test asserts one acceptance criterion at its stated tolerance and prints
a PASS/FAIL line (run with `pytest tests/test_acceptance.py -s` to see them
while passing). The benchmark-reproduction criteria need the converted
dataset files under data/; they skip with an explicit message when a file is
absent, and run the full published protocol when it is present.
"""

import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cadnet import (ExperimentConfig, PRESETS, Tape, build_graph, forward,
                    heat_diffuse, init_params, leaf, load_dataset, loss,
                    make_split, ppr_diffuse, propagate, save_dataset, train)
from cadnet.adacad import GammaVector, adaptive_blend, control_variable, gamma_vector
from cadnet.data import SplitSpec
from cadnet.diffusion import baseline_transition, cad_transition
from helpers import (dense_heat_series, dense_masked_softmax, dense_adjacency,
                     dense_ppr_closed_form, finite_diff, make_synthetic_dataset,
                     rel_close, with_stay_put)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def criterion(description: str, ok: bool):
    print(f"{'PASS' if ok else 'FAIL'}: {description}")
    assert ok, description


def prob_rows(rng, n, c):
    raw = rng.random((n, c)) + 0.05
    return raw / raw.sum(axis=1, keepdims=True)


def eight_node_graph(self_loops=False):
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (1, 5), (2, 6)]
    return build_graph(edges, 8, add_self_loops=self_loops)  # node 7 isolated


# -- numerical property suite (no datasets, fast) ------------------------------

class TestNumericalSuite:
    def test_finite_difference_checks(self):
        rng = np.random.default_rng(0)
        g = eight_node_graph(self_loops=True)
        x = rng.normal(size=(8, 4))
        labels = np.array([0, 1, 2, 0, 1, 2, 0, 1])
        labeled = np.array([0, 1, 2])
        cfg = ExperimentConfig(hidden=3, K=3, beta=0.7, leak_slope=0.05,
                               p_drop=0.0, self_loops=True, lambda_ent=0.4,
                               row_normalize=False)
        params = init_params(4, 3, 3, rng)
        out = forward(params, x, g, cfg, training=False, rng=rng)
        value = loss(out, labels, labeled, cfg.lambda_ent)
        params.zero_grad()
        out.tape.backward(value)

        def rebuild():
            o = forward(params, x, g, cfg, training=False, rng=rng)
            return loss(o, labels, labeled, cfg.lambda_ent).item()

        ok = True
        for name, p in params.named().items():
            fd = finite_diff(rebuild, p.data, h=1e-5)
            ok = ok and rel_close(p.grad, fd, 1e-4)
        criterion("end-to-end parameter gradients match finite differences "
                  "(rel err < 1e-4, 8-node instance)", ok)

        # gradients through the class-attentive transition alone
        p_leaf = leaf(prob_rows(rng, 8, 3), requires_grad=True)
        z = rng.normal(size=(8, 3))
        w = rng.normal(size=(8, 3))

        def through_transition():
            t = Tape()
            trans = cad_transition(t, g, p_leaf)
            agg = propagate(t, trans, leaf(z), 2).features
            return t, t.total_sum(t.mul(agg, leaf(w)))

        p_leaf.zero_grad()
        tape, val = through_transition()
        tape.backward(val)
        fd = finite_diff(lambda: through_transition()[1].item(), p_leaf.data, h=1e-5)
        criterion("gradient through cad_transition matches finite differences",
                  rel_close(p_leaf.grad, fd, 1e-4))

        # gradients through the blend coefficients alone
        p2 = leaf(prob_rows(rng, 8, 3), requires_grad=True)
        z2 = rng.normal(size=(8, 2))
        zc = rng.normal(size=(8, 2))
        w2 = rng.normal(size=(8, 2))

        def through_gamma():
            t = Tape()
            gv = gamma_vector(t, control_variable(t, g, p2), 0.6)
            out2 = adaptive_blend(t, leaf(z2), leaf(zc), gv)
            return t, t.total_sum(t.mul(out2, leaf(w2)))

        p2.zero_grad()
        tape, val = through_gamma()
        tape.backward(val)
        fd = finite_diff(lambda: through_gamma()[1].item(), p2.data, h=1e-5)
        criterion("gradient through gamma_vector matches finite differences",
                  rel_close(p2.grad, fd, 1e-4))

    def test_transition_and_propagation_tolerances(self):
        rng = np.random.default_rng(1)
        ok_stochastic = True
        ok_softmax = True
        ok_propagate = True
        for trial in range(6):
            loops = trial % 2 == 0
            g = eight_node_graph(self_loops=loops)
            p = prob_rows(rng, 8, 3)
            t_cad = cad_transition(Tape(), g, leaf(p))
            t_rw = baseline_transition(g, "rw")
            for t in (t_cad, t_rw):
                sums = np.zeros(8)
                np.add.at(sums, g.edge_rows, t.values.values)
                nonempty = g.degrees > 0
                ok_stochastic = ok_stochastic and np.allclose(
                    sums[nonempty], 1.0, atol=1e-9) and np.all(
                    t.values.values >= 0) and np.all(t.values.values <= 1)

            logits = rng.normal(size=g.n_entries)
            from cadnet import sparse_leaf
            soft = Tape().segment_softmax(sparse_leaf(g, logits))
            dense_l = np.zeros((8, 8))
            dense_l[g.edge_rows, g.col_indices] = logits
            want = dense_masked_softmax(dense_l, dense_adjacency(g))
            got = np.zeros((8, 8))
            got[g.edge_rows, g.col_indices] = soft.values
            ok_softmax = ok_softmax and np.allclose(got, want, atol=1e-12)

            z = rng.normal(size=(8, 3))
            dense_t = np.zeros((8, 8))
            dense_t[g.edge_rows, g.col_indices] = t_cad.values.values
            dense_t = with_stay_put(dense_t)
            for k in range(6):
                res = propagate(Tape(), t_cad, leaf(z), k)
                want_k = np.linalg.matrix_power(dense_t, k) @ z
                ok_propagate = ok_propagate and np.allclose(
                    res.features.data, want_k, atol=1e-10)
        criterion("CAD/RW transitions row-stochastic within 1e-9", ok_stochastic)
        criterion("segment_softmax matches dense masked softmax within 1e-12",
                  ok_softmax)
        criterion("propagate matches dense T^K Z within 1e-10 (K <= 5, N <= 8)",
                  ok_propagate)

    def test_limit_reductions(self):
        rng = np.random.default_rng(2)
        g = eight_node_graph(self_loops=True)
        x = rng.normal(size=(8, 5))

        z = leaf(rng.normal(size=(8, 3)))
        res = propagate(Tape(), baseline_transition(g, "rw"), z, 0)
        criterion("K=0 diffusion is the identity (bitwise)",
                  res.features is z and np.array_equal(res.features.data, z.data))

        params = init_params(5, 4, 3, rng)
        cfg_ada = ExperimentConfig(hidden=4, K=3, beta=1.0, p_drop=0.0,
                                   self_loops=True, row_normalize=False)
        cfg_cad = cfg_ada.with_overrides(aggregator="cad_only")
        y_ada = forward(params, x, g, cfg_ada, training=False, rng=rng).y_hat.data
        y_cad = forward(params, x, g, cfg_cad, training=False, rng=rng).y_hat.data
        criterion("beta=1 makes the adaptive pipeline identical to CAD-only "
                  "(<= 1e-12)", float(np.abs(y_ada - y_cad).max()) <= 1e-12)

        p_uniform = leaf(np.full((8, 3), 1 / 3))
        t_cad = cad_transition(Tape(), g, p_uniform)
        t_rw = baseline_transition(g, "rw")
        criterion("uniform likelihoods reduce the class-attentive transition "
                  "to the random walk (<= 1e-12)",
                  float(np.abs(t_cad.values.values - t_rw.values.values).max()) <= 1e-12)

        z0 = leaf(rng.normal(size=(8, 3)))
        z_diff = leaf(rng.normal(size=(8, 3)))
        gv = GammaVector(leaf(np.zeros((8, 1))), beta=0.0)
        blended = adaptive_blend(Tape(), z0, z_diff, gv)
        criterion("gamma=0 keeps the original features (<= 1e-12)",
                  float(np.abs(blended.data - z0.data).max()) <= 1e-12)

    def test_iterative_diffusion_against_closed_forms(self):
        rng = np.random.default_rng(3)
        g = eight_node_graph()
        z = rng.normal(size=(8, 3))
        got = ppr_diffuse(Tape(), g, leaf(z), 0.1, 200).features.data
        want = dense_ppr_closed_form(g, z, 0.1)
        criterion("PPR iterate matches dense closed form within 1e-6 at k=200",
                  np.allclose(got, want, atol=1e-6))

        g4 = build_graph([(0, 1), (1, 2), (2, 3), (0, 2)], 4)
        z4 = rng.normal(size=(4, 2))
        got = heat_diffuse(Tape(), g4, leaf(z4), 5.0, 40).features.data
        want = dense_heat_series(g4, z4, 5.0, terms=400)
        criterion("heat-kernel truncation matches dense series within 1e-6 "
                  "at k=40, t=5", np.allclose(got, want, atol=1e-6))


# -- determinism ---------------------------------------------------------------

class TestDeterminism:
    def test_identical_seed_bit_identical_csv(self, tmp_path):
        d = make_synthetic_dataset(n_per_class=15, n_classes=3, n_features=8,
                                   seed=17, train_per_class=3, val_per_class=5)
        data_file = tmp_path / "synthetic.cadg"
        save_dataset(d, data_file)
        outputs = []
        for name in ("first.csv", "second.csv"):
            out = tmp_path / name
            # separate processes: determinism must hold across invocations
            proc = subprocess.run(
                [sys.executable, "-m", "cadnet.cli", "train",
                 "--dataset", str(data_file), "--runs", "2", "--seed-base", "7",
                 "--hidden", "8", "--K", "2", "--epochs", "4",
                 "--row-normalize", "off", "--out", str(out)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            with open(out, newline="") as fh:
                rows = list(csv.DictReader(fh))
            for row in rows:
                row["wall_clock_ms"] = ""  # timing is the one nondeterministic field
            outputs.append(rows)
        criterion("identical seed produces bit-identical CSV rows "
                  "(wall_clock_ms masked)", outputs[0] == outputs[1])


# -- benchmark reproduction -----------------------------------------------------

def _dataset_or_skip(name: str):
    path = DATA_DIR / f"{name}.cadg"
    if not path.exists():
        pytest.skip(
            f"dataset file {path} not present; raw benchmark dumps are not "
            f"downloadable in this environment - run converter/convert.py "
            f"with the upstream files to enable this criterion")
    return path


def _benchmark_runs(path, cfg, n_runs, split_spec=None):
    d = load_dataset(path, row_normalize=cfg.row_normalize)
    spec = split_spec or SplitSpec(kind="standard")
    accs = []
    for seed in range(n_runs):
        run_cfg = cfg.with_overrides(seed=seed)
        rng = np.random.default_rng((seed, 0x5EED17))
        splits = make_split(d, spec, rng)
        accs.append(train(d.graph, d.features, d.labels, splits, run_cfg).test_accuracy)
    return np.asarray(accs)


N_SEEDS = 20


@pytest.mark.benchmark
class TestBenchmarkReproduction:
    def test_citeseer_accuracy_band(self):
        path = _dataset_or_skip("citeseer")
        accs = _benchmark_runs(path, PRESETS["citeseer"], N_SEEDS)
        mean = accs.mean()
        criterion(f"CiteSeer standard split mean accuracy {mean:.4f} >= 0.72 "
                  f"over {N_SEEDS} seeds", mean >= 0.72)

    def test_cora_accuracy_band(self):
        path = _dataset_or_skip("cora")
        accs = _benchmark_runs(path, PRESETS["cora"], N_SEEDS)
        mean = accs.mean()
        criterion(f"Cora standard split mean accuracy {mean:.4f} >= 0.82 "
                  f"over {N_SEEDS} seeds", mean >= 0.82)

    def test_pubmed_accuracy_band(self):
        path = _dataset_or_skip("pubmed")
        accs = _benchmark_runs(path, PRESETS["pubmed"], N_SEEDS)
        mean = accs.mean()
        criterion(f"PubMed standard split mean accuracy {mean:.4f} >= 0.80 "
                  f"over {N_SEEDS} seeds", mean >= 0.80)

    def test_citeseer_ablation_ordering(self):
        path = _dataset_or_skip("citeseer")
        base = PRESETS["citeseer"]
        means = {}
        for agg in ("adacad", "cad_only", "rw"):
            accs = _benchmark_runs(path, base.with_overrides(aggregator=agg), N_SEEDS)
            means[agg] = accs.mean()
        gap = means["adacad"] - means["rw"]
        criterion(
            f"aggregation ablation ordering adacad ({means['adacad']:.4f}) > "
            f"cad_only ({means['cad_only']:.4f}) > rw ({means['rw']:.4f}) with "
            f"adacad-rw gap {gap * 100:.2f} >= 1.0 points",
            means["adacad"] > means["cad_only"] > means["rw"] and gap >= 0.01)

    def test_citeseer_entropy_regularization_ablation(self):
        path = _dataset_or_skip("citeseer")
        base = PRESETS["citeseer"]
        with_ent = _benchmark_runs(path, base, N_SEEDS).mean()
        without = _benchmark_runs(path, base.with_overrides(lambda_ent=0.0),
                                  N_SEEDS).mean()
        criterion(
            f"dropping the entropy term loses >= 0.5 points on CiteSeer "
            f"({with_ent:.4f} vs {without:.4f})", with_ent - without >= 0.005)

    def test_citeseer_beta_sweep_band(self):
        path = _dataset_or_skip("citeseer")
        base = PRESETS["citeseer"]
        means = {}
        for beta in (0.65, 0.75, 0.85, 0.95):
            means[beta] = _benchmark_runs(
                path, base.with_overrides(beta=beta), N_SEEDS).mean()
        best = max(means.values())
        worst = min(means.values())
        criterion(
            f"every beta in {{0.65, 0.75, 0.85, 0.95}} stays within 1.5 points "
            f"of the best (spread {100 * (best - worst):.2f})",
            best - worst <= 0.015)

    @pytest.mark.parametrize("name", ["amazon-comp", "amazon-photo",
                                      "coauthor-cs", "coauthor-phy"])
    def test_optional_large_benchmarks_run(self, name):
        path = DATA_DIR / f"{name}.cadg"
        if not path.exists():
            pytest.skip(f"optional dataset {path} not present")
        cfg = PRESETS[name]
        accs = _benchmark_runs(path, cfg, 2,
                               split_spec=SplitSpec(kind="random-per-class"))
        criterion(f"{name} harness runs to completion "
                  f"(mean acc {accs.mean():.4f} over 2 runs)", accs.size == 2)
