"""Acceptance criteria 1-8, each reported as one PASS/FAIL line in the summary."""

import time

import numpy as np
import pytest

from gradcheck import check_dense, check_recurrent, check_stacked
from oracles import kkt_violation, ols
from pemsbench import dataio, metrics
from pemsbench.bench import pipeline
from pemsbench.bench.config import ExperimentConfig
from pemsbench.bench.families import INPUT_KIND, PAPER_BUNDLES
from pemsbench.cli import main
from pemsbench.dataio import SyntheticSpec
from pemsbench.linear_model import ElasticNetConfig, fit_elastic_net
from pemsbench.neighbors import BallTree, BruteIndex, KnnConfig, fit_knn, knn_query
from pemsbench.svr import SvrConfig, fit_svr
from pemsbench.trees import GbtConfig, TreeConfig, fit_cart, fit_gbt


def test_criterion_1_metric_oracles(criterion):
    with criterion(1, "metric oracle suite") as note:
        t0 = time.perf_counter()
        assert metrics.mse([1, 2, 3], [1, 2, 3]) == 0.0
        assert metrics.mse([2, 4], [1, 2]) == 2.5
        assert metrics.mse([0, 0], [3, 4]) == 12.5
        assert metrics.rmse([2, 4], [1, 2]) == np.sqrt(2.5)
        assert metrics.mae([2, 4], [1, 2]) == 1.5
        assert metrics.mape([110], [100]) == (10.0, 0)
        assert metrics.mape([5, 110], [0, 100]) == (10.0, 1)
        norm = metrics.TargetNormalizer(10.0, 20.0)
        np.testing.assert_array_equal(metrics.normalize_targets(norm, [10, 20, 15]), [0, 1, 0.5])
        assert metrics.evaluate_normalized(metrics.TargetNormalizer(0.0, 1.0), [0.5], [0.25]).mape == 100.0

        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 50))
            a = rng.normal(size=n) * rng.uniform(0.1, 100)
            p = a + rng.normal(size=n) * rng.uniform(0.01, 10)
            m, r, e = metrics.mse(p, a), metrics.rmse(p, a), metrics.mae(p, a)
            assert r * r == pytest.approx(m, rel=1e-12)
            assert e <= r * (1 + 1e-12)
            c = rng.uniform(0.1, 10) * rng.choice([-1, 1])
            assert metrics.mse(c * p, c * a) == pytest.approx(c * c * m, rel=1e-12)
            assert metrics.mae(c * p, c * a) == pytest.approx(abs(c) * e, rel=1e-12)
            assert metrics.mape(c * p, c * a)[0] == pytest.approx(metrics.mape(p, a)[0], rel=1e-10)
            s = rng.normal() * 5
            assert metrics.mae(p + s, a + s) == pytest.approx(e, rel=1e-9, abs=1e-12)
        took = time.perf_counter() - t0
        note("1000 random vectors")
        assert took < 5.0


def test_criterion_2_gradients(criterion):
    with criterion(2, "finite-difference gradient checks, 50 seeds") as note:
        t0 = time.perf_counter()
        worst = 0.0
        for seed in range(50):
            errs = [check_dense(seed, "linear"), check_dense(seed, "relu")]
            for kind in ("lstm", "gru"):
                errs.append(check_recurrent(seed, kind, 1, False))  # single cell step
                errs.append(check_recurrent(seed, kind, 8, True))  # BPTT, full sequence out
                errs.append(check_stacked(seed, kind, 8))  # stacked network over 8 steps
            worst = max(worst, *errs)
        note(f"max relative error {worst:.2e}")
        assert worst < 1e-4
        assert time.perf_counter() - t0 < 120


def test_criterion_3_backend_equivalence(criterion):
    with criterion(3, "ball tree == brute force") as note:
        t0 = time.perf_counter()
        rng = np.random.default_rng(0)
        total = 0
        for n, d in ((50, 2), (500, 5), (2000, 13)):
            X = rng.normal(size=(n, d))
            y = rng.normal(size=n)
            Q = np.vstack([rng.normal(size=(450, d)), X[:50]])
            brute, tree = BruteIndex(X), BallTree(X, 32)
            for x in Q:
                a, b = knn_query(brute, x, 4), knn_query(tree, x, 4)
                assert [i for i, _ in a] == [i for i, _ in b]
                assert max(abs(p[1] - q[1]) for p, q in zip(a, b)) <= 1e-9
            pa = fit_knn(X, y, KnnConfig(algorithm="brute")).predict(Q)
            pb = fit_knn(X, y, KnnConfig(algorithm="ball_tree")).predict(Q)
            np.testing.assert_array_equal(pa, pb)
            total += len(Q)
        note(f"{total} queries, n up to 2000, d up to 13")
        assert time.perf_counter() - t0 < 60


def test_criterion_4_solver_oracles(criterion):
    with criterion(4, "solver oracles") as note:
        t0 = time.perf_counter()
        worst_en = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(50, 5))
            y = X @ rng.normal(size=5) + rng.normal() + 0.3 * rng.normal(size=50)
            m = fit_elastic_net(X, y, ElasticNetConfig(alpha=0.0, tol=1e-10, max_iter=100_000))
            w, b = ols(X, y)
            worst_en = max(worst_en, np.abs(m.weights - w).max(), abs(m.intercept - b))
        assert worst_en <= 1e-6

        worst_gbt = 0.0
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            X = rng.normal(size=(300, 6))
            y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=300)
            g = fit_gbt(X, y, GbtConfig(n_estimators=1, learning_rate=1.0, reg_lambda=0.0, max_depth=None))
            t = fit_cart(X, y, TreeConfig())
            Xq = np.vstack([X, rng.normal(size=(200, 6))])
            worst_gbt = max(worst_gbt, np.abs(g.predict(Xq) - t.predict(Xq)).max())
        assert worst_gbt <= 1e-9

        worst_kkt = 0.0
        for seed in range(10):
            rng = np.random.default_rng(200 + seed)
            X = rng.normal(size=(40, 3))
            y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + 0.1 * rng.normal(size=40)
            cfg = SvrConfig(C=float(rng.choice([0.5, 2.0, 10.0])), epsilon=0.1, tol=1e-4)
            states = []
            m = fit_svr(X, y, cfg, trace=states.append)
            beta = states[-1][:40] - states[-1][40:]
            worst_kkt = max(worst_kkt, kkt_violation(X, y, beta, m.bias, cfg.C, cfg.epsilon, cfg.kernel, m.gamma))
        assert worst_kkt <= 1e-3
        note(f"elastic net {worst_en:.1e}, gbt vs cart {worst_gbt:.1e}, svr kkt {worst_kkt:.1e}")
        assert time.perf_counter() - t0 < 120


TRANSFORMS = (
    lambda c: np.exp((c - c.mean()) / (3 * c.std())),
    lambda c: (c - c.mean()) ** 3,
    lambda c: np.log(c - c.min() + 1.0),
    lambda c: -2.5 * c + 7.0,
)


def test_criterion_5_scale_insensitivity(criterion):
    with criterion(5, "trees invariant to monotone feature transforms") as note:
        ds = dataio.generate_synthetic(SyntheticSpec(n_rows=1500, seed=0), "NOx")
        train, _, _ = dataio.chronological_split(ds)
        X, y = train.features, train.target
        cart_cfg = TreeConfig(**PAPER_BUNDLES["cart"]["NOx"], seed=0)
        gbt_cfg = GbtConfig(n_estimators=40, learning_rate=0.1, max_depth=8)
        base_cart, base_gbt = fit_cart(X, y, cart_cfg).predict(X), fit_gbt(X, y, gbt_cfg).predict(X)
        worst = 0.0
        for j in range(X.shape[1]):
            Xt = X.copy()
            Xt[:, j] = TRANSFORMS[j % len(TRANSFORMS)](X[:, j])
            steps = np.diff(Xt[np.argsort(X[:, j], kind="stable"), j])
            distinct = np.diff(np.sort(X[:, j])) > 0
            assert np.all(steps[distinct] > 0) or np.all(steps[distinct] < 0)
            worst = max(
                worst,
                np.abs(fit_cart(Xt, y, cart_cfg).predict(Xt) - base_cart).max(),
                np.abs(fit_gbt(Xt, y, gbt_cfg).predict(Xt) - base_gbt).max(),
            )
        note(f"13 columns, CART and GBT, max deviation {worst:.1e}")
        assert worst <= 1e-9


RANKED = ("linear", "cart", "gbt", "knn", "mlp", "lstm", "gru")


def test_criterion_6_qualitative_ranking(criterion):
    with criterion(6, "qualitative ranking on the synthetic benchmark") as note:
        top3_hits = 0
        per_seed = []
        for seed in range(5):
            cfg = ExperimentConfig(
                target="NOx", synthetic=SyntheticSpec(n_rows=20_000, seed=seed), families=RANKED, grid_mode="paper", seed=seed
            )
            res = pipeline.run_experiment(cfg)
            rows = {r.family: r for r in res.leaderboard}
            assert all(r.ok for r in rows.values())
            lr = rows["linear"].raw.mse
            for fam in RANKED[1:]:
                assert rows[fam].raw.mse < lr, f"seed {seed}: {fam} MSE {rows[fam].raw.mse:.4g} >= linear {lr:.4g}"
            ranking = res.ranking()
            hit = {"knn", "gru"} <= set(ranking[:3])
            top3_hits += hit
            per_seed.append(f"seed {seed} top3 {','.join(ranking[:3])}")
        note(f"KNN and GRU both in top 3 for {top3_hits}/5 seeds ({'; '.join(per_seed)})")
        assert top3_hits >= 3


def test_criterion_7_determinism(criterion, tmp_path):
    with criterion(7, "byte-identical leaderboards from repeated benchmark runs") as note:
        cfg = tmp_path / "exp.toml"
        cfg.write_text('[data]\nn_rows = 800\n\n[experiment]\nseed = 11\ngrid = "paper"\n', encoding="utf-8")
        for sub in ("a", "b"):
            assert main(["benchmark", "--config", str(cfg), "--out", str(tmp_path / sub)]) == 0
        a = (tmp_path / "a" / "leaderboard.csv").read_bytes()
        b = (tmp_path / "b" / "leaderboard.csv").read_bytes()
        note(f"all 8 families, {len(a)} bytes")
        assert a == b and a.count(b"\n") == 9


def test_criterion_8_leakage_guard(criterion):
    with criterion(8, "scaler and normalizer fit on train only; trees get raw features") as note:
        events = []
        cfg = ExperimentConfig(synthetic=SyntheticSpec(n_rows=600, seed=3), grid_mode="paper", families=RANKED)
        res = pipeline.run_experiment(cfg, trace=lambda e, p: events.append((e, p)))
        split = next(p for e, p in events if e == "split")
        train, val, test = split["train"], split["val"], split["test"]
        fit_data = [p["data"] for e, p in events if e == "fit_scaler"]
        assert len(fit_data) == 1 and fit_data[0] is train
        np.testing.assert_allclose(res.scaler.means, train.features.mean(axis=0), rtol=1e-12)
        full_means = np.vstack([train.features, val.features, test.features]).mean(axis=0)
        assert not np.allclose(res.scaler.means, full_means)
        ys = [p["y"] for e, p in events if e == "fit_target_normalizer"]
        assert len(ys) == 1 and np.array_equal(ys[0], train.target)
        assert (res.normalizer.y_min, res.normalizer.y_max) == (train.target.min(), train.target.max())
        routes = {p["family"]: p for e, p in events if e == "route"}
        for fam, route in routes.items():
            assert route["kind"] == INPUT_KIND[fam]
            if fam in ("cart", "gbt"):
                for X, part in zip(route["X"], (train, val, test)):
                    assert np.array_equal(X, part.features)
            else:
                assert not np.array_equal(route["X"][0], train.features)
        note("routes checked for " + ", ".join(sorted(routes)))
