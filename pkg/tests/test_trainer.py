import json
import math

import numpy as np
import pytest

from iqpbp import arch, bplab, charfn, kernel, oracle, trainer
from iqpbp.errors import DimensionError
from iqpbp.gf2 import BitVec
from iqpbp.streams import substream


def bv(text: str) -> BitVec:
    return BitVec.from_string(text)


class TestTargets:
    def test_zero_frequency_char_is_one(self):
        target = trainer.dirichlet_target(4, 0)
        assert trainer.target_char(target, BitVec.zeros(4)) == pytest.approx(1.0)

    def test_all_zero_dataset(self):
        target = trainer.dataset_target([BitVec.zeros(3)] * 5)
        for value in range(8):
            assert trainer.target_char(target, BitVec(3, value)) == 1.0

    def test_dataset_char_matches_dense_spectrum(self):
        rng = np.random.default_rng(0)
        samples = [BitVec(4, int(rng.integers(0, 16))) for _ in range(200)]
        target = trainer.dataset_target(samples)
        spectrum = target.spectrum()
        for value in range(16):
            assert trainer.target_char(target, BitVec(4, value)) == pytest.approx(
                spectrum[value], abs=1e-12
            )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            trainer.dataset_target([])

    def test_planted_round_trip(self):
        target = trainer.planted_target(4, [bv("1000"), bv("0110")], [0.4, -0.3])
        assert trainer.target_char(target, bv("1000")) == 0.4
        assert trainer.target_char(target, bv("0110")) == -0.3
        assert trainer.target_char(target, bv("1111")) == 0.0
        assert trainer.target_char(target, BitVec.zeros(4)) == 1.0
        probs = target.distribution()
        assert probs.min() >= -1e-12 and probs.sum() == pytest.approx(1.0)

    def test_planted_rejects_invalid(self):
        with pytest.raises(ValueError):
            trainer.planted_target(3, [bv("100")], [1.4])
        with pytest.raises(ValueError):
            trainer.planted_target(3, [BitVec.zeros(3)], [0.2])
        with pytest.raises(ValueError):
            # amplitudes of total magnitude > 1 drive p negative somewhere
            trainer.planted_target(3, [bv("100"), bv("010")], [0.9, 0.9])

    def test_explicit_validation(self):
        with pytest.raises(ValueError):
            trainer.explicit_target(np.array([0.5, 0.6]), 1)

    def test_load_dataset(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("101\n001\n101\n")
        target = trainer.load_dataset(str(path))
        assert target.n == 3
        assert trainer.target_char(target, bv("100")) == pytest.approx((-1 + 1 - 1) / 3)


class TestDirichletEnsemble:
    def test_moments(self):
        n, seeds = 4, 10_000
        a, b = bv("1010"), bv("0110")
        ca = np.empty(seeds)
        cb = np.empty(seeds)
        for s in range(seeds):
            spectrum = trainer.dirichlet_target(n, s).spectrum()
            ca[s] = spectrum[a.bits]
            cb[s] = spectrum[b.bits]
        sigma2 = trainer.dirichlet_sigma2(n)
        se_mean = ca.std(ddof=1) / math.sqrt(seeds)
        assert abs(ca.mean()) <= 4 * se_mean
        sq = ca**2
        se_sq = sq.std(ddof=1) / math.sqrt(seeds)
        assert abs(sq.mean() - sigma2) <= 4 * se_sq
        cross = ca * cb
        se_cross = cross.std(ddof=1) / math.sqrt(seeds)
        assert abs(cross.mean()) <= 4 * se_cross

    def test_reproducible(self):
        one = trainer.dirichlet_target(5, 42).spectrum()
        two = trainer.dirichlet_target(5, 42).spectrum()
        assert np.array_equal(one, two)


class TestLossEstimator:
    def test_point_mass_on_zero_frequency(self):
        gen_set = arch.lattice(2, 2)
        pmf = kernel.explicit_pmf(4, [(BitVec.zeros(4), 1.0)])
        target = trainer.dirichlet_target(4, 1)
        est = trainer.mmd_loss_estimate(
            gen_set, np.full(8, 0.3), target, pmf, 16, 16, np.random.default_rng(0)
        )
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_unbiased_vs_oracle(self):
        gen_set = arch.lattice(2, 2)
        rng = np.random.default_rng(1)
        theta = rng.random(gen_set.num_generators) * 2 * math.pi
        pmf = kernel.gaussian_spectrum(4, 4.0)
        target = trainer.dirichlet_target(4, 7)
        exact = oracle.mmd_exact(
            oracle.OutputDistribution(4, target.distribution()),
            oracle.statevector_probs(gen_set, theta),
            pmf,
        )
        reps = 200
        means = np.array([
            trainer.mmd_loss_estimate(
                gen_set, theta, target, pmf, 40, 40, np.random.default_rng(100 + i)
            ).mean
            for i in range(reps)
        ])
        se = means.std(ddof=1) / math.sqrt(reps)
        assert abs(means.mean() - exact) <= 4 * se

    def test_requires_two_of_each(self):
        gen_set = arch.product(2)
        pmf = kernel.gaussian_spectrum(2, 2.0)
        target = trainer.dirichlet_target(2, 0)
        with pytest.raises(ValueError):
            trainer.mmd_loss_estimate(gen_set, [0.1, 0.2], target, pmf, 1, 16,
                                      np.random.default_rng(0))


class TestGradientEstimator:
    def test_unbiased_vs_finite_difference(self):
        gen_set = arch.lattice(2, 2)
        rng = np.random.default_rng(2)
        theta = rng.random(gen_set.num_generators) * 2 * math.pi
        pmf = kernel.gaussian_spectrum(4, 4.0)
        target = trainer.dirichlet_target(4, 9)
        p_dist = oracle.OutputDistribution(4, target.distribution())
        exact = np.array([
            oracle.mmd_grad_fd(gen_set, theta, ell, p_dist, pmf)
            for ell in range(1, gen_set.num_generators + 1)
        ])
        reps = 200
        grads = np.stack([
            trainer.mmd_gradient_estimate(
                gen_set, theta, target, pmf, 40, 40, np.random.default_rng(300 + i)
            )
            for i in range(reps)
        ])
        se = grads.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(grads.mean(axis=0) - exact) <= 4 * se + 1e-12)

    def test_sparsity_outside_sampled_subset(self):
        gen_set = arch.product(4)
        a = bv("1000")
        pmf = kernel.explicit_pmf(4, [(a, 1.0)])
        target = trainer.dirichlet_target(4, 3)
        grad = trainer.mmd_gradient_estimate(
            gen_set, np.full(4, 0.4), target, pmf, 8, 32, np.random.default_rng(4)
        )
        assert grad[0] != 0.0
        assert np.all(grad[1:] == 0.0)

    def test_loss_near_zero_at_exact_match(self):
        gen_set = arch.product(2)
        theta = np.array([0.2, 0.4])
        amps = [
            charfn.exact_char(gen_set, theta, a)
            for a in (bv("10"), bv("01"), bv("11"))
        ]
        target = trainer.planted_target(2, [bv("10"), bv("01"), bv("11")], amps)
        pmf = kernel.gaussian_spectrum(2, 2.0)
        est = trainer.mmd_loss_estimate(
            gen_set, theta, target, pmf, 200, 200, np.random.default_rng(11)
        )
        assert abs(est.mean) <= 4 * est.stderr
        assert abs(est.mean) < 0.01

    def test_stationary_at_exact_match(self):
        # plant the model's own spectrum as the target: gradient mean is zero
        gen_set = arch.product(2)
        theta = np.array([0.2, 0.4])
        amps = [
            charfn.exact_char(gen_set, theta, a)
            for a in (bv("10"), bv("01"), bv("11"))
        ]
        target = trainer.planted_target(2, [bv("10"), bv("01"), bv("11")], amps)
        pmf = kernel.gaussian_spectrum(2, 2.0)
        reps = 200
        grads = np.stack([
            trainer.mmd_gradient_estimate(
                gen_set, theta, target, pmf, 30, 30, np.random.default_rng(700 + i)
            )
            for i in range(reps)
        ])
        se = grads.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(grads.mean(axis=0)) <= 4 * se + 1e-12)


def small_config(**overrides):
    base = dict(
        architecture="complete:4",
        kernel="gaussian:4",
        init="gaussian:0.3162",
        target={
            "kind": "planted",
            "frequencies": ["1000", "0100"],
            "amplitudes": [0.3, -0.25],
        },
        learning_rate=0.1,
        steps=40,
        n_freq=6,
        n_z=32,
        seed=5,
    )
    base.update(overrides)
    return trainer.TrainConfig.from_dict(base)


class TestTrain:
    def test_zero_steps_single_record(self):
        trace = trainer.train(small_config(steps=0))
        assert len(trace.records) == 1
        assert trace.records[0].step == 0
        scheme = charfn.parse_init_scheme("gaussian:0.3162")
        expected = charfn.sample_thetas(scheme, 10, 1, substream(5, "init"))[0]
        assert np.array_equal(trace.final_theta, expected)

    def test_trace_length(self):
        trace = trainer.train(small_config(steps=7))
        assert len(trace.records) == 8
        assert [r.step for r in trace.records] == list(range(8))

    def test_bit_identical_reruns(self):
        a = trainer.train(small_config())
        b = trainer.train(small_config())
        assert np.array_equal(a.final_theta, b.final_theta)
        assert a.records == b.records

    def test_seed_changes_trace(self):
        a = trainer.train(small_config())
        b = trainer.train(small_config(seed=6))
        assert not np.array_equal(a.final_theta, b.final_theta)

    def test_descent_improves_oracle_mmd(self):
        cfg = small_config(steps=300, n_freq=8, n_z=64)
        gen_set = arch.parse_architecture(cfg.architecture)
        pmf = kernel.parse_kernel(cfg.kernel, gen_set.n)
        target = trainer.resolve_target(cfg.target, gen_set.n)
        p_dist = oracle.OutputDistribution(gen_set.n, target.distribution())
        theta0 = charfn.sample_thetas(
            charfn.parse_init_scheme(cfg.init), gen_set.num_generators, 1,
            substream(cfg.seed, "init"),
        )[0]
        trace = trainer.train(cfg)
        before = oracle.mmd_exact(p_dist, oracle.statevector_probs(gen_set, theta0), pmf)
        after = oracle.mmd_exact(
            p_dist, oracle.statevector_probs(gen_set, trace.final_theta), pmf
        )
        assert after < before

    def test_config_validation(self):
        with pytest.raises(ValueError):
            small_config(learning_rate=0.0)
        with pytest.raises(ValueError):
            small_config(steps=-1)
        with pytest.raises(ValueError):
            small_config(n_freq=0)

    def test_config_json_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        cfg = small_config()
        path.write_text(json.dumps({
            "architecture": cfg.architecture, "kernel": cfg.kernel, "init": cfg.init,
            "target": cfg.target, "learning_rate": cfg.learning_rate, "steps": cfg.steps,
            "n_freq": cfg.n_freq, "n_z": cfg.n_z, "seed": cfg.seed,
        }))
        assert trainer.TrainConfig.from_json(str(path)) == cfg


class TestResolveTarget:
    def test_dict_forms(self, tmp_path):
        planted = trainer.resolve_target(
            {"kind": "planted", "frequencies": ["100"], "amplitudes": [0.5]}, 3
        )
        assert planted.kind == "planted"
        dirichlet = trainer.resolve_target({"kind": "dirichlet", "seed": 3}, 3)
        assert dirichlet.kind == "explicit"
        explicit = trainer.resolve_target(
            {"kind": "explicit", "probs": [0.25, 0.25, 0.25, 0.25]}, 2
        )
        assert explicit.kind == "explicit"
        data = tmp_path / "d.txt"
        data.write_text("11\n00\n")
        dataset = trainer.resolve_target({"kind": "dataset", "path": str(data)}, 2)
        assert dataset.kind == "dataset"

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            trainer.resolve_target(
                {"kind": "planted", "frequencies": ["10"], "amplitudes": [0.5]}, 3
            )

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            trainer.resolve_target({"kind": "mixture"}, 3)


def test_sigma2_matches_lower_bound_usage():
    # the built-in ensemble variance drives the averaged lower bound
    n = 3
    value = trainer.dirichlet_sigma2(n)
    assert value == pytest.approx(1 / 9)
    gen_set = arch.product(n)
    pmf = kernel.gaussian_spectrum(n, float(n))
    bound = bplab.mmd_grad_var_lower_avg(
        gen_set, 1, pmf, charfn.InitScheme.uniform(), value
    )
    assert bound > 0
