import json

import numpy as np
import pytest

from byzsgd import gar
from byzsgd.attack import AttackMode, AttackSpec
from byzsgd.simulator import (
    CSV_HEADER,
    ExperimentConfig,
    SimulationDiverged,
    learning_rate,
    run_experiment,
)
from byzsgd.tasks import QuadraticTask, make_task


def quad(**kw):
    base = dict(task="quadratic", task_params={"dim": 20, "noise": 1.0}, n_honest=7, n_byzantine=2,
                rule="krum", epochs=30, eval_every=5, master_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


class TestLearningRate:
    def test_values(self):
        assert learning_rate(0, 0.3, 50) == 0.3
        assert learning_rate(10_000, 1.0, 10_000) == 0.5

    def test_default_config(self):
        cfg = ExperimentConfig()
        assert (cfg.eta0, cfg.r_eta) == (1.0, 10000.0)


class TestConfig:
    def test_json_roundtrip(self):
        cfg = quad(attack=AttackSpec(AttackMode.ALL_COORDS, gamma=2.0, window=(0, 10)), p="inf")
        again = ExperimentConfig.from_json(cfg.to_json())
        assert again == cfg
        assert json.loads(cfg.to_json())["attack"]["mode"] == "linf-all"

    def test_field_names(self):
        keys = set(json.loads(quad().to_json()))
        assert {"task", "task_params", "n_honest", "n_byzantine", "rule", "declared_f", "attack", "eta0",
                "r_eta", "batch_size", "epochs", "master_seed", "eval_every"} <= keys

    def test_declared_f_defaults(self):
        assert quad().declared_f == 2
        assert quad(n_byzantine=0, declared_f=3, rule="average").declared_f == 3

    def test_quorum(self):
        with pytest.raises(gar.QuorumError):
            quad(rule="bulyan:krum")

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="unknown config fields: colour"):
            ExperimentConfig.from_dict({"colour": 1})

    @pytest.mark.parametrize("kw", [dict(epochs=0), dict(eta0=0.0), dict(eval_every=0), dict(n_honest=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            quad(**kw)


class TestRun:
    def test_noiseless_descent_is_monotone(self):
        cfg = quad(task_params={"dim": 10, "noise": 0.0}, rule="average", n_byzantine=0, eval_every=1,
                   eta0=0.1, epochs=40)
        task = make_task(cfg.task, cfg.task_params, cfg.master_seed)
        loss = run_experiment(cfg, task).column("loss")
        assert np.all(np.diff(loss) < 0)

    def test_identical_gradients_krum_equals_average(self):
        params = {"dim": 6, "noise": 0.0}
        a = run_experiment(quad(task_params=params, n_byzantine=0, rule="average", n_honest=5, declared_f=0))
        k = run_experiment(quad(task_params=params, n_byzantine=0, rule="krum", n_honest=5, declared_f=0))
        np.testing.assert_allclose(a.final_params, k.final_params, rtol=1e-12)

    def test_rows_and_header(self):
        log = run_experiment(quad(epochs=23, eval_every=5))
        assert log.column("epoch").tolist() == [0, 5, 10, 15, 20, 23]
        assert log.to_csv().splitlines()[0] == ",".join(CSV_HEADER)

    def test_bitwise_determinism(self):
        cfg = quad(attack=AttackSpec(gamma_scale=0.5))
        assert run_experiment(cfg).to_csv() == run_experiment(cfg).to_csv()

    def test_seed_changes_run(self):
        assert run_experiment(quad()).to_csv() != run_experiment(quad(master_seed=12)).to_csv()

    def test_attack_window(self):
        log = run_experiment(quad(attack=AttackSpec(gamma=0.1, window=(3, 8)), epochs=12))
        assert len(log.gammas) == 5

    def test_empty_window_matches_honest_run(self):
        quiet = run_experiment(quad(attack=AttackSpec(gamma=50.0, window=(0, 0))))
        honest = run_experiment(quad())
        assert quiet.to_csv() == honest.to_csv()

    def test_byzantine_selected_under_small_attack(self):
        log = run_experiment(quad(attack=AttackSpec(gamma=0.0), task_params={"dim": 200, "noise": 1.0}))
        assert log.records[-1].byz_selected_count == 1

    def test_fixed_gamma_shifts_attacked_coordinate(self):
        params = {"dim": 50, "noise": 1.0}
        attacked = run_experiment(quad(rule="average", attack=AttackSpec(gamma=9.0), task_params=params))
        honest = run_experiment(quad(rule="average", task_params=params))
        # average moves by f * gamma / n = 2 per step, so the bowl settles about 2 lower
        shift = attacked.records[-1].attacked_coord_param - honest.records[-1].attacked_coord_param
        assert -3.5 < shift < -1.0

    def test_all_coordinate_mode(self):
        cfg = quad(rule="bulyan:krum", n_honest=9, attack=AttackSpec(AttackMode.ALL_COORDS, gamma_scale=0.5), epochs=6)
        assert len(run_experiment(cfg).records) == 3

    def test_worker_permutation_leaves_trajectory(self, monkeypatch):
        import byzsgd.simulator as sim

        cfg = quad(rule="bulyan:krum", n_honest=9, epochs=10)
        ref = run_experiment(cfg)
        original = sim._honest_gradients

        def reversed_workers(task, x, cfg, epoch, workers):
            return original(task, x, cfg, epoch, list(workers)[::-1])

        monkeypatch.setattr(sim, "_honest_gradients", reversed_workers)
        flipped = run_experiment(cfg)
        np.testing.assert_allclose(flipped.final_params, ref.final_params, rtol=1e-12, atol=1e-12)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_epoch(self):
        task = QuadraticTask(np.zeros(3), noise=0.0)
        task.init_params = lambda seed=0: np.full(3, 1e300)
        with pytest.raises(SimulationDiverged) as err:
            run_experiment(quad(task_params={"dim": 3}, rule="average", eta0=1e10), task)
        assert err.value.epoch == 0

    def test_coordinate_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            run_experiment(quad(attack=AttackSpec(coord=99)))
