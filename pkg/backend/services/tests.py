import json
import math
import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from ..cli import SMOKE_PRESET, main
from ..data.mnist import MNIST_FILES, load_images
from ..errors import ArgumentError, ConfigFormatError, DependencyError
from ..metrics.certification import speedup_ratio
from ..neural.mlp import NetworkKind, init_mlp
from ..neural.rng import RngState, sample_gaussian
from ..sensing.operator import apply_operator, make_measurement_operator
from ..solver.batch_runner import mean_wall_ms_per_image, reconstruct_batch
from ..solver.npgd_solver import NpgdSolver
from ..solver.pgd_solver import PgdSolver, SolverConfig
from .experiment import (ExperimentConfig, load_config_dict, load_experiment_config, parse_key_value_text,
                         rerun_from_manifest, run_experiment)
from .manifest import MANIFEST_NAME, RunManifest
from .results_io import RESULT_COLUMNS, read_results_csv, tile_images, write_pgm_grid, write_results_csv

HEADER = ",".join(RESULT_COLUMNS)


def result_row(solver='npgd', snr=10.0, mse=0.5):
    return {'model': 'cgan', 'solver': solver, 'm': 15, 'ratio': 15 / 784, 'snr_db': snr, 'mse': mse,
            'residual': 0.125, 'mssim': 0.75, 'mean_wall_ms_per_image': 1.5, 'seed': 7}


def smoke_config(out: Path, **values) -> ExperimentConfig:
    return load_experiment_config(SMOKE_PRESET, [], output_dir=str(out), **values)


def pgm_header(path: Path):
    return path.read_bytes().split(maxsplit=4)[:4]


class TestResultsCsv:
    def test_empty_run_writes_header_only(self, tmp_path):
        path = write_results_csv([], tmp_path / "results.csv")
        assert path.read_text() == HEADER + "\n"

    def test_rows_are_sorted_and_noiseless_is_inf(self, tmp_path):
        rows = [result_row(snr='noiseless'), result_row(snr=10.0), result_row('pgd', -4.0), result_row(snr=-4.0)]
        path = write_results_csv(rows, tmp_path / "results.csv")
        back = read_results_csv(path)
        assert [(r['solver'], r['snr_db']) for r in back] == [('npgd', -4.0), ('npgd', 10.0), ('npgd', math.inf),
                                                              ('pgd', -4.0)]
        assert back[0]['m'] == 15 and back[0]['seed'] == 7

    def test_values_survive_round_trip(self, tmp_path):
        row = result_row(mse=0.1 + 0.2)
        back = read_results_csv(write_results_csv([row], tmp_path / "results.csv"))[0]
        assert back['mse'] == row['mse']
        assert back['ratio'] == row['ratio']

    def test_same_rows_same_bytes(self, tmp_path):
        rows = [result_row(), result_row('pgd')]
        a = write_results_csv(rows, tmp_path / "a.csv").read_bytes()
        b = write_results_csv(list(reversed(rows)), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_missing_column(self, tmp_path):
        row = result_row()
        del row['mssim']
        with pytest.raises(ArgumentError):
            write_results_csv([row], tmp_path / "results.csv")


class TestPgmGrid:
    def test_single_image_header(self, tmp_path):
        path = write_pgm_grid(np.zeros((1, 784)), 8, tmp_path / "one.pgm")
        assert pgm_header(path) == [b"P5", b"28", b"28", b"255"]

    def test_sixty_four_images_in_eight_columns(self, tmp_path):
        images = np.tanh(sample_gaussian(RngState(0), (64, 784)))
        path = write_pgm_grid(images, 8, tmp_path / "grid.pgm")
        assert pgm_header(path) == [b"P5", b"231", b"231", b"255"]
        with Image.open(path) as image:
            assert image.size == (8 * 28 + 7, 8 * 28 + 7)
            pixels = np.asarray(image)
        assert (pixels[28, :] == 128).all()
        assert (pixels[:, 28] == 128).all()

    def test_black_image_has_zero_payload(self, tmp_path):
        path = write_pgm_grid(-np.ones((1, 784)), 1, tmp_path / "black.pgm")
        assert path.read_bytes()[-784:] == bytes(784)
        assert path.stat().st_size == len(b"P5\n28 28\n255\n") + 784

    def test_columns_capped_at_image_count(self):
        grid = tile_images(np.zeros((3, 4)), 8, (2, 2))
        assert grid.shape == (2, 3 * 2 + 2)

    def test_partial_last_row_keeps_separator_gray(self):
        grid = tile_images(np.ones((3, 4)), 2, (2, 2))
        assert grid.shape == (5, 5)
        assert (grid[3:, 3:] == 128).all()
        assert (grid[:2, :2] == 255).all()

    def test_mixed_dimensions_refused(self, tmp_path):
        with pytest.raises(ArgumentError):
            write_pgm_grid([np.zeros(784), np.zeros(100)], 2, tmp_path / "mixed.pgm")

    def test_non_square_needs_shape(self, tmp_path):
        with pytest.raises(ArgumentError):
            write_pgm_grid(np.zeros((2, 20)), 2, tmp_path / "x.pgm")
        path = write_pgm_grid(np.zeros((2, 20)), 2, tmp_path / "x.pgm", (4, 5))
        assert pgm_header(path) == [b"P5", b"11", b"4", b"255"]


class TestExperimentConfig:
    def test_exactly_one_of_ratio_and_m(self):
        with pytest.raises(ArgumentError):
            ExperimentConfig(ratio=0.1, m=5)
        with pytest.raises(ArgumentError):
            ExperimentConfig()

    def test_m_from_ratio_rounds_half_up(self):
        assert ExperimentConfig(ratio=0.02).resolve_m(784) == 16
        assert ExperimentConfig(ratio=0.5).resolve_m(3) == 2
        assert ExperimentConfig(m=39).resolve_m(784) == 39
        with pytest.raises(ArgumentError):
            ExperimentConfig(m=800).resolve_m(784)

    def test_sigma_entries_are_not_an_snr_sweep(self):
        with pytest.raises(ArgumentError):
            ExperimentConfig(m=5, snr=['sigma:0.1'])

    def test_unknown_keys_and_stages(self):
        with pytest.raises(ArgumentError):
            ExperimentConfig.from_dict({'m': 5, 'epochs': 3})
        with pytest.raises(ArgumentError):
            ExperimentConfig(m=5, stages=['train'])

    def test_default_stages(self):
        assert ExperimentConfig(m=5, model='began-c', solvers='pgd').default_stages() == \
            ['train-began', 'reconstruct', 'evaluate']
        assert ExperimentConfig(m=5).default_stages() == ['train-gan', 'train-pinv', 'reconstruct', 'evaluate']

    def test_key_value_text(self):
        values = parse_key_value_text("# sweep\nmodel=gan\nsolver.inner_iters=50\n\nsnr=[noiseless, 10]\n")
        assert values == {'model': 'gan', 'solver': {'inner_iters': 50}, 'snr': ['noiseless', 10]}
        with pytest.raises(ArgumentError):
            parse_key_value_text("model gan")

    def test_config_files_and_overrides(self, tmp_path):
        (tmp_path / "exp.cfg").write_text("m=23\ntraining.epochs=5\n")
        cfg = load_experiment_config(tmp_path / "exp.cfg", ["training.lr=0.001", "seed=3"], seed=None, jobs=2)
        assert (cfg.m, cfg.seed, cfg.jobs) == (23, 3, 2)
        assert cfg.training == {'epochs': 5, 'lr': 0.001}
        (tmp_path / "exp.json").write_text(json.dumps({'ratio': 0.1, 'model': 'gan'}))
        assert load_experiment_config(tmp_path / "exp.json").model == 'gan'
        assert load_experiment_config().ratio == 0.05

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(DependencyError):
            load_config_dict(tmp_path / "absent.yaml")


    def test_unparsable_config_files(self, tmp_path):
        (tmp_path / "bad.yaml").write_text("model: [cgan\n")
        (tmp_path / "bad.json").write_text("{\"m\": 5,")
        (tmp_path / "bad.cfg").write_text("model gan\n")
        (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
        for name in ("bad.yaml", "bad.json", "bad.cfg", "list.yaml"):
            with pytest.raises(ConfigFormatError) as info:
                load_config_dict(tmp_path / name)
            assert info.value.exit_code == 2

    def test_wall_time_is_off_by_default(self):
        assert ExperimentConfig(m=5).record_wall_time is False
        assert smoke_config(Path("unused")).record_wall_time is False


class TestSmokePipeline:
    def test_smoke_run_writes_every_artifact(self, tmp_path):
        manifest = run_experiment(smoke_config(tmp_path))
        rows = read_results_csv(tmp_path / "results.csv")
        assert len(rows) == 4
        assert {(r['solver'], r['snr_db']) for r in rows} == {('npgd', 20.0), ('npgd', math.inf),
                                                              ('pgd', 20.0), ('pgd', math.inf)}
        assert all(r['model'] == 'synthetic' and r['m'] == 8 for r in rows)
        # exact pseudo-inverse and a converged inner loop project identically
        by_cell = {(r['solver'], r['snr_db']): r['mse'] for r in rows}
        assert by_cell[('pgd', math.inf)] == pytest.approx(by_cell[('npgd', math.inf)], rel=1e-6)

        for name in ("generator.gpcs", "pinv.gpcs", "reconstructions.npz", "certify.json", "speedup.json",
                     "grids/ground_truth.pgm", "grids/npgd_noiseless.pgm", "traces/pgd_20_image0000.csv"):
            assert (tmp_path / name).exists(), name
        assert manifest.stages == ['smoke', 'reconstruct', 'evaluate', 'certify']
        assert manifest.operator == {'m': 8, 'n': 16, 'seed': manifest.seeds['operator'], 'orthogonalized': False}

        report = json.loads((tmp_path / "certify.json").read_text())
        assert report['projector']['delta'] == pytest.approx(0.0, abs=1e-9)
        assert report['rec']['pairs'] == 100

    def test_same_seed_same_bytes(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run_experiment(smoke_config(first))
        run_experiment(smoke_config(second))
        for name in ("results.csv", "generator.gpcs", "pinv.gpcs", "grids/pgd_20.pgm"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
        assert all(r['mean_wall_ms_per_image'] == 0.0 for r in read_results_csv(first / "results.csv"))

    def test_stage_without_inputs(self, tmp_path):
        with pytest.raises(DependencyError):
            run_experiment(smoke_config(tmp_path, stages=['reconstruct']))

    def test_missing_dataset_file(self, tmp_path):
        cfg = ExperimentConfig(m=5, model='gan', dataset={'kind': 'idx', 'train_path': str(tmp_path / "none.idx")},
                               output_dir=str(tmp_path), stages=['train-gan'])
        with pytest.raises(DependencyError):
            run_experiment(cfg)

    def test_rerun_from_manifest(self, tmp_path):
        run_experiment(smoke_config(tmp_path))
        before = (tmp_path / "results.csv").read_bytes()
        manifest = rerun_from_manifest(tmp_path / MANIFEST_NAME)
        assert manifest.stages[-1] == 'evaluate'
        assert (tmp_path / "results.csv").read_bytes() == before

    def test_rerun_refuses_changed_artifacts(self, tmp_path):
        run_experiment(smoke_config(tmp_path))
        with open(tmp_path / "reconstructions.npz", "ab") as handle:
            handle.write(b"\0")
        status = RunManifest.load(tmp_path).verify(tmp_path)
        assert status['changed'] == ['reconstructions.npz']
        with pytest.raises(DependencyError):
            rerun_from_manifest(tmp_path)


class TestManifest:
    def test_save_load_and_verify(self, tmp_path):
        (tmp_path / "a.txt").write_text("a")
        manifest = RunManifest(config={'m': 5}, seeds={'master': 1})
        manifest.record_stage('evaluate', 12.3456)
        manifest.hash_outputs(tmp_path)
        manifest.save(tmp_path)
        loaded = RunManifest.load(tmp_path / MANIFEST_NAME)
        assert loaded.artifacts == manifest.artifacts and list(loaded.artifacts) == ['a.txt']
        assert loaded.wall_ms == {'evaluate': 12.346}
        assert loaded.verify(tmp_path) == {'missing': [], 'changed': []}
        (tmp_path / "a.txt").unlink()
        assert loaded.verify(tmp_path)['missing'] == ['a.txt']

    def test_missing_or_corrupt_manifest(self, tmp_path):
        with pytest.raises(DependencyError):
            RunManifest.load(tmp_path)
        (tmp_path / MANIFEST_NAME).write_text("{not json")
        with pytest.raises(ArgumentError):
            RunManifest.load(tmp_path)


class TestCli:
    def test_smoke_command(self, tmp_path):
        assert main(['smoke', '--out', str(tmp_path), '--seed', '3', '--set', 'record_wall_time=true']) == 0
        assert all(r['mean_wall_ms_per_image'] > 0 for r in read_results_csv(tmp_path / "results.csv"))
        assert (tmp_path / "results.csv").read_text().count("\n") == 5
        assert json.loads((tmp_path / MANIFEST_NAME).read_text())['seeds']['master'] == RngState(3).seed

    def test_malformed_config_exit_code(self, tmp_path):
        config = tmp_path / "broken.yaml"
        config.write_text("solver: {outer_iters: 3\n")
        assert main(["smoke", "--config", str(config), "--out", str(tmp_path / "run")]) == 2

    def test_missing_weights_exit_code_and_failure_summary(self, tmp_path):
        code = main(['reconstruct', '--config', str(SMOKE_PRESET), '--out', str(tmp_path)])
        assert code == 4
        failure = json.loads((tmp_path / "failure_summary.json").read_text())
        assert failure['status'] == 'error'
        assert failure['error_type'] == 'DependencyError'

    def test_usage_errors_exit_one(self, tmp_path):
        assert main(['no-such-command']) == 1
        assert main(['smoke', '--out', str(tmp_path), '--set', 'ratio=0.5', '--set', 'm=4']) == 1

    def test_evaluate_from_manifest(self, tmp_path):
        assert main(['smoke', '--out', str(tmp_path)]) == 0
        assert main(['evaluate', '--manifest', str(tmp_path / MANIFEST_NAME)]) == 0


MNIST_DIR = os.getenv("GPCS_MNIST_DIR")


@pytest.mark.slow
@pytest.mark.skipif(not MNIST_DIR, reason="GPCS_MNIST_DIR is not set")
class TestMnistFiles:
    def test_train_and_test_counts(self):
        train = load_images(Path(MNIST_DIR) / MNIST_FILES['train_images'])
        test = load_images(Path(MNIST_DIR) / MNIST_FILES['test_images'], 'test')
        assert (train.count, train.rows, train.cols) == (60000, 28, 28)
        assert test.count == 10000
        assert train.range_ok() and test.range_ok()

    def test_smoke_sized_mnist_run(self, tmp_path):
        cfg = ExperimentConfig(model='cgan', m=39, dataset={'kind': 'mnist', 'data_dir': MNIST_DIR,
                                                            'train_limit': 512, 'test_limit': 8},
                               latent_dim=8, training={'epochs': 1, 'batch_size': 64},
                               pinv={'epochs': 1, 'batch_size': 64},
                               architecture={'generator': {'hidden': [32]}, 'discriminator': {'hidden': [32]},
                                             'pinv': {'hidden': [32]}},
                               solver={'outer_iters': 3, 'inner_iters': 10}, test_count=8,
                               output_dir=str(tmp_path), seed=1)
        run_experiment(cfg)
        rows = read_results_csv(tmp_path / "results.csv")
        assert len(rows) == 2
        assert all(np.isfinite(r['mse']) for r in rows)

    @staticmethod
    def _subset_config(out: Path, model: str, seed: int, **values) -> ExperimentConfig:
        return ExperimentConfig(model=model, m=39, seed=seed, output_dir=str(out), test_count=64,
                                dataset={'kind': 'mnist', 'data_dir': MNIST_DIR, 'train_limit': 10000,
                                         'test_limit': 64},
                                training={'epochs': 20, 'batch_size': 64}, **values)

    def test_speedup_on_test_images(self):
        X = load_images(Path(MNIST_DIR) / MNIST_FILES['test_images'], 'test', limit=64).images
        rng = RngState(9)
        G = init_mlp([64, 256, 256, 784], ["relu", "relu", "tanh"], rng.child(1))
        pinv = init_mlp([784, 256, 256, 64], ["relu", "relu", "identity"], rng.child(2), kind=NetworkKind.PINV)
        A = make_measurement_operator(39, 784, rng.child(3))
        Y = apply_operator(A, X)
        cfg = SolverConfig(outer_iters=30, inner_iters=100)
        pgd = reconstruct_batch(PgdSolver(G, A, cfg), Y, X)
        npgd = reconstruct_batch(NpgdSolver(G, pinv, A, cfg), Y, X)
        assert speedup_ratio(mean_wall_ms_per_image(pgd), mean_wall_ms_per_image(npgd)) >= 30

    def test_conditional_generator_reconstructs_better(self, tmp_path):
        wins = 0
        for seed in (1, 2, 3):
            medians = {}
            for model in ('gan', 'cgan'):
                out = tmp_path / f"{model}_{seed}"
                run_experiment(self._subset_config(out, model, seed, solvers='pgd'))
                with np.load(out / "reconstructions.npz") as npz:
                    errors = np.sum((npz['pgd__noiseless__x_hat'] - npz['x_true']) ** 2, axis=1)
                medians[model] = float(np.median(errors))
            wins += medians['cgan'] < medians['gan']
        assert wins >= 2

    def test_npgd_settles_within_five_iterations(self, tmp_path):
        run_experiment(self._subset_config(tmp_path, 'cgan', 1, solvers='npgd', trace_images=64,
                                           solver={'outer_iters': 30}))
        settled = 0
        for i in range(64):
            f_xn = pd.read_csv(tmp_path / "traces" / f"npgd_noiseless_image{i:04d}.csv")['f_xn'].to_numpy()
            settled += abs(f_xn[5] - f_xn[30]) <= 0.1 * f_xn[30]
        assert settled >= 0.8 * 64

    def test_began_balance_stays_in_range(self, tmp_path):
        run_experiment(self._subset_config(tmp_path, 'began-c', 1, stages=['train-began']))
        history = pd.read_csv(tmp_path / "training_history.csv")
        assert len(history) == 20
        assert history['beta'].between(0.0, 1.0).all()
        assert np.isfinite(history[['L_D', 'L_G']].to_numpy()).all()
