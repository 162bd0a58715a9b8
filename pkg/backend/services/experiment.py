"""
Experiment orchestration.

An ExperimentConfig names the dataset, model kind, measurement setup, SNR
sweep and every stage setting. run_experiment executes the requested stages
in pipeline order inside one output directory:

    train-gan / train-began -> train-pinv -> reconstruct -> evaluate -> certify

Each stage reads the artifacts of the earlier ones from disk, so stages can be
run in separate invocations. Every random draw comes from a child stream of
the master seed.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from ..data.images import ImageDataset
from ..data.mnist import MNIST_FILES, default_data_dir, load_images
from ..data.synthetic import SyntheticManifold, make_synthetic_manifold
from ..errors import ArgumentError, ConfigFormatError, DependencyError
from ..logging_utils import get_logger
from ..metrics.certification import (all_pairs, check_npgd_bound, dataset_pairs, estimate_projector_delta,
                                     estimate_rec, estimate_s_rec, range_pairs, speedup_ratio)
from ..metrics.reconstruction import mse, residual_error
from ..metrics.ssim import SsimConfig, mssim_batch
from ..neural.mlp import MlpNetwork, mlp_forward
from ..neural.rng import RngState, sample_gaussian
from ..neural.weights_io import load_weights, save_weights
from ..sensing.noise import FIXED_SIGMA, NOISELESS, NoiseSpec, draw_noise, measure
from ..sensing.operator import MeasurementOperator, make_measurement_operator
from ..solver.batch_runner import reconstruct_batch
from ..solver.npgd_solver import NpgdSolver
from ..solver.pgd_solver import PgdSolver, SolverConfig
from .manifest import MANIFEST_NAME, RunManifest
from .model_factory import create_model
from .results_io import write_pgm_grid, write_results_csv

logger = get_logger(__name__)

STAGE_ORDER = ['smoke', 'train-gan', 'train-began', 'train-pinv', 'reconstruct', 'evaluate', 'certify']
GAN_KINDS = ('gan', 'cgan')
BEGAN_KINDS = ('began-c',)
SYNTHETIC_MODEL = 'synthetic'
MODEL_KINDS = GAN_KINDS + BEGAN_KINDS + (SYNTHETIC_MODEL,)
SOLVER_CHOICES = {'pgd': ['pgd'], 'npgd': ['npgd'], 'both': ['pgd', 'npgd']}
DATASET_KINDS = ('mnist', 'idx', 'synthetic')

# Child stream ids of the master seed
STREAMS = {'operator': 1, 'training': 2, 'pinv': 3, 'noise': 4, 'reconstruction': 5, 'certify': 6, 'dataset': 7}

GENERATOR_FILE = "generator.gpcs"
DISCRIMINATOR_FILE = "discriminator.gpcs"
PINV_FILE = "pinv.gpcs"
RECONSTRUCTIONS_FILE = "reconstructions.npz"
RESULTS_FILE = "results.csv"
CERTIFY_FILE = "certify.json"
SPEEDUP_FILE = "speedup.json"
CLAIMED_SPEEDUP = [140, 175]


# ========================================
# CONFIGURATION
# ========================================

@dataclass
class ExperimentConfig:
    """
    One experiment. Exactly one of `ratio` and `m` is given; m = round(ratio n)
    (half rounds up) when derived.
    """
    model: str = 'cgan'
    dataset: Dict[str, Any] = field(default_factory=lambda: {'kind': 'mnist'})
    latent_dim: int = 64
    ratio: Optional[float] = None
    m: Optional[int] = None
    snr: List[Any] = field(default_factory=lambda: [NOISELESS])
    solvers: str = 'both'
    training: Dict[str, Any] = field(default_factory=dict)
    pinv: Dict[str, Any] = field(default_factory=dict)
    architecture: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)
    certify: Dict[str, Any] = field(default_factory=dict)
    operator: Dict[str, Any] = field(default_factory=dict)
    conditioning_noise: Optional[str] = None
    stages: Optional[List[str]] = None
    seed: int = 0
    output_dir: str = 'runs/default'
    jobs: int = 1
    test_count: int = 64
    grid_cols: int = 8
    trace_images: int = 1
    record_wall_time: bool = False

    def __post_init__(self):
        if (self.ratio is None) == (self.m is None):
            raise ArgumentError("Give exactly one of 'ratio' and 'm'")
        if self.ratio is not None and not 0.0 < float(self.ratio) <= 1.0:
            raise ArgumentError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.m is not None and int(self.m) < 1:
            raise ArgumentError(f"m must be >= 1, got {self.m}")
        if self.model not in MODEL_KINDS:
            raise ArgumentError(f"model must be one of {list(MODEL_KINDS)}, got '{self.model}'")
        if self.solvers not in SOLVER_CHOICES:
            raise ArgumentError(f"solvers must be one of {sorted(SOLVER_CHOICES)}, got '{self.solvers}'")
        if self.dataset.get('kind', 'mnist') not in DATASET_KINDS:
            raise ArgumentError(f"dataset.kind must be one of {DATASET_KINDS}")
        if not isinstance(self.snr, (list, tuple)):
            self.snr = [self.snr]
        for spec in self.noise_specs():
            if spec.mode == FIXED_SIGMA:
                raise ArgumentError("The SNR sweep takes dB values or 'noiseless'")
        if self.latent_dim < 1 or self.test_count < 1 or self.grid_cols < 1 or self.jobs == 0:
            raise ArgumentError("latent_dim, test_count and grid_cols must be >= 1 and jobs non-zero")
        unknown = [s for s in self.stages or [] if s not in STAGE_ORDER]
        if unknown:
            raise ArgumentError(f"Unknown stage(s) {unknown}; choose from {STAGE_ORDER}")

    def resolve_m(self, n: int) -> int:
        if self.m is not None:
            if self.m > n:
                raise ArgumentError(f"m = {self.m} exceeds n = {n}")
            return int(self.m)
        return max(1, int(math.floor(self.ratio * n + 0.5)))

    def noise_specs(self) -> List[NoiseSpec]:
        return [NoiseSpec.parse(value) for value in self.snr]

    def solver_names(self) -> List[str]:
        return SOLVER_CHOICES[self.solvers]

    def default_stages(self) -> List[str]:
        if self.model == SYNTHETIC_MODEL:
            return ['smoke', 'reconstruct', 'evaluate', 'certify']
        stages = ['train-began' if self.model in BEGAN_KINDS else 'train-gan']
        if 'npgd' in self.solver_names():
            stages.append('train-pinv')
        return stages + ['reconstruct', 'evaluate']

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(values) - known)
        if unknown:
            raise ArgumentError(f"Unknown experiment keys: {unknown}")
        return cls(**values)


def _set_dotted(target: Dict[str, Any], key: str, value: Any) -> None:
    parts = [p.strip() for p in key.split('.')]
    if not all(parts):
        raise ArgumentError(f"Malformed key '{key}'")
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ArgumentError(f"'{key}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def parse_assignment(line: str) -> Tuple[str, Any]:
    """'solver.inner_iters=100' -> ('solver.inner_iters', 100); values follow YAML scalar typing."""
    if '=' not in line:
        raise ArgumentError(f"Expected key=value, got '{line}'")
    key, raw = line.split('=', 1)
    raw = raw.strip()
    try:
        value = yaml.safe_load(raw) if raw else None
    except yaml.YAMLError as e:
        raise ArgumentError(f"Cannot parse value of '{key.strip()}': {e}") from e
    return key.strip(), value


def parse_key_value_text(text: str) -> Dict[str, Any]:
    """Line-based key=value config with dotted section keys; '#' starts a comment line."""
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        try:
            key, value = parse_assignment(stripped)
        except ArgumentError as e:
            raise ArgumentError(f"line {number}: {e}") from e
        _set_dotted(values, key, value)
    return values


def apply_overrides(values: Dict[str, Any], assignments: Sequence[str]) -> Dict[str, Any]:
    for assignment in assignments:
        key, value = parse_assignment(assignment)
        _set_dotted(values, key, value)
    return values


def load_config_dict(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Config file {path} not found")
    text = path.read_text()
    try:
        if path.suffix in ('.yaml', '.yml'):
            values = yaml.safe_load(text) or {}
        elif path.suffix == '.json':
            values = json.loads(text)
        else:
            values = parse_key_value_text(text)
    except (yaml.YAMLError, json.JSONDecodeError, ArgumentError) as e:
        raise ConfigFormatError(f"Cannot parse {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigFormatError(f"{path} does not hold a mapping")
    return values


def load_experiment_config(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = (),
                           **explicit) -> ExperimentConfig:
    """
    Build a config from a file (yaml, json or key=value), dotted overrides and
    explicit values such as seed or output_dir (None values are ignored).
    """
    values = load_config_dict(path) if path else {}
    apply_overrides(values, overrides)
    values.update({k: v for k, v in explicit.items() if v is not None})
    if values.get('ratio') is None and values.get('m') is None:
        values['ratio'] = 0.05
    return ExperimentConfig.from_dict(values)


# ========================================
# RUNNER
# ========================================

class ExperimentRunner:
    """Holds the derived state (seeds, data, operator) shared by the stages of one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.root = RngState(cfg.seed)
        self.seeds = {'master': self.root.seed,
                      **{name: self.root.child(stream).seed for name, stream in STREAMS.items()}}
        self._train: Optional[np.ndarray] = None
        self._test: Optional[np.ndarray] = None
        self._shape: Optional[Tuple[int, int]] = None
        self._manifold: Optional[SyntheticManifold] = None
        self._operator: Optional[MeasurementOperator] = None

    # ----- data -----

    def _image_shape(self, n: int) -> Tuple[int, int]:
        shape = self.cfg.dataset.get('image_shape')
        if shape:
            rows, cols = (int(v) for v in shape)
            if rows * cols != n:
                raise ArgumentError(f"image_shape {shape} does not hold {n} pixels")
            return rows, cols
        side = math.isqrt(n)
        return (side, side) if side * side == n else (1, n)

    def manifold(self) -> SyntheticManifold:
        if self._manifold is None:
            ds = self.cfg.dataset
            self._manifold = make_synthetic_manifold(int(ds.get('n', 16)), int(ds.get('k', 4)),
                                                     self.root.child(STREAMS['dataset']),
                                                     float(ds.get('offset_scale', 1.0)))
        return self._manifold

    def _load_split(self, split: str) -> ImageDataset:
        ds = self.cfg.dataset
        path = ds.get(f'{split}_path')
        if path is None:
            path = Path(ds.get('data_dir') or default_data_dir()) / MNIST_FILES[f'{split}_images']
        path = Path(path)
        if not path.exists():
            raise DependencyError(f"Dataset file {path} not found (run fetch-mnist or set dataset.{split}_path)")
        limit = ds.get(f'{split}_limit')
        return load_images(path, split, None if limit is None else int(limit))

    def _ensure_data(self) -> None:
        if self._train is not None:
            return
        ds = self.cfg.dataset
        if ds.get('kind', 'mnist') == 'synthetic':
            manifold = self.manifold()
            data_rng = self.root.child(STREAMS['dataset'])
            self._train = manifold.sample(int(ds.get('train_count', 256)), data_rng.child(1))
            self._test = manifold.sample(self.cfg.test_count, data_rng.child(2))
            self._shape = self._image_shape(manifold.n)
            return
        train = self._load_split('train')
        test = self._load_split('test') if (ds.get('test_path') or ds.get('kind', 'mnist') == 'mnist') else None
        if test is None:
            # held-out images are the tail of the training file
            held = min(self.cfg.test_count, train.count - 1)
            test = train.subset(held, train.count - held)
            train = train.subset(train.count - held)
        self._train = train.images
        self._test = test.images[:self.cfg.test_count]
        self._shape = (train.rows, train.cols)

    @property
    def train_images(self) -> np.ndarray:
        self._ensure_data()
        return self._train

    @property
    def test_images(self) -> np.ndarray:
        self._ensure_data()
        return self._test

    @property
    def image_shape(self) -> Tuple[int, int]:
        self._ensure_data()
        return self._shape

    @property
    def operator(self) -> MeasurementOperator:
        if self._operator is None:
            n = self.test_images.shape[1]
            m = self.cfg.resolve_m(n)
            self._operator = make_measurement_operator(m, n, self.root.child(STREAMS['operator']),
                                                       bool(self.cfg.operator.get('orthogonalize', False)))
        return self._operator

    # ----- artifacts -----

    def _path(self, name: str) -> Path:
        return self.out / name

    def _require(self, name: str, stage: str) -> Path:
        path = self._path(name)
        if not path.exists():
            raise DependencyError(f"Stage '{stage}' needs {path}; run the producing stage first")
        return path

    def _conditions(self, images: np.ndarray) -> np.ndarray:
        return measure(self.operator, images)

    def _sample_grid(self, generator: MlpNetwork, name: str) -> Path:
        count = min(64, len(self.train_images))
        rng = self.root.child(STREAMS['training']).child(99)
        z = sample_gaussian(rng, (count, generator.input_dim))
        condition = self._conditions(self.train_images[:count]) if generator.condition_dim else None
        samples = mlp_forward(generator, z, condition)
        return write_pgm_grid(samples, self.cfg.grid_cols, self._path(f"grids/{name}.pgm"), self.image_shape)

    # ----- stages -----

    def train_generator(self, stage: str) -> Dict[str, str]:
        kinds = BEGAN_KINDS if stage == 'train-began' else GAN_KINDS
        if self.cfg.model not in kinds:
            raise ArgumentError(f"Stage '{stage}' trains {list(kinds)}, config model is '{self.cfg.model}'")
        model = create_model(self.cfg.model, self.cfg.architecture)
        params = {'latent_dim': self.cfg.latent_dim, **self.cfg.training}
        noise = NoiseSpec.parse(self.cfg.conditioning_noise) if self.cfg.conditioning_noise else None
        model.train(self.train_images, self.operator, self.root.child(STREAMS['training']), params,
                    noise_spec=noise, checkpoint_dir=self._path("checkpoints"))
        exported = model.export_solution(str(self.out))
        exported['samples'] = str(self._sample_grid(model.networks['generator'], 'samples'))
        return exported

    def train_pinv(self) -> Dict[str, str]:
        G = load_weights(self._require(GENERATOR_FILE, 'train-pinv'))
        D = None
        if self._path(DISCRIMINATOR_FILE).exists():
            D = load_weights(self._path(DISCRIMINATOR_FILE))
        model = create_model('pinv', self.cfg.architecture)
        model.train(G, self.train_images, self.operator, self.root.child(STREAMS['pinv']), self.cfg.pinv,
                    discriminator=D)
        return model.export_solution(str(self.out))

    def smoke_models(self) -> Dict[str, str]:
        """Write the synthetic manifold's exact generator and pseudo-inverse as the trained pair."""
        if not self._is_smoke() or self.cfg.dataset.get('kind') != 'synthetic':
            raise ArgumentError("The smoke stage needs model 'synthetic' on the synthetic dataset")
        manifold = self.manifold()
        self.out.mkdir(parents=True, exist_ok=True)
        return {'generator': str(save_weights(self._path(GENERATOR_FILE), manifold.generator_network())),
                'pinv': str(save_weights(self._path(PINV_FILE), manifold.pinv_network()))}

    def _measurements(self, spec: NoiseSpec) -> np.ndarray:
        noise_rng = self.root.child(STREAMS['noise'])
        X = self.test_images
        eta = np.stack([draw_noise(spec, self.operator, x, noise_rng.child(i)) for i, x in enumerate(X)])
        return measure(self.operator, X, eta)

    def reconstruct(self) -> Dict[str, Any]:
        G = load_weights(self._require(GENERATOR_FILE, 'reconstruct'))
        solvers = {}
        for name in self.cfg.solver_names():
            scfg = SolverConfig.from_dict({'seed': self.seeds['reconstruction'], **self.cfg.solver})
            if name == 'pgd':
                solvers[name] = PgdSolver(G, self.operator, scfg)
            else:
                pinv = load_weights(self._require(PINV_FILE, 'reconstruct'))
                solvers[name] = NpgdSolver(G, pinv, self.operator, scfg)

        X = self.test_images
        arrays: Dict[str, np.ndarray] = {'x_true': X}
        speedups: Dict[str, float] = {}
        write_pgm_grid(X, self.cfg.grid_cols, self._path("grids/ground_truth.pgm"), self.image_shape)
        for spec in self.cfg.noise_specs():
            label = spec.label
            Y = self._measurements(spec)
            arrays[f"y__{label}"] = Y
            wall: Dict[str, float] = {}
            for name, solver in solvers.items():
                traces = reconstruct_batch(solver, Y, X, self.seeds['reconstruction'], self.cfg.jobs)
                arrays[f"{name}__{label}__x_hat"] = np.stack([t.x_hat for t in traces])
                arrays[f"{name}__{label}__wall_ms"] = np.asarray([t.total_wall_ms for t in traces])
                wall[name] = float(np.mean(arrays[f"{name}__{label}__wall_ms"]))
                for i, trace in enumerate(traces[:self.cfg.trace_images]):
                    trace.to_csv(self._path(f"traces/{name}_{label}_image{i:04d}.csv"))
                write_pgm_grid(arrays[f"{name}__{label}__x_hat"], self.cfg.grid_cols,
                               self._path(f"grids/{name}_{label}.pgm"), self.image_shape)
                logger.info(f"{name} at {label}: mean {wall[name]:.3f} ms per image")
            if 'pgd' in wall and 'npgd' in wall:
                speedups[label] = speedup_ratio(wall['pgd'], wall['npgd'])

        self.out.mkdir(parents=True, exist_ok=True)
        np.savez(self._path(RECONSTRUCTIONS_FILE), **arrays)
        exported: Dict[str, Any] = {'reconstructions': str(self._path(RECONSTRUCTIONS_FILE))}
        if speedups:
            report = {'protocol': 'mean PGD wall-ms per image / mean NPGD wall-ms per image, same batch',
                      'images': int(X.shape[0]), 'per_snr': speedups,
                      'mean': float(np.mean(list(speedups.values()))), 'claimed_range': CLAIMED_SPEEDUP}
            self._path(SPEEDUP_FILE).write_text(json.dumps(report, indent=2, sort_keys=True))
            exported['speedup'] = str(self._path(SPEEDUP_FILE))
        return exported

    def evaluate(self) -> List[Dict[str, Any]]:
        with np.load(self._require(RECONSTRUCTIONS_FILE, 'evaluate')) as npz:
            archive = {name: npz[name] for name in npz.files}
        X = archive['x_true']
        A = self.operator
        ssim_cfg = SsimConfig(**self.cfg.metrics)
        rows = []
        for spec in self.cfg.noise_specs():
            label = spec.label
            Y = archive[f"y__{label}"]
            for name in self.cfg.solver_names():
                key = f"{name}__{label}"
                if f"{key}__x_hat" not in archive:
                    raise DependencyError(f"No {name} reconstructions at {label} in {RECONSTRUCTIONS_FILE}")
                x_hat = archive[f"{key}__x_hat"]
                wall = float(np.mean(archive[f"{key}__wall_ms"])) if self.cfg.record_wall_time else 0.0
                rows.append({
                    'model': self.cfg.model, 'solver': name, 'm': A.m, 'ratio': A.m / A.n,
                    'snr_db': spec.snr_value, 'mse': mse(x_hat, X), 'residual': residual_error(A, x_hat, Y),
                    'mssim': mssim_batch(x_hat, X, self.image_shape, ssim_cfg),
                    'mean_wall_ms_per_image': wall, 'seed': self.cfg.seed,
                })
        write_results_csv(rows, self._path(RESULTS_FILE))
        return rows

    def certify(self) -> Dict[str, Any]:
        G = load_weights(self._require(GENERATOR_FILE, 'certify'))
        A = self.operator
        rng = self.root.child(STREAMS['certify'])
        pairs = int(self.cfg.certify.get('pairs', 200))
        X = self.test_images
        condition = self._conditions(X[:1])[0] if G.condition_dim else None

        rec = estimate_rec(A, range_pairs(G, pairs, rng.child(1), condition), seed=rng.seed)
        report: Dict[str, Any] = {
            'rec': rec.to_dict(),
            's_rec': estimate_s_rec(A, dataset_pairs(X, pairs, rng.child(2)), seed=rng.seed).to_dict(),
        }

        if self._path(PINV_FILE).exists():
            pinv = load_weights(self._path(PINV_FILE))
            inner = SolverConfig(inner_iters=int(self.cfg.certify.get('inner_iters', 1000)),
                                 inner_lr=float(self.cfg.certify.get('inner_lr', 0.01)))
            exact = self.manifold().exact_project if self._is_smoke() else None
            samples = int(self.cfg.certify.get('samples', min(32, len(X))))
            delta = estimate_projector_delta(G, pinv, X[:samples], inner, condition=condition, exact_projector=exact)
            report['projector'] = delta.to_dict()

            scfg = SolverConfig.from_dict({**self.cfg.solver, 'step': 1.0 / rec.beta})
            y = self._conditions(X[:1])[0]
            trace = NpgdSolver(G, pinv, A, scfg).solve(y, X[0], keep_iterates=True)
            iterate_rec = estimate_rec(A, all_pairs([X[0], *trace.iterates]))
            if iterate_rec.ratio < 2:
                check = check_npgd_bound(trace, iterate_rec, max(delta.delta, 0.0))
                report['npgd_bound'] = {'applicable': True, 'holds': check['holds'],
                                        'violations': check['violations'], 'rec': iterate_rec.to_dict()}
            else:
                report['npgd_bound'] = {'applicable': False, 'rec': iterate_rec.to_dict()}

        self.out.mkdir(parents=True, exist_ok=True)
        self._path(CERTIFY_FILE).write_text(json.dumps(report, indent=2, sort_keys=True, default=str))
        logger.info(f"Certification written to {self._path(CERTIFY_FILE)}")
        return report

    def _is_smoke(self) -> bool:
        return self.cfg.model == SYNTHETIC_MODEL

    def run_stage(self, stage: str) -> Any:
        logger.info(f"Stage '{stage}' started")
        if stage in ('train-gan', 'train-began'):
            return self.train_generator(stage)
        if stage == 'train-pinv':
            return self.train_pinv()
        if stage == 'smoke':
            return self.smoke_models()
        if stage == 'reconstruct':
            return self.reconstruct()
        if stage == 'evaluate':
            return self.evaluate()
        if stage == 'certify':
            return self.certify()
        raise ArgumentError(f"Unknown stage '{stage}'")


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """
    Execute the configured stages in pipeline order and write the manifest.

    Raises:
        DependencyError: a stage's inputs are missing
    """
    requested = cfg.stages or cfg.default_stages()
    stages = [s for s in STAGE_ORDER if s in requested]
    runner = ExperimentRunner(cfg)
    runner.out.mkdir(parents=True, exist_ok=True)

    manifest_path = runner.out / MANIFEST_NAME
    manifest = RunManifest.load(manifest_path) if manifest_path.exists() else RunManifest(config={})
    manifest.config = cfg.to_dict()
    manifest.seeds = runner.seeds

    for stage in stages:
        start = time.perf_counter()
        runner.run_stage(stage)
        elapsed = (time.perf_counter() - start) * 1000.0
        manifest.record_stage(stage, elapsed)
        logger.info(f"Stage '{stage}' finished in {elapsed / 1000.0:.2f} s")

    manifest.operator = runner.operator.describe()
    manifest.hash_outputs(runner.out)
    manifest.save(runner.out)
    return manifest


def rerun_from_manifest(path: Union[str, Path], stages: Sequence[str] = ('evaluate',)) -> RunManifest:
    """
    Re-run stages with the configuration snapshot of an earlier run, after
    checking that its recorded artifacts are unchanged.
    """
    manifest = RunManifest.load(path)
    out = Path(path) if Path(path).is_dir() else Path(path).parent
    status = manifest.verify(out)
    if status['missing'] or status['changed']:
        raise DependencyError(f"Artifacts differ from the manifest: missing {status['missing']}, "
                              f"changed {status['changed']}")
    values = dict(manifest.config)
    values.update(output_dir=str(out), stages=list(stages))
    return run_experiment(ExperimentConfig.from_dict(values))
