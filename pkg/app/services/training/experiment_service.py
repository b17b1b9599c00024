"""Run orchestration: load or synthesize data, add noise, train seeds, sweep rates."""
from typing import Callable, Iterable, Optional, Union

from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict

from app.core.config import N_JOBS
from app.core.errors import InvalidInputError
from app.core.logging import logger
from app.schemas.experiment import (
    DataFile,
    ExperimentConfig,
    MetricsRecord,
    TrainingMode,
)
from app.schemas.features import FeatureMatrix, LabeledDataset
from app.services.noise_service import apply_noise, few_shot_sample
from app.services.storage import file_digest, load_features, load_matrix
from app.services.training.synthetic_service import SyntheticSource
from app.services.training.trainer_service import run_experiment

DataBundle = tuple[LabeledDataset, FeatureMatrix, Optional[LabeledDataset]]
DataFactory = Callable[[int], DataBundle]


class FileSource(BaseModel):
    """Embedding files on disk; the same data is returned for every seed."""
    model_config = ConfigDict(frozen=True)

    train: str
    prototypes: str
    test: Optional[str] = None

    def build(self, seed: Optional[int] = None) -> DataBundle:
        dataset = load_features(self.train)
        _, prototypes = load_matrix(self.prototypes)
        test = load_features(self.test) if self.test else None
        return dataset, prototypes, test

    def __call__(self, seed: int) -> DataBundle:
        return self.build(seed)

    def data_files(self) -> dict[str, DataFile]:
        roles = {"train": self.train, "prototypes": self.prototypes, "test": self.test}
        return {role: DataFile(path=path, digest=file_digest(path))
                for role, path in roles.items() if path}


DataSource = Union[FileSource, SyntheticSource]


def prepare_training_data(dataset: LabeledDataset, config: ExperimentConfig,
                          seed: int) -> LabeledDataset:
    """Noise injection then few-shot sampling, each on a seed-specific stream.

    With several seeds the noise seed is offset by the run seed so every run sees
    its own corruption.
    """
    if config.noise_rate > 0:
        spec = config.noise.model_copy(update={"seed": config.noise_seed + seed})
        dataset = apply_noise(dataset, spec)
    if config.shots is not None:
        dataset = few_shot_sample(dataset, config.shots, seed)
    return dataset


def _run_one(config: ExperimentConfig, data_factory: DataFactory,
             seed: int) -> list[MetricsRecord]:
    train, prototypes, test = data_factory(seed)
    train = prepare_training_data(train, config, seed)
    return run_experiment(train, prototypes, config, seed, test)


def execute(config: ExperimentConfig, source: DataFactory,
            n_jobs: int = N_JOBS) -> list[MetricsRecord]:
    """Train ``config.mode`` once per configured seed; records return in seed order."""
    seeds = sorted(set(config.seeds))
    batches = Parallel(n_jobs=n_jobs)(
        delayed(_run_one)(config, source, seed) for seed in seeds
    )
    return [record for batch in batches for record in batch]


def run_sweep(base_config: ExperimentConfig, noise_rates: Iterable[float],
              seeds: Iterable[int], modes: Iterable[TrainingMode],
              data_factory: DataFactory, n_jobs: int = N_JOBS) -> list[MetricsRecord]:
    """Every (noise rate, seed, mode) cell trained independently.

    Jobs may finish in any order; the merged records are sorted by noise rate,
    then seed, then the position of the mode in ``modes``.
    """
    noise_rates = sorted(set(float(rate) for rate in noise_rates))
    seeds = sorted(set(int(seed) for seed in seeds))
    modes = [TrainingMode(mode) for mode in dict.fromkeys(modes)]
    if not (noise_rates and seeds and modes):
        raise InvalidInputError("a sweep needs at least one noise rate, seed and mode")

    cells = [(rate, seed, mode)
             for rate in noise_rates for seed in seeds for mode in modes]
    logger.info(f"Sweeping {len(cells)} runs over noise rates {noise_rates}")
    batches = Parallel(n_jobs=n_jobs)(
        delayed(_run_one)(
            base_config.model_copy(update={"mode": mode, "noise_rate": rate}),
            data_factory, seed,
        )
        for rate, seed, mode in cells
    )
    order = {mode: index for index, mode in enumerate(modes)}
    records = [record for batch in batches for record in batch]
    return sorted(records, key=lambda r: (r.noise_rate, r.seed, order[r.mode], r.epoch))


def source_from_manifest(data_files: dict[str, DataFile],
                         synthetic: Optional[dict]) -> DataSource:
    if synthetic is not None:
        return SyntheticSource.model_validate(synthetic)
    if "train" not in data_files or "prototypes" not in data_files:
        raise InvalidInputError(
            "manifest names neither synthetic parameters nor data files"
        )
    test = data_files.get("test")
    return FileSource(train=data_files["train"].path,
                      prototypes=data_files["prototypes"].path,
                      test=test.path if test else None)
