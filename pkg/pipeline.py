"""
Experiment layer: full-image and segment-wise comparisons, average overlap,
reference ranking, and the noise / block-size / qubit-count studies.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config, worker_count
from errors import AllZeroImageError, DimensionMismatchError, ExactModeError, QOverlapError, UndefinedScoreError
from imaging import Image, QuantumImage, encode_qpie, segment
from noise import NoiseModel, max_strength, noise_with
from overlap import OverlapResult, Protocol, build_destructive_swap_test, build_swap_test, overlap_between
from state import Statevector, random_state

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

SWEEP_PARAMETERS = ('p_1q', 'p_2q', 'p_3q', 'all', 'readout_r')

CSV_HEADER = (
    'kind', 'row', 'col', 'skipped', 'skip_reason', 'overlap_mean', 'overlap_std',
    'p_success', 'fidelity', 'raw_fidelity', 'i_avg', 'i_mean', 'i_std', 'runs',
)


class CompareSettings(BaseModel):
    """How a comparison is executed. ``shots = 0`` is exact mode."""

    model_config = ConfigDict(frozen=True)

    protocol: Protocol = Protocol.DESTRUCTIVE
    shots: int = Field(default_factory=lambda: Config.SHOTS, ge=0)
    runs: int = Field(default_factory=lambda: Config.RUNS, ge=1)
    seed: int = Field(default_factory=lambda: Config.SEED, ge=0)
    noise: Optional[NoiseModel] = None
    block_dims: Optional[Tuple[int, int]] = None
    workers: Optional[int] = None

    @model_validator(mode='after')
    def _exact_without_noise(self):
        if self.shots == 0 and self.noise is not None:
            raise ValueError('exact mode (shots = 0) cannot be combined with a noise model')
        return self

    @property
    def exact(self) -> bool:
        return self.shots == 0


class SegmentRecord(BaseModel):
    row: int
    col: int
    skipped: bool = False
    skip_reason: Optional[str] = None
    result: Optional[OverlapResult] = None
    overlap_mean: float = 0.0
    overlap_std: float = 0.0


class ComparisonReport(BaseModel):
    mode: Literal['full', 'segmented']
    protocol: Protocol
    shots: int
    block_dims: Optional[Tuple[int, int]] = None
    per_segment: List[SegmentRecord] = []
    n_target_blocks: Optional[int] = None
    n_reference_blocks: Optional[int] = None
    i_avg: Optional[float] = None
    i_mean: float
    i_std: float = Field(ge=0.0)
    runs: int = Field(ge=1)
    run_scores: List[float] = []

    @property
    def score(self) -> float:
        return self.i_avg if self.mode == 'segmented' else self.i_mean

    @property
    def skipped_pairs(self) -> int:
        """Pairs with exactly one blank side; they count in max{N1, N2} but contribute nothing."""
        return sum(1 for s in self.per_segment if s.skip_reason in ('target-blank', 'reference-blank'))

    def csv_rows(self) -> List[list]:
        rows = []
        for s in self.per_segment:
            r = s.result
            rows.append([
                'segment', s.row, s.col, s.skipped, s.skip_reason, s.overlap_mean, s.overlap_std,
                r.p_success if r else None, r.fidelity if r else None, r.raw_fidelity if r else None,
                None, None, None, None,
            ])
        rows.append([
            'summary', None, None, None, None, None, None, None, None, None,
            self.i_avg, self.i_mean, self.i_std, self.runs,
        ])
        return rows


def unit_seed(base: int, *indices: int) -> int:
    """Independent, scheduling-free seed for one work unit."""
    return int(np.random.SeedSequence([base, *indices]).generate_state(1)[0])


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    count = worker_count(workers)
    if count == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(count, len(items))) as pool:
        return list(pool.map(fn, items))


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=float)
    return float(array.mean()), float(array.std())


def _repeat(settings: CompareSettings, evaluate: Callable[[int], OverlapResult]) -> List[OverlapResult]:
    if settings.exact:
        # exact mode is deterministic, one evaluation stands for every run
        return [evaluate(0)] * settings.runs
    return parallel_map(evaluate, list(range(settings.runs)), settings.workers)


def compare_full(target: QuantumImage, reference: QuantumImage,
                 settings: Optional[CompareSettings] = None) -> ComparisonReport:
    settings = settings or CompareSettings()
    if target.source.shape != reference.source.shape:
        raise DimensionMismatchError(f'image shapes differ: {target.source.shape} vs {reference.source.shape}')
    logger.info('Full %s comparison of %dx%d images (%d qubits, %s shots, %d runs)',
                settings.protocol.value, target.source.rows, target.source.cols, target.n_qubits,
                settings.shots or 'exact', settings.runs)
    return compare_states(target.state, reference.state, settings)


def compare_states(psi: Statevector, phi: Statevector,
                   settings: Optional[CompareSettings] = None) -> ComparisonReport:
    """Repeated protocol runs on two loaded states; the core of full-image mode."""
    settings = settings or CompareSettings()

    def evaluate(run: int) -> OverlapResult:
        return overlap_between(psi, phi, settings.protocol, settings.shots,
                               settings.noise, unit_seed(settings.seed, run))

    results = _repeat(settings, evaluate)
    scores = [r.overlap for r in results]
    mean, std = _mean_std(scores)
    record = SegmentRecord(row=0, col=0, result=results[0], overlap_mean=mean, overlap_std=std)
    return ComparisonReport(mode='full', protocol=settings.protocol, shots=settings.shots,
                            per_segment=[record], i_mean=mean, i_std=std, runs=settings.runs,
                            run_scores=scores)


def compare_images(target: Image, reference: Image, settings: Optional[CompareSettings] = None) -> ComparisonReport:
    """Full mode when ``settings.block_dims`` is unset, segmented otherwise."""
    settings = settings or CompareSettings()
    if settings.block_dims is None:
        return compare_full(encode_qpie(target), encode_qpie(reference), settings)
    return compare_segmented(target, reference, settings)


def count_nonzero_blocks(img: Image, block_dims: Tuple[int, int]) -> int:
    return sum(1 for block in segment(img, *block_dims) if not block.image.is_blank)


def _skip_reason(target_blank: bool, reference_blank: bool) -> Optional[str]:
    if target_blank and reference_blank:
        return 'both-blank'
    if target_blank:
        return 'target-blank'
    if reference_blank:
        return 'reference-blank'
    return None


def compare_segmented(target: Image, reference: Image,
                      settings: Optional[CompareSettings] = None) -> ComparisonReport:
    """Average overlap: sum of overlaps of jointly nonzero blocks divided by max{N1, N2}."""
    settings = settings or CompareSettings()
    if settings.block_dims is None:
        raise QOverlapError('segmented comparison needs block_dims')
    if target.shape != reference.shape:
        raise DimensionMismatchError(f'image shapes differ: {target.shape} vs {reference.shape}')
    target_blocks = segment(target, *settings.block_dims)
    reference_blocks = segment(reference, *settings.block_dims)
    n_target = sum(1 for b in target_blocks if not b.image.is_blank)
    n_reference = sum(1 for b in reference_blocks if not b.image.is_blank)
    denominator = max(n_target, n_reference)
    if denominator == 0:
        raise UndefinedScoreError('average overlap is undefined: both images are blank')

    reasons = [_skip_reason(t.image.is_blank, r.image.is_blank) for t, r in zip(target_blocks, reference_blocks)]
    active = [i for i, reason in enumerate(reasons) if reason is None]
    encoded = {i: (encode_qpie(target_blocks[i].image).state, encode_qpie(reference_blocks[i].image).state)
               for i in active}
    mismatched = sum(1 for reason in reasons if reason in ('target-blank', 'reference-blank'))
    if mismatched:
        logger.warning('%d block pair(s) with one blank side are excluded from the sum', mismatched)
    logger.info('Segmented %s comparison: %d blocks of %dx%d, N1=%d, N2=%d, %d active pairs, %s shots, %d runs',
                settings.protocol.value, len(target_blocks), *settings.block_dims, n_target, n_reference,
                len(active), settings.shots or 'exact', settings.runs)

    run_count = 1 if settings.exact else settings.runs
    units = [(run, i) for run in range(run_count) for i in active]

    def evaluate(unit: Tuple[int, int]) -> OverlapResult:
        run, i = unit
        psi, phi = encoded[i]
        return overlap_between(psi, phi, settings.protocol, settings.shots, settings.noise,
                               unit_seed(settings.seed, run, i))

    results = dict(zip(units, parallel_map(evaluate, units, settings.workers)))
    run_scores = [sum(results[(run, i)].overlap for i in active) / denominator for run in range(run_count)]
    if settings.exact:
        run_scores = run_scores * settings.runs

    records = []
    for i, (block, reason) in enumerate(zip(target_blocks, reasons)):
        if reason is not None:
            records.append(SegmentRecord(row=block.row, col=block.col, skipped=True, skip_reason=reason))
            continue
        mean, std = _mean_std([results[(run, i)].overlap for run in range(run_count)])
        records.append(SegmentRecord(row=block.row, col=block.col, result=results[(0, i)],
                                     overlap_mean=mean, overlap_std=std))

    mean, std = _mean_std(run_scores)
    return ComparisonReport(mode='segmented', protocol=settings.protocol, shots=settings.shots,
                            block_dims=settings.block_dims, per_segment=records,
                            n_target_blocks=n_target, n_reference_blocks=n_reference,
                            i_avg=mean, i_mean=mean, i_std=std, runs=settings.runs, run_scores=run_scores)


class RankedReference(BaseModel):
    reference_id: Union[int, str]
    score: float
    report: ComparisonReport


def rank_references(target: Image, references: Union[Mapping[str, Image], Sequence[Image]],
                    settings: Optional[CompareSettings] = None) -> List[RankedReference]:
    """Descending score; ties by ascending reference id (list position for sequences)."""
    settings = settings or CompareSettings()
    entries: List[Tuple[Union[int, str], Image]] = (
        list(references.items()) if isinstance(references, Mapping) else list(enumerate(references))
    )
    if not entries:
        raise QOverlapError('reference set is empty')
    for ref_id, image in entries:
        if image.shape != target.shape:
            raise DimensionMismatchError(f'reference {ref_id} is {image.shape}, target is {target.shape}')
    ranked = []
    for ref_id, image in entries:
        report = compare_images(target, image, settings)
        ranked.append(RankedReference(reference_id=ref_id, score=report.score, report=report))
        logger.info('Reference %s scored %.6f', ref_id, report.score)
    return sorted(ranked, key=lambda item: (-item.score, item.reference_id))


def sweep_block_sizes(target: Image, reference: Image, sizes: Iterable[Tuple[int, int]],
                      settings: Optional[CompareSettings] = None) -> List[Tuple[Tuple[int, int], ComparisonReport]]:
    settings = settings or CompareSettings()
    rows = []
    for dims in sizes:
        report = compare_segmented(target, reference, settings.model_copy(update={'block_dims': tuple(dims)}))
        rows.append((tuple(dims), report))
    return rows


class RegionScore(BaseModel):
    row: int
    col: int
    score: float
    report: Optional[ComparisonReport] = None


def scan_regions(image: Image, feature: Image, origins: Iterable[Tuple[int, int]],
                 settings: Optional[CompareSettings] = None) -> List[RegionScore]:
    """Compare ``feature`` against same-sized windows of ``image`` at the given pixel origins."""
    settings = settings or CompareSettings()
    height, width = feature.shape
    scores = []
    for row, col in origins:
        if row < 0 or col < 0 or row + height > image.rows or col + width > image.cols:
            raise DimensionMismatchError(f'window at ({row},{col}) of size {height}x{width} leaves the image')
        window = Image(pixels=image.pixels[row:row + height, col:col + width])
        try:
            report = compare_images(window, feature, settings)
        except (AllZeroImageError, UndefinedScoreError):
            logger.warning('Window at (%d,%d) is blank; scored 0', row, col)
            scores.append(RegionScore(row=row, col=col, score=0.0))
            continue
        scores.append(RegionScore(row=row, col=col, score=report.score, report=report))
    return sorted(scores, key=lambda s: (-s.score, s.row, s.col))


class StudyRow(BaseModel):
    """One point of a sweep: the swept value, mean and std of the overlap over runs."""

    value: float
    i_mean: float
    i_std: float
    runs: int
    gate_count: Optional[int] = None


def qubit_scaling(n_values: Iterable[int], settings: Optional[CompareSettings] = None) -> List[StudyRow]:
    """Overlap of a state with itself as the register grows."""
    settings = settings or CompareSettings()
    rows = []
    for n in n_values:
        state = random_state(n, np.random.default_rng([settings.seed, n]))
        report = compare_states(state, state, settings)
        builder = build_swap_test if settings.protocol is Protocol.SWAP else build_destructive_swap_test
        rows.append(StudyRow(value=n, i_mean=report.i_mean, i_std=report.i_std, runs=report.runs,
                             gate_count=builder(n).gate_count))
    return rows


def _swept_noise(base: NoiseModel, parameter: str, value: float) -> NoiseModel:
    if parameter == 'all':
        p_3q = min(value, max_strength(3))
        if p_3q != value:
            logger.warning('p_3q capped at %.6g while sweeping all gates to %.6g', p_3q, value)
        return noise_with(base, p_1q=value, p_2q=value, p_3q=p_3q)
    return noise_with(base, **{parameter: value})


def noise_sweep(target: Image, reference: Image, parameter: str, values: Sequence[float],
                settings: CompareSettings) -> List[StudyRow]:
    """Vary one noise parameter (or all gate classes together) and record the overlap statistics."""
    if parameter not in SWEEP_PARAMETERS:
        raise QOverlapError(f'unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}')
    if not len(values):
        raise QOverlapError('sweep has no values')
    if settings.exact:
        raise ExactModeError('noise sweeps need shots > 0')
    base = settings.noise or NoiseModel(seed=settings.seed)
    rows = []
    for value in values:
        point = settings.model_copy(update={'noise': _swept_noise(base, parameter, float(value))})
        report = compare_images(target, reference, point)
        rows.append(StudyRow(value=float(value), i_mean=report.i_mean, i_std=report.i_std, runs=report.runs))
        logger.info('%s=%.4g -> overlap %.4f +/- %.4f', parameter, value, report.i_mean, report.i_std)
    return rows


def sweep_values(start: float, stop: float, step: float) -> List[float]:
    """Inclusive arithmetic grid; rejects empty or non-advancing sweeps."""
    if step <= 0 or stop < start:
        raise QOverlapError(f'invalid sweep {start}..{stop} step {step}')
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def study_table(rows: Sequence[StudyRow], value_name: str) -> Tuple[List[str], List[list]]:
    header = [value_name, 'i_mean', 'i_std', 'runs']
    with_gates = any(r.gate_count is not None for r in rows)
    if with_gates:
        header.append('gate_count')
    body = []
    for r in rows:
        line = [r.value, r.i_mean, r.i_std, r.runs]
        if with_gates:
            line.append(r.gate_count)
        body.append(line)
    return header, body


def ranking_table(ranked: Sequence[RankedReference], names: Optional[Sequence] = None,
                  labels: Optional[Sequence] = None) -> Tuple[List[str], List[list]]:
    """Rows indexed back into `names` and `labels` by reference id; ids and None when absent."""
    header = ['rank', 'reference', 'label', 'score', 'i_std']
    body = []
    for place, r in enumerate(ranked):
        name = names[r.reference_id] if names is not None else r.reference_id
        label = labels[r.reference_id] if labels is not None else None
        body.append([place + 1, name, label, r.score, r.report.i_std])
    return header, body
