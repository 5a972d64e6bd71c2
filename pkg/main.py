"""
qoverlap command line: image comparison, ranking, noise and size studies,
associative-memory classification and the NV fidelity curve.

    python main.py compare target.pgm ref.pgm --blocks 2x2 --runs 100 --out report.csv
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click

from config import Config, configure_logging
from errors import ExactModeError, MalformedInputError, QOverlapError, exit_code_for
from imaging import Image, binarize, encode_qpie, idx_image_count, load_idx_labels, load_image, pad_to_pow2, write_pgm
from memory import build_reference_bank, classify
from noise import NoiseModel
from nv_model import BETA_MINUS, BETA_PLUS, canonical_beta, fit_linear, read_curve, sweep_nv, theta_grid, write_curve, write_fit
from overlap import Protocol
from pipeline import (
    CSV_HEADER,
    SWEEP_PARAMETERS,
    CompareSettings,
    compare_images,
    noise_sweep,
    qubit_scaling,
    rank_references,
    ranking_table,
    scan_regions,
    study_table,
    sweep_block_sizes,
    sweep_values,
)
from reports import atomic_write_bytes, csv_text, json_text
from shapes import gallery, three_qubit_patterns, two_qubit_patterns

logger = logging.getLogger('qoverlap')


class QOverlapGroup(click.Group):
    """Turns domain errors into `error: ...` on stderr and the documented exit status."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ValueError, OSError) as exc:
            logger.debug('Command failed', exc_info=True)
            click.echo(f'error: {exc}', err=True)
            ctx.exit(exit_code_for(exc))


# -- option groups ---------------------------------------------------------

def image_options(fn):
    fn = click.option('--invert', is_flag=True, help='Map v -> maxval - v on load (dark pixels become 1).')(fn)
    fn = click.option('--pad', is_flag=True, help='Zero-pad bottom/right to power-of-two dimensions.')(fn)
    fn = click.option('--binarize', 'threshold', type=float, default=None, help='Pixels >= T become 1, others 0.')(fn)
    return fn


def run_options(fn):
    fn = click.option('--workers', type=int, default=None, help='Parallel workers (capped by QOVERLAP_THREADS).')(fn)
    fn = click.option('--noise', 'noise_path', type=click.Path(dir_okay=False), default=None,
                      help='JSON noise model (p_1q, p_2q, p_3q, readout_r, seed).')(fn)
    fn = click.option('--exact', is_flag=True, help='Exact probabilities, no sampling and no noise.')(fn)
    fn = click.option('--seed', type=int, default=Config.SEED, show_default=True)(fn)
    fn = click.option('--runs', type=int, default=Config.RUNS, show_default=True)(fn)
    fn = click.option('--shots', type=int, default=Config.SHOTS, show_default=True)(fn)
    fn = click.option('--protocol', type=click.Choice([p.value for p in Protocol]),
                      default=Protocol.DESTRUCTIVE.value, show_default=True)(fn)
    return fn


def output_options(fn):
    fn = click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv', show_default=True)(fn)
    fn = click.option('--out', type=click.Path(dir_okay=False), default=None, help='Output file (stdout if omitted).')(fn)
    return fn


# -- parsing helpers -------------------------------------------------------

def parse_dims(text: str) -> Tuple[int, int]:
    """'RxC' -> (R, C)."""
    try:
        rows, cols = (int(part) for part in text.lower().split('x'))
    except ValueError:
        raise MalformedInputError(f'block dimensions must look like RxC, got {text!r}') from None
    if rows < 1 or cols < 1:
        raise MalformedInputError(f'block dimensions must be positive, got {text!r}')
    return rows, cols


def parse_index_list(text: str) -> List[int]:
    """'0..9' (inclusive) or '0,3,5'."""
    try:
        if '..' in text:
            start, stop = (int(part) for part in text.split('..'))
            values = list(range(start, stop + 1))
        else:
            values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise MalformedInputError(f'cannot parse index list {text!r}') from None
    if not values or min(values) < 0:
        raise MalformedInputError(f'index list {text!r} is empty or negative')
    return values


def parse_beta(text: str) -> float:
    named = {'pi/2': BETA_PLUS, '3pi/2': BETA_MINUS}
    if text.replace(' ', '').lower() in named:
        return named[text.replace(' ', '').lower()]
    try:
        return canonical_beta(float(text))
    except ValueError as exc:
        raise QOverlapError(f'beta must be pi/2 or 3pi/2, got {text}') from exc


def build_settings(protocol: str, shots: int, runs: int, seed: int, exact: bool,
                   noise_path: Optional[str], workers: Optional[int],
                   blocks: Optional[str] = None) -> CompareSettings:
    if exact and noise_path:
        raise ExactModeError('--exact cannot be combined with --noise')
    noise = NoiseModel.from_file(noise_path) if noise_path else None
    return CompareSettings(
        protocol=Protocol(protocol),
        shots=0 if exact else shots,
        runs=runs,
        seed=seed,
        noise=noise,
        block_dims=parse_dims(blocks) if blocks else None,
        workers=workers,
    )


def prepare(img: Image, threshold: Optional[float], pad: bool) -> Image:
    if threshold is not None:
        img = binarize(img, threshold)
    if pad:
        img = pad_to_pow2(img)
    return img


def read_image(path: str, threshold: Optional[float], pad: bool, invert: bool, index: int = 0) -> Image:
    return prepare(load_image(path, index=index, invert=invert), threshold, pad)


def emit(header: Sequence[str], rows, payload, out: Optional[str], fmt: str) -> None:
    text = csv_text(header, rows) if fmt == 'csv' else json_text(payload)
    if out:
        atomic_write_bytes(out, text.encode('utf-8'))
    else:
        click.echo(text, nl=False)


# -- commands --------------------------------------------------------------

@click.group(cls=QOverlapGroup)
@click.option('--log-level', default=None, help='Overrides QOVERLAP_LOG_LEVEL.')
def cli(log_level):
    """Quantum pattern matching by overlap estimation on a statevector simulator."""
    configure_logging(log_level)


@cli.command()
@click.argument('target', type=click.Path(dir_okay=False))
@click.argument('reference', type=click.Path(dir_okay=False))
@click.option('--blocks', default=None, help='Segment into RxC blocks and report the average overlap.')
@run_options
@image_options
@output_options
def compare(target, reference, blocks, protocol, shots, runs, seed, exact, noise_path, workers,
            threshold, pad, invert, out, fmt):
    """Overlap of two images, whole or block by block."""
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers, blocks)
    report = compare_images(read_image(target, threshold, pad, invert),
                            read_image(reference, threshold, pad, invert), settings)
    emit(CSV_HEADER, report.csv_rows(), report.model_dump(mode='json'), out, fmt)
    if out:
        click.echo(f'score={report.score:.6f} std={report.i_std:.6f}')


@cli.command()
@click.argument('target', type=click.Path(dir_okay=False))
@click.argument('references', nargs=-1, type=click.Path(dir_okay=False))
@click.option('--target-index', type=int, default=0, show_default=True, help='Image index when TARGET is an IDX file.')
@click.option('--mnist-idx', type=click.Path(dir_okay=False), default=None,
              help='IDX image file supplying extra references.')
@click.option('--indices', default=None, help="IDX references, '0..9' or '0,3,5' (default: all).")
@click.option('--mnist-labels', type=click.Path(dir_okay=False), default=None,
              help='IDX label file naming the IDX references.')
@click.option('--blocks', default=None)
@run_options
@image_options
@output_options
def rank(target, references, target_index, mnist_idx, indices, mnist_labels, blocks, protocol, shots, runs,
         seed, exact, noise_path, workers, threshold, pad, invert, out, fmt):
    """Rank references by score against the target."""
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers, blocks)
    target_image = read_image(target, threshold, pad, invert, index=target_index)
    names, labels, images = [], [], []
    for path in references:
        names.append(path)
        labels.append(None)
        images.append(read_image(path, threshold, pad, invert))
    if mnist_idx:
        chosen = parse_index_list(indices) if indices else list(range(idx_image_count(mnist_idx)))
        digit = load_idx_labels(mnist_labels) if mnist_labels else None
        for i in chosen:
            if digit is not None and i >= len(digit):
                raise MalformedInputError(f'label file has {len(digit)} labels, index {i} requested')
            names.append(f'{mnist_idx}#{i}')
            labels.append(int(digit[i]) if digit is not None else None)
            images.append(read_image(mnist_idx, threshold, pad, invert, index=i))
    ranked = rank_references(target_image, images, settings)
    header, rows = ranking_table(ranked, names, labels)
    emit(header, rows, [dict(zip(header, row)) for row in rows], out, fmt)


@cli.command('noise-sweep')
@click.argument('target', type=click.Path(dir_okay=False))
@click.argument('reference', type=click.Path(dir_okay=False))
@click.option('--parameter', type=click.Choice(SWEEP_PARAMETERS), default='all', show_default=True)
@click.option('--start', type=float, default=0.05, show_default=True)
@click.option('--stop', type=float, default=1.05, show_default=True)
@click.option('--step', type=float, default=0.1, show_default=True)
@click.option('--blocks', default=None)
@run_options
@image_options
@output_options
def noise_sweep_cmd(target, reference, parameter, start, stop, step, blocks, protocol, shots, runs, seed,
                    exact, noise_path, workers, threshold, pad, invert, out, fmt):
    """Mean overlap while one noise parameter (or every gate class) is swept."""
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers, blocks)
    values = sweep_values(start, stop, step)
    rows = noise_sweep(read_image(target, threshold, pad, invert), read_image(reference, threshold, pad, invert),
                       parameter, values, settings)
    header, body = study_table(rows, parameter)
    emit(header, body, [r.model_dump() for r in rows], out, fmt)


@cli.command('classify')
@click.argument('target', type=click.Path(dir_okay=False))
@click.argument('references', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option('--labels', default=None, help="Comma-separated bit labels, one per reference (default: binary index).")
@click.option('--shots', type=int, default=Config.SHOTS, show_default=True)
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--exact', is_flag=True)
@click.option('--noise', 'noise_path', type=click.Path(dir_okay=False), default=None)
@image_options
@output_options
def classify_cmd(target, references, labels, shots, seed, exact, noise_path, threshold, pad, invert, out, fmt):
    """Associative-memory classification of TARGET against every reference at once."""
    if exact and noise_path:
        raise ExactModeError('--exact cannot be combined with --noise')
    noise = NoiseModel.from_file(noise_path) if noise_path else None
    psi = encode_qpie(read_image(target, threshold, pad, invert)).state
    states = [encode_qpie(read_image(path, threshold, pad, invert)).state for path in references]
    bank = build_reference_bank(states, labels.split(',') if labels else None)
    result = classify(psi, bank, shots=0 if exact else shots, noise=noise, seed=seed)
    header = ['outcome', 'label', 'aux', 'probability', 'count']
    emit(header, result.histogram_rows(), result.model_dump(), out, fmt)
    click.echo(f'winner label={result.winner} p={result.per_label_success[result.winner]:.6f}',
               err=not out)


@cli.command()
@click.option('--beta', 'beta_text', default='pi/2', show_default=True, help="pi/2 or 3pi/2 (names or radians).")
@click.option('--points', type=int, default=100, show_default=True)
@click.option('--shots', type=int, default=Config.SHOTS, show_default=True)
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--exact', is_flag=True)
@click.option('--noise', 'noise_path', type=click.Path(dir_okay=False), default=None)
@click.option('--workers', type=int, default=None)
@click.option('--fit-out', type=click.Path(dir_okay=False), default=None, help='JSON file for the linear fit.')
@output_options
def nv(beta_text, points, shots, seed, exact, noise_path, workers, fit_out, out, fmt):
    """Simulated NV rotation curve (theta, F, F_th) and its fit F = a + b F_th."""
    beta = parse_beta(beta_text)
    if exact and noise_path:
        raise ExactModeError('--exact cannot be combined with --noise')
    noise = NoiseModel.from_file(noise_path) if noise_path else None
    curve = sweep_nv(theta_grid(points), beta, shots=0 if exact else shots, noise=noise, seed=seed, workers=workers)
    fit = fit_linear(curve)
    if fmt == 'csv' and out:
        write_curve(curve, out)
    else:
        emit(['theta', 'beta', 'f', 'f_th'], curve.rows(), curve.model_dump(), out, fmt)
    if fit_out:
        write_fit(fit, fit_out)
    click.echo(f'a={fit.a:.6f} b={fit.b:.6f} residual_rms={fit.residual_rms:.3g}', err=not out)


@cli.command('nv-fit')
@click.argument('curve_path', type=click.Path(dir_okay=False))
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def nv_fit(curve_path, out):
    """Fit F = a + b F_th to a measured (theta, beta, f) CSV."""
    fit = fit_linear(read_curve(curve_path))
    if out:
        write_fit(fit, out)
    else:
        click.echo(json_text(fit.model_dump()), nl=False)


@cli.command('block-sweep')
@click.argument('target', type=click.Path(dir_okay=False))
@click.argument('reference', type=click.Path(dir_okay=False))
@click.option('--sizes', default='2x2,4x4,8x8', show_default=True, help='Comma-separated RxC block sizes.')
@run_options
@image_options
@output_options
def block_sweep(target, reference, sizes, protocol, shots, runs, seed, exact, noise_path, workers,
                threshold, pad, invert, out, fmt):
    """Average overlap for each block size."""
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers)
    dims = [parse_dims(part) for part in sizes.split(',') if part.strip()]
    results = sweep_block_sizes(read_image(target, threshold, pad, invert),
                                read_image(reference, threshold, pad, invert), dims, settings)
    header = ['block_rows', 'block_cols', 'n_target_blocks', 'n_reference_blocks', 'i_avg', 'i_std']
    rows = [[r, c, rep.n_target_blocks, rep.n_reference_blocks, rep.i_avg, rep.i_std] for (r, c), rep in results]
    emit(header, rows, [dict(zip(header, row)) for row in rows], out, fmt)


@cli.command()
@click.option('--n-values', default='1..6', show_default=True, help="Qubits per state, '1..6' or '1,2,4'.")
@run_options
@output_options
def scaling(n_values, protocol, shots, runs, seed, exact, noise_path, workers, out, fmt):
    """Overlap of a random state with itself as the register grows."""
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers)
    values = parse_index_list(n_values)
    if min(values) < 1:
        raise MalformedInputError('qubit counts start at 1')
    rows = qubit_scaling(values, settings)
    header, body = study_table(rows, 'n')
    emit(header, body, [r.model_dump() for r in rows], out, fmt)


def window_origins(image: Image, feature: Image, stride: Optional[int]) -> List[Tuple[int, int]]:
    step_r, step_c = (stride, stride) if stride else feature.shape
    return [(r, c)
            for r in range(0, image.rows - feature.rows + 1, step_r)
            for c in range(0, image.cols - feature.cols + 1, step_c)]


@cli.command()
@click.argument('image_path', type=click.Path(dir_okay=False))
@click.argument('feature_path', type=click.Path(dir_okay=False))
@click.option('--stride', type=int, default=None, help='Window step in pixels (default: feature size).')
@click.option('--blocks', default=None)
@run_options
@image_options
@output_options
def locate(image_path, feature_path, stride, blocks, protocol, shots, runs, seed, exact, noise_path, workers,
           threshold, pad, invert, out, fmt):
    """Score every window of IMAGE against FEATURE, best match first."""
    if stride is not None and stride < 1:
        raise MalformedInputError(f'stride must be >= 1, got {stride}')
    settings = build_settings(protocol, shots, runs, seed, exact, noise_path, workers, blocks)
    image = read_image(image_path, threshold, False, invert)
    feature = read_image(feature_path, threshold, pad, invert)
    scores = scan_regions(image, feature, window_origins(image, feature, stride), settings)
    header = ['rank', 'row', 'col', 'score']
    rows = [[place + 1, s.row, s.col, s.score] for place, s in enumerate(scores)]
    emit(header, rows, [dict(zip(header, row)) for row in rows], out, fmt)


PATTERN_SETS = {
    'shapes': gallery,
    'two-qubit': lambda size: two_qubit_patterns(),
    'three-qubit': lambda size: three_qubit_patterns(),
}


@cli.command('gallery')
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--set', 'pattern_set', type=click.Choice(list(PATTERN_SETS)), default='shapes', show_default=True)
@click.option('--size', type=int, default=32, show_default=True)
@click.option('--binary', is_flag=True, help='Write P5 instead of P2.')
def gallery_cmd(out_dir, pattern_set, size, binary):
    """Write the built-in binary patterns as PGM files."""
    if size < 1:
        raise MalformedInputError(f'size must be >= 1, got {size}')
    for name, img in PATTERN_SETS[pattern_set](size).items():
        click.echo(write_pgm(img, Path(out_dir) / f'{name}.pgm', binary=binary))


if __name__ == "__main__":
    cli()
