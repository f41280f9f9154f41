# melhts/commands/heq.py

from pathlib import Path
from typing import List, Optional

from melhts.commands.common import (
    check_transcripts,
    load_configured_lexicon,
    load_corpus,
    lut_path,
    model_path,
    output_dir,
)
from melhts.config import PipelineConfig, logger
from melhts.exceptions import ConfigError
from melhts.heq import apply_heq, fit_heq
from melhts.models import MelSpectrogram
from melhts.pipeline import check_model_matches, load_or_extract_mel, synthesize_text
from melhts.storage import export_lut_csv, export_mel, import_mel, load_lut, load_model, save_lut


def _mels_in(directory: Path) -> List[MelSpectrogram]:
    if not directory.is_dir():
        raise ConfigError(f"mel directory does not exist: {directory}")
    return [import_mel(path) for path in sorted(directory.glob("*.mel"))]


def _ground_truth(config: PipelineConfig, target: Optional[str]) -> List[MelSpectrogram]:
    if target:
        return _mels_in(Path(target))
    manifest = load_corpus(config)
    mel_dir = output_dir(config, "mel")
    return [load_or_extract_mel(entry, config, mel_dir) for entry in manifest.entries]


def _generated(config: PipelineConfig, generated: Optional[str]) -> List[MelSpectrogram]:
    if generated:
        return _mels_in(Path(generated))
    # resynthesize the training transcripts
    path = model_path(config)
    if not path.is_file():
        raise ConfigError(f"model file does not exist: {path}")
    model = load_model(path)
    check_model_matches(model, config)
    lexicon = load_configured_lexicon(config)
    manifest = load_corpus(config)
    check_transcripts(manifest.entries, lexicon)
    return [synthesize_text(entry.transcript, lexicon, model, config) for entry in manifest.entries]


def run_fit(args, config: PipelineConfig) -> int:
    source = _generated(config, args.generated)
    target = _ground_truth(config, args.target)
    lut = fit_heq(source, target, config.heq.bins)
    path = lut_path(config)
    nbytes = save_lut(lut, path)
    export_lut_csv(lut, path.with_suffix(".csv"))
    logger.info(f"event=heq_lut_saved path={path} bytes={nbytes} sources={len(source)} targets={len(target)}")
    return 0


def run_apply(args, config: PipelineConfig) -> int:
    path = lut_path(config)
    if not path.is_file():
        raise ConfigError(f"lookup table does not exist: {path}")
    lut = load_lut(path)
    out_dir = Path(args.out_dir) if args.out_dir else output_dir(config, "synth")
    for name in args.mels:
        source = Path(name)
        mapped = apply_heq(import_mel(source), lut)
        target = out_dir / f"{source.stem}.heq.mel"
        export_mel(mapped, target)
        logger.info(f"event=heq_applied input={source} output={target} frames={mapped.num_frames}")
    return 0


def register(subparsers) -> None:
    fit = subparsers.add_parser("heq-fit", help="Fit per-coefficient histogram-equalization lookup tables.")
    fit.add_argument("--generated", help="Directory of generated .mel files (default: resynthesize the corpus).")
    fit.add_argument("--target", help="Directory of ground-truth .mel files (default: the corpus features).")
    fit.set_defaults(func=run_fit)

    apply = subparsers.add_parser("heq-apply", help="Map generated mel files through the lookup tables.")
    apply.add_argument("mels", nargs="+", help="Input .mel files.")
    apply.add_argument("--out-dir", help="Output directory (default <output_dir>/synth).")
    apply.set_defaults(func=run_apply)
