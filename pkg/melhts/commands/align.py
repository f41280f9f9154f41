# melhts/commands/align.py

from functools import partial
from pathlib import Path

from melhts.commands.common import (
    cached_model,
    check_transcripts,
    finish_batch,
    jobs_of,
    load_configured_lexicon,
    load_corpus,
    model_path,
    output_dir,
)
from melhts.config import PipelineConfig, logger
from melhts.exceptions import ConfigError
from melhts.htk import alignment_to_entries, write_label_file
from melhts.models import ManifestEntry
from melhts.pipeline import align_utterance, check_model_matches, load_or_extract_mel
from melhts.segmenter import SegmentationParams
from melhts.textproc import Lexicon, analyze_text
from melhts.workers import run_pool


def align_one(entry: ManifestEntry, config: PipelineConfig, lexicon: Lexicon, model_file: str,
              mel_dir: Path, label_dir: Path) -> float:
    model = cached_model(model_file)
    check_model_matches(model, config)
    mel = load_or_extract_mel(entry, config, mel_dir)
    text = analyze_text(entry.transcript, lexicon, config.text.split_policy)
    alignment = align_utterance(mel, text, model)
    write_label_file(label_dir / f"{entry.utterance_id}.phones.lab",
                     alignment_to_entries(alignment, SegmentationParams.from_config(config)))
    logger.info(f"event=utterance_aligned id={entry.utterance_id} phones={len(alignment.segments)} "
                f"loglik={alignment.log_likelihood:.6f}")
    return alignment.log_likelihood


def run(args, config: PipelineConfig) -> int:
    path = model_path(config)
    if not path.is_file():
        raise ConfigError(f"model file does not exist: {path}")
    manifest = load_corpus(config, args.ids)
    lexicon = load_configured_lexicon(config)
    check_transcripts(manifest.entries, lexicon)
    worker = partial(align_one, config=config, lexicon=lexicon, model_file=str(path),
                     mel_dir=output_dir(config, "mel"), label_dir=output_dir(config, "labels"))
    results = run_pool(worker, jobs_of(manifest.entries), config.runtime.workers, desc="align")
    return finish_batch(results, "align_done")


def register(subparsers) -> None:
    parser = subparsers.add_parser("align", help="Full-context forced alignment to HTK phone labels.")
    parser.add_argument("--ids", nargs="*", default=[], help="Restrict to these utterance ids.")
    parser.set_defaults(func=run)
