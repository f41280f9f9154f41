# melhts/commands/segment.py

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
from melhts.htk import syllable_entries, write_label_file
from melhts.models import ManifestEntry
from melhts.pipeline import check_model_matches, load_or_extract_mel, segment_utterance
from melhts.segmenter import write_diagnostics
from melhts.textproc import Lexicon, analyze_text
from melhts.wavio import load_audio
from melhts.workers import run_pool


def segment_one(entry: ManifestEntry, config: PipelineConfig, lexicon: Lexicon, model_file: str,
                mel_dir: Path, label_dir: Path, diagnostics_dir: Path) -> int:
    """
    Writes `<id>.lab` (corrected syllables), `<id>.hmm.lab` (uncorrected)
    and `<id>.csv` diagnostics. Returns the number of boundaries moved.
    """
    model = cached_model(model_file)
    check_model_matches(model, config)
    audio = load_audio(entry.wav_path, config.analysis.sample_rate_hz)
    mel = load_or_extract_mel(entry, config, mel_dir, audio)
    text = analyze_text(entry.transcript, lexicon, config.text.split_policy)
    _, hmm_bounds, corrected = segment_utterance(audio, mel, text, model, config)

    write_label_file(label_dir / f"{entry.utterance_id}.lab", syllable_entries(corrected, text.syllables))
    write_label_file(label_dir / f"{entry.utterance_id}.hmm.lab", syllable_entries(hmm_bounds, text.syllables))
    write_diagnostics(diagnostics_dir / f"{entry.utterance_id}.csv", hmm_bounds, corrected)
    moved = sum(a.time_ms != b.time_ms for a, b in zip(hmm_bounds.boundaries, corrected.boundaries))
    logger.info(f"event=utterance_segmented id={entry.utterance_id} syllables={len(text.syllables)} moved={moved}")
    return moved


def run(args, config: PipelineConfig) -> int:
    path = model_path(config)
    if not path.is_file():
        raise ConfigError(f"model file does not exist: {path}")
    manifest = load_corpus(config, args.ids)
    lexicon = load_configured_lexicon(config)
    check_transcripts(manifest.entries, lexicon)
    worker = partial(segment_one, config=config, lexicon=lexicon, model_file=str(path),
                     mel_dir=output_dir(config, "mel"), label_dir=output_dir(config, "labels"),
                     diagnostics_dir=output_dir(config, "diagnostics"))
    results = run_pool(worker, jobs_of(manifest.entries), config.runtime.workers, desc="segment")
    return finish_batch(results, "segment_done")


def register(subparsers) -> None:
    parser = subparsers.add_parser("segment", help="Hybrid HMM/group-delay syllable segmentation.")
    parser.add_argument("--ids", nargs="*", default=[], help="Restrict to these utterance ids.")
    parser.set_defaults(func=run)
