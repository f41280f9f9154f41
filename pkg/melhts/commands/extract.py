# melhts/commands/extract.py

from functools import partial
from pathlib import Path

from melhts.analysis import export_contour_csv
from melhts.commands.common import finish_batch, jobs_of, load_corpus, output_dir
from melhts.config import PipelineConfig, logger
from melhts.models import ManifestEntry
from melhts.pipeline import extract_utterance
from melhts.storage import export_mel
from melhts.workers import run_pool


def extract_one(entry: ManifestEntry, config: PipelineConfig, mel_dir: Path, contour_dir: Path) -> int:
    """Writes `<id>.mel`, `<id>.ste.csv` and `<id>.sbsf.csv`; returns the mel file size."""
    features = extract_utterance(entry, config)
    nbytes = export_mel(features.mel, mel_dir / f"{entry.utterance_id}.mel")
    ste_offset = config.analysis.ste_frame_length_ms / 2.0
    sbsf_offset = (config.analysis.frame_length_ms - config.analysis.frame_shift_ms) / 2.0
    export_contour_csv(features.ste, contour_dir / f"{entry.utterance_id}.ste.csv", offset_ms=ste_offset)
    export_contour_csv(features.sbsf, contour_dir / f"{entry.utterance_id}.sbsf.csv", offset_ms=sbsf_offset)
    logger.info(f"event=utterance_extracted id={entry.utterance_id} frames={features.mel.num_frames} "
                f"mel_bytes={nbytes}")
    return nbytes


def run(args, config: PipelineConfig) -> int:
    manifest = load_corpus(config, args.ids)
    worker = partial(extract_one, config=config, mel_dir=output_dir(config, "mel"),
                     contour_dir=output_dir(config, "contours"))
    results = run_pool(worker, jobs_of(manifest.entries), config.runtime.workers, desc="extract")
    return finish_batch(results, "extract_done")


def register(subparsers) -> None:
    parser = subparsers.add_parser("extract", help="Mel-spectrogram, STE and SBSF contours per utterance.")
    parser.add_argument("--ids", nargs="*", default=[], help="Restrict to these utterance ids.")
    parser.set_defaults(func=run)
