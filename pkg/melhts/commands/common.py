# melhts/commands/common.py

from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from melhts.config import PipelineConfig, logger
from melhts.exceptions import ConfigError, LexiconError
from melhts.hmm.model import AcousticModel
from melhts.models import CorpusManifest, ManifestEntry
from melhts.storage import load_manifest, load_model
from melhts.textproc import Lexicon, load_lexicon, normalize_word
from melhts.workers import WorkFailure, batch_exit_code, failures_of

OUTPUT_SUBDIRS = ("mel", "contours", "labels", "diagnostics", "synth")


def require_path(config: PipelineConfig, key: str, must_exist: bool = True) -> Path:
    """
    Returns `paths.<key>`.

    Raises:
        ConfigError: If the key is unset or, with `must_exist`, the path is missing.
    """
    value = getattr(config.paths, key)
    if value is None:
        raise ConfigError(f"paths.{key} is not set")
    if must_exist and not Path(value).exists():
        raise ConfigError(f"paths.{key} does not exist: {value}")
    return Path(value)


def output_dir(config: PipelineConfig, name: Optional[str] = None) -> Path:
    root = Path(config.paths.output_dir)
    path = root / name if name else root
    path.mkdir(parents=True, exist_ok=True)
    return path


def model_path(config: PipelineConfig) -> Path:
    return Path(config.paths.model) if config.paths.model is not None else output_dir(config) / "model.bin"


def lut_path(config: PipelineConfig) -> Path:
    return Path(config.paths.heq_lut) if config.paths.heq_lut is not None else output_dir(config) / "heq.lut"


def load_corpus(config: PipelineConfig, ids: Sequence[str] = ()) -> CorpusManifest:
    manifest = load_manifest(require_path(config, "corpus"))
    if ids:
        wanted = set(ids)
        unknown = wanted - {e.utterance_id for e in manifest.entries}
        if unknown:
            raise ConfigError(f"utterance ids not in the manifest: {' '.join(sorted(unknown))}")
        manifest = CorpusManifest(entries=[e for e in manifest.entries if e.utterance_id in wanted])
    logger.info(f"event=manifest_loaded utterances={len(manifest.entries)}")
    return manifest


def load_configured_lexicon(config: PipelineConfig) -> Lexicon:
    return load_lexicon(require_path(config, "lexicon"), require_path(config, "phone_classes"))


def check_transcripts(entries: Iterable[ManifestEntry], lexicon: Lexicon) -> None:
    """
    Raises:
        LexiconError: Naming every out-of-lexicon word and the utterances using it.
    """
    missing = {}
    for entry in entries:
        for word in entry.transcript.split():
            if normalize_word(word) not in lexicon.entries:
                missing.setdefault(normalize_word(word), []).append(entry.utterance_id)
    if missing:
        detail = "; ".join(f"{w} ({', '.join(ids)})" for w, ids in sorted(missing.items()))
        raise LexiconError(f"words not in lexicon: {detail}", words=sorted(missing))


@lru_cache(maxsize=4)
def cached_model(path: str) -> AcousticModel:
    """One decoded model per worker process."""
    return load_model(Path(path))


def jobs_of(entries: Iterable[ManifestEntry]) -> List[tuple]:
    return [(e.utterance_id, e) for e in entries]


def finish_batch(results: Sequence[object], event: str) -> int:
    failed: List[WorkFailure] = failures_of(results)
    code = batch_exit_code(results)
    logger.info(f"event={event} utterances={len(results)} failed={len(failed)} exit_code={code}")
    return code
