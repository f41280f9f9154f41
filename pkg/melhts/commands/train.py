# melhts/commands/train.py

from functools import partial
from typing import List

from melhts.commands.common import (
    check_transcripts,
    finish_batch,
    jobs_of,
    load_configured_lexicon,
    load_corpus,
    model_path,
    output_dir,
)
from melhts.config import PipelineConfig, logger
from melhts.exceptions import InsufficientDataError
from melhts.hmm.training import TrainingLogEntry
from melhts.pipeline import PreparedUtterance, prepare_utterance, train_model
from melhts.storage import save_model, write_csv
from melhts.workers import WorkFailure, run_pool


def run(args, config: PipelineConfig) -> int:
    manifest = load_corpus(config)
    lexicon = load_configured_lexicon(config)
    check_transcripts(manifest.entries, lexicon)

    mel_dir = output_dir(config, "mel")
    worker = partial(prepare_utterance, lexicon=lexicon, config=config, mel_dir=mel_dir)
    results = run_pool(worker, jobs_of(manifest.entries), config.runtime.workers, desc="prepare")
    prepared: List[PreparedUtterance] = [r for r in results if not isinstance(r, WorkFailure)]
    if not prepared:
        raise InsufficientDataError("no utterance could be prepared for training")

    log: List[TrainingLogEntry] = []
    model = train_model(prepared, lexicon, config, log=log)

    path = model_path(config)
    nbytes = save_model(model, path)
    log_path = output_dir(config) / "train_log.csv"
    write_csv(log_path, ("stage", "iteration", "log_likelihood"),
              ((e.stage, e.iteration, repr(e.log_likelihood)) for e in log))
    logger.info(f"event=train_done model={path} model_bytes={nbytes} tied_states={model.num_leaves} "
                f"utterances={len(prepared)}")
    print(f"model_bytes={nbytes}")
    return finish_batch(results, "train_batch_done")


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train the clustered HMM acoustic model on the manifest.")
    parser.set_defaults(func=run)
