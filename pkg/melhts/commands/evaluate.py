# melhts/commands/evaluate.py

from pathlib import Path

from pydantic import ValidationError

from melhts.config import PipelineConfig, logger
from melhts.exceptions import ConfigError, FormatError
from melhts.htk import entries_to_boundaries, read_label_file
from melhts.models import BoundarySet
from melhts.segmenter import boundary_accuracy
from melhts.storage import import_mel
from melhts.vocoder import mel_l1


def _boundaries(path: Path) -> BoundarySet:
    try:
        return entries_to_boundaries(read_label_file(path))
    except ValidationError as e:
        raise FormatError(f"label times are not strictly increasing: {e}", path=str(path)) from e


def run(args, config: PipelineConfig) -> int:
    if not args.mel and not args.labels:
        raise ConfigError("eval needs --mel REF HYP and/or --labels REF HYP")
    if args.mel:
        reference, hypothesis = (Path(p) for p in args.mel)
        distance = mel_l1(import_mel(reference), import_mel(hypothesis))
        logger.info(f"event=eval_mel reference={reference} hypothesis={hypothesis} mel_l1={distance:.6f}")
        print(f"mel_l1={distance:.6f}")
    if args.labels:
        reference, hypothesis = (Path(p) for p in args.labels)
        tolerance = args.tolerance_ms if args.tolerance_ms is not None else config.segmenter.accuracy_tolerance_ms
        accuracy = boundary_accuracy(_boundaries(reference), _boundaries(hypothesis), tolerance)
        logger.info(f"event=eval_labels reference={reference} hypothesis={hypothesis} "
                    f"tolerance_ms={tolerance} boundary_accuracy={accuracy:.3f}")
        print(f"boundary_accuracy={accuracy:.3f}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Mel-L1 distance and boundary accuracy.")
    parser.add_argument("--mel", nargs=2, metavar=("REF", "HYP"), help="Two .mel files of equal shape.")
    parser.add_argument("--labels", nargs=2, metavar=("REF", "HYP"), help="Two HTK label files.")
    parser.add_argument("--tolerance-ms", type=float, default=None,
                        help="Override segmenter.accuracy_tolerance_ms.")
    parser.set_defaults(func=run)
