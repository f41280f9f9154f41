# melhts/commands/synth.py

import time
from pathlib import Path

from melhts.commands.common import load_configured_lexicon, model_path, output_dir
from melhts.config import PipelineConfig, logger
from melhts.exceptions import ConfigError
from melhts.pipeline import check_model_matches, filterbank_from, frame_spec_from, synthesize_text
from melhts.storage import export_mel, load_model
from melhts.vocoder import mel_to_audio
from melhts.wavio import write_wav


def run(args, config: PipelineConfig) -> int:
    path = model_path(config)
    if not path.is_file():
        raise ConfigError(f"model file does not exist: {path}")
    model = load_model(path)
    check_model_matches(model, config)
    lexicon = load_configured_lexicon(config)
    if args.smooth is not None:
        config = config.model_copy(update={"hmm": config.hmm.model_copy(update={"smoothing": args.smooth})})

    text = " ".join(args.text)
    started = time.perf_counter()
    mel = synthesize_text(text, lexicon, model, config, speaking_rate=args.rate)
    elapsed = time.perf_counter() - started

    out = Path(args.out) if args.out else output_dir(config, "synth") / f"{args.name}.mel"
    nbytes = export_mel(mel, out)
    logger.info(f"event=synth_done words={len(text.split())} frames={mel.num_frames} path={out} mel_bytes={nbytes}")
    print(f"synth_seconds={elapsed:.6f}")

    if args.wav:
        audio = mel_to_audio(mel, filterbank_from(config), frame_spec_from(config),
                             config.vocoder.griffin_lim_iterations, config.vocoder.seed)
        wav_path = out.with_suffix(".wav")
        write_wav(audio, wav_path, config.vocoder.peak_dbfs)
        logger.info(f"event=synth_wav_written path={wav_path}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="Generate a mel-spectrogram (and optionally audio) for text.")
    parser.add_argument("text", nargs="*", default=[], help="Words to synthesize; empty gives silence.")
    parser.add_argument("--out", help="Output mel path (default <output_dir>/synth/<name>.mel).")
    parser.add_argument("--name", default="synth", help="Base name under synth/ when --out is not given.")
    parser.add_argument("--wav", action="store_true", help="Also write Griffin-Lim audio next to the mel.")
    parser.add_argument("--rate", type=float, default=None, help="Speaking-rate multiplier on state durations.")
    parser.add_argument("--smooth", choices=("none", "mlpg"), default=None, help="Override hmm.smoothing.")
    parser.set_defaults(func=run)
