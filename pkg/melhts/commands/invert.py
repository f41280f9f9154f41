# melhts/commands/invert.py

from pathlib import Path

from melhts.analysis import build_mel_filterbank
from melhts.config import PipelineConfig, logger
from melhts.exceptions import ParameterError
from melhts.pipeline import frame_spec_from
from melhts.storage import import_mel
from melhts.vocoder import mel_to_audio
from melhts.wavio import write_wav


def run(args, config: PipelineConfig) -> int:
    analysis = config.analysis
    iterations = args.iterations if args.iterations is not None else config.vocoder.griffin_lim_iterations
    for name in args.mels:
        source = Path(name)
        mel = import_mel(source)
        if mel.sample_rate_hz != analysis.sample_rate_hz or mel.frame_shift_ms != analysis.frame_shift_ms:
            raise ParameterError("sample_rate_hz",
                                 f"{source} is {mel.sample_rate_hz} Hz / {mel.frame_shift_ms} ms, config is "
                                 f"{analysis.sample_rate_hz} Hz / {analysis.frame_shift_ms} ms")
        fb = build_mel_filterbank(mel.num_filters, analysis.sample_rate_hz, analysis.fft_size,
                                  analysis.fmin_hz, analysis.effective_fmax_hz)
        audio = mel_to_audio(mel, fb, frame_spec_from(config), iterations, config.vocoder.seed)
        target = Path(args.out_dir) / f"{source.stem}.wav" if args.out_dir else source.with_suffix(".wav")
        write_wav(audio, target, config.vocoder.peak_dbfs)
        logger.info(f"event=mel_inverted input={source} output={target} iterations={iterations}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("invert", help="Griffin-Lim audio from mel files.")
    parser.add_argument("mels", nargs="+", help="Input .mel files.")
    parser.add_argument("--out-dir", help="Output directory (default: next to each input).")
    parser.add_argument("--iterations", type=int, default=None, help="Override vocoder.griffin_lim_iterations.")
    parser.set_defaults(func=run)
