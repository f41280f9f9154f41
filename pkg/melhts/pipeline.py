# melhts/pipeline.py

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from melhts.analysis import build_mel_filterbank, delta_features, mel_spectrogram, short_term_energy, \
    stft_magnitude, sub_band_spectral_flux
from melhts.config import PipelineConfig, logger
from melhts.exceptions import ParameterError
from melhts.hmm.generation import generate_parameters
from melhts.hmm.model import AcousticModel, ModelMetadata
from melhts.hmm.training import (
    Chunk,
    TrainingLogEntry,
    TrainingSchedule,
    TrainingUtterance,
    align_chunks,
    chunks_from_boundaries,
    train_acoustic_model,
)
from melhts.models import (
    AlignmentResult,
    ArrayRecord,
    AudioBuffer,
    BoundarySet,
    EnergyContour,
    FluxContour,
    FrameSpec,
    ManifestEntry,
    MelFilterbank,
    MelSpectrogram,
)
from melhts.segmenter import (
    SegmentationParams,
    boundaries_from_alignment,
    hybrid_segment,
    ms_to_frame_edge,
)
from melhts.storage import import_mel
from melhts.textproc import Lexicon, TextAnalysis, analyze_text, syllable_phone_ranges
from melhts.wavio import load_audio


# ---------------------------
# FEATURE EXTRACTION
# ---------------------------

def frame_spec_from(config: PipelineConfig) -> FrameSpec:
    analysis = config.analysis
    return FrameSpec(frame_length_ms=analysis.frame_length_ms, frame_shift_ms=analysis.frame_shift_ms,
                     window=analysis.window, fft_size=analysis.fft_size)


def filterbank_from(config: PipelineConfig) -> MelFilterbank:
    analysis = config.analysis
    return build_mel_filterbank(analysis.num_filters, analysis.sample_rate_hz, analysis.fft_size,
                                analysis.fmin_hz, analysis.effective_fmax_hz)


class UtteranceFeatures(ArrayRecord):
    """Everything `extract` writes for one utterance."""
    utterance_id: str
    mel: MelSpectrogram
    ste: EnergyContour
    sbsf: FluxContour


def extract_utterance(entry: ManifestEntry, config: PipelineConfig) -> UtteranceFeatures:
    audio = load_audio(entry.wav_path, config.analysis.sample_rate_hz)
    params = SegmentationParams.from_config(config)
    spec = params.frame_spec
    mel = mel_spectrogram(audio, spec, filterbank_from(config))
    ste = short_term_energy(audio, params.ste_frame_spec)
    sbsf = sub_band_spectral_flux(stft_magnitude(audio, spec), config.gd.sbsf_bands, spec,
                                  audio.sample_rate_hz, config.gd.sbsf_weights)
    logger.debug(f"event=features_extracted id={entry.utterance_id} frames={mel.num_frames}")
    return UtteranceFeatures(utterance_id=entry.utterance_id, mel=mel, ste=ste, sbsf=sbsf)


def load_or_extract_mel(entry: ManifestEntry, config: PipelineConfig, mel_dir: Optional[Path],
                        audio: Optional[AudioBuffer] = None) -> MelSpectrogram:
    """Reuses `<mel_dir>/<id>.mel` from an earlier extract run when it matches the config."""
    if mel_dir is not None:
        path = Path(mel_dir) / f"{entry.utterance_id}.mel"
        if path.is_file():
            mel = import_mel(path)
            if (mel.num_filters == config.analysis.num_filters
                    and mel.frame_shift_ms == config.analysis.frame_shift_ms
                    and mel.sample_rate_hz == config.analysis.sample_rate_hz):
                return mel
            logger.warning(f"event=stale_features id={entry.utterance_id} path={path}")
    if audio is None:
        audio = load_audio(entry.wav_path, config.analysis.sample_rate_hz)
    return mel_spectrogram(audio, frame_spec_from(config), filterbank_from(config))


def check_model_matches(model: AcousticModel, config: PipelineConfig) -> None:
    meta = model.meta
    if meta.num_filters != config.analysis.num_filters:
        raise ParameterError("num_filters", f"model has {meta.num_filters}, config has {config.analysis.num_filters}")
    if meta.frame_shift_ms != config.analysis.frame_shift_ms:
        raise ParameterError("frame_shift_ms",
                             f"model uses {meta.frame_shift_ms}, config has {config.analysis.frame_shift_ms}")
    if meta.sample_rate_hz != config.analysis.sample_rate_hz:
        raise ParameterError("sample_rate_hz",
                             f"model uses {meta.sample_rate_hz}, config has {config.analysis.sample_rate_hz}")


# ---------------------------
# TRAINING
# ---------------------------

class PreparedUtterance(ArrayRecord):
    """Audio, text analysis and training features of one manifest entry."""
    training: TrainingUtterance
    audio: AudioBuffer
    text: TextAnalysis


def prepare_utterance(entry: ManifestEntry, lexicon: Lexicon, config: PipelineConfig,
                      mel_dir: Optional[Path] = None) -> PreparedUtterance:
    audio = load_audio(entry.wav_path, config.analysis.sample_rate_hz)
    mel = load_or_extract_mel(entry, config, mel_dir, audio)
    text = analyze_text(entry.transcript, lexicon, config.text.split_policy)
    features = delta_features(mel.frames, config.analysis.delta_half_window)
    training = TrainingUtterance(utterance_id=entry.utterance_id, features=features,
                                 phones=text.phone_ids, labels=text.labels)
    return PreparedUtterance(training=training, audio=audio, text=text)


def model_metadata(config: PipelineConfig, lexicon: Lexicon) -> ModelMetadata:
    return ModelMetadata(num_states=config.hmm.num_states, num_filters=config.analysis.num_filters,
                         delta_half_window=config.analysis.delta_half_window,
                         frame_shift_ms=config.analysis.frame_shift_ms,
                         sample_rate_hz=config.analysis.sample_rate_hz,
                         phone_set=sorted(lexicon.phone_set.values(), key=lambda p: p.id))


def syllable_chunks(prepared: PreparedUtterance, alignment: AlignmentResult, params: SegmentationParams,
                    correct: bool = True) -> Tuple[List[Chunk], BoundarySet, BoundarySet]:
    """
    Syllable chunks of one utterance from its HMM alignment, with the
    boundaries corrected by the hybrid segmenter when `correct` is set.
    Returns the chunks and the (HMM, final) boundary sets.
    """
    syllables = prepared.text.syllables
    hmm_bounds = boundaries_from_alignment(alignment, syllables, params)
    final = hybrid_segment(prepared.audio, syllables, hmm_bounds, params) if correct else hmm_bounds
    frames = [ms_to_frame_edge(b.time_ms, params, alignment.num_frames) for b in final.boundaries]
    chunks = chunks_from_boundaries(syllable_phone_ranges(syllables), frames, alignment.num_frames)
    return chunks, hmm_bounds, final


def train_model(prepared: Sequence[PreparedUtterance], lexicon: Lexicon, config: PipelineConfig,
                log: Optional[List[TrainingLogEntry]] = None) -> AcousticModel:
    """Runs the full training recipe; syllable chunks come from the hybrid segmenter."""
    params = SegmentationParams.from_config(config)
    by_id: Dict[str, PreparedUtterance] = {p.training.utterance_id: p for p in prepared}

    def chunker(utterance: TrainingUtterance, alignment: AlignmentResult) -> List[Chunk]:
        chunks, _, _ = syllable_chunks(by_id[utterance.utterance_id], alignment, params,
                                       correct=config.segmenter.enabled)
        return chunks

    schedule = TrainingSchedule.from_config(config.hmm, workers=config.runtime.workers)
    return train_acoustic_model([p.training for p in prepared], model_metadata(config, lexicon), schedule,
                                chunker=chunker, log=log)


# ---------------------------
# USING A TRAINED MODEL
# ---------------------------

def align_utterance(mel: MelSpectrogram, text: TextAnalysis, model: AcousticModel) -> AlignmentResult:
    """Full-context Viterbi alignment of an utterance against its transcript."""
    features = delta_features(mel.frames, model.meta.delta_half_window)
    utterance = TrainingUtterance(utterance_id="align", features=features, phones=text.phone_ids,
                                  labels=text.labels)
    return align_chunks(model, utterance, use_labels=True)


def segment_utterance(audio: AudioBuffer, mel: MelSpectrogram, text: TextAnalysis, model: AcousticModel,
                      config: PipelineConfig) -> Tuple[AlignmentResult, BoundarySet, BoundarySet]:
    """HMM syllable boundaries and their hybrid-corrected counterparts."""
    params = SegmentationParams.from_config(config)
    alignment = align_utterance(mel, text, model)
    hmm_bounds = boundaries_from_alignment(alignment, text.syllables, params)
    if not config.segmenter.enabled:
        return alignment, hmm_bounds, hmm_bounds
    corrected = hybrid_segment(audio, text.syllables, hmm_bounds, params)
    return alignment, hmm_bounds, corrected


def synthesize_text(text: str, lexicon: Lexicon, model: AcousticModel, config: PipelineConfig,
                    speaking_rate: Optional[float] = None) -> MelSpectrogram:
    analysis = analyze_text(text, lexicon, config.text.split_policy)
    rate = config.hmm.speaking_rate if speaking_rate is None else speaking_rate
    return generate_parameters(analysis.labels, model, rate, config.hmm.smoothing)
