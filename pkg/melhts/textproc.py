# melhts/textproc.py

import unicodedata
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from melhts.config import PAD_PHONE, SILENCE_PHONE, logger
from melhts.exceptions import InternalError, LexiconError
from melhts.models import ContextLabel, Phone, PhoneClass, Syllable, SyllablePosition
from melhts.storage import read_text

SplitPolicy = Literal["single_onset", "max_onset"]
WordSpan = Tuple[int, int]


def normalize_word(word: str) -> str:
    return unicodedata.normalize("NFC", word).casefold()


class Lexicon(BaseModel):
    """Word to phone-id pronunciations over a classified phone set."""
    model_config = ConfigDict(frozen=True)

    entries: Dict[str, Tuple[str, ...]]
    phone_set: Dict[str, Phone]

    @field_validator("entries")
    @classmethod
    def check_words(cls, value):
        for word, phones in value.items():
            if not word or word != normalize_word(word) or any(ch.isspace() for ch in word):
                raise ValueError(f"lexicon word '{word}' is not a normalized token")
            if not phones:
                raise ValueError(f"lexicon word '{word}' has no phones")
        return value

    @model_validator(mode="after")
    def check_phones_known(self):
        for word, phones in self.entries.items():
            unknown = [p for p in phones if p not in self.phone_set]
            if unknown:
                raise ValueError(f"word '{word}' uses phones missing from the phone set: {unknown}")
        if SILENCE_PHONE not in self.phone_set:
            raise ValueError(f"the phone set must contain '{SILENCE_PHONE}'")
        return self

    @property
    def silence(self) -> Phone:
        return self.phone_set[SILENCE_PHONE]

    def pronounce(self, word: str) -> List[Phone]:
        return [self.phone_set[p] for p in self.entries[normalize_word(word)]]


def _data_lines(text: str):
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield number, stripped


def load_lexicon(lexicon_path: Path, phone_class_path: Path) -> Lexicon:
    """
    Loads `word<TAB>phone phone ...` entries and `phone<TAB>class` assignments.
    A silence phone is added when the class file lacks one.

    Raises:
        StorageError: If a file cannot be read.
        LexiconError: If a line is malformed or the entries are inconsistent.
    """
    phone_set: Dict[str, Phone] = {}
    for number, line in _data_lines(read_text(phone_class_path)):
        fields = line.split("\t")
        if len(fields) != 2:
            raise LexiconError(f"{phone_class_path}:{number}: expected 'phone<TAB>class'")
        phone_id, class_name = fields[0].strip(), fields[1].strip().lower()
        try:
            phone_set[phone_id] = Phone(id=phone_id, phone_class=PhoneClass(class_name))
        except (ValueError, ValidationError) as e:
            raise LexiconError(f"{phone_class_path}:{number}: {e}") from e
    phone_set.setdefault(SILENCE_PHONE, Phone(id=SILENCE_PHONE, phone_class=PhoneClass.SILENCE))

    entries: Dict[str, Tuple[str, ...]] = {}
    for number, line in _data_lines(read_text(lexicon_path)):
        word, sep, pronunciation = line.partition("\t")
        if not sep or not pronunciation.split():
            raise LexiconError(f"{lexicon_path}:{number}: expected 'word<TAB>phone phone ...'")
        entries[normalize_word(word.strip())] = tuple(pronunciation.split())

    try:
        lexicon = Lexicon(entries=entries, phone_set=phone_set)
    except ValidationError as e:
        raise LexiconError(f"invalid lexicon {lexicon_path}: {e}") from e
    logger.info(f"event=lexicon_loaded words={len(entries)} phones={len(phone_set)}")
    return lexicon


def parse_text_with_words(text: str, lexicon: Lexicon) -> Tuple[List[Phone], List[WordSpan]]:
    """
    Maps whitespace-separated words through the lexicon and pads the
    utterance with silence. Each word span is a [start, end) phone index range.

    Raises:
        LexiconError: Naming every word missing from the lexicon.
    """
    if not lexicon.entries:
        raise LexiconError("the lexicon is empty")
    words = [normalize_word(w) for w in text.split()]
    missing = [w for w in words if w not in lexicon.entries]
    if missing:
        unique = list(dict.fromkeys(missing))
        raise LexiconError(f"words not in lexicon: {' '.join(unique)}", words=unique)

    phones = [lexicon.silence]
    if not words:
        return phones, []
    spans = []
    for word in words:
        start = len(phones)
        phones.extend(lexicon.pronounce(word))
        spans.append((start, len(phones)))
    phones.append(lexicon.silence)
    return phones, spans


def parse_text(text: str, lexicon: Lexicon) -> List[Phone]:
    return parse_text_with_words(text, lexicon)[0]


def _syllabify_run(phones: Sequence[Phone], policy: SplitPolicy) -> List[Syllable]:
    # vowel runs as (start, end) pairs
    runs = []
    index = 0
    while index < len(phones):
        if phones[index].is_vowel:
            start = index
            while index < len(phones) and phones[index].is_vowel:
                index += 1
            runs.append((start, index))
        else:
            index += 1
    if not runs:
        return [Syllable.from_phones(phones)]

    cuts = [0]
    for (_, left_end), (right_start, _) in zip(runs, runs[1:]):
        if policy == "max_onset":
            cuts.append(left_end)
        else:
            cuts.append(right_start - 1)
    cuts.append(len(phones))
    return [Syllable.from_phones(phones[a:b]) for a, b in zip(cuts, cuts[1:])]


def syllabify(phones: Sequence[Phone], policy: SplitPolicy = "single_onset") -> List[Syllable]:
    """
    Groups phones into C*VC* syllables. Each vowel run anchors one syllable,
    silences stand alone and consonants between two vowel runs are split by
    `policy`: "single_onset" gives only the last consonant to the next
    syllable (VCCV -> VC.CV), "max_onset" gives it all of them.
    """
    syllables: List[Syllable] = []
    pending: List[Phone] = []
    for phone in phones:
        if phone.phone_class is PhoneClass.SILENCE:
            if pending:
                syllables.extend(_syllabify_run(pending, policy))
                pending = []
            syllables.append(Syllable.from_phones([phone]))
        else:
            pending.append(phone)
    if pending:
        syllables.extend(_syllabify_run(pending, policy))
    return syllables


def _positions(syllable: Syllable) -> List[SyllablePosition]:
    if not syllable.has_nucleus:
        return [SyllablePosition.ONSET] * len(syllable.phones)
    positions = []
    seen_vowel = False
    for phone in syllable.phones:
        if phone.is_vowel:
            seen_vowel = True
            positions.append(SyllablePosition.NUCLEUS)
        else:
            positions.append(SyllablePosition.CODA if seen_vowel else SyllablePosition.ONSET)
    return positions


def make_context_labels(phones: Sequence[Phone], syllables: Sequence[Syllable],
                        word_spans: Optional[Sequence[WordSpan]] = None) -> List[ContextLabel]:
    """
    One pentaphone label per phone, padded with "x" beyond the utterance.

    Raises:
        InternalError: If the syllables do not partition the phones.
    """
    flat = [phone.id for syllable in syllables for phone in syllable.phones]
    if flat != [phone.id for phone in phones]:
        raise InternalError("syllables do not partition the phone sequence")

    positions = []
    syllable_of = []
    for index, syllable in enumerate(syllables):
        positions.extend(_positions(syllable))
        syllable_of.extend([index] * len(syllable.phones))

    word_starts = {start for start, _ in (word_spans or ())}
    word_ends = {end - 1 for _, end in (word_spans or ())}

    ids = [PAD_PHONE, PAD_PHONE] + list(flat) + [PAD_PHONE, PAD_PHONE]
    labels = []
    for i in range(len(flat)):
        labels.append(ContextLabel(
            ll=ids[i], l=ids[i + 1], c=ids[i + 2], r=ids[i + 3], rr=ids[i + 4],
            pos_in_syllable=positions[i],
            syllable_index=syllable_of[i],
            is_word_boundary_left=i in word_starts,
            is_word_boundary_right=i in word_ends,
        ))
    return labels


def syllable_phone_ranges(syllables: Sequence[Syllable]) -> List[Tuple[int, int]]:
    """[start, end) phone index range of every syllable."""
    ranges = []
    start = 0
    for syllable in syllables:
        ranges.append((start, start + len(syllable.phones)))
        start += len(syllable.phones)
    return ranges


class TextAnalysis(BaseModel):
    """Everything the pipeline derives from one transcript."""
    model_config = ConfigDict(frozen=True)

    phones: List[Phone]
    word_spans: List[WordSpan]
    syllables: List[Syllable]
    labels: List[ContextLabel]

    @property
    def phone_ids(self) -> List[str]:
        return [phone.id for phone in self.phones]


def analyze_text(text: str, lexicon: Lexicon, policy: SplitPolicy = "single_onset") -> TextAnalysis:
    phones, spans = parse_text_with_words(text, lexicon)
    syllables = syllabify(phones, policy)
    labels = make_context_labels(phones, syllables, spans)
    return TextAnalysis(phones=phones, word_spans=spans, syllables=syllables, labels=labels)
