import pytest

from melhts.exceptions import InternalError, LexiconError
from melhts.models import ContextLabel, Phone, PhoneClass, Syllable, SyllablePosition
from melhts.textproc import (
    analyze_text,
    load_lexicon,
    make_context_labels,
    parse_text,
    parse_text_with_words,
    syllabify,
    syllable_phone_ranges,
)


def names(syllables):
    return [s.name for s in syllables]


class TestLexicon:
    def test_load_adds_silence(self, tmp_path):
        (tmp_path / "lex.txt").write_text("# toy\nka\tk a\nMi\tm i\n", encoding="utf-8")
        (tmp_path / "phones.txt").write_text("k\tstop\na\tvowel\nm\tnasal\ni\tVOWEL\n", encoding="utf-8")
        lexicon = load_lexicon(tmp_path / "lex.txt", tmp_path / "phones.txt")
        assert lexicon.entries["mi"] == ("m", "i")
        assert lexicon.phone_set["sil"].phone_class is PhoneClass.SILENCE
        assert lexicon.phone_set["i"].is_vowel

    @pytest.mark.parametrize("lex, phones", [
        ("ka k a\n", "k\tstop\na\tvowel\n"),
        ("ka\tk a\n", "k\tplosive\na\tvowel\n"),
        ("ka\tk e\n", "k\tstop\na\tvowel\n"),
        ("ka\tk a\n", "x\tstop\na\tvowel\n"),
    ])
    def test_malformed_files(self, tmp_path, lex, phones):
        (tmp_path / "lex.txt").write_text(lex, encoding="utf-8")
        (tmp_path / "phones.txt").write_text(phones, encoding="utf-8")
        with pytest.raises(LexiconError):
            load_lexicon(tmp_path / "lex.txt", tmp_path / "phones.txt")


class TestParseText:
    def test_wraps_in_silence(self, lexicon):
        phones, spans = parse_text_with_words("KA  mi", lexicon)
        assert [p.id for p in phones] == ["sil", "k", "a", "m", "i", "sil"]
        assert spans == [(1, 3), (3, 5)]

    def test_empty_text_is_one_silence(self, lexicon):
        assert [p.id for p in parse_text("   ", lexicon)] == ["sil"]

    def test_missing_words_are_all_named(self, lexicon):
        with pytest.raises(LexiconError) as info:
            parse_text("ka zu mi zu bo", lexicon)
        assert info.value.words == ["zu", "bo"]


class TestSyllabify:
    def test_single_onset(self, lexicon):
        assert names(syllabify(parse_text("kami", lexicon))) == ["sil", "ka", "mi", "sil"]
        assert names(syllabify(parse_text("iska", lexicon))) == ["sil", "is", "ka", "sil"]

    def test_adjacent_vowels_share_a_nucleus(self, lexicon):
        assert names(syllabify(parse_text("ka iska", lexicon))) == ["sil", "kais", "ka", "sil"]

    def test_max_onset(self, lexicon):
        phones = parse_text("iska", lexicon)
        assert names(syllabify(phones, "max_onset")) == ["sil", "i", "ska", "sil"]

    def test_every_syllable_has_one_vowel_run(self, lexicon):
        phones = parse_text("tasa mira chi taa", lexicon)
        syllables = syllabify(phones)
        assert [p for s in syllables for p in s.phones] == phones
        assert all(s.has_nucleus for s in syllables if s.name != "sil")

    def test_two_vowel_runs_rejected(self):
        a = Phone(id="a", phone_class=PhoneClass.VOWEL)
        k = Phone(id="k", phone_class=PhoneClass.STOP)
        with pytest.raises(ValueError):
            Syllable(phones=(a, k, a), has_nucleus=True)

    def test_phone_ranges(self, lexicon):
        syllables = syllabify(parse_text("kami", lexicon))
        assert syllable_phone_ranges(syllables) == [(0, 1), (1, 3), (3, 5), (5, 6)]


class TestContextLabels:
    def test_two_word_utterance(self, lexicon):
        analysis = analyze_text("ka mi", lexicon)
        labels = [label.to_htk() for label in analysis.labels]
        assert labels == [
            "x^x-sil+k=a@onset:0/00",
            "x^sil-k+a=m@onset:1/10",
            "sil^k-a+m=i@nucleus:1/01",
            "k^a-m+i=sil@onset:2/10",
            "a^m-i+sil=x@nucleus:2/01",
            "m^i-sil+x=x@onset:3/00",
        ]

    def test_coda_position(self, lexicon):
        analysis = analyze_text("iska", lexicon)
        s_label = analysis.labels[2]
        assert s_label.c == "s"
        assert s_label.pos_in_syllable is SyllablePosition.CODA

    def test_parse_inverts_to_htk(self):
        text = "sil^k-a+m=i@nucleus:1/01"
        assert ContextLabel.parse(text).to_htk() == text
        with pytest.raises(ValueError):
            ContextLabel.parse("not-a-label")

    def test_syllables_must_partition_phones(self, lexicon):
        phones = parse_text("ka", lexicon)
        with pytest.raises(InternalError):
            make_context_labels(phones, syllabify(phones)[:-1])
