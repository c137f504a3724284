import struct

import numpy as np
import numpy.testing as npt
import pytest

from corrsim.corpus import (EmbeddingTable, SentencePair, Vocabulary, batches,
                            load_embeddings_binary, load_embeddings_text,
                            load_word_frequencies, parse_sts_tsv, split_80_20,
                            tokenize, write_sts_tsv)
from corrsim.errors import ConfigError, DataError, FormatError
from corrsim.numkit import SeededRng


class TestTokenize:
    def test_lowercase_whitespace(self):
        assert tokenize("A man plays guitar") == ["a", "man", "plays", "guitar"]

    def test_terminal_punctuation_split(self):
        assert tokenize("The dog runs.") == ["the", "dog", "runs", "."]
        assert tokenize("Really!?") == ["really", "!", "?"]

    def test_lone_punctuation_survives(self):
        assert tokenize("runs .") == ["runs", "."]

    def test_inner_punctuation_kept(self):
        assert tokenize("it's fine") == ["it's", "fine"]


class TestParse:
    def test_identity_pair(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("5.0\tA man plays guitar\tA man plays guitar\n")
        (pair,) = parse_sts_tsv(f)
        assert pair.gold == 5.0
        assert len(pair.tokens1) == len(pair.tokens2) == 4

    def test_direct_parse(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("2.5\tA dog runs\tA cat sits\n")
        (pair,) = parse_sts_tsv(f)
        assert pair.gold == 2.5

    def test_score_out_of_range_names_line(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("6.0\t a \t b\n")
        with pytest.raises(FormatError, match=":1:"):
            parse_sts_tsv(f)

    def test_bad_score_field(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("1.0\ta b\tc d\nxx\ta\tb\n")
        with pytest.raises(FormatError, match=":2:"):
            parse_sts_tsv(f)

    def test_wrong_field_count(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("just one field\n")
        with pytest.raises(FormatError, match=":1:"):
            parse_sts_tsv(f)

    def test_empty_sentence(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("1.0\t \tb\n")
        with pytest.raises(FormatError):
            parse_sts_tsv(f)

    def test_unlabeled_and_blank_lines(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("a b\tc d\n\n3.0\te f\tg h\n")
        pairs = parse_sts_tsv(f)
        assert [p.gold for p in pairs] == [None, 3.0]
        assert pairs[1].id == "3"

    def test_crlf(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_bytes(b"1.5\ta b\tc d\r\n2.5\te f\tg h\r\n")
        assert [p.gold for p in parse_sts_tsv(f)] == [1.5, 2.5]

    def test_round_trip(self, tmp_path):
        src = tmp_path / "src.tsv"
        src.write_text("3.7\tA man plays.\tThe dog runs!\nx y\tz w\n")
        first = parse_sts_tsv(src)
        out = tmp_path / "out.tsv"
        write_sts_tsv(first, out)
        second = parse_sts_tsv(out)
        assert [(p.tokens1, p.tokens2, p.gold) for p in first] == \
            [(p.tokens1, p.tokens2, p.gold) for p in second]


class TestVocabulary:
    def test_unk_reserved(self):
        v = Vocabulary(["a", "b"])
        assert v.index("a") == 1
        assert v.index("b") == 2
        assert v.index("zzz") == 0
        assert len(v) == 3

    def test_bijection(self):
        v = Vocabulary.from_pairs([SentencePair("1", ["b", "a"], ["a", "c"], None)])
        for i, tok in enumerate(v.tokens):
            assert v.index(tok) == i

    def test_oov_count(self):
        v = Vocabulary(["a", "b"])
        pair = SentencePair("1", ["a", "x"], ["y", "b", "z"], None)
        assert v.pair_oov_count(pair) == 3
        assert v.oov_count(["a", "b"]) == 0


class TestTextEmbeddings:
    def test_copy_through(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("cat 0.1 0.2 0.3\ndog -0.5 0.25 1.0\n")
        vocab = Vocabulary(["cat", "dog"])
        table = load_embeddings_text(f, vocab, SeededRng(0))
        npt.assert_allclose(table.row("cat"), [0.1, 0.2, 0.3], rtol=1e-6)
        npt.assert_allclose(table.row("dog"), [-0.5, 0.25, 1.0], rtol=1e-6)
        assert table.origin == "wi"

    def test_header_accepted(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("2 3\ncat 0.1 0.2 0.3\ndog -0.5 0.25 1.0\n")
        table = load_embeddings_text(f, Vocabulary(["cat"]), SeededRng(0))
        assert table.dim == 3

    def test_missing_word_gets_seeded_random_row(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("cat 0.1 0.2 0.3\n")
        vocab = Vocabulary(["cat", "zebra"])
        a = load_embeddings_text(f, vocab, SeededRng(5))
        b = load_embeddings_text(f, vocab, SeededRng(5))
        row = a.row("zebra")
        assert np.all(np.abs(row) <= 0.05)
        assert row.tobytes() == b.row("zebra").tobytes()

    def test_dim_mismatch_names_line(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("cat 0.1 0.2 0.3\ndog 0.1 0.2 0.3 0.4\n")
        with pytest.raises(FormatError, match=":2:"):
            load_embeddings_text(f, Vocabulary(["cat"]), SeededRng(0))

    def test_zero_usable_vectors(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("pelican 0.1 0.2\n")
        with pytest.raises(FormatError, match="matched"):
            load_embeddings_text(f, Vocabulary(["cat"]), SeededRng(0))

    def test_empty_file(self, tmp_path):
        f = tmp_path / "e.txt"
        f.write_text("")
        with pytest.raises(FormatError):
            load_embeddings_text(f, Vocabulary(["cat"]), SeededRng(0))


def _write_binary(path, entries, dim, count=None, trailing_newline=True):
    with open(path, "wb") as fh:
        fh.write(f"{len(entries) if count is None else count} {dim}\n".encode())
        for token, vec in entries:
            fh.write(token.encode() + b" ")
            fh.write(np.asarray(vec, dtype="<f4").tobytes())
            if trailing_newline:
                fh.write(b"\n")


class TestBinaryEmbeddings:
    def test_matches_text_twin_bit_for_bit(self, tmp_path):
        entries = [("cat", [0.125, -0.75, 3.5]), ("dog", [1.0, 0.5, -2.25])]
        txt = tmp_path / "e.txt"
        txt.write_text("".join(
            f"{t} {' '.join(repr(x) for x in v)}\n" for t, v in entries))
        binf = tmp_path / "e.bin"
        _write_binary(binf, entries, 3)
        vocab = Vocabulary(["cat", "dog", "missing"])
        a = load_embeddings_text(txt, vocab, SeededRng(11))
        b = load_embeddings_binary(binf, vocab, SeededRng(11))
        assert a.vectors.tobytes() == b.vectors.tobytes()

    def test_no_record_separator_accepted(self, tmp_path):
        binf = tmp_path / "e.bin"
        _write_binary(binf, [("cat", [1, 2])], 2, trailing_newline=False)
        table = load_embeddings_binary(binf, Vocabulary(["cat"]), SeededRng(0))
        npt.assert_array_equal(table.row("cat"), [1.0, 2.0])

    def test_zero_count_header(self, tmp_path):
        binf = tmp_path / "e.bin"
        binf.write_bytes(b"0 5\n")
        with pytest.raises(FormatError):
            load_embeddings_binary(binf, Vocabulary(["cat"]), SeededRng(0))

    def test_truncated_reports_byte_offset(self, tmp_path):
        binf = tmp_path / "e.bin"
        with open(binf, "wb") as fh:
            fh.write(b"1 4\n")
            fh.write(b"cat ")
            fh.write(struct.pack("<2f", 1.0, 2.0))  # 2 of 4 floats
        with pytest.raises(FormatError, match="byte offset"):
            load_embeddings_binary(binf, Vocabulary(["cat"]), SeededRng(0))


class TestFrequencies:
    def test_load(self, tmp_path):
        f = tmp_path / "f.tsv"
        f.write_text("cat\t10\ndog\t3\n")
        assert load_word_frequencies(f) == {"cat": 10, "dog": 3}

    def test_bad_count(self, tmp_path):
        f = tmp_path / "f.tsv"
        f.write_text("cat\tmany\n")
        with pytest.raises(FormatError, match=":1:"):
            load_word_frequencies(f)

    def test_nonpositive_count(self, tmp_path):
        f = tmp_path / "f.tsv"
        f.write_text("cat\t0\n")
        with pytest.raises(FormatError):
            load_word_frequencies(f)


def _pairs(n):
    return [SentencePair(str(i), ["a"], ["b"], float(i % 6)) for i in range(n)]


class TestSplit:
    def test_exact_ratio(self):
        s = split_80_20(_pairs(10), seed=0)
        assert len(s.train) == 8
        assert len(s.validation) == 2

    def test_deterministic_membership(self):
        a = split_80_20(_pairs(50), seed=3)
        b = split_80_20(_pairs(50), seed=3)
        assert [p.id for p in a.train] == [p.id for p in b.train]
        assert [p.id for p in a.validation] == [p.id for p in b.validation]

    def test_partition(self):
        pairs = _pairs(37)
        s = split_80_20(pairs, seed=1)
        train_ids = {p.id for p in s.train}
        val_ids = {p.id for p in s.validation}
        assert not train_ids & val_ids
        assert train_ids | val_ids == {p.id for p in pairs}

    def test_published_split_sizes(self):
        s = split_80_20(_pairs(28002), seed=0)
        assert len(s.train) == 22401
        assert len(s.validation) == 5601

    def test_too_few(self):
        with pytest.raises(DataError):
            split_80_20(_pairs(4), seed=0)


class TestBatches:
    def test_exact_division(self):
        out = batches(_pairs(250), 125, seed=0)
        assert [len(b) for b in out] == [125, 125]

    def test_singleton_dropped(self):
        out = batches(_pairs(251), 125, seed=0)
        assert [len(b) for b in out] == [125, 125]

    def test_remainder_kept_when_at_least_two(self):
        out = batches(_pairs(130), 125, seed=0)
        assert [len(b) for b in out] == [125, 5]

    def test_batch_size_must_be_at_least_two(self):
        with pytest.raises(ConfigError):
            batches(_pairs(10), 1, seed=0)

    def test_seed_controls_shuffle(self):
        a = batches(_pairs(30), 10, seed=1)
        b = batches(_pairs(30), 10, seed=1)
        c = batches(_pairs(30), 10, seed=2)
        ids = lambda bs: [[p.id for p in chunk] for chunk in bs]
        assert ids(a) == ids(b)
        assert ids(a) != ids(c)

    def test_batches_cover_everything(self):
        out = batches(_pairs(47), 10, seed=5)
        seen = [p.id for chunk in out for p in chunk]
        assert sorted(seen, key=int) == [str(i) for i in range(47)]


class TestEmbeddingTable:
    def test_row_count_must_match_vocab(self):
        vocab = Vocabulary(["a", "b"])
        with pytest.raises(DataError):
            EmbeddingTable(vocab, np.zeros((2, 4), dtype=np.float32), "ri")

    def test_lookup_never_fails(self):
        vocab = Vocabulary(["a"])
        table = EmbeddingTable.random(vocab, 4, SeededRng(0))
        npt.assert_array_equal(table.row("nope"), table.vectors[0])
