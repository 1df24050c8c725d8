import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warnrank.minic import lex
from warnrank.preprocess import (
    CapacityError,
    PAD,
    PreprocessConfig,
    abstract_token_lists,
    build_vocab,
    fit_length,
    tokenize_context,
)


def abstract_texts(sources, known=()):
    token_lists = [lex(s) for s in sources]
    return abstract_token_lists(token_lists, known_functions=known)


class TestAbstraction:
    def test_function_name_becomes_func1(self):
        texts, table = abstract_texts(
            ["aoc_s_event(id);", "char prefix[32];"], known={"aoc_s_event"}
        )
        assert texts[0].startswith("FUNC1 (")
        assert table.func_map["aoc_s_event"] == "FUNC1"
        assert "NUMBER_LIT" in texts[1]
        assert table.var_map["prefix"].startswith("VAR")

    def test_strcat_statement_with_prior_occurrences(self):
        # seven distinct variables occur first, making prefix VAR8 and,
        # after two more, rate_str VAR11
        prior = ["a1 = a2 + a3;", "a4 = a5 + a6;", "a7 = a7;"]
        context = prior + ["char prefix[32];", "b1 = b2;", "strcat(prefix, rate_str);"]
        texts, table = abstract_texts(context)
        assert table.var_map["prefix"] == "VAR8"
        assert table.var_map["rate_str"] == "VAR11"
        assert texts[-1] == "strcat ( VAR8 , VAR11 ) ;"
        tokens, _spans = tokenize_context([texts[-1]])
        assert tokens == ["strcat", "(", "VAR8", ",", "VAR11", ")", ";"]
        assert len(tokens) == 7

    def test_context_without_identifiers_unchanged(self):
        texts, table = abstract_texts(["return ;"])
        assert texts == ["return ;"]
        assert table.var_map == {} and table.func_map == {}

    def test_allowlisted_names_survive(self):
        texts, _ = abstract_texts(["strcat(a, b);", "n = strlen(a);"])
        assert texts[0].startswith("strcat (")
        assert "strlen" in texts[1]

    def test_literals_abstracted(self):
        texts, _ = abstract_texts(["x = 32;", 's = "hello";', "c = 'q';"])
        assert "NUMBER_LIT" in texts[0]
        assert "STRING_LIT" in texts[1]
        assert "CHAR_LIT" in texts[2]

    def test_idempotent(self):
        texts, _ = abstract_texts(["strcat(prefix, rate_str);", "char buf[32];"])
        again, table = abstract_texts(texts)
        assert again == texts
        assert table.var_map == {} and table.func_map == {}

    def test_bijective_within_context(self):
        texts, table = abstract_texts(["a = b;", "b = a;", "c = a + b;"])
        symbols = list(table.var_map.values())
        assert len(symbols) == len(set(symbols))
        assert texts[0] == "VAR1 = VAR2 ;"
        assert texts[1] == "VAR2 = VAR1 ;"

    def test_keywords_operators_punctuation_unchanged(self):
        texts, _ = abstract_texts(["if (p != NULL) { return ; }"])
        assert texts[0] == "if ( VAR1 != NULL ) { return ; }"

    def test_call_detected_by_parenthesis_without_known_set(self):
        texts, table = abstract_texts(["helper(x);"])
        assert texts[0] == "FUNC1 ( VAR1 ) ;"
        assert table.func_map == {"helper": "FUNC1"}


class TestTokenizeContext:
    def test_spans_cover_statements(self):
        tokens, spans = tokenize_context(["a = 1 ;", "f ( a , b ) ;"])
        assert len(tokens) == 4 + 7
        assert spans == [(0, 4), (4, 11)]

    def test_single_statement_span(self):
        tokens, spans = tokenize_context(["return ;"])
        assert spans == [(0, 2)]


class TestFitLength:
    def test_pad_short_sequence(self):
        seq = fit_length(list("abcde"), [(0, 5)], 0, 8)
        assert seq.tokens == list("abcde") + [PAD] * 3
        assert seq.mask == [True] * 5 + [False] * 3
        assert seq.length == 8

    def test_truncation_prefers_left_then_right(self):
        # spans of sizes [4, 3, 4], reported in the middle, L = 8:
        # middle (3) + left (4) fit; the right statement would overflow
        tokens = list("llllmmmrrrr")
        seq = fit_length(tokens, [(0, 4), (4, 7), (7, 11)], 1, 8)
        assert seq.tokens == list("llllmmm") + [PAD]
        assert seq.stmt_spans == [(0, 4), (4, 7)]
        assert seq.reported_span == 1

    def test_reported_too_long_raises(self):
        with pytest.raises(CapacityError):
            fit_length(list("x") * 41, [(0, 41)], 0, 40)

    def test_reported_exactly_capacity_is_fine(self):
        seq = fit_length(list("x") * 40, [(0, 40)], 0, 40)
        assert sum(seq.mask) == 40

    def test_side_stops_at_first_non_fit(self):
        # left neighbor too big, further-left small one must not be skipped in
        tokens = list("ab") + list("XXXXX") + list("mm") + list("rr")
        spans = [(0, 2), (2, 7), (7, 9), (9, 11)]
        seq = fit_length(tokens, spans, 2, 6)
        assert seq.tokens == list("mmrr") + [PAD] * 2
        assert seq.stmt_spans == [(0, 2), (2, 4)]

    @settings(max_examples=300, deadline=None)
    @given(st.data())
    def test_randomized_layout_properties(self, data):
        n_spans = data.draw(st.integers(1, 10))
        sizes = [data.draw(st.integers(1, 7)) for _ in range(n_spans)]
        reported = data.draw(st.integers(0, n_spans - 1))
        L = data.draw(st.integers(1, 40))
        spans = []
        tokens = []
        for i, size in enumerate(sizes):
            spans.append((len(tokens), len(tokens) + size))
            tokens.extend(f"t{i}_{j}" for j in range(size))
        if sizes[reported] > L:
            with pytest.raises(CapacityError):
                fit_length(tokens, spans, reported, L)
            return
        seq = fit_length(tokens, spans, reported, L)
        # capacity exactness
        assert len(seq.tokens) == len(seq.mask) == L
        # statement atomicity: spans cover real positions fully
        for s, e in seq.stmt_spans:
            assert 0 <= s < e <= L
            assert all(seq.mask[s:e])
        # reported statement fully present
        rs, re = seq.stmt_spans[seq.reported_span]
        assert seq.tokens[rs:re] == tokens[spans[reported][0] : spans[reported][1]]
        # pads are pads
        for t, m in zip(seq.tokens, seq.mask):
            assert m == (t != PAD)


class TestVocabulary:
    def test_small_corpus_size(self):
        vocab = build_vocab([["a", "b", "a"]])
        assert vocab.size == 4  # a, b, <pad>, <unk>
        assert vocab.pad_id == 0
        assert vocab.unk_id == 1

    def test_unseen_token_maps_to_unk(self):
        vocab = build_vocab([["a", "b"]])
        assert vocab.encode(["zzz"]) == [vocab.unk_id]

    def test_abstraction_shrinks_vocabulary(self, mini_bundle):
        from warnrank.preprocess import prepare_context_sequences
        from warnrank.slicing import ContextMode, extract_context

        sdg = mini_bundle["sdg"]
        on_lists, off_lists = [], []
        for w in mini_bundle["dataset"].warnings[:30]:
            ctx = extract_context(sdg, w, ContextMode.CONTROL_AND_DATA)
            on = prepare_context_sequences(sdg, ctx, PreprocessConfig(96, 24, True))
            off = prepare_context_sequences(sdg, ctx, PreprocessConfig(96, 24, False))
            on_lists.append(on.context_seq.real_tokens())
            off_lists.append(off.context_seq.real_tokens())
        v_on = build_vocab(on_lists).size
        v_off = build_vocab(off_lists).size
        assert v_on < v_off

    def test_deterministic_ids(self):
        a = build_vocab([["x", "y", "x", "z"]])
        b = build_vocab([["x", "y", "x", "z"]])
        assert a.token_to_id == b.token_to_id
