import numpy as np
import pytest

from warnrank.embedding import (
    CbowConfig,
    EmptyCorpus,
    cbow_window_loss_grads,
    embed,
    load_embedding,
    save_embedding,
    train_cbow,
)
from warnrank.preprocess import PAD, TokenSequence, build_vocab


def make_vocab(tokens):
    return build_vocab([tokens])


class TestTrainCbow:
    def test_deterministic_given_seed(self):
        vocab = make_vocab(list("abcabcaab"))
        streams = [vocab.encode(list("abcabcaab"))] * 3
        cfg = CbowConfig(dim=8, window=2, negatives=2, epochs=3, seed=5)
        m1 = train_cbow(streams, vocab, cfg)
        m2 = train_cbow(streams, vocab, cfg)
        assert np.array_equal(m1.vectors, m2.vectors)

    def test_pad_row_stays_zero(self):
        vocab = make_vocab(list("abab"))
        streams = [vocab.encode(list("abab"))]
        emb = train_cbow(streams, vocab, CbowConfig(dim=6, window=1, negatives=2, epochs=2, seed=1))
        assert np.array_equal(emb.vectors[vocab.pad_id], np.zeros(6))

    def test_pad_in_stream_rejected(self):
        vocab = make_vocab(list("ab"))
        with pytest.raises(ValueError):
            train_cbow([[vocab.pad_id, 2]], vocab, CbowConfig(dim=4, window=1, negatives=1, epochs=1))

    def test_empty_corpus(self):
        vocab = make_vocab(list("ab"))
        with pytest.raises(EmptyCorpus):
            train_cbow([], vocab, CbowConfig(dim=4, window=1, negatives=1, epochs=1))

    def test_single_repeated_token_loss_decreases(self):
        vocab = make_vocab(["tok"] * 8)
        streams = [vocab.encode(["tok"] * 8)] * 4
        cfg = CbowConfig(dim=8, window=2, negatives=3, epochs=6, seed=2, unk_fraction=0.0)
        emb = train_cbow(streams, vocab, cfg)
        assert emb.losses == sorted(emb.losses, reverse=True)
        assert emb.losses[-1] < emb.losses[0]

    def test_planted_synonyms_are_close(self):
        # two tokens used in identical contexts end up more similar than a
        # random unrelated pair
        rng = np.random.default_rng(0)
        streams_tokens = []
        for _ in range(220):
            syn = "syn_a" if rng.random() < 0.5 else "syn_b"
            streams_tokens.append(["left1", "left2", syn, "right1", "right2"])
            streams_tokens.append(["noise_" + str(rng.integers(12)), "mid", "other"])
        vocab = build_vocab(streams_tokens)
        streams = [vocab.encode(t) for t in streams_tokens]
        emb = train_cbow(streams, vocab, CbowConfig(dim=24, window=2, negatives=4, epochs=12, seed=3))

        def cos(a, b):
            va, vb = emb.vectors[vocab.token_to_id[a]], emb.vectors[vocab.token_to_id[b]]
            return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))

        assert cos("syn_a", "syn_b") > cos("syn_a", "noise_3")

    def test_unseen_token_uses_trained_unk_vector(self):
        vocab = make_vocab(list("abcd") * 5)
        streams = [vocab.encode(list("abcd") * 5)] * 4
        emb = train_cbow(streams, vocab, CbowConfig(dim=6, window=2, negatives=2, epochs=4, seed=1, unk_fraction=0.2))
        assert np.abs(emb.vectors[vocab.unk_id]).sum() > 0


class TestCbowGradient:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_central_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        V, d = 5, 4
        w_in = rng.normal(0, 0.5, (V, d))
        w_out = rng.normal(0, 0.5, (V, d))
        ctx = [1, 2, 4]
        center = 3
        negs = [0, 2]
        _, d_in, d_out = cbow_window_loss_grads(w_in, w_out, ctx, center, negs)
        eps = 1e-6
        max_rel = 0.0
        for mat, grad in ((w_in, d_in), (w_out, d_out)):
            for i in range(V):
                for j in range(d):
                    orig = mat[i, j]
                    mat[i, j] = orig + eps
                    lp, _, _ = cbow_window_loss_grads(w_in, w_out, ctx, center, negs)
                    mat[i, j] = orig - eps
                    lm, _, _ = cbow_window_loss_grads(w_in, w_out, ctx, center, negs)
                    mat[i, j] = orig
                    fd = (lp - lm) / (2 * eps)
                    denom = max(abs(fd), abs(grad[i, j]), 1e-8)
                    max_rel = max(max_rel, abs(fd - grad[i, j]) / denom)
        assert max_rel <= 1e-4

    def test_negative_equal_to_center_is_skipped(self):
        rng = np.random.default_rng(0)
        w_in = rng.normal(0, 0.5, (4, 3))
        w_out = rng.normal(0, 0.5, (4, 3))
        l1, _, _ = cbow_window_loss_grads(w_in, w_out, [0], 1, [1, 2])
        l2, _, _ = cbow_window_loss_grads(w_in, w_out, [0], 1, [2])
        assert l1 == pytest.approx(l2)


class TestEmbedLookup:
    def _emb(self, dim=4):
        vocab = make_vocab(list("ab"))
        streams = [vocab.encode(list("abab"))]
        return train_cbow(streams, vocab, CbowConfig(dim=dim, window=1, negatives=1, epochs=1, seed=0))

    def test_all_pad_sequence_is_zero(self):
        emb = self._emb()
        seq = TokenSequence([PAD] * 5, [False] * 5, [], 5, 0)
        assert np.array_equal(embed(seq, emb), np.zeros((5, 4)))

    def test_single_real_token_single_nonzero_row(self):
        emb = self._emb()
        seq = TokenSequence(["a", PAD, PAD], [True, False, False], [(0, 1)], 3, 0)
        out = embed(seq, emb)
        assert np.abs(out[0]).sum() > 0
        assert np.array_equal(out[1:], np.zeros((2, 4)))

    def test_row_selection_matches_matrix(self):
        emb = self._emb()
        seq = TokenSequence(["b", "a"], [True, True], [(0, 2)], 2, 0)
        out = embed(seq, emb)
        ids = emb.vocab.encode(["b", "a"])
        assert np.array_equal(out, emb.vectors[ids])

    def test_paper_default_shapes(self):
        vocab = make_vocab(list("ab"))
        vectors = np.zeros((vocab.size, 96))
        from warnrank.embedding import EmbeddingMatrix

        emb = EmbeddingMatrix(vectors, vocab, CbowConfig(dim=96))
        ctx = TokenSequence(["a"] * 600, [True] * 600, [(0, 600)], 600, 0)
        stmt = TokenSequence(["a"] * 40, [True] * 40, [(0, 40)], 40, 0)
        assert embed(ctx, emb).shape == (600, 96)
        assert embed(stmt, emb).shape == (40, 96)

    def test_pad_content_cannot_leak(self):
        emb = self._emb()
        seq1 = TokenSequence(["a", "a"], [True, False], [(0, 1)], 2, 0)
        seq2 = TokenSequence(["a", "b"], [True, False], [(0, 1)], 2, 0)
        assert np.array_equal(embed(seq1, emb), embed(seq2, emb))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        vocab = make_vocab(list("abcab"))
        streams = [vocab.encode(list("abcab"))]
        emb = train_cbow(streams, vocab, CbowConfig(dim=5, window=1, negatives=1, epochs=2, seed=9))
        path = tmp_path / "emb.ckpt"
        save_embedding(path, emb)
        loaded = load_embedding(path)
        assert np.array_equal(loaded.vectors, emb.vectors)
        assert loaded.vocab.token_to_id == vocab.token_to_id
        assert loaded.config == emb.config

    def test_stable_bytes(self, tmp_path):
        vocab = make_vocab(list("ab"))
        streams = [vocab.encode(list("abab"))]
        emb = train_cbow(streams, vocab, CbowConfig(dim=3, window=1, negatives=1, epochs=1, seed=1))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_embedding(p1, emb)
        save_embedding(p2, emb)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError):
            load_embedding(path)
