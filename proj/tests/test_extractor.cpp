#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "spellgcn/encoded_io.hpp"
#include "spellgcn/extractor.hpp"
#include "spellgcn/vocab.hpp"

namespace {

using namespace spellgcn;

ExtractorConfig small_cfg() {
  ExtractorConfig cfg;
  cfg.dim = 8;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.max_len = 6;
  cfg.seed = 7;
  return cfg;
}

Vocab small_vocab() { return Vocab({U'天', U'地', U'人', U'和'}); }

TEST(ExtractorConfig, Validation) {
  ExtractorConfig cfg = small_cfg();
  cfg.n_heads = 3;  // 8 % 3 != 0
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(small_cfg().validate());
}

TEST(Extractor, EncodeShapeAndFiniteness) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const auto enc = ex.encode(U"天地人");
  EXPECT_EQ(enc.vectors.rows(), 3u);
  EXPECT_EQ(enc.vectors.cols(), 8u);
  EXPECT_TRUE(enc.vectors.all_finite());
  ASSERT_EQ(enc.token_ids.size(), 3u);
  EXPECT_EQ(enc.token_ids[0], ex.vocab().id_of(U'天'));
}

TEST(Extractor, EmptyInputGivesEmptyMatrix) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const auto enc = ex.encode(U"");
  EXPECT_EQ(enc.vectors.rows(), 0u);
  EXPECT_EQ(enc.vectors.cols(), 8u);
  EXPECT_TRUE(enc.token_ids.empty());
}

TEST(Extractor, OverLengthThrows) {
  Extractor<double> ex(small_vocab(), small_cfg());
  EXPECT_THROW(ex.encode(U"天地人和天地人"), LengthError);  // 7 > max_len 6
  EXPECT_NO_THROW(ex.encode(U"天地人和天地"));
}

TEST(Extractor, EncodeIsDeterministic) {
  Extractor<float> ex(small_vocab(), small_cfg());
  const auto a = ex.encode(U"天地人和");
  const auto b = ex.encode(U"天地人和");
  EXPECT_TRUE(bit_equal(a.vectors, b.vectors));
}

TEST(Extractor, SameSeedSameInitDifferentSeedDiffers) {
  Extractor<float> a(small_vocab(), small_cfg());
  Extractor<float> b(small_vocab(), small_cfg());
  EXPECT_TRUE(bit_equal(a.embedding_table(), b.embedding_table()));
  EXPECT_TRUE(bit_equal(a.layers()[0].wq, b.layers()[0].wq));

  ExtractorConfig other = small_cfg();
  other.seed = 8;
  Extractor<float> c(small_vocab(), other);
  EXPECT_FALSE(bit_equal(a.embedding_table(), c.embedding_table()));
}

TEST(Extractor, PadRowIsZeroAtInit) {
  Extractor<double> ex(small_vocab(), small_cfg());
  for (std::size_t j = 0; j < ex.dim(); ++j) {
    EXPECT_EQ(ex.embedding_table()(kPadId, j), 0.0);
  }
}

TEST(Extractor, UnknownCharEncodesLikeUnk) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const auto unknown = ex.encode(U"龍");  // not in vocab
  const auto unk = ex.encode(std::u32string(1, kUnkChar));
  EXPECT_EQ(unknown.token_ids[0], kUnkId);
  EXPECT_TRUE(bit_equal(unknown.vectors, unk.vectors));
}

// PAD keys carry a -1e9 additive mask, so trailing padding must not change
// the vectors of the real positions.
TEST(Extractor, TrailingPadLeavesRealRowsUnchanged) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const auto plain = ex.encode(U"天地人");
  std::u32string padded = U"天地人";
  padded += std::u32string(2, kPadChar);
  const auto with_pad = ex.encode(padded);
  ASSERT_EQ(with_pad.vectors.rows(), 5u);
  double worst = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < ex.dim(); ++j) {
      worst = std::max(worst, std::abs(plain.vectors(i, j) - with_pad.vectors(i, j)));
    }
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_TRUE(with_pad.vectors.all_finite());
}

TEST(Extractor, ParamRegistryShapeAndFlags) {
  Extractor<double> ex(small_vocab(), small_cfg());
  auto params = ex.params();
  ASSERT_EQ(params.size(), 1u + 16u * 2u);
  EXPECT_EQ(params[0].name, "embedding");
  EXPECT_TRUE(params[0].freeze_pad_row);
  for (const auto& p : params) {
    const bool is_bias_or_norm = p.name.find(".b") != std::string::npos ||
                                 p.name.find("ln") != std::string::npos;
    EXPECT_EQ(p.decay, !is_bias_or_norm) << p.name;
    EXPECT_NE(p.tensor, nullptr);
  }
}

TEST(Extractor, BindOrderMatchesParamRegistry) {
  Extractor<double> ex(small_vocab(), small_cfg());
  Tape<double> tape;
  std::vector<Tape<double>::Id> flat;
  ex.bind(tape, &flat);
  auto params = ex.params();
  ASSERT_EQ(flat.size(), params.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    EXPECT_TRUE(bit_equal(tape.value(flat[i]), *params[i].tensor)) << params[i].name;
  }
}

TEST(Extractor, InitialNodeFeaturesCopiesEmbeddingRows) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const std::vector<char32_t> nodes = {U'地', U'天', U'龍'};  // last one missing
  const auto feats = ex.initial_node_features(nodes);
  EXPECT_EQ(feats.unresolved, 1u);
  ASSERT_EQ(feats.features.rows(), 3u);
  const auto& emb = ex.embedding_table();
  for (std::size_t j = 0; j < ex.dim(); ++j) {
    EXPECT_EQ(feats.features(0, j), emb(ex.vocab().id_of(U'地'), j));
    EXPECT_EQ(feats.features(1, j), emb(ex.vocab().id_of(U'天'), j));
    EXPECT_EQ(feats.features(2, j), emb(kUnkId, j));
  }
}

TEST(Extractor, NodeVocabIdsWithFallback) {
  Extractor<double> ex(small_vocab(), small_cfg());
  const auto ids = ex.node_vocab_ids({U'人', U'龍'});
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(ids[0], ex.vocab().id_of(U'人'));
  EXPECT_EQ(ids[1], kUnkId);
}

TEST(EncodedIo, RoundTripIsExactForFloat) {
  Matrix<float> m(3, 4);
  Rng rng(42);
  for (float& v : m.values()) v = static_cast<float>(rng.uniform(-2, 2));
  std::stringstream buf;
  write_encoded(buf, m);
  const auto back = read_encoded<float>(buf);
  EXPECT_TRUE(bit_equal(m, back));
}

TEST(EncodedIo, TruncationThrows) {
  Matrix<float> m(2, 2);
  m.fill(1.5f);
  std::stringstream buf;
  write_encoded(buf, m);
  const std::string bytes = buf.str();

  std::stringstream no_header(bytes.substr(0, 3));
  EXPECT_THROW(read_encoded<float>(no_header), DataError);

  std::stringstream short_data(bytes.substr(0, bytes.size() - 2));
  EXPECT_THROW(read_encoded<float>(short_data), DataError);
}

}  // namespace
