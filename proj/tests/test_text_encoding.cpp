#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zslforge/text_encoding.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

using namespace zslforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("zslforge_text_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

EmbeddingTable table_from_string(const std::string& content) {
  TempDir tmp;
  write_text_file(tmp.file("emb.txt"), content);
  return load_embedding_table(tmp.file("emb.txt"));
}

}  // namespace

TEST_CASE("tokenizer applies the lowercase non-alphanumeric-split rule") {
  CHECK(tokenize("Rear-view mirror") ==
        std::vector<std::string>{"rear", "view", "mirror"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("Panthera leo.") == std::vector<std::string>{"panthera", "leo"});
  CHECK(tokenize("a1-b2  C3") == std::vector<std::string>{"a1", "b2", "c3"});
  CHECK(tokenize("...!!!") == std::vector<std::string>{});
}

TEST_CASE("embedding table parses GloVe-style lines") {
  const EmbeddingTable table = table_from_string("the 1.0 0.0\nCat 0.5 -0.5\n");
  CHECK(table.dim() == 2);
  CHECK(table.lookup("the") == 0);
  CHECK(table.lookup("cat") == 1);  // lowercased on load
  CHECK(table.lookup("dog") == -1);
  CHECK(table.vectors(1, 1) == doctest::Approx(-0.5f));
}

TEST_CASE("embedding table rejects ragged rows and keeps first duplicate") {
  CHECK_THROWS_AS(table_from_string("a 1.0 2.0\nb 1.0\n"), FormatError);
  const EmbeddingTable table = table_from_string("a 1.0\nA 2.0\n");
  CHECK(table.duplicate_tokens == 1);
  CHECK(table.vectors(0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("encode_tokens averages in-vocabulary embeddings") {
  const EmbeddingTable table = table_from_string("a 1 0\nb 0 1\n");
  SUBCASE("single token returns its exact vector") {
    auto [v, n] = encode_tokens(table, {"a"});
    CHECK(n == 1);
    CHECK(v(0) == doctest::Approx(1.0));
    CHECK(v(1) == doctest::Approx(0.0));
  }
  SUBCASE("two tokens average") {
    auto [v, n] = encode_tokens(table, {"a", "b"});
    CHECK(n == 2);
    CHECK(v(0) == doctest::Approx(0.5));
    CHECK(v(1) == doctest::Approx(0.5));
  }
  SUBCASE("all OOV yields the zero vector") {
    auto [v, n] = encode_tokens(table, {"x", "y"});
    CHECK(n == 0);
    CHECK(v.isZero(0.0));
  }
  SUBCASE("mean is permutation invariant") {
    auto [v1, n1] = encode_tokens(table, {"a", "b", "a"});
    auto [v2, n2] = encode_tokens(table, {"a", "a", "b"});
    CHECK(n1 == n2);
    CHECK((v1 - v2).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("chunk plans follow the 256/50 rule") {
  SUBCASE("one window exactly") {
    const ChunkPlan p = plan_chunks(256);
    REQUIRE(p.spans.size() == 1);
    CHECK(p.spans[0] == std::pair<int, int>{0, 256});
  }
  SUBCASE("n=300") {
    const ChunkPlan p = plan_chunks(300);
    REQUIRE(p.spans.size() == 2);
    CHECK(p.spans[0] == std::pair<int, int>{0, 256});
    CHECK(p.spans[1] == std::pair<int, int>{206, 300});
  }
  SUBCASE("n=463 leaves a one-token tail") {
    const ChunkPlan p = plan_chunks(463);
    REQUIRE(p.spans.size() == 3);
    CHECK(p.spans[0] == std::pair<int, int>{0, 256});
    CHECK(p.spans[1] == std::pair<int, int>{206, 462});
    CHECK(p.spans[2] == std::pair<int, int>{412, 463});
  }
  SUBCASE("invalid window/overlap") {
    CHECK_THROWS_AS(plan_chunks(10, 50, 50), ConfigError);
    CHECK_THROWS_AS(plan_chunks(0), ConfigError);
  }
}

TEST_CASE("chunk coverage property: spans tile [0, n) with exact overlap") {
  for (int n = 1; n <= 2000; ++n) {
    const ChunkPlan p = plan_chunks(n);
    REQUIRE(!p.spans.empty());
    CHECK(p.spans.front().first == 0);
    CHECK(p.spans.back().second == n);
    for (std::size_t i = 0; i < p.spans.size(); ++i) {
      CHECK(p.spans[i].second > p.spans[i].first);
      if (i + 1 < p.spans.size()) {
        CHECK(p.spans[i].second - p.spans[i + 1].first == 50);  // consecutive overlap
        CHECK(p.spans[i].second - p.spans[i].first == 256);     // non-final spans are full
      }
    }
  }
}

TEST_CASE("chunk aggregation by mean and sum") {
  const Vec a = (Vec(2) << 2.0, 0.0).finished();
  const Vec b = (Vec(2) << 0.0, 2.0).finished();
  SUBCASE("single chunk mean is identity") {
    const Vec m = aggregate_chunk_features({a}, AggMode::kMean);
    CHECK(m(0) == doctest::Approx(2.0));
  }
  SUBCASE("mean") {
    const Vec m = aggregate_chunk_features({a, b}, AggMode::kMean);
    CHECK(m(0) == doctest::Approx(1.0));
    CHECK(m(1) == doctest::Approx(1.0));
  }
  SUBCASE("sum") {
    const Vec s = aggregate_chunk_features({a, b}, AggMode::kSum);
    CHECK(s(0) == doctest::Approx(2.0));
    CHECK(s(1) == doctest::Approx(2.0));
  }
  SUBCASE("empty list is an error") {
    CHECK_THROWS_AS(aggregate_chunk_features({}, AggMode::kMean), DataError);
  }
}

TEST_CASE("encode_class averages article vectors") {
  const EmbeddingTable table = table_from_string("rear 1 0\nwing 0 1\nmirror 1 1\n");
  EncoderConfig config;
  config.table = &table;

  SUBCASE("two articles average") {
    const std::vector<Article> arts = {{"Rear-view mirror", "rear mirror"},
                                       {"Wing mirror", "wing mirror"}};
    const EncodedClass enc = encode_class("n02965783", arts, config);
    CHECK(enc.n_articles == 2);
    // article 1: mean([1,0],[1,1]) = [1, .5]; article 2: mean([0,1],[1,1]) = [.5, 1]
    CHECK(enc.vector(0) == doctest::Approx(0.75));
    CHECK(enc.vector(1) == doctest::Approx(0.75));
    CHECK_FALSE(enc.degenerate);
  }
  SUBCASE("single article passes through") {
    const EncodedClass enc = encode_class("n00000001", {{"T", "rear"}}, config);
    CHECK(enc.vector(0) == doctest::Approx(1.0));
    CHECK(enc.vector(1) == doctest::Approx(0.0));
  }
  SUBCASE("no articles is an error") {
    CHECK_THROWS_AS(encode_class("n00000001", {}, config), DataError);
  }
  SUBCASE("all articles OOV is an error") {
    CHECK_THROWS_AS(encode_class("n00000001", {{"T", "zzz qqq"}}, config), DataError);
  }
  SUBCASE("opposite vectors flag a degenerate zero class vector") {
    const EmbeddingTable signed_table = table_from_string("plus 1 0\nminus -1 0\n");
    EncoderConfig cfg2;
    cfg2.table = &signed_table;
    const EncodedClass enc =
        encode_class("n00000001", {{"A", "plus"}, {"B", "minus"}}, cfg2);
    CHECK(enc.vector.isZero(0.0));
    CHECK(enc.degenerate);
  }
  SUBCASE("k identical articles equal one (mean idempotence)") {
    const std::vector<Article> one = {{"T", "rear mirror"}};
    const std::vector<Article> three = {{"T", "rear mirror"},
                                        {"T2", "rear mirror"},
                                        {"T3", "rear mirror"}};
    const Vec v1 = encode_class("n00000001", one, config).vector;
    const Vec v3 = encode_class("n00000001", three, config).vector;
    CHECK((v1 - v3).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("embedding scale propagates linearly to class vectors") {
  const EmbeddingTable table = table_from_string("a 1 2\nb 3 4\n");
  const EmbeddingTable scaled = table_from_string("a 2 4\nb 6 8\n");
  EncoderConfig c1, c2;
  c1.table = &table;
  c2.table = &scaled;
  const std::vector<Article> arts = {{"T", "a b a"}};
  const Vec v1 = encode_class("n00000001", arts, c1).vector;
  const Vec v2 = encode_class("n00000001", arts, c2).vector;
  CHECK((2.0 * v1 - v2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("chunk-feature encoding aggregates per article then averages") {
  FeatureMatrix chunks;
  chunks.data.resize(3, 2);
  chunks.data << 2.0f, 0.0f,  // article A chunk 0
      0.0f, 2.0f,             // article A chunk 1
      4.0f, 4.0f;             // article B chunk 0
  chunks.ids = {"n00000001#A#0", "n00000001#A#1", "n00000001#B#0"};
  const ChunkIndex index = ChunkIndex::build(chunks);

  EncoderConfig config;
  config.source = EncoderSource::kChunkFeatures;
  config.chunk_features = &chunks;
  config.chunk_index = &index;

  SUBCASE("mean aggregation") {
    const EncodedClass enc = encode_class("n00000001", {}, config);
    CHECK(enc.n_articles == 2);
    // A: mean([2,0],[0,2]) = [1,1]; B: [4,4]; class: [2.5, 2.5]
    CHECK(enc.vector(0) == doctest::Approx(2.5));
    CHECK(enc.vector(1) == doctest::Approx(2.5));
  }
  SUBCASE("sum aggregation") {
    EncoderConfig cfg = config;
    cfg.chunk_agg = AggMode::kSum;
    const EncodedClass enc = encode_class("n00000001", {}, cfg);
    // A: [2,2]; B: [4,4]; class mean: [3,3]
    CHECK(enc.vector(0) == doctest::Approx(3.0));
  }
  SUBCASE("missing class is an error") {
    CHECK_THROWS_AS(encode_class("n00000099", {}, config), DataError);
  }
}

TEST_CASE("encode_split respects order, skipping, and the strict mode") {
  ClassRegistry reg;
  for (int i = 1; i <= 3; ++i) {
    ClassRecord rec;
    char wnid[16];
    std::snprintf(wnid, sizeof(wnid), "n%08d", i);
    rec.wnid = wnid;
    rec.phrases = {"c" + std::to_string(i)};
    reg.add(std::move(rec));
  }
  ArticleStore articles;
  articles.by_class["n00000001"] = {{"T1", "a"}};
  articles.by_class["n00000003"] = {{"T3", "b"}};
  const EmbeddingTable table = table_from_string("a 1 0\nb 0 1\n");
  EncoderConfig config;
  config.table = &table;

  SUBCASE("skip allowed produces a reduced matrix plus report") {
    const EncodeSplitResult r =
        encode_split(reg, articles, config, reg.order, /*allow_skip=*/true);
    CHECK(r.features.n() == 2);
    CHECK(r.features.ids == std::vector<std::string>{"n00000001", "n00000003"});
    REQUIRE(r.skipped.size() == 1);
    CHECK(r.skipped[0].first == "n00000002");
  }
  SUBCASE("skip disallowed names the first article-less class") {
    try {
      encode_split(reg, articles, config, reg.order, /*allow_skip=*/false);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("n00000002") != std::string::npos);
    }
  }
}

TEST_CASE("class name and gloss carriers build synthetic articles") {
  ClassRecord rec;
  rec.wnid = "n02129165";
  rec.phrases = {"lion", "king of beasts"};
  rec.gloss = "large predatory feline";
  const Article names = class_text_article(rec, true, false);
  CHECK(names.text == "lion. king of beasts");
  const Article both = class_text_article(rec, true, true);
  CHECK(both.text == "lion. king of beasts. large predatory feline");
  const Article gloss = class_text_article(rec, false, true);
  CHECK(gloss.text == "large predatory feline");
}
