#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zslforge/corpus.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace zslforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("zslforge_corpus_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ClassRegistry make_numbered_registry(int n) {
  ClassRegistry reg;
  for (int i = 1; i <= n; ++i) {
    ClassRecord rec;
    char wnid[16];
    std::snprintf(wnid, sizeof(wnid), "n%08d", i);
    rec.wnid = wnid;
    rec.phrases = {"class " + std::to_string(i)};
    reg.add(std::move(rec));
  }
  return reg;
}

}  // namespace

TEST_CASE("registry parses the lion line") {
  TempDir tmp;
  write_text_file(tmp.file("reg.tsv"),
                  "n02129165\tlion|king of beasts|Panthera leo\tlarge gregarious predatory "
                  "feline\tn02127808\n");
  const ClassRegistry reg = load_class_registry(tmp.file("reg.tsv"));
  REQUIRE(reg.order.size() == 1);
  const ClassRecord& rec = reg.at("n02129165");
  CHECK(rec.phrases == std::vector<std::string>{"lion", "king of beasts", "Panthera leo"});
  CHECK(rec.parents == std::vector<std::string>{"n02127808"});
  CHECK(rec.article_titles.empty());
}

TEST_CASE("empty registry file gives an empty registry") {
  TempDir tmp;
  write_text_file(tmp.file("reg.tsv"), "");
  const ClassRegistry reg = load_class_registry(tmp.file("reg.tsv"));
  CHECK(reg.order.empty());
  CHECK(reg.records.empty());
}

TEST_CASE("duplicate wnid error names both lines") {
  TempDir tmp;
  std::string content;
  for (int i = 1; i <= 10; ++i) {
    char wnid[16];
    std::snprintf(wnid, sizeof(wnid), "n%08d", (i == 9) ? 4 : i);  // line 9 repeats line 4
    content += std::string(wnid) + "\tphrase\tgloss\n";
  }
  write_text_file(tmp.file("reg.tsv"), content);
  try {
    load_class_registry(tmp.file("reg.tsv"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lines 4 and 9") != std::string::npos);
    CHECK(msg.find("n00000004") != std::string::npos);
  }
}

TEST_CASE("registry rejects malformed rows") {
  TempDir tmp;
  SUBCASE("bad wnid") {
    write_text_file(tmp.file("reg.tsv"), "x02129165\tlion\tgloss\n");
    CHECK_THROWS_AS(load_class_registry(tmp.file("reg.tsv")), FormatError);
  }
  SUBCASE("wnid with too few digits") {
    write_text_file(tmp.file("reg.tsv"), "n0212916\tlion\tgloss\n");
    CHECK_THROWS_AS(load_class_registry(tmp.file("reg.tsv")), FormatError);
  }
  SUBCASE("empty phrase list") {
    write_text_file(tmp.file("reg.tsv"), "n02129165\t\tgloss\n");
    CHECK_THROWS_AS(load_class_registry(tmp.file("reg.tsv")), FormatError);
  }
  SUBCASE("self parent") {
    write_text_file(tmp.file("reg.tsv"), "n02129165\tlion\tgloss\tn02129165\n");
    CHECK_THROWS_AS(load_class_registry(tmp.file("reg.tsv")), FormatError);
  }
  SUBCASE("duplicate parent") {
    write_text_file(tmp.file("reg.tsv"), "n02129165\tlion\tgloss\tn02127808 n02127808\n");
    CHECK_THROWS_AS(load_class_registry(tmp.file("reg.tsv")), FormatError);
  }
}

TEST_CASE("registry write/load round trip preserves order and fields") {
  TempDir tmp;
  ClassRegistry reg;
  for (int i = 5; i >= 1; --i) {
    ClassRecord rec;
    char wnid[16];
    std::snprintf(wnid, sizeof(wnid), "n%08d", i);
    rec.wnid = wnid;
    rec.phrases = {"phrase " + std::to_string(i), "alt"};
    rec.gloss = "gloss " + std::to_string(i);
    if (i > 1) {
      std::snprintf(wnid, sizeof(wnid), "n%08d", i - 1);
      rec.parents = {wnid};
    }
    rec.article_titles = {"Title " + std::to_string(i)};
    reg.add(std::move(rec));
  }
  write_class_registry(tmp.file("reg.tsv"), reg);
  const ClassRegistry loaded = load_class_registry(tmp.file("reg.tsv"));
  REQUIRE(loaded.order == reg.order);
  for (const std::string& w : reg.order) {
    CHECK(loaded.at(w).phrases == reg.at(w).phrases);
    CHECK(loaded.at(w).gloss == reg.at(w).gloss);
    CHECK(loaded.at(w).parents == reg.at(w).parents);
    CHECK(loaded.at(w).article_titles == reg.at(w).article_titles);
  }
}

TEST_CASE("split of 750 classes loads with order intact") {
  TempDir tmp;
  const ClassRegistry reg = make_numbered_registry(750);
  std::string content;
  for (const std::string& w : reg.order) content += w + "\n";
  write_text_file(tmp.file("train.txt"), content);
  const Split s = load_split(tmp.file("train.txt"), reg);
  CHECK(s.size() == 750);
  CHECK(s.name == "train");
  CHECK(s.wnids == reg.order);
}

TEST_CASE("single-line split") {
  TempDir tmp;
  const ClassRegistry reg = make_numbered_registry(3);
  write_text_file(tmp.file("s.txt"), "n00000002\n");
  const Split s = load_split(tmp.file("s.txt"), reg);
  CHECK(s.size() == 1);
}

TEST_CASE("split errors echo the offending wnid") {
  TempDir tmp;
  const ClassRegistry reg = make_numbered_registry(3);
  SUBCASE("unknown wnid") {
    write_text_file(tmp.file("s.txt"), "n00000001\nn09999999\n");
    try {
      load_split(tmp.file("s.txt"), reg);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("n09999999") != std::string::npos);
    }
  }
  SUBCASE("duplicate wnid") {
    write_text_file(tmp.file("s.txt"), "n00000001\nn00000001\n");
    CHECK_THROWS_AS(load_split(tmp.file("s.txt"), reg), DataError);
  }
}

TEST_CASE("split write/load is the identity on wnid order") {
  TempDir tmp;
  const ClassRegistry reg = make_numbered_registry(20);
  Split s{"custom", {"n00000007", "n00000003", "n00000015"}};
  write_split(tmp.file("s.txt"), s);
  const Split loaded = load_split(tmp.file("s.txt"), reg, "custom");
  CHECK(loaded.wnids == s.wnids);
}

TEST_CASE("disjointness check catches shared classes") {
  Split a{"train", {"n00000001", "n00000002"}};
  Split b{"val", {"n00000003"}};
  Split c{"mp500", {"n00000002"}};
  CHECK_NOTHROW(check_splits_disjoint({&a, &b}));
  CHECK_THROWS_AS(check_splits_disjoint({&a, &b, &c}), DataError);
}

TEST_CASE("feature matrix round trip is bit identical") {
  TempDir tmp;
  std::mt19937_64 rng(99);
  std::normal_distribution<float> dist;
  FeatureMatrix fm;
  fm.data.resize(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) fm.data(i, j) = dist(rng);
    fm.ids.push_back("id" + std::to_string(i));
  }
  write_feature_matrix(tmp.file("f.zslf"), fm);
  const FeatureMatrix loaded = load_feature_matrix(tmp.file("f.zslf"));
  CHECK(loaded.n() == 3);
  CHECK(loaded.dim() == 4);
  CHECK(loaded.ids == fm.ids);
  CHECK(std::memcmp(loaded.data.data(), fm.data.data(), 3 * 4 * sizeof(float)) == 0);
}

TEST_CASE("feature matrix round trip property over random sizes") {
  TempDir tmp;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size_dist(1, 12);
  std::normal_distribution<float> val;
  for (int iter = 0; iter < 20; ++iter) {
    FeatureMatrix fm;
    const int n = size_dist(rng), d = size_dist(rng);
    fm.data.resize(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) fm.data(i, j) = val(rng);
      fm.ids.push_back("s" + std::to_string(i));
    }
    write_feature_matrix(tmp.file("p.zslf"), fm);
    const FeatureMatrix loaded = load_feature_matrix(tmp.file("p.zslf"));
    REQUIRE(loaded.n() == n);
    CHECK(std::memcmp(loaded.data.data(), fm.data.data(),
                      static_cast<std::size_t>(n) * d * sizeof(float)) == 0);
  }
}

TEST_CASE("empty feature matrix") {
  TempDir tmp;
  FeatureMatrix fm;
  fm.data.resize(0, 7);
  write_feature_matrix(tmp.file("f.zslf"), fm);
  const FeatureMatrix loaded = load_feature_matrix(tmp.file("f.zslf"));
  CHECK(loaded.n() == 0);
  CHECK(loaded.ids.empty());
}

TEST_CASE("ZSLF corruption is rejected") {
  TempDir tmp;
  FeatureMatrix fm;
  fm.data.resize(2, 3);
  fm.data.setConstant(1.0f);
  fm.ids = {"a", "b"};
  write_feature_matrix(tmp.file("f.zslf"), fm);
  std::string bytes = read_text_file(tmp.file("f.zslf"));

  SUBCASE("magic mismatch") {
    bytes[0] = 'X';
    write_text_file(tmp.file("f.zslf"), bytes);
    CHECK_THROWS_AS(load_feature_matrix(tmp.file("f.zslf")), FormatError);
  }
  SUBCASE("truncated payload") {
    write_text_file(tmp.file("f.zslf"), bytes.substr(0, 16 + 5));
    try {
      load_feature_matrix(tmp.file("f.zslf"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("payload corruption breaks the checksum") {
    bytes[16] = static_cast<char>(bytes[16] + 1);
    write_text_file(tmp.file("f.zslf"), bytes);
    CHECK_THROWS_AS(load_feature_matrix(tmp.file("f.zslf")), FormatError);
  }
  SUBCASE("NaN entry reports the row") {
    fm.data(1, 2) = std::numeric_limits<float>::quiet_NaN();
    write_feature_matrix(tmp.file("g.zslf"), fm);
    try {
      load_feature_matrix(tmp.file("g.zslf"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
  }
  SUBCASE("ids count mismatch") {
    write_text_file(tmp.file("f.zslf.ids"), "a\n");
    CHECK_THROWS_AS(load_feature_matrix(tmp.file("f.zslf")), FormatError);
  }
}

TEST_CASE("articles JSONL round trip and validation") {
  TempDir tmp;
  SUBCASE("round trip") {
    ArticleStore store;
    store.by_class["n00000001"] = {{"Lion", "The lion is a large cat."},
                                   {"Panthera", "A genus."}};
    store.by_class["n00000002"] = {{"Tiger", "Another large cat."}};
    write_articles(tmp.file("a.jsonl"), store);
    const ArticleStore loaded = load_articles(tmp.file("a.jsonl"));
    REQUIRE(loaded.has("n00000001"));
    CHECK(loaded.articles("n00000001").size() == 2);
    CHECK(loaded.articles("n00000001")[0].title == "Lion");
    CHECK(loaded.articles("n00000002")[0].text == "Another large cat.");
  }
  SUBCASE("empty text rejected") {
    write_text_file(tmp.file("a.jsonl"),
                    R"({"wnid": "n00000001", "articles": [{"title": "T", "text": "   "}]})"
                    "\n");
    CHECK_THROWS_AS(load_articles(tmp.file("a.jsonl")), FormatError);
  }
  SUBCASE("duplicate titles within a class rejected") {
    write_text_file(
        tmp.file("a.jsonl"),
        R"({"wnid": "n00000001", "articles": [{"title": "T", "text": "x"}, {"title": "T", "text": "y"}]})"
        "\n");
    CHECK_THROWS_AS(load_articles(tmp.file("a.jsonl")), FormatError);
  }
}

TEST_CASE("hierarchy TSV merges into parents") {
  TempDir tmp;
  ClassRegistry reg = make_numbered_registry(3);
  write_text_file(tmp.file("h.tsv"), "n00000001\tn00000002\nn00000001\tn00000003\n");
  load_hierarchy_tsv(tmp.file("h.tsv"), reg);
  CHECK(reg.at("n00000001").parents ==
        std::vector<std::string>{"n00000002", "n00000003"});
}

TEST_CASE("validate_bundle surfaces the 489-of-500 situation") {
  const ClassRegistry reg = make_numbered_registry(500);
  Split mp500{"mp500", reg.order};
  ArticleStore articles;
  for (int i = 0; i < 489; ++i) articles.by_class[reg.order[i]].push_back({"T", "text"});
  const ValidationReport report =
      validate_bundle(reg, {&mp500}, nullptr, nullptr, &articles);
  CHECK(report.missing_articles.size() == 11);
  CHECK_FALSE(report.empty());
}

TEST_CASE("validate_bundle on a consistent bundle is empty and pure") {
  const ClassRegistry reg = make_numbered_registry(4);
  Split train{"train", {reg.order[0], reg.order[1]}};
  Split test{"test", {reg.order[2], reg.order[3]}};
  FeatureMatrix aux;
  aux.data.resize(4, 2);
  aux.data.setConstant(0.5f);
  aux.ids = reg.order;
  FeatureMatrix images;
  images.data.resize(4, 3);
  images.data.setZero();
  for (const std::string& w : reg.order) images.ids.push_back(w + "#0");
  ArticleStore articles;
  for (const std::string& w : reg.order) articles.by_class[w].push_back({"T", "text"});

  const ValidationReport a =
      validate_bundle(reg, {&train, &test}, &images, &aux, &articles, 3, 2);
  CHECK(a.empty());
  const ValidationReport b =
      validate_bundle(reg, {&train, &test}, &images, &aux, &articles, 3, 2);
  CHECK(a.lines() == b.lines());
}

TEST_CASE("validate_bundle flags dimension mismatches and overlaps") {
  const ClassRegistry reg = make_numbered_registry(3);
  Split train{"train", {reg.order[0], reg.order[1]}};
  Split val{"val", {reg.order[1]}};  // overlaps train
  FeatureMatrix aux;
  aux.data.resize(3, 300);
  aux.data.setZero();
  aux.ids = reg.order;
  const ValidationReport report =
      validate_bundle(reg, {&train, &val}, nullptr, &aux, nullptr, std::nullopt, 500);
  REQUIRE(report.dimension_mismatches.size() == 1);
  CHECK(report.dimension_mismatches[0].find("300") != std::string::npos);
  CHECK(report.split_overlaps.size() == 1);
}

TEST_CASE("sample ids carry the class wnid") {
  CHECK(sample_id_wnid("n00000001#17") == "n00000001");
  CHECK(sample_id_wnid("n00000001") == "n00000001");
}
