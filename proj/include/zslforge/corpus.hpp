#ifndef ZSLFORGE_CORPUS_HPP
#define ZSLFORGE_CORPUS_HPP

#include "zslforge/common.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace zslforge {

// One ImageNet class: WordNet id, class phrases, gloss, hypernym parents and
// the Wikipedia titles matched to it (possibly none).
struct ClassRecord {
  std::string wnid;
  std::vector<std::string> phrases;
  std::string gloss;
  std::vector<std::string> parents;
  std::vector<std::string> article_titles;
};

bool is_valid_wnid(const std::string& s);

struct ClassRegistry {
  std::unordered_map<std::string, ClassRecord> records;
  std::vector<std::string> order;  // file order, permutation of map keys

  bool contains(const std::string& wnid) const { return records.count(wnid) != 0; }
  const ClassRecord& at(const std::string& wnid) const;
  ClassRecord& at(const std::string& wnid);
  void add(ClassRecord rec);
  // Parent wnids referenced but not present in the registry.
  std::vector<std::string> external_parents() const;
};

// Registry carrier: TSV of
//   wnid <TAB> phrase|phrase|... <TAB> gloss [<TAB> parent parent ... [<TAB> title|title|...]]
ClassRegistry load_class_registry(const std::string& path);
void write_class_registry(const std::string& path, const ClassRegistry& registry);

struct Split {
  std::string name;
  std::vector<std::string> wnids;

  std::size_t size() const { return wnids.size(); }
};

// One wnid per line; every wnid must resolve in the registry.
Split load_split(const std::string& path, const ClassRegistry& registry,
                 const std::string& name = "");
void write_split(const std::string& path, const Split& split);
void check_splits_disjoint(const std::vector<const Split*>& splits);

// Dense feature rows aligned to an ordered id list. ids are wnids for
// class-level features or "wnid#index" for per-image samples.
struct FeatureMatrix {
  std::vector<std::string> ids;
  MatF data;  // n x dim

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
  // Index of id, or -1.
  Eigen::Index index_of(const std::string& id) const;
  Mat as_f64() const { return data.cast<double>(); }

 private:
  mutable std::unordered_map<std::string, Eigen::Index> index_;
};

// ZSLF binary format, little-endian:
//   bytes 0-3  magic "ZSLF"
//   u32        version (= 1)
//   u32        n rows
//   u32        dim
//   n*dim f32  payload, row-major
//   u32        CRC32 of the payload bytes
// The ids live in a sidecar "<path>.ids": one id per line, UTF-8, LF.
FeatureMatrix load_feature_matrix(const std::string& path);
void write_feature_matrix(const std::string& path, const FeatureMatrix& fm);

struct Article {
  std::string title;
  std::string text;
};

// JSONL: {"wnid": ..., "articles": [{"title": ..., "text": ...}]}
struct ArticleStore {
  std::unordered_map<std::string, std::vector<Article>> by_class;

  bool has(const std::string& wnid) const;
  const std::vector<Article>& articles(const std::string& wnid) const;
};

ArticleStore load_articles(const std::string& path);
void write_articles(const std::string& path, const ArticleStore& store);

// Optional standalone hierarchy: TSV "child<TAB>parent", merged into parents.
void load_hierarchy_tsv(const std::string& path, ClassRegistry& registry);

// All findings are non-fatal report entries; an empty report means the bundle
// is fully consistent.
struct ValidationReport {
  std::vector<std::string> missing_aux;       // classes with no auxiliary feature row
  std::vector<std::string> missing_articles;  // classes with no matched article
  std::vector<std::string> dimension_mismatches;
  std::vector<std::string> split_overlaps;
  std::vector<std::string> unknown_ids;  // feature ids not resolvable in the registry

  bool empty() const;
  std::vector<std::string> lines() const;
};

ValidationReport validate_bundle(const ClassRegistry& registry,
                                 const std::vector<const Split*>& splits,
                                 const FeatureMatrix* image_feats,
                                 const FeatureMatrix* aux_feats, const ArticleStore* articles,
                                 std::optional<int> expected_image_dim = std::nullopt,
                                 std::optional<int> expected_aux_dim = std::nullopt);

// Sample ids are "wnid#index"; returns the wnid part.
std::string sample_id_wnid(const std::string& sample_id);

}  // namespace zslforge

#endif  // ZSLFORGE_CORPUS_HPP
