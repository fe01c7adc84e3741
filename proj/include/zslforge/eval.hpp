#ifndef ZSLFORGE_EVAL_HPP
#define ZSLFORGE_EVAL_HPP

#include "zslforge/common.hpp"
#include "zslforge/corpus.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zslforge {

struct EvalReport {
  std::vector<std::string> class_order;            // evaluable classes
  std::vector<int> ks;                             // requested k values
  std::map<int, std::vector<double>> per_class;    // k -> accuracy per class (NaN if no samples)
  std::vector<int> samples_per_class;
  std::map<int, double> mean_topk;                 // unweighted mean over classes with samples
  int n_present = 0;                               // classes with >= 1 sample
  int n_total = 0;                                 // adjustment denominator
  std::map<int, double> adjusted_mean_topk;        // mean * n_present / n_total
  Mat confusion;                                   // K x K row-normalized, zero rows allowed

  nlohmann::json to_json() const;
  std::string confusion_csv() const;
};

// predictions[i] is the ranked candidate list for sample i (best first, at
// least max(ks) entries); labels index into class_order.
EvalReport per_class_topk(const std::vector<std::vector<Eigen::Index>>& predictions,
                          const std::vector<int>& labels, const std::vector<int>& ks,
                          const std::vector<std::string>& class_order);

// mean_present * n_present / n_total — the missing-class convention of
// scoring absent classes as zero.
double adjust_for_missing(double mean_present, int n_present, int n_total);

Mat confusion_matrix(const std::vector<Eigen::Index>& top1, const std::vector<int>& labels,
                     int n_classes);

struct CategoryGroup {
  std::string name;
  std::vector<std::string> roots;
};

struct CategoryPartition {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;  // name -> members
  std::unordered_map<std::string, std::string> group_of;                 // wnid -> group name

  const std::string& assign(const std::string& wnid) const;
  std::vector<std::string> members(const std::string& group) const;
};

inline constexpr const char* kRemainingGroup = "remaining";

// Walks hypernym chains upward; a class joins the first listed group whose
// root appears among its ancestors, everything else lands in "remaining".
// Throws DataError on a hierarchy cycle or an unknown root.
CategoryPartition partition_by_category(const ClassRegistry& registry,
                                        const std::vector<CategoryGroup>& groups);

enum class ExclusionMode { kGroup, kRandomMatched };

// kGroup removes every split member of the group. kRandomMatched removes a
// uniform random subset of the split outside the protected group, matched in
// size (or `count` when given).
Split exclusion_split(const Split& split, const CategoryPartition& partition,
                      ExclusionMode mode, const std::string& group,
                      std::optional<int> count, std::uint64_t seed);

struct OverlapSubsets {
  Split with_articles;        // test classes that have any matched article
  Split same_article_set;     // drop: article-title set equal to a train class's set
  Split any_article_overlap;  // drop: shares >= 1 article title with any train class
  Split phrase_overlap;       // drop: shares >= 1 normalized phrase with any train class
  Split union_set_phrase;     // drop: union of the set-equality and phrase criteria

  nlohmann::json sizes() const;
};

OverlapSubsets overlap_subsets(const ClassRegistry& registry,
                               const std::vector<std::string>& train_wnids,
                               const std::vector<std::string>& test_wnids);

struct LengthPoint {
  std::string wnid;
  std::string group;
  double log10_chars = 0.0;
  double top5_acc = 0.0;
};

struct LengthGroupStats {
  std::string group;
  int n = 0;
  double pearson = 0.0;
  bool well_defined = true;  // false when either variance vanishes
};

struct LengthAnalysis {
  std::vector<LengthPoint> points;
  std::vector<LengthGroupStats> group_stats;

  std::string to_tsv() const;
};

// x = log10 of the summed article character counts per class. Classes in the
// accuracy map must have article text; zero total characters is an error.
LengthAnalysis length_vs_accuracy(const std::map<std::string, double>& top5_by_class,
                                  const ArticleStore& articles,
                                  const CategoryPartition& partition);

}  // namespace zslforge

#endif  // ZSLFORGE_EVAL_HPP
