#include "zslforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

namespace zslforge {

using nlohmann::json;

json EvalReport::to_json() const {
  json j;
  j["class_order"] = class_order;
  j["ks"] = ks;
  j["n_present"] = n_present;
  j["n_total"] = n_total;
  json per = json::object();
  for (const auto& [k, accs] : per_class) {
    json m = json::object();
    for (std::size_t i = 0; i < class_order.size(); ++i) {
      if (samples_per_class[i] > 0) m[class_order[i]] = accs[i];
    }
    per["top" + std::to_string(k)] = std::move(m);
  }
  j["per_class"] = std::move(per);
  json means = json::object(), adjusted = json::object();
  for (const auto& [k, v] : mean_topk) means["top" + std::to_string(k)] = v;
  for (const auto& [k, v] : adjusted_mean_topk) adjusted["top" + std::to_string(k)] = v;
  j["mean"] = std::move(means);
  j["adjusted_mean"] = std::move(adjusted);
  json spc = json::object();
  for (std::size_t i = 0; i < class_order.size(); ++i) spc[class_order[i]] = samples_per_class[i];
  j["samples_per_class"] = std::move(spc);
  return j;
}

std::string EvalReport::confusion_csv() const {
  std::ostringstream out;
  out << "true";
  for (const std::string& w : class_order) out << ',' << w;
  out << '\n';
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    out << class_order[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < confusion.cols(); ++j) out << ',' << confusion(i, j);
    out << '\n';
  }
  return out.str();
}

EvalReport per_class_topk(const std::vector<std::vector<Eigen::Index>>& predictions,
                          const std::vector<int>& labels, const std::vector<int>& ks,
                          const std::vector<std::string>& class_order) {
  if (predictions.empty()) throw DataError("per_class_topk: empty prediction set");
  if (predictions.size() != labels.size())
    throw DataError("per_class_topk: predictions/labels mismatch");
  const int n_classes = static_cast<int>(class_order.size());
  int max_k = 0;
  for (int k : ks) {
    if (k < 1 || k > n_classes) throw DataError("per_class_topk: k out of range");
    max_k = std::max(max_k, k);
  }

  EvalReport report;
  report.class_order = class_order;
  report.ks = ks;
  report.samples_per_class.assign(static_cast<std::size_t>(n_classes), 0);
  std::map<int, std::vector<double>> hits;
  for (int k : ks) hits[k].assign(static_cast<std::size_t>(n_classes), 0.0);

  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const int y = labels[s];
    if (y < 0 || y >= n_classes)
      throw DataError("per_class_topk: label " + std::to_string(y) + " outside class order");
    if (static_cast<int>(predictions[s].size()) < max_k)
      throw DataError("per_class_topk: prediction list shorter than max k");
    ++report.samples_per_class[static_cast<std::size_t>(y)];
    // rank of the true label within the prediction list (if present)
    int rank = -1;
    for (std::size_t i = 0; i < predictions[s].size(); ++i) {
      if (predictions[s][i] == y) {
        rank = static_cast<int>(i);
        break;
      }
    }
    for (int k : ks) {
      if (rank >= 0 && rank < k) hits[k][static_cast<std::size_t>(y)] += 1.0;
    }
  }

  for (int c = 0; c < n_classes; ++c) {
    if (report.samples_per_class[static_cast<std::size_t>(c)] > 0) ++report.n_present;
  }
  report.n_total = report.n_present;
  for (int k : ks) {
    std::vector<double> accs(static_cast<std::size_t>(n_classes),
                             std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
      const int n = report.samples_per_class[static_cast<std::size_t>(c)];
      if (n == 0) continue;
      accs[static_cast<std::size_t>(c)] = hits[k][static_cast<std::size_t>(c)] / n;
      sum += accs[static_cast<std::size_t>(c)];
    }
    report.per_class[k] = std::move(accs);
    report.mean_topk[k] = report.n_present > 0 ? sum / report.n_present : 0.0;
  }

  std::vector<Eigen::Index> top1(predictions.size());
  for (std::size_t s = 0; s < predictions.size(); ++s) top1[s] = predictions[s].front();
  report.confusion = confusion_matrix(top1, labels, n_classes);
  return report;
}

double adjust_for_missing(double mean_present, int n_present, int n_total) {
  if (n_total <= 0) throw DataError("adjust_for_missing: n_total must be > 0");
  if (n_present > n_total) throw DataError("adjust_for_missing: n_present > n_total");
  return mean_present * static_cast<double>(n_present) / static_cast<double>(n_total);
}

Mat confusion_matrix(const std::vector<Eigen::Index>& top1, const std::vector<int>& labels,
                     int n_classes) {
  if (top1.size() != labels.size()) throw DataError("confusion_matrix: size mismatch");
  Mat counts = Mat::Zero(n_classes, n_classes);
  for (std::size_t s = 0; s < top1.size(); ++s) {
    const int y = labels[s];
    const Eigen::Index p = top1[s];
    if (y < 0 || y >= n_classes || p < 0 || p >= n_classes)
      throw DataError("confusion_matrix: id outside class order");
    counts(y, p) += 1.0;
  }
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const double row_sum = counts.row(r).sum();
    if (row_sum > 0.0) counts.row(r) /= row_sum;  // classes without samples keep a zero row
  }
  return counts;
}

const std::string& CategoryPartition::assign(const std::string& wnid) const {
  static const std::string remaining = kRemainingGroup;
  auto it = group_of.find(wnid);
  return it == group_of.end() ? remaining : it->second;
}

std::vector<std::string> CategoryPartition::members(const std::string& group) const {
  for (const auto& [name, m] : groups) {
    if (name == group) return m;
  }
  throw DataError("partition: unknown group '" + group + "'");
}

namespace {

// Depth-first walk over parent edges with a gray set for cycle detection.
void check_acyclic(const ClassRegistry& registry) {
  enum class Color { kWhite, kGray, kBlack };
  std::unordered_map<std::string, Color> color;
  for (const std::string& w : registry.order) color[w] = Color::kWhite;

  for (const std::string& start : registry.order) {
    if (color[start] != Color::kWhite) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
    color[start] = Color::kGray;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const ClassRecord* rec = registry.contains(node) ? &registry.at(node) : nullptr;
      if (rec == nullptr || next >= rec->parents.size()) {
        color[node] = Color::kBlack;
        stack.pop_back();
        continue;
      }
      const std::string parent = rec->parents[next++];
      auto it = color.find(parent);
      if (it == color.end() || it->second == Color::kWhite) {
        color[parent] = Color::kGray;
        stack.emplace_back(parent, 0);
      } else if (it->second == Color::kGray) {
        throw DataError("hierarchy cycle detected at '" + parent + "'");
      }
    }
  }
}

}  // namespace

CategoryPartition partition_by_category(const ClassRegistry& registry,
                                        const std::vector<CategoryGroup>& groups) {
  check_acyclic(registry);

  std::unordered_set<std::string> known_ids(registry.order.begin(), registry.order.end());
  for (const std::string& w : registry.order) {
    for (const std::string& p : registry.at(w).parents) known_ids.insert(p);
  }
  for (const CategoryGroup& g : groups) {
    for (const std::string& root : g.roots) {
      if (!known_ids.count(root))
        throw DataError("partition: root '" + root + "' not present in hierarchy");
    }
  }

  CategoryPartition part;
  for (const CategoryGroup& g : groups) part.groups.emplace_back(g.name, std::vector<std::string>{});
  part.groups.emplace_back(kRemainingGroup, std::vector<std::string>{});

  for (const std::string& wnid : registry.order) {
    // collect all ancestors (wnid included: a root classifies itself)
    std::unordered_set<std::string> ancestors;
    std::vector<std::string> frontier{wnid};
    ancestors.insert(wnid);
    while (!frontier.empty()) {
      const std::string node = frontier.back();
      frontier.pop_back();
      if (!registry.contains(node)) continue;
      for (const std::string& p : registry.at(node).parents) {
        if (ancestors.insert(p).second) frontier.push_back(p);
      }
    }
    std::string assigned = kRemainingGroup;
    for (const CategoryGroup& g : groups) {  // first listed group wins
      bool hit = false;
      for (const std::string& root : g.roots) {
        if (ancestors.count(root)) {
          hit = true;
          break;
        }
      }
      if (hit) {
        assigned = g.name;
        break;
      }
    }
    part.group_of[wnid] = assigned;
    for (auto& [name, m] : part.groups) {
      if (name == assigned) {
        m.push_back(wnid);
        break;
      }
    }
  }
  return part;
}

Split exclusion_split(const Split& split, const CategoryPartition& partition,
                      ExclusionMode mode, const std::string& group,
                      std::optional<int> count, std::uint64_t seed) {
  std::unordered_set<std::string> in_group;
  for (const std::string& w : partition.members(group)) in_group.insert(w);

  Split out;
  if (mode == ExclusionMode::kGroup) {
    out.name = split.name + "-minus-" + group;
    for (const std::string& w : split.wnids) {
      if (!in_group.count(w)) out.wnids.push_back(w);
    }
    return out;
  }

  // kRandomMatched: remove a random subset of the complement of the group.
  std::vector<std::string> eligible;
  int group_size_in_split = 0;
  for (const std::string& w : split.wnids) {
    if (in_group.count(w)) {
      ++group_size_in_split;
    } else {
      eligible.push_back(w);
    }
  }
  const int n_remove = count.value_or(group_size_in_split);
  if (n_remove > static_cast<int>(eligible.size()))
    throw DataError("exclusion_split: count " + std::to_string(n_remove) +
                    " exceeds eligible pool " + std::to_string(eligible.size()));
  Rng rng = make_rng(derive_seed(seed, 0xE8c));
  std::vector<std::string> removed;
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(removed),
              static_cast<std::size_t>(n_remove), rng);
  std::unordered_set<std::string> removed_set(removed.begin(), removed.end());

  out.name = split.name + "-minus-random-non-" + group;
  for (const std::string& w : split.wnids) {
    if (!removed_set.count(w)) out.wnids.push_back(w);
  }
  return out;
}

json OverlapSubsets::sizes() const {
  return json{{"with_articles", with_articles.wnids.size()},
              {"same_article_set", same_article_set.wnids.size()},
              {"any_article_overlap", any_article_overlap.wnids.size()},
              {"phrase_overlap", phrase_overlap.wnids.size()},
              {"union_set_phrase", union_set_phrase.wnids.size()}};
}

namespace {

std::string normalize_phrase(const std::string& s) { return lowercase(collapse_whitespace(s)); }

}  // namespace

OverlapSubsets overlap_subsets(const ClassRegistry& registry,
                               const std::vector<std::string>& train_wnids,
                               const std::vector<std::string>& test_wnids) {
  // Train-side lookup structures.
  std::set<std::set<std::string>> train_title_sets;  // non-empty sets only
  std::unordered_set<std::string> train_titles;
  std::unordered_set<std::string> train_phrases;
  for (const std::string& w : train_wnids) {
    const ClassRecord& rec = registry.at(w);
    if (!rec.article_titles.empty())
      train_title_sets.insert(
          std::set<std::string>(rec.article_titles.begin(), rec.article_titles.end()));
    for (const std::string& t : rec.article_titles) train_titles.insert(t);
    for (const std::string& p : rec.phrases) train_phrases.insert(normalize_phrase(p));
  }

  OverlapSubsets out;
  out.with_articles.name = "test-with-articles";
  out.same_article_set.name = "test-minus-same-article-set";
  out.any_article_overlap.name = "test-minus-article-overlap";
  out.phrase_overlap.name = "test-minus-phrase-overlap";
  out.union_set_phrase.name = "test-minus-set-or-phrase";

  for (const std::string& w : test_wnids) {
    const ClassRecord& rec = registry.at(w);
    const bool has_articles = !rec.article_titles.empty();
    if (has_articles) out.with_articles.wnids.push_back(w);

    bool same_set = false;
    bool shares_title = false;
    if (has_articles) {
      same_set = train_title_sets.count(
                     std::set<std::string>(rec.article_titles.begin(), rec.article_titles.end()))
                 != 0;
      for (const std::string& t : rec.article_titles) {
        if (train_titles.count(t)) {
          shares_title = true;
          break;
        }
      }
    }
    bool shares_phrase = false;
    for (const std::string& p : rec.phrases) {
      if (train_phrases.count(normalize_phrase(p))) {
        shares_phrase = true;
        break;
      }
    }

    if (!same_set) out.same_article_set.wnids.push_back(w);
    if (!shares_title) out.any_article_overlap.wnids.push_back(w);
    if (!shares_phrase) out.phrase_overlap.wnids.push_back(w);
    if (!same_set && !shares_phrase) out.union_set_phrase.wnids.push_back(w);
  }
  return out;
}

std::string LengthAnalysis::to_tsv() const {
  std::ostringstream out;
  out << "wnid\tgroup\tlog10_chars\ttop5_acc\n";
  for (const LengthPoint& p : points) {
    out << p.wnid << '\t' << p.group << '\t' << p.log10_chars << '\t' << p.top5_acc << '\n';
  }
  return out.str();
}

LengthAnalysis length_vs_accuracy(const std::map<std::string, double>& top5_by_class,
                                  const ArticleStore& articles,
                                  const CategoryPartition& partition) {
  LengthAnalysis out;
  for (const auto& [wnid, acc] : top5_by_class) {
    std::size_t total_chars = 0;
    if (articles.has(wnid)) {
      for (const Article& a : articles.articles(wnid)) total_chars += a.text.size();
    }
    if (total_chars == 0)
      throw DataError("length_vs_accuracy: class " + wnid + " has zero total characters");
    LengthPoint p;
    p.wnid = wnid;
    p.group = partition.assign(wnid);
    p.log10_chars = std::log10(static_cast<double>(total_chars));
    p.top5_acc = acc;
    out.points.push_back(std::move(p));
  }

  std::map<std::string, std::vector<const LengthPoint*>> by_group;
  for (const LengthPoint& p : out.points) by_group[p.group].push_back(&p);
  for (const auto& [group, pts] : by_group) {
    LengthGroupStats st;
    st.group = group;
    st.n = static_cast<int>(pts.size());
    double mx = 0.0, my = 0.0;
    for (const LengthPoint* p : pts) {
      mx += p->log10_chars;
      my += p->top5_acc;
    }
    mx /= st.n;
    my /= st.n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const LengthPoint* p : pts) {
      sxx += (p->log10_chars - mx) * (p->log10_chars - mx);
      syy += (p->top5_acc - my) * (p->top5_acc - my);
      sxy += (p->log10_chars - mx) * (p->top5_acc - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
      st.pearson = 0.0;  // degenerate variance reported as 0, flagged
      st.well_defined = false;
    } else {
      st.pearson = sxy / std::sqrt(sxx * syy);
    }
    out.group_stats.push_back(std::move(st));
  }
  return out;
}

}  // namespace zslforge
