#ifndef ZSLFORGE_MATCHER_HPP
#define ZSLFORGE_MATCHER_HPP

#include "zslforge/common.hpp"
#include "zslforge/corpus.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace zslforge {

struct NormalizedTitle {
  std::string base;           // lowercased, whitespace collapsed, parentheticals removed
  std::string disambiguator;  // stripped trailing "(...)" contents, if any
};

// Lowercase, underscores to spaces, whitespace collapsed; trailing
// parenthetical disambiguators are stripped and retained separately.
// Idempotent on the base.
NormalizedTitle normalize_title(const std::string& s);

struct TitleEntry {
  std::string title;                    // canonical page title as listed
  std::string redirect;                 // empty when the page is not a redirect
  std::vector<std::string> categories;
};

struct TitleIndex {
  std::vector<TitleEntry> entries;
  std::unordered_map<std::string, std::size_t> by_title;           // exact title
  std::unordered_map<std::string, std::vector<std::size_t>> by_token;  // token -> entries
  // character trigrams of the normalized base, for spelling-variant recall
  std::unordered_map<std::string, std::vector<std::size_t>> by_trigram;

  // Follows redirect chains; flags unresolved or cyclic chains.
  const TitleEntry* resolve(std::size_t entry_idx, bool* flagged = nullptr) const;
};

std::vector<std::string> title_trigrams(const std::string& normalized_base);

// TSV: title <TAB> redirect_target_or_dash <TAB> ;-joined categories
TitleIndex load_title_index(const std::string& path);

struct MatchCandidate {
  std::string wnid;
  std::string title;  // resolved canonical title
  double score = 0.0;
  double phrase_similarity = 0.0;
  double ancestor_agreement = 0.0;
  std::string matched_phrase;
};

struct MatchWeights {
  double phrase = 0.7;
  double ancestors = 0.3;
};

// score = w1 * phrase similarity + w2 * ancestor/category token Jaccard;
// candidates are pages sharing at least one token with a class phrase,
// sorted by descending score (ties: title ascending).
std::vector<MatchCandidate> candidate_matches(const ClassRecord& record,
                                              const ClassRegistry& registry,
                                              const TitleIndex& index,
                                              const MatchWeights& weights = {});

struct ReviewRow {
  std::string wnid;
  std::vector<std::string> phrases;
  std::vector<std::string> titles;  // proposed (or human-corrected) titles
  double score = 0.0;
  std::string status;  // "auto" or "review"
};

inline constexpr double kReviewMargin = 0.2;

// status is auto iff the top score clears the threshold and leads the
// runner-up by at least kReviewMargin.
std::vector<ReviewRow> propose_matches(const ClassRegistry& registry, const TitleIndex& index,
                                       double threshold, const MatchWeights& weights = {});

// TSV: wnid <TAB> phrase|... <TAB> title;... <TAB> score <TAB> status
std::string review_file_tsv(const std::vector<ReviewRow>& rows);
std::vector<ReviewRow> parse_review_file(const std::string& path);

// Applies accepted rows (status "auto" or "accept") to article_titles.
// Returns the number of classes updated.
int ingest_review(ClassRegistry& registry, const std::vector<ReviewRow>& rows);

}  // namespace zslforge

#endif  // ZSLFORGE_MATCHER_HPP
