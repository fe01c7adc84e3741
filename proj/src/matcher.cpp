#include "zslforge/matcher.hpp"

#include "zslforge/text_encoding.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

namespace zslforge {

NormalizedTitle normalize_title(const std::string& s) {
  std::string work = s;
  std::replace(work.begin(), work.end(), '_', ' ');
  work = collapse_whitespace(work);

  std::vector<std::string> stripped;
  while (!work.empty() && work.back() == ')') {
    const auto open = work.find_last_of('(');
    if (open == std::string::npos || open == 0) break;
    const std::string inner = trim(work.substr(open + 1, work.size() - open - 2));
    const std::string base = trim(work.substr(0, open));
    if (base.empty()) break;
    stripped.push_back(inner);
    work = collapse_whitespace(base);
  }

  NormalizedTitle out;
  out.base = lowercase(work);
  std::reverse(stripped.begin(), stripped.end());
  out.disambiguator = lowercase(join(stripped, " "));
  return out;
}

const TitleEntry* TitleIndex::resolve(std::size_t entry_idx, bool* flagged) const {
  if (flagged != nullptr) *flagged = false;
  std::unordered_set<std::size_t> seen;
  std::size_t cur = entry_idx;
  while (!entries[cur].redirect.empty()) {
    if (!seen.insert(cur).second) {
      if (flagged != nullptr) *flagged = true;  // redirect cycle
      return &entries[cur];
    }
    auto it = by_title.find(entries[cur].redirect);
    if (it == by_title.end()) {
      if (flagged != nullptr) *flagged = true;  // dangling redirect
      return &entries[cur];
    }
    cur = it->second;
  }
  return &entries[cur];
}

TitleIndex load_title_index(const std::string& path) {
  TitleIndex index;
  const std::string content = read_text_file(path);
  std::vector<std::string> lines = split(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw FormatError("title index line " + std::to_string(i + 1) +
                        ": expected title<TAB>redirect<TAB>categories");
    TitleEntry entry;
    entry.title = trim(cols[0]);
    const std::string redirect = trim(cols[1]);
    if (redirect != "-") entry.redirect = redirect;
    for (const std::string& c : split(cols[2], ';')) {
      if (!trim(c).empty()) entry.categories.push_back(trim(c));
    }
    const std::size_t idx = index.entries.size();
    if (!index.by_title.emplace(entry.title, idx).second)
      throw FormatError("title index line " + std::to_string(i + 1) + ": duplicate title '" +
                        entry.title + "'");
    const std::string base = normalize_title(entry.title).base;
    for (const std::string& tok : tokenize(base)) index.by_token[tok].push_back(idx);
    for (const std::string& tri : title_trigrams(base)) index.by_trigram[tri].push_back(idx);
    index.entries.push_back(std::move(entry));
  }
  return index;
}

std::vector<std::string> title_trigrams(const std::string& normalized_base) {
  std::vector<std::string> out;
  if (normalized_base.size() < 3) return out;
  for (std::size_t i = 0; i + 3 <= normalized_base.size(); ++i)
    out.push_back(normalized_base.substr(i, 3));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double edit_similarity(const std::string& a, const std::string& b) {
  if (a == b) return 1.0;
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  const double d = static_cast<double>(levenshtein(a, b));
  return 1.0 - d / static_cast<double>(longest);
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const std::string& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::set<std::string> ancestor_phrase_tokens(const ClassRecord& record,
                                             const ClassRegistry& registry) {
  std::set<std::string> tokens;
  std::unordered_set<std::string> visited{record.wnid};
  std::vector<std::string> frontier(record.parents.begin(), record.parents.end());
  while (!frontier.empty()) {
    const std::string node = frontier.back();
    frontier.pop_back();
    if (!visited.insert(node).second) continue;
    if (!registry.contains(node)) continue;
    const ClassRecord& rec = registry.at(node);
    for (const std::string& phrase : rec.phrases) {
      for (const std::string& tok : tokenize(phrase)) tokens.insert(tok);
    }
    for (const std::string& p : rec.parents) frontier.push_back(p);
  }
  return tokens;
}

}  // namespace

std::vector<MatchCandidate> candidate_matches(const ClassRecord& record,
                                              const ClassRegistry& registry,
                                              const TitleIndex& index,
                                              const MatchWeights& weights) {
  if (index.entries.empty()) throw DataError("candidate_matches: empty title index");

  const std::set<std::string> ancestors = ancestor_phrase_tokens(record, registry);

  // Pages sharing a token with any class phrase, plus spelling variants
  // reached through two or more shared character trigrams.
  std::set<std::size_t> entry_ids;
  std::vector<NormalizedTitle> norm_phrases;
  for (const std::string& phrase : record.phrases) {
    norm_phrases.push_back(normalize_title(phrase));
    for (const std::string& tok : tokenize(phrase)) {
      auto it = index.by_token.find(tok);
      if (it == index.by_token.end()) continue;
      entry_ids.insert(it->second.begin(), it->second.end());
    }
    std::unordered_map<std::size_t, int> tri_hits;
    for (const std::string& tri : title_trigrams(norm_phrases.back().base)) {
      auto it = index.by_trigram.find(tri);
      if (it == index.by_trigram.end()) continue;
      for (std::size_t id : it->second) ++tri_hits[id];
    }
    for (const auto& [id, hits] : tri_hits) {
      if (hits >= 2) entry_ids.insert(id);
    }
  }

  // Keep the best-scoring candidate per resolved canonical page.
  std::map<std::string, MatchCandidate> best;
  for (std::size_t id : entry_ids) {
    const TitleEntry& source = index.entries[id];
    const TitleEntry* target = index.resolve(id);

    double phrase_sim = 0.0;
    std::string matched_phrase;
    const NormalizedTitle source_norm = normalize_title(source.title);
    const NormalizedTitle target_norm = normalize_title(target->title);
    for (std::size_t p = 0; p < norm_phrases.size(); ++p) {
      const double sim = std::max(edit_similarity(norm_phrases[p].base, source_norm.base),
                                  edit_similarity(norm_phrases[p].base, target_norm.base));
      if (sim > phrase_sim) {
        phrase_sim = sim;
        matched_phrase = record.phrases[p];
      }
    }

    std::set<std::string> page_tokens;
    for (const std::string& cat : target->categories) {
      for (const std::string& tok : tokenize(cat)) page_tokens.insert(tok);
    }
    for (const std::string& tok : tokenize(source_norm.disambiguator)) page_tokens.insert(tok);
    for (const std::string& tok : tokenize(target_norm.disambiguator)) page_tokens.insert(tok);
    const double agreement = jaccard(ancestors, page_tokens);

    MatchCandidate cand;
    cand.wnid = record.wnid;
    cand.title = target->title;
    cand.phrase_similarity = phrase_sim;
    cand.ancestor_agreement = agreement;
    cand.matched_phrase = matched_phrase;
    cand.score = weights.phrase * phrase_sim + weights.ancestors * agreement;

    auto it = best.find(cand.title);
    if (it == best.end() || cand.score > it->second.score) best[cand.title] = std::move(cand);
  }

  std::vector<MatchCandidate> out;
  out.reserve(best.size());
  for (auto& [title, cand] : best) out.push_back(std::move(cand));
  std::sort(out.begin(), out.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.title < b.title;
  });
  return out;
}

std::vector<ReviewRow> propose_matches(const ClassRegistry& registry, const TitleIndex& index,
                                       double threshold, const MatchWeights& weights) {
  std::vector<ReviewRow> rows;
  rows.reserve(registry.order.size());
  for (const std::string& wnid : registry.order) {
    const ClassRecord& rec = registry.at(wnid);
    const std::vector<MatchCandidate> cands = candidate_matches(rec, registry, index, weights);

    ReviewRow row;
    row.wnid = wnid;
    row.phrases = rec.phrases;
    if (cands.empty()) {
      row.status = "review";
      rows.push_back(std::move(row));
      continue;
    }
    row.score = cands.front().score;
    const bool clears_threshold = cands.front().score >= threshold;
    const bool clear_margin =
        cands.size() < 2 || cands.front().score - cands[1].score >= kReviewMargin;
    if (clears_threshold && clear_margin) {
      row.status = "auto";
      row.titles.push_back(cands.front().title);
    } else {
      row.status = "review";
      // Offer everything above the threshold (or the best guess) to the reviewer.
      for (const MatchCandidate& c : cands) {
        if (c.score >= threshold) row.titles.push_back(c.title);
      }
      if (row.titles.empty()) row.titles.push_back(cands.front().title);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string review_file_tsv(const std::vector<ReviewRow>& rows) {
  std::string out = "wnid\tphrases\ttitles\tscore\tstatus\n";
  for (const ReviewRow& row : rows) {
    out += row.wnid + "\t" + join(row.phrases, "|") + "\t" + join(row.titles, ";") + "\t" +
           std::to_string(row.score) + "\t" + row.status + "\n";
  }
  return out;
}

std::vector<ReviewRow> parse_review_file(const std::string& path) {
  std::vector<std::string> lines = split(read_text_file(path), '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::vector<ReviewRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (i == 0 && line.rfind("wnid\t", 0) == 0) continue;  // header
    const auto cols = split(line, '\t');
    if (cols.size() != 5)
      throw FormatError("review file line " + std::to_string(i + 1) + ": expected 5 columns");
    ReviewRow row;
    row.wnid = trim(cols[0]);
    for (const std::string& p : split(cols[1], '|')) {
      if (!trim(p).empty()) row.phrases.push_back(trim(p));
    }
    for (const std::string& t : split(cols[2], ';')) {
      if (!trim(t).empty()) row.titles.push_back(trim(t));
    }
    try {
      row.score = cols[3].empty() ? 0.0 : std::stod(cols[3]);
    } catch (const std::exception&) {
      throw FormatError("review file line " + std::to_string(i + 1) + ": bad score");
    }
    row.status = trim(cols[4]);
    rows.push_back(std::move(row));
  }
  return rows;
}

int ingest_review(ClassRegistry& registry, const std::vector<ReviewRow>& rows) {
  int updated = 0;
  for (const ReviewRow& row : rows) {
    if (row.status != "auto" && row.status != "accept") continue;
    if (!registry.contains(row.wnid))
      throw DataError("review ingest: unknown wnid " + row.wnid);
    registry.at(row.wnid).article_titles = row.titles;
    ++updated;
  }
  return updated;
}

}  // namespace zslforge
