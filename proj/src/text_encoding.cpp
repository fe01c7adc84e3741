#include "zslforge/text_encoding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace zslforge {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

Eigen::Index EmbeddingTable::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? -1 : it->second;
}

EmbeddingTable load_embedding_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding table: " + path);

  EmbeddingTable table;
  std::vector<float> values;
  Eigen::Index dim = -1;
  std::size_t n_rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first_space = line.find(' ');
    if (first_space == std::string::npos || first_space == 0)
      throw FormatError("embedding table line " + std::to_string(lineno) + ": no vector");
    const std::string token = lowercase(line.substr(0, first_space));

    std::vector<float> row;
    const char* p = line.data() + first_space + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      float v = 0.0f;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw FormatError("embedding table line " + std::to_string(lineno) + ": bad float");
      row.push_back(v);
      p = next;
    }
    if (row.empty())
      throw FormatError("embedding table line " + std::to_string(lineno) + ": no vector");
    if (dim == -1) {
      dim = static_cast<Eigen::Index>(row.size());
    } else if (static_cast<Eigen::Index>(row.size()) != dim) {
      throw FormatError("embedding table line " + std::to_string(lineno) + ": dimension " +
                        std::to_string(row.size()) + " != " + std::to_string(dim));
    }
    if (table.index.count(token)) {
      ++table.duplicate_tokens;  // first occurrence wins
      continue;
    }
    table.index.emplace(token, static_cast<Eigen::Index>(n_rows));
    values.insert(values.end(), row.begin(), row.end());
    ++n_rows;
  }
  table.vectors.resize(static_cast<Eigen::Index>(n_rows), dim < 0 ? 0 : dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    table.vectors.data()[i] = values[i];
  return table;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur += static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::pair<Vec, int> encode_tokens(const EmbeddingTable& table,
                                  const std::vector<std::string>& tokens) {
  Vec sum = Vec::Zero(table.dim());
  int in_vocab = 0;
  for (const std::string& tok : tokens) {
    const Eigen::Index row = table.lookup(tok);
    if (row < 0) continue;
    sum += table.vectors.row(row).cast<double>().transpose();
    ++in_vocab;
  }
  if (in_vocab > 0) sum /= static_cast<double>(in_vocab);
  return {sum, in_vocab};
}

ChunkPlan plan_chunks(int n_tokens, int window, int overlap) {
  if (overlap < 0 || window <= overlap)
    throw ConfigError("plan_chunks: need window > overlap >= 0");
  if (n_tokens < 1) throw ConfigError("plan_chunks: need n_tokens >= 1");
  ChunkPlan plan;
  plan.window = window;
  plan.overlap = overlap;
  const int stride = window - overlap;
  int start = 0;
  while (true) {
    const int end = std::min(start + window, n_tokens);
    plan.spans.emplace_back(start, end);
    if (end == n_tokens) break;
    start += stride;
  }
  return plan;
}

AggMode agg_mode_from_string(const std::string& s) {
  if (s == "mean") return AggMode::kMean;
  if (s == "sum") return AggMode::kSum;
  throw ConfigError("unknown aggregation mode '" + s + "' (expected mean|sum)");
}

std::string to_string(AggMode mode) { return mode == AggMode::kMean ? "mean" : "sum"; }

Vec aggregate_chunk_features(const std::vector<Vec>& chunk_vectors, AggMode mode) {
  if (chunk_vectors.empty()) throw DataError("aggregate_chunk_features: empty chunk list");
  Vec out = Vec::Zero(chunk_vectors.front().size());
  for (const Vec& v : chunk_vectors) {
    if (v.size() != out.size())
      throw DataError("aggregate_chunk_features: mixed chunk dimensions");
    out += v;
  }
  if (mode == AggMode::kMean) out /= static_cast<double>(chunk_vectors.size());
  return out;
}

ChunkIndex ChunkIndex::build(const FeatureMatrix& chunks) {
  ChunkIndex idx;
  for (std::size_t i = 0; i < chunks.ids.size(); ++i) {
    const std::string& id = chunks.ids[i];
    const auto p1 = id.find('#');
    const auto p2 = id.rfind('#');
    if (p1 == std::string::npos || p2 == p1)
      throw FormatError("chunk id '" + id + "' is not wnid#title#chunk_index");
    const std::string wnid = id.substr(0, p1);
    const std::string title = id.substr(p1 + 1, p2 - p1 - 1);
    idx.groups[wnid][title].push_back(static_cast<Eigen::Index>(i));
  }
  return idx;
}

EncodedClass encode_class(const std::string& wnid, const std::vector<Article>& articles,
                          const EncoderConfig& config) {
  EncodedClass out;
  out.wnid = wnid;
  out.source = config.source;

  std::vector<Vec> article_vectors;
  if (config.source == EncoderSource::kBagOfEmbeddings) {
    if (config.table == nullptr) throw ConfigError("encode_class: embedding table not set");
    if (articles.empty()) throw DataError("encode_class: class " + wnid + " has no articles");
    int total_in_vocab = 0;
    for (const Article& art : articles) {
      auto [vec, n_in_vocab] = encode_tokens(*config.table, tokenize(art.text));
      total_in_vocab += n_in_vocab;
      article_vectors.push_back(std::move(vec));
    }
    if (total_in_vocab == 0)
      throw DataError("encode_class: class " + wnid + " has no in-vocabulary tokens");
    out.n_tokens_in_vocab = total_in_vocab;
    out.n_articles = static_cast<int>(articles.size());
  } else {
    if (config.chunk_features == nullptr || config.chunk_index == nullptr)
      throw ConfigError("encode_class: chunk features not set");
    auto it = config.chunk_index->groups.find(wnid);
    if (it == config.chunk_index->groups.end() || it->second.empty())
      throw DataError("encode_class: class " + wnid + " has no chunk features");
    for (const auto& [title, rows] : it->second) {
      std::vector<Vec> chunk_vecs;
      chunk_vecs.reserve(rows.size());
      for (Eigen::Index r : rows)
        chunk_vecs.push_back(config.chunk_features->data.row(r).cast<double>().transpose());
      article_vectors.push_back(aggregate_chunk_features(chunk_vecs, config.chunk_agg));
    }
    out.n_articles = static_cast<int>(article_vectors.size());
  }

  // Multiple articles average; a single article passes through.
  Vec mean = Vec::Zero(article_vectors.front().size());
  for (const Vec& v : article_vectors) mean += v;
  mean /= static_cast<double>(article_vectors.size());
  out.degenerate = mean.isZero(0.0);
  out.vector = std::move(mean);
  return out;
}

EncodeSplitResult encode_split(const ClassRegistry& registry, const ArticleStore& articles,
                               const EncoderConfig& config, const std::vector<std::string>& wnids,
                               bool allow_skip) {
  EncodeSplitResult result;
  std::vector<Vec> rows;
  static const std::vector<Article> kNoArticles;
  for (const std::string& wnid : wnids) {
    if (!registry.contains(wnid)) throw DataError("encode_split: unknown wnid " + wnid);
    const std::vector<Article>* arts = &kNoArticles;
    if (config.source == EncoderSource::kBagOfEmbeddings && articles.has(wnid))
      arts = &articles.articles(wnid);
    try {
      EncodedClass enc = encode_class(wnid, *arts, config);
      rows.push_back(enc.vector);
      result.features.ids.push_back(wnid);
      result.encoded.push_back(std::move(enc));
    } catch (const DataError& e) {
      if (!allow_skip) throw;
      result.skipped.emplace_back(wnid, e.what());
    }
  }
  Eigen::Index dim = 0;
  if (!rows.empty()) {
    dim = rows.front().size();
  } else if (config.source == EncoderSource::kBagOfEmbeddings && config.table) {
    dim = config.table->dim();
  } else if (config.chunk_features) {
    dim = config.chunk_features->dim();
  }
  result.features.data.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    result.features.data.row(static_cast<Eigen::Index>(i)) = rows[i].cast<float>().transpose();
  return result;
}

Article class_text_article(const ClassRecord& record, bool include_phrases, bool include_gloss) {
  Article art;
  art.title = record.wnid + ":names";
  std::vector<std::string> parts;
  if (include_phrases) {
    for (const std::string& p : record.phrases) parts.push_back(p);
  }
  if (include_gloss && !record.gloss.empty()) parts.push_back(record.gloss);
  art.text = join(parts, ". ");
  return art;
}

}  // namespace zslforge
