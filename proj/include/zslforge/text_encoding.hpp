#ifndef ZSLFORGE_TEXT_ENCODING_HPP
#define ZSLFORGE_TEXT_ENCODING_HPP

#include "zslforge/common.hpp"
#include "zslforge/corpus.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace zslforge {

// Token -> embedding row. Tokens are lowercased on load; on duplicates the
// first occurrence wins.
struct EmbeddingTable {
  std::unordered_map<std::string, Eigen::Index> index;
  MatF vectors;
  std::size_t duplicate_tokens = 0;

  Eigen::Index dim() const { return vectors.cols(); }
  Eigen::Index lookup(const std::string& token) const;
};

// GloVe-style text format: one line per token, "token v1 v2 ... vd",
// single-space separated decimal floats.
EmbeddingTable load_embedding_table(const std::string& path);

// Lowercases and splits on maximal runs of non-alphanumeric characters.
// Bytes >= 0x80 are kept inside tokens so UTF-8 sequences survive intact.
std::vector<std::string> tokenize(const std::string& text);

// Mean of in-vocabulary token embeddings; all-OOV yields the zero vector.
std::pair<Vec, int> encode_tokens(const EmbeddingTable& table,
                                  const std::vector<std::string>& tokens);

struct ChunkPlan {
  int window = 256;
  int overlap = 50;
  std::vector<std::pair<int, int>> spans;  // [start, end) token offsets
};

// Tiles [0, n_tokens) with windows of `window` tokens at stride
// window - overlap; the final span may be shorter.
ChunkPlan plan_chunks(int n_tokens, int window = 256, int overlap = 50);

enum class AggMode { kMean, kSum };

AggMode agg_mode_from_string(const std::string& s);
std::string to_string(AggMode mode);

Vec aggregate_chunk_features(const std::vector<Vec>& chunk_vectors, AggMode mode);

enum class EncoderSource { kBagOfEmbeddings, kChunkFeatures };

// Row indices of a chunk feature file grouped per class and article title.
// Chunk ids are "wnid#title#chunk_index".
struct ChunkIndex {
  // wnid -> title -> row indices ordered by chunk_index
  std::unordered_map<std::string, std::map<std::string, std::vector<Eigen::Index>>> groups;

  static ChunkIndex build(const FeatureMatrix& chunks);
};

struct EncoderConfig {
  EncoderSource source = EncoderSource::kBagOfEmbeddings;
  const EmbeddingTable* table = nullptr;       // bag-of-embeddings path
  const FeatureMatrix* chunk_features = nullptr;  // chunk-features path
  const ChunkIndex* chunk_index = nullptr;
  AggMode chunk_agg = AggMode::kMean;  // chunk -> article aggregation
};

struct EncodedClass {
  std::string wnid;
  Vec vector;
  EncoderSource source = EncoderSource::kBagOfEmbeddings;
  int n_articles = 0;
  int n_tokens_in_vocab = 0;
  bool degenerate = false;  // exactly-zero class vector
};

// Per-article vectors averaged across the class's articles. Throws DataError
// when the class has no articles, or every article is out-of-vocabulary.
EncodedClass encode_class(const std::string& wnid, const std::vector<Article>& articles,
                          const EncoderConfig& config);

struct EncodeSplitResult {
  FeatureMatrix features;                                   // rows follow input order, skips removed
  std::vector<std::pair<std::string, std::string>> skipped;  // (wnid, reason)
  std::vector<EncodedClass> encoded;
};

// Batch driver over encode_class. With allow_skip=false the first failing
// class aborts the encode.
EncodeSplitResult encode_split(const ClassRegistry& registry, const ArticleStore& articles,
                               const EncoderConfig& config, const std::vector<std::string>& wnids,
                               bool allow_skip);

// Class-name / gloss carriers reuse the bag-of-embeddings path: the phrases
// (and optionally the gloss) are concatenated into one synthetic article.
Article class_text_article(const ClassRecord& record, bool include_phrases, bool include_gloss);

}  // namespace zslforge

#endif  // ZSLFORGE_TEXT_ENCODING_HPP
