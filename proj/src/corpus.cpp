#include "zslforge/corpus.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace zslforge {

using nlohmann::json;

namespace {

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32_le(const std::string& buf, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3])) << 24);
}

std::uint32_t crc32_of(const char* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

// Splits file content into lines on '\n', dropping a final empty line.
std::vector<std::string> read_lines(const std::string& path) {
  std::string content = read_text_file(path);
  std::vector<std::string> lines = split(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::string& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

}  // namespace

bool is_valid_wnid(const std::string& s) {
  if (s.size() != 9 || s[0] != 'n') return false;
  for (std::size_t i = 1; i < 9; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

const ClassRecord& ClassRegistry::at(const std::string& wnid) const {
  auto it = records.find(wnid);
  if (it == records.end()) throw DataError("unknown wnid: " + wnid);
  return it->second;
}

ClassRecord& ClassRegistry::at(const std::string& wnid) {
  auto it = records.find(wnid);
  if (it == records.end()) throw DataError("unknown wnid: " + wnid);
  return it->second;
}

void ClassRegistry::add(ClassRecord rec) {
  if (records.count(rec.wnid)) throw DataError("duplicate wnid: " + rec.wnid);
  order.push_back(rec.wnid);
  records.emplace(rec.wnid, std::move(rec));
}

std::vector<std::string> ClassRegistry::external_parents() const {
  std::set<std::string> out;
  for (const auto& [wnid, rec] : records) {
    for (const std::string& p : rec.parents) {
      if (!contains(p)) out.insert(p);
    }
  }
  return {out.begin(), out.end()};
}

ClassRegistry load_class_registry(const std::string& path) {
  ClassRegistry reg;
  std::unordered_map<std::string, std::size_t> first_line;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> cols = split(lines[i], '\t');
    if (cols.size() < 3 || cols.size() > 5)
      throw FormatError("registry line " + std::to_string(lineno) + ": expected 3-5 columns, got " +
                        std::to_string(cols.size()));
    ClassRecord rec;
    rec.wnid = trim(cols[0]);
    if (!is_valid_wnid(rec.wnid))
      throw FormatError("registry line " + std::to_string(lineno) + ": malformed wnid '" +
                        rec.wnid + "'");
    if (auto it = first_line.find(rec.wnid); it != first_line.end())
      throw FormatError("registry: duplicate wnid '" + rec.wnid + "' on lines " +
                        std::to_string(it->second) + " and " + std::to_string(lineno));
    for (const std::string& p : split(cols[1], '|')) {
      if (!trim(p).empty()) rec.phrases.push_back(trim(p));
    }
    if (rec.phrases.empty())
      throw FormatError("registry line " + std::to_string(lineno) + ": empty phrase list for " +
                        rec.wnid);
    rec.gloss = cols[2];
    if (cols.size() >= 4) {
      std::unordered_set<std::string> seen;
      for (const std::string& tok : split(trim(cols[3]), ' ')) {
        const std::string p = trim(tok);
        if (p.empty()) continue;
        if (p == rec.wnid)
          throw FormatError("registry line " + std::to_string(lineno) + ": " + rec.wnid +
                            " lists itself as parent");
        if (!seen.insert(p).second)
          throw FormatError("registry line " + std::to_string(lineno) + ": duplicate parent " + p);
        rec.parents.push_back(p);
      }
    }
    if (cols.size() == 5) {
      for (const std::string& t : split(cols[4], '|')) {
        if (!trim(t).empty()) rec.article_titles.push_back(trim(t));
      }
    }
    first_line.emplace(rec.wnid, lineno);
    reg.add(std::move(rec));
  }
  return reg;
}

void write_class_registry(const std::string& path, const ClassRegistry& registry) {
  std::string out;
  for (const std::string& wnid : registry.order) {
    const ClassRecord& rec = registry.at(wnid);
    out += rec.wnid;
    out += '\t';
    out += join(rec.phrases, "|");
    out += '\t';
    out += rec.gloss;
    out += '\t';
    out += join(rec.parents, " ");
    out += '\t';
    out += join(rec.article_titles, "|");
    out += '\n';
  }
  write_text_file(path, out);
}

Split load_split(const std::string& path, const ClassRegistry& registry,
                 const std::string& name) {
  Split s;
  if (!name.empty()) {
    s.name = name;
  } else {
    auto slash = path.find_last_of("/\\");
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = stem.find_last_of('.');
    s.name = dot == std::string::npos ? stem : stem.substr(0, dot);
  }
  std::unordered_set<std::string> seen;
  for (const std::string& raw : read_lines(path)) {
    const std::string wnid = trim(raw);
    if (wnid.empty()) continue;
    if (!registry.contains(wnid))
      throw DataError("split " + s.name + ": wnid '" + wnid + "' not in registry");
    if (!seen.insert(wnid).second)
      throw DataError("split " + s.name + ": duplicate wnid '" + wnid + "'");
    s.wnids.push_back(wnid);
  }
  return s;
}

void write_split(const std::string& path, const Split& split) {
  std::string out;
  for (const std::string& w : split.wnids) {
    out += w;
    out += '\n';
  }
  write_text_file(path, out);
}

void check_splits_disjoint(const std::vector<const Split*>& splits) {
  std::unordered_map<std::string, std::string> owner;
  for (const Split* s : splits) {
    for (const std::string& w : s->wnids) {
      auto [it, inserted] = owner.emplace(w, s->name);
      if (!inserted)
        throw DataError("splits overlap: wnid '" + w + "' in both '" + it->second + "' and '" +
                        s->name + "'");
    }
  }
}

Eigen::Index FeatureMatrix::index_of(const std::string& id) const {
  if (index_.empty() && !ids.empty()) {
    index_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) index_.emplace(ids[i], static_cast<Eigen::Index>(i));
  }
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

FeatureMatrix load_feature_matrix(const std::string& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 16) throw FormatError(path + ": truncated ZSLF header");
  if (buf.compare(0, 4, "ZSLF") != 0) throw FormatError(path + ": bad magic, expected 'ZSLF'");
  const std::uint32_t version = read_u32_le(buf, 4);
  if (version != 1) throw FormatError(path + ": unsupported ZSLF version " + std::to_string(version));
  const std::uint64_t n = read_u32_le(buf, 8);
  const std::uint64_t dim = read_u32_le(buf, 12);
  const std::uint64_t payload_bytes = n * dim * 4;
  if (buf.size() < 16 + payload_bytes + 4)
    throw FormatError(path + ": truncated payload (have " + std::to_string(buf.size() - 16) +
                      " bytes, need " + std::to_string(payload_bytes + 4) + ")");
  if (buf.size() != 16 + payload_bytes + 4)
    throw FormatError(path + ": trailing bytes after checksum");
  const std::uint32_t stored_crc = read_u32_le(buf, 16 + payload_bytes);
  const std::uint32_t actual_crc = crc32_of(buf.data() + 16, payload_bytes);
  if (stored_crc != actual_crc) throw FormatError(path + ": payload CRC32 mismatch");

  FeatureMatrix fm;
  fm.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  if (payload_bytes > 0) std::memcpy(fm.data.data(), buf.data() + 16, payload_bytes);
  for (Eigen::Index i = 0; i < fm.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < fm.data.cols(); ++j) {
      if (!std::isfinite(fm.data(i, j)))
        throw FormatError(path + ": non-finite entry at row " + std::to_string(i));
    }
  }

  const std::string ids_path = path + ".ids";
  fm.ids = read_lines(ids_path);
  if (fm.ids.size() != n)
    throw FormatError(ids_path + ": " + std::to_string(fm.ids.size()) + " ids for " +
                      std::to_string(n) + " rows");
  return fm;
}

void write_feature_matrix(const std::string& path, const FeatureMatrix& fm) {
  if (static_cast<std::size_t>(fm.n()) != fm.ids.size())
    throw DataError("feature matrix: ids/rows mismatch");
  std::string out;
  out += "ZSLF";
  append_u32_le(out, 1);
  append_u32_le(out, static_cast<std::uint32_t>(fm.n()));
  append_u32_le(out, static_cast<std::uint32_t>(fm.dim()));
  const std::size_t payload_bytes = static_cast<std::size_t>(fm.n()) * fm.dim() * 4;
  const std::size_t payload_off = out.size();
  out.resize(out.size() + payload_bytes);
  if (payload_bytes > 0) std::memcpy(out.data() + payload_off, fm.data.data(), payload_bytes);
  append_u32_le(out, crc32_of(out.data() + payload_off, payload_bytes));
  write_text_file(path, out);

  std::string ids_out;
  for (const std::string& id : fm.ids) {
    ids_out += id;
    ids_out += '\n';
  }
  write_text_file(path + ".ids", ids_out);
}

bool ArticleStore::has(const std::string& wnid) const {
  auto it = by_class.find(wnid);
  return it != by_class.end() && !it->second.empty();
}

const std::vector<Article>& ArticleStore::articles(const std::string& wnid) const {
  auto it = by_class.find(wnid);
  if (it == by_class.end()) throw DataError("no articles for wnid: " + wnid);
  return it->second;
}

ArticleStore load_articles(const std::string& path) {
  ArticleStore store;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw FormatError("articles line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (!obj.contains("wnid") || !obj.contains("articles"))
      throw FormatError("articles line " + std::to_string(i + 1) +
                        ": object needs 'wnid' and 'articles'");
    const std::string wnid = obj["wnid"].get<std::string>();
    std::vector<Article>& list = store.by_class[wnid];
    std::unordered_set<std::string> titles;
    for (const json& a : obj["articles"]) {
      Article art;
      art.title = a.at("title").get<std::string>();
      art.text = a.at("text").get<std::string>();
      if (collapse_whitespace(art.text).empty())
        throw FormatError("articles line " + std::to_string(i + 1) + ": empty text for '" +
                          art.title + "'");
      if (!titles.insert(art.title).second)
        throw FormatError("articles line " + std::to_string(i + 1) + ": duplicate title '" +
                          art.title + "'");
      list.push_back(std::move(art));
    }
  }
  return store;
}

void write_articles(const std::string& path, const ArticleStore& store) {
  std::vector<std::string> wnids;
  wnids.reserve(store.by_class.size());
  for (const auto& [w, _] : store.by_class) wnids.push_back(w);
  std::sort(wnids.begin(), wnids.end());
  std::string out;
  for (const std::string& w : wnids) {
    json obj;
    obj["wnid"] = w;
    obj["articles"] = json::array();
    for (const Article& a : store.by_class.at(w)) {
      obj["articles"].push_back({{"title", a.title}, {"text", a.text}});
    }
    out += obj.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

void load_hierarchy_tsv(const std::string& path, ClassRegistry& registry) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cols = split(lines[i], '\t');
    if (cols.size() != 2)
      throw FormatError("hierarchy line " + std::to_string(i + 1) + ": expected child<TAB>parent");
    const std::string child = trim(cols[0]);
    const std::string parent = trim(cols[1]);
    if (child == parent)
      throw FormatError("hierarchy line " + std::to_string(i + 1) + ": self edge " + child);
    if (!registry.contains(child)) continue;  // edges for classes outside the registry are ignored
    ClassRecord& rec = registry.at(child);
    if (std::find(rec.parents.begin(), rec.parents.end(), parent) == rec.parents.end())
      rec.parents.push_back(parent);
  }
}

bool ValidationReport::empty() const {
  return missing_aux.empty() && missing_articles.empty() && dimension_mismatches.empty() &&
         split_overlaps.empty() && unknown_ids.empty();
}

std::vector<std::string> ValidationReport::lines() const {
  std::vector<std::string> out;
  for (const auto& w : missing_aux) out.push_back("missing-aux\t" + w);
  for (const auto& w : missing_articles) out.push_back("missing-articles\t" + w);
  for (const auto& m : dimension_mismatches) out.push_back("dim-mismatch\t" + m);
  for (const auto& m : split_overlaps) out.push_back("split-overlap\t" + m);
  for (const auto& m : unknown_ids) out.push_back("unknown-id\t" + m);
  return out;
}

std::string sample_id_wnid(const std::string& sample_id) {
  auto pos = sample_id.find('#');
  return pos == std::string::npos ? sample_id : sample_id.substr(0, pos);
}

ValidationReport validate_bundle(const ClassRegistry& registry,
                                 const std::vector<const Split*>& splits,
                                 const FeatureMatrix* image_feats,
                                 const FeatureMatrix* aux_feats, const ArticleStore* articles,
                                 std::optional<int> expected_image_dim,
                                 std::optional<int> expected_aux_dim) {
  ValidationReport report;

  std::vector<std::string> relevant;  // classes named by any split, in split order
  std::unordered_set<std::string> seen_class;
  for (const Split* s : splits) {
    for (const std::string& w : s->wnids) {
      if (seen_class.insert(w).second) relevant.push_back(w);
    }
  }
  if (relevant.empty()) {
    relevant = registry.order;
  }

  if (aux_feats != nullptr) {
    for (const std::string& w : relevant) {
      if (aux_feats->index_of(w) < 0) report.missing_aux.push_back(w);
    }
    for (const std::string& id : aux_feats->ids) {
      if (!registry.contains(sample_id_wnid(id))) report.unknown_ids.push_back("aux:" + id);
    }
    if (expected_aux_dim && aux_feats->dim() != *expected_aux_dim)
      report.dimension_mismatches.push_back("aux dim " + std::to_string(aux_feats->dim()) +
                                            " vs expected " + std::to_string(*expected_aux_dim));
  }
  if (image_feats != nullptr) {
    for (const std::string& id : image_feats->ids) {
      if (!registry.contains(sample_id_wnid(id))) report.unknown_ids.push_back("image:" + id);
    }
    if (expected_image_dim && image_feats->dim() != *expected_image_dim)
      report.dimension_mismatches.push_back("image dim " + std::to_string(image_feats->dim()) +
                                            " vs expected " + std::to_string(*expected_image_dim));
  }
  if (articles != nullptr) {
    for (const std::string& w : relevant) {
      if (!articles->has(w)) report.missing_articles.push_back(w);
    }
  }

  std::unordered_map<std::string, std::string> owner;
  for (const Split* s : splits) {
    for (const std::string& w : s->wnids) {
      auto [it, inserted] = owner.emplace(w, s->name);
      if (!inserted)
        report.split_overlaps.push_back(w + " in '" + it->second + "' and '" + s->name + "'");
    }
  }
  return report;
}

}  // namespace zslforge
