#include "zslforge/cli.hpp"

#include "zslforge/cada_vae.hpp"
#include "zslforge/checkpoint.hpp"
#include "zslforge/corpus.hpp"
#include "zslforge/eval.hpp"
#include "zslforge/hpo.hpp"
#include "zslforge/matcher.hpp"
#include "zslforge/simple_zsl.hpp"
#include "zslforge/synthetic.hpp"
#include "zslforge/text_encoding.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <zlib.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <unordered_set>

namespace zslforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Run manifests

std::uint64_t env_default_seed() {
  const char* env = std::getenv("ZSLFORGE_SEED");
  if (env == nullptr) return 0;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw ConfigError("ZSLFORGE_SEED is not an unsigned integer");
  }
}

json file_digest(const std::string& path) {
  const std::string bytes = read_text_file(path);
  const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                           static_cast<uInt>(bytes.size()));
  return json{{"crc32", static_cast<std::uint32_t>(crc)}, {"bytes", bytes.size()}};
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ManifestBuilder {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed = 0;

  void input(const std::string& label, const std::string& path) {
    inputs[label] = json{{"path", path}, {"digest", file_digest(path)}};
  }

  void write(const std::string& out_dir) const {
    json m{{"command", command}, {"config", config},   {"inputs", inputs},
           {"seed", seed},       {"version", kVersion}, {"timestamp", iso_timestamp()}};
    write_text_file(out_dir + "/manifest.json", m.dump(2) + "\n");
  }
};

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out);
}

// ---------------------------------------------------------------------------
// Shared data plumbing

std::vector<std::string> read_wnid_list(const std::string& path) {
  std::vector<std::string> out;
  for (const std::string& raw : split(read_text_file(path), '\n')) {
    const std::string w = trim(raw);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

// Split loaded against the registry when one is given, raw otherwise.
Split load_split_flexible(const std::string& path, const std::optional<ClassRegistry>& registry) {
  if (registry) return load_split(path, *registry);
  Split s;
  s.name = fs::path(path).stem().string();
  std::unordered_set<std::string> seen;
  for (const std::string& w : read_wnid_list(path)) {
    if (!seen.insert(w).second) throw DataError("split " + s.name + ": duplicate wnid '" + w + "'");
    s.wnids.push_back(w);
  }
  return s;
}

// Class-level aux rows for the split, in split order. Missing classes are
// dropped when allow_missing is set (the 489-of-500 situation), fatal
// otherwise.
struct ClassFeatures {
  std::vector<std::string> wnids;
  Mat rows;
  std::vector<std::string> missing;
};

ClassFeatures gather_class_features(const FeatureMatrix& aux, const std::vector<std::string>& wnids,
                                    bool allow_missing) {
  ClassFeatures out;
  std::vector<Eigen::Index> idx;
  for (const std::string& w : wnids) {
    const Eigen::Index r = aux.index_of(w);
    if (r < 0) {
      if (!allow_missing) throw DataError("no auxiliary features for class " + w);
      out.missing.push_back(w);
      continue;
    }
    out.wnids.push_back(w);
    idx.push_back(r);
  }
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), aux.dim());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.rows.row(static_cast<Eigen::Index>(i)) = aux.data.row(idx[i]).cast<double>();
  return out;
}

// Image samples restricted to the listed classes; labels index the class list.
struct SampleSet {
  Mat images;
  std::vector<int> labels;
  std::size_t n_skipped = 0;  // samples of classes outside the list
};

SampleSet gather_samples(const FeatureMatrix& images, const std::vector<std::string>& classes) {
  std::unordered_map<std::string, int> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i)
    class_index.emplace(classes[i], static_cast<int>(i));
  std::vector<Eigen::Index> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < images.ids.size(); ++i) {
    auto it = class_index.find(sample_id_wnid(images.ids[i]));
    if (it == class_index.end()) continue;
    rows.push_back(static_cast<Eigen::Index>(i));
    labels.push_back(it->second);
  }
  SampleSet out;
  out.images.resize(static_cast<Eigen::Index>(rows.size()), images.dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.images.row(static_cast<Eigen::Index>(i)) = images.data.row(rows[i]).cast<double>();
  out.labels = std::move(labels);
  out.n_skipped = images.ids.size() - rows.size();
  return out;
}

std::vector<CategoryGroup> load_category_roots(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  std::vector<CategoryGroup> groups;
  if (!j.contains("groups")) throw ConfigError(path + ": expected top-level 'groups' array");
  for (const json& g : j["groups"]) {
    CategoryGroup group;
    group.name = g.at("name").get<std::string>();
    group.roots = g.at("roots").get<std::vector<std::string>>();
    groups.push_back(std::move(group));
  }
  return groups;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::string spec_path;
  double val_fraction = 0.0;
  SyntheticSpec spec;
  bool seed_given = false;
};

int cmd_synth(const SynthArgs& args) {
  SyntheticSpec spec = args.spec;
  if (!args.spec_path.empty()) {
    spec = SyntheticSpec::from_json(parse_json_file(args.spec_path));
    if (args.seed_given) spec.seed = args.spec.seed;
  }
  spec.validate();
  ensure_out_dir(args.out);

  const SyntheticBundle bundle = generate_synthetic(spec);
  write_class_registry(args.out + "/registry.tsv", bundle.registry);
  write_feature_matrix(args.out + "/images.zslf", bundle.images);
  write_feature_matrix(args.out + "/aux.zslf", bundle.aux);
  write_split(args.out + "/test.txt", bundle.test);

  if (args.val_fraction > 0.0) {
    const int n_val = std::max(1, static_cast<int>(bundle.train.wnids.size() * args.val_fraction));
    if (n_val >= static_cast<int>(bundle.train.wnids.size()))
      throw ConfigError("synth: --val-fraction leaves no training classes");
    Split train{"train", {}}, val{"val", {}};
    const std::size_t n_train = bundle.train.wnids.size() - static_cast<std::size_t>(n_val);
    for (std::size_t i = 0; i < bundle.train.wnids.size(); ++i) {
      (i < n_train ? train : val).wnids.push_back(bundle.train.wnids[i]);
    }
    write_split(args.out + "/train.txt", train);
    write_split(args.out + "/val.txt", val);
  } else {
    write_split(args.out + "/train.txt", bundle.train);
  }

  ManifestBuilder manifest;
  manifest.command = "synth";
  manifest.config = spec.to_json();
  manifest.config["val_fraction"] = args.val_fraction;
  manifest.seed = spec.seed;
  manifest.write(args.out);
  std::cout << "synthetic bundle written to " << args.out << " (" << spec.n_classes
            << " classes, " << bundle.images.n() << " samples)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeArgs {
  std::string registry_path, articles_path, table_path, chunks_path, split_path, out;
  std::string source = "articles";  // articles | names | gloss | names+gloss
  std::string agg = "mean";
  bool allow_missing = false;
};

int cmd_encode(const EncodeArgs& args) {
  const ClassRegistry registry = load_class_registry(args.registry_path);
  const Split split = load_split(args.split_path, registry);
  ensure_out_dir(args.out);

  EncoderConfig config;
  config.chunk_agg = agg_mode_from_string(args.agg);

  EmbeddingTable table;
  FeatureMatrix chunks;
  ChunkIndex chunk_index;
  ArticleStore articles;

  if (!args.chunks_path.empty()) {
    if (args.source != "articles")
      throw ConfigError("encode: --chunks only combines with --source articles");
    config.source = EncoderSource::kChunkFeatures;
    chunks = load_feature_matrix(args.chunks_path);
    chunk_index = ChunkIndex::build(chunks);
    config.chunk_features = &chunks;
    config.chunk_index = &chunk_index;
  } else {
    if (args.table_path.empty())
      throw ConfigError("encode: need --table (bag of embeddings) or --chunks");
    config.source = EncoderSource::kBagOfEmbeddings;
    table = load_embedding_table(args.table_path);
    config.table = &table;
  }

  if (args.source == "articles") {
    if (config.source == EncoderSource::kBagOfEmbeddings) {
      if (args.articles_path.empty()) throw ConfigError("encode: missing --articles");
      articles = load_articles(args.articles_path);
    }
  } else {
    // Synthetic one-article store built from class names and/or gloss.
    const bool names = args.source == "names" || args.source == "names+gloss";
    const bool gloss = args.source == "gloss" || args.source == "names+gloss";
    if (!names && !gloss)
      throw ConfigError("encode: unknown --source '" + args.source + "'");
    for (const std::string& w : split.wnids) {
      Article art = class_text_article(registry.at(w), names, gloss);
      if (!collapse_whitespace(art.text).empty()) articles.by_class[w].push_back(std::move(art));
    }
  }

  const EncodeSplitResult result =
      encode_split(registry, articles, config, split.wnids, args.allow_missing);
  write_feature_matrix(args.out + "/aux.zslf", result.features);

  json skip_report;
  skip_report["n_encoded"] = result.features.n();
  skip_report["n_skipped"] = result.skipped.size();
  skip_report["skipped"] = json::array();
  for (const auto& [wnid, reason] : result.skipped)
    skip_report["skipped"].push_back({{"wnid", wnid}, {"reason", reason}});
  write_text_file(args.out + "/skip_report.json", skip_report.dump(2) + "\n");

  ManifestBuilder manifest;
  manifest.command = "encode";
  manifest.config = json{{"source", args.source},
                         {"agg", args.agg},
                         {"allow_missing", args.allow_missing}};
  manifest.input("registry", args.registry_path);
  manifest.input("split", args.split_path);
  if (!args.articles_path.empty() && args.source == "articles" &&
      config.source == EncoderSource::kBagOfEmbeddings)
    manifest.input("articles", args.articles_path);
  if (!args.table_path.empty()) manifest.input("table", args.table_path);
  if (!args.chunks_path.empty()) manifest.input("chunks", args.chunks_path);
  manifest.write(args.out);

  std::cout << "encoded " << result.features.n() << " classes, skipped " << result.skipped.size()
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model;  // simple | cada
  std::string config_path, images_path, aux_path, split_path, val_split_path, registry_path, out;
  std::optional<std::uint64_t> seed;
};

json history_to_json(const std::vector<double>& losses) {
  json j = json::array();
  for (double v : losses) j.push_back(v);
  return j;
}

int cmd_train(const TrainArgs& args) {
  std::optional<ClassRegistry> registry;
  if (!args.registry_path.empty()) registry = load_class_registry(args.registry_path);
  const Split train_split = load_split_flexible(args.split_path, registry);
  const FeatureMatrix images = load_feature_matrix(args.images_path);
  const FeatureMatrix aux = load_feature_matrix(args.aux_path);

  const ClassFeatures seen = gather_class_features(aux, train_split.wnids, false);
  const SampleSet samples = gather_samples(images, seen.wnids);
  if (samples.images.rows() == 0) throw DataError("train: no image samples for the split");

  ensure_out_dir(args.out);
  ManifestBuilder manifest;
  manifest.command = "train " + args.model;
  manifest.input("images", args.images_path);
  manifest.input("aux", args.aux_path);
  manifest.input("split", args.split_path);
  if (!args.config_path.empty()) manifest.input("config", args.config_path);
  if (!args.val_split_path.empty()) manifest.input("val_split", args.val_split_path);
  if (!args.registry_path.empty()) manifest.input("registry", args.registry_path);

  json history;
  if (args.model == "simple") {
    SimpleZslConfig config;
    if (!args.config_path.empty())
      config = SimpleZslConfig::from_json(parse_json_file(args.config_path));
    if (args.seed) config.seed = *args.seed;

    std::optional<SimpleValData> val;
    Mat val_images, val_aux;
    std::vector<int> val_labels;
    if (!args.val_split_path.empty()) {
      const Split val_split = load_split_flexible(args.val_split_path, registry);
      const ClassFeatures val_classes = gather_class_features(aux, val_split.wnids, false);
      SampleSet val_samples = gather_samples(images, val_classes.wnids);
      val_images = std::move(val_samples.images);
      val_labels = std::move(val_samples.labels);
      val_aux = val_classes.rows;
      val = SimpleValData{&val_images, &val_labels, &val_aux};
    }

    const SimpleTrainResult result =
        train_simple(config, seen.rows, samples.images, samples.labels, val);
    save_simple_checkpoint(args.out + "/checkpoint.bin", result.params, config);
    history = json{{"epoch_loss", history_to_json(result.epoch_loss)},
                   {"best_epoch", result.best_epoch}};
    if (!result.val_history.empty()) {
      json vh = json::array();
      for (const ValMetricPoint& p : result.val_history)
        vh.push_back({{"epoch", p.epoch}, {"top1", p.top1}, {"top5", p.top5}});
      history["val"] = std::move(vh);
    }
    manifest.config = config.to_json();
    manifest.seed = config.seed;
  } else if (args.model == "cada") {
    CadaVaeConfig config;
    if (!args.config_path.empty())
      config = CadaVaeConfig::from_json(parse_json_file(args.config_path));
    if (args.seed) config.seed = *args.seed;

    const CadaTrainResult result = train_cada(config, samples.images, samples.labels, seen.rows);
    save_cada_checkpoint(args.out + "/checkpoint.bin", result.img_vae, result.aux_vae, nullptr,
                         config);
    json eh = json::array();
    for (const CadaLossParts& p : result.history) {
      eh.push_back({{"total", p.total},
                    {"recon_img", p.recon_img},
                    {"recon_aux", p.recon_aux},
                    {"kl_img", p.kl_img},
                    {"kl_aux", p.kl_aux},
                    {"cross_img", p.cross_img},
                    {"cross_aux", p.cross_aux},
                    {"dist_align", p.dist_align}});
    }
    history = json{{"epochs", std::move(eh)}};
    manifest.config = config.to_json();
    manifest.seed = config.seed;
  } else {
    throw ConfigError("train: unknown model '" + args.model + "'");
  }

  write_text_file(args.out + "/history.json", history.dump(2) + "\n");
  manifest.write(args.out);
  std::cout << "trained " << args.model << " model -> " << args.out << "/checkpoint.bin\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint_path, images_path, aux_path, split_path, registry_path, out;
  std::vector<int> ks = {1, 5};
  int adjust_total = 0;
};

int cmd_eval(const EvalArgs& args) {
  std::optional<ClassRegistry> registry;
  if (!args.registry_path.empty()) registry = load_class_registry(args.registry_path);
  const Split test_split = load_split_flexible(args.split_path, registry);
  const FeatureMatrix images = load_feature_matrix(args.images_path);
  const FeatureMatrix aux = load_feature_matrix(args.aux_path);

  // Candidate classes: split members with auxiliary vectors. Samples of the
  // remaining classes cannot be predicted; the adjusted mean scores them 0.
  const ClassFeatures candidates = gather_class_features(aux, test_split.wnids, true);
  if (candidates.wnids.empty()) throw DataError("eval: no evaluable classes");
  const SampleSet samples = gather_samples(images, candidates.wnids);
  if (samples.images.rows() == 0) throw DataError("eval: no image samples for the split");

  int max_k = 0;
  for (int k : args.ks) max_k = std::max(max_k, k);

  const Checkpoint header_probe = read_checkpoint(args.checkpoint_path);
  const std::string model = header_probe.header.value("model", "");
  std::vector<std::vector<Eigen::Index>> predictions;
  if (model == "simple_zsl") {
    auto [params, config] = load_simple_checkpoint(args.checkpoint_path);
    predictions = predict_topk_batch(params, samples.images, candidates.rows, max_k);
  } else if (model == "cada_vae") {
    const CadaCheckpoint ckpt = load_cada_checkpoint(args.checkpoint_path);
    // The latent classifier is trained on latents sampled from the candidate
    // classes' auxiliary encodings, per the standard ZSL protocol.
    const LabeledLatents latents =
        sample_latents(ckpt.aux_vae, candidates.rows,
                       ckpt.config.classifier.n_latents_per_class, ckpt.config.seed);
    const LatentClassifier clf =
        train_latent_classifier(latents, static_cast<int>(candidates.wnids.size()),
                                ckpt.config.classifier, ckpt.config.seed);
    predictions = classify_topk_batch(ckpt.img_vae, clf, samples.images, max_k);
  } else {
    throw FormatError("eval: unknown model kind '" + model + "' in checkpoint");
  }

  EvalReport report = per_class_topk(predictions, samples.labels, args.ks, candidates.wnids);
  if (args.adjust_total > 0) {
    report.n_total = args.adjust_total;
    for (const auto& [k, mean] : report.mean_topk)
      report.adjusted_mean_topk[k] = adjust_for_missing(mean, report.n_present, args.adjust_total);
  }

  ensure_out_dir(args.out);
  json out_json = report.to_json();
  out_json["model"] = model;
  out_json["missing_classes"] = candidates.missing;
  write_text_file(args.out + "/report.json", out_json.dump(2) + "\n");
  write_text_file(args.out + "/confusion.csv", report.confusion_csv());

  ManifestBuilder manifest;
  manifest.command = "eval";
  manifest.config = json{{"ks", args.ks}, {"adjust_total", args.adjust_total}};
  manifest.input("checkpoint", args.checkpoint_path);
  manifest.input("images", args.images_path);
  manifest.input("aux", args.aux_path);
  manifest.input("split", args.split_path);
  manifest.write(args.out);

  for (int k : args.ks) {
    std::cout << "mean per-class top-" << k << ": " << report.mean_topk.at(k) * 100.0 << "%";
    if (args.adjust_total > 0)
      std::cout << " (adjusted to " << args.adjust_total
                << " classes: " << report.adjusted_mean_topk.at(k) * 100.0 << "%)";
    std::cout << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string model;
  std::string images_path, aux_path, train_split_path, val_split_path, registry_path, out;
  int trials = 40;
  std::uint64_t seed = 0;
  int epochs = 0;  // 0 keeps the model default
  int parallel = 1;
};

int cmd_search(const SearchArgs& args) {
  std::optional<ClassRegistry> registry;
  if (!args.registry_path.empty()) registry = load_class_registry(args.registry_path);
  const Split train_split = load_split_flexible(args.train_split_path, registry);
  const Split val_split = load_split_flexible(args.val_split_path, registry);
  const FeatureMatrix images = load_feature_matrix(args.images_path);
  const FeatureMatrix aux = load_feature_matrix(args.aux_path);

  const ClassFeatures seen = gather_class_features(aux, train_split.wnids, false);
  const SampleSet train_samples = gather_samples(images, seen.wnids);
  const ClassFeatures val_classes = gather_class_features(aux, val_split.wnids, false);
  const SampleSet val_samples = gather_samples(images, val_classes.wnids);
  if (train_samples.images.rows() == 0 || val_samples.images.rows() == 0)
    throw DataError("search: empty train or val sample set");

  // Mean per-class top-1/top-5 on the validation classes.
  auto evaluate = [&](const std::vector<std::vector<Eigen::Index>>& preds, double& top1,
                      double& top5) {
    const std::vector<int> ks = {1, std::min<int>(5, static_cast<int>(val_classes.wnids.size()))};
    const EvalReport r = per_class_topk(preds, val_samples.labels, ks, val_classes.wnids);
    top1 = r.mean_topk.at(ks[0]);
    top5 = r.mean_topk.at(ks[1]);
  };
  const int val_k = std::min<int>(5, static_cast<int>(val_classes.wnids.size()));

  TrialFn trial;
  if (args.model == "simple") {
    trial = [&, val_k](std::uint64_t trial_seed) {
      Rng rng = make_rng(trial_seed);
      SimpleZslConfig config = sample_simple_config(rng);
      config.seed = trial_seed;
      if (args.epochs > 0) config.epochs = args.epochs;
      const SimpleTrainResult r =
          train_simple(config, seen.rows, train_samples.images, train_samples.labels);
      TrialResult out;
      out.config = config.to_json();
      out.epoch_losses = r.epoch_loss;
      const auto preds = predict_topk_batch(r.params, val_samples.images, val_classes.rows, val_k);
      evaluate(preds, out.val_top1, out.val_top5);
      return out;
    };
  } else if (args.model == "cada") {
    trial = [&, val_k](std::uint64_t trial_seed) {
      Rng rng = make_rng(trial_seed);
      CadaVaeConfig config = sample_cada_config(rng);
      config.seed = trial_seed;
      if (args.epochs > 0) config.epochs = args.epochs;
      const CadaTrainResult r =
          train_cada(config, train_samples.images, train_samples.labels, seen.rows);
      TrialResult out;
      out.config = config.to_json();
      for (const CadaLossParts& p : r.history) out.epoch_losses.push_back(p.total);
      const LabeledLatents latents = sample_latents(
          r.aux_vae, val_classes.rows, config.classifier.n_latents_per_class, trial_seed);
      const LatentClassifier clf = train_latent_classifier(
          latents, static_cast<int>(val_classes.wnids.size()), config.classifier, trial_seed);
      const auto preds = classify_topk_batch(r.img_vae, clf, val_samples.images, val_k);
      evaluate(preds, out.val_top1, out.val_top5);
      return out;
    };
  } else {
    throw ConfigError("search: unknown model '" + args.model + "'");
  }

  ensure_out_dir(args.out);
  const std::vector<RunRecord> ranked =
      run_search(trial, args.trials, args.seed, args.out, args.parallel);

  ManifestBuilder manifest;
  manifest.command = "search " + args.model;
  manifest.config = json{{"trials", args.trials}, {"epochs", args.epochs},
                         {"parallel", args.parallel}};
  manifest.seed = args.seed;
  manifest.input("images", args.images_path);
  manifest.input("aux", args.aux_path);
  manifest.input("train_split", args.train_split_path);
  manifest.input("val_split", args.val_split_path);
  manifest.write(args.out);

  std::cout << "search complete; best trial " << ranked.front().trial_id << " val_top5 "
            << ranked.front().val_top5 * 100.0 << "%\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// exclude

struct ExcludeArgs {
  std::string registry_path, split_path, roots_path, group, out;
  std::string mode = "group";
  std::uint64_t seed = 0;
  int count = -1;
};

int cmd_exclude(const ExcludeArgs& args) {
  const ClassRegistry registry = load_class_registry(args.registry_path);
  const Split split = load_split(args.split_path, registry);
  const CategoryPartition partition =
      partition_by_category(registry, load_category_roots(args.roots_path));

  ExclusionMode mode;
  if (args.mode == "group") {
    mode = ExclusionMode::kGroup;
  } else if (args.mode == "random") {
    mode = ExclusionMode::kRandomMatched;
  } else {
    throw ConfigError("exclude: unknown mode '" + args.mode + "' (group|random)");
  }

  const std::optional<int> count = args.count >= 0 ? std::optional<int>(args.count) : std::nullopt;
  const Split reduced = exclusion_split(split, partition, mode, args.group, count, args.seed);

  ensure_out_dir(args.out);
  write_split(args.out + "/" + reduced.name + ".txt", reduced);

  ManifestBuilder manifest;
  manifest.command = "exclude";
  manifest.config = json{{"mode", args.mode},
                         {"group", args.group},
                         {"count", args.count},
                         {"removed", split.wnids.size() - reduced.wnids.size()},
                         {"remaining", reduced.wnids.size()}};
  manifest.seed = args.seed;
  manifest.input("registry", args.registry_path);
  manifest.input("split", args.split_path);
  manifest.input("roots", args.roots_path);
  manifest.write(args.out);

  std::cout << reduced.name << ": " << reduced.wnids.size() << " classes remain (removed "
            << split.wnids.size() - reduced.wnids.size() << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// overlap

struct OverlapArgs {
  std::string registry_path, train_path, test_path, out;
};

int cmd_overlap(const OverlapArgs& args) {
  const ClassRegistry registry = load_class_registry(args.registry_path);
  const Split train = load_split(args.train_path, registry);
  const Split test = load_split(args.test_path, registry);

  const OverlapSubsets subsets = overlap_subsets(registry, train.wnids, test.wnids);
  ensure_out_dir(args.out);
  write_split(args.out + "/" + subsets.with_articles.name + ".txt", subsets.with_articles);
  write_split(args.out + "/" + subsets.same_article_set.name + ".txt", subsets.same_article_set);
  write_split(args.out + "/" + subsets.any_article_overlap.name + ".txt",
              subsets.any_article_overlap);
  write_split(args.out + "/" + subsets.phrase_overlap.name + ".txt", subsets.phrase_overlap);
  write_split(args.out + "/" + subsets.union_set_phrase.name + ".txt", subsets.union_set_phrase);
  json sizes = subsets.sizes();
  sizes["test_total"] = test.wnids.size();
  write_text_file(args.out + "/sizes.json", sizes.dump(2) + "\n");

  ManifestBuilder manifest;
  manifest.command = "overlap";
  manifest.config = sizes;
  manifest.input("registry", args.registry_path);
  manifest.input("train", args.train_path);
  manifest.input("test", args.test_path);
  manifest.write(args.out);

  std::cout << "overlap subsets: " << sizes.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// match / match ingest

struct MatchArgs {
  std::string registry_path, index_path, out;
  double threshold = 0.75;
};

int cmd_match(const MatchArgs& args) {
  const ClassRegistry registry = load_class_registry(args.registry_path);
  const TitleIndex index = load_title_index(args.index_path);
  const std::vector<ReviewRow> rows = propose_matches(registry, index, args.threshold);

  ensure_out_dir(args.out);
  write_text_file(args.out + "/review.tsv", review_file_tsv(rows));

  std::size_t n_auto = 0;
  for (const ReviewRow& r : rows) n_auto += r.status == "auto" ? 1 : 0;

  ManifestBuilder manifest;
  manifest.command = "match";
  manifest.config = json{{"threshold", args.threshold},
                         {"n_auto", n_auto},
                         {"n_review", rows.size() - n_auto}};
  manifest.input("registry", args.registry_path);
  manifest.input("index", args.index_path);
  manifest.write(args.out);

  std::cout << "proposed matches: " << n_auto << " auto, " << rows.size() - n_auto
            << " for review -> " << args.out << "/review.tsv\n";
  return kOk;
}

struct MatchIngestArgs {
  std::string registry_path, review_path, out;
};

int cmd_match_ingest(const MatchIngestArgs& args) {
  ClassRegistry registry = load_class_registry(args.registry_path);
  const std::vector<ReviewRow> rows = parse_review_file(args.review_path);
  const int updated = ingest_review(registry, rows);

  ensure_out_dir(args.out);
  write_class_registry(args.out + "/registry.tsv", registry);

  ManifestBuilder manifest;
  manifest.command = "match ingest";
  manifest.config = json{{"updated", updated}};
  manifest.input("registry", args.registry_path);
  manifest.input("review", args.review_path);
  manifest.write(args.out);

  std::cout << "ingested matches for " << updated << " classes -> " << args.out
            << "/registry.tsv\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// lengths

struct LengthsArgs {
  std::string report_path, articles_path, registry_path, roots_path, out;
};

int cmd_lengths(const LengthsArgs& args) {
  const json report = parse_json_file(args.report_path);
  const ArticleStore articles = load_articles(args.articles_path);
  const ClassRegistry registry = load_class_registry(args.registry_path);
  const CategoryPartition partition =
      partition_by_category(registry, load_category_roots(args.roots_path));

  if (!report.contains("per_class") || !report["per_class"].contains("top5"))
    throw DataError("lengths: eval report has no per-class top-5 accuracies");
  std::map<std::string, double> top5;
  for (auto it = report["per_class"]["top5"].begin(); it != report["per_class"]["top5"].end();
       ++it) {
    top5[it.key()] = it.value().get<double>();
  }

  const LengthAnalysis analysis = length_vs_accuracy(top5, articles, partition);
  ensure_out_dir(args.out);
  write_text_file(args.out + "/lengths.tsv", analysis.to_tsv());
  json stats = json::array();
  for (const LengthGroupStats& s : analysis.group_stats) {
    stats.push_back({{"group", s.group},
                     {"n", s.n},
                     {"pearson", s.pearson},
                     {"well_defined", s.well_defined}});
  }
  write_text_file(args.out + "/correlations.json", stats.dump(2) + "\n");

  ManifestBuilder manifest;
  manifest.command = "lengths";
  manifest.input("report", args.report_path);
  manifest.input("articles", args.articles_path);
  manifest.input("registry", args.registry_path);
  manifest.input("roots", args.roots_path);
  manifest.write(args.out);

  std::cout << "length analysis for " << analysis.points.size() << " classes -> " << args.out
            << "/lengths.tsv\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
  std::string registry_path, images_path, aux_path, articles_path;
  std::vector<std::string> split_paths;
  int expect_image_dim = 0, expect_aux_dim = 0;
};

int cmd_validate(const ValidateArgs& args) {
  const ClassRegistry registry = load_class_registry(args.registry_path);
  std::vector<Split> splits;
  for (const std::string& p : args.split_paths) splits.push_back(load_split(p, registry));
  std::vector<const Split*> split_ptrs;
  for (const Split& s : splits) split_ptrs.push_back(&s);

  std::optional<FeatureMatrix> images, aux;
  std::optional<ArticleStore> articles;
  if (!args.images_path.empty()) images = load_feature_matrix(args.images_path);
  if (!args.aux_path.empty()) aux = load_feature_matrix(args.aux_path);
  if (!args.articles_path.empty()) articles = load_articles(args.articles_path);

  const ValidationReport report = validate_bundle(
      registry, split_ptrs, images ? &*images : nullptr, aux ? &*aux : nullptr,
      articles ? &*articles : nullptr,
      args.expect_image_dim > 0 ? std::optional<int>(args.expect_image_dim) : std::nullopt,
      args.expect_aux_dim > 0 ? std::optional<int>(args.expect_aux_dim) : std::nullopt);

  if (report.empty()) {
    std::cout << "bundle consistent\n";
  } else {
    for (const std::string& line : report.lines()) std::cout << line << "\n";
    std::cout << report.lines().size() << " finding(s)\n";
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"zslforge: zero-shot classification over precomputed features"};
  app.require_subcommand(1);

  SynthArgs synth;
  EncodeArgs encode;
  TrainArgs train;
  EvalArgs eval_args;
  SearchArgs search;
  ExcludeArgs exclude;
  OverlapArgs overlap;
  MatchArgs match;
  MatchIngestArgs ingest;
  LengthsArgs lengths;
  ValidateArgs validate;

  // synth
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic bundle");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--spec", synth.spec_path, "spec JSON file");
  synth_cmd->add_option("--classes", synth.spec.n_classes);
  synth_cmd->add_option("--seen", synth.spec.n_seen);
  synth_cmd->add_option("--d-proto", synth.spec.d_proto);
  synth_cmd->add_option("--d-img", synth.spec.d_img);
  synth_cmd->add_option("--d-aux", synth.spec.d_aux);
  synth_cmd->add_option("--samples", synth.spec.samples_per_class);
  synth_cmd->add_option("--noise", synth.spec.noise_scale);
  CLI::Option* synth_seed = synth_cmd->add_option("--seed", synth.spec.seed);
  synth_cmd->add_option("--val-fraction", synth.val_fraction,
                        "carve a val split out of the seen classes");

  // encode
  CLI::App* encode_cmd = app.add_subcommand("encode", "encode class text into feature vectors");
  encode_cmd->add_option("--registry", encode.registry_path)->required();
  encode_cmd->add_option("--split", encode.split_path)->required();
  encode_cmd->add_option("--articles", encode.articles_path);
  encode_cmd->add_option("--table", encode.table_path, "word embedding table");
  encode_cmd->add_option("--chunks", encode.chunks_path, "per-chunk feature ZSLF");
  encode_cmd->add_option("--source", encode.source, "articles|names|gloss|names+gloss");
  encode_cmd->add_option("--agg", encode.agg, "chunk aggregation: mean|sum");
  encode_cmd->add_flag("--allow-missing", encode.allow_missing);
  encode_cmd->add_option("--out", encode.out)->required();

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("model", train.model, "simple|cada")->required();
  train_cmd->add_option("--config", train.config_path);
  train_cmd->add_option("--images", train.images_path)->required();
  train_cmd->add_option("--aux", train.aux_path)->required();
  train_cmd->add_option("--split", train.split_path)->required();
  train_cmd->add_option("--val-split", train.val_split_path);
  train_cmd->add_option("--registry", train.registry_path);
  std::uint64_t train_seed = 0;
  CLI::Option* train_seed_opt = train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--out", train.out)->required();

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path)->required();
  eval_cmd->add_option("--images", eval_args.images_path)->required();
  eval_cmd->add_option("--aux", eval_args.aux_path)->required();
  eval_cmd->add_option("--split", eval_args.split_path)->required();
  eval_cmd->add_option("--registry", eval_args.registry_path);
  eval_cmd->add_option("--k", eval_args.ks, "top-k values")->delimiter(',');
  eval_cmd->add_option("--adjust-total", eval_args.adjust_total,
                       "score absent classes as 0 against this many classes");
  eval_cmd->add_option("--out", eval_args.out)->required();

  // search
  CLI::App* search_cmd = app.add_subcommand("search", "random hyperparameter search");
  search_cmd->add_option("model", search.model, "simple|cada")->required();
  search_cmd->add_option("--trials", search.trials);
  CLI::Option* search_seed = search_cmd->add_option("--seed", search.seed);
  search_cmd->add_option("--epochs", search.epochs, "override per-trial epochs");
  search_cmd->add_option("--parallel", search.parallel, "concurrent trials");
  search_cmd->add_option("--images", search.images_path)->required();
  search_cmd->add_option("--aux", search.aux_path)->required();
  search_cmd->add_option("--train-split", search.train_split_path)->required();
  search_cmd->add_option("--val-split", search.val_split_path)->required();
  search_cmd->add_option("--registry", search.registry_path);
  search_cmd->add_option("--out", search.out)->required();

  // exclude
  CLI::App* exclude_cmd = app.add_subcommand("exclude", "derive category-exclusion splits");
  exclude_cmd->add_option("--registry", exclude.registry_path)->required();
  exclude_cmd->add_option("--split", exclude.split_path)->required();
  exclude_cmd->add_option("--roots", exclude.roots_path, "category roots JSON")->required();
  exclude_cmd->add_option("--group", exclude.group)->required();
  exclude_cmd->add_option("--mode", exclude.mode, "group|random");
  exclude_cmd->add_option("--count", exclude.count, "override removal count (random mode)");
  CLI::Option* exclude_seed = exclude_cmd->add_option("--seed", exclude.seed);
  exclude_cmd->add_option("--out", exclude.out)->required();

  // overlap
  CLI::App* overlap_cmd = app.add_subcommand("overlap", "derive overlap-exclusion test subsets");
  overlap_cmd->add_option("--registry", overlap.registry_path)->required();
  overlap_cmd->add_option("--train", overlap.train_path)->required();
  overlap_cmd->add_option("--test", overlap.test_path)->required();
  overlap_cmd->add_option("--out", overlap.out)->required();

  // match (+ match ingest)
  CLI::App* match_cmd = app.add_subcommand("match", "propose class-article correspondences");
  CLI::App* ingest_cmd = match_cmd->add_subcommand("ingest", "apply an edited review file");
  ingest_cmd->add_option("--registry", ingest.registry_path)->required();
  ingest_cmd->add_option("--review", ingest.review_path)->required();
  ingest_cmd->add_option("--out", ingest.out)->required();
  match_cmd->add_option("--registry", match.registry_path);
  match_cmd->add_option("--index", match.index_path, "title index TSV");
  match_cmd->add_option("--threshold", match.threshold);
  match_cmd->add_option("--out", match.out);

  // lengths
  CLI::App* lengths_cmd = app.add_subcommand("lengths", "text length vs accuracy analysis");
  lengths_cmd->add_option("--report", lengths.report_path)->required();
  lengths_cmd->add_option("--articles", lengths.articles_path)->required();
  lengths_cmd->add_option("--registry", lengths.registry_path)->required();
  lengths_cmd->add_option("--roots", lengths.roots_path)->required();
  lengths_cmd->add_option("--out", lengths.out)->required();

  // validate
  CLI::App* validate_cmd = app.add_subcommand("validate", "check bundle consistency");
  validate_cmd->add_option("--registry", validate.registry_path)->required();
  validate_cmd->add_option("--split", validate.split_paths);
  validate_cmd->add_option("--images", validate.images_path);
  validate_cmd->add_option("--aux", validate.aux_path);
  validate_cmd->add_option("--articles", validate.articles_path);
  validate_cmd->add_option("--expect-image-dim", validate.expect_image_dim);
  validate_cmd->add_option("--expect-aux-dim", validate.expect_aux_dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const std::uint64_t fallback_seed = env_default_seed();
    if (synth_cmd->parsed()) {
      synth.seed_given = synth_seed->count() > 0;
      if (!synth.seed_given) synth.spec.seed = fallback_seed;
      return cmd_synth(synth);
    }
    if (encode_cmd->parsed()) return cmd_encode(encode);
    if (train_cmd->parsed()) {
      if (train_seed_opt->count() > 0) train.seed = train_seed;
      return cmd_train(train);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (search_cmd->parsed()) {
      if (search_seed->count() == 0) search.seed = fallback_seed;
      return cmd_search(search);
    }
    if (exclude_cmd->parsed()) {
      if (exclude_seed->count() == 0) exclude.seed = fallback_seed;
      return cmd_exclude(exclude);
    }
    if (overlap_cmd->parsed()) return cmd_overlap(overlap);
    if (match_cmd->parsed()) {
      if (ingest_cmd->parsed()) return cmd_match_ingest(ingest);
      if (match.registry_path.empty() || match.index_path.empty() || match.out.empty())
        throw ConfigError("match: --registry, --index and --out are required");
      return cmd_match(match);
    }
    if (lengths_cmd->parsed()) return cmd_lengths(lengths);
    if (validate_cmd->parsed()) return cmd_validate(validate);
    std::cerr << "no subcommand given\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace zslforge
