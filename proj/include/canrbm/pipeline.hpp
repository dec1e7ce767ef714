// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "canrbm/can_codec.hpp"
#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/generator.hpp"
#include "canrbm/hashing.hpp"
#include "canrbm/ids_proxy.hpp"
#include "canrbm/metrics.hpp"
#include "canrbm/model_io.hpp"
#include "canrbm/rbm.hpp"
#include "canrbm/traffic_fixtures.hpp"
#include "canrbm/windows.hpp"

namespace canrbm {

/// Effective settings for one command invocation. Module seeds are derived
/// from the single global seed inside each command, so a config plus input
/// files fully determines every artifact.
struct PipelineConfig {
  std::string input;               // primary input file (log, dataset, model, CSV)
  std::string reference;           // similarity: reference dataset file
  std::string inputs_dir;          // ids-eval: directory of fixture logs
  std::string models_dir;          // ids-eval: directory of trained models
  std::string output_dir = ".";
  AttackType attack_type = AttackType::Gear;
  LabelFilter label_filter = LabelFilter::InjectedOnly;
  std::uint32_t scale_factor = 1'000'000;
  std::size_t kv = 0;              // 0 = follow the dataset's encoding mode
  std::size_t kh = 0;              // 0 = preset (Dos 8, others 32)
  TrainConfig train;
  GenerationConfig gen;
  SplitSpec split;
  ClassifierConfig clf;
  std::uint64_t seed = 0;
  bool strict_parse = false;
  std::size_t n_frames = 20000;    // fixtures: frames per attack log
  std::size_t normal_frames = 0;   // fixtures: frames in the attack-free log, 0 = n_frames
  double rate = 0.3;               // fixtures: injected fraction
  std::size_t export_images = 0;   // ids-eval: test windows to export as graymaps
};

namespace detail {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline std::string format_double(double x) {
  std::string s;
  append_double(s, x);
  return s;
}

inline std::string config_hash(ConfigEntries entries) {
  std::sort(entries.begin(), entries.end());
  Fnv1a64 h;
  for (const auto& [k, v] : entries) {
    h.update(k);
    h.update("=");
    h.update(v);
    h.update("\n");
  }
  return to_hex(h.value());
}

inline std::string content_hash(const std::string& bytes) {
  return to_hex(Fnv1a64().update(bytes.data(), bytes.size()).value());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input: " + path.string());
  return in;
}

/// Writes `<artifact>.manifest`: command, config hash, global seed, artifact
/// content hash, then the effective settings and any extra facts.
inline void write_manifest(const std::filesystem::path& artifact, std::string_view command,
                           const ConfigEntries& config, std::uint64_t seed,
                           const std::string& artifact_bytes, const ConfigEntries& extra = {}) {
  std::string text;
  text += "command\t";
  text += command;
  text += '\n';
  text += "config_hash\t" + config_hash(config) + '\n';
  text += "seed\t" + std::to_string(seed) + '\n';
  text += "content_hash\t" + content_hash(artifact_bytes) + '\n';
  for (const auto& [k, v] : config) text += "cfg." + k + '\t' + v + '\n';
  for (const auto& [k, v] : extra) text += k + '\t' + v + '\n';
  write_text_file(artifact.string() + ".manifest", text);
}

inline void emit(const std::filesystem::path& path, const std::string& bytes,
                 std::string_view command, const ConfigEntries& config, std::uint64_t seed,
                 const ConfigEntries& extra, std::vector<std::filesystem::path>& artifacts) {
  write_text_file(path, bytes);
  write_manifest(path, command, config, seed, bytes, extra);
  artifacts.push_back(path);
}

}  // namespace detail

/// Emit one attack-free log plus one log per attack class, all from the
/// default ECU pool, with per-log seeds derived from the global seed.
inline std::vector<std::filesystem::path> run_fixtures(const PipelineConfig& cfg) {
  if (cfg.n_frames < 1) throw ValidationError("fixtures: n_frames must be >= 1");
  validate(make_attack_spec(AttackType::Dos, cfg.rate));  // fail before writing anything
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  const auto pool = default_id_pool();
  const std::size_t normal_frames = cfg.normal_frames ? cfg.normal_frames : cfg.n_frames;

  struct LogPlan {
    const char* name;
    std::optional<AttackType> type;
  };
  const LogPlan plans[] = {{"normal", std::nullopt},
                           {"dos", AttackType::Dos},
                           {"fuzzy", AttackType::Fuzzy},
                           {"gear", AttackType::Gear},
                           {"rpm", AttackType::Rpm}};

  std::vector<std::filesystem::path> artifacts;
  std::uint64_t stream = 0;
  for (const auto& plan : plans) {
    const std::uint64_t log_seed = derive_seed(cfg.seed, stream++);
    std::optional<AttackSpec> attack;
    std::size_t n = normal_frames;
    if (plan.type) {
      attack = make_attack_spec(*plan.type, cfg.rate);
      n = cfg.n_frames;
    }
    const auto frames = simulate_traffic(n, pool, attack, log_seed);

    std::ostringstream csv;
    write_hcrl_csv(frames, csv);

    detail::ConfigEntries config = {
        {"command", "fixtures"},
        {"n_frames", std::to_string(cfg.n_frames)},
        {"normal_frames", std::to_string(normal_frames)},
        {"rate", detail::format_double(cfg.rate)},
        {"seed", std::to_string(cfg.seed)},
    };
    std::ostringstream params;
    write_fixture_manifest(pool, attack, n, log_seed, params);
    detail::ConfigEntries extra = {{"log", plan.name},
                                   {"log_seed", std::to_string(log_seed)}};
    std::istringstream param_lines(params.str());
    for (std::string line; std::getline(param_lines, line);) {
      const auto tab = line.find('\t');
      extra.emplace_back(line.substr(0, tab), tab == std::string::npos ? "" : line.substr(tab + 1));
    }
    detail::emit(dir / (std::string(plan.name) + ".csv"), csv.str(), "fixtures", config,
                 cfg.seed, extra, artifacts);
  }
  return artifacts;
}

/// Log file -> encoded dataset file.
inline std::vector<std::filesystem::path> run_preprocess(const PipelineConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  auto in = detail::open_input(cfg.input);
  ParseOptions opts;
  opts.strict = cfg.strict_parse;
  const auto parsed = parse_hcrl_csv(in, opts);
  const auto ds = encode_dataset(parsed.frames, cfg.attack_type, cfg.scale_factor,
                                 cfg.label_filter);

  std::ostringstream body;
  write_dataset(ds, body);

  const detail::ConfigEntries config = {
      {"command", "preprocess"},
      {"input", cfg.input},
      {"attack_type", std::string(to_string(cfg.attack_type))},
      {"label_filter", std::string(to_string(cfg.label_filter))},
      {"scale_factor", std::to_string(cfg.scale_factor)},
      {"strict_parse", cfg.strict_parse ? "1" : "0"},
  };
  const detail::ConfigEntries extra = {
      {"frames_parsed", std::to_string(parsed.frames.size())},
      {"lines_skipped", std::to_string(parsed.issues.size())},
      {"vectors_encoded", std::to_string(ds.vectors.size())},
  };
  std::vector<std::filesystem::path> artifacts;
  detail::emit(dir / (std::string(to_string(cfg.attack_type)) + "_dataset.txt"), body.str(),
               "preprocess", config, cfg.seed, extra, artifacts);
  return artifacts;
}

/// Dataset file -> trained model file + per-epoch training report.
inline std::vector<std::filesystem::path> run_train(const PipelineConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  auto in = detail::open_input(cfg.input);
  const auto ds = read_dataset(in);

  const std::size_t kv = bit_length(ds.mode());
  if (cfg.kv != 0 && cfg.kv != kv) {
    throw ValidationError("train: requested kv " + std::to_string(cfg.kv) +
                          " does not match the dataset's " + std::to_string(kv) +
                          "-bit encoding");
  }
  const std::size_t kh = cfg.kh ? cfg.kh : (ds.mode() == BitMode::Dos16 ? 8 : 32);

  TrainConfig tcfg = cfg.train;
  tcfg.seed = derive_seed(cfg.seed, 2);
  auto model = init_rbm(kv, kh, derive_seed(cfg.seed, 1), tcfg.init_sigma);
  const auto report = train_cd(model, ds, tcfg);

  ModelMeta meta;
  meta.attack_type = ds.attack_type;
  meta.mode = ds.mode();
  meta.scale_factor = ds.scale_factor;

  std::ostringstream model_body;
  save_model(model, meta, model_body);
  std::string report_body = "epoch\treconstruction_error\n";
  for (std::size_t e = 0; e < report.epoch_errors.size(); ++e) {
    report_body += std::to_string(e + 1) + '\t' +
                   detail::format_double(report.epoch_errors[e]) + '\n';
  }

  const detail::ConfigEntries config = {
      {"command", "train"},
      {"input", cfg.input},
      {"kv", std::to_string(kv)},
      {"kh", std::to_string(kh)},
      {"eta", detail::format_double(tcfg.eta)},
      {"epochs", std::to_string(tcfg.epochs)},
      {"cd_k", std::to_string(tcfg.cd_k)},
      {"batch_size", std::to_string(tcfg.batch_size)},
      {"init_sigma", detail::format_double(tcfg.init_sigma)},
  };
  const detail::ConfigEntries extra = {
      {"model_id", model_id(model, meta)},
      {"parameter_count", std::to_string(model.parameter_count())},
      {"final_error", report.epoch_errors.empty()
                          ? "nan"
                          : detail::format_double(report.epoch_errors.back())},
      {"training_vectors", std::to_string(ds.vectors.size())},
  };

  const auto prefix = std::string(to_string(ds.attack_type));
  std::vector<std::filesystem::path> artifacts;
  detail::emit(dir / (prefix + "_model.txt"), model_body.str(), "train", config, cfg.seed,
               extra, artifacts);
  detail::emit(dir / (prefix + "_train_report.tsv"), report_body, "train", config, cfg.seed,
               extra, artifacts);
  return artifacts;
}

/// Model file -> generated CSV (input-log schema, tick-valued timestamps).
inline std::vector<std::filesystem::path> run_generate(const PipelineConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  auto in = detail::open_input(cfg.input);
  const auto [model, meta] = load_model(in);

  GenerationConfig gen = cfg.gen;
  gen.seed = cfg.seed;
  const auto frames = generate_frames(model, meta, gen);

  std::ostringstream csv;
  write_generated_csv(frames, csv);

  const detail::ConfigEntries config = {
      {"command", "generate"},
      {"input", cfg.input},
      {"count", std::to_string(gen.count)},
      {"gibbs_iters", std::to_string(gen.gibbs_iters)},
      {"output_mode", std::string(to_string(gen.output_mode))},
  };
  std::ostringstream gen_manifest;
  write_generation_manifest(model_id(model, meta), meta, gen, gen_manifest);
  detail::ConfigEntries extra;
  std::istringstream lines(gen_manifest.str());
  for (std::string line; std::getline(lines, line);) {
    const auto tab = line.find('\t');
    extra.emplace_back(line.substr(0, tab), tab == std::string::npos ? "" : line.substr(tab + 1));
  }

  std::vector<std::filesystem::path> artifacts;
  detail::emit(dir / (std::string(to_string(meta.attack_type)) + "_generated.csv"), csv.str(),
               "generate", config, cfg.seed, extra, artifacts);
  return artifacts;
}

/// Generated CSV + reference dataset -> similarity report over both pairing
/// strategies.
inline std::vector<std::filesystem::path> run_similarity(const PipelineConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  auto ref_in = detail::open_input(cfg.reference);
  const auto reference = read_dataset(ref_in);
  auto gen_in = detail::open_input(cfg.input);
  const auto generated = read_generated_csv(gen_in, reference.mode());

  std::vector<BitVector> gen_vecs;
  gen_vecs.reserve(generated.size());
  for (const auto& g : generated) gen_vecs.push_back(generated_bitvector(g));

  const SimilarityReport reports[] = {
      dataset_similarity_report(gen_vecs, reference.vectors, PairingStrategy::NearestNeighbor,
                                cfg.seed),
      dataset_similarity_report(gen_vecs, reference.vectors, PairingStrategy::RandomPairs,
                                cfg.seed),
  };
  std::ostringstream body;
  write_similarity_tsv(reports, body);

  const detail::ConfigEntries config = {
      {"command", "similarity"},
      {"input", cfg.input},
      {"reference", cfg.reference},
  };
  const detail::ConfigEntries extra = {
      {"nearest_neighbor_cosine", detail::format_double(reports[0].mean_cosine)},
      {"random_pairs_cosine", detail::format_double(reports[1].mean_cosine)},
  };
  std::vector<std::filesystem::path> artifacts;
  detail::emit(dir / "similarity_report.tsv", body.str(), "similarity", config, cfg.seed, extra,
               artifacts);
  return artifacts;
}

/// Fixture logs + per-class models -> before/after augmentation comparison.
inline std::vector<std::filesystem::path> run_ids_eval(const PipelineConfig& cfg) {
  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  const std::filesystem::path inputs = cfg.inputs_dir;
  const std::filesystem::path models_dir = cfg.models_dir;

  ParseOptions opts;
  opts.strict = cfg.strict_parse;
  const auto load_log = [&](const char* name) {
    auto in = detail::open_input(inputs / (std::string(name) + ".csv"));
    return parse_hcrl_csv(in, opts).frames;
  };
  ExperimentInputs experiment_inputs;
  experiment_inputs.normal = load_log("normal");
  experiment_inputs.attacks[AttackType::Dos] = load_log("dos");
  experiment_inputs.attacks[AttackType::Fuzzy] = load_log("fuzzy");
  experiment_inputs.attacks[AttackType::Gear] = load_log("gear");
  experiment_inputs.attacks[AttackType::Rpm] = load_log("rpm");

  std::map<AttackType, RbmModel> models;
  for (const auto type :
       {AttackType::Dos, AttackType::Fuzzy, AttackType::Gear, AttackType::Rpm}) {
    auto in = detail::open_input(models_dir /
                                 (std::string(to_string(type)) + "_model.txt"));
    auto [model, meta] = load_model(in);
    if (meta.attack_type != type) {
      throw ValidationError("ids-eval: model file class disagrees with its name");
    }
    models.emplace(type, std::move(model));
  }

  ExperimentConfig ecfg;
  ecfg.scale_factor = cfg.scale_factor;
  ecfg.split = cfg.split;
  ecfg.split.seed = derive_seed(cfg.seed, 1);
  ecfg.gen = cfg.gen;
  ecfg.gen.seed = derive_seed(cfg.seed, 2);
  ecfg.clf = cfg.clf;
  ecfg.clf.seed = derive_seed(cfg.seed, 3);

  const auto result = augmentation_experiment(experiment_inputs, models, ecfg);

  const detail::ConfigEntries config = {
      {"command", "ids-eval"},
      {"inputs_dir", cfg.inputs_dir},
      {"models_dir", cfg.models_dir},
      {"scale_factor", std::to_string(cfg.scale_factor)},
      {"count", std::to_string(cfg.gen.count)},
      {"gibbs_iters", std::to_string(cfg.gen.gibbs_iters)},
      {"clf_epochs", std::to_string(cfg.clf.epochs)},
      {"clf_lr", detail::format_double(cfg.clf.lr)},
      {"clf_batch_size", std::to_string(cfg.clf.batch_size)},
  };
  const detail::ConfigEntries extra = {
      {"train_windows_before", std::to_string(result.report.train_windows_before)},
      {"train_windows_after", std::to_string(result.report.train_windows_after)},
      {"val_hash", to_hex(result.report.val_hash)},
      {"test_hash", to_hex(result.report.test_hash)},
  };

  std::vector<std::filesystem::path> artifacts;
  std::ostringstream comparison;
  write_comparison_tsv(result.report, comparison);
  detail::emit(dir / "comparison_report.tsv", comparison.str(), "ids-eval", config, cfg.seed,
               extra, artifacts);

  std::ostringstream before, after;
  write_classification_tsv(result.report.before, before);
  write_classification_tsv(result.report.after, after);
  detail::emit(dir / "ids_before.tsv", before.str(), "ids-eval", config, cfg.seed, extra,
               artifacts);
  detail::emit(dir / "ids_after.tsv", after.str(), "ids-eval", config, cfg.seed, extra,
               artifacts);

  std::ostringstream split_manifest;
  write_split_manifest(result.split, split_manifest);
  detail::emit(dir / "split_manifest.tsv", split_manifest.str(), "ids-eval", config, cfg.seed,
               extra, artifacts);

  if (cfg.export_images > 0) {
    const std::size_t n = std::min(cfg.export_images, result.split.test.size());
    const auto paths = export_window_images(
        std::span<const WindowSample>(result.split.test.data(), n), dir / "windows");
    artifacts.insert(artifacts.end(), paths.begin(), paths.end());
  }
  return artifacts;
}

}  // namespace canrbm
