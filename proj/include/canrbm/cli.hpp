// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "canrbm/pipeline.hpp"

namespace canrbm {

/// Exit codes: 0 success, 2 usage or validation, 3 I/O, 4 dimension mismatch,
/// 5 malformed input data.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDimension = 4;
inline constexpr int kExitParse = 5;

namespace detail {

/// Splices `--config FILE` out of the argument list and inserts one
/// `--key=value` token per config line in its place. Keys already given as
/// explicit flags are dropped, so flags win regardless of their position.
inline void expand_config_args(std::vector<std::string>& args) {
  std::string path;
  std::size_t at = 0;
  bool found = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config requires a file path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      at = i;
      found = true;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      at = i;
      found = true;
      break;
    }
  }
  if (!found) return;

  std::ifstream in(path);
  if (!in) throw IoError("config file: cannot open " + path);

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config file: expected key=value, got '" + std::string(trimmed) +
                            "'");
    }
    std::string key(trim(trimmed.substr(0, eq)));
    if (key.rfind("--", 0) != 0) key = "--" + key;
    if (key.size() <= 2) throw ValidationError("config file: line has an empty key");
    const std::string value(trim(trimmed.substr(eq + 1)));

    const auto prior = std::find_if(entries.begin(), entries.end(),
                                    [&](const auto& kv) { return kv.first == key; });
    if (prior != entries.end()) {
      prior->second = value;  // within the file, the last assignment wins
    } else {
      entries.emplace_back(std::move(key), value);
    }
  }

  std::vector<std::string> expansion;
  for (const auto& [key, value] : entries) {
    const bool overridden = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == key || a.rfind(key + "=", 0) == 0;
    });
    if (!overridden) expansion.push_back(key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), expansion.begin(),
              expansion.end());
}

}  // namespace detail

/// Parses `args` (no program name, natural order) and runs one subcommand.
/// All output goes through `out`/`err`, which keeps the CLI testable and the
/// artifacts a pure function of (input files, config).
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthesize CAN-bus attack traffic with per-class RBMs"};
  app.name("canrbm");
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::string attack = "gear";
  std::string label_filter = "injected";
  std::string output_mode = "stochastic";
  std::string config_file;  // consumed by expand_config_args; listed for --help

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--output-dir", cfg.output_dir, "Directory for artifacts")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Global seed; module seeds derive from it")
        ->capture_default_str();
    sub->add_option("--config", config_file, "Config file with key=value lines; flags win");
    return sub;
  };

  auto* fixtures = add_common(app.add_subcommand(
      "fixtures", "Emit synthetic labeled logs: normal.csv plus one log per attack"));
  fixtures->add_option("--n-frames", cfg.n_frames, "Frames per attack log")
      ->capture_default_str();
  fixtures->add_option("--normal-frames", cfg.normal_frames,
                       "Frames in the attack-free log (0 = same as --n-frames)");
  fixtures->add_option("--rate", cfg.rate, "Injected-frame fraction in (0,1)")
      ->capture_default_str();

  auto* preprocess = add_common(
      app.add_subcommand("preprocess", "Encode a CSV log into a binary-vector dataset"));
  preprocess->add_option("--input", cfg.input, "CSV log file")->required();
  preprocess->add_option("--attack-type", attack, "One of dos, fuzzy, gear, rpm")
      ->capture_default_str();
  preprocess->add_option("--scale-factor", cfg.scale_factor, "Timestamp ticks per second")
      ->capture_default_str();
  preprocess->add_option("--label-filter", label_filter,
                         "Frames to encode: injected, regular, or all")
      ->capture_default_str();
  preprocess->add_flag("--strict-parse", cfg.strict_parse,
                       "Fail on the first malformed log line instead of skipping");

  auto* train =
      add_common(app.add_subcommand("train", "Train an RBM on an encoded dataset"));
  train->add_option("--input", cfg.input, "Dataset file from preprocess")->required();
  train->add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", cfg.train.eta, "Learning rate")->capture_default_str();
  train->add_option("--cd-k", cfg.train.cd_k, "Gibbs steps per CD update")
      ->capture_default_str();
  train->add_option("--batch-size", cfg.train.batch_size, "Mini-batch size")
      ->capture_default_str();
  train->add_option("--init-sigma", cfg.train.init_sigma, "Stddev of initial weights")
      ->capture_default_str();
  train->add_option("--kv", cfg.kv, "Visible units (0 = match the dataset encoding)");
  train->add_option("--kh", cfg.kh, "Hidden units (0 = preset: 8 for dos, else 32)");

  auto* generate =
      add_common(app.add_subcommand("generate", "Sample synthetic frames from a model"));
  generate->add_option("--input", cfg.input, "Model file from train")->required();
  generate->add_option("--count", cfg.gen.count, "Samples to generate")->capture_default_str();
  generate->add_option("--gibbs-iters", cfg.gen.gibbs_iters, "Gibbs iterations per sample")
      ->capture_default_str();
  generate->add_option("--output-mode", output_mode, "stochastic or deterministic")
      ->capture_default_str();

  auto* similarity = add_common(app.add_subcommand(
      "similarity", "Score generated samples against a reference dataset"));
  similarity->add_option("--input", cfg.input, "Generated CSV from generate")->required();
  similarity->add_option("--reference", cfg.reference, "Reference dataset file")->required();

  auto* ids_eval = add_common(app.add_subcommand(
      "ids-eval", "Before/after augmentation experiment over fixture logs"));
  ids_eval->add_option("--inputs-dir", cfg.inputs_dir, "Directory holding fixture logs")
      ->required();
  ids_eval->add_option("--models-dir", cfg.models_dir, "Directory holding trained models")
      ->required();
  ids_eval->add_option("--scale-factor", cfg.scale_factor, "Timestamp ticks per second")
      ->capture_default_str();
  ids_eval->add_option("--count", cfg.gen.count, "Generated samples per attack class")
      ->capture_default_str();
  ids_eval->add_option("--gibbs-iters", cfg.gen.gibbs_iters, "Gibbs iterations per sample")
      ->capture_default_str();
  ids_eval->add_option("--clf-epochs", cfg.clf.epochs, "Classifier epochs")
      ->capture_default_str();
  ids_eval->add_option("--clf-lr", cfg.clf.lr, "Classifier learning rate")
      ->capture_default_str();
  ids_eval->add_option("--clf-batch-size", cfg.clf.batch_size, "Classifier batch size")
      ->capture_default_str();
  ids_eval->add_option("--export-images", cfg.export_images,
                       "Export this many test windows as graymap images");
  ids_eval->add_flag("--strict-parse", cfg.strict_parse,
                     "Fail on the first malformed log line instead of skipping");

  try {
    detail::expand_config_args(args);
  } catch (const IoError& e) {
    err << "canrbm: io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "canrbm: " << e.what() << '\n';
    return kExitValidation;
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    cfg.attack_type = parse_attack_type(attack);
    cfg.label_filter = parse_label_filter(label_filter);
    cfg.gen.output_mode = parse_output_mode(output_mode);

    std::vector<std::filesystem::path> artifacts;
    if (fixtures->parsed()) artifacts = run_fixtures(cfg);
    else if (preprocess->parsed()) artifacts = run_preprocess(cfg);
    else if (train->parsed()) artifacts = run_train(cfg);
    else if (generate->parsed()) artifacts = run_generate(cfg);
    else if (similarity->parsed()) artifacts = run_similarity(cfg);
    else if (ids_eval->parsed()) artifacts = run_ids_eval(cfg);

    for (const auto& path : artifacts) out << "wrote " << path.string() << '\n';
    return kExitOk;
  } catch (const ParseError& e) {
    err << "canrbm: input data error: " << e.what() << '\n';
    return kExitParse;
  } catch (const DimensionError& e) {
    err << "canrbm: dimension error: " << e.what() << '\n';
    return kExitDimension;
  } catch (const IoError& e) {
    err << "canrbm: io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "canrbm: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace canrbm
