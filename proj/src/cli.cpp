#include "cmta/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cmta/errors.hpp"
#include "cmta/synthetic.hpp"
#include "cmta/trainer.hpp"

namespace cmta {

namespace {

namespace fs = std::filesystem;

// Options shared by the model-consuming subcommands.
struct ScoringArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  bool random_eval = false;
  std::uint64_t seed = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << text;
    if (!f.flush()) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// `key=value` overrides given with --set.
KeyValues parse_overrides(const std::vector<std::string>& sets) {
  KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

void check_dims(const ModelConfig& config, const std::vector<LoadedClip>& clips) {
  for (const auto& c : clips) {
    if (c.clip.visual_dim() != config.visual_dim || c.clip.text_dim() != config.text_dim) {
      throw ConfigError("dimension mismatch: checkpoint expects d_v=" + std::to_string(config.visual_dim) +
                        ", d_e=" + std::to_string(config.text_dim) + " but " + c.clip.clip_id +
                        " has d_v=" + std::to_string(c.clip.visual_dim()) + ", d_e=" +
                        std::to_string(c.clip.text_dim()));
    }
  }
}

struct Scored {
  Checkpoint checkpoint;
  std::vector<LoadedClip> clips;
  std::vector<ScoredPrediction> preds;
};

Scored score_manifest(const ScoringArgs& args) {
  Scored s;
  s.checkpoint = load_checkpoint(args.checkpoint);
  s.clips = load_clips(load_manifest(args.manifest));
  check_dims(s.checkpoint.config.model, s.clips);
  std::mt19937_64 rng(args.seed);
  s.preds = score_clips(s.checkpoint.params, s.checkpoint.config.model, s.clips,
                        args.random_eval ? EvalSampling::kRandom : EvalSampling::kCenter, &rng);
  return s;
}

int cmd_gen_synthetic(const std::string& config_path, const std::vector<std::string>& sets,
                      const std::optional<std::uint64_t>& seed, const std::string& out_dir, std::ostream& out) {
  SynthConfig config;
  if (!config_path.empty()) config.apply(read_key_values(config_path));
  config.apply(parse_overrides(sets));
  if (seed) config.seed = *seed;
  config.validate();
  ensure_dir(out_dir);
  const Manifest m = gen_dataset(config, out_dir);
  write_text(fs::path(out_dir) / "synth_config.txt", config.to_text());
  out << "wrote " << m.count(Label::kReal) << " real and " << m.count(Label::kFake) << " fake clips to "
      << (fs::path(out_dir) / "manifest.csv").string() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<double> val_split;
  std::string variant;
  std::string train_manifest;
  std::string val_manifest;
  std::string out_dir;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  TrainConfig config;
  if (!args.config_path.empty()) config.apply(read_key_values(args.config_path));
  config.apply(parse_overrides(args.sets));
  if (args.seed) config.seed = *args.seed;
  if (args.val_split) config.val_split = *args.val_split;
  if (!args.variant.empty()) config.model.variant = parse_variant(args.variant);

  const Manifest train_manifest = load_manifest(args.train_manifest);
  Manifest train_part, val_part;
  if (!args.val_manifest.empty()) {
    train_part = train_manifest;
    val_part = load_manifest(args.val_manifest);
  } else {
    std::tie(train_part, val_part) = split_manifest(train_manifest, config.val_split, config.seed);
  }
  out << "split: " << train_part.size() << " train / " << val_part.size() << " val\n";

  const auto train_set = load_clips(train_part);
  const auto val_set = load_clips(val_part);
  infer_dims(config.model, train_set);
  config.validate();

  ensure_dir(args.out_dir);
  const fs::path dir(args.out_dir);
  std::string record = "# train_manifest: " + args.train_manifest + "\n";
  if (!args.val_manifest.empty()) record += "# val_manifest: " + args.val_manifest + "\n";
  record += config.to_text();
  write_text(dir / "effective_config.txt", record);

  if (!args.quiet) out << "epoch,train_loss,val_metric,lr\n";
  const TrainResult result = train(config, train_set, val_set, [&](const EpochLog& row) {
    if (!args.quiet) out << render_epoch_row(row) << std::flush;
  });
  save_checkpoint(result.best, dir / "checkpoint.bin");
  save_checkpoint(result.last, dir / "last.bin");
  write_text(dir / "epoch_log.csv", render_epoch_log(result.log));
  out << "best epoch " << result.best.epoch << ", val " << to_string(config.val_metric) << ' '
      << format_real(result.best.best_metric) << '\n';
  return kExitOk;
}

int cmd_eval(const ScoringArgs& args, std::ostream& out, std::ostream& err) {
  const Scored s = score_manifest(args);
  std::vector<SubsetPrediction> rows;
  rows.reserve(s.preds.size());
  for (std::size_t i = 0; i < s.preds.size(); ++i) rows.push_back({s.clips[i].subset, s.preds[i]});
  const SubsetReport report = per_subset_report(rows);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  const std::string csv = render_report_csv(report);
  if (args.out.empty()) {
    out << csv;
  } else {
    write_text(args.out, csv);
    out << csv;
  }
  return kExitOk;
}

int cmd_predict(const ScoringArgs& args, std::ostream& out) {
  const Scored s = score_manifest(args);
  std::string csv = "clip_id,label,p_fake\n";
  char buf[64];
  for (const auto& p : s.preds) {
    std::snprintf(buf, sizeof buf, ",%d,%.9g\n", to_int(p.label), p.score);
    csv += p.clip_id + buf;
  }
  if (args.out.empty()) out << csv;
  else write_text(args.out, csv);
  return kExitOk;
}

int cmd_dump_features(const ScoringArgs& args, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const auto clips = load_clips(load_manifest(args.manifest));
  const ModelConfig& config = ckpt.config.model;
  check_dims(config, clips);
  const auto len = static_cast<long>(config.clip_len);
  std::mt19937_64 rng(args.seed);

  std::string csv = "clip_id,label";
  for (std::size_t j = 0; j < config.fusion_width(); ++j) csv += ",f" + std::to_string(j);
  csv += '\n';
  char buf[32];
  for (const auto& c : clips) {
    const EmbeddingClip window = args.random_eval ? sample_clip(c.clip, len, rng) : center_clip(c.clip, len);
    const Tensor features = extract_features(window, ckpt.params, config);
    csv += c.clip.clip_id + ',' + std::to_string(to_int(c.clip.label));
    for (Real v : features.values()) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
      csv += buf;
    }
    csv += '\n';
  }
  if (args.out.empty()) out << csv;
  else write_text(args.out, csv);
  return kExitOk;
}

int cmd_validate_data(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const Manifest m = load_manifest(manifest_path);
  std::size_t bad = 0, n_real = 0, n_fake = 0;
  std::map<std::size_t, std::size_t> frames;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> dims;
  for (const auto& e : m.entries) {
    try {
      const EmbeddingClip clip = read_clip(e.resolved);
      if (clip.label != e.label) {
        throw LoadError(LoadErrorKind::kMalformed, e.resolved.string(),
                        "manifest label " + std::to_string(to_int(e.label)) + " disagrees with file label " +
                            std::to_string(to_int(clip.label)));
      }
      (clip.label == Label::kReal ? n_real : n_fake)++;
      ++frames[clip.frames()];
      ++dims[{clip.visual_dim(), clip.text_dim()}];
    } catch (const LoadError& ex) {
      ++bad;
      err << "invalid: " << ex.what() << '\n';
    }
  }
  out << "clips: " << m.size() << " (" << n_real << " real, " << n_fake << " fake, " << bad << " invalid)\n";
  for (const auto& [d, count] : dims) out << "dims d_v=" << d.first << " d_e=" << d.second << ": " << count << '\n';
  if (dims.size() > 1) err << "warning: inconsistent embedding dimensions across files\n";
  out << "frames histogram:\n";
  for (const auto& [n, count] : frames) out << "  " << n << ": " << count << '\n';
  return bad ? kExitDataInvalid : kExitOk;
}

int exit_code_for(const LoadError& e) {
  return e.kind() == LoadErrorKind::kMissingFile ? kExitIoError : kExitDataInvalid;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal temporal alignment detector for AI-generated video"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::vector<std::string> sets;
  std::uint64_t seed_value = 0;
  double val_split_value = 0;
  ScoringArgs scoring;
  TrainArgs train_args;
  std::string manifest_path;

  auto* gen = app.add_subcommand("gen-synthetic", "write a labeled synthetic dataset and manifest");
  gen->add_option("--config", config_path, "key = value file")->check(CLI::ExistingFile);
  gen->add_option("--set", sets, "override one key, key=value");
  gen->add_option("--seed", seed_value, "generator seed");
  gen->add_option("--out", out_path, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model and write checkpoint, epoch log and effective config");
  tr->add_option("--config", train_args.config_path, "key = value file");
  tr->add_option("--set", train_args.sets, "override one key, key=value");
  tr->add_option("--seed", seed_value, "training seed");
  tr->add_option("--val-split", val_split_value, "validation fraction when --val is absent");
  tr->add_option("--variant", train_args.variant, "full|v-only|t-only|vt-cgtm|vt-fgtm");
  tr->add_option("--train", train_args.train_manifest, "training manifest")->required();
  tr->add_option("--val", train_args.val_manifest, "validation manifest");
  tr->add_option("--out", train_args.out_dir, "output directory")->required();
  tr->add_flag("--quiet", train_args.quiet, "do not print per-epoch rows");

  auto add_scoring = [&](CLI::App* sub, bool random_flag) {
    sub->add_option("--checkpoint", scoring.checkpoint, "checkpoint file")->required();
    sub->add_option("--manifest", scoring.manifest, "clip manifest")->required();
    sub->add_option("--out", scoring.out, "output CSV (stdout when absent)");
    if (random_flag) {
      sub->add_flag("--random-eval", scoring.random_eval, "random window instead of the centered one");
      sub->add_option("--seed", scoring.seed, "seed for --random-eval");
    }
  };
  auto* ev = app.add_subcommand("eval", "per-subset AP/AUC/ACC report");
  add_scoring(ev, true);
  auto* pr = app.add_subcommand("predict", "per-clip fake probability");
  add_scoring(pr, true);
  auto* df = app.add_subcommand("dump-features", "per-clip fused features before the head");
  add_scoring(df, true);

  auto* vd = app.add_subcommand("validate-data", "check every clip referenced by a manifest");
  vd->add_option("--manifest", manifest_path, "clip manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*gen) {
      std::optional<std::uint64_t> seed;
      if (gen->count("--seed")) seed = seed_value;
      return cmd_gen_synthetic(config_path, sets, seed, out_path, out);
    }
    if (*tr) {
      if (tr->count("--seed")) train_args.seed = seed_value;
      if (tr->count("--val-split")) train_args.val_split = val_split_value;
      return cmd_train(train_args, out);
    }
    if (*ev) return cmd_eval(scoring, out, err);
    if (*pr) return cmd_predict(scoring, out);
    if (*df) return cmd_dump_features(scoring, out);
    if (*vd) return cmd_validate_data(manifest_path, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataInvalid;
  } catch (const UndefinedMetric& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  }
  return kExitConfigError;
}

}  // namespace cmta
