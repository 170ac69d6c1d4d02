// Acceptance suite. Each criterion prints one PASS/FAIL line; the exit status
// is nonzero when any selected criterion fails.
//
//   cmta_acceptance <criterion|all> [path to cmta executable]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "cmta/encoder.hpp"
#include "cmta/grad_check.hpp"
#include "cmta/gru.hpp"
#include "cmta/metrics.hpp"
#include "cmta/model.hpp"
#include "cmta/optim.hpp"
#include "cmta/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cmta;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

const Variant kVariants[] = {Variant::kFull, Variant::kVOnly, Variant::kTOnly, Variant::kVtCgtm, Variant::kVtFgtm};

// ---- in-process criteria (64-bit build) ----

EmbeddingClip random_clip(std::size_t frames, std::size_t dim, std::mt19937_64& rng, Label label) {
  EmbeddingClip c;
  c.clip_id = "c";
  c.visual = Tensor({frames, dim});
  c.textual = Tensor({frames, dim});
  oracle::fill_normal(c.visual, rng);
  oracle::fill_normal(c.textual, rng);
  c.label = label;
  return c;
}

ModelConfig grad_config(Variant v) {
  ModelConfig c;
  c.clip_len = 4;
  c.visual_dim = c.text_dim = 8;
  c.hidden = c.model_dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.variant = v;
  return c;
}

Outcome gradient_integrity() {
  Outcome o;
  const auto start = Clock::now();
  double worst = 0;
  std::string worst_at;
  for (Variant v : kVariants) {
    const ModelConfig config = grad_config(v);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      ModelParams params = init_params(config, rng);
      const EmbeddingClip clip = random_clip(4, 8, rng, seed % 2 ? Label::kFake : Label::kReal);
      auto loss = [&](ad::Tape& tape, const std::vector<ad::Var>& leaves) {
        ModelVars vars;
        vars.encoder.layers.resize(config.layers);
        std::size_t i = 0;
        ModelVars::visit(vars, [&](const auto&, ad::Var& slot, ParamKind) { slot = leaves[i++]; });
        return bce_loss(forward(tape, vars, config, clip).probs, clip.label);
      };
      const auto r = ad::grad_check(loss, slots<Tensor>(params));
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_at = to_string(v) + " seed " + std::to_string(seed);
      }
    }
  }
  const double elapsed = seconds_since(start);
  o.require(worst < 1e-4, "max relative error " + fmt(worst) + " (" + worst_at + ") over 5 variants x 20 seeds");
  o.require(elapsed < 60, "runtime " + fmt(elapsed, 3) + " s");
  return o;
}

double max_diff(const Tensor& a, const oracle::Vec& b) {
  double worst = 0;
  for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Outcome forward_oracles() {
  Outcome o;
  const auto start = Clock::now();
  double gru = 0, attention = 0, embed = 0, pool = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t hidden = 2 + seed % 7, frames = 1 + seed % 8;
    GruParams g = make_gru_params(hidden);
    GruParams::visit(g, [&](const auto&, Tensor& t, ParamKind) { oracle::fill_normal(t, rng, 0.7); });
    Tensor seq({frames, 1});
    oracle::fill_normal(seq, rng);
    const oracle::Vec h0(hidden, 0.0);
    gru = std::max(gru, max_diff(gru_forward(seq, g, Tensor({1, hidden})), oracle::gru(oracle::to_vec(seq), g, h0)));

    const std::size_t heads = std::size_t{1} << (seed % 3), model_dim = 4 * heads, input = 3 + seed % 6;
    EncoderParams p = make_encoder_params({input, frames, model_dim, 2 * model_dim, 1});
    EncoderParams::visit(p, [&](const auto&, Tensor& t, ParamKind kind) {
      oracle::fill_normal(t, rng, 0.5);
      if (kind == ParamKind::kGain)
        for (auto& v : t.values()) v += 1;
    });
    Tensor x({frames, input}), u({frames, model_dim});
    oracle::fill_normal(x, rng);
    oracle::fill_normal(u, rng);
    ad::Tape tape;
    const EncoderVars vars = bind_constant(tape, p);
    embed = std::max(embed, oracle::max_abs_diff(embed_sequence(tape.constant(x), vars).value(),
                                                 oracle::embed(oracle::to_mat(x), p)));
    attention = std::max(attention, oracle::max_abs_diff(self_attention(tape.constant(u), vars.layers[0], heads).value(),
                                                         oracle::attention(oracle::to_mat(u), p.layers[0], heads)));
    pool = std::max(pool, max_diff(temporal_pool(tape.constant(u)).value(), oracle::pool(oracle::to_mat(u))));
  }
  const double elapsed = seconds_since(start);
  o.require(gru <= 1e-10, "gru_forward " + fmt(gru));
  o.require(attention <= 1e-10, "self_attention " + fmt(attention));
  o.require(embed <= 1e-10, "embed_sequence " + fmt(embed));
  o.require(pool <= 1e-10, "temporal_pool " + fmt(pool));
  o.require(elapsed < 10, "runtime " + fmt(elapsed, 3) + " s");
  return o;
}

std::vector<ScoredPrediction> fixture(std::vector<int> labels, std::vector<double> scores) {
  std::vector<ScoredPrediction> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.push_back({"c" + std::to_string(i), scores[i], label_from_int(labels[i])});
  return out;
}

// Worked examples are published to four decimals.
bool matches_published(double value, double published) { return std::round(value * 1e4) / 1e4 == published; }

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(2025);
  double auc_err = 0, ap_err = 0;
  std::size_t with_ties = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = oracle::random_fixture(rng);
    std::map<double, int> seen;
    for (const auto& x : p) ++seen[x.score];
    if (seen.size() < p.size()) ++with_ties;
    auc_err = std::max(auc_err, std::abs(auc(p) - oracle::auc_pairs(p)));
    ap_err = std::max(ap_err, std::abs(average_precision(p) - oracle::ap_sweep(p)));
  }
  o.require(auc_err <= 1e-12, "auc vs pairwise enumeration " + fmt(auc_err));
  o.require(ap_err <= 1e-12, "ap vs threshold sweep " + fmt(ap_err));
  o.require(with_ties > 0, std::to_string(with_ties) + "/200 fixtures with ties");
  const double a = auc(fixture({1, 0, 1, 0}, {0.8, 0.8, 0.4, 0.2}));
  o.require(matches_published(a, 0.875), "AUC worked example gives " + fmt(a) + ", published 0.875");
  const double ap = average_precision(fixture({1, 0, 1}, {0.9, 0.8, 0.7}));
  o.require(matches_published(ap, 0.8333), "AP worked example gives " + fmt(ap) + ", published 0.8333");
  return o;
}

Outcome scheduler_trace() {
  Outcome o;
  PlateauScheduler s(1e-4, 0.5, 5);
  std::vector<double> lrs;
  for (int e = 0; e < 6; ++e) lrs.push_back(s.step(0.7));
  std::size_t halvings = 0;
  for (std::size_t i = 1; i < lrs.size(); ++i) halvings += lrs[i] == lrs[i - 1] / 2;
  o.require(halvings == 1 && lrs.back() == 5e-5, "flat for 6 epochs: " + std::to_string(halvings) + " halving, final lr " +
                                                     fmt(lrs.back()));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  PlateauScheduler long_run(1e-4, 0.5, 5);
  bool on_ladder = true;
  for (int e = 0; e < 200; ++e) {
    const double lr = long_run.step(u(rng) < 0.2 ? 0.5 + 0.002 * e : u(rng) * 0.5);
    on_ladder = on_ladder && lr == 1e-4 * std::pow(0.5, long_run.state().reductions);
  }
  o.require(on_ladder, "lr equals 1e-4*0.5^k over 200 random epochs (k=" +
                           std::to_string(long_run.state().reductions) + ")");
  return o;
}

// ---- criteria driving the command line tool ----

struct Tool {
  std::string exe;
  fs::path work;

  // Runs one command, logging its output under the work dir.
  bool run(const std::string& args, const std::string& log) const {
    const std::string cmd = "\"" + exe + "\" " + args + " > \"" + (work / log).string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) std::cerr << "command failed (" << rc << "): " << cmd << '\n' << test::read_file(work / log);
    return rc == 0;
  }

  std::string path(const std::string& name) const { return "\"" + (work / name).string() + "\""; }
};

struct MeanRow {
  double ap = NAN, auc = NAN, acc = NAN;
};

MeanRow mean_row(const std::string& csv) {
  MeanRow m;
  const auto at = csv.find("\nmean,");
  if (at == std::string::npos) return m;
  std::sscanf(csv.c_str() + at + 6, "%lf,%lf,%lf", &m.ap, &m.auc, &m.acc);
  return m;
}

const std::string kReduced = " --set hidden=64 --set model_dim=64 --set batch_size=64 --set lr=0.001";

// Generate, train and evaluate on a held-out set. Returns the mean report row.
MeanRow train_and_eval(const Tool& t, const std::string& tag, const std::string& synth, const std::string& train_opts,
                       bool& ok) {
  ok = t.run("gen-synthetic" + synth + " --seed 0 --out " + t.path(tag + "/train"), tag + "_gen_train.log") &&
       t.run("gen-synthetic" + synth + " --seed 1 --set clips_per_class=500 --out " + t.path(tag + "/test"),
             tag + "_gen_test.log") &&
       t.run("train --quiet --train " + t.path(tag + "/train/manifest.csv") + train_opts + " --out " +
                 t.path(tag + "/run"),
             tag + "_train.log") &&
       t.run("eval --checkpoint " + t.path(tag + "/run/checkpoint.bin") + " --manifest " +
                 t.path(tag + "/test/manifest.csv") + " --out " + t.path(tag + "/report.csv"),
             tag + "_eval.log");
  return ok ? mean_row(test::read_file(t.work / tag / "report.csv")) : MeanRow{};
}

Outcome synthetic_separability(const Tool& t) {
  Outcome o;
  const auto start = Clock::now();
  bool ok = false;
  const MeanRow m = train_and_eval(t, "sep", "", kReduced + " --set epochs=20", ok);
  o.require(ok, "pipeline ran");
  o.require(m.auc >= 0.95, "held-out AUC " + fmt(m.auc, 4));
  o.require(m.acc >= 0.90, "held-out ACC " + fmt(m.acc, 4));
  const MeanRow null = train_and_eval(t, "null", " --set amp_real=0.25 --set amp_fake=0.25",
                                      kReduced + " --set epochs=20", ok);
  o.require(ok, "null pipeline ran");
  o.require(null.auc >= 0.4 && null.auc <= 0.6, "null-control AUC " + fmt(null.auc, 4));
  const double elapsed = seconds_since(start);
  o.require(elapsed < 300, "runtime " + fmt(elapsed, 4) + " s");
  return o;
}

Outcome ablation_plumbing(const Tool& t) {
  Outcome o;
  bool ok = t.run("gen-synthetic --seed 0 --out " + t.path("abl/train"), "abl_gen_train.log") &&
            t.run("gen-synthetic --seed 1 --set clips_per_class=500 --out " + t.path("abl/test"), "abl_gen_test.log");
  o.require(ok, "data generated");
  std::map<std::string, double> aucs;
  for (Variant v : kVariants) {
    const std::string name = to_string(v), dir = "abl/" + name;
    const bool ran =
        ok &&
        t.run("train --quiet --variant " + name + " --train " + t.path("abl/train/manifest.csv") + kReduced +
                  " --set epochs=15 --out " + t.path(dir),
              "abl_train_" + name + ".log") &&
        t.run("eval --checkpoint " + t.path(dir + "/checkpoint.bin") + " --manifest " + t.path("abl/test/manifest.csv") +
                  " --out " + t.path(dir + "/report.csv"),
              "abl_eval_" + name + ".log");
    aucs[name] = ran ? mean_row(test::read_file(t.work / dir / "report.csv")).auc : NAN;
    o.require(ran, name + " AUC " + fmt(aucs[name], 4));
  }

  // Gradient exclusion per variant, measured on the 64-bit build.
  bool zero_ok = true;
  for (Variant v : kVariants) {
    const ModelConfig config = grad_config(v);
    std::mt19937_64 rng(9);
    const ModelParams params = init_params(config, rng);
    std::vector<EmbeddingClip> clips;
    for (int i = 0; i < 4; ++i) clips.push_back(random_clip(4, 8, rng, i % 2 ? Label::kFake : Label::kReal));
    std::vector<const EmbeddingClip*> batch;
    for (const auto& c : clips) batch.push_back(&c);
    ModelParams grads = zeros_like(params);
    batch_loss_and_grads(params, config, batch, grads);
    ModelParams::visit(grads, [&](const std::string& name, const Tensor& g, ParamKind) {
      const bool coarse = name.rfind("gru.", 0) == 0, fine = name.rfind("encoder.", 0) == 0;
      if ((coarse && !config.uses_coarse()) || (fine && !config.uses_fine()))
        for (Real x : g.values()) zero_ok = zero_ok && x == 0;
    });
  }
  o.require(zero_ok, "excluded branches receive exactly zero gradient");
  const double full = aucs[to_string(Variant::kFull)], fgtm = aucs[to_string(Variant::kVtFgtm)];
  o.require(full >= fgtm, "Full AUC " + fmt(full, 4) + " >= VT-FGTM AUC " + fmt(fgtm, 4));
  return o;
}

Outcome determinism(const Tool& t) {
  Outcome o;
  bool ok = t.run("gen-synthetic --out " + t.path("det/data"), "det_gen.log");
  for (const char* run : {"a", "b"})
    ok = ok && t.run("train --quiet --seed 7 --train " + t.path("det/data/manifest.csv") + kReduced +
                         " --set epochs=3 --out " + t.path(std::string("det/") + run),
                     std::string("det_train_") + run + ".log");
  o.require(ok, "two runs completed");
  for (const char* file : {"checkpoint.bin", "last.bin", "epoch_log.csv"}) {
    const std::string a = test::read_file(t.work / "det/a" / file), b = test::read_file(t.work / "det/b" / file);
    o.require(ok && !a.empty() && a == b, std::string(file) + " byte-identical");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cmta_acceptance <criterion|all> [cmta executable]\n";
    return 2;
  }
  const std::string which = argv[1];
  test::TempDir work;
  const Tool tool{argc > 2 ? argv[2] : "cmta", work.path};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient_integrity", gradient_integrity},
      {"forward_oracles", forward_oracles},
      {"metric_oracles", metric_oracles},
      {"synthetic_separability", [&] { return synthetic_separability(tool); }},
      {"ablation_plumbing", [&] { return ablation_plumbing(tool); }},
      {"determinism", [&] { return determinism(tool); }},
      {"scheduler_trace", scheduler_trace},
  };

  bool all_pass = true, found = false;
  for (const auto& [name, check] : criteria) {
    if (which != "all" && which != name) continue;
    found = true;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    all_pass = all_pass && o.pass;
  }
  if (!found) {
    std::cerr << "unknown criterion: " << which << '\n';
    return 2;
  }
  return all_pass ? 0 : 1;
}
