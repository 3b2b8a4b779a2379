// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Criteria can be picked by number on the command
// line, e.g. `spsro_acceptance 1 5 8`.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spsro/errors.hpp"
#include "spsro/experiments.hpp"
#include "spsro/hpo_policy.hpp"
#include "spsro/tokenizer.hpp"
#include "spsro/transformer.hpp"
#include "reference_oracles.hpp"

namespace {

using namespace spsro;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a check; the first failing check's note leads the detail.
  void check(bool ok, const std::string& note) {
    if (!ok && pass) {
      pass = false;
      detail = note + (detail.empty() ? "" : "; " + detail);
    } else {
      detail += (detail.empty() ? "" : "; ") + note;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spsro_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PolicySpace full_space(int rows, int cols) {
  PolicySpace s;
  for (int a = 0; a < rows; ++a) s.append(0, PureAction{a});
  for (int a = 0; a < cols; ++a) s.append(1, PureAction{a});
  return s;
}

Eigen::MatrixXd rps_matrix() {
  Eigen::MatrixXd m(3, 3);
  m << 0, -1, 1,
       1, 0, -1,
      -1, 1, 0;
  return m;
}

double final_nashconv(const RunTrace& t) { return t.epochs.back().metrics.nashconv; }

RunTrace run_preset(const std::string& preset, const Game& game, int epochs, std::uint64_t seed,
                    const RunConfig& config = {}) {
  auto selector = preset_variant(preset);
  auto trace = run_spsro(game, *selector, epochs, config, seed);
  if (!trace.valid) throw Error("run-failed", preset + ": " + trace.error);
  return trace;
}

Outcome solver_fixed_points() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto prd = solve_prd(PayoffTensor(rps_matrix()));
  double worst = 0.0;
  for (int p = 0; p < 2; ++p) {
    worst = std::max(worst, (prd[p] - Eigen::Vector3d::Constant(1.0 / 3)).lpNorm<Eigen::Infinity>());
  }
  o.check(worst <= 1e-3, "PRD on RPS max deviation from uniform " + fmt("%.2e", worst) + " (<= 1e-3)");

  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.8,
      -0.2, 0.3;
  const PayoffTensor dominant(m);
  const AlphaRankConfig config;
  const auto ranked = solve_alpharank(dominant, config);
  const auto pi = reference::alpharank_2x2(dominant, config.alpha_scale, config.mutation);
  const double mass = std::min(ranked[0](0), ranked[1](0));
  const double gap = std::max(std::abs(ranked[0](0) - (pi(0) + pi(1))), std::abs(ranked[1](0) - (pi(0) + pi(2))));
  o.check(mass >= 0.95, "alpha-Rank dominant mass " + fmt("%.6f", mass) + " (>= 0.95)");
  o.check(gap <= 1e-6, "gap to exact 4-state chain " + fmt("%.2e", gap) + " (<= 1e-6)");
  const double secs = seconds_since(t0);
  o.check(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s (< 10 s)");
  return o;
}

Outcome nashconv_correctness() {
  Outcome o;
  Eigen::MatrixXd pennies(2, 2);
  pennies << 1, -1, -1, 1;
  MetaStrategy half;
  half[0] = Eigen::Vector2d(0.5, 0.5);
  half[1] = Eigen::Vector2d(0.5, 0.5);
  const double mp = nashconv(nfg_from_matrix(pennies), full_space(2, 2), half);
  o.check(mp == 0.0, "matching pennies uniform " + fmt("%g", mp) + " (== 0)");

  // Rock versus rock: brute-force each player's best unilateral deviation.
  const Eigen::MatrixXd m = rps_matrix();
  double best0 = -1e300, best1 = -1e300;
  for (int a = 0; a < 3; ++a) {
    best0 = std::max(best0, m(a, 0));
    best1 = std::max(best1, -m(0, a));
  }
  const double brute = (best0 - m(0, 0)) + (best1 + m(0, 0));
  PolicySpace rock;
  rock.append(0, PureAction{0});
  rock.append(1, PureAction{0});
  MetaStrategy pure;
  pure[0] = Eigen::VectorXd::Ones(1);
  pure[1] = Eigen::VectorXd::Ones(1);
  const double rr = nashconv(nfg_from_matrix(m), rock, pure);
  o.check(rr == 2.0 && brute == 2.0, "RPS pure vs pure " + fmt("%g", rr) + ", brute force " + fmt("%g", brute) + " (== 2)");

  double worst = 0.0;
  int found = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate_nfg(6, 6, 1000 + seed);
    const auto eq = reference::support_enumeration(g.payoff);
    if (!eq) continue;
    ++found;
    MetaStrategy sigma;
    sigma[0] = eq->row;
    sigma[1] = eq->col;
    worst = std::max(worst, nashconv(g, full_space(6, 6), sigma));
  }
  o.check(found == 10, std::to_string(found) + "/10 equilibria enumerated");
  o.check(worst <= 1e-6, "max NashConv at enumerated equilibria " + fmt("%.2e", worst) + " (<= 1e-6)");
  return o;
}

Outcome psro_convergence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    total += final_nashconv(run_preset("psro_prd", generate_nfg(20, 20, seed), 25, seed));
  }
  const double mean = total / 10;
  o.check(mean < 0.05, "mean final NashConv " + fmt("%.4f", mean) + " (< 0.05)");
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, "runtime " + fmt("%.1f", secs) + " s (< 60 s)");
  return o;
}

Outcome motivating_example() {
  Outcome o;
  int late = 0, early = 0;
  double sums[3] = {0, 0, 0};
  const char* presets[3] = {"psro_u", "psro_prd", "psro_alpharank"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto game = generate_nfg(50, 50, seed);
    RunTrace t[3];
    for (int i = 0; i < 3; ++i) {
      t[i] = run_preset(presets[i], game, 30, seed);
      sums[i] += final_nashconv(t[i]);
    }
    if (final_nashconv(t[0]) > final_nashconv(t[1]) && final_nashconv(t[0]) > final_nashconv(t[2])) ++late;
    const double e5[3] = {t[0].epochs[4].metrics.nashconv, t[1].epochs[4].metrics.nashconv,
                          t[2].epochs[4].metrics.nashconv};
    if (e5[0] < e5[1] && e5[0] < e5[2]) ++early;
  }
  o.check(late >= 7, "uniform worst at epoch 30 in " + std::to_string(late) + "/10 seeds (>= 7)");
  o.check(early >= 6, "uniform best at epoch 5 in " + std::to_string(early) + "/10 seeds (>= 6)");
  o.detail += "; final means u/prd/ar " + fmt("%.3f", sums[0] / 10) + "/" + fmt("%.3f", sums[1] / 10) + "/" +
              fmt("%.3f", sums[2] / 10);
  return o;
}

Outcome tokenizer_property() {
  Outcome o;
  const QuantizationSpec spec{20, 5000, -1.0, 3.0};
  Rng rng(2024);
  const Field fields[] = {Field::kAlpha, Field::kBeta, Field::kK, Field::kY};
  double worst_ratio = 0.0;
  bool in_range = true;
  for (int i = 0; i < 10000; ++i) {
    const Field f = fields[rng.below(4)];
    const FieldRange r = spec.range(f);
    const double x = rng.uniform(r.min, r.max);
    const int t = tokenize(x, f, spec);
    in_range = in_range && t >= 0 && t < spec.q;
    worst_ratio = std::max(worst_ratio, std::abs(detokenize(t, f, spec) - x) / ((r.max - r.min) / spec.q));
  }
  o.check(in_range, "tokens within [0, Q)");
  o.check(worst_ratio <= 1.0, "max round-trip error " + fmt("%.3f", worst_ratio) + " bin widths (<= 1)");
  bool boundaries = true;
  for (Field f : fields) {
    const FieldRange r = spec.range(f);
    boundaries = boundaries && tokenize(r.min, f, spec) == 0 && tokenize(r.max, f, spec) == spec.q - 1;
  }
  o.check(boundaries, "range ends map to bins 0 and Q-1");
  return o;
}

Outcome gradient_check() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig c;
  c.blocks = 1;
  c.heads = 2;
  c.embed_dim = 8;
  c.context_epochs = 2;
  c.q = 5;
  c.mode = GameMode::kNormalForm;
  c.num_solvers = 3;
  c.dropout = 0.0;
  auto model = TransformerModel<double>::initialized(c, 7);
  for (auto& p : model.params()) p += 0.05 * std::sin(1000.0 * p + 1.0);
  const std::vector<int> tokens{1, 3, 0, 4, 2, 2, 0, 1};
  std::vector<double> grad(model.params().size(), 0.0);
  model.loss_and_gradient(tokens, grad);
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& p = model.params()[i];
    const double original = p;
    p = original + h;
    const double up = model.loss(tokens);
    p = original - h;
    const double down = model.loss(tokens);
    p = original;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6}));
  }
  o.check(worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(grad.size()) +
                            " parameters (< 1e-4)");
  const double secs = seconds_since(t0);
  o.check(secs < 30.0, "runtime " + fmt("%.2f", secs) + " s (< 30 s)");
  return o;
}

// One extensive-form run of 30 epochs with random selections and a
// decreasing, noisy metric.
RunTrace memorized_trace() {
  Rng rng(77);
  RunTrace t;
  t.mode = GameMode::kExtensiveForm;
  t.game = parse_game_spec("kuhn", 0);
  const HyperparamRanges ranges{3, 5000, GameMode::kExtensiveForm};
  for (int e = 1; e <= 30; ++e) {
    EpochRecord r;
    r.selection = suggest_random(ranges, rng);
    r.metrics.epoch = e;
    r.metrics.nashconv = 1.0 / e;
    r.metrics.br_effort = r.selection.oracle.k;
    r.metrics.y = e == 1 ? 2.0 : 2.0 / std::sqrt(e) + rng.uniform(-0.1, 0.1);
    t.epochs.push_back(r);
  }
  return t;
}

Outcome memorization() {
  Outcome o;
  const Dataset data = make_dataset({memorized_trace()}, GameMode::kExtensiveForm, SolverSet{}, 30, 20, 5000);
  const TokenSequence seq = encode_dataset(data).front();
  const std::vector<TokenSequence> copies(32, seq);
  ModelConfig mc;
  mc.blocks = 2;
  mc.heads = 4;
  mc.embed_dim = 32;
  mc.context_epochs = 30;
  mc.mode = GameMode::kExtensiveForm;
  mc.dropout = 0.1;
  TrainConfig tc;
  tc.epochs = 50;
  tc.lr = 3e-3;
  tc.batch = 8;
  tc.warmup_tokens = 500;
  tc.final_tokens = 3e5;
  tc.seed = 1;
  auto trained = std::make_shared<TrainedModel>();
  trained->model = Transformer::initialized(mc, 1);
  train_on_sequences(trained->model, copies, tc);
  trained->quantization = data.quantization;
  trained->solvers = data.solvers;
  trained->first_token_prior = first_token_prior(copies, mc.q);
  const double nll = trained->model.loss(seq.tokens);
  o.check(nll < 0.05, "NLL " + fmt("%.4f", nll) + " nats/token after 50 epochs (< 0.05)");

  TransformerSelector greedy(trained, SamplingConfig{SamplingMode::kGreedy, 1.0}, 0);
  const std::size_t per_epoch = mc.tokens_per_epoch();
  int mismatched = 0;
  RunTrace prefix = data.runs.front();
  prefix.epochs.clear();
  for (std::size_t e = 0; e < data.runs.front().size(); ++e) {
    const auto sample = greedy.sample(prefix);
    bool same = true;
    for (std::size_t s = 0; s + 1 < per_epoch; ++s) same = same && sample.tokens[s] == seq.tokens[e * per_epoch + s];
    // The chosen beta and K are the bin centers of the memorized tokens.
    same = same && sample.selection.oracle.beta == detokenize(seq.tokens[e * per_epoch + 3], Field::kBeta, data.quantization);
    same = same && sample.selection.oracle.k ==
                       static_cast<int>(std::lround(detokenize(seq.tokens[e * per_epoch + 4], Field::kK, data.quantization)));
    if (!same) ++mismatched;
    prefix.epochs.push_back(data.runs.front().epochs[e]);
  }
  o.check(mismatched == 0, "greedy selections differing from the memorized bins: " + std::to_string(mismatched) + "/30");
  return o;
}

Outcome uniform_prior() {
  Outcome o;
  ModelConfig c;
  c.embed_dim = 32;
  c.context_epochs = 10;
  c.q = 20;
  auto model = Transformer::initialized(c, 1);
  model.zero_head();
  std::vector<int> tokens;
  for (int i = 0; i < 60; ++i) tokens.push_back((i * 7) % 20);
  const double nll = model.loss(tokens);
  o.check(std::abs(nll - std::log(20.0)) <= 1e-6,
          "NLL " + fmt("%.8f", nll) + " vs ln 20 = " + fmt("%.8f", std::log(20.0)) + " (within 1e-6)");
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch("e2e");
  ExperimentConfig gen;
  gen.game = "nfg:30x30";
  gen.runs = 200;
  gen.epochs = 30;
  gen.hpo_kind = OnlineKind::kTpe;
  gen.seed = 1000;
  const Dataset data = generate_dataset(gen);

  ModelConfig mc;
  mc.embed_dim = 32;
  mc.blocks = 2;
  mc.heads = 4;
  mc.mode = data.mode;
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.batch = 16;
  tc.warmup_tokens = 5000;
  tc.final_tokens = 1.3e6;
  tc.seed = 5;
  const auto result = train(data, mc, tc);
  save_checkpoint(result.trained, dir / "model.ckpt");

  ExperimentConfig ev;
  ev.game = "nfg:40x40";
  ev.epochs = 30;
  const std::string transformer = "transformer:" + (dir / "model.ckpt").string();
  ev.selectors = {"psro_u", "psro_prd", "psro_alpharank", "random", transformer};
  for (std::uint64_t s = 9000; s < 9010; ++s) ev.seeds.push_back(s);
  std::vector<RunRow> rows;
  for (const auto& run : evaluate(ev)) {
    if (!run.trace.valid) throw Error("run-failed", run.selector + ": " + run.trace.error);
    const auto r = rows_of(run);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::map<std::string, double> mean;
  for (const auto& s : aggregate(rows)) mean[s.selector] = s.final_nashconv_mean;
  const double best = std::min({mean["psro_u"], mean["psro_prd"], mean["psro_alpharank"]});
  const double ours = mean[transformer];
  o.check(ours <= best + 0.05,
          "transformer " + fmt("%.4f", ours) + " vs best single solver " + fmt("%.4f", best) + " + 0.05");
  o.check(ours <= mean["random"], "transformer " + fmt("%.4f", ours) + " vs random " + fmt("%.4f", mean["random"]));
  const double secs = seconds_since(t0);
  o.check(secs < 1800.0, "runtime " + fmt("%.0f", secs) + " s (< 1800 s)");
  return o;
}

Outcome kuhn_pipeline() {
  Outcome o;
  double total = 0.0;
  int exact_first = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto trace = run_preset("psro_prd", KuhnPoker{}, 15, seed);
    total += final_nashconv(trace);
    if (trace.epochs.front().metrics.y == 2.0) ++exact_first;
  }
  o.check(total / 10 < 0.15, "mean NashConv at epoch 15 " + fmt("%.4f", total / 10) + " (< 0.15)");
  o.check(exact_first == 10, "first-epoch metric exactly 2 in " + std::to_string(exact_first) + "/10 runs");
  return o;
}

Outcome pruning_bound() {
  Outcome o;
  RunConfig rc;
  rc.prune.mode = PruneMode::kAuto;
  rc.prune.cap = 10;
  for (const std::string name : {"psro_alpharank", "random"}) {
    std::unique_ptr<SelectorPolicy> selector =
        name == "random" ? std::unique_ptr<SelectorPolicy>(new OnlineSelector(
                               OnlineKind::kRandom, HyperparamRanges{3, 5000, GameMode::kNormalForm}, 3))
                         : preset_variant(name);
    Eigen::Index largest = 0;
    int violations = 0;
    const auto trace = run_spsro(generate_nfg(30, 30, 4), *selector, 30, rc, 4, [&](const EpochSnapshot& s) {
      const auto rows = s.solved_tensor.rows(), cols = s.solved_tensor.cols();
      largest = std::max({largest, rows, cols});
      if (rows > 11 || cols > 11) ++violations;
    });
    o.check(trace.valid && trace.size() == 30, name + " ran " + std::to_string(trace.size()) + " epochs");
    o.check(violations == 0, name + " largest solved meta-game side " + std::to_string(largest) + " (<= 11)");
  }
  return o;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SPSRO_CLI_PATH) + " " + args + " >/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  Outcome o;
  const auto dir = scratch("determinism");
  const std::string gen = "--seed 21 --parallel 4 --out-dir " + dir.string() +
                          " gen-dataset --game-family nfg:12x12 --runs 12 --epochs 8 --behavior tpe --out ";
  const int a = run_cli(gen + (dir / "a.jsonl").string());
  const int b = run_cli(gen + (dir / "b.jsonl").string());
  o.check(a == 0 && b == 0, "gen-dataset exit codes " + std::to_string(a) + ", " + std::to_string(b));
  const std::string da = slurp(dir / "a.jsonl");
  o.check(!da.empty() && da == slurp(dir / "b.jsonl"), "datasets byte-identical (" + std::to_string(da.size()) + " bytes)");

  {
    std::ofstream cfg(dir / "train.json");
    cfg << R"({"model": {"embed_dim": 16, "blocks": 1, "heads": 2}, "train": {"epochs": 3, "batch": 4}})";
  }
  const std::string train = "--seed 9 --config " + (dir / "train.json").string() + " --out-dir " + dir.string() +
                            " train --dataset " + (dir / "a.jsonl").string() + " --out ";
  const int ta = run_cli(train + (dir / "a.ckpt").string());
  const int tb = run_cli(train + (dir / "b.ckpt").string());
  o.check(ta == 0 && tb == 0, "train exit codes " + std::to_string(ta) + ", " + std::to_string(tb));
  if (ta != 0 || tb != 0) return o;
  const auto ma = load_checkpoint(dir / "a.ckpt");
  const auto mb = load_checkpoint(dir / "b.ckpt");
  const auto seq = encode_dataset(read_dataset(dir / "a.jsonl")).front();
  const auto la = ma.model.log_probs(seq.tokens);
  const auto lb = mb.model.log_probs(seq.tokens);
  const bool equal = la.size() == lb.size() &&
                     std::memcmp(la.data(), lb.data(), static_cast<std::size_t>(la.size()) * sizeof(float)) == 0;
  o.check(equal, "forward outputs of both checkpoints bitwise equal");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "solver fixed points", solver_fixed_points},
      {2, "NashConv correctness", nashconv_correctness},
      {3, "PSRO convergence", psro_convergence},
      {4, "motivating example", motivating_example},
      {5, "tokenizer round trip", tokenizer_property},
      {6, "transformer gradient check", gradient_check},
      {7, "memorization", memorization},
      {8, "uniform prior", uniform_prior},
      {9, "end-to-end selector", end_to_end},
      {10, "Kuhn pipeline", kuhn_pipeline},
      {11, "pruning bound", pruning_bound},
      {12, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
