// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "semihoc/datagen.hpp"
#include "semihoc/metrics.hpp"
#include "semihoc/oracles.hpp"
#include "semihoc/spl.hpp"
#include "semihoc/trainer.hpp"

namespace {

using namespace semihoc;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict from_oracle(const oracles::OracleResult& r, double budget_seconds = 0.0) {
  Verdict v;
  v.pass = r.passed() && (budget_seconds <= 0.0 || r.seconds < budget_seconds);
  v.detail = fmt("%zu cases, %zu checks, %zu failures, %.2fs", r.cases, r.checks, r.failures, r.seconds);
  if (r.skipped > 0) v.detail += fmt(", %zu kinked coordinates skipped", r.skipped);
  if (r.max_error > 0.0) v.detail += fmt(", max error %.2e", r.max_error);
  if (!r.first_failure.empty()) v.detail += "; first failure: " + r.first_failure;
  if (budget_seconds > 0.0 && r.seconds >= budget_seconds) v.detail += fmt("; over the %.0fs budget", budget_seconds);
  return v;
}

// Reference synthetic benchmark: branching 3, depth 4, dim 32, 20% OOD
// leaves, 10 labels per ID class.
GeneratedData reference_data(std::uint64_t seed) {
  SyntheticConfig s;
  s.branching = 3;
  s.depth = 4;
  s.dim = 32;
  s.train_per_leaf = 30;
  s.test_per_leaf = 10;
  s.level_scale = 0.5;
  s.noise_scale = 1.0;
  s.ood_fraction = 0.2;
  s.root_ood_count = 30;
  s.seed = seed;
  GeneratedData g = generate(s);
  g.dataset = sample_labeled_subset(g.dataset, g.hierarchy, 10, seed);
  return g;
}

TrainConfig reference_config(Method m, std::uint64_t seed) {
  TrainConfig c;
  c.method = m;
  c.epochs = 100;
  c.eval_every = 100;
  c.hidden_width = 128;
  c.labeled_batch_size = 16;
  c.unlabeled_batch_ratio = 4;
  c.learning_rate = 0.02;
  c.dropout = 0.1;
  c.weight_decay = 1e-4;
  c.ema_momentum = 0.99;
  c.tau = 0.95;
  c.gate_bin_width = 10;
  c.gate_drop_threshold = 0.01;
  c.seed = seed;
  return c;
}

// ---- criteria 1-5: oracle equivalence ----

Verdict criterion3() {
  Verdict v = from_oracle(oracles::check_cutoff(10000, 7));
  const std::vector<Epoch> a{1, 1, 2, 2, 2, 3, 10}, b{5, 5, 5};
  const Epoch ta = detect_cutoff(a, 10, 1, 0.2), tb = detect_cutoff(b, 20, 1, 0.5);
  v.pass = v.pass && ta == 4 && tb == 6;
  v.detail += fmt("; hand-traced cases -> %d (want 4), %d (want 6)", ta, tb);
  return v;
}

// ---- criterion 6: degeneracy equivalences ----

bool same_losses(const RunResult& a, const RunResult& b) {
  if (a.reports.size() != b.reports.size()) return false;
  for (std::size_t e = 0; e < a.reports.size(); ++e) {
    if (a.reports[e].labeled_loss != b.reports[e].labeled_loss) return false;
    if (a.reports[e].unlabeled_loss != b.reports[e].unlabeled_loss) return false;
  }
  return true;
}

bool same_trajectory(const RunResult& a, const RunResult& b) {
  if (!same_losses(a, b)) return false;
  for (std::size_t e = 0; e < a.reports.size(); ++e) {
    const auto &x = a.reports[e], &y = b.reports[e];
    if (x.spl_count != y.spl_count || x.spl_per_node != y.spl_per_node || x.purity != y.purity ||
        x.avg_depth != y.avg_depth)
      return false;
  }
  return a.state.log == b.state.log;
}

Verdict criterion6() {
  const auto g = reference_data(1);
  const Epoch epochs = 30;

  TrainConfig strict = reference_config(Method::kSemiHoc, 1);
  strict.epochs = epochs;
  strict.eval_every = 0;
  strict.tau = 1.0;
  TrainConfig sup = strict;
  sup.method = Method::kSupervised;
  sup.tau = 0.95;
  const auto a = run_training(strict, g.dataset, g.hierarchy);
  const auto b = run_training(sup, g.dataset, g.hierarchy);
  std::size_t spls = 0;
  for (const auto& r : a.reports) spls += r.spl_count;
  const bool tau_ok = same_losses(a, b) && spls == 0;

  TrainConfig nogate = reference_config(Method::kSemiHocNoGate, 1);
  nogate.epochs = epochs;
  nogate.eval_every = 0;
  TrainConfig gated = nogate;
  gated.method = Method::kSemiHoc;
  RunOptions infinite;
  infinite.freeze_cutoffs = true;
  const auto c = run_training(nogate, g.dataset, g.hierarchy);
  const auto d = run_training(gated, g.dataset, g.hierarchy, infinite);
  const auto e = run_training(gated, g.dataset, g.hierarchy);
  std::size_t assigned = 0, blocked = 0;
  for (const auto& r : c.reports) assigned += r.spl_count;
  for (const auto& r : e.reports) blocked += r.gated_count;
  const bool gate_ok = same_trajectory(c, d) && assigned > 0;

  Verdict v;
  v.pass = tau_ok && gate_ok;
  v.detail = fmt("%d epochs; tau=1 vs supervised losses %s (%zu SPLs); no-gating vs all cutoffs infinite %s "
                 "(%zu SPLs; the live gate blocked %zu, so the arms are not trivially equal)",
                 epochs, tau_ok ? "identical" : "DIFFER", spls, gate_ok ? "identical" : "DIFFER", assigned, blocked);
  return v;
}

// ---- criteria 7-9: reference benchmark ----

struct Benchmark {
  std::map<std::string, std::array<RunResult, 3>> runs;
  std::vector<GeneratedData> data;
  double seconds = 0.0;
};

Benchmark run_benchmark() {
  Benchmark b;
  const auto start = Clock::now();
  const Method methods[] = {Method::kSemiHoc, Method::kSupervised, Method::kSslPerDepth, Method::kSplOracle,
                            Method::kSemiHocNoGate};
  for (std::uint64_t s = 1; s <= 3; ++s) {
    b.data.push_back(reference_data(s));
    for (Method m : methods) {
      const auto t = Clock::now();
      b.runs[std::string(to_string(m))][s - 1] =
          run_training(reference_config(m, s), b.data[s - 1].dataset, b.data[s - 1].hierarchy);
      std::fprintf(stderr, "  benchmark seed %llu %-16s %.1fs\n", static_cast<unsigned long long>(s),
                   std::string(to_string(m)).c_str(), seconds_since(t));
    }
  }
  b.seconds = seconds_since(start);
  return b;
}

double mean_final(const Benchmark& b, const std::string& method,
                  const std::function<std::optional<double>(const EpochReport&)>& get, bool& complete) {
  double sum = 0.0;
  for (const auto& run : b.runs.at(method)) {
    const auto v = get(run.reports.back());
    if (!v) complete = false;
    sum += v.value_or(0.0);
  }
  return sum / 3.0;
}

Verdict criterion7(const Benchmark& b) {
  bool complete = true;
  auto mix = [](const EpochReport& r) { return r.eval ? r.eval->mix : std::nullopt; };
  auto ood = [](const EpochReport& r) { return r.eval ? r.eval->ood : std::nullopt; };
  const double semi_mix = mean_final(b, "semihoc", mix, complete);
  const double sup_mix = mean_final(b, "supervised", mix, complete);
  const double oracle_mix = mean_final(b, "spl-oracle", mix, complete);
  const double semi_ood = mean_final(b, "semihoc", ood, complete);
  const double pd_ood = mean_final(b, "ssl-per-depth", ood, complete);
  Verdict v;
  v.pass = complete && semi_mix < sup_mix && semi_ood < pd_ood && oracle_mix <= semi_mix && b.seconds < 600.0;
  v.detail = fmt("3-seed means: BMHD-Mix semihoc %.3f < supervised %.3f; BMHD-OOD semihoc %.3f < ssl-per-depth "
                 "%.3f; BMHD-Mix spl-oracle %.3f <= semihoc; benchmark %.0fs (budget 600s)",
                 semi_mix, sup_mix, semi_ood, pd_ood, oracle_mix, b.seconds);
  return v;
}

Verdict criterion8(const Benchmark& b) {
  bool complete = true;
  auto purity = [](const EpochReport& r) { return r.purity; };
  auto depth = [](const EpochReport& r) { return r.avg_depth; };
  const double pg = mean_final(b, "semihoc", purity, complete);
  const double pn = mean_final(b, "semihoc-no-gate", purity, complete);
  const double dg = mean_final(b, "semihoc", depth, complete);
  const double dn = mean_final(b, "semihoc-no-gate", depth, complete);
  Verdict v;
  v.pass = complete && pg >= pn && dg <= dn;
  v.detail = fmt("final-epoch OOD SPL purity gated %.3f >= ungated %.3f; average SPL depth gated %.3f <= "
                 "ungated %.3f (3-seed means)",
                 pg, pn, dg, dn);
  return v;
}

Verdict criterion9(const Benchmark& b) {
  // Pooled over the three seeds' test splits, teacher predictions of the
  // final semihoc models. Twenty bins put a bin edge at 0.95.
  std::vector<ScoredPrediction> subtree, node;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& g = b.data[s];
    const auto test = g.dataset.indices(Split::kTest);
    const auto records = predict(b.runs.at("semihoc")[s].state.heads, g.hierarchy, g.dataset, test);
    for (const auto& r : records) {
      if (r.truth == kUnknownNode || g.hierarchy.is_id_class(r.predicted)) continue;
      subtree.push_back({r.subtree_confidence(), g.hierarchy.is_ancestor_or_self(r.predicted, r.truth)});
      node.push_back({r.node_confidence, r.predicted == r.truth});
    }
  }
  const auto bins = confidence_accuracy_bins(subtree, 20);
  std::size_t n_all = 0, c_all = 0, n_hi = 0, c_hi = 0;
  for (const auto& p : subtree) {
    ++n_all;
    c_all += p.correct;
  }
  for (const auto& bin : bins) {
    if (bin.lower < 0.95 - 1e-12 || bin.count == 0) continue;
    n_hi += bin.count;
    c_hi += static_cast<std::size_t>(std::llround(*bin.accuracy * static_cast<double>(bin.count)));
  }
  const double acc_all = n_all ? static_cast<double>(c_all) / static_cast<double>(n_all) : 0.0;
  const double acc_hi = n_hi ? static_cast<double>(c_hi) / static_cast<double>(n_hi) : 0.0;
  std::size_t node_hi = 0, node_hi_ok = 0;
  for (const auto& p : node)
    if (p.confidence >= 0.95) {
      ++node_hi;
      node_hi_ok += p.correct;
    }
  Verdict v;
  v.pass = n_hi > 0 && acc_hi >= acc_all;
  v.detail = fmt("OOD-predicted test samples: subtree accuracy %.3f in bins >= 0.95 (%zu samples) vs %.3f overall "
                 "(%zu); node confidence >= 0.95 holds %zu samples (%zu correct), informational",
                 acc_hi, n_hi, acc_all, n_all, node_hi, node_hi_ok);
  return v;
}

// ---- criterion 10: determinism ----

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion10() {
  const auto g = reference_data(2);
  TrainConfig cfg = reference_config(Method::kSemiHoc, 2);
  cfg.epochs = 40;
  cfg.eval_every = 10;
  cfg.checkpoint_every = 20;
  semihoc::testing::TempDir one("accept_det_a"), two("accept_det_b"), part("accept_det_resume");

  RunOptions o1, o2;
  o1.out_dir = one.path();
  o2.out_dir = two.path();
  run_training(cfg, g.dataset, g.hierarchy, o1);
  run_training(cfg, g.dataset, g.hierarchy, o2);
  const std::string csv = slurp(one / "metrics.csv");
  const bool repeat_ok = !csv.empty() && csv == slurp(two / "metrics.csv");

  RunOptions first;
  first.out_dir = part.path();
  first.stop_after = 20;
  run_training(cfg, g.dataset, g.hierarchy, first);
  RunOptions second;
  second.out_dir = part.path();
  second.resume_from = part / "checkpoint_epoch20.bin";
  run_training(cfg, g.dataset, g.hierarchy, second);
  const bool resume_ok = slurp(part / "metrics.csv") == csv && slurp(part / "final.bin") == slurp(one / "final.bin");

  Verdict v;
  v.pass = repeat_ok && resume_ok;
  v.detail = fmt("two runs: metrics CSVs %s; stop at epoch 20 + resume: metrics CSV and final checkpoint %s (40 epochs)",
                 repeat_ok ? "byte-identical" : "DIFFER", resume_ok ? "byte-identical" : "DIFFER");
  return v;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* title, const Verdict& v) {
    std::printf("criterion %2d: %s  %s -- %s\n", n, v.pass ? "PASS" : "FAIL", title, v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  };

  report(1, "tree algebra vs BFS/ancestor oracles", from_oracle(oracles::check_tree_algebra(1000, 7, {}, 200), 10.0));
  report(2, "fusion normalization and monotone subtree confidence", from_oracle(oracles::check_fusion(1000, 7)));
  report(3, "cutoff detection vs scan oracle", criterion3());
  report(4, "head gradients vs central differences", from_oracle(oracles::check_gradients(100, 7), 30.0));
  report(5, "target distributions vs set-intersection oracle", from_oracle(oracles::check_targets(200, 7)));
  report(6, "degeneracy equivalences", criterion6());
  std::fprintf(stderr, "running the reference benchmark (3 seeds x 5 methods x 100 epochs)\n");
  const Benchmark bench = run_benchmark();
  report(7, "benchmark ordering", criterion7(bench));
  report(8, "age-gating purity and depth", criterion8(bench));
  report(9, "high subtree confidence is accurate", criterion9(bench));
  report(10, "determinism and resume", criterion10());

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
