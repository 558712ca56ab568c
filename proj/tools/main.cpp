// semihoc: generate data, train, evaluate and inspect runs, run the oracles.
// Exit codes: 0 success, 1 usage or config error, 2 runtime or data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semihoc/checkpoint.hpp"
#include "semihoc/config.hpp"
#include "semihoc/datagen.hpp"
#include "semihoc/error.hpp"
#include "semihoc/hierarchy.hpp"
#include "semihoc/metrics.hpp"
#include "semihoc/oracles.hpp"
#include "semihoc/trainer.hpp"

namespace fs = std::filesystem;
using namespace semihoc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Refuses to reuse a non-empty directory unless forced, then creates it.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw InputError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) throw InputError(dir.string() + " is not empty; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

// ---- gen -------------------------------------------------------------------

struct GenOptions {
  SyntheticConfig synth;
  int labeled_per_class = 10;
  std::string config_path;
  fs::path out;
  bool force = false;
};

void apply_gen_json(GenOptions& o, const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InputError("generator config must be a JSON object");
  static const std::vector<std::string> keys = {"branching",    "depth",       "dim",          "train_per_leaf",
                                                "test_per_leaf", "level_scale", "noise_scale",  "ood_fraction",
                                                "root_ood_count", "seed",       "labeled_per_class"};
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "branching") o.synth.branching = v.get<int>();
      else if (k == "depth") o.synth.depth = v.get<int>();
      else if (k == "dim") o.synth.dim = v.get<int>();
      else if (k == "train_per_leaf") o.synth.train_per_leaf = v.get<int>();
      else if (k == "test_per_leaf") o.synth.test_per_leaf = v.get<int>();
      else if (k == "level_scale") o.synth.level_scale = v.get<double>();
      else if (k == "noise_scale") o.synth.noise_scale = v.get<double>();
      else if (k == "ood_fraction") o.synth.ood_fraction = v.get<double>();
      else if (k == "root_ood_count") o.synth.root_ood_count = v.get<int>();
      else if (k == "seed") o.synth.seed = v.get<std::uint64_t>();
      else if (k == "labeled_per_class") o.labeled_per_class = v.get<int>();
      else {
        std::string valid;
        for (const auto& key : keys) valid += (valid.empty() ? "" : ", ") + key;
        throw InputError("unknown generator key '" + k + "'; valid keys: " + valid);
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError("generator key '" + k + "': " + e.what());
    }
  }
}

void print_dataset_summary(std::ostream& out, const Hierarchy& h, const FeatureDataset& ds) {
  std::size_t leaves = 0;
  for (NodeId c = 0; c < h.size(); ++c) leaves += h.is_leaf(c) ? 1 : 0;
  std::map<NodeId, bool> ood_classes;
  std::size_t counts[3][2] = {};  // split x (id, ood)
  std::size_t unknown = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const NodeId t = ds.truth(i);
    const auto s = static_cast<std::size_t>(ds.split(i));
    if (t == kUnknownNode) {
      ++unknown;
      continue;
    }
    const bool ood = !h.is_id_class(t);
    if (ood) ood_classes[t] = true;
    ++counts[s][ood ? 1 : 0];
  }
  out << "hierarchy   nodes " << h.size() << ", depth " << h.max_depth() << ", internal " << h.size() - leaves
      << ", leaves " << leaves << "\n";
  out << "classes     ID " << h.id_classes().size() << ", OOD " << ood_classes.size() << "\n";
  out << "features    dim " << ds.dim() << "\n";
  out << "split        total      ID     OOD\n";
  const char* names[3] = {"labeled", "unlabeled", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    char line[96];
    std::snprintf(line, sizeof line, "%-10s %7zu %7zu %7zu\n", names[s], counts[s][0] + counts[s][1], counts[s][0],
                  counts[s][1]);
    out << line;
  }
  if (unknown > 0) out << "no ground truth: " << unknown << "\n";
}

int run_gen(const GenOptions& opts) {
  GenOptions o = opts;
  if (!o.config_path.empty()) apply_gen_json(o, read_text(o.config_path));
  if (o.labeled_per_class < 1) throw InputError("labeled_per_class must be >= 1");
  o.synth.validate();
  prepare_out_dir(o.out, o.force);

  GeneratedData data = generate(o.synth);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  const FeatureDataset ds = sample_labeled_subset(data.dataset, data.hierarchy, o.labeled_per_class, o.synth.seed);
  data.hierarchy.save(o.out / "hierarchy.tsv");
  save_features(ds, data.hierarchy.content_hash(), o.out / "features.bin");

  std::cout << "wrote " << (o.out / "hierarchy.tsv").string() << " and " << (o.out / "features.bin").string()
            << "\n";
  std::cout << "leaves before pruning " << data.leaves_before_pruning << "\n";
  print_dataset_summary(std::cout, data.hierarchy, ds);
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
  std::string config_path;
  fs::path hierarchy;
  fs::path features;
  fs::path out;
  std::string resume;
  bool force = false;
  bool no_age_gating = false;
  std::optional<std::string> method;
  std::optional<double> tau, lr, dropout, gate_drop_threshold, ema_momentum, weight_decay;
  std::optional<int> epochs, gate_bin_width, eval_every, checkpoint_every, hidden_width, labeled_batch_size,
      unlabeled_batch_ratio;
  std::optional<std::uint64_t> seed;
};

TrainConfig resolve_config(const TrainOptions& o, TrainConfig c) {
  if (!o.config_path.empty()) c = TrainConfig::from_json(read_text(o.config_path));
  if (o.method) c.method = parse_method(*o.method);
  if (o.tau) c.tau = *o.tau;
  if (o.lr) c.learning_rate = *o.lr;
  if (o.dropout) c.dropout = *o.dropout;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.gate_bin_width) c.gate_bin_width = *o.gate_bin_width;
  if (o.gate_drop_threshold) c.gate_drop_threshold = *o.gate_drop_threshold;
  if (o.ema_momentum) c.ema_momentum = *o.ema_momentum;
  if (o.weight_decay) c.weight_decay = *o.weight_decay;
  if (o.hidden_width) c.hidden_width = *o.hidden_width;
  if (o.labeled_batch_size) c.labeled_batch_size = *o.labeled_batch_size;
  if (o.unlabeled_batch_ratio) c.unlabeled_batch_ratio = *o.unlabeled_batch_ratio;
  if (o.seed) c.seed = *o.seed;
  if (o.eval_every) c.eval_every = *o.eval_every;
  if (o.checkpoint_every) c.checkpoint_every = *o.checkpoint_every;
  if (o.no_age_gating) c.age_gating = false;
  if (c.method == Method::kSemiHocNoGate) {
    c.method = Method::kSemiHoc;
    c.age_gating = false;
  }
  c.validate();
  return c;
}

int run_train(const TrainOptions& o) {
  // A resumed run starts from the checkpoint's settings; flags still apply on top.
  TrainConfig config = resolve_config(o, o.resume.empty() ? TrainConfig{} : load_checkpoint(o.resume).config);
  const Hierarchy h = Hierarchy::load(o.hierarchy);
  const LoadedFeatures loaded = load_features(o.features, &h);

  RunOptions run;
  run.threads = threads_from_env();
  fs::path out = o.out;
  if (!o.resume.empty()) {
    run.resume_from = o.resume;
    if (out.empty()) out = fs::path(o.resume).parent_path();
    if (out.empty()) out = ".";
    fs::create_directories(out);
  } else {
    if (out.empty()) throw InputError("--out is required");
    prepare_out_dir(out, o.force);
  }
  run.out_dir = out;
  run.on_epoch = [&](const EpochReport& r) {
    std::cerr << "epoch " << r.epoch << "/" << config.epochs << "  spl " << r.spl_count << "  gated "
              << r.gated_count;
    if (r.eval && r.eval->mix) std::cerr << "  bmhd_mix " << format_number(*r.eval->mix);
    std::cerr << "  " << format_number(r.wall_seconds) << "s\n";
  };
  run_training(config, loaded.dataset, h, run);
  std::cout << "run written to " << out.string() << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
  fs::path checkpoint;
  fs::path hierarchy;
  fs::path features;
  fs::path predictions;
  fs::path out;
  fs::path dump;
  std::string split = "test";
  bool force = false;
};

Split parse_split(const std::string& s) {
  if (s == "labeled") return Split::kLabeled;
  if (s == "unlabeled") return Split::kUnlabeled;
  if (s == "test") return Split::kTest;
  throw InputError("unknown split '" + s + "'; valid: labeled, unlabeled, test");
}

void write_diagnostics(const fs::path& dir, const Checkpoint& ck, const Hierarchy& h, const FeatureDataset& ds,
                       std::span<const std::size_t> rows) {
  const auto outputs = teacher_outputs(ck.state.heads, ds, rows, threads_from_env());
  std::vector<SplChain> chains;
  std::vector<NodeId> truths;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const NodeId t = ds.truth(rows[j]);
    if (t == kUnknownNode || h.is_id_class(t)) continue;
    std::vector<std::vector<double>> cols(outputs.size());
    for (std::size_t d = 0; d < outputs.size(); ++d) {
      const auto c = outputs[d].col(static_cast<Eigen::Index>(j));
      cols[d].assign(c.data(), c.data() + c.size());
    }
    SplChain chain = compute_spls(fuse(cols, h), h, ck.config.tau);
    if (ck.config.gating_active()) chain = apply_gating(chain, ck.state.log, ck.state.gate, ds.id(rows[j]));
    chains.push_back(std::move(chain));
    truths.push_back(t);
  }
  const auto pd = spl_purity_and_depth(chains, truths, h);
  const GateStats gs = gate_fpr_coverage(ck.state.assignments);

  std::ofstream out(dir / "diagnostics.csv");
  out << "ood_samples,spl_purity,spl_avg_depth,assignments,incorrect_assignments,gate_fpr,gate_coverage,"
         "no_incorrect\n";
  out << chains.size() << "," << (pd ? format_number(pd->purity) : "") << ","
      << (pd ? format_number(pd->average_depth) : "") << "," << gs.total << "," << gs.incorrect << ","
      << format_number(gs.fpr) << "," << format_number(gs.coverage) << "," << (gs.no_incorrect ? 1 : 0) << "\n";
  if (!out) throw DataError("cannot write diagnostics into " + dir.string());
}

int run_eval(const EvalOptions& o) {
  if (o.out.empty()) throw InputError("--out is required");
  if (o.checkpoint.empty() == o.predictions.empty())
    throw InputError("give exactly one of --checkpoint and --predictions");
  if (o.hierarchy.empty()) throw InputError("--hierarchy is required");
  const Hierarchy h = Hierarchy::load(o.hierarchy);
  prepare_out_dir(o.out, o.force);

  std::vector<PredictionRecord> records;
  if (!o.predictions.empty()) {
    std::unordered_map<std::uint64_t, NodeId> truth;
    if (!o.features.empty()) {
      const auto loaded = load_features(o.features, &h);
      for (std::size_t i = 0; i < loaded.dataset.size(); ++i) truth[loaded.dataset.id(i)] = loaded.dataset.truth(i);
    }
    std::ifstream in(o.predictions);
    if (!in) throw InputError("cannot read " + o.predictions.string());
    records = read_prediction_dump(in, h, truth);
  } else {
    if (o.features.empty()) throw InputError("--features is required with --checkpoint");
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    if (ck.hierarchy_hash != h.content_hash()) throw DataError("checkpoint was trained on a different hierarchy");
    const auto loaded = load_features(o.features, &h);
    if (loaded.dataset.dim() != ck.input_dim) throw DataError("feature dimension differs from the checkpoint");
    const Split split = parse_split(o.split);
    const auto rows = loaded.dataset.indices(split);
    records = predict(ck.state.heads, h, loaded.dataset, rows, threads_from_env());
    if (split != Split::kTest) write_diagnostics(o.out, ck, h, loaded.dataset, rows);
  }

  const EvalReport report = evaluate(records, h);
  write_eval_csvs(report, o.out);
  if (!o.dump.empty()) {
    std::ofstream d(o.dump);
    write_prediction_dump(d, records, h);
    if (!d) throw DataError("cannot write " + o.dump.string());
  }
  auto show = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("n/a"); };
  std::cout << "samples " << report.evaluated << "  bmhd_id " << show(report.bmhd.id) << "  bmhd_ood "
            << show(report.bmhd.ood) << "  bmhd_mix " << show(report.bmhd.mix) << "\n";
  return 0;
}

// ---- inspect ---------------------------------------------------------------

struct InspectOptions {
  fs::path hierarchy;
  fs::path features;
  fs::path checkpoint;
};

int run_inspect(const InspectOptions& o) {
  if (o.hierarchy.empty() && o.features.empty() && o.checkpoint.empty())
    throw InputError("give at least one of --hierarchy, --features, --checkpoint");
  std::optional<Hierarchy> h;
  if (!o.hierarchy.empty()) {
    h = Hierarchy::load(o.hierarchy);
    std::cout << "hierarchy hash " << std::hex << h->content_hash() << std::dec << "\n";
    for (int d = 1; d <= h->max_depth(); ++d)
      std::cout << "depth " << d << ": " << h->depth_space(d).members.size() << " classes\n";
  }
  if (!o.features.empty()) {
    const auto loaded = load_features(o.features, h ? &*h : nullptr);
    if (h) {
      print_dataset_summary(std::cout, *h, loaded.dataset);
    } else {
      std::cout << "features: " << loaded.dataset.size() << " samples, dim " << loaded.dataset.dim()
                << ", hierarchy hash " << std::hex << loaded.hierarchy_hash << std::dec << "\n";
    }
  }
  if (!o.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    std::cout << "checkpoint epoch " << ck.state.epoch << ", method " << ck.config.method_label()
              << ", hierarchy hash " << std::hex << ck.hierarchy_hash << std::dec << "\n";
    std::cout << "log entries " << ck.state.log.size() << ", first assignments " << ck.state.assignments.size()
              << "\n";
    for (NodeId c = 0; c < ck.state.gate.cutoffs.size(); ++c) {
      if (ck.state.gate.cutoffs[c] == kNoCutoff) continue;
      std::cout << "cutoff " << (h ? h->name(c) : std::to_string(c)) << " " << ck.state.gate.cutoffs[c] << "\n";
    }
    std::cout << ck.config.to_json();
  }
  return 0;
}

// ---- oracle-check ----------------------------------------------------------

struct OracleOptions {
  std::optional<std::size_t> cases;
  std::uint64_t seed = 7;
  std::string fault = "none";
};

int run_oracles(const OracleOptions& o) {
  const auto fault = oracles::parse_fault(o.fault);
  bool ok = true;
  for (const auto& r : oracles::run_all(o.cases, o.seed, fault)) {
    ok = ok && r.passed();
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << "  cases " << r.cases << "  checks " << r.checks
              << "  max_error " << format_number(r.max_error) << "  " << format_number(r.seconds) << "s";
    if (r.skipped > 0) std::cout << "  skipped " << r.skipped;
    if (!r.passed()) std::cout << "  first failure: " << r.first_failure;
    std::cout << "\n";
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised hierarchical open-set classification"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic hierarchy and feature set");
  g->add_option("--config", gen.config_path, "Generator JSON config");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.synth.seed, "Seed");
  g->add_option("--branching", gen.synth.branching, "Children per internal node");
  g->add_option("--depth", gen.synth.depth, "Tree depth");
  g->add_option("--dim", gen.synth.dim, "Feature dimension");
  g->add_option("--train-per-leaf", gen.synth.train_per_leaf, "Training samples per leaf");
  g->add_option("--test-per-leaf", gen.synth.test_per_leaf, "Test samples per leaf");
  g->add_option("--level-scale", gen.synth.level_scale, "Per-level spread of class means");
  g->add_option("--noise-scale", gen.synth.noise_scale, "Within-class spread");
  g->add_option("--ood-fraction", gen.synth.ood_fraction, "Fraction of leaves held out as OOD");
  g->add_option("--root-ood-count", gen.synth.root_ood_count, "Out-of-hierarchy samples per split");
  g->add_option("--labeled-per-class", gen.labeled_per_class, "Labeled samples per ID class");
  g->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train depth heads");
  t->add_option("--config", train.config_path, "Training JSON config");
  t->add_option("--hierarchy", train.hierarchy, "Hierarchy file")->required();
  t->add_option("--features", train.features, "Feature file")->required();
  t->add_option("--out", train.out, "Run directory");
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--method", train.method, "semihoc, semihoc-no-gate, supervised, ssl-node, ssl-per-depth, spl-oracle");
  t->add_option("--tau", train.tau, "Pseudo-label threshold");
  t->add_option("--lr", train.lr, "Learning rate");
  t->add_option("--dropout", train.dropout, "Dropout rate");
  t->add_option("--epochs", train.epochs, "Epochs");
  t->add_option("--gate-bin-width", train.gate_bin_width, "Age-gating histogram bin width");
  t->add_option("--gate-drop-threshold", train.gate_drop_threshold, "Age-gating drop ratio");
  t->add_flag("--no-age-gating", train.no_age_gating, "Disable age-gating");
  t->add_option("--seed", train.seed, "Seed");
  t->add_option("--eval-every", train.eval_every, "Evaluate on the test split every N epochs");
  t->add_option("--checkpoint-every", train.checkpoint_every, "Checkpoint every N epochs");
  t->add_option("--hidden-width", train.hidden_width, "Hidden layer width");
  t->add_option("--labeled-batch-size", train.labeled_batch_size, "Labeled batch size");
  t->add_option("--unlabeled-batch-ratio", train.unlabeled_batch_ratio, "Unlabeled to labeled batch ratio");
  t->add_option("--ema-momentum", train.ema_momentum, "Teacher EMA momentum");
  t->add_option("--weight-decay", train.weight_decay, "Weight decay");
  t->add_flag("--force", train.force, "Overwrite a non-empty run directory");

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Evaluate teacher predictions");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint");
  e->add_option("--predictions", eval.predictions, "Prediction dump instead of a checkpoint");
  e->add_option("--hierarchy", eval.hierarchy, "Hierarchy file")->required();
  e->add_option("--features", eval.features, "Feature file");
  e->add_option("--split", eval.split, "labeled, unlabeled or test");
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_option("--dump", eval.dump, "Also write a prediction dump");
  e->add_flag("--force", eval.force, "Overwrite a non-empty output directory");

  InspectOptions inspect;
  auto* i = app.add_subcommand("inspect", "Summarize hierarchy, feature and checkpoint files");
  i->add_option("--hierarchy", inspect.hierarchy, "Hierarchy file");
  i->add_option("--features", inspect.features, "Feature file");
  i->add_option("--checkpoint", inspect.checkpoint, "Checkpoint");

  OracleOptions oracle;
  auto* oc = app.add_subcommand("oracle-check", "Compare core algorithms against brute-force oracles");
  oc->add_option("--cases", oracle.cases, "Cases per oracle");
  oc->add_option("--seed", oracle.seed, "Seed");
  oc->add_option("--fault", oracle.fault, "Inject a fault: none, lca, distance, cutoff, gradient, fusion, targets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(train);
    if (*e) return run_eval(eval);
    if (*i) return run_inspect(inspect);
    if (*oc) return run_oracles(oracle);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
