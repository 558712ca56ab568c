#include "semihoc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "semihoc/checkpoint.hpp"
#include "semihoc/error.hpp"
#include "semihoc/prohoc.hpp"

namespace semihoc {

namespace {

constexpr Eigen::Index kEvalChunk = 1024;

unsigned effective_threads(unsigned cap, int tasks) {
  unsigned n = cap == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cap;
  return std::min<unsigned>(n, static_cast<unsigned>(std::max(tasks, 1)));
}

/// Runs fn(0..n-1). Tasks touch disjoint state, so the result does not depend
/// on the worker count.
template <class Fn>
void parallel_for(int n, unsigned cap, Fn&& fn) {
  const unsigned workers = effective_threads(cap, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Eigen::MatrixXd gather(const FeatureDataset& dataset, std::span<const std::size_t> rows) {
  Eigen::MatrixXd x(dataset.dim(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto f = dataset.features(rows[j]);
    for (std::size_t i = 0; i < f.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[i];
  }
  return x;
}

std::vector<std::vector<double>> column_outputs(const std::vector<Eigen::MatrixXd>& outputs, Eigen::Index col) {
  std::vector<std::vector<double>> out(outputs.size());
  for (std::size_t d = 0; d < outputs.size(); ++d) {
    const auto c = outputs[d].col(col);
    out[d].assign(c.data(), c.data() + c.size());
  }
  return out;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

unsigned threads_from_env() {
  const char* v = std::getenv("SEMIHOC_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw InputError("SEMIHOC_THREADS must be a positive integer");
  return static_cast<unsigned>(n);
}

TrainerState initial_state(const Hierarchy& hierarchy, const FeatureDataset& dataset, const TrainConfig& config) {
  TrainerState s;
  Rng init = make_stream(config.seed, Stream::kInit);
  s.heads = DepthHeads::create(hierarchy, static_cast<int>(dataset.dim()), config.hidden_width, config.dropout, init);
  s.gate = AgeGateState(hierarchy.size(), config.gate_bin_width, config.gate_drop_threshold);
  s.unlabeled_rng = make_stream(config.seed, Stream::kShuffle, 0);
  s.labeled_rng = make_stream(config.seed, Stream::kShuffle, 1);
  for (int d = 1; d <= hierarchy.max_depth(); ++d)
    s.dropout_rngs.push_back(make_stream(config.seed, Stream::kDropout, static_cast<std::uint32_t>(d)));
  s.labeled_order = dataset.indices(Split::kLabeled);
  std::shuffle(s.labeled_order.begin(), s.labeled_order.end(), s.labeled_rng);
  return s;
}

Trainer::Trainer(const Hierarchy& hierarchy, const FeatureDataset& dataset, TrainConfig config)
    : Trainer(hierarchy, dataset, config, initial_state(hierarchy, dataset, config)) {}

Trainer::Trainer(const Hierarchy& hierarchy, const FeatureDataset& dataset, TrainConfig config, TrainerState state)
    : hierarchy_(hierarchy), dataset_(dataset), config_(std::move(config)), state_(std::move(state)) {
  if (config_.method == Method::kSemiHocNoGate) {
    config_.method = Method::kSemiHoc;
    config_.age_gating = false;
  }
  config_.validate();
  dataset_.validate(hierarchy_);
  labeled_ = dataset_.indices(Split::kLabeled);
  unlabeled_ = dataset_.indices(Split::kUnlabeled);
  if (labeled_.empty()) throw InputError("dataset has no labeled samples");
  if (config_.method == Method::kSplOracle && !dataset_.has_unlabeled_truth())
    throw DataError("spl-oracle needs ground truth for every unlabeled sample");

  const int depths = hierarchy_.max_depth();
  if (state_.heads.depth_count() != depths || static_cast<int>(state_.dropout_rngs.size()) != depths)
    throw DataError("trainer state does not match the hierarchy depth");
  for (int d = 1; d <= depths; ++d) {
    const auto& head = state_.heads.students[static_cast<std::size_t>(d - 1)];
    if (head.input_dim() != static_cast<int>(dataset_.dim()))
      throw DataError("feature dimension " + std::to_string(dataset_.dim()) + " does not match model input " +
                      std::to_string(head.input_dim()));
    if (head.output_dim() != static_cast<int>(hierarchy_.depth_space(d).members.size()))
      throw DataError("model output width does not match depth space " + std::to_string(d));
  }
  if (state_.gate.cutoffs.size() != hierarchy_.size()) throw DataError("gate state does not match the hierarchy");
  if (state_.labeled_order.size() != labeled_.size() || state_.labeled_cursor > state_.labeled_order.size())
    throw DataError("labeled cycling state does not match the dataset");

  ood_truth_.assign(dataset_.size(), false);
  for (std::size_t i = 0; i < dataset_.size(); ++i) {
    const NodeId t = dataset_.truth(i);
    ood_truth_[i] = t != kUnknownNode && !hierarchy_.is_id_class(t);
  }
  last_chain_.assign(dataset_.size(), {});
  spl_per_node_.assign(hierarchy_.size(), 0);

  supports_.resize(static_cast<std::size_t>(depths));
  for (int d = 1; d <= depths; ++d) {
    auto& table = supports_[static_cast<std::size_t>(d - 1)];
    table.resize(hierarchy_.size());
    for (NodeId c = 0; c < hierarchy_.size(); ++c)
      if (auto t = hierarchy_.target_distribution(c, d)) table[c] = std::move(t->support);
  }
}

std::vector<std::size_t> Trainer::next_labeled_batch() {
  const std::size_t n = std::min(static_cast<std::size_t>(config_.labeled_batch_size), labeled_.size());
  std::vector<std::size_t> batch;
  batch.reserve(n);
  auto& order = state_.labeled_order;
  while (batch.size() < n) {
    if (state_.labeled_cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), state_.labeled_rng);
      state_.labeled_cursor = 0;
    }
    batch.push_back(order[state_.labeled_cursor++]);
  }
  return batch;
}

void Trainer::add_node_terms(std::vector<std::vector<Target>>& per_depth, std::size_t col, NodeId node,
                             bool all_depths) const {
  for (int d = 1; d <= hierarchy_.max_depth(); ++d) {
    const auto di = static_cast<std::size_t>(d - 1);
    if (!all_depths && !hierarchy_.index_in_depth(node, d)) continue;
    const auto& support = supports_[di][node];
    if (support.empty()) continue;
    Target& t = per_depth[di][col];
    if (t.sum.empty()) t.sum.assign(hierarchy_.depth_space(d).members.size(), 0.0);
    const double mass = 1.0 / static_cast<double>(support.size());
    for (std::size_t k : support) t.sum[k] += mass;
    ++t.terms;
  }
}

std::vector<std::vector<Trainer::Target>> Trainer::unlabeled_targets(std::span<const std::size_t> unlabeled,
                                                                     StepResult& result) {
  const int depths = hierarchy_.max_depth();
  const Epoch epoch = state_.epoch + 1;
  std::vector<std::vector<Target>> per_depth(static_cast<std::size_t>(depths),
                                             std::vector<Target>(unlabeled.size()));

  if (config_.method == Method::kSplOracle) {
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      const std::size_t row = unlabeled[j];
      auto path = hierarchy_.path_from_root(dataset_.truth(row));
      SplChain chain{std::vector<NodeId>(path.begin() + 1, path.end()), config_.tau};
      for (NodeId c : chain.nodes) {
        add_node_terms(per_depth, j, c, false);
        ++spl_per_node_[c];
      }
      result.spl_count += chain.nodes.size();
      last_chain_[row] = std::move(chain);
    }
    return per_depth;
  }

  const auto outputs = teacher_outputs(state_.heads, dataset_, unlabeled, threads_);

  if (config_.method == Method::kSslPerDepth) {
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      for (int d = 1; d <= depths; ++d) {
        const auto col = outputs[static_cast<std::size_t>(d - 1)].col(static_cast<Eigen::Index>(j));
        Eigen::Index best = 0;
        const double conf = col.maxCoeff(&best);
        if (!(conf > config_.tau)) continue;
        const NodeId node = hierarchy_.depth_space(d).members[static_cast<std::size_t>(best)];
        Target& t = per_depth[static_cast<std::size_t>(d - 1)][j];
        if (t.sum.empty()) t.sum.assign(static_cast<std::size_t>(col.size()), 0.0);
        t.sum[static_cast<std::size_t>(best)] += 1.0;
        ++t.terms;
        ++spl_per_node_[node];
        ++result.spl_count;
      }
    }
    return per_depth;
  }

  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    const std::size_t row = unlabeled[j];
    const auto cols = column_outputs(outputs, static_cast<Eigen::Index>(j));
    const HierarchicalDistribution dist = fuse(cols, hierarchy_);

    if (config_.method == Method::kSslNode) {
      const NodeId pred = predict_node(dist);
      if (!(dist.probs[pred] > config_.tau)) continue;
      add_node_terms(per_depth, j, pred, true);
      ++spl_per_node_[pred];
      ++result.spl_count;
      last_chain_[row] = SplChain{{pred}, config_.tau};
      continue;
    }

    const std::uint64_t id = dataset_.id(row);
    const SplChain chain = compute_spls(dist, hierarchy_, config_.tau);
    const auto inserted = state_.log.update(id, chain, epoch);
    SplChain kept = config_.age_gating ? apply_gating(chain, state_.log, state_.gate, id) : chain;
    result.spl_count += chain.nodes.size();
    result.gated_count += chain.nodes.size() - kept.nodes.size();
    for (NodeId c : chain.nodes) ++spl_per_node_[c];

    const NodeId truth = dataset_.truth(row);
    if (truth != kUnknownNode) {
      for (NodeId c : inserted) {
        const bool passed = std::find(kept.nodes.begin(), kept.nodes.end(), c) != kept.nodes.end();
        state_.assignments.push_back({c, id, epoch, hierarchy_.is_ancestor_or_self(c, truth), passed});
      }
    }
    for (NodeId c : kept.nodes) add_node_terms(per_depth, j, c, false);
    last_chain_[row] = std::move(kept);
  }
  return per_depth;
}

StepResult Trainer::train_step(std::span<const std::size_t> labeled, std::span<const std::size_t> unlabeled) {
  if (labeled.empty()) throw InputError("labeled batch must not be empty");
  const int depths = hierarchy_.max_depth();
  const bool semi = config_.method != Method::kSupervised;

  StepResult result;
  result.labeled.assign(static_cast<std::size_t>(depths), 0.0);
  result.unlabeled.assign(static_cast<std::size_t>(depths), 0.0);
  result.labeled_count = labeled.size();
  result.unlabeled_count = semi ? unlabeled.size() : 0;

  std::vector<std::vector<Target>> targets;
  if (semi && !unlabeled.empty()) targets = unlabeled_targets(unlabeled, result);

  const SgdConfig sgd{config_.learning_rate, config_.sgd_momentum, config_.weight_decay};
  const double wl = 1.0 / static_cast<double>(labeled.size());
  const double wu = result.unlabeled_count > 0 ? 1.0 / static_cast<double>(result.unlabeled_count) : 0.0;

  parallel_for(depths, threads_, [&](int di) {
    const int d = di + 1;
    const auto udi = static_cast<std::size_t>(di);
    const auto width = static_cast<Eigen::Index>(hierarchy_.depth_space(d).members.size());

    std::vector<std::size_t> rows(labeled.begin(), labeled.end());
    std::vector<std::size_t> unlabeled_cols;
    if (!targets.empty())
      for (std::size_t j = 0; j < unlabeled.size(); ++j)
        if (targets[udi][j].terms > 0) {
          rows.push_back(unlabeled[j]);
          unlabeled_cols.push_back(j);
        }
    const auto n = static_cast<Eigen::Index>(rows.size());

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(width, n);
    Eigen::VectorXd terms(n), weight(n);
    for (std::size_t j = 0; j < labeled.size(); ++j) {
      const auto& support = supports_[udi][dataset_.truth(labeled[j])];
      const double mass = 1.0 / static_cast<double>(support.size());
      for (std::size_t k : support) q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += mass;
      terms(static_cast<Eigen::Index>(j)) = 1.0;
      weight(static_cast<Eigen::Index>(j)) = wl;
    }
    for (std::size_t u = 0; u < unlabeled_cols.size(); ++u) {
      const auto j = static_cast<Eigen::Index>(labeled.size() + u);
      const Target& t = targets[udi][unlabeled_cols[u]];
      for (Eigen::Index k = 0; k < width; ++k) q(k, j) = t.sum[static_cast<std::size_t>(k)];
      terms(j) = t.terms;
      weight(j) = wu;
    }

    MlpHead& student = state_.heads.students[udi];
    const DropoutMasks masks = sample_dropout_masks(student, n, state_.dropout_rngs[udi]);
    const ForwardPass pass = forward(student, gather(dataset_, rows), &masks);

    Eigen::MatrixXd dz(width, n);
    double loss_l = 0.0, loss_u = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      dz.col(j) = weight(j) * (terms(j) * pass.probs.col(j) - q.col(j));
      const double ce = -q.col(j).dot(pass.log_probs.col(j));
      (j < static_cast<Eigen::Index>(labeled.size()) ? loss_l : loss_u) += ce;
    }
    result.labeled[udi] = loss_l * wl;
    result.unlabeled[udi] = loss_u * wu;

    HeadParams grads = student.params.zeros_like();
    backward(student, pass, &masks, dz, grads);
    sgd_step(student.params, state_.heads.velocity[udi], grads, sgd);
    ema_update(state_.heads.teachers[udi].params, student.params, config_.ema_momentum);
  });
  return result;
}

EpochReport Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const int depths = hierarchy_.max_depth();
  const Epoch epoch = state_.epoch + 1;

  EpochReport report;
  report.epoch = epoch;
  report.method = config_.method_label();
  report.labeled_loss.assign(static_cast<std::size_t>(depths), 0.0);
  report.unlabeled_loss.assign(static_cast<std::size_t>(depths), 0.0);
  std::fill(spl_per_node_.begin(), spl_per_node_.end(), 0);
  for (std::size_t row : unlabeled_) last_chain_[row] = {};

  std::vector<std::size_t> order = unlabeled_;
  std::shuffle(order.begin(), order.end(), state_.unlabeled_rng);
  const std::size_t labeled_batch = std::min(static_cast<std::size_t>(config_.labeled_batch_size), labeled_.size());
  const std::size_t unlabeled_batch =
      static_cast<std::size_t>(config_.labeled_batch_size) * static_cast<std::size_t>(config_.unlabeled_batch_ratio);
  const std::size_t steps = order.empty() ? (labeled_.size() + labeled_batch - 1) / labeled_batch
                                          : (order.size() + unlabeled_batch - 1) / unlabeled_batch;

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = std::min(order.size(), s * unlabeled_batch);
    const std::size_t end = std::min(order.size(), begin + unlabeled_batch);
    const auto labeled = next_labeled_batch();
    const StepResult r = train_step(labeled, std::span(order).subspan(begin, end - begin));
    for (int d = 0; d < depths; ++d) {
      report.labeled_loss[static_cast<std::size_t>(d)] += r.labeled[static_cast<std::size_t>(d)];
      report.unlabeled_loss[static_cast<std::size_t>(d)] += r.unlabeled[static_cast<std::size_t>(d)];
    }
    report.spl_count += r.spl_count;
    report.gated_count += r.gated_count;
  }
  for (int d = 0; d < depths; ++d) {
    report.labeled_loss[static_cast<std::size_t>(d)] /= static_cast<double>(steps);
    report.unlabeled_loss[static_cast<std::size_t>(d)] /= static_cast<double>(steps);
  }

  if (config_.method == Method::kSemiHoc && !freeze_cutoffs_) update_cutoffs(state_.gate, state_.log, epoch);
  state_.epoch = epoch;

  report.spl_per_node = spl_per_node_;
  if (report.spl_count > 0)
    report.coverage = static_cast<double>(report.spl_count - report.gated_count) / static_cast<double>(report.spl_count);

  std::vector<SplChain> chains;
  std::vector<NodeId> truths;
  for (std::size_t row : unlabeled_) {
    if (!ood_truth_[row]) continue;
    chains.push_back(last_chain_[row]);
    truths.push_back(dataset_.truth(row));
  }
  if (const auto pd = spl_purity_and_depth(chains, truths, hierarchy_)) {
    report.purity = pd->purity;
    report.avg_depth = pd->average_depth;
  }

  if (config_.eval_every > 0 && epoch % config_.eval_every == 0) {
    const auto test = dataset_.indices(Split::kTest);
    if (!test.empty()) {
      const auto records = predict(state_.heads, hierarchy_, dataset_, test, threads_);
      std::vector<NodeId> preds, gts;
      for (const auto& r : records) {
        preds.push_back(r.predicted);
        gts.push_back(r.truth);
      }
      report.eval = bmhd(preds, gts, hierarchy_);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<Eigen::MatrixXd> teacher_outputs(const DepthHeads& heads, const FeatureDataset& dataset,
                                             std::span<const std::size_t> rows, unsigned threads) {
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(heads.depth_count()));
  parallel_for(heads.depth_count(), threads, [&](int di) {
    const MlpHead& teacher = heads.teachers[static_cast<std::size_t>(di)];
    Eigen::MatrixXd& probs = out[static_cast<std::size_t>(di)];
    probs.resize(teacher.output_dim(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t begin = 0; begin < rows.size(); begin += kEvalChunk) {
      const std::size_t len = std::min<std::size_t>(kEvalChunk, rows.size() - begin);
      const ForwardPass pass = forward(teacher, gather(dataset, rows.subspan(begin, len)), nullptr);
      probs.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len)) = pass.probs;
    }
  });
  return out;
}

std::vector<PredictionRecord> predict(const DepthHeads& heads, const Hierarchy& hierarchy,
                                      const FeatureDataset& dataset, std::span<const std::size_t> rows,
                                      unsigned threads) {
  const auto outputs = teacher_outputs(heads, dataset, rows, threads);
  std::vector<PredictionRecord> records;
  records.reserve(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto dist = fuse(column_outputs(outputs, static_cast<Eigen::Index>(j)), hierarchy);
    records.push_back(make_prediction(dataset.id(rows[j]), dataset.truth(rows[j]), dist, hierarchy));
  }
  return records;
}

std::string metrics_csv_header(int depths) {
  std::string h = "epoch,method";
  for (int d = 1; d <= depths; ++d) {
    const auto s = std::to_string(d);
    h += ",loss_l_d" + s + ",loss_u_d" + s + ",loss_d" + s;
  }
  return h + ",spl_count,gated_count,coverage,purity,avg_depth,bmhd_id,bmhd_ood,bmhd_mix";
}

std::string metrics_csv_row(const EpochReport& r) {
  std::string row = std::to_string(r.epoch) + "," + r.method;
  for (std::size_t d = 0; d < r.labeled_loss.size(); ++d)
    row += "," + format_number(r.labeled_loss[d]) + "," + format_number(r.unlabeled_loss[d]) + "," +
           format_number(r.loss(static_cast<int>(d)));
  row += "," + std::to_string(r.spl_count) + "," + std::to_string(r.gated_count);
  row += "," + optional_number(r.coverage) + "," + optional_number(r.purity) + "," + optional_number(r.avg_depth);
  const BmhdResult none;
  const BmhdResult& e = r.eval ? *r.eval : none;
  row += "," + optional_number(e.id) + "," + optional_number(e.ood) + "," + optional_number(e.mix);
  return row;
}

namespace {

void check_resumable(const TrainConfig& run, const TrainConfig& saved) {
  TrainConfig a = run, b = saved;
  for (TrainConfig* c : {&a, &b}) {
    c->epochs = 0;
    c->eval_every = 0;
    c->checkpoint_every = 0;
    if (c->method == Method::kSemiHocNoGate) {
      c->method = Method::kSemiHoc;
      c->age_gating = false;
    }
  }
  if (!(a == b)) throw InputError("config differs from the checkpoint in a training setting");
}

void write_metrics(const std::filesystem::path& path, int depths, const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << metrics_csv_header(depths) << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

RunResult run_training(const TrainConfig& config, const FeatureDataset& dataset, const Hierarchy& hierarchy,
                       const RunOptions& options) {
  config.validate();
  RunResult result;
  TrainerState state;
  if (options.resume_from) {
    Checkpoint ck = load_checkpoint(*options.resume_from);
    if (ck.hierarchy_hash != hierarchy.content_hash())
      throw DataError("checkpoint was trained on a different hierarchy");
    if (ck.input_dim != dataset.dim() || ck.sample_count != dataset.size())
      throw DataError("checkpoint was trained on a different dataset");
    check_resumable(config, ck.config);
    state = std::move(ck.state);
    result.csv_rows = std::move(ck.csv_rows);
  } else {
    dataset.validate(hierarchy);
    state = initial_state(hierarchy, dataset, config);
  }

  Trainer trainer(hierarchy, dataset, config, std::move(state));
  trainer.set_threads(options.threads);
  trainer.freeze_cutoffs(options.freeze_cutoffs);
  const int depths = hierarchy.max_depth();

  auto checkpoint = [&](const std::filesystem::path& path) {
    save_checkpoint({hierarchy.content_hash(), dataset.dim(), dataset.size(), trainer.config(), trainer.state(),
                     result.csv_rows},
                    path);
  };

  std::filesystem::path metrics_path;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    std::ofstream snap(*options.out_dir / "config.json", std::ios::trunc);
    snap << config.to_json();
    if (!snap) throw DataError("cannot write config snapshot into " + options.out_dir->string());
    metrics_path = *options.out_dir / "metrics.csv";
    write_metrics(metrics_path, depths, result.csv_rows);
  }

  const Epoch last = options.stop_after > 0 ? std::min<Epoch>(options.stop_after, config.epochs) : config.epochs;
  while (trainer.state().epoch < last) {
    EpochReport report = trainer.run_epoch();
    result.csv_rows.push_back(metrics_csv_row(report));
    if (options.out_dir) {
      std::ofstream out(metrics_path, std::ios::app);
      out << result.csv_rows.back() << '\n';
      if (!out) throw DataError("failed writing " + metrics_path.string());
      if (config.checkpoint_every > 0 && report.epoch % config.checkpoint_every == 0)
        checkpoint(*options.out_dir / ("checkpoint_epoch" + std::to_string(report.epoch) + ".bin"));
    }
    if (options.on_epoch) options.on_epoch(report);
    result.reports.push_back(std::move(report));
  }
  if (options.out_dir) checkpoint(*options.out_dir / "final.bin");
  result.state = trainer.state();
  return result;
}

}  // namespace semihoc
