#include "semihoc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "semihoc/error.hpp"

namespace semihoc {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw InputError("predictions and ground truths differ in length");
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

BmhdResult bmhd(std::span<const NodeId> predictions, std::span<const NodeId> truths, const Hierarchy& hierarchy) {
  check_lengths(predictions.size(), truths.size());
  std::map<NodeId, std::pair<double, std::size_t>> per_class;  // sum, count
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == kUnknownNode) continue;
    auto& [sum, count] = per_class[truths[i]];
    sum += hierarchy.tree_distance(predictions[i], truths[i]);
    ++count;
  }
  double id_sum = 0.0, ood_sum = 0.0;
  std::size_t id_classes = 0, ood_classes = 0;
  for (const auto& [c, acc] : per_class) {
    const double mean = acc.first / static_cast<double>(acc.second);
    if (hierarchy.is_id_class(c)) {
      id_sum += mean;
      ++id_classes;
    } else {
      ood_sum += mean;
      ++ood_classes;
    }
  }
  BmhdResult r;
  if (id_classes > 0) r.id = id_sum / static_cast<double>(id_classes);
  if (ood_classes > 0) r.ood = ood_sum / static_cast<double>(ood_classes);
  if (r.id && r.ood) r.mix = (*r.id + *r.ood) / 2.0;
  return r;
}

DecompositionMatrix decomposition_matrix(std::span<const NodeId> predictions, std::span<const NodeId> truths,
                                         const Hierarchy& hierarchy, PredictedSubset subset) {
  check_lengths(predictions.size(), truths.size());
  DecompositionMatrix m;
  m.size = hierarchy.max_depth() + 1;
  std::vector<std::size_t> counts(static_cast<std::size_t>(m.size * m.size), 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == kUnknownNode) continue;
    const bool id_pred = hierarchy.is_id_class(predictions[i]);
    if (id_pred != (subset == PredictedSubset::kId)) continue;
    const NodeId l = hierarchy.lca(predictions[i], truths[i]);
    const int under = hierarchy.tree_distance(l, truths[i]);
    const int over = hierarchy.tree_distance(l, predictions[i]);
    ++counts[static_cast<std::size_t>(under * m.size + over)];
    ++m.count;
  }
  m.percent.assign(counts.size(), 0.0);
  if (m.count == 0) return m;
  for (std::size_t k = 0; k < counts.size(); ++k)
    m.percent[k] = 100.0 * static_cast<double>(counts[k]) / static_cast<double>(m.count);
  return m;
}

std::optional<PurityDepth> spl_purity_and_depth(std::span<const SplChain> chains, std::span<const NodeId> truths,
                                                const Hierarchy& hierarchy) {
  check_lengths(chains.size(), truths.size());
  std::size_t assigned = 0, pure = 0;
  double depth_sum = 0.0;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (chains[i].nodes.empty() || truths[i] == kUnknownNode) continue;
    const NodeId deepest = *std::max_element(chains[i].nodes.begin(), chains[i].nodes.end(), [&](NodeId a, NodeId b) {
      return hierarchy.depth(a) < hierarchy.depth(b);
    });
    ++assigned;
    if (hierarchy.is_ancestor_or_self(deepest, truths[i])) ++pure;
    depth_sum += hierarchy.depth(deepest);
  }
  if (assigned == 0) return std::nullopt;
  const auto n = static_cast<double>(assigned);
  return PurityDepth{static_cast<double>(pure) / n, depth_sum / n, assigned};
}

GateStats gate_fpr_coverage(std::span<const AssignmentRecord> records) {
  GateStats s;
  std::size_t passed = 0, incorrect_passed = 0;
  for (const auto& r : records) {
    ++s.total;
    if (r.passed) ++passed;
    if (!r.correct) {
      ++s.incorrect;
      if (r.passed) ++incorrect_passed;
    }
  }
  if (s.total > 0) s.coverage = static_cast<double>(passed) / static_cast<double>(s.total);
  if (s.incorrect == 0) {
    s.no_incorrect = true;
  } else {
    s.fpr = static_cast<double>(incorrect_passed) / static_cast<double>(s.incorrect);
  }
  return s;
}

std::vector<ConfidenceBin> confidence_accuracy_bins(std::span<const ScoredPrediction> predictions, int bins) {
  if (bins < 1) throw InputError("bin count must be >= 1");
  std::vector<ConfidenceBin> out(static_cast<std::size_t>(bins));
  std::vector<std::size_t> correct(out.size(), 0);
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].lower = static_cast<double>(b) / bins;
    out[static_cast<std::size_t>(b)].upper = static_cast<double>(b + 1) / bins;
  }
  for (const auto& p : predictions) {
    auto b = static_cast<int>(std::floor(std::clamp(p.confidence, 0.0, 1.0) * bins));
    b = std::min(b, bins - 1);
    ++out[static_cast<std::size_t>(b)].count;
    if (p.correct) ++correct[static_cast<std::size_t>(b)];
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b].count == 0) continue;
    out[b].frequency = static_cast<double>(out[b].count) / static_cast<double>(predictions.size());
    out[b].accuracy = static_cast<double>(correct[b]) / static_cast<double>(out[b].count);
  }
  return out;
}

PredictionRecord make_prediction(std::uint64_t sample_id, NodeId truth, const HierarchicalDistribution& dist,
                                 const Hierarchy& hierarchy) {
  PredictionRecord r;
  r.sample_id = sample_id;
  r.truth = truth;
  r.predicted = predict_node(dist);
  r.node_confidence = dist.probs[r.predicted];
  const auto conf = subtree_confidences(dist, hierarchy);
  for (NodeId c : hierarchy.path_from_root(r.predicted)) r.path.emplace_back(c, conf[c]);
  return r;
}

EvalReport evaluate(std::span<const PredictionRecord> records, const Hierarchy& hierarchy, int bins) {
  std::vector<NodeId> preds, truths;
  std::vector<ScoredPrediction> scored[2][2];
  for (const auto& r : records) {
    if (r.truth == kUnknownNode) continue;
    preds.push_back(r.predicted);
    truths.push_back(r.truth);
    const int subset = hierarchy.is_id_class(r.predicted) ? 0 : 1;
    scored[0][subset].push_back({r.node_confidence, r.predicted == r.truth});
    scored[1][subset].push_back({r.subtree_confidence(), hierarchy.is_ancestor_or_self(r.predicted, r.truth)});
  }
  EvalReport report;
  report.evaluated = preds.size();
  report.bmhd = bmhd(preds, truths, hierarchy);
  report.id_predicted = decomposition_matrix(preds, truths, hierarchy, PredictedSubset::kId);
  report.ood_predicted = decomposition_matrix(preds, truths, hierarchy, PredictedSubset::kOod);
  for (int mode = 0; mode < 2; ++mode)
    for (int subset = 0; subset < 2; ++subset)
      report.calibration[mode][subset] = confidence_accuracy_bins(scored[mode][subset], bins);
  return report;
}

void write_eval_csvs(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("summary.csv");
    out << "samples,bmhd_id,bmhd_ood,bmhd_mix\n";
    out << report.evaluated << ',' << opt(report.bmhd.id) << ',' << opt(report.bmhd.ood) << ','
        << opt(report.bmhd.mix) << '\n';
  }
  {
    auto out = open("decomposition.csv");
    out << "panel,underprediction,overprediction,percent,panel_count\n";
    const std::pair<const char*, const DecompositionMatrix*> panels[] = {{"id_predicted", &report.id_predicted},
                                                                          {"ood_predicted", &report.ood_predicted}};
    for (const auto& [name, m] : panels)
      for (int u = 0; u < m->size; ++u)
        for (int o = 0; o < m->size; ++o)
          out << name << ',' << u << ',' << o << ',' << format_number(m->at(u, o)) << ',' << m->count << '\n';
  }
  {
    auto out = open("calibration.csv");
    out << "mode,panel,bin_lower,bin_upper,count,frequency,accuracy\n";
    const char* modes[] = {"node", "subtree"};
    const char* panels[] = {"id_predicted", "ood_predicted"};
    for (int mode = 0; mode < 2; ++mode)
      for (int subset = 0; subset < 2; ++subset)
        for (const auto& b : report.calibration[mode][subset])
          out << modes[mode] << ',' << panels[subset] << ',' << format_number(b.lower) << ','
              << format_number(b.upper) << ',' << b.count << ',' << format_number(b.frequency) << ','
              << opt(b.accuracy) << '\n';
  }
}

void write_prediction_dump(std::ostream& out, std::span<const PredictionRecord> records, const Hierarchy& hierarchy) {
  for (const auto& r : records) {
    out << r.sample_id << '\t' << hierarchy.name(r.predicted) << '\t' << format_number(r.node_confidence) << '\t';
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      if (k > 0) out << ',';
      out << hierarchy.name(r.path[k].first) << ':' << format_number(r.path[k].second);
    }
    out << '\n';
  }
}

std::vector<PredictionRecord> read_prediction_dump(std::istream& in, const Hierarchy& hierarchy,
                                                   const std::unordered_map<std::uint64_t, NodeId>& truth_by_id) {
  std::vector<PredictionRecord> out;
  std::string line;
  auto parse_double = [](const std::string& s, const std::string& where) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError(where + "bad number '" + s + "'");
    return v;
  };
  auto node_of = [&](const std::string& s, const std::string& where) {
    auto n = hierarchy.find(s);
    if (!n) throw DataError(where + "unknown node '" + s + "'");
    return *n;
  };
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    const std::string where = "prediction dump line " + std::to_string(line_no) + ": ";
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 4) throw DataError(where + "expected 4 tab-separated fields");
    PredictionRecord r;
    std::uint64_t id = 0;
    auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size()) throw DataError(where + "bad sample id");
    r.sample_id = id;
    r.predicted = node_of(fields[1], where);
    r.node_confidence = parse_double(fields[2], where);
    std::stringstream chain(fields[3]);
    for (std::string item; std::getline(chain, item, ',');) {
      const auto colon = item.rfind(':');
      if (colon == std::string::npos) throw DataError(where + "chain entry without ':'");
      r.path.emplace_back(node_of(item.substr(0, colon), where), parse_double(item.substr(colon + 1), where));
    }
    if (r.path.empty() || r.path.back().first != r.predicted)
      throw DataError(where + "chain does not end at the predicted node");
    if (auto it = truth_by_id.find(id); it != truth_by_id.end()) r.truth = it->second;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace semihoc
