#include "semihoc/checkpoint.hpp"

#include <fstream>

#include "semihoc/binary_io.hpp"
#include "semihoc/error.hpp"

namespace semihoc {

namespace {

constexpr char kMagic[4] = {'S', 'H', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_params(BinaryWriter& w, const HeadParams& p) {
  w.u32(static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) w.f64(l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f64(l.bias(i));
  }
}

void read_params(BinaryReader& r, HeadParams& p) {
  if (r.u32("layer count") != p.layers.size()) throw DataError("checkpoint: layer count mismatch");
  for (auto& l : p.layers) {
    const auto rows = r.u32("layer rows");
    const auto cols = r.u32("layer cols");
    if (rows != l.weight.rows() || cols != l.weight.cols()) throw DataError("checkpoint: layer shape mismatch");
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.f64("weight");
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = r.f64("bias");
  }
}

void write_head(BinaryWriter& w, const MlpHead& h) {
  w.i32(h.depth());
  w.i32(h.input_dim());
  w.i32(h.hidden_width());
  w.i32(h.output_dim());
  w.f64(h.dropout_rate());
  write_params(w, h.params);
}

MlpHead read_head(BinaryReader& r) {
  const int depth = r.i32("head depth");
  const int input = r.i32("head input");
  const int hidden = r.i32("head hidden");
  const int output = r.i32("head output");
  const double dropout = r.f64("head dropout");
  MlpHead h = [&] {
    try {
      return MlpHead(depth, input, hidden, output, dropout);
    } catch (const InputError& e) {
      throw DataError(std::string("checkpoint: ") + e.what());
    }
  }();
  read_params(r, h.params);
  return h;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    BinaryWriter w(out);
    w.bytes({kMagic, 4});
    w.u32(kVersion);
    w.u64(ck.hierarchy_hash);
    w.u32(ck.input_dim);
    w.u64(ck.sample_count);
    w.str(ck.config.to_json());

    const TrainerState& s = ck.state;
    w.i32(s.epoch);
    w.u32(static_cast<std::uint32_t>(s.heads.depth_count()));
    for (int d = 0; d < s.heads.depth_count(); ++d) {
      const auto i = static_cast<std::size_t>(d);
      write_head(w, s.heads.students[i]);
      write_params(w, s.heads.teachers[i].params);
      write_params(w, s.heads.velocity[i]);
    }

    w.u64(s.log.entries().size());
    for (const auto& [sample, nodes] : s.log.entries()) {
      w.u64(sample);
      w.u64(nodes.size());
      for (const auto& [node, epoch] : nodes) {
        w.u32(node);
        w.i32(epoch);
      }
    }

    w.i32(s.gate.bin_width);
    w.f64(s.gate.drop_threshold);
    w.u64(s.gate.cutoffs.size());
    for (Epoch c : s.gate.cutoffs) w.i32(c);

    w.u64(s.assignments.size());
    for (const auto& a : s.assignments) {
      w.u32(a.node);
      w.u64(a.sample);
      w.i32(a.epoch);
      w.u8(static_cast<std::uint8_t>((a.correct ? 1 : 0) | (a.passed ? 2 : 0)));
    }

    w.str(serialize_rng(s.unlabeled_rng));
    w.str(serialize_rng(s.labeled_rng));
    w.u64(s.dropout_rngs.size());
    for (const auto& rng : s.dropout_rngs) w.str(serialize_rng(rng));
    w.u64(s.labeled_order.size());
    for (std::size_t i : s.labeled_order) w.u64(i);
    w.u64(s.labeled_cursor);

    w.u64(ck.csv_rows.size());
    for (const auto& row : ck.csv_rows) w.str(row);
    out.flush();
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  BinaryReader r(in);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) throw DataError(path.string() + " is not a checkpoint");
  if (const auto v = r.u32("version"); v != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(v));

  Checkpoint ck;
  ck.hierarchy_hash = r.u64("hierarchy hash");
  ck.input_dim = r.u32("input dim");
  ck.sample_count = r.u64("sample count");
  try {
    ck.config = TrainConfig::from_json(r.str("config"));
  } catch (const InputError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }

  TrainerState& s = ck.state;
  s.epoch = r.i32("epoch");
  const auto depths = r.u32("depth count");
  for (std::uint32_t d = 0; d < depths; ++d) {
    MlpHead student = read_head(r);
    MlpHead teacher = student;
    read_params(r, teacher.params);
    HeadParams velocity = student.params.zeros_like();
    read_params(r, velocity);
    s.heads.students.push_back(std::move(student));
    s.heads.teachers.push_back(std::move(teacher));
    s.heads.velocity.push_back(std::move(velocity));
  }

  const auto samples = r.u64("log size");
  for (std::uint64_t i = 0; i < samples; ++i) {
    const auto sample = r.u64("log sample");
    const auto count = r.u64("log entry count");
    for (std::uint64_t k = 0; k < count; ++k) {
      const NodeId node = r.u32("log node");
      s.log.set(node, sample, r.i32("log epoch"));
    }
  }

  s.gate.bin_width = r.i32("gate bin width");
  s.gate.drop_threshold = r.f64("gate drop threshold");
  s.gate.cutoffs.resize(r.u64("cutoff count"));
  for (auto& c : s.gate.cutoffs) c = r.i32("cutoff");

  s.assignments.resize(r.u64("assignment count"));
  for (auto& a : s.assignments) {
    a.node = r.u32("assignment node");
    a.sample = r.u64("assignment sample");
    a.epoch = r.i32("assignment epoch");
    const auto flags = r.u8("assignment flags");
    a.correct = (flags & 1) != 0;
    a.passed = (flags & 2) != 0;
  }

  s.unlabeled_rng = deserialize_rng(r.str("unlabeled rng"));
  s.labeled_rng = deserialize_rng(r.str("labeled rng"));
  s.dropout_rngs.resize(r.u64("dropout rng count"));
  for (auto& rng : s.dropout_rngs) rng = deserialize_rng(r.str("dropout rng"));
  s.labeled_order.resize(r.u64("labeled order size"));
  for (auto& i : s.labeled_order) i = r.u64("labeled order");
  s.labeled_cursor = r.u64("labeled cursor");

  ck.csv_rows.resize(r.u64("metrics row count"));
  for (auto& row : ck.csv_rows) row = r.str("metrics row");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace semihoc
