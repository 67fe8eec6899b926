#include "ulcnn/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "bytes.hpp"
#include "ulcnn/rng.hpp"

namespace ulcnn {

std::optional<Modulation> parse_modulation(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "bpsk") return Modulation::Bpsk;
  if (lower == "qpsk") return Modulation::Qpsk;
  if (lower == "8psk") return Modulation::Psk8;
  if (lower == "pam4") return Modulation::Pam4;
  if (lower == "16qam" || lower == "qam16") return Modulation::Qam16;
  if (lower == "64qam" || lower == "qam64") return Modulation::Qam64;
  return std::nullopt;
}

std::string modulation_name(Modulation m) {
  switch (m) {
    case Modulation::Bpsk: return "BPSK";
    case Modulation::Qpsk: return "QPSK";
    case Modulation::Psk8: return "8PSK";
    case Modulation::Pam4: return "PAM4";
    case Modulation::Qam16: return "16QAM";
    case Modulation::Qam64: return "64QAM";
  }
  fail_config("unknown modulation enum value");
}

namespace {

std::vector<std::pair<double, double>> square_qam(int side) {
  // Levels -(side-1), ..., side-1 step 2 on both axes, scaled to unit power.
  std::vector<std::pair<double, double>> pts;
  double power = 0.0;
  for (int a = 0; a < side; ++a) {
    for (int b = 0; b < side; ++b) {
      const double x = 2.0 * a - (side - 1);
      const double y = 2.0 * b - (side - 1);
      pts.emplace_back(x, y);
      power += x * x + y * y;
    }
  }
  const double scale = 1.0 / std::sqrt(power / static_cast<double>(pts.size()));
  for (auto& p : pts) {
    p.first *= scale;
    p.second *= scale;
  }
  return pts;
}

}  // namespace

std::vector<std::pair<double, double>> constellation(Modulation m) {
  switch (m) {
    case Modulation::Bpsk:
      return {{1.0, 0.0}, {-1.0, 0.0}};
    case Modulation::Qpsk: {
      const double a = 1.0 / std::sqrt(2.0);
      return {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
    }
    case Modulation::Psk8: {
      std::vector<std::pair<double, double>> pts;
      for (int k = 0; k < 8; ++k) {
        const double ang = 2.0 * 3.14159265358979323846 * k / 8.0;
        pts.emplace_back(std::cos(ang), std::sin(ang));
      }
      return pts;
    }
    case Modulation::Pam4: {
      const double s = 1.0 / std::sqrt(5.0);  // mean of {9,1,1,9} is 5
      return {{-3.0 * s, 0.0}, {-1.0 * s, 0.0}, {1.0 * s, 0.0}, {3.0 * s, 0.0}};
    }
    case Modulation::Qam16:
      return square_qam(4);
    case Modulation::Qam64:
      return square_qam(8);
  }
  fail_config("unknown modulation enum value");
}

int LabelMap::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void LabelMap::validate() const {
  if (names.empty()) fail_config("label map is empty");
  if (names.size() > 256) fail_config("label map exceeds 256 entries");
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) fail_config("label map has an empty name");
    for (size_t j = i + 1; j < names.size(); ++j) {
      if (names[i] == names[j]) fail_config("duplicate label name: " + names[i]);
    }
  }
}

std::vector<Frame> generate(const GenSpec& spec) {
  if (spec.k < 1) fail_config("generate: K must be positive");
  if (spec.samples_per_symbol < 1) fail_config("generate: samples per symbol must be >= 1");
  if (spec.frames < 0) fail_config("generate: negative frame count");

  const auto points = constellation(spec.modulation);
  const uint64_t n_points = points.size();
  const int k = spec.k, sps = spec.samples_per_symbol;
  const int n_sym = (k + sps - 1) / sps;
  const double sigma = spec.noiseless
                           ? 0.0
                           : std::sqrt(std::pow(10.0, -spec.snr_db / 10.0) / 2.0);
  const bool rotate = spec.phase_offset_rad != 0.0 || spec.cfo_cycles_per_sample != 0.0;

  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(spec.frames));
  for (int f = 0; f < spec.frames; ++f) {
    // Independent per-frame streams; symbols and noise are separate so the
    // noiseless variant of a seed carries the identical symbol sequence.
    Rng sym_rng(Rng::mix(spec.seed, static_cast<uint64_t>(f), 1));
    Rng noise_rng(Rng::mix(spec.seed, static_cast<uint64_t>(f), 2));

    Frame frame;
    frame.i.resize(static_cast<size_t>(k));
    frame.q.resize(static_cast<size_t>(k));
    frame.label = spec.label;
    frame.snr_db = static_cast<int16_t>(spec.snr_db);

    std::vector<std::pair<double, double>> symbols(static_cast<size_t>(n_sym));
    for (int s = 0; s < n_sym; ++s) {
      symbols[static_cast<size_t>(s)] = points[sym_rng.below(n_points)];
    }

    for (int t = 0; t < k; ++t) {
      double si = symbols[static_cast<size_t>(t / sps)].first;
      double sq = symbols[static_cast<size_t>(t / sps)].second;
      if (rotate) {
        const double ang = spec.phase_offset_rad +
                           2.0 * 3.14159265358979323846 * spec.cfo_cycles_per_sample * t;
        const double c = std::cos(ang), s = std::sin(ang);
        const double ri = si * c - sq * s;
        const double rq = si * s + sq * c;
        si = ri;
        sq = rq;
      }
      if (sigma > 0.0) {
        si += sigma * noise_rng.gaussian();
        sq += sigma * noise_rng.gaussian();
      }
      frame.i[static_cast<size_t>(t)] = static_cast<float>(si);
      frame.q[static_cast<size_t>(t)] = static_cast<float>(sq);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Frame> rotate_augment(const std::vector<Frame>& frames) {
  std::vector<Frame> out;
  out.reserve(frames.size() * 4);
  for (const Frame& f : frames) {
    out.push_back(f);  // theta = 0

    Frame r90 = f;  // (i, q) -> (-q, i)
    for (size_t t = 0; t < f.i.size(); ++t) {
      r90.i[t] = -f.q[t];
      r90.q[t] = f.i[t];
    }
    out.push_back(std::move(r90));

    Frame r180 = f;  // (i, q) -> (-i, -q)
    for (size_t t = 0; t < f.i.size(); ++t) {
      r180.i[t] = -f.i[t];
      r180.q[t] = -f.q[t];
    }
    out.push_back(std::move(r180));

    Frame r270 = f;  // (i, q) -> (q, -i)
    for (size_t t = 0; t < f.i.size(); ++t) {
      r270.i[t] = f.q[t];
      r270.q[t] = -f.i[t];
    }
    out.push_back(std::move(r270));
  }
  return out;
}

namespace {
constexpr char kIqfMagic[5] = "IQF1";
}

void write_iqf(const std::vector<Frame>& frames, const LabelMap& labels,
               const std::filesystem::path& path) {
  labels.validate();
  const int k = frames.empty() ? 0 : frames.front().k();
  for (size_t idx = 0; idx < frames.size(); ++idx) {
    const Frame& f = frames[idx];
    if (f.k() != k || static_cast<int>(f.q.size()) != k) {
      fail_data("frame " + std::to_string(idx) + ": inconsistent frame length");
    }
    if (f.label >= labels.names.size()) {
      fail_data("frame " + std::to_string(idx) + ": label index " + std::to_string(f.label) +
                " outside label map");
    }
  }

  bytes::FileWriter w(path);
  w.put_bytes(kIqfMagic, 4);
  w.put_u32(static_cast<uint32_t>(frames.size()));
  w.put_u32(static_cast<uint32_t>(k));
  w.put_u16(static_cast<uint16_t>(labels.names.size()));
  for (const std::string& name : labels.names) w.put_string(name);
  for (const Frame& f : frames) {
    w.put_u8(f.label);
    w.put_i16(f.snr_db);
    for (float v : f.i) w.put_f32(v);
    for (float v : f.q) w.put_f32(v);
  }
  w.finish();
}

struct IqfReader::Impl {
  bytes::FileReader reader;
  explicit Impl(const std::filesystem::path& path) : reader(path) {}
};

IqfReader::IqfReader(const std::filesystem::path& path) : impl_(new Impl(path)) {
  bytes::FileReader& r = impl_->reader;
  r.expect_magic(kIqfMagic);
  count_ = r.get_u32();
  k_ = static_cast<int>(r.get_u32());
  const uint16_t n_labels = r.get_u16();
  for (uint16_t i = 0; i < n_labels; ++i) labels_.names.push_back(r.get_string());
  labels_.validate();
  if (count_ > 0 && k_ < 1) fail_data(path.string() + ": non-positive frame length");
}

IqfReader::~IqfReader() = default;
IqfReader::IqfReader(IqfReader&&) noexcept = default;
IqfReader& IqfReader::operator=(IqfReader&&) noexcept = default;

bool IqfReader::next(Frame& out) {
  if (read_ >= count_) {
    if (impl_) {
      impl_->reader.expect_trailer();
      impl_.reset();
    }
    return false;
  }
  bytes::FileReader& r = impl_->reader;
  out.label = r.get_u8();
  if (out.label >= labels_.names.size()) {
    fail_data(r.path().string() + ": frame " + std::to_string(read_) + ": label index " +
              std::to_string(out.label) + " outside label map");
  }
  out.snr_db = r.get_i16();
  out.i.resize(static_cast<size_t>(k_));
  out.q.resize(static_cast<size_t>(k_));
  for (int t = 0; t < k_; ++t) out.i[static_cast<size_t>(t)] = r.get_f32();
  for (int t = 0; t < k_; ++t) out.q[static_cast<size_t>(t)] = r.get_f32();
  ++read_;
  return true;
}

std::pair<std::vector<Frame>, LabelMap> read_iqf(const std::filesystem::path& path) {
  IqfReader reader(path);
  std::vector<Frame> frames;
  frames.reserve(reader.frame_count());
  Frame f;
  while (reader.next(f)) frames.push_back(f);
  return {std::move(frames), reader.labels()};
}

SplitResult split(const std::vector<Frame>& frames, const std::array<double, 3>& ratios,
                  uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) fail_config("split: negative ratio");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail_config("split: ratios must sum to 1");

  // Cells keyed by (label, snr) in sorted order for determinism.
  std::map<std::pair<int, int>, std::vector<size_t>> cells;
  for (size_t idx = 0; idx < frames.size(); ++idx) {
    cells[{frames[idx].label, frames[idx].snr_db}].push_back(idx);
  }

  SplitResult out;
  for (auto& [key, members] : cells) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(key.first),
                     static_cast<uint64_t>(key.second + 32768)));
    rng.shuffle(members);

    // Largest-remainder rounding keeps each part within one frame of exact.
    const size_t n = members.size();
    size_t counts[3];
    double frac[3];
    size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double exact = ratios[static_cast<size_t>(p)] * static_cast<double>(n);
      counts[p] = static_cast<size_t>(exact);
      frac[p] = exact - static_cast<double>(counts[p]);
      assigned += counts[p];
    }
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) {
      if (frac[a] != frac[b]) return frac[a] > frac[b];
      return a < b;
    });
    for (size_t r = 0; r < n - assigned; ++r) ++counts[order[r % 3]];

    size_t pos = 0;
    for (size_t c = 0; c < counts[0]; ++c) out.train.push_back(frames[members[pos++]]);
    for (size_t c = 0; c < counts[1]; ++c) out.val.push_back(frames[members[pos++]]);
    for (size_t c = 0; c < counts[2]; ++c) out.test.push_back(frames[members[pos++]]);
  }
  return out;
}

RealTensor frames_to_tensor(const std::vector<Frame>& frames, size_t begin, size_t end) {
  if (begin >= end || end > frames.size()) fail_config("frames_to_tensor: bad range");
  const int k = frames[begin].k();
  RealTensor x({static_cast<int>(end - begin), 2, k});
  for (size_t f = begin; f < end; ++f) {
    const Frame& fr = frames[f];
    if (fr.k() != k) fail_data("frames_to_tensor: inconsistent frame length");
    const int b = static_cast<int>(f - begin);
    for (int t = 0; t < k; ++t) {
      x(b, 0, t) = static_cast<double>(fr.i[static_cast<size_t>(t)]);
      x(b, 1, t) = static_cast<double>(fr.q[static_cast<size_t>(t)]);
    }
  }
  return x;
}

std::vector<int> frame_labels(const std::vector<Frame>& frames, size_t begin, size_t end) {
  std::vector<int> labels;
  labels.reserve(end - begin);
  for (size_t f = begin; f < end; ++f) labels.push_back(frames[f].label);
  return labels;
}

}  // namespace ulcnn
