#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ulcnn/tensor.hpp"

namespace ulcnn {

enum class Modulation { Bpsk, Qpsk, Psk8, Pam4, Qam16, Qam64 };

std::optional<Modulation> parse_modulation(const std::string& name);
std::string modulation_name(Modulation m);

/// Constellation points with average power normalized to 1.
std::vector<std::pair<double, double>> constellation(Modulation m);

/// One captured frame: K complex baseband samples stored as I and Q rows.
struct Frame {
  std::vector<float> i, q;
  uint8_t label = 0;
  int16_t snr_db = 0;

  int k() const { return static_cast<int>(i.size()); }
};

/// Ordered modulation-name <-> class-index table persisted with a dataset.
struct LabelMap {
  std::vector<std::string> names;

  int index_of(const std::string& name) const;
  int size() const { return static_cast<int>(names.size()); }
  void validate() const;  // unique, non-empty names, at most 256 entries
};

struct GenSpec {
  Modulation modulation = Modulation::Bpsk;
  int snr_db = 10;
  int samples_per_symbol = 8;
  int frames = 1;
  int k = 128;
  uint64_t seed = 0;
  bool noiseless = false;          // disables AWGN (snr treated as +inf)
  double phase_offset_rad = 0.0;   // carrier phase
  double cfo_cycles_per_sample = 0.0;
  uint8_t label = 0;               // class index stamped on produced frames
};

/// Random unit-power symbols, repetition pulse shaping, optional phase/CFO
/// rotation, then complex AWGN with per-sample variance 10^(-snr_db/10) split
/// equally across I and Q. Deterministic per (seed, frame index), independent
/// of generation order; symbol and noise streams are separated so the same
/// seed yields the same symbols with noise on or off.
std::vector<Frame> generate(const GenSpec& spec);

/// Rotation augmentation: each frame yields four, rotated by 0, pi/2, pi,
/// 3pi/2 (exact sign flips/swaps, no trigonometry). Labels and SNR preserved.
std::vector<Frame> rotate_augment(const std::vector<Frame>& frames);

void write_iqf(const std::vector<Frame>& frames, const LabelMap& labels,
               const std::filesystem::path& path);
std::pair<std::vector<Frame>, LabelMap> read_iqf(const std::filesystem::path& path);

/// Streaming IQF access: header is read on construction, frames one at a
/// time; finish() (or reading past the last frame) verifies the checksum.
class IqfReader {
 public:
  explicit IqfReader(const std::filesystem::path& path);
  ~IqfReader();
  IqfReader(IqfReader&&) noexcept;
  IqfReader& operator=(IqfReader&&) noexcept;

  const LabelMap& labels() const { return labels_; }
  uint32_t frame_count() const { return count_; }
  int k() const { return k_; }

  bool next(Frame& out);  // false once all frames are consumed (checksum verified)

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  LabelMap labels_;
  uint32_t count_ = 0, read_ = 0;
  int k_ = 0;
};

struct SplitResult {
  std::vector<Frame> train, val, test;
};

/// Stratified split: every (label, snr) cell is partitioned within +-1 frame
/// of the exact ratios (largest-remainder rounding), shuffled per cell under
/// a seed derived from (seed, label, snr). Deterministic.
SplitResult split(const std::vector<Frame>& frames, const std::array<double, 3>& ratios,
                  uint64_t seed);

/// Frames -> model input [B, 2, K] plus the label vector.
RealTensor frames_to_tensor(const std::vector<Frame>& frames, size_t begin, size_t end);
std::vector<int> frame_labels(const std::vector<Frame>& frames, size_t begin, size_t end);

}  // namespace ulcnn
