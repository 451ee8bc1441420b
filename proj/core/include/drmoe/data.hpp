#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drmoe/losses.hpp"
#include "drmoe/math.hpp"

namespace drmoe {

/// One instance: a context view (whole activity), a segment view (the judged step), and the label.
struct Sample {
  Vec ctx;
  Vec seg;
  Label label = 0;

  bool operator==(const Sample&) const = default;
};

enum class Split { train, val, test };
std::string to_string(Split s);

struct Dataset {
  std::vector<Sample> samples;
  Split split = Split::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t d_ctx() const { return samples.empty() ? 0 : samples.front().ctx.size(); }
  std::size_t d_seg() const { return samples.empty() ? 0 : samples.front().seg.size(); }
  std::size_t count(Label y) const;
  std::vector<Label> labels() const;

  /// Shared dimensions, labels in {0, 1}, finite values.
  void validate() const;
};

/// Synthetic long-tailed generator settings.
struct GenSpec {
  std::size_t n = 1000;
  double imbalance = 0.05;  // mistake proportion
  std::size_t d_ctx = 16;
  std::size_t d_seg = 16;
  double mean_shift = 2.0;
  double noise_corr = 0.5;  // share of the projected segment signal in the context view
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t mistakes() const;
};

/// Class-conditional Gaussians: segment mean is +/- mean_shift / sqrt(d_seg) per coordinate
/// with unit variance; context = noise_corr * P seg + (1 - noise_corr) * noise for a fixed
/// random projection P. Exactly round(imbalance * n) samples carry label 1.
Dataset generate(const GenSpec& spec);

struct SplitFracs {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;

  void validate() const;
};

/// Stratified, deterministic, disjoint split preserving the original order within each part.
std::array<Dataset, 3> split_dataset(const Dataset& data, const SplitFracs& fracs);

enum class FileFormat { csv, jsonl };
FileFormat parse_format(const std::string& name);
/// From the file extension (.csv / .jsonl); throws for anything else.
FileFormat format_from_path(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_real(double v);

void write_dataset(const Dataset& data, std::ostream& out, FileFormat format);
void write_dataset(const Dataset& data, const std::filesystem::path& path, FileFormat format);

/// Parses a dataset. Errors name the 1-based line number of the offending row.
Dataset read_dataset(std::istream& in, FileFormat format, const std::string& source = "<stream>");
Dataset ingest(const std::filesystem::path& path, FileFormat format);
Dataset ingest(const std::filesystem::path& path);

}  // namespace drmoe
