#include "drmoe/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drmoe/error.hpp"

namespace drmoe {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

std::size_t Dataset::count(Label y) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [y](const Sample& s) { return s.label == y; }));
}

std::vector<Label> Dataset::labels() const {
  std::vector<Label> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.ctx.empty() || s.seg.empty()) {
      throw ValidationError("sample " + std::to_string(i) + ": empty feature view");
    }
    if (s.ctx.size() != d_ctx() || s.seg.size() != d_seg()) {
      throw ValidationError("sample " + std::to_string(i) + ": dimensions " + std::to_string(s.ctx.size()) +
                            "/" + std::to_string(s.seg.size()) + " differ from " +
                            std::to_string(d_ctx()) + "/" + std::to_string(d_seg()));
    }
    if (s.label != 0 && s.label != 1) {
      throw ValidationError("sample " + std::to_string(i) + ": label " + std::to_string(s.label) +
                            " is not 0 or 1");
    }
    if (!all_finite(s.ctx) || !all_finite(s.seg)) {
      throw ValidationError("sample " + std::to_string(i) + ": non-finite feature");
    }
  }
}

void GenSpec::validate() const {
  if (n < 10) throw ValidationError("n: must be at least 10, got " + std::to_string(n));
  if (!(imbalance > 0.0 && imbalance < 1.0)) {
    throw ValidationError("imbalance: must lie in (0, 1), got " + format_real(imbalance));
  }
  if (imbalance * static_cast<double>(n) < 1.0) {
    throw ValidationError("imbalance: imbalance * n must be at least 1");
  }
  if (d_ctx == 0) throw ValidationError("d_ctx: must be positive");
  if (d_seg == 0) throw ValidationError("d_seg: must be positive");
  if (!std::isfinite(mean_shift)) throw ValidationError("mean_shift: must be finite");
  if (!(noise_corr >= 0.0 && noise_corr <= 1.0)) {
    throw ValidationError("noise_corr: must lie in [0, 1], got " + format_real(noise_corr));
  }
}

std::size_t GenSpec::mistakes() const {
  return static_cast<std::size_t>(std::llround(imbalance * static_cast<double>(n)));
}

Dataset generate(const GenSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  std::vector<Label> labels(spec.n, 0);
  std::fill_n(labels.begin(), spec.mistakes(), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  Mat projection(spec.d_ctx, spec.d_seg);
  {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(spec.d_seg)));
    for (double& v : projection.values()) v = dist(rng);
  }

  const double shift = spec.mean_shift / std::sqrt(static_cast<double>(spec.d_seg));
  std::normal_distribution<double> unit(0.0, 1.0);
  Dataset data;
  data.samples.reserve(spec.n);
  for (Label y : labels) {
    Sample s;
    s.label = y;
    s.seg.resize(spec.d_seg);
    const double mean = y == 1 ? shift : -shift;
    for (double& v : s.seg) v = mean + unit(rng);
    s.ctx = matvec(projection, s.seg);
    for (double& v : s.ctx) v = spec.noise_corr * v + (1.0 - spec.noise_corr) * unit(rng);
    data.samples.push_back(std::move(s));
  }
  return data;
}

void SplitFracs::validate() const {
  for (double f : {train, val, test}) {
    if (!(f >= 0.0)) throw ValidationError("split_fracs: fractions must be non-negative");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ValidationError("split_fracs: fractions must sum to 1");
  }
}

std::array<Dataset, 3> split_dataset(const Dataset& data, const SplitFracs& fracs) {
  fracs.validate();
  std::array<std::vector<std::size_t>, 3> parts;
  for (Label y : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.samples[i].label == y) idx.push_back(i);
    }
    const auto n = static_cast<double>(idx.size());
    const auto n_train = std::min(idx.size(), static_cast<std::size_t>(std::llround(fracs.train * n)));
    const auto n_val =
        std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(fracs.val * n)));
    parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                    idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  std::array<Dataset, 3> out;
  constexpr std::array<Split, 3> tags{Split::train, Split::val, Split::test};
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end());
    out[p].split = tags[p];
    for (std::size_t i : parts[p]) out[p].samples.push_back(data.samples[i]);
  }
  return out;
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "jsonl") return FileFormat::jsonl;
  throw ValidationError("format: expected csv or jsonl, got '" + name + "'");
}

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".jsonl") return FileFormat::jsonl;
  throw ValidationError("cannot infer data format from '" + path.string() + "' (use .csv or .jsonl)");
}

std::string format_real(double v) {
  // JSON parsers read "-0" as the integer 0.
  if (v == 0.0 && std::signbit(v)) return "-0.0";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

namespace {

void write_csv(const Dataset& data, std::ostream& out) {
  out << "label";
  for (std::size_t i = 0; i < data.d_ctx(); ++i) out << ",ctx_" << i;
  for (std::size_t i = 0; i < data.d_seg(); ++i) out << ",seg_" << i;
  out << '\n';
  for (const auto& s : data.samples) {
    out << s.label;
    for (double v : s.ctx) out << ',' << format_real(v);
    for (double v : s.seg) out << ',' << format_real(v);
    out << '\n';
  }
}

void write_jsonl(const Dataset& data, std::ostream& out) {
  for (const auto& s : data.samples) {
    out << "{\"label\":" << s.label << ",\"ctx\":[";
    for (std::size_t i = 0; i < s.ctx.size(); ++i) out << (i ? "," : "") << format_real(s.ctx[i]);
    out << "],\"seg\":[";
    for (std::size_t i = 0; i < s.seg.size(); ++i) out << (i ? "," : "") << format_real(s.seg[i]);
    out << "]}\n";
  }
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
  throw ValidationError(source + ": line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view text, const std::string& source, std::size_t line, const std::string& col) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    fail_at(source, line, "field '" + col + "' is not a finite real: '" + std::string(text) + "'");
  }
  return v;
}

Label parse_label(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  if (text == "0") return 0;
  if (text == "1") return 1;
  fail_at(source, line, "label '" + std::string(text) + "' is not 0 or 1");
}

Dataset read_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty file");
  const auto header = split_commas(line);
  if (header.empty() || trim(header[0]) != "label") fail_at(source, 1, "header must start with 'label'");
  std::size_t d_ctx = 0;
  std::size_t d_seg = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto name = trim(header[i]);
    if (d_seg == 0 && name == "ctx_" + std::to_string(d_ctx)) {
      ++d_ctx;
    } else if (name == "seg_" + std::to_string(d_seg)) {
      ++d_seg;
    } else {
      fail_at(source, 1, "unexpected column '" + std::string(name) + "'");
    }
  }
  if (d_ctx == 0) fail_at(source, 1, "missing field ctx_0");
  if (d_seg == 0) fail_at(source, 1, "missing field seg_0");

  Dataset data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() < header.size()) {
      fail_at(source, lineno, "missing field '" + std::string(trim(header[fields.size()])) + "'");
    }
    if (fields.size() > header.size()) {
      fail_at(source, lineno, "row has " + std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(header.size()));
    }
    Sample s;
    s.label = parse_label(fields[0], source, lineno);
    for (std::size_t i = 0; i < d_ctx; ++i) {
      s.ctx.push_back(parse_real(fields[1 + i], source, lineno, "ctx_" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < d_seg; ++i) {
      s.seg.push_back(parse_real(fields[1 + d_ctx + i], source, lineno, "seg_" + std::to_string(i)));
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

Vec json_reals(const nlohmann::json& obj, const char* key, const std::string& source, std::size_t line) {
  if (!obj.contains(key)) fail_at(source, line, std::string("missing field '") + key + "'");
  const auto& arr = obj.at(key);
  if (!arr.is_array() || arr.empty()) fail_at(source, line, std::string("field '") + key + "' must be a non-empty array");
  Vec out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) fail_at(source, line, std::string("field '") + key + "' has a non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

Dataset read_jsonl(std::istream& in, const std::string& source) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_at(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail_at(source, lineno, "expected a JSON object");
    if (!obj.contains("label")) fail_at(source, lineno, "missing field 'label'");
    const auto& lab = obj.at("label");
    if (!lab.is_number_integer() || (lab.get<long long>() != 0 && lab.get<long long>() != 1)) {
      fail_at(source, lineno, "label " + lab.dump() + " is not 0 or 1");
    }
    Sample s;
    s.label = static_cast<Label>(lab.get<long long>());
    s.ctx = json_reals(obj, "ctx", source, lineno);
    s.seg = json_reals(obj, "seg", source, lineno);
    if (!data.samples.empty() &&
        (s.ctx.size() != data.d_ctx() || s.seg.size() != data.d_seg())) {
      fail_at(source, lineno, "dimensions " + std::to_string(s.ctx.size()) + "/" + std::to_string(s.seg.size()) +
                                  " differ from earlier rows (" + std::to_string(data.d_ctx()) + "/" +
                                  std::to_string(data.d_seg()) + ")");
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace

void write_dataset(const Dataset& data, std::ostream& out, FileFormat format) {
  if (format == FileFormat::csv) {
    write_csv(data, out);
  } else {
    write_jsonl(data, out);
  }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot open '" + path.string() + "' for writing");
  write_dataset(data, out, format);
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

Dataset read_dataset(std::istream& in, FileFormat format, const std::string& source) {
  Dataset data = format == FileFormat::csv ? read_csv(in, source) : read_jsonl(in, source);
  data.validate();
  return data;
}

Dataset ingest(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file '" + path.string() + "'");
  return read_dataset(in, format, path.string());
}

Dataset ingest(const std::filesystem::path& path) { return ingest(path, format_from_path(path)); }

}  // namespace drmoe
