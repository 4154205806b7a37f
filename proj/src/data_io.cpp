#include "calib/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <system_error>

namespace calib {

namespace {

// Domain tags keep the generator streams of unrelated modules independent
// even when they share a seed value.
constexpr std::uint64_t kSyntheticStream = 0x5D47A;
constexpr std::uint64_t kSplitStream = 0x5F117;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& field, const std::filesystem::path& path, int line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                      ": cannot parse '" + field + "' as a finite number");
  return v;
}

long parse_int(const std::string& field, const std::filesystem::path& path, int line_no) {
  long v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                      ": cannot parse '" + field + "' as an integer");
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Dataset take_rows(const Dataset& data, std::span<const std::size_t> rows) {
  Matrix features(rows.size(), data.features.cols());
  std::vector<int> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < data.features.cols(); ++c)
      features(i, c) = data.features(rows[i], c);
    labels[i] = data.labels[rows[i]];
  }
  return {std::move(features), LabelVector(std::move(labels), data.labels.num_classes())};
}

}  // namespace

LabelMap::LabelMap(std::vector<std::string> ordered_names) : names_(std::move(ordered_names)) {
  if (names_.empty()) throw Error(ErrorKind::InvalidArgument, "LabelMap needs at least one class");
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j])
        throw Error(ErrorKind::InvalidArgument, "duplicate class name '" + names_[i] + "'");
}

LabelMap LabelMap::default_lung_map() {
  return LabelMap({"normal", "squamous", "adenocarcinoma", "large-cell"});
}

int LabelMap::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw Error(ErrorKind::Range, "unknown class name '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

LabelVector remap_labels(std::span<const std::string> raw_labels, const LabelMap& map) {
  std::vector<int> out;
  out.reserve(raw_labels.size());
  for (const auto& name : raw_labels) out.push_back(map.index_of(name));
  return LabelVector(std::move(out), map.size());
}

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& config) {
  if (config.k < 2 || config.d < 1 || config.n_train < config.k || config.n_test < config.k ||
      !(config.separation > 0.0))
    throw Error(ErrorKind::InvalidArgument, "invalid synthetic dataset config");

  Rng root = Rng(config.seed).split(kSyntheticStream);
  const auto make_split = [&](int n, std::uint64_t stream) {
    Rng rng = root.split(stream);
    // Balanced to within one sample: the first n % k classes get the extra.
    std::vector<int> labels;
    labels.reserve(n);
    for (int c = 0; c < config.k; ++c) {
      const int count = n / config.k + (c < n % config.k ? 1 : 0);
      labels.insert(labels.end(), count, c);
    }
    rng.shuffle(labels);

    Matrix features(n, config.d);
    for (int i = 0; i < n; ++i) {
      features(i, 0) = labels[i] * config.separation + rng.normal();
      for (int c = 1; c < config.d; ++c) features(i, c) = rng.normal();
    }
    return Dataset{std::move(features), LabelVector(std::move(labels), config.k)};
  };

  return {make_split(config.n_train, 0), make_split(config.n_test, 1)};
}

LogitBatch load_logits(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw Error(ErrorKind::Parse, path.string() + ":1: missing header");

  const std::vector<std::string> header = split_fields(lines[0]);
  const std::size_t k = header.size();
  for (std::size_t j = 0; j < k; ++j)
    if (header[j] != "l" + std::to_string(j))
      throw Error(ErrorKind::Parse, path.string() + ":1: expected header l0,...,l" +
                                        std::to_string(k - 1) + ", got '" + lines[0] + "'");
  if (lines.size() < 2) throw Error(ErrorKind::Parse, path.string() + ": no data rows");

  Matrix values(lines.size() - 1, k);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::vector<std::string> fields = split_fields(lines[r]);
    if (fields.size() != k)
      throw Error(ErrorKind::Dimension, path.string() + ":" + std::to_string(r + 1) + ": expected " +
                                            std::to_string(k) + " fields, got " +
                                            std::to_string(fields.size()));
    for (std::size_t j = 0; j < k; ++j)
      values(r - 1, j) = parse_double(fields[j], path, static_cast<int>(r + 1));
  }
  return LogitBatch(std::move(values));
}

std::vector<int> load_label_column(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "label")
    throw Error(ErrorKind::Parse, path.string() + ":1: expected header 'label'");
  if (lines.size() < 2) throw Error(ErrorKind::Parse, path.string() + ": no data rows");

  std::vector<int> labels;
  labels.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r)
    labels.push_back(static_cast<int>(parse_int(lines[r], path, static_cast<int>(r + 1))));
  return labels;
}

std::pair<LogitBatch, LabelVector> load_logits_labels(const std::filesystem::path& logits_path,
                                                      const std::filesystem::path& labels_path) {
  LogitBatch logits = load_logits(logits_path);
  std::vector<int> labels = load_label_column(labels_path);
  if (labels.size() != logits.n())
    throw Error(ErrorKind::Dimension, labels_path.string() + ": " + std::to_string(labels.size()) +
                                          " labels but " + logits_path.string() + " has " +
                                          std::to_string(logits.n()) + " rows");
  const int k = static_cast<int>(logits.k());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= k)
      throw Error(ErrorKind::Range, labels_path.string() + ":" + std::to_string(i + 2) +
                                        ": label " + std::to_string(labels[i]) +
                                        " outside [0, " + std::to_string(k - 1) + "]");
  return {std::move(logits), LabelVector(std::move(labels), k)};
}

namespace {
std::string shortest_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace

void save_logits(const std::filesystem::path& path, const LogitBatch& logits) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Parse, "cannot write " + path.string());
  for (std::size_t j = 0; j < logits.k(); ++j) out << (j ? ",l" : "l") << j;
  out << '\n';
  for (std::size_t i = 0; i < logits.n(); ++i) {
    for (std::size_t j = 0; j < logits.k(); ++j) {
      if (j) out << ',';
      out << shortest_double(logits.values()(i, j));
    }
    out << '\n';
  }
}

void save_labels(const std::filesystem::path& path, const LabelVector& labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Parse, "cannot write " + path.string());
  out << "label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << labels[i] << '\n';
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, RngSeed seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error(ErrorKind::InvalidArgument, "split fraction must lie in (0, 1)");
  const std::size_t n = data.features.rows();
  const std::size_t n_first =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_first == 0 || n_first == n)
    throw Error(ErrorKind::InvalidArgument, "split would leave an empty part");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).split(kSplitStream);
  rng.shuffle(order);

  return {take_rows(data, std::span(order).first(n_first)),
          take_rows(data, std::span(order).subspan(n_first))};
}

}  // namespace calib
