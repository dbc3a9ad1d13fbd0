#include "pudefect/core_data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "pudefect/error.hpp"
#include "pudefect/random.hpp"

namespace pudefect {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'U', 'F', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8 + 1;

std::string row_ref(std::size_t row) { return "row " + std::to_string(row); }

SampleLabel label_from_code(long code, std::size_t row) {
  if (code < -1 || code > 1) {
    throw Error(ErrorKind::kValue, row_ref(row) + ": label " +
                                       std::to_string(code) +
                                       " is not one of -1, 0, 1");
  }
  return static_cast<SampleLabel>(code);
}

// --- binary ---------------------------------------------------------------

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xff));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t at) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<U>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return static_cast<T>(u);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

FeatureTable parse_pufv(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorKind::kFormat, "PUFV header truncated");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::kFormat, "bad PUFV magic");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kVersion) {
    throw Error(ErrorKind::kFormat,
                "unsupported PUFV version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes, 8);
  const auto d = get_le<std::uint64_t>(bytes, 16);
  const auto flag = static_cast<unsigned char>(bytes[24]);
  if (flag > 1) throw Error(ErrorKind::kFormat, "bad PUFV label flag");
  if (d == 0 && n > 0) {
    throw Error(ErrorKind::kFormat, "PUFV rows with zero feature dimension");
  }
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
  if (n > limit || d > limit || (d != 0 && n > limit / d)) {
    throw Error(ErrorKind::kFormat, "PUFV dimensions overflow");
  }
  const std::uint64_t expected = kHeaderBytes + n * d * 4 + (flag ? n : 0);
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kFormat,
                "PUFV payload is " + std::to_string(bytes.size()) +
                    " bytes, header implies " + std::to_string(expected));
  }

  FeatureTable table;
  table.features.resize(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(d));
  std::size_t at = kHeaderBytes;
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint64_t c = 0; c < d; ++c, at += 4) {
      const float v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kValue, row_ref(r) + ": non-finite value in column " +
                                           std::to_string(c));
      }
      table.features(static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(c)) = v;
    }
  }
  if (flag) {
    std::vector<SampleLabel> labels(n);
    for (std::uint64_t r = 0; r < n; ++r, ++at) {
      labels[r] = label_from_code(static_cast<signed char>(bytes[at]), r);
    }
    table.labels = std::move(labels);
  }
  return table;
}

std::string encode_pufv(const FeatureTable& table) {
  const auto n = static_cast<std::uint64_t>(table.rows());
  const auto d = static_cast<std::uint64_t>(table.dim());
  std::string out;
  out.reserve(kHeaderBytes + n * d * 4 + n);
  out.append(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, n);
  put_le<std::uint64_t>(out, d);
  out.push_back(table.labels ? 1 : 0);
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.dim(); ++c) {
      put_le<std::uint32_t>(out,
                            std::bit_cast<std::uint32_t>(table.features(r, c)));
    }
  }
  if (table.labels) {
    for (SampleLabel l : *table.labels) {
      out.push_back(static_cast<char>(static_cast<std::int8_t>(l)));
    }
  }
  return out;
}

// --- csv ------------------------------------------------------------------

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto result = std::from_chars(s.data(), end, value);
  return result.ec == std::errc() && result.ptr == end && !s.empty();
}

bool is_header(std::string_view line) {
  return trim(line).substr(0, 3) == "id,";
}

void check_header(const std::vector<std::string_view>& fields) {
  if (fields.size() < 2 || trim(fields[0]) != "id" || trim(fields[1]) != "label") {
    throw Error(ErrorKind::kFormat, "malformed CSV header");
  }
  for (std::size_t i = 2; i < fields.size(); ++i) {
    if (trim(fields[i]) != "f" + std::to_string(i - 2)) {
      throw Error(ErrorKind::kFormat, "malformed CSV header: column " +
                                          std::to_string(i) + " should be f" +
                                          std::to_string(i - 2));
    }
  }
}

FeatureTable parse_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      const std::string_view line = rest.substr(0, nl);
      if (!trim(line).empty()) lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }

  std::size_t first = 0;
  std::optional<std::size_t> dim;
  if (!lines.empty() && is_header(lines[0])) {
    const auto fields = split_commas(lines[0]);
    check_header(fields);
    dim = fields.size() - 2;
    first = 1;
  }
  if (!dim) {
    if (lines.empty()) {
      throw Error(ErrorKind::kFormat,
                  "empty CSV without header: feature dimension unknown");
    }
    const auto fields = split_commas(lines[0]);
    if (fields.size() < 3) {
      throw Error(ErrorKind::kFormat, row_ref(0) + ": expected id,label,features");
    }
    dim = fields.size() - 2;
  }

  const std::size_t n = lines.size() - first;
  const auto d = static_cast<Eigen::Index>(*dim);
  FeatureTable table;
  table.features.resize(static_cast<Eigen::Index>(n), d);
  std::vector<SampleLabel> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto fields = split_commas(lines[first + r]);
    if (fields.size() != *dim + 2) {
      throw Error(ErrorKind::kDimension,
                  row_ref(r) + ": expected " + std::to_string(*dim) +
                      " features, found " +
                      std::to_string(fields.size() >= 2 ? fields.size() - 2 : 0));
    }
    long long id = 0;
    if (!parse_number(fields[0], id)) {
      throw Error(ErrorKind::kFormat, row_ref(r) + ": bad id");
    }
    long code = 0;
    if (!parse_number(fields[1], code)) {
      throw Error(ErrorKind::kFormat, row_ref(r) + ": bad label");
    }
    labels[r] = label_from_code(code, r);
    for (Eigen::Index c = 0; c < d; ++c) {
      const std::string_view field = trim(fields[static_cast<std::size_t>(c) + 2]);
      float v = 0.0f;
      if (!parse_number(field, v)) {
        // from_chars accepts "nan"/"inf"; anything else is malformed.
        throw Error(ErrorKind::kFormat, row_ref(r) + ": bad number '" +
                                            std::string(field) + "'");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kValue, row_ref(r) + ": non-finite value in column " +
                                           std::to_string(c));
      }
      table.features(static_cast<Eigen::Index>(r), c) = v;
    }
  }
  table.labels = std::move(labels);
  return table;
}

std::string encode_csv(const FeatureTable& table) {
  std::string out = "id,label";
  for (Eigen::Index c = 0; c < table.dim(); ++c) out += ",f" + std::to_string(c);
  out += '\n';
  std::array<char, 64> buf{};
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    out += std::to_string(r);
    out += ',';
    const int code =
        table.labels ? static_cast<int>((*table.labels)[static_cast<std::size_t>(r)])
                     : -1;
    out += std::to_string(code);
    for (Eigen::Index c = 0; c < table.dim(); ++c) {
      out += ',';
      const auto res =
          std::to_chars(buf.data(), buf.data() + buf.size(), table.features(r, c));
      out.append(buf.data(), res.ptr);
    }
    out += '\n';
  }
  return out;
}

void validate_table(const FeatureTable& table) {
  if (table.labels &&
      table.labels->size() != static_cast<std::size_t>(table.rows())) {
    throw Error(ErrorKind::kDimension, "label count does not match row count");
  }
  check_finite(table.features, "features");
}

}  // namespace

std::size_t LabeledDataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledDataset::validate() const {
  if (labels.size() != static_cast<std::size_t>(features.rows())) {
    throw Error(ErrorKind::kDimension, "label count " +
                                           std::to_string(labels.size()) +
                                           " does not match row count " +
                                           std::to_string(features.rows()));
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] != 0 && labels[r] != 1) {
      throw Error(ErrorKind::kValue, row_ref(r) + ": label must be 0 or 1");
    }
  }
  check_finite(features, "features");
}

void PUDataset::validate() const {
  if (positives.rows() < 1) {
    throw Error(ErrorKind::kEmptyClass, "positive-labeled set is empty");
  }
  if (unlabeled.rows() > 0 && unlabeled.cols() != positives.cols()) {
    throw Error(ErrorKind::kDimension,
                "positive set has d=" + std::to_string(positives.cols()) +
                    ", unlabeled pool has d=" + std::to_string(unlabeled.cols()));
  }
  if (hidden_truth &&
      hidden_truth->size() != static_cast<std::size_t>(unlabeled.rows())) {
    throw Error(ErrorKind::kDimension, "hidden truth length does not match |U|");
  }
  check_finite(positives, "positives");
  check_finite(unlabeled, "unlabeled");
}

void check_finite(const FeatureMatrix& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw Error(ErrorKind::kValue,
                    what + " " + row_ref(static_cast<std::size_t>(r)) +
                        ": non-finite value in column " + std::to_string(c));
      }
    }
  }
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::kCsv;
  if (name == "pufv" || name == "binary") return FileFormat::kPufv;
  throw Error(ErrorKind::kArgument, "unknown format '" + name + "'");
}

std::string to_string(FileFormat format) {
  return format == FileFormat::kCsv ? "csv" : "pufv";
}

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FileFormat::kCsv;
  return FileFormat::kPufv;
}

FeatureTable load_feature_file(const std::filesystem::path& path,
                               FileFormat format) {
  const std::string bytes = read_all(path);
  try {
    return format == FileFormat::kPufv ? parse_pufv(bytes) : parse_csv(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

void save_feature_file(const FeatureTable& table,
                       const std::filesystem::path& path, FileFormat format) {
  validate_table(table);
  write_all(path, format == FileFormat::kPufv ? encode_pufv(table)
                                              : encode_csv(table));
}

LabeledDataset to_labeled(FeatureTable table) {
  if (!table.labels) {
    throw Error(ErrorKind::kFormat, "file carries no labels");
  }
  LabeledDataset data;
  data.labels.reserve(table.labels->size());
  for (std::size_t r = 0; r < table.labels->size(); ++r) {
    const auto l = (*table.labels)[r];
    if (l == SampleLabel::kUnlabeled) {
      throw Error(ErrorKind::kValue,
                  row_ref(r) + ": unlabeled row in a fully labeled dataset");
    }
    data.labels.push_back(static_cast<int>(l));
  }
  data.features = std::move(table.features);
  return data;
}

FeatureTable to_table(const LabeledDataset& data) {
  FeatureTable table;
  table.features = data.features;
  std::vector<SampleLabel> labels;
  labels.reserve(data.labels.size());
  for (int l : data.labels) labels.push_back(static_cast<SampleLabel>(l));
  table.labels = std::move(labels);
  return table;
}

PUDataset to_pu(const FeatureTable& table) {
  std::vector<std::size_t> pos, unl, neg;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const auto row = static_cast<std::size_t>(r);
    const SampleLabel l =
        table.labels ? (*table.labels)[row] : SampleLabel::kUnlabeled;
    switch (l) {
      case SampleLabel::kPositive: pos.push_back(row); break;
      case SampleLabel::kNegative: neg.push_back(row); break;
      case SampleLabel::kUnlabeled: unl.push_back(row); break;
    }
  }
  PUDataset pu;
  pu.positives = select_rows(table.features, pos);
  pu.unlabeled = select_rows(table.features, unl);
  pu.labeled_negatives = select_rows(table.features, neg);
  pu.positive_indices = std::move(pos);
  pu.unlabeled_indices = std::move(unl);
  return pu;
}

LabeledDataset load_labeled(const std::filesystem::path& path,
                            FileFormat format) {
  FeatureTable table = load_feature_file(path, format);
  try {
    return to_labeled(std::move(table));
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

void save_feature_file(const LabeledDataset& data,
                       const std::filesystem::path& path, FileFormat format) {
  data.validate();
  save_feature_file(to_table(data), path, format);
}

std::size_t positive_count(std::size_t n_pos, double positive_fraction) {
  const auto k = static_cast<std::size_t>(
      std::floor(positive_fraction * static_cast<double>(n_pos)));
  return std::clamp<std::size_t>(k, 1, n_pos);
}

PUDataset make_pu_split(const LabeledDataset& full, int positive_class,
                        double positive_fraction, std::uint64_t seed) {
  if (positive_class != 0 && positive_class != 1) {
    throw Error(ErrorKind::kArgument, "positive class must be 0 or 1");
  }
  if (!(positive_fraction > 0.0 && positive_fraction <= 1.0)) {
    throw Error(ErrorKind::kArgument, "positive fraction must be in (0, 1]");
  }
  if (full.labels.size() != static_cast<std::size_t>(full.size())) {
    throw Error(ErrorKind::kDimension, "label count does not match row count");
  }
  std::vector<std::size_t> class_rows;
  for (std::size_t r = 0; r < full.labels.size(); ++r) {
    if (full.labels[r] == positive_class) class_rows.push_back(r);
  }
  if (class_rows.empty()) {
    throw Error(ErrorKind::kEmptyClass,
                "no samples of class " + std::to_string(positive_class));
  }

  Rng rng(seed);
  const std::size_t k = positive_count(class_rows.size(), positive_fraction);
  std::vector<std::size_t> drawn =
      sample_without_replacement(class_rows.size(), k, rng);
  std::vector<bool> in_p(full.labels.size(), false);
  PUDataset pu;
  pu.positive_indices.reserve(k);
  for (std::size_t i : drawn) {
    pu.positive_indices.push_back(class_rows[i]);
    in_p[class_rows[i]] = true;
  }
  std::vector<int> truth;
  for (std::size_t r = 0; r < full.labels.size(); ++r) {
    if (in_p[r]) continue;
    pu.unlabeled_indices.push_back(r);
    truth.push_back(full.labels[r] == positive_class ? 1 : 0);
  }
  pu.positives = select_rows(full.features, pu.positive_indices);
  pu.unlabeled = select_rows(full.features, pu.unlabeled_indices);
  pu.labeled_negatives.resize(0, full.dim());
  pu.hidden_truth = std::move(truth);
  return pu;
}

FeatureMatrix select_rows(const FeatureMatrix& m,
                          const std::vector<std::size_t>& rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace pudefect
