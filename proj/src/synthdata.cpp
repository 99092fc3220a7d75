#include "spcl/synthdata.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spcl/error.hpp"
#include "spcl/rng.hpp"

namespace spcl {

namespace {

void validate_labels(const Labels& labels, std::size_t rows, int num_classes, const char* what) {
  if (labels.size() != rows) {
    throw ValidationError(std::string(what) + ": " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(rows) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ValidationError(std::string(what) + ": label " + std::to_string(labels[i]) +
                            " at row " + std::to_string(i) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
}

Matrix draw_clusters(const ShiftSpec& spec, const Matrix& means, Rng& rng, Labels& labels) {
  const auto n = static_cast<std::size_t>(spec.per_class_count);
  const auto d = static_cast<std::size_t>(spec.dim);
  Matrix x(means.rows() * n, d);
  labels.assign(x.rows(), 0);
  std::size_t r = 0;
  for (std::size_t k = 0; k < means.rows(); ++k) {
    for (std::size_t i = 0; i < n; ++i, ++r) {
      for (std::size_t c = 0; c < d; ++c) x(r, c) = means(k, c) + spec.noise_sigma * rng.gaussian();
      labels[r] = static_cast<int>(k);
    }
  }
  return x;
}

struct ParsedFile {
  Matrix features;
  int num_classes = 0;
  std::optional<Labels> labels;
};

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(std::string_view tok, const std::filesystem::path& path, std::size_t line,
                  std::size_t field) {
  // strtod handles the full %.17g output range and is locale-independent in the C locale.
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || !std::isfinite(v)) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": field " +
                     std::to_string(field) + ": invalid real '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view tok, const std::filesystem::path& path, std::size_t line,
                    const char* field) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + field +
                     ": invalid integer '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

void write_file(const std::filesystem::path& path, const Matrix& x, int num_classes,
                const Labels* labels) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << x.rows() << ' ' << x.cols() << ' ' << num_classes << ' ' << (labels ? 1 : 0) << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (c) os << ' ';
      os << format_real(x(r, c));
    }
    if (labels) os << ' ' << (*labels)[r];
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

ParsedFile read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ":1: missing header");
  const auto header = split_ws(line);
  if (header.size() != 4) {
    throw ParseError(path.string() + ":1: header needs 'rows cols num_classes labeled'");
  }
  const auto rows = parse_int(header[0], path, 1, "rows");
  const auto cols = parse_int(header[1], path, 1, "cols");
  const auto num_classes = parse_int(header[2], path, 1, "num_classes");
  const auto labeled = parse_int(header[3], path, 1, "labeled");
  if (rows < 0 || cols < 0 || num_classes < 0 || (labeled != 0 && labeled != 1)) {
    throw ParseError(path.string() + ":1: invalid header values");
  }
  ParsedFile out;
  out.num_classes = static_cast<int>(num_classes);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(rows * cols));
  Labels labels;
  const std::size_t expected = static_cast<std::size_t>(cols) + (labeled ? 1 : 0);
  for (long long r = 0; r < rows; ++r) {
    const std::size_t lineno = static_cast<std::size_t>(r) + 2;
    if (!std::getline(is, line)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(rows) + " sample lines, found " + std::to_string(r));
    }
    const auto toks = split_ws(line);
    if (toks.size() != expected) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(expected) + " fields, found " + std::to_string(toks.size()));
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(cols); ++c)
      data.push_back(parse_real(toks[c], path, lineno, c + 1));
    if (labeled) labels.push_back(static_cast<int>(parse_int(toks.back(), path, lineno, "label")));
  }
  out.features = Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                        std::move(data));
  if (labeled) {
    validate_labels(labels, out.features.rows(), out.num_classes, path.string().c_str());
    out.labels = std::move(labels);
  }
  return out;
}

}  // namespace

void LabeledDomain::validate() const {
  if (num_classes < 1) throw ValidationError("LabeledDomain: num_classes must be positive");
  validate_labels(labels, features.rows(), num_classes, "LabeledDomain");
  if (features.rows() < static_cast<std::size_t>(num_classes)) {
    throw ValidationError("LabeledDomain: fewer samples than classes");
  }
}

void UnlabeledDomain::validate() const {
  if (num_classes < 1) throw ValidationError("UnlabeledDomain: num_classes must be positive");
  if (hidden_labels) validate_labels(*hidden_labels, features.rows(), num_classes, "UnlabeledDomain");
}

void ShiftSpec::validate() const {
  if (num_classes < 2 || num_classes > 16)
    throw ValidationError("ShiftSpec: num_classes must be in [2, 16]");
  if (dim < 2) throw ValidationError("ShiftSpec: dim must be at least 2");
  if (per_class_count < 1) throw ValidationError("ShiftSpec: per_class_count must be positive");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma))
    throw ValidationError("ShiftSpec: noise_sigma must be positive");
  if (!std::isfinite(rotation_deg)) throw ValidationError("ShiftSpec: rotation_deg must be finite");
  if (!translation.empty() && translation.size() != static_cast<std::size_t>(dim))
    throw ValidationError("ShiftSpec: translation length must equal dim");
}

Matrix class_means(const ShiftSpec& spec) {
  Matrix means(static_cast<std::size_t>(spec.num_classes), static_cast<std::size_t>(spec.dim));
  for (int k = 0; k < spec.num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / spec.num_classes;
    means(k, 0) = kClassMeanRadius * std::cos(angle);
    means(k, 1) = kClassMeanRadius * std::sin(angle);
  }
  return means;
}

void apply_shift(const ShiftSpec& spec, Matrix& points) {
  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const double x = points(r, 0);
    const double y = points(r, 1);
    points(r, 0) = c * x - s * y;
    points(r, 1) = s * x + c * y;
    for (std::size_t j = 0; j < spec.translation.size(); ++j) points(r, j) += spec.translation[j];
  }
}

std::pair<LabeledDomain, UnlabeledDomain> generate_pair(const ShiftSpec& spec) {
  spec.validate();
  const Matrix means = class_means(spec);
  Rng rng(spec.seed);

  LabeledDomain source;
  source.features = draw_clusters(spec, means, rng, source.labels);
  source.num_classes = spec.num_classes;
  source.name = "source";

  UnlabeledDomain target;
  Labels truth;
  target.features = draw_clusters(spec, means, rng, truth);
  apply_shift(spec, target.features);
  target.num_classes = spec.num_classes;
  target.name = "target";
  target.hidden_labels = std::move(truth);
  return {std::move(source), std::move(target)};
}

void save_domain(const LabeledDomain& domain, const std::filesystem::path& path) {
  domain.validate();
  write_file(path, domain.features, domain.num_classes, &domain.labels);
}

void save_domain(const UnlabeledDomain& domain, const std::filesystem::path& path) {
  domain.validate();
  write_file(path, domain.features, domain.num_classes,
             domain.hidden_labels ? &*domain.hidden_labels : nullptr);
}

LabeledDomain load_labeled_domain(const std::filesystem::path& path) {
  auto parsed = read_file(path);
  if (!parsed.labels) throw ParseError(path.string() + ":1: expected labeled=1");
  LabeledDomain d{std::move(parsed.features), std::move(*parsed.labels), parsed.num_classes,
                  path.stem().string()};
  d.validate();
  return d;
}

UnlabeledDomain load_unlabeled_domain(const std::filesystem::path& path) {
  auto parsed = read_file(path);
  UnlabeledDomain d{std::move(parsed.features), parsed.num_classes, path.stem().string(),
                    std::move(parsed.labels)};
  d.validate();
  return d;
}

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  write_file(path, m, static_cast<int>(m.cols()), nullptr);
}

Matrix load_matrix(const std::filesystem::path& path) { return read_file(path).features; }

}  // namespace spcl
