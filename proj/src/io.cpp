#include "localembed/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace localembed {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

Dataset Dataset::subset(std::span<const Index> rows) const {
  return {features.select_rows(rows), labels.select_rows(rows)};
}

Dataset parse_xmc(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_xmc(in, options, path.string());
}

Dataset parse_xmc(std::istream& in, const ParseOptions& options, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  const auto head = split_ws(line);
  std::size_t n = 0, d = 0, num_labels = 0;
  if (head.size() != 3 || !parse_number(head[0], n) || !parse_number(head[1], d) || !parse_number(head[2], num_labels)) {
    throw ParseError(source, 1, "header must be three non-negative integers 'n d L'");
  }

  std::vector<std::string> body;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    body.push_back(line);
  }
  while (!body.empty() && body.back().empty()) body.pop_back();
  if (body.size() != n) {
    throw ParseError(source, body.size() + 1,
                     "header declares " + std::to_string(n) + " points but file has " + std::to_string(body.size()));
  }

  Dataset data{SparseMatrix(0, d), SparseMatrix(0, num_labels)};
  std::vector<Index> label_idx;
  std::vector<double> label_val;
  std::vector<std::pair<Index, double>> feats;
  std::vector<Index> feat_idx;
  std::vector<double> feat_val;

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t lineno = r + 2;
    const std::string_view text = body[r];
    auto tokens = split_ws(text);
    std::size_t t = 0;

    label_idx.clear();
    const bool has_label_field = !text.empty() && !is_space(text.front()) && !tokens.empty() &&
                                 tokens[0].find(':') == std::string_view::npos;
    if (has_label_field) {
      std::string_view field = tokens[t++];
      std::size_t pos = 0;
      while (pos <= field.size()) {
        const std::size_t comma = std::min(field.find(',', pos), field.size());
        const auto part = field.substr(pos, comma - pos);
        long long label = 0;
        if (!parse_number(part, label)) throw ParseError(source, lineno, "bad label '" + std::string(part) + "'");
        if (label < 0 || static_cast<std::size_t>(label) >= num_labels) {
          throw ParseError(source, lineno, "label " + std::to_string(label) + " out of range [0," +
                                               std::to_string(num_labels) + ")");
        }
        label_idx.push_back(static_cast<Index>(label));
        pos = comma + 1;
      }
      std::sort(label_idx.begin(), label_idx.end());
      if (std::adjacent_find(label_idx.begin(), label_idx.end()) != label_idx.end())
        throw ParseError(source, lineno, "duplicate label");
    }

    feats.clear();
    for (; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError(source, lineno, "expected feat:value, got '" + std::string(tok) + "'");
      long long idx = 0;
      double value = 0.0;
      if (!parse_number(tok.substr(0, colon), idx))
        throw ParseError(source, lineno, "bad feature index in '" + std::string(tok) + "'");
      if (!parse_number(tok.substr(colon + 1), value) || !std::isfinite(value))
        throw ParseError(source, lineno, "bad feature value in '" + std::string(tok) + "'");
      if (options.one_indexed) --idx;
      if (idx < 0 || static_cast<std::size_t>(idx) >= d) {
        throw ParseError(source, lineno, "feature index " + std::string(tok.substr(0, colon)) + " out of range");
      }
      feats.emplace_back(static_cast<Index>(idx), value);
    }
    std::sort(feats.begin(), feats.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    feat_idx.clear();
    feat_val.clear();
    for (const auto& [j, v] : feats) {
      if (!feat_idx.empty() && feat_idx.back() == j) throw ParseError(source, lineno, "duplicate feature index");
      feat_idx.push_back(j);
      feat_val.push_back(v);
    }
    label_val.assign(label_idx.size(), 1.0);
    data.labels.push_row(label_idx, label_val);
    data.features.push_row(feat_idx, feat_val);
  }
  return data;
}

void write_xmc(const Dataset& data, std::ostream& out) {
  if (data.features.rows() != data.labels.rows()) throw DimensionError("write_xmc: row count mismatch");
  out << data.num_points() << ' ' << data.feature_dim() << ' ' << data.label_count() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < data.num_points(); ++i) {
    const auto y = data.labels.row(i);
    for (std::size_t p = 0; p < y.size(); ++p) {
      if (p > 0) out << ',';
      out << y.indices[p];
    }
    const auto x = data.features.row(i);
    if (y.empty()) out << ' ';
    for (std::size_t p = 0; p < x.size(); ++p) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x.values[p]);
      if (p > 0 || !y.empty()) out << ' ';
      out << x.indices[p] << ':' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

void write_xmc(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_xmc(data, out);
}

SplitIndices random_split(std::size_t n, std::size_t train_size, std::uint64_t seed) {
  if (train_size > n) throw std::invalid_argument("random_split: train size exceeds point count");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::vector<Index>> read_index_columns(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<Index>> columns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (columns.empty()) columns.resize(tokens.size());
    if (tokens.size() != columns.size()) throw ParseError(path.string(), lineno, "ragged split file");
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      long long id = 0;
      if (!parse_number(tokens[c], id) || id < 1 || static_cast<std::size_t>(id) > n)
        throw ParseError(path.string(), lineno, "bad one-based row id '" + std::string(tokens[c]) + "'");
      columns[c].push_back(static_cast<Index>(id - 1));
    }
  }
  for (auto& col : columns) std::sort(col.begin(), col.end());
  return columns;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "k,precision\n";
  char buf[64];
  for (const auto& [k, p] : report.precision) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", k, p);
    out << buf;
  }
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  write_report_csv(report, out);
  return out.str();
}

}  // namespace localembed
