#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "adjfree/errors.hpp"
#include "adjfree/io.hpp"

namespace adjfree {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); });
}

}  // namespace

CsrMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  ++lineno;
  const auto header = split_ws(line);
  if (header.size() != 5 || lower(std::string(header[0])) != "%%matrixmarket") {
    throw ParseError(lineno, "missing %%MatrixMarket banner");
  }
  const std::string object = lower(std::string(header[1]));
  const std::string format = lower(std::string(header[2]));
  const std::string field = lower(std::string(header[3]));
  const std::string symmetry = lower(std::string(header[4]));
  if (object != "matrix") throw Error(ErrorCode::UnsupportedFormat, "object '" + object + "'");
  if (format != "coordinate") throw Error(ErrorCode::UnsupportedFormat, "format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double") {
    throw Error(ErrorCode::UnsupportedFormat, "field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw Error(ErrorCode::UnsupportedFormat, "symmetry '" + symmetry + "'");
  }
  const bool symmetric = symmetry == "symmetric";

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t entries = 0;
  bool have_size = false;
  std::vector<std::tuple<std::size_t, std::size_t, double>> triplets;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line) || line.front() == '%') continue;
    const auto tokens = split_ws(line);
    if (!have_size) {
      if (tokens.size() != 3) throw ParseError(lineno, "size line needs 3 integers");
      rows = parse_number<std::size_t>(tokens[0], lineno, "row count");
      cols = parse_number<std::size_t>(tokens[1], lineno, "column count");
      entries = parse_number<std::size_t>(tokens[2], lineno, "entry count");
      if (rows == 0 || cols == 0) throw ParseError(lineno, "dimensions must be positive");
      if (symmetric && rows != cols) throw ParseError(lineno, "symmetric matrix must be square");
      have_size = true;
      triplets.reserve(symmetric ? 2 * entries : entries);
      continue;
    }
    if (tokens.size() != 3) throw ParseError(lineno, "entry line needs row, column and value");
    if (seen == entries) throw ParseError(lineno, "more entries than declared");
    const auto i = parse_number<std::size_t>(tokens[0], lineno, "row index");
    const auto j = parse_number<std::size_t>(tokens[1], lineno, "column index");
    const double value = field == "integer" ? static_cast<double>(parse_number<long long>(tokens[2], lineno, "value"))
                                            : parse_number<double>(tokens[2], lineno, "value");
    if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(lineno, "index out of range");
    if (!std::isfinite(value)) throw ParseError(lineno, "non-finite value");
    triplets.emplace_back(i - 1, j - 1, value);
    if (symmetric && i != j) triplets.emplace_back(j - 1, i - 1, value);
    ++seen;
  }
  if (!have_size) throw ParseError(lineno, "missing size line");
  if (seen != entries) throw ParseError(lineno, "fewer entries than declared");
  return CsrMatrix::from_triplets(rows, cols, std::move(triplets));
}

CsrMatrix read_matrix_market_csr(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_matrix_market(in);
}

LinearOperator read_matrix_market(const std::filesystem::path& path, Capability cap) {
  return LinearOperator::csr(read_matrix_market_csr(path), cap);
}

void write_matrix_market(const CsrMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const auto idx = static_cast<std::size_t>(p);
      out << i + 1 << ' ' << a.col_idx[idx] + 1 << ' ' << format_double(a.values[idx]) << '\n';
    }
  }
}

void write_matrix_market(const CsrMatrix& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_matrix_market(a, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace adjfree
