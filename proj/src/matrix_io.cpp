#include "qdx/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace qdx {

namespace {

double parse_real(std::string_view s, std::string_view whole) {
  if (s.empty()) throw ConfigError("malformed complex entry '" + std::string(whole) + "'");
  std::string buf(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(buf, &used);
  } catch (const std::exception&) {
    throw ConfigError("malformed complex entry '" + std::string(whole) + "'");
  }
  if (used != buf.size()) throw ConfigError("malformed complex entry '" + std::string(whole) + "'");
  return v;
}

}  // namespace

std::complex<double> parse_complex(std::string_view token) {
  if (token.empty()) throw ConfigError("empty complex entry");
  const char last = token.back();
  if (last != 'j' && last != 'i') return {parse_real(token, token), 0.0};

  const std::string_view body = token.substr(0, token.size() - 1);
  // The split point is the last sign that is not the leading sign and not
  // part of an exponent.
  std::size_t split = std::string_view::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string_view::npos) {
    // Pure imaginary: "0.5j", "-j".
    if (body.empty() || body == "+") return {0.0, 1.0};
    if (body == "-") return {0.0, -1.0};
    return {0.0, parse_real(body, token)};
  }
  const double re = parse_real(body.substr(0, split), token);
  const std::string_view im_part = body.substr(split);
  double im = 0;
  if (im_part == "+") {
    im = 1;
  } else if (im_part == "-") {
    im = -1;
  } else {
    im = parse_real(im_part, token);
  }
  return {re, im};
}

std::string format_complex(std::complex<double> z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

ComplexMatrix read_matrix(std::istream& in) {
  std::vector<std::vector<std::complex<double>>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::complex<double>> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_complex(tok));
    rows.push_back(std::move(row));
  }
  const auto n = rows.size();
  if (n == 0) throw ConfigError("matrix file contains no rows");
  ComplexMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) throw ConfigError("matrix is not square");
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

ComplexMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file " + path);
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const ComplexMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_complex(m(r, c));
    }
    out << '\n';
  }
}

}  // namespace qdx
