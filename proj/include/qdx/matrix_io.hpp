#pragma once

// Plain-text complex matrices: one row per line, whitespace-separated entries
// written as "re", "re+imj" or "re-imj". Lines starting with '#' are comments.

#include <complex>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "qdx/core.hpp"

namespace qdx {

std::complex<double> parse_complex(std::string_view token);
std::string format_complex(std::complex<double> z);

/// Reads a square matrix. Throws ConfigError on ragged or malformed input.
ComplexMatrix read_matrix(std::istream& in);
ComplexMatrix load_matrix(const std::string& path);

void write_matrix(std::ostream& out, const ComplexMatrix& m);

}  // namespace qdx
